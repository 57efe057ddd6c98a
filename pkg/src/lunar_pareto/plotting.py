"""SVG figures for trajectories and sweep results.

Plots are a pure function of the CSV tables, and the SVG writer is pinned
(fixed hash salt, no date stamp) so identical tables give identical bytes.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import TrajectoryTable  # noqa: E402
from .pareto import ParetoResult  # noqa: E402

_RC = {"svg.hashsalt": "lunar-pareto", "svg.fonttype": "path", "font.size": 9}
_SVG_META = {"Date": None}

TRAJECTORY_PLOTS = ("altitude", "vertical_velocity", "downrange", "horizontal_velocity",
                    "crossrange", "pitch")


def _unit(theta, phi):
    return np.stack([np.cos(phi) * np.cos(theta), np.cos(phi) * np.sin(theta), np.sin(phi)],
                    axis=-1)


def ground_track(table: TrajectoryTable) -> tuple[np.ndarray, np.ndarray]:
    """Downrange and crossrange in metres relative to the first node.

    Both are great-circle angles scaled by the moon radius. Downrange is
    positive along the initial horizontal velocity (east when the lander
    starts with none), crossrange positive to its left.
    """
    theta, phi = table["theta_rad"], table["phi_rad"]
    R = table.moon_radius
    p = _unit(theta, phi)
    p0 = p[0]
    east = np.array([-math.sin(theta[0]), math.cos(theta[0]), 0.0])
    north = np.cross(p0, east)
    u0, v0 = table["u_ms"][0], table["v_ms"][0]
    speed = math.hypot(u0, v0)
    d0 = (u0 * east + v0 * north) / speed if speed > 0 else east
    c0 = np.cross(p0, d0)
    along = p @ p0
    down = R * np.arctan2(p @ d0, along)
    # angular offset from the initial great circle; stays defined past a quarter orbit
    cross = R * np.arcsin(np.clip(p @ c0, -1.0, 1.0))
    return down, cross


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path


def _line(path, x, y, xlabel, ylabel, title):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(x, y, "-", lw=1.4, color="C0")
    ax.plot(x, y, ".", ms=3, color="C0")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_trajectory(table: TrajectoryTable, out_dir) -> list[Path]:
    """Write the six trajectory profiles; returns the file paths."""
    if len(table) == 0:
        raise ValueError("empty trajectory table")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = table.times
    down, cross = ground_track(table)
    horiz = np.hypot(table["u_ms"], table["v_ms"])
    series = {
        "altitude": (table["alt_m"] / 1000.0, "Altitude (km)", "Altitude profile"),
        "vertical_velocity": (table["w_ms"], "Vertical velocity (m/s)",
                              "Vertical velocity profile"),
        "downrange": (down / 1000.0, "Downrange (km)", "Downrange profile"),
        "horizontal_velocity": (horiz, "Horizontal velocity (m/s)",
                                "Horizontal velocity profile"),
        "crossrange": (cross / 1000.0, "Crossrange (km)", "Crossrange profile"),
        "pitch": (np.degrees(table["beta_rad"]), "Pitch above local horizontal (deg)",
                  "Pitch profile"),
    }
    paths = []
    with plt.rc_context(_RC):
        for name in TRAJECTORY_PLOTS:
            y, ylabel, title = series[name]
            paths.append(_line(out / f"{name}.svg", t, y, "Time (s)", ylabel, title))
    return paths


def plot_pareto(result: ParetoResult, out_dir, name: str = "pareto") -> Path:
    """Effective payload against thrust-to-mass with the maximizer marked."""
    pts = result.converged_points
    if not result.points:
        raise ValueError("empty Pareto table")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        if pts:
            x = np.array([p.thrust_to_mass0 for p in pts])
            y = np.array([p.effective_payload for p in pts])
            ax.plot(x, y, "-o", ms=4, lw=1.4, color="C0", label="effective payload")
            ax.plot(x, [p.final_mass for p in pts], "--", lw=1.0, color="C1",
                    label="final mass")
        failed = [p for p in result.points if not p.converged]
        if failed:
            lo = min(p.effective_payload for p in pts) if pts else 0.0
            ax.plot([p.thrust_to_mass0 for p in failed], [lo] * len(failed), "x", color="C3",
                    label="not converged")
        best = result.best
        if best is not None:
            ax.plot([best.thrust_to_mass0], [best.effective_payload], "*", ms=12, color="C2",
                    label="maximizer")
            ax.annotate(f"{best.thrust_to_mass0:.2f} m/s$^2$\n{best.effective_payload:.1f} kg",
                        (best.thrust_to_mass0, best.effective_payload),
                        textcoords="offset points", xytext=(8, -24), fontsize=8)
        ax.set_xlabel("Thrust-to-initial-mass (m/s$^2$)")
        ax.set_ylabel("Mass (kg)")
        ax.set_title("Pareto optimal curve")
        ax.grid(True, alpha=0.3)
        ax.legend(loc="lower right", fontsize=8)
        fig.tight_layout()
        return _save(fig, out / f"{name}.svg")


def emit_plots(out_dir, trajectory: TrajectoryTable | None = None,
               pareto: ParetoResult | None = None) -> list[Path]:
    if trajectory is None and pareto is None:
        raise ValueError("nothing to plot")
    paths = []
    if trajectory is not None:
        paths += plot_trajectory(trajectory, out_dir)
    if pareto is not None:
        paths.append(plot_pareto(pareto, out_dir))
    return paths
