"""CSV persistence for trajectories and sweep tables.

Floats are written with nine significant digits so that repeated runs give
byte-identical files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .pareto import ParetoResult, parse_table, tabulate
from .transcription import TrajectorySolution

TRAJECTORY_COLUMNS = ("t_s", "r_m", "alt_m", "theta_rad", "phi_rad", "w_ms", "u_ms", "v_ms",
                      "m_kg", "T_N", "alpha_rad", "beta_rad")


class TableError(ValueError):
    """A CSV file does not follow the expected schema."""


@dataclass(frozen=True)
class TrajectoryTable:
    """Per-node trajectory columns keyed by the CSV header names."""

    columns: dict

    def __post_init__(self):
        missing = [c for c in TRAJECTORY_COLUMNS if c not in self.columns]
        if missing:
            raise TableError(f"missing columns: {', '.join(missing)}")
        t = np.asarray(self.columns["t_s"])
        if t.size == 0:
            raise TableError("trajectory table is empty")
        if np.any(np.diff(t) <= 0):
            raise TableError("t_s must be strictly increasing")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["t_s"])

    @property
    def times(self) -> np.ndarray:
        return self.columns["t_s"]

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.columns[c] for c in
                                ("r_m", "theta_rad", "phi_rad", "w_ms", "u_ms", "v_ms", "m_kg")])

    @property
    def controls(self) -> np.ndarray:
        return np.column_stack([self.columns[c] for c in ("T_N", "alpha_rad", "beta_rad")])

    @property
    def moon_radius(self) -> float:
        return float(np.median(self.columns["r_m"] - self.columns["alt_m"]))


def trajectory_table(sol: TrajectorySolution, moon_radius: float) -> TrajectoryTable:
    s, c = sol.states, sol.controls
    cols = dict(zip(TRAJECTORY_COLUMNS, (
        sol.times, s[:, 0], s[:, 0] - moon_radius, s[:, 1], s[:, 2], s[:, 3], s[:, 4],
        s[:, 5], s[:, 6], c[:, 0], c[:, 1], c[:, 2])))
    return TrajectoryTable({k: np.asarray(v, dtype=float) for k, v in cols.items()})


def _write_rows(path: Path, rows: Sequence[Sequence[str]]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _read_rows(path: Path) -> list[list[str]]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            return [row for row in csv.reader(fh)]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_trajectory(sol: TrajectorySolution | TrajectoryTable, path,
                     moon_radius: float | None = None) -> Path:
    """Write the node table; ``moon_radius`` is required for a solution."""
    if isinstance(sol, TrajectorySolution):
        if moon_radius is None:
            raise ValueError("moon_radius is needed to compute alt_m")
        table = trajectory_table(sol, moon_radius)
    else:
        table = sol
    rows = [list(TRAJECTORY_COLUMNS)]
    data = np.column_stack([table[c] for c in TRAJECTORY_COLUMNS])
    rows += [["%.9g" % v for v in row] for row in data]
    return _write_rows(path, rows)


def read_trajectory(path) -> TrajectoryTable:
    rows = _read_rows(path)
    if not rows or tuple(rows[0]) != TRAJECTORY_COLUMNS:
        raise TableError(f"{path}: header must be {','.join(TRAJECTORY_COLUMNS)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise TableError(f"{path}: {exc}") from None
    if data.size == 0:
        raise TableError(f"{path}: no data rows")
    if data.shape[1] != len(TRAJECTORY_COLUMNS):
        raise TableError(f"{path}: expected {len(TRAJECTORY_COLUMNS)} columns")
    return TrajectoryTable({c: data[:, i] for i, c in enumerate(TRAJECTORY_COLUMNS)})


def write_pareto(result: ParetoResult, path) -> Path:
    return _write_rows(path, tabulate(result))


def read_pareto(path, mode: str | None = None) -> ParetoResult:
    rows = _read_rows(path)
    try:
        return parse_table(rows, mode)
    except ValueError as exc:
        raise TableError(f"{path}: {exc}") from None


def write_report(path, lines: Sequence[str]) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path
