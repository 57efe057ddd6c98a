"""Minimum-fuel lunar descent optimisation with engine-sizing sweeps."""
