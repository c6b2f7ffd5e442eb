"""Frequency-domain quality assessment.

Gain curves ``||H(jw)||_2`` over log-spaced grids, pointwise error curves
between a full and a reduced model, and the sampled worst-case error (the
grid maximum of the error curve, a lower bound of the true H-infinity norm).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularShiftError, TangmorError

DEFAULT_OMEGA_MIN = 1e-6
DEFAULT_OMEGA_MAX = 1e6
DEFAULT_COUNT = 200

CSV_HEADER = ["omega", "gain_full", "gain_reduced", "error"]


@dataclass
class FrequencyGrid:
    """Logarithmically spaced frequency samples, endpoints included."""

    omega_min: float
    omega_max: float
    count: int
    points: np.ndarray = field(default=None)

    def __len__(self):
        return self.count

    def __iter__(self):
        return iter(self.points)


@dataclass
class FrequencyResponse:
    """Per-point spectral norms of a transfer function over a grid.

    Grid indices where the underlying solve was singular are listed in
    ``skipped`` and carry NaN gains.
    """

    grid: FrequencyGrid
    gains: np.ndarray
    values: list = None
    skipped: list = field(default_factory=list)


def log_grid(omega_min, omega_max, count):
    """Geometric grid ``omega_min * (omega_max/omega_min)**(k/(count-1))``."""
    if not (0 < omega_min < omega_max):
        raise ValueError("require 0 < omega_min < omega_max")
    if count < 2:
        raise ValueError("count must be at least 2")
    points = np.geomspace(omega_min, omega_max, count)
    return FrequencyGrid(omega_min=float(omega_min), omega_max=float(omega_max),
                         count=int(count), points=points)


def default_grid():
    return log_grid(DEFAULT_OMEGA_MIN, DEFAULT_OMEGA_MAX, DEFAULT_COUNT)


def response(system, grid, keep_values=False):
    """Gain curve of any evaluable system over the grid.

    Evaluates the transfer function at ``j*omega`` for every grid point and
    records the spectral norm; singular points are skipped and flagged.
    """
    gains = np.full(grid.count, np.nan)
    values = [] if keep_values else None
    skipped = []
    for k, omega in enumerate(grid.points):
        try:
            val = system.transfer_at(1j * omega)
        except SingularShiftError:
            skipped.append(k)
            if keep_values:
                values.append(None)
            continue
        gains[k] = np.linalg.norm(val, 2)
        if keep_values:
            values.append(val)
    return FrequencyResponse(grid=grid, gains=gains, values=values, skipped=skipped)


def error_curve(full, reduced, grid):
    """Pointwise spectral norm of ``H(jw) - H_m(jw)`` over the grid."""
    gains = np.full(grid.count, np.nan)
    skipped = []
    for k, omega in enumerate(grid.points):
        try:
            diff = full.transfer_at(1j * omega) - reduced.transfer_at(1j * omega)
        except SingularShiftError:
            skipped.append(k)
            continue
        gains[k] = np.linalg.norm(diff, 2)
    return FrequencyResponse(grid=grid, gains=gains, skipped=skipped)


def hinf_estimate(full, reduced, grid):
    """Grid maximum of the error curve: a sampled lower bound of the H-infinity error."""
    curve = error_curve(full, reduced, grid)
    valid = curve.gains[np.isfinite(curve.gains)]
    if valid.size == 0:
        raise TangmorError("no usable grid point for the sampled error estimate")
    return float(valid.max())


def write_csv(path, grid, gain_full, gain_reduced, errors):
    """Delimited report: omega, full gain, reduced gain, error; 17 digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for omega, gf, gr, err in zip(grid.points, gain_full, gain_reduced, errors):
            writer.writerow([f"{v:.17g}" for v in (omega, gf, gr, err)])
