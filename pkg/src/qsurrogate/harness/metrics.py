"""Approximation ratio and multi-run curve aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..instances import SpectrumExtrema


class DegenerateSpectrum(ValueError):
    pass


def approximation_ratio(value, extrema: SpectrumExtrema):
    """(C_max - C) / (C_max - C_min): 1 at the ground state, 0 at the top of the spectrum."""
    span = extrema.c_max - extrema.c_min
    if not span > 0:
        raise DegenerateSpectrum("c_max must exceed c_min")
    out = (extrema.c_max - np.asarray(value, dtype=float)) / span
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class AggregateCurve:
    grid: np.ndarray
    mean: np.ndarray
    half_width: np.ndarray  # 2 * std / sqrt(m)
    n_curves: int

    def rows(self):
        return zip(self.grid.tolist(), self.mean.tolist(), self.half_width.tolist())

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.tolist(),
            "mean": self.mean.tolist(),
            "half_width": self.half_width.tolist(),
            "n_curves": self.n_curves,
        }


def step_interpolate(xs: Sequence[float], ys: Sequence[float], grid) -> np.ndarray:
    """Right-continuous step function through (xs, ys), evaluated on ``grid``.

    Grid points before xs[0] come back as NaN.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    pos = np.searchsorted(xs, np.asarray(grid, dtype=float), side="right") - 1
    out = np.full(pos.shape, np.nan)
    ok = pos >= 0
    out[ok] = ys[pos[ok]]
    return out


def aggregate(curves: Sequence[Sequence[tuple[float, float]]], grid=None) -> AggregateCurve:
    """Pointwise mean and 2-sigma-of-the-mean half-width over ``curves``.

    Each curve is a sequence of (x, value) pairs with nondecreasing x. With
    no ``grid``, the union of all x values is used. Grid points that precede
    the first point of any curve are dropped.
    """
    if not curves:
        raise ValueError("nothing to aggregate")
    if grid is None:
        grid = sorted({float(x) for c in curves for x, _ in c})
    grid = np.asarray(grid, dtype=float)
    table = np.vstack([step_interpolate([x for x, _ in c], [y for _, y in c], grid) for c in curves])
    keep = ~np.isnan(table).any(axis=0)
    table = table[:, keep]
    m = table.shape[0]
    mean = table.mean(axis=0)
    half = 2.0 * table.std(axis=0) / np.sqrt(m)
    return AggregateCurve(grid[keep], mean, half, m)
