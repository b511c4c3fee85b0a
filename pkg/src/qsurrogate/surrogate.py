"""Thin-plate radial basis function interpolation of archived cost data.

The interpolant is

    s(x) = sum_k w_k phi(|x - c_k|) + a_0 + a . x,   phi(r) = r**2 log r,

with sum_k w_k = 0 and sum_k w_k c_k = 0. No smoothing term is added, so
s reproduces every training target exactly.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

DUPLICATE_TOL = 1e-12
_TINY = np.finfo(float).tiny


class TooFewPoints(ValueError):
    pass


class SingularSystem(np.linalg.LinAlgError):
    pass


def thin_plate(r2: np.ndarray) -> np.ndarray:
    """phi as a function of squared distance; phi(0) = 0."""
    r2 = np.asarray(r2, dtype=float)
    # r2 * log(tiny) is exactly 0 at r2 == 0
    return 0.5 * r2 * np.log(np.maximum(r2, _TINY))


@dataclass(frozen=True)
class TrainingSet:
    x: np.ndarray  # (m, d)
    y: np.ndarray  # (m,)

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.x.shape[0]


def dedupe(x, y, tol: float = DUPLICATE_TOL) -> TrainingSet:
    """Merge points whose inputs agree within ``tol`` (max-norm); targets are averaged.

    The first occurrence of a group keeps its position and its input.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.shape[0]:
        raise ValueError("x and y disagree on point count")
    m = x.shape[0]
    if m == 0:
        return TrainingSet(x, y)
    close = cdist(x, x, "chebyshev") <= tol
    if close.sum() == m:
        return TrainingSet(x.copy(), y.copy())
    group = np.full(m, -1)
    keep = []
    for i in range(m):
        if group[i] >= 0:
            continue
        members = np.flatnonzero(close[i] & (group < 0))
        group[members] = len(keep)
        keep.append(i)
    ys = np.bincount(group, weights=y) / np.bincount(group)
    return TrainingSet(x[keep].copy(), ys)


@dataclass(frozen=True)
class RbfSurrogate:
    centers: np.ndarray
    rbf_weights: np.ndarray
    poly_weights: np.ndarray | None  # (d + 1,) constant first; None without a tail
    basis: str = "thin_plate"

    vectorized = True  # batch evaluation supported, see optim.differential_evolution

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    def __call__(self, theta) -> np.ndarray | float:
        """Evaluate at one point (d,) or a batch (m, d)."""
        theta = np.asarray(theta, dtype=float)
        single = theta.ndim == 1
        pts = np.atleast_2d(theta)
        if pts.shape[1] != self.d:
            raise ValueError(f"expected dimension {self.d}, got {pts.shape[1]}")
        out = thin_plate(cdist(pts, self.centers, "sqeuclidean")) @ self.rbf_weights
        if self.poly_weights is not None:
            out = out + self.poly_weights[0] + pts @ self.poly_weights[1:]
        return float(out[0]) if single else out

    evaluate = __call__

    def to_dict(self) -> dict:
        return {
            "basis": self.basis,
            "centers": self.centers.tolist(),
            "rbf_weights": self.rbf_weights.tolist(),
            "poly_weights": None if self.poly_weights is None else self.poly_weights.tolist(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict())


def fit(training: TrainingSet, tail: bool = True) -> RbfSurrogate:
    """Solve the (augmented) thin-plate interpolation system.

    With ``tail`` the affine polynomial and its orthogonality conditions are
    included; without it the plain kernel system Phi w = y is solved.
    Raises TooFewPoints or SingularSystem; nothing is regularized.
    """
    x, y = training.x, training.y
    m, d = x.shape
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if tail and m < d + 2:
        raise TooFewPoints(f"need at least {d + 2} distinct points in {d} dimensions, got {m}")
    if not tail and m < 1:
        raise TooFewPoints("need at least one point")
    phi = thin_plate(cdist(x, x, "sqeuclidean"))
    if tail:
        poly = np.hstack([np.ones((m, 1)), x])
        if np.linalg.matrix_rank(poly) < d + 1:
            raise SingularSystem("centers are affinely degenerate")
        lhs = np.zeros((m + d + 1, m + d + 1))
        lhs[:m, :m] = phi
        lhs[:m, m:] = poly
        lhs[m:, :m] = poly.T
        rhs = np.concatenate([y, np.zeros(d + 1)])
    else:
        lhs, rhs = phi, y
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            coef = scipy.linalg.solve(lhs, rhs, assume_a="sym", check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(coef)):
        raise SingularSystem("non-finite interpolation coefficients")
    if tail:
        return RbfSurrogate(x.copy(), coef[:m], coef[m:])
    return RbfSurrogate(x.copy(), coef, None)
