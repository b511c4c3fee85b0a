"""Exact statevector QAOA with a diagonal cost layer and an X-mixer.

The initial state is |+>^n and the mixer is sum_i X_i. Because the cost
Hamiltonian is diagonal, each phase layer is an elementwise multiply by
exp(-i gamma C(z)) using a cost table that is built once per instance.
"""

from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass

import numpy as np

from .instances import MAX_ENUMERATION_QUBITS, HeavyHexInstance, Instance, InstanceError, cost_table


@dataclass(frozen=True)
class AngleVector:
    gamma: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self):
        gamma = tuple(float(g) for g in self.gamma)
        beta = tuple(float(b) for b in self.beta)
        if len(gamma) != len(beta) or not gamma:
            raise ValueError("gamma and beta must both have length p >= 1")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "beta", beta)

    @property
    def p(self) -> int:
        return len(self.gamma)

    @classmethod
    def from_theta(cls, theta) -> "AngleVector":
        """Split theta = (gamma_1..gamma_p, beta_1..beta_p)."""
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.size % 2:
            raise ValueError("theta must have even length 2p")
        p = theta.size // 2
        return cls(tuple(theta[:p]), tuple(theta[p:]))

    def to_theta(self) -> np.ndarray:
        return np.array(self.gamma + self.beta)


@dataclass(frozen=True)
class ShotEstimate:
    value: float
    shots: int
    rng_seed: int


_MIX_BLOCK = 4


class QaoaSimulator:
    """Holds the read-only cost table for one instance."""

    def __init__(self, instance: Instance):
        if instance.n > MAX_ENUMERATION_QUBITS:
            raise InstanceError(f"n={instance.n} too large for statevector simulation")
        self.instance = instance
        self.n = instance.n
        self.costs = cost_table(instance)
        self.costs.setflags(write=False)

    def state(self, angles: AngleVector) -> np.ndarray:
        theta = angles.to_theta()
        if not np.all(np.isfinite(theta)):
            raise ValueError("angles must be finite")
        dim = 1 << self.n
        psi = np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)
        for gamma, beta in zip(angles.gamma, angles.beta):
            psi *= np.exp(-1j * gamma * self.costs)
            psi = self._mix(psi, beta)
        return psi

    def _mix(self, psi: np.ndarray, beta: float) -> np.ndarray:
        # exp(-i beta X) on every qubit, applied as a Kronecker power on blocks
        # of up to _MIX_BLOCK qubits (the rotation is the same on each qubit)
        c, s = np.cos(beta), -1j * np.sin(beta)
        rot = np.array([[c, s], [s, c]])
        blocks = [_MIX_BLOCK] * (self.n // _MIX_BLOCK)
        if self.n % _MIX_BLOCK:
            blocks.append(self.n % _MIX_BLOCK)
        powers = {}
        for k in set(blocks):
            u = np.ones((1, 1), dtype=np.complex128)
            for _ in range(k):
                u = np.kron(u, rot)
            powers[k] = u
        t = psi.reshape([1 << k for k in blocks])
        for axis, k in enumerate(blocks):
            t = np.moveaxis(np.tensordot(powers[k], t, axes=(1, axis)), 0, axis)
        return np.ascontiguousarray(t).reshape(-1)

    def probabilities(self, angles: AngleVector) -> np.ndarray:
        psi = self.state(angles)
        return psi.real**2 + psi.imag**2

    def exact_cost(self, angles: AngleVector) -> float:
        return float(self.probabilities(angles) @ self.costs)

    def sample(self, angles: AngleVector, shots: int, seed: int) -> np.ndarray:
        """Basis indices of ``shots`` measurements (inverse-CDF sampling)."""
        if shots < 1:
            raise ValueError("shots must be >= 1")
        cdf = np.cumsum(self.probabilities(angles))
        cdf /= cdf[-1]
        u = np.random.default_rng(seed).random(shots)
        idx = np.searchsorted(cdf, u, side="right")
        return np.minimum(idx, cdf.size - 1)

    def sampled_cost(self, angles: AngleVector, shots: int, seed: int) -> ShotEstimate:
        idx = self.sample(angles, shots, seed)
        return ShotEstimate(float(self.costs[idx].mean()), int(shots), int(seed))


_cache: "weakref.WeakKeyDictionary[object, QaoaSimulator]" = weakref.WeakKeyDictionary()
_cache_lock = threading.Lock()


def simulator_for(instance: Instance) -> QaoaSimulator:
    with _cache_lock:
        sim = _cache.get(instance)
        if sim is None:
            sim = QaoaSimulator(instance)
            _cache[instance] = sim
        return sim


def _as_angles(angles) -> AngleVector:
    return angles if isinstance(angles, AngleVector) else AngleVector.from_theta(angles)


def prepare_qaoa_state(instance: Instance, angles) -> np.ndarray:
    return simulator_for(instance).state(_as_angles(angles))


def exact_cost(instance: Instance, angles) -> float:
    return simulator_for(instance).exact_cost(_as_angles(angles))


def sampled_cost(instance: Instance, angles, shots: int, seed: int) -> ShotEstimate:
    return simulator_for(instance).sampled_cost(_as_angles(angles), shots, seed)


def pi_shift_invariance_check(
    instance: HeavyHexInstance, angles, component_index: int, shift: float = np.pi
) -> float:
    """|C(theta) - C(theta + shift * e_k)| for one angle component k."""
    theta = _as_angles(angles).to_theta()
    shifted = theta.copy()
    shifted[component_index] += shift
    return abs(exact_cost(instance, theta) - exact_cost(instance, shifted))
