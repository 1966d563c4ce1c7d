"""Fock-basis matrices for the CV gate set and the rectangular interferometer mesh.

Gaussian gates are defined as exponentials of their truncated generators,
``exp(G)`` with ``G = -G^dagger`` built from the truncated ladder operator.
Rotation and Kerr gates are diagonal and exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .fock import GateMatrix, annihilation, apply_gate

SERIES_TOL = 1e-14
MAX_TERMS = 60


def _blocks(matrix):
    """Index sets of the connected components of the nonzero pattern."""
    n = matrix.shape[0]
    linked = (matrix != 0) | (matrix != 0).T | np.eye(n, dtype=bool)
    labels = np.arange(n)
    while True:
        # every index takes the smallest label among its neighbours
        spread = np.where(linked, labels[None, :], n).min(axis=1)
        if np.array_equal(spread, labels):
            break
        labels = spread
    return [np.flatnonzero(labels == lab) for lab in np.unique(labels)]


def _taylor_expm(a):
    norm = np.abs(a).sum(axis=0).max() if a.size else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    a = a / 2.0**squarings

    result = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for k in range(1, MAX_TERMS + 1):
        term = term @ a / k
        result = result + term
        if np.abs(term).max() <= SERIES_TOL * np.abs(result).max():
            break
    for _ in range(squarings):
        result = result @ result
    return result


def expm(matrix):
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    Decoupled blocks of the sparsity pattern (photon-number sectors of a
    beamsplitter, parity classes of a squeezer) are exponentiated separately.
    """
    a = np.asarray(matrix, dtype=complex)
    blocks = _blocks(a)
    if len(blocks) == 1:
        return _taylor_expm(a)
    result = np.zeros_like(a)
    for idx in blocks:
        sub = np.ix_(idx, idx)
        result[sub] = _taylor_expm(a[sub])
    return result


def _check_cutoff(cutoff):
    if cutoff < 2:
        raise ParameterError(f"cutoff must be >= 2, got {cutoff}")


def number_levels(cutoff):
    return np.arange(cutoff, dtype=float)


def displacement_generator(alpha, cutoff):
    a = annihilation(cutoff)
    return alpha * a.conj().T - np.conj(alpha) * a


def squeezing_generator(r, cutoff):
    a = annihilation(cutoff)
    ad = a.conj().T
    return 0.5 * r * (a @ a - ad @ ad)


def beamsplitter_generator(theta, phi, cutoff):
    """``theta (e^{i phi} a^dagger b - e^{-i phi} a b^dagger)``, ``a`` the first mode."""
    a = annihilation(cutoff)
    ad = a.conj().T
    return theta * (np.exp(1j * phi) * np.kron(ad, a) - np.exp(-1j * phi) * np.kron(a, ad))


def displacement_gate(alpha, cutoff):
    _check_cutoff(cutoff)
    return GateMatrix(1, cutoff, expm(displacement_generator(alpha, cutoff)))


def squeezing_gate(r, cutoff):
    _check_cutoff(cutoff)
    return GateMatrix(1, cutoff, expm(squeezing_generator(r, cutoff)))


def rotation_gate(phi, cutoff):
    _check_cutoff(cutoff)
    return GateMatrix(1, cutoff, np.diag(np.exp(1j * phi * number_levels(cutoff))))


def kerr_gate(kappa, cutoff):
    _check_cutoff(cutoff)
    return GateMatrix(1, cutoff, np.diag(np.exp(1j * kappa * number_levels(cutoff) ** 2)))


def beamsplitter_gate(theta, phi, cutoff):
    _check_cutoff(cutoff)
    return GateMatrix(2, cutoff, expm(beamsplitter_generator(theta, phi, cutoff)))


def mesh_pairs(num_modes):
    """Beamsplitter mode pairs of the rectangular mesh, in execution order.

    ``num_modes`` layers alternate between pairs starting at mode 0 and pairs
    starting at mode 1, giving ``M(M-1)/2`` beamsplitters in total.
    """
    pairs = []
    for layer in range(num_modes):
        pairs.extend((j, j + 1) for j in range(layer % 2, num_modes - 1, 2))
    return pairs


@dataclass
class InterferometerParams:
    num_modes: int
    bs_thetas: np.ndarray = None
    bs_phis: np.ndarray = None
    final_phases: np.ndarray = None

    def __post_init__(self):
        m = self.num_modes
        if m < 1:
            raise ParameterError(f"num_modes must be >= 1, got {m}")
        nbs = m * (m - 1) // 2
        for name, size in (("bs_thetas", nbs), ("bs_phis", nbs), ("final_phases", m)):
            value = getattr(self, name)
            value = np.zeros(size) if value is None else np.asarray(value, dtype=float).ravel()
            if value.size != size:
                raise ParameterError(f"{name} must have length {size}, got {value.size}")
            setattr(self, name, value)

    @property
    def size(self):
        return self.bs_thetas.size + self.bs_phis.size + self.final_phases.size

    def flatten(self):
        return np.concatenate([self.bs_thetas, self.bs_phis, self.final_phases])

    @classmethod
    def unflatten(cls, num_modes, values):
        values = np.asarray(values, dtype=float)
        nbs = num_modes * (num_modes - 1) // 2
        if values.size != 2 * nbs + num_modes:
            raise ParameterError(
                f"expected {2 * nbs + num_modes} interferometer values, got {values.size}"
            )
        return cls(num_modes, values[:nbs], values[nbs : 2 * nbs], values[2 * nbs :])


@dataclass
class GateSchedule:
    """Gates in execution order, each with the modes it acts on."""

    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def apply(self, state):
        for gate, modes in self.steps:
            state = apply_gate(state, gate, modes)
        return state


def interferometer_schedule(params, cutoff):
    """Beamsplitter mesh followed by one rotation per mode."""
    steps = []
    for k, pair in enumerate(mesh_pairs(params.num_modes)):
        steps.append((beamsplitter_gate(params.bs_thetas[k], params.bs_phis[k], cutoff), pair))
    for j in range(params.num_modes):
        steps.append((rotation_gate(params.final_phases[j], cutoff), (j,)))
    return GateSchedule(steps)
