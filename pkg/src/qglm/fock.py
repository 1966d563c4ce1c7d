"""Multi-qumode states in the truncated Fock basis.

Amplitudes are stored as a flat complex vector of length ``cutoff**num_modes``.
The flat index reads as base-``cutoff`` digits ``n_{M-1} ... n_0`` so mode 0 is
the least significant digit. Reshaped in C order to ``(cutoff,) * M``, mode
``k`` therefore lives on axis ``M - 1 - k``.

Quadrature convention is hbar = 2, i.e. ``x = a + a^dagger``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateStateError, ParameterError

NORM_SLACK = 1e-9
NORMALIZED_TOL = 1e-6


def _readonly(array):
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class FockState:
    """Pure state of ``num_modes`` qumodes, each truncated at ``cutoff`` levels."""

    num_modes: int
    cutoff: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.num_modes < 1 or self.cutoff < 2:
            raise ParameterError(
                f"need num_modes >= 1 and cutoff >= 2, got {self.num_modes}, {self.cutoff}"
            )
        amps = _readonly(self.amplitudes).ravel()
        if amps.size != self.cutoff**self.num_modes:
            raise ParameterError(
                f"expected {self.cutoff ** self.num_modes} amplitudes, got {amps.size}"
            )
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self):
        """Amplitudes as an ``M``-axis array; axis ``M - 1 - k`` is mode ``k``."""
        return self.amplitudes.reshape((self.cutoff,) * self.num_modes)

    def axis(self, mode):
        return self.num_modes - 1 - mode


@dataclass(frozen=True, eq=False)
class GateMatrix:
    """Matrix of a one- or two-mode gate in the truncated Fock basis.

    Two-mode matrices index basis pairs as ``n_first * cutoff + n_second``,
    where ``first`` is the first entry of the mode list passed to
    :func:`apply_gate`.
    """

    arity: int
    cutoff: int
    entries: np.ndarray

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ParameterError(f"gate arity must be 1 or 2, got {self.arity}")
        dim = self.cutoff**self.arity
        entries = _readonly(self.entries)
        if entries.shape != (dim, dim):
            raise ParameterError(f"gate matrix must be {dim}x{dim}, got {entries.shape}")
        object.__setattr__(self, "entries", entries)


def vacuum_state(num_modes, cutoff):
    """All-zero-photon state of ``num_modes`` modes."""
    if num_modes < 1 or cutoff < 2:
        raise ParameterError(f"need num_modes >= 1 and cutoff >= 2, got {num_modes}, {cutoff}")
    amps = np.zeros(cutoff**num_modes, dtype=complex)
    amps[0] = 1.0
    return FockState(num_modes, cutoff, amps)


def fock_basis_state(photons, cutoff):
    """Product Fock state; ``photons[k]`` is the photon count of mode ``k``."""
    photons = list(photons)
    if any(n < 0 or n >= cutoff for n in photons):
        raise ParameterError(f"photon counts {photons} outside cutoff {cutoff}")
    amps = np.zeros(cutoff ** len(photons), dtype=complex)
    amps[sum(n * cutoff**k for k, n in enumerate(photons))] = 1.0
    return FockState(len(photons), cutoff, amps)


def product_state(vectors):
    """Tensor product of single-mode amplitude vectors, ``vectors[k]`` for mode ``k``."""
    vectors = [np.asarray(v, dtype=complex) for v in vectors]
    cutoff = vectors[0].size
    amps = np.ones(1, dtype=complex)
    # mode 0 is the least significant digit, so it goes last in the kron
    for v in vectors:
        if v.size != cutoff:
            raise ParameterError("all mode vectors must share one cutoff")
        amps = np.kron(v, amps)
    return FockState(len(vectors), cutoff, amps)


def apply_gate(state, gate, modes):
    """Apply ``gate`` to the listed modes of ``state``; identity elsewhere."""
    modes = list(modes)
    if gate.arity != len(modes):
        raise ParameterError(f"gate of arity {gate.arity} given {len(modes)} modes")
    if gate.cutoff != state.cutoff:
        raise ParameterError(f"gate cutoff {gate.cutoff} != state cutoff {state.cutoff}")
    if len(set(modes)) != len(modes) or any(not 0 <= m < state.num_modes for m in modes):
        raise ParameterError(f"invalid modes {modes} for a {state.num_modes}-mode state")

    c = state.cutoff
    psi = state.tensor()
    axes = [state.axis(m) for m in modes]
    op = gate.entries.reshape((c,) * (2 * gate.arity))
    out = np.tensordot(op, psi, axes=(list(range(gate.arity, 2 * gate.arity)), axes))
    out = np.moveaxis(out, list(range(gate.arity)), axes)
    return FockState(state.num_modes, c, out.ravel())


def norm_squared(state):
    return float(np.vdot(state.amplitudes, state.amplitudes).real)


def normalize(state):
    """Rescale to unit norm. Raises on a (numerically) zero state."""
    nrm = norm_squared(state)
    if nrm <= 1e-12:
        raise DegenerateStateError(f"cannot normalize a state with norm^2 {nrm:.3e}")
    return FockState(state.num_modes, state.cutoff, state.amplitudes / np.sqrt(nrm))


def _check_normalized(state, mode):
    if not 0 <= mode < state.num_modes:
        raise ParameterError(f"mode {mode} out of range for {state.num_modes} modes")
    nrm = norm_squared(state)
    if abs(nrm - 1.0) > NORMALIZED_TOL:
        raise ContractError(f"state must be normalized, norm^2 = {nrm:.9f}")


def annihilation(cutoff):
    """Truncated lowering operator, ``a|n> = sqrt(n)|n-1>``."""
    return np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1).astype(complex)


def position_operator(cutoff):
    a = annihilation(cutoff)
    return a + a.conj().T


def reduced_density_matrix(state, mode):
    """Single-mode reduced density matrix ``rho[n, m]``."""
    psi = np.moveaxis(state.tensor(), state.axis(mode), 0).reshape(state.cutoff, -1)
    return psi @ psi.conj().T


def expectation_x(state, mode):
    """Position-quadrature expectation of ``mode`` (hbar = 2)."""
    _check_normalized(state, mode)
    rho = reduced_density_matrix(state, mode)
    return float(np.trace(position_operator(state.cutoff) @ rho).real)


def photon_number_distribution(state, mode):
    """Marginal photon-count probabilities of ``mode``."""
    _check_normalized(state, mode)
    probs = np.abs(np.moveaxis(state.tensor(), state.axis(mode), 0)) ** 2
    return probs.reshape(state.cutoff, -1).sum(axis=1)


def mean_photon_number(state, mode):
    p = photon_number_distribution(state, mode)
    return float(np.dot(np.arange(state.cutoff), p))


def top_level_population(state):
    """Probability mass sitting in the highest retained Fock level of any mode.

    A large value means the truncation is distorting the state.
    """
    probs = np.abs(state.tensor()) ** 2
    total = probs.sum()
    if total == 0:
        return 0.0
    edge = np.zeros(probs.shape, dtype=bool)
    for ax in range(state.num_modes):
        idx = [slice(None)] * state.num_modes
        idx[ax] = -1
        edge[tuple(idx)] = True
    return float(probs[edge].sum() / total)
