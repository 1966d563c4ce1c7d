"""Batched Fock-space simulator with reverse-mode (adjoint) parameter gradients.

A chunk of observations is held as one array of shape ``(cutoff,) * M +
(batch,)``: mode ``k`` on axis ``M - 1 - k`` exactly as in
:meth:`qglm.fock.FockState.tensor`, with the batch axis last so every gate
contraction runs over contiguous memory.

Each compiled :class:`Op` carries its matrix and, for every circuit parameter
it depends on, the derivative of that matrix. The backward pass works with the
conjugated adjoint state ``mu = conj(lam)``, which steps back through ``U^T``
(no conjugation per step), and reads each parameter's gradient off the cross
matrix ``C[i, j] = sum_r mu_after[i, r] psi_before[j, r]`` as
``2 Re sum_ij dU[i, j] C[i, j]``.

Two-mode ops must conserve total photon number. On the flattened pair index
``n_hi * c + n_lo`` the sector ``n_hi + n_lo = s`` is an arithmetic progression
with step ``c - 1``, so each sector is a plain strided slice and the op is
applied sector by sector without gathering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DIAG, SINGLE, PAIR = "diag", "single", "pair"


@dataclass
class Op:
    kind: str
    modes: tuple
    matrix: np.ndarray  # diagonal vector for DIAG ops
    derivs: list = field(default_factory=list)  # [(param_index, dmatrix)]
    sectors: "SectorBlocks" = None


@dataclass
class SectorBlocks:
    forward: list
    transposed: list
    derivs: list  # [(param_index, concatenated sector entries)]


def swap_pair_order(matrix, cutoff):
    """Re-index a two-mode matrix from ``n_a*c + n_b`` to ``n_b*c + n_a``."""
    c = cutoff
    return matrix.reshape(c, c, c, c).transpose(1, 0, 3, 2).reshape(c * c, c * c)


def photon_sectors(cutoff):
    """Strided slices and index lists of the constant-total-photon sectors."""
    c = cutoff
    slices, indices = [], []
    for s in range(2 * c - 1):
        idx = [n * c + (s - n) for n in range(max(0, s - c + 1), min(s, c - 1) + 1)]
        if len(idx) > 1:
            slices.append(slice(idx[0], idx[-1] + 1, c - 1))
        else:
            slices.append(slice(idx[0], idx[0] + 1))
        indices.append(np.array(idx))
    return slices, indices


def fuse(first, second):
    """Single op equal to applying ``first`` then ``second`` on the same mode."""
    if first.kind == DIAG and second.kind == DIAG:
        mat = second.matrix * first.matrix
        derivs = [(p, second.matrix * d) for p, d in first.derivs]
        derivs += [(p, d * first.matrix) for p, d in second.derivs]
        return Op(DIAG, first.modes, mat, derivs)

    def dense(op, m):
        return np.diag(m) if op.kind == DIAG else m

    a, b = dense(first, first.matrix), dense(second, second.matrix)
    derivs = [(p, b @ dense(first, d)) for p, d in first.derivs]
    derivs += [(p, dense(second, d) @ a) for p, d in second.derivs]
    return Op(SINGLE, first.modes, b @ a, derivs)


def fuse_single_mode_runs(ops):
    fused = []
    for op in ops:
        prev = fused[-1] if fused else None
        if prev is not None and PAIR not in (op.kind, prev.kind) and prev.modes == op.modes:
            fused[-1] = fuse(prev, op)
        else:
            fused.append(op)
    return fused


def light_cone(op_modes, readout_mode):
    """Indices of ops that can influence an observable on ``readout_mode``.

    Later ops acting only on other modes commute with the observable and,
    being unitary, cannot change its expectation.
    """
    live = {readout_mode}
    keep = []
    for idx in range(len(op_modes) - 1, -1, -1):
        modes = set(op_modes[idx])
        if modes & live:
            live |= modes
            keep.append(idx)
    return keep[::-1]


class BatchSimulator:
    def __init__(self, num_modes, cutoff):
        self.num_modes = num_modes
        self.cutoff = cutoff
        self.slices, self.indices = photon_sectors(cutoff)
        total = np.add.outer(np.arange(cutoff), np.arange(cutoff)).ravel()
        self._off_sector = total[:, None] != total[None, :]

    def axis(self, mode):
        return self.num_modes - 1 - mode

    def prepare_pair(self, op):
        """Order a pair op as (higher mode, lower mode) and split it into sectors."""
        a, b = op.modes
        if abs(a - b) != 1:
            raise ValueError(f"pair ops must act on neighbouring modes, got {op.modes}")
        if a < b:
            mat = swap_pair_order(op.matrix, self.cutoff)
            derivs = [(p, swap_pair_order(d, self.cutoff)) for p, d in op.derivs]
        else:
            mat, derivs = op.matrix, list(op.derivs)
        for m in [mat] + [d for _, d in derivs]:
            if np.abs(m[self._off_sector]).max(initial=0.0) > 1e-12:
                raise ValueError("pair op does not conserve total photon number")

        def split(m):
            return [np.ascontiguousarray(m[np.ix_(i, i)]) for i in self.indices]

        fwd = split(mat)
        sectors = SectorBlocks(
            forward=fwd,
            transposed=[np.ascontiguousarray(m.T) for m in fwd],
            derivs=[(p, np.concatenate([x.ravel() for x in split(d)])) for p, d in derivs],
        )
        return Op(PAIR, (max(a, b), min(a, b)), mat, derivs, sectors)

    def _view(self, psi, mode, width):
        ax = self.axis(mode)
        pre = int(np.prod(psi.shape[:ax]))
        return psi.reshape(pre, width, -1)

    def apply(self, op, psi, transpose=False):
        """Apply ``op`` (or its plain transpose, for the adjoint pass)."""
        if op.kind == DIAG:
            view = self._view(psi, op.modes[0], self.cutoff)
            return (view * op.matrix[None, :, None]).reshape(psi.shape)
        if op.kind == SINGLE:
            m = op.matrix.T if transpose else op.matrix
            return np.matmul(m, self._view(psi, op.modes[0], self.cutoff)).reshape(psi.shape)
        view = self._view(psi, op.modes[0], self.cutoff**2)
        out = np.empty_like(view)
        mats = op.sectors.transposed if transpose else op.sectors.forward
        for sl, mb in zip(self.slices, mats):
            # writing in place skips a temporary per sector
            np.matmul(mb, view[:, sl, :], out=out[:, sl, :])
        return out.reshape(psi.shape)

    def backward(self, op, mu, psi_before, grad, propagate=True):
        """Accumulate ``op``'s parameter gradients and step ``mu`` back past it.

        ``mu`` is the conjugated adjoint state right after ``op``, loss
        weights included.
        """
        if op.derivs:
            width = self.cutoff**2 if op.kind == PAIR else self.cutoff
            mv = self._view(mu, op.modes[0], width)
            pv = self._view(psi_before, op.modes[0], width)
            if op.kind == DIAG:
                cross = np.einsum("pir,pir->i", mv, pv)
                for p, d in op.derivs:
                    grad[p] += 2.0 * np.real(np.dot(d, cross))
            elif op.kind == SINGLE:
                # one gemm over the flattened (pre, post) axes
                mf = mv.transpose(1, 0, 2).reshape(width, -1)
                pf = pv.transpose(1, 0, 2).reshape(width, -1)
                cross = mf @ pf.T
                for p, d in op.derivs:
                    grad[p] += 2.0 * np.real(np.sum(d * cross))
            else:
                # gradient blocks and the adjoint step share one pass over the sectors
                out = np.empty_like(mv) if propagate else None
                blocks = []
                for sl, mt in zip(self.slices, op.sectors.transposed):
                    ms = mv[:, sl, :]
                    block = np.matmul(ms, pv[:, sl, :].transpose(0, 2, 1)).sum(axis=0)
                    blocks.append(block.ravel())
                    if propagate:
                        np.matmul(mt, ms, out=out[:, sl, :])
                cross = np.concatenate(blocks)
                for p, dflat in op.sectors.derivs:
                    grad[p] += 2.0 * np.real(np.dot(dflat, cross))
                return out.reshape(mu.shape) if propagate else None
        return self.apply(op, mu, transpose=True) if propagate else None

    def run(self, ops, psi, keep_states=False):
        states = []
        for op in ops:
            if keep_states:
                states.append(psi)
            psi = self.apply(op, psi)
        return psi, states
