"""Quantum generalized linear model: encode -> U1 -> S -> U2 -> Kerr -> readout.

The regression weight matrix is carried by the circuit as ``O1 Sigma O2``:
the two interferometer meshes play the orthogonal factors, per-mode squeezing
plays the singular values, and a per-mode Kerr gate stands in for the inverse
link. The prediction is the position quadrature of mode 0. There is no bias
parameter anywhere.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .engine import DIAG, PAIR, SINGLE, BatchSimulator, Op
from .errors import EncodingError, ParameterError, TrainingAbortedError, TruncationOverflowError
from .fock import (
    apply_gate,
    expectation_x,
    normalize,
    norm_squared,
    position_operator,
    product_state,
)
from .gates import (
    InterferometerParams,
    beamsplitter_generator,
    displacement_gate,
    expm,
    interferometer_schedule,
    kerr_gate,
    mesh_pairs,
    number_levels,
    squeezing_gate,
    squeezing_generator,
)

log = logging.getLogger(__name__)

MAX_ABS_FEATURE = 3.5
MIN_NORM = 0.5
READOUT_MODE = 0
CHUNK = 64  # observations per batched state; tuned on one core


@dataclass
class CircuitParams:
    interferometer_1: InterferometerParams
    squeeze_r: np.ndarray
    interferometer_2: InterferometerParams
    kerr_kappa: np.ndarray

    def __post_init__(self):
        m = self.interferometer_1.num_modes
        self.squeeze_r = np.asarray(self.squeeze_r, dtype=float).ravel()
        self.kerr_kappa = np.asarray(self.kerr_kappa, dtype=float).ravel()
        if (
            self.interferometer_2.num_modes != m
            or self.squeeze_r.size != m
            or self.kerr_kappa.size != m
        ):
            raise ParameterError("all circuit parameter blocks must share num_modes")

    @property
    def num_modes(self):
        return self.interferometer_1.num_modes

    @staticmethod
    def size_for(num_modes):
        return 2 * (num_modes * (num_modes - 1) + num_modes) + 2 * num_modes

    def flatten(self):
        return np.concatenate(
            [
                self.interferometer_1.flatten(),
                self.squeeze_r,
                self.interferometer_2.flatten(),
                self.kerr_kappa,
            ]
        )

    @classmethod
    def unflatten(cls, num_modes, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.size != cls.size_for(num_modes):
            raise ParameterError(
                f"expected {cls.size_for(num_modes)} parameters for {num_modes} modes, "
                f"got {values.size}"
            )
        ni = num_modes * (num_modes - 1) + num_modes
        m = num_modes
        return cls(
            InterferometerParams.unflatten(m, values[:ni]),
            values[ni : ni + m],
            InterferometerParams.unflatten(m, values[ni + m : 2 * ni + m]),
            values[2 * ni + m :],
        )

    @classmethod
    def zeros(cls, num_modes):
        return cls.unflatten(num_modes, np.zeros(cls.size_for(num_modes)))

    @classmethod
    def random(cls, num_modes, rng, scale=0.05):
        return cls.unflatten(num_modes, rng.uniform(-scale, scale, cls.size_for(num_modes)))

    @staticmethod
    def names(num_modes):
        nbs = num_modes * (num_modes - 1) // 2

        def mesh(tag):
            return (
                [f"{tag}.bs_thetas[{k}]" for k in range(nbs)]
                + [f"{tag}.bs_phis[{k}]" for k in range(nbs)]
                + [f"{tag}.final_phases[{j}]" for j in range(num_modes)]
            )

        return (
            mesh("interferometer_1")
            + [f"squeeze_r[{j}]" for j in range(num_modes)]
            + mesh("interferometer_2")
            + [f"kerr_kappa[{j}]" for j in range(num_modes)]
        )


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    iterations: int = 80
    repeats: int = 10
    cutoff: int = 10
    seed: int = 0
    encoding_scale: float = 0.5
    init_scale: float = 0.05

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.iterations < 1 or self.repeats < 1:
            raise ParameterError("iterations and repeats must be >= 1")
        if self.cutoff < 2:
            raise ParameterError(f"cutoff must be >= 2, got {self.cutoff}")
        if self.init_scale < 0:
            raise ParameterError("init_scale must be >= 0")


# ---------------------------------------------------------------------------
# encoding


def _check_features(features):
    features = np.asarray(features, dtype=float)
    bad = np.abs(features) > MAX_ABS_FEATURE
    if bad.any() or not np.isfinite(features).all():
        where = np.argwhere(bad | ~np.isfinite(features))[0]
        raise EncodingError(
            f"feature value {features[tuple(where)]!r} at {tuple(where)} outside "
            f"[-{MAX_ABS_FEATURE}, {MAX_ABS_FEATURE}]"
        )
    return features


def _coherent_vectors(features, cutoff, encoding_scale):
    """Per-observation, per-mode displaced-vacuum vectors, shape (N, M, c)."""
    features = _check_features(np.atleast_2d(features))
    out = np.empty(features.shape + (cutoff,), dtype=complex)
    cache = {}
    for idx, value in np.ndenumerate(features):
        alpha = encoding_scale * float(value)
        if alpha not in cache:
            cache[alpha] = displacement_gate(alpha, cutoff).entries[:, 0]
        out[idx] = cache[alpha]
    return out


def encode_features(features, cutoff, encoding_scale=0.5):
    """Displace the vacuum of mode ``j`` by ``encoding_scale * features[j]``."""
    features = _check_features(np.ravel(features))
    vectors = _coherent_vectors(features[None, :], cutoff, encoding_scale)[0]
    return product_state(list(vectors))


# ---------------------------------------------------------------------------
# circuit compilation


def _layout(num_modes):
    """Gate layout in execution order: (kind, modes, param indices, builder key)."""
    nbs = num_modes * (num_modes - 1) // 2
    ni = 2 * nbs + num_modes
    layout = []

    def interferometer(offset):
        for k, pair in enumerate(mesh_pairs(num_modes)):
            layout.append(("bs", pair, (offset + k, offset + nbs + k)))
        return offset + 2 * nbs  # final phase offset

    phase_off = interferometer(0)
    # rotations and squeezers on different modes commute; interleave per mode
    for j in range(num_modes):
        layout.append(("rot", (j,), (phase_off + j,)))
        layout.append(("sq", (j,), (ni + j,)))
    phase_off = interferometer(ni + num_modes)
    kerr_off = 2 * ni + num_modes
    for j in range(num_modes):
        layout.append(("rot", (j,), (phase_off + j,)))
        layout.append(("kerr", (j,), (kerr_off + j,)))
    return layout


def _build_op(kind, modes, pidx, theta, cutoff):
    n = number_levels(cutoff)
    if kind == "rot":
        d = np.exp(1j * theta[pidx[0]] * n)
        return Op(DIAG, modes, d, [(pidx[0], 1j * n * d)])
    if kind == "kerr":
        d = np.exp(1j * theta[pidx[0]] * n**2)
        return Op(DIAG, modes, d, [(pidx[0], 1j * n**2 * d)])
    if kind == "sq":
        gen = squeezing_generator(theta[pidx[0]], cutoff)
        u = expm(gen)
        # d/dr exp(r K) = K exp(r K), with K = gen / r
        k = squeezing_generator(1.0, cutoff)
        return Op(SINGLE, modes, u, [(pidx[0], k @ u)])
    t, p = theta[pidx[0]], theta[pidx[1]]
    u = expm(beamsplitter_generator(t, p, cutoff))
    k = beamsplitter_generator(1.0, p, cutoff)
    na = np.kron(np.diag(n), np.eye(cutoff))
    # B(t, p) = R_a(p) B(t, 0) R_a(-p), so dB/dp = i (N_a B - B N_a)
    return Op(PAIR, modes, u, [(pidx[0], k @ u), (pidx[1], 1j * (na @ u - u @ na))])


def _product_groups(ops, num_modes):
    """Split the leading disjoint pair ops off the op list.

    On a product input those ops act on separate factors, so the state after
    them is still a product over mode groups. Returns ``(groups, n_prefix)``
    with ``groups`` listing ``(modes, op_or_None)`` in axis order (highest
    mode first).
    """
    used, n_prefix = set(), 0
    for op in ops:
        if op.kind != PAIR or used & set(op.modes):
            break
        used |= set(op.modes)
        n_prefix += 1
    by_hi = {op.modes[0]: op for op in ops[:n_prefix]}
    groups, mode = [], num_modes - 1
    while mode >= 0:
        if mode in by_hi:
            groups.append((by_hi[mode].modes, by_hi[mode]))
            mode -= 2
        else:
            groups.append(((mode,), None))
            mode -= 1
    return groups, n_prefix


class CompiledCircuit:
    """Circuit ready for batched evaluation at one parameter setting."""

    def __init__(self, params, cutoff):
        self.num_modes = params.num_modes
        self.cutoff = cutoff
        self.num_params = CircuitParams.size_for(self.num_modes)
        self.sim = BatchSimulator(self.num_modes, cutoff)
        theta = params.flatten()
        layout = _layout(self.num_modes)
        keep = engine.light_cone([modes for _, modes, _ in layout], READOUT_MODE)
        ops = [_build_op(*layout[i], theta, cutoff) for i in keep]
        ops = engine.fuse_single_mode_runs(ops)
        ops = [self.sim.prepare_pair(op) if op.kind == PAIR else op for op in ops]
        self.groups, n_prefix = _product_groups(ops, self.num_modes)
        self.ops = ops[n_prefix:]
        self.readout = position_operator(cutoff)

    def _initial(self, vectors):
        """Group factors before and after the prefix ops, and the full state."""
        inputs, outputs = [], []
        for modes, op in self.groups:
            v = vectors[:, modes[0]].T
            if len(modes) == 2:
                v = (vectors[:, modes[0], :, None] * vectors[:, modes[1], None, :]).reshape(
                    vectors.shape[0], -1
                ).T
            inputs.append(v)
            outputs.append(op.matrix @ v if op is not None else v)
        psi = outputs[0]
        for w in outputs[1:]:
            psi = psi[..., None, :] * w
        shape = (self.cutoff,) * self.num_modes + (vectors.shape[0],)
        return inputs, outputs, psi.reshape(shape)

    def _prefix_backward(self, mu, inputs, outputs, grad):
        """Gradients of the prefix ops from the adjoint state right after them."""
        dims = [w.shape[0] for w in outputs]
        mu = mu.reshape(dims + [mu.shape[-1]])
        letters = "abcdefghijklmnopqrstuvwxy"[: len(dims)]
        for k, (_, op) in enumerate(self.groups):
            if op is None or not op.derivs:
                continue
            others = [j for j in range(len(dims)) if j != k]
            spec = f"{letters}z," + ",".join(f"{letters[j]}z" for j in others) + f"->{letters[k]}z"
            r = np.einsum(spec, mu, *[outputs[j] for j in others], optimize=True)
            cross = r @ inputs[k].T
            for p, d in op.derivs:
                grad[p] += 2.0 * np.real(np.sum(d * cross))

    def _readout(self, psi):
        c = self.cutoff
        view = psi.reshape(-1, c, psi.shape[-1])
        xpsi = np.matmul(self.readout, view).reshape(psi.shape)
        flat = psi.reshape(-1, psi.shape[-1])
        norms = np.einsum("ib,ib->b", flat.conj(), flat).real
        raw = np.einsum("ib,ib->b", flat.conj(), xpsi.reshape(flat.shape)).real
        if (norms < MIN_NORM).any():
            worst = float(norms.min())
            raise TruncationOverflowError(
                f"pre-normalization norm^2 {worst:.4f} < {MIN_NORM}: state left the "
                f"cutoff-{c} space"
            )
        return raw / norms, norms, xpsi

    def predict(self, vectors):
        """Predictions and pre-normalization norms for encoded vectors (N, M, c)."""
        preds, norms = [], []
        for start in range(0, vectors.shape[0], CHUNK):
            _, _, psi = self._initial(vectors[start : start + CHUNK])
            psi, _ = self.sim.run(self.ops, psi)
            f, nrm, _ = self._readout(psi)
            preds.append(f)
            norms.append(nrm)
        return np.concatenate(preds), np.concatenate(norms)

    def loss_and_gradient(self, vectors, targets):
        """Mean squared error and its adjoint gradient over the flat parameters.

        Chunks are reduced in index order, so results are deterministic.
        """
        total = vectors.shape[0]
        grad = np.zeros(self.num_params)
        sq_err = 0.0
        for start in range(0, total, CHUNK):
            inputs, outputs, psi = self._initial(vectors[start : start + CHUNK])
            psi, states = self.sim.run(self.ops, psi, keep_states=True)
            y = targets[start : start + CHUNK]
            f, norms, xpsi = self._readout(psi)
            resid = f - y
            sq_err += float(np.dot(resid, resid))
            weight = (2.0 / total) * resid / norms
            mu = np.conj(weight * (xpsi - f * psi))
            for idx in range(len(self.ops) - 1, -1, -1):
                mu = self.sim.backward(self.ops[idx], mu, states[idx], grad)
            self._prefix_backward(mu, inputs, outputs, grad)
        return sq_err / total, grad


# ---------------------------------------------------------------------------
# public operations


def forward(params, features, config):
    """Prediction for one observation plus the pre-normalization norm^2."""
    circuit = CompiledCircuit(params, config.cutoff)
    vectors = _coherent_vectors(np.ravel(features)[None, :], config.cutoff, config.encoding_scale)
    preds, norms = circuit.predict(vectors)
    return float(preds[0]), float(norms[0])


def reference_forward(params, features, config):
    """Gate-by-gate evaluation on a :class:`FockState`, with no pruning or fusion."""
    c = config.cutoff
    m = params.num_modes
    state = encode_features(features, c, config.encoding_scale)
    state = interferometer_schedule(params.interferometer_1, c).apply(state)
    for j in range(m):
        state = apply_gate(state, squeezing_gate(params.squeeze_r[j], c), [j])
    state = interferometer_schedule(params.interferometer_2, c).apply(state)
    for j in range(m):
        state = apply_gate(state, kerr_gate(params.kerr_kappa[j], c), [j])
    nrm = norm_squared(state)
    if nrm < MIN_NORM:
        raise TruncationOverflowError(f"pre-normalization norm^2 {nrm:.4f} < {MIN_NORM}")
    return expectation_x(normalize(state), READOUT_MODE), nrm


def predict(params, features, config):
    """Predictions for an (N, M) feature matrix."""
    features = np.atleast_2d(features)
    circuit = CompiledCircuit(params, config.cutoff)
    return circuit.predict(_coherent_vectors(features, config.cutoff, config.encoding_scale))[0]


def mse_loss(params, features, targets, config):
    preds = predict(params, features, config)
    resid = preds - np.asarray(targets, dtype=float)
    return float(np.mean(resid**2))


def gradient(params, feature_batch, targets, config):
    """Adjoint gradient of the batch MSE with respect to ``params.flatten()``."""
    feature_batch = np.atleast_2d(feature_batch)
    targets = np.asarray(targets, dtype=float).ravel()
    if feature_batch.shape[0] == 0 or feature_batch.shape[0] != targets.size:
        raise ParameterError("need a non-empty batch with one target per row")
    if not np.isfinite(targets).all():
        raise ParameterError("targets must be finite")
    vectors = _coherent_vectors(feature_batch, config.cutoff, config.encoding_scale)
    return CompiledCircuit(params, config.cutoff).loss_and_gradient(vectors, targets)[1]


@dataclass
class TrainResult:
    params: CircuitParams
    loss_trace: np.ndarray = field(repr=False)


def train(dataset, config, init=None):
    """Full-batch gradient descent on the training split.

    ``loss_trace[t]`` is the training MSE after ``t`` updates, so the trace has
    ``iterations + 1`` entries.
    """
    x = dataset.features[dataset.train_indices]
    y = dataset.targets_scaled[dataset.train_indices]
    m = x.shape[1]
    if init is None:
        rng = np.random.default_rng(config.seed)
        init = CircuitParams.random(m, rng, config.init_scale)
    theta = init.flatten()
    vectors = _coherent_vectors(x, config.cutoff, config.encoding_scale)

    trace = []
    for it in range(config.iterations + 1):
        circuit = CompiledCircuit(CircuitParams.unflatten(m, theta), config.cutoff)
        try:
            if it == config.iterations:
                preds, _ = circuit.predict(vectors)
                loss = float(np.mean((preds - y) ** 2))
            else:
                loss, grad = circuit.loss_and_gradient(vectors, y)
        except TruncationOverflowError as exc:
            raise TrainingAbortedError(it, str(exc)) from exc
        trace.append(loss)
        if it < config.iterations:
            theta = theta - config.learning_rate * grad
        log.debug("iteration %d: train mse %.6f", it, loss)
    return TrainResult(CircuitParams.unflatten(m, theta), np.array(trace))


@dataclass
class RepeatedEvaluation:
    mean_mse: float
    per_repeat: np.ndarray
    results: list = field(repr=False, default_factory=list)


def test_set_mse(params, dataset, config):
    x = dataset.features[dataset.test_indices]
    y = dataset.targets_scaled[dataset.test_indices]
    return float(np.mean((predict(params, x, config) - y) ** 2))


def evaluate_repeated(dataset, config):
    """Train ``config.repeats`` times with seeds ``seed, seed+1, ...``.

    Returns the arithmetic mean of the test MSEs and the individual values.
    """
    values, results = [], []
    for r in range(config.repeats):
        cfg = TrainConfig(**{**config.__dict__, "seed": config.seed + r})
        result = train(dataset, cfg)
        values.append(test_set_mse(result.params, dataset, cfg))
        results.append(result)
    values = np.array(values)
    return RepeatedEvaluation(float(values.mean()), values, results)


# ---------------------------------------------------------------------------
# persistence


def format_params(params, config):
    lines = [
        f"# qglm num_modes={params.num_modes} cutoff={config.cutoff} "
        f"encoding_scale={config.encoding_scale!r}"
    ]
    for name, value in zip(CircuitParams.names(params.num_modes), params.flatten()):
        lines.append(f"{name} = {value:.17g}")
    return "\n".join(lines) + "\n"


def parse_params(text):
    """Inverse of :func:`format_params`; returns ``(params, cutoff, encoding_scale)``."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("# qglm"):
        raise ParameterError("missing '# qglm' header line")
    header = dict(tok.split("=", 1) for tok in lines[0].split()[2:])
    try:
        m = int(header["num_modes"])
        cutoff = int(header["cutoff"])
        scale = float(header["encoding_scale"])
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"bad header line {lines[0]!r}") from exc
    expected = CircuitParams.names(m)
    values = {}
    for ln in lines[1:]:
        name, _, value = ln.partition("=")
        values[name.strip()] = float(value)
    missing = [n for n in expected if n not in values]
    if missing or len(values) != len(expected):
        raise ParameterError(f"parameter names mismatch; missing {missing[:3]}")
    return CircuitParams.unflatten(m, [values[n] for n in expected]), cutoff, scale
