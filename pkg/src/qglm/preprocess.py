"""Forest Fires ingestion, predictor standardization, exact t-SNE, outcome scaling, splits."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import DegenerateStateError, IngestionError, ParameterError

log = logging.getLogger(__name__)

FOREST_FIRES_COLUMNS = (
    "X", "Y", "month", "day", "FFMC", "DMC", "DC", "ISI", "temp", "RH", "wind", "rain", "area",
)
MONTHS = {m: i + 1 for i, m in enumerate(
    ["jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec"]
)}
DAYS = {d: i + 1 for i, d in enumerate(["mon", "tue", "wed", "thu", "fri", "sat", "sun"])}
SCALE_LIMIT = 3.0


# ---------------------------------------------------------------------------
# ingestion


@dataclass
class RawTable:
    columns: tuple
    values: np.ndarray  # N x len(columns), month/day already ordinal

    @property
    def predictor_names(self):
        return tuple(c for c in self.columns if c != "area")

    @property
    def predictors(self):
        keep = [i for i, c in enumerate(self.columns) if c != "area"]
        return self.values[:, keep]

    @property
    def outcome(self):
        return self.values[:, self.columns.index("area")]


def _parse_cell(column, token, line):
    token = token.strip()
    if column == "month":
        table = MONTHS
    elif column == "day":
        table = DAYS
    else:
        try:
            value = float(token)
        except ValueError:
            raise IngestionError(f"cannot parse {token!r} as a number", line, column) from None
        if not np.isfinite(value):
            raise IngestionError(f"non-finite value {token!r}", line, column)
        return value
    key = token.lower()
    if key not in table:
        raise IngestionError(f"unknown {column} token {token!r}", line, column)
    return float(table[key])


def load_forest_fires(path):
    """Read the Forest Fires CSV; month becomes 1..12 and day 1..7 (mon = 1).

    Row numbers in errors are file line numbers, the header being line 1.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise IngestionError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    for col in FOREST_FIRES_COLUMNS:
        if col not in header:
            raise IngestionError("required column missing from header", 1, col)
    where = [header.index(col) for col in FOREST_FIRES_COLUMNS]

    values = []
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise IngestionError(f"expected {len(header)} fields, got {len(row)}", line)
        values.append([_parse_cell(c, row[i], line) for c, i in zip(FOREST_FIRES_COLUMNS, where)])
    if not values:
        raise IngestionError("no data rows", 2)
    return RawTable(FOREST_FIRES_COLUMNS, np.array(values))


# ---------------------------------------------------------------------------
# predictor standardization


@dataclass
class Standardized:
    values: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    kept: list
    dropped: list


def standardize_features(matrix, names=None):
    """Centre and scale every column by its population standard deviation.

    Constant columns are dropped with a warning and listed in ``dropped``.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    p = matrix.shape[1]
    names = list(names) if names is not None else [str(j) for j in range(p)]
    mean = matrix.mean(axis=0)
    sd = matrix.std(axis=0)
    keep = sd > 1e-12 * np.maximum(1.0, np.abs(mean))
    if not keep.any():
        raise DegenerateStateError("every predictor column is constant")
    dropped = [names[j] for j in range(p) if not keep[j]]
    if dropped:
        warnings.warn(f"dropping constant columns: {', '.join(dropped)}", stacklevel=2)
    values = (matrix[:, keep] - mean[keep]) / sd[keep]
    kept = [names[j] for j in range(p) if keep[j]]
    return Standardized(values, mean[keep], sd[keep], kept, dropped)


# ---------------------------------------------------------------------------
# exact t-SNE


@dataclass
class TsneConfig:
    out_dims: int = 4
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.out_dims < 1:
            raise ParameterError(f"out_dims must be >= 1, got {self.out_dims}")
        if not self.perplexity > 1.0:
            raise ParameterError(f"perplexity must be > 1, got {self.perplexity}")
        if self.iterations < 1 or not self.learning_rate > 0:
            raise ParameterError("iterations must be >= 1 and learning_rate > 0")


PERPLEXITY_TOL = 1e-5
MAX_BISECTIONS = 50


def squared_distances(x):
    sq = np.sum(x * x, axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def _row_distribution(d, log_beta):
    """Conditional neighbour distribution and its perplexity, ``d`` excluding self."""
    beta = np.exp(log_beta)
    shifted = d - d.min()
    w = np.exp(-beta * shifted)
    total = w.sum()
    p = w / total
    entropy = np.log(total) + beta * np.dot(p, shifted)
    return p, np.exp(entropy)


def conditional_affinities(dist2, perplexity):
    """Row-stochastic ``p_{j|i}`` with per-row bandwidth matched to ``perplexity``.

    Bisection runs on ``log beta`` (beta = 1 / (2 sigma^2)) until the row's
    perplexity is within ``PERPLEXITY_TOL`` of the target.
    """
    n = dist2.shape[0]
    cond = np.zeros((n, n))
    achieved = np.empty(n)
    for i in range(n):
        d = np.delete(dist2[i], i)
        positive = d[d > 0]
        log_beta = -np.log(np.median(positive)) if positive.size else 0.0
        lo, hi = -np.inf, np.inf
        for _ in range(MAX_BISECTIONS):
            p, perp = _row_distribution(d, log_beta)
            if abs(perp - perplexity) < PERPLEXITY_TOL:
                break
            if perp > perplexity:
                lo = log_beta  # too flat: narrow the kernel
                log_beta = log_beta + 2.0 if hi == np.inf else 0.5 * (lo + hi)
            else:
                hi = log_beta
                log_beta = log_beta - 2.0 if lo == -np.inf else 0.5 * (lo + hi)
        else:
            p, perp = _row_distribution(d, log_beta)
            if abs(perp - perplexity) >= PERPLEXITY_TOL:
                raise ParameterError(
                    f"row {i}: perplexity {perplexity} unreachable (got {perp:.6f})"
                )
        cond[i, np.arange(n) != i] = p
        achieved[i] = perp
    return cond, achieved


def joint_affinities(cond):
    n = cond.shape[0]
    return (cond + cond.T) / (2.0 * n)


def _student_t(y):
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    return num, num / num.sum()


def kl_divergence(p, q):
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], 1e-300))))


@dataclass
class TsneResult:
    embedding: np.ndarray  # standardized and clamped
    raw_embedding: np.ndarray
    kl_history: np.ndarray = field(repr=False)
    achieved_perplexity: np.ndarray = field(repr=False)


def tsne_run(matrix, config):
    """Exact t-SNE with early exaggeration, momentum switch and adaptive gains."""
    x = np.atleast_2d(np.asarray(matrix, dtype=float))
    n = x.shape[0]
    if not config.perplexity < (n - 1) / 3.0:
        raise ParameterError(
            f"perplexity {config.perplexity} infeasible for {n} points (need < {(n - 1) / 3:.3f})"
        )
    cond, achieved = conditional_affinities(squared_distances(x), config.perplexity)
    p = np.maximum(joint_affinities(cond), 1e-300)
    np.fill_diagonal(p, 0.0)

    rng = np.random.default_rng(config.seed)
    y = 1e-4 * rng.standard_normal((n, config.out_dims))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    history = np.empty(config.iterations)

    num, q = _student_t(y)
    for it in range(config.iterations):
        if it == config.exaggeration_iters:
            # gains grown under exaggeration overshoot at the higher momentum
            update[:] = 0.0
            gains[:] = 1.0
        early = it < config.exaggeration_iters
        pe = p * config.early_exaggeration if early else p
        momentum = config.momentum_early if early else config.momentum_late
        w = (pe - q) * num
        grad = 4.0 * (np.diag(w.sum(axis=1)) - w) @ y
        # grow a gain only where the step reversed direction
        flipped = update * grad < 0.0
        gains = np.where(flipped, gains + 0.2, gains * 0.8)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - config.learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
        num, q = _student_t(y)
        history[it] = kl_divergence(p, q)

    sd = y.std(axis=0)
    sd[sd == 0] = 1.0
    embedding = np.clip((y - y.mean(axis=0)) / sd, -SCALE_LIMIT, SCALE_LIMIT)
    return TsneResult(embedding, y, history, achieved)


def tsne_embed(matrix, config):
    return tsne_run(matrix, config).embedding


# ---------------------------------------------------------------------------
# outcome scaling


@dataclass(frozen=True)
class OutcomeScaler:
    """Monotone map of raw outcomes into [-3, 3], clamping beyond.

    ``zscore``: ``(y - offset) / scale`` with the population mean and
    standard deviation. ``log_percentile``: ``log1p(y)`` mapped affinely so its
    0.5th and 99.5th percentiles land on -3 and +3.
    """

    method: str
    offset: float
    scale: float

    METHODS = ("zscore", "log_percentile")

    @classmethod
    def fit(cls, y_raw, method="zscore"):
        y = np.asarray(y_raw, dtype=float).ravel()
        if method not in cls.METHODS:
            raise ParameterError(f"unknown scaler method {method!r}; use one of {cls.METHODS}")
        if y.size < 2 or not np.isfinite(y).all():
            raise ParameterError("need at least 2 finite outcomes")
        if method == "zscore":
            offset, spread = float(y.mean()), float(y.std())
            scale = spread
        else:
            if (y < 0).any():
                raise ParameterError("log_percentile scaling needs nonnegative outcomes")
            lo, hi = np.percentile(np.log1p(y), [0.5, 99.5])
            offset, scale = float(0.5 * (lo + hi)), float((hi - lo) / (2 * SCALE_LIMIT))
        if not scale > 0:
            raise DegenerateStateError("outcome has no spread; cannot scale")
        return cls(method, offset, scale)

    def _h(self, y):
        return np.log1p(y) if self.method == "log_percentile" else y

    def transform(self, y):
        y = np.asarray(y, dtype=float)
        return np.clip((self._h(y) - self.offset) / self.scale, -SCALE_LIMIT, SCALE_LIMIT)

    def inverse(self, s):
        t = self.offset + self.scale * np.asarray(s, dtype=float)
        return np.expm1(t) if self.method == "log_percentile" else t

    def clamped(self, y):
        u = (self._h(np.asarray(y, dtype=float)) - self.offset) / self.scale
        return int(np.count_nonzero(np.abs(u) > SCALE_LIMIT))

    @property
    def anchors(self):
        """Values of the transformed outcome that map to -3 and +3."""
        return self.offset - SCALE_LIMIT * self.scale, self.offset + SCALE_LIMIT * self.scale

    @classmethod
    def recover(cls, y_raw, y_scaled, tol=1e-9):
        """Refit on ``y_raw`` and return the method reproducing ``y_scaled``, else None."""
        for method in cls.METHODS:
            try:
                scaler = cls.fit(y_raw, method)
            except (ParameterError, DegenerateStateError):
                continue
            if np.allclose(scaler.transform(y_raw), y_scaled, rtol=0.0, atol=tol):
                return scaler
        return None


def scale_outcome(y_raw, method="zscore"):
    y = np.asarray(y_raw, dtype=float).ravel()
    if y.size < 10:
        raise ParameterError(f"need at least 10 outcomes, got {y.size}")
    scaler = OutcomeScaler.fit(y, method)
    return scaler.transform(y), scaler


# ---------------------------------------------------------------------------
# splitting and the end-to-end pipeline


def train_test_split(n, fraction=0.7, seed=0):
    """Seeded shuffle; the first ``round(fraction * n)`` (half up) go to train.

    Both index arrays are returned sorted.
    """
    if n < 2 or not 0.0 < fraction < 1.0:
        raise ParameterError(f"need n >= 2 and 0 < fraction < 1, got {n}, {fraction}")
    n_train = int(np.floor(fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


@dataclass
class Provenance:
    seed: int
    tsne: TsneConfig
    scaler: OutcomeScaler
    dropped_columns: list
    outcome_clamped: int
    embedding_clamped: int
    final_kl: float
    n_rows: int

    def render(self):
        lo, hi = self.scaler.anchors
        lines = [
            f"rows = {self.n_rows}",
            f"seed = {self.seed}",
            f"tsne_seed = {self.tsne.seed}",
            f"tsne_out_dims = {self.tsne.out_dims}",
            f"tsne_perplexity = {self.tsne.perplexity!r}",
            f"tsne_iterations = {self.tsne.iterations}",
            f"tsne_learning_rate = {self.tsne.learning_rate!r}",
            f"tsne_final_kl = {self.final_kl!r}",
            f"scaler_method = {self.scaler.method}",
            f"scaler_offset = {self.scaler.offset!r}",
            f"scaler_scale = {self.scaler.scale!r}",
            f"scaler_anchor_lo = {lo!r}",
            f"scaler_anchor_hi = {hi!r}",
            f"dropped_columns = {','.join(self.dropped_columns)}",
            f"outcome_clamped = {self.outcome_clamped}",
            f"embedding_clamped = {self.embedding_clamped}",
        ]
        return "\n".join(lines) + "\n"


def preprocess_table(table, tsne_config, seed=0, scaler_method="zscore", fraction=0.7):
    """Standardize predictors, embed with t-SNE, scale ``area``, split."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        std = standardize_features(table.predictors, table.predictor_names)
    for w in caught:
        log.warning("%s", w.message)
    result = tsne_run(std.values, tsne_config)
    u = (result.raw_embedding - result.raw_embedding.mean(axis=0)) / result.raw_embedding.std(axis=0)
    y = table.outcome
    scaled, scaler = scale_outcome(y, scaler_method)
    train, test = train_test_split(y.size, fraction, seed)
    dataset = Dataset(result.embedding, y, scaled, train, test, scaler)
    prov = Provenance(
        seed=seed,
        tsne=tsne_config,
        scaler=scaler,
        dropped_columns=std.dropped,
        outcome_clamped=scaler.clamped(y),
        embedding_clamped=int(np.count_nonzero(np.abs(u) > SCALE_LIMIT)),
        final_kl=float(result.kl_history[-1]),
        n_rows=y.size,
    )
    return dataset, prov
