"""Tweedie samplers (Var(Y) = phi * mu**xi), the simulation scenario, and the family table."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import ParameterError
from .preprocess import scale_outcome, train_test_split

FEATURE_CLAMP = 3.0
_EXACT_POWERS = (0.0, 1.0, 2.0, 3.0)


def _supported(xi):
    return xi in _EXACT_POWERS or 1.0 < xi < 2.0


@dataclass
class TweedieSpec:
    power_xi: float = 1.0
    dispersion_phi: float = 8.0
    coefficients: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.3, -0.4]))
    num_noise_features: int = 1

    def __post_init__(self):
        self.power_xi = float(self.power_xi)
        self.dispersion_phi = float(self.dispersion_phi)
        self.coefficients = np.asarray(self.coefficients, dtype=float).ravel()
        if not _supported(self.power_xi):
            raise ParameterError(f"unsupported Tweedie power {self.power_xi}; use 0, 1, (1,2), 2 or 3")
        if not self.dispersion_phi > 0:
            raise ParameterError(f"dispersion must be > 0, got {self.dispersion_phi}")
        if self.num_noise_features < 0:
            raise ParameterError("num_noise_features must be >= 0")
        if self.coefficients.size + self.num_noise_features < 1:
            raise ParameterError("need at least one feature")

    @property
    def num_features(self):
        return self.coefficients.size + self.num_noise_features


def _inverse_gaussian(mu, shape, rng):
    """Transformation-with-rejection draw (Michael, Schucany and Haas)."""
    nu = rng.standard_normal(mu.shape)
    y = nu * nu
    x = mu + mu * mu * y / (2.0 * shape) - mu / (2.0 * shape) * np.sqrt(
        4.0 * mu * shape * y + (mu * y) ** 2
    )
    u = rng.uniform(size=mu.shape)
    return np.where(u <= mu / (mu + x), x, mu * mu / x)


def sample_tweedie(mu, phi, xi, rng, size=None):
    """Draws with mean ``mu`` and variance ``phi * mu**xi``.

    ``mu`` may be an array (one draw per entry) or a scalar with ``size``.
    xi = 1 uses the scaled Poisson ``phi * Poisson(mu / phi)``, which matches
    the overdispersed mean/variance pair for any phi.
    """
    xi = float(xi)
    if not _supported(xi):
        raise ParameterError(f"unsupported Tweedie power {xi}; use 0, 1, (1,2), 2 or 3")
    if not phi > 0:
        raise ParameterError(f"dispersion must be > 0, got {phi}")
    scalar = np.ndim(mu) == 0 and size is None
    mu = np.asarray(mu, dtype=float)
    if size is not None:
        mu = np.broadcast_to(mu, size)
    if not (mu > 0).all():
        raise ParameterError("mean must be > 0")

    if xi == 0.0:
        out = rng.normal(mu, np.sqrt(phi))
    elif xi == 1.0:
        out = phi * rng.poisson(mu / phi)
    elif xi < 2.0:
        rate = mu ** (2.0 - xi) / (phi * (2.0 - xi))
        shape = (2.0 - xi) / (xi - 1.0)
        scale = phi * (xi - 1.0) * mu ** (xi - 1.0)
        counts = rng.poisson(rate)
        # a sum of k iid gamma(shape) draws is gamma(k * shape)
        out = np.where(counts > 0, rng.gamma(shape * np.maximum(counts, 1), scale), 0.0)
    elif xi == 2.0:
        out = rng.gamma(1.0 / phi, phi * mu)
    else:
        out = _inverse_gaussian(mu, 1.0 / phi, rng)
    out = np.asarray(out, dtype=float)
    return float(out) if scalar else out


def simulate_dataset(spec, n=1000, seed=0, scaler_method="zscore", fraction=0.7):
    """Standard-normal predictors (clamped to +-3), log-linear mean, Tweedie outcome.

    Signal features come first, then noise features.
    """
    if n < 10:
        raise ParameterError(f"need n >= 10, got {n}")
    rng = np.random.default_rng(seed)
    x = np.clip(rng.standard_normal((n, spec.num_features)), -FEATURE_CLAMP, FEATURE_CLAMP)
    mu = np.exp(x[:, : spec.coefficients.size] @ spec.coefficients)
    y = sample_tweedie(mu, spec.dispersion_phi, spec.power_xi, rng)
    scaled, scaler = scale_outcome(y, scaler_method)
    train, test = train_test_split(n, fraction, seed)
    return Dataset(x, y, scaled, train, test, scaler)


def family_lookup(phi, xi):
    """Family label from the common Tweedie models table.

    phi < 1 with xi != 1 has no row of its own and is labelled "Unique Tweedie".
    """
    if not phi > 0 or not xi >= 0:
        raise ParameterError(f"need phi > 0 and xi >= 0, got {phi}, {xi}")
    if phi == 1.0:
        if xi == 0.0:
            return "Normal"
        if xi == 1.0:
            return "Poisson"
        if 1.0 < xi < 2.0:
            return "Compound Poisson"
        if xi == 2.0:
            return "Gamma"
        if xi == 3.0:
            return "Inverse-Gaussian"
        if xi > 2.0:
            return "Stable"
        return "Unique Tweedie"
    if xi == 1.0:
        return "Negative Binomial" if phi > 1.0 else "Underdispersion Poisson"
    return "Unique Tweedie"
