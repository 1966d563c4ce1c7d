"""Classical comparison models: mean, Poisson GLM by IRLS, componentwise L2 boosting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ParameterError, SingularDesignError

INTERCEPT_FLOOR = -20.0
MAX_HALVINGS = 30


@dataclass
class ConstantModel:
    value: float

    def predict(self, features):
        return np.full(np.atleast_2d(features).shape[0], self.value)


def fit_mean(targets):
    targets = np.asarray(targets, dtype=float).ravel()
    if targets.size == 0:
        raise ParameterError("need at least one target")
    return ConstantModel(float(targets.mean()))


@dataclass
class LinearModel:
    coefficients: np.ndarray
    intercept: float
    link: str = "identity"
    standard_errors: np.ndarray = None  # intercept first
    deviance_trace: list = field(default_factory=list, repr=False)
    iterations: int = 0

    def linear_predictor(self, features):
        return self.intercept + np.atleast_2d(features) @ self.coefficients

    def predict(self, features):
        eta = self.linear_predictor(features)
        return np.exp(eta) if self.link == "log" else eta


def poisson_deviance(y, mu):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def _design(features):
    x = np.atleast_2d(np.asarray(features, dtype=float))
    return np.column_stack([np.ones(x.shape[0]), x])


def irls_step(design, targets, beta):
    """One Fisher-scoring step: weighted least squares on the working response."""
    eta = design @ beta
    mu = np.exp(eta)
    z = eta + (targets - mu) / mu
    sw = np.sqrt(mu)
    solution, *_ = np.linalg.lstsq(design * sw[:, None], z * sw, rcond=None)
    return solution


def fit_poisson_irls(features, targets, max_iter=100, tol=1e-10):
    """Poisson regression with log link, fitted by IRLS with step halving.

    Converges when the largest coefficient change is below ``tol``. A step
    that would raise the deviance is halved back towards the previous iterate.
    """
    x = _design(features)
    y = np.asarray(targets, dtype=float).ravel()
    if y.size != x.shape[0]:
        raise ParameterError("features and targets differ in length")
    if (y < 0).any() or not np.isfinite(y).all():
        raise ParameterError("Poisson targets must be finite and nonnegative")
    if np.linalg.matrix_rank(x) < x.shape[1]:
        raise SingularDesignError("design matrix (with intercept) is rank deficient")

    beta = np.zeros(x.shape[1])
    beta[0] = np.log(y.mean()) if y.mean() > 0 else 0.0
    dev = poisson_deviance(y, np.exp(x @ beta))
    trace = [dev]

    def model(b, it):
        return LinearModel(b[1:].copy(), float(b[0]), "log", None, list(trace), it)

    for it in range(1, max_iter + 1):
        proposal = irls_step(x, y, beta)
        new_dev = poisson_deviance(y, np.exp(x @ proposal))
        for _ in range(MAX_HALVINGS):
            if np.isfinite(new_dev) and new_dev <= dev + 1e-8 * max(1.0, abs(dev)):
                break
            proposal = 0.5 * (beta + proposal)
            new_dev = poisson_deviance(y, np.exp(x @ proposal))
        change = np.max(np.abs(proposal - beta))
        beta, dev = proposal, new_dev
        trace.append(dev)
        if beta[0] < INTERCEPT_FLOOR:
            raise ConvergenceError(
                f"intercept {beta[0]:.2f} fell below {INTERCEPT_FLOOR}: fitted mean collapsing to 0",
                model(beta, it),
            )
        if change < tol:
            mu = np.exp(x @ beta)
            cov = np.linalg.inv(x.T @ (x * mu[:, None]))
            fitted = model(beta, it)
            fitted.standard_errors = np.sqrt(np.diag(cov))
            return fitted
    raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations", model(beta, max_iter))


@dataclass
class BoostedModel:
    offset: float
    shrinkage: float
    steps: list = field(default_factory=list)  # (feature, intercept, slope)

    @property
    def step_count(self):
        return len(self.steps)

    def predict(self, features, steps=None):
        x = np.atleast_2d(np.asarray(features, dtype=float))
        out = np.full(x.shape[0], self.offset)
        for j, a, b in self.steps[:steps]:
            out += self.shrinkage * (a + b * x[:, j])
        return out


def fit_boosted_linear(features, targets, mstop=100, shrinkage=0.1):
    """Componentwise L2 boosting with simple linear (intercept + slope) base learners."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if x.shape[0] < 2 or y.size != x.shape[0]:
        raise ParameterError("need N >= 2 rows and one target per row")
    if mstop < 0 or not 0 < shrinkage <= 1:
        raise ParameterError("need mstop >= 0 and 0 < shrinkage <= 1")

    model = BoostedModel(float(y.mean()), float(shrinkage))
    xc = x - x.mean(axis=0)
    sxx = np.sum(xc * xc, axis=0)
    fit = np.full(y.size, model.offset)
    for _ in range(mstop):
        r = y - fit
        rc = r - r.mean()
        sxy = xc.T @ rc
        slope = np.divide(sxy, sxx, out=np.zeros_like(sxy), where=sxx > 0)
        rss = np.sum(rc * rc) - slope * sxy
        j = int(np.argmin(rss))
        a = float(r.mean() - slope[j] * x[:, j].mean())
        b = float(slope[j])
        model.steps.append((j, a, b))
        fit = fit + shrinkage * (a + b * x[:, j])
    return model


def scaled_mse(predictions, targets_scaled, scaler=None):
    """Mean squared error in scaled-outcome units.

    Pass ``scaler`` when ``predictions`` are in raw outcome units; they are
    mapped through it first.
    """
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(targets_scaled, dtype=float).ravel()
    if p.size == 0 or p.size != t.size:
        raise ParameterError(f"need equal, non-zero lengths; got {p.size} and {t.size}")
    if scaler is not None:
        p = scaler.transform(p)
    return float(np.mean((p - t) ** 2))
