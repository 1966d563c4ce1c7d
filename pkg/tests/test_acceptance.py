"""Acceptance gate: every criterion at its stated tolerance, one PASS/FAIL line each.

Criteria 6, 8 and 9 share one end-to-end benchmark run (simulate, then bench
with all four models and 10 QGLM repeats). With the 80-iteration default that
run takes tens of minutes on one core, and criterion 8 repeats it.

Criterion 7 needs the UCI Forest Fires CSV. It is read from the path in
``QGLM_FORESTFIRES_CSV`` or from ``data/forestfires.csv`` at the repository
root. Without it the criterion fails and says why.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import random_state_amplitudes, record_criterion
from oracles import central_difference_gradient, kronecker_oracle, relative_error
from qglm.baselines import _design, fit_poisson_irls, irls_step
from qglm.bench import PAPER_ROWS, render_report, run_benchmark
from qglm.circuit import CircuitParams, TrainConfig, gradient, predict
from qglm.circuit import test_set_mse as score_test_set
from qglm.cli import main, parse_config
from qglm.dataset import parse_dataset, read_dataset
from qglm.fock import (
    FockState,
    apply_gate,
    expectation_x,
    fock_basis_state,
    mean_photon_number,
    photon_number_distribution,
    vacuum_state,
)
from qglm.gates import beamsplitter_gate, displacement_gate, kerr_gate, rotation_gate, squeezing_gate
from qglm.preprocess import TsneConfig, load_forest_fires, preprocess_table
from qglm.tweedie import sample_tweedie

REPO = Path(__file__).resolve().parents[1]
FOREST_FIRES_FAMILIES = 10


def _check(number, passed, detail):
    record_criterion(number, passed, detail)
    assert passed, detail


# -- criterion 1 --------------------------------------------------------------------


def test_criterion_1_gate_math():
    start = time.perf_counter()
    worst = {}

    errs = []
    for alpha in [0.0, 0.25, -0.5, 0.75, 0.3 + 0.4j, -0.6j, 0.53 - 0.53j]:
        s = apply_gate(vacuum_state(1, 10), displacement_gate(alpha, 10), [0])
        errs.append(abs(expectation_x(s, 0) - 2 * np.real(alpha)))
        errs.append(abs(mean_photon_number(s, 0) - abs(alpha) ** 2))
    worst["coherent"] = (max(errs), 1e-6)

    s = apply_gate(vacuum_state(1, 20), squeezing_gate(0.5, 20), [0])
    worst["squeezed"] = (abs(mean_photon_number(s, 0) - np.sinh(0.5) ** 2), 1e-4)

    rng = np.random.default_rng(1)
    state = FockState(2, 6, random_state_amplitudes(rng, 2, 6))
    kerr = apply_gate(state, kerr_gate(0.77, 6), [1])
    worst["kerr"] = (
        max(
            np.abs(photon_number_distribution(kerr, k) - photon_number_distribution(state, k)).max()
            for k in range(2)
        ),
        1e-12,
    )

    split = apply_gate(fock_basis_state([1, 0], 4), beamsplitter_gate(np.pi / 4, 0, 4), [0, 1])
    probs = np.abs(split.tensor()) ** 2
    worst["beamsplitter"] = (max(abs(probs[0, 1] - 0.5), abs(probs[1, 0] - 0.5)), 1e-9)

    errs = []
    for gate, modes in [
        (displacement_gate(0.4 - 0.3j, 3), [0]),
        (squeezing_gate(-0.35, 3), [1]),
        (rotation_gate(1.1, 3), [1]),
        (kerr_gate(0.9, 3), [0]),
        (beamsplitter_gate(0.7, 0.4, 3), [0, 1]),
        (beamsplitter_gate(-0.2, 1.3, 3), [1, 0]),
    ]:
        amps = random_state_amplitudes(rng, 2, 3)
        out = apply_gate(FockState(2, 3, amps), gate, modes).amplitudes
        errs.append(np.abs(out - kronecker_oracle(gate, modes, 2, 3) @ amps).max())
    worst["kronecker"] = (max(errs), 1e-12)

    seconds = time.perf_counter() - start
    ok = all(err <= tol for err, tol in worst.values()) and seconds < 10
    detail = ", ".join(f"{k} err {e:.1e} (tol {t:.0e})" for k, (e, t) in worst.items())
    _check(1, ok, f"{detail}; {seconds:.2f} s (limit 10 s)")


# -- criterion 2 ----------------------------------------------------------------------


def test_criterion_2_gradient_suite():
    start = time.perf_counter()
    cfg = TrainConfig()
    errors = []
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        params = CircuitParams.random(4, rng, scale=0.3)
        x = rng.uniform(-1.5, 1.5, size=(5, 4))
        y = rng.uniform(-2, 2, size=5)
        adjoint = gradient(params, x, y, cfg)
        fd = central_difference_gradient(params, x, y, cfg, step=1e-4)
        errors.append(relative_error(adjoint, fd, floor=1e-8))
    seconds = time.perf_counter() - start
    ok = max(errors) < 1e-4 and seconds < 120
    _check(2, ok, f"max relative error {max(errors):.2e} over 20 configs (tol 1e-4); "
                  f"{seconds:.1f} s (limit 120 s)")


# -- criterion 3 -------------------------------------------------------------------------


def test_criterion_3_identity_circuit():
    x0 = np.linspace(-2, 2, 17)
    others = np.array([-2.0, 0.0, 1.5])
    grid = np.array([[a, b, c, d] for a in x0 for b in others for c in others for d in others])
    preds = predict(CircuitParams.zeros(4), grid, TrainConfig(cutoff=10))
    err = float(np.abs(preds - grid[:, 0]).max())
    _check(3, err <= 1e-3, f"max |forward(x) - x[0]| = {err:.2e} on {len(grid)} inputs (tol 1e-3)")


# -- criterion 4 -------------------------------------------------------------------------


def test_criterion_4_tweedie_moments():
    start = time.perf_counter()
    worst_mean = worst_var = 0.0
    cells = 0
    for xi in (0.0, 1.0, 1.5, 2.0, 3.0):
        for mu in (0.5, 2.0, 5.0):
            for phi in (0.5, 2.0, 8.0):
                rng = np.random.default_rng(cells)
                y = sample_tweedie(mu, phi, xi, rng, size=100_000)
                worst_mean = max(worst_mean, abs(y.mean() / mu - 1))
                worst_var = max(worst_var, abs(y.var() / (phi * mu**xi) - 1))
                cells += 1
    y = sample_tweedie(2.0, 2.0, 1.5, np.random.default_rng(99), size=100_000)
    zero_err = abs((y == 0).mean() - np.exp(-np.sqrt(2)))
    seconds = time.perf_counter() - start
    ok = worst_mean <= 0.03 and worst_var <= 0.08 and zero_err <= 0.01 and seconds < 60
    _check(4, ok, f"{cells} cells: worst mean rel err {worst_mean:.4f} (tol 0.03), worst variance "
                  f"rel err {worst_var:.4f} (tol 0.08); zero mass err {zero_err:.4f} (tol 0.01); "
                  f"{seconds:.1f} s (limit 60 s)")


# -- criterion 5 ---------------------------------------------------------------------------


def test_criterion_5_irls():
    rng = np.random.default_rng(5)
    y = rng.poisson(3.0, size=500).astype(float)
    intercept_err = abs(fit_poisson_irls(np.zeros((500, 0)), y).intercept - np.log(y.mean()))

    x = rng.standard_normal((5000, 2))
    y = sample_tweedie(np.exp(x @ np.array([0.3, -0.2])), 1.0, 1.0, rng)
    model = fit_poisson_irls(x, y)
    rises = float(np.max(np.diff(model.deviance_trace)))
    est = np.concatenate([[model.intercept], model.coefficients])
    z = np.abs(est - np.array([0.0, 0.3, -0.2])) / model.standard_errors

    d = _design(x[:200])
    beta = np.array([0.1, 0.2, -0.1])
    mu = np.exp(d @ beta)
    zw = d @ beta + (y[:200] - mu) / mu
    oracle = np.linalg.solve(d.T @ (mu[:, None] * d), d.T @ (mu * zw))
    step_err = float(np.abs(irls_step(d, y[:200], beta) - oracle).max())

    ok = intercept_err <= 1e-8 and rises <= 1e-8 and z.max() < 3 and step_err <= 1e-10
    _check(5, ok, f"intercept err {intercept_err:.1e} (tol 1e-8); largest deviance rise {rises:.1e} "
                  f"(tol 1e-8); max |error|/SE {z.max():.2f} (< 3); IRLS step vs normal "
                  f"equations {step_err:.1e}")


# -- criteria 6, 8, 9: simulation benchmark -----------------------------------------------------


def _simulate_and_bench(workdir):
    data = workdir / "simulated.csv"
    assert main(["simulate", "--out", str(data), "--seed", "0"]) == 0
    config, _ = parse_config(["bench", "--data", str(data), "--seed", "0"])
    start = time.perf_counter()
    report = run_benchmark(config, read_dataset(data))
    seconds = time.perf_counter() - start
    return {
        "workdir": workdir,
        "config": config,
        "csv": data.read_bytes(),
        "report": report,
        "text": render_report(report),
        "seconds": seconds,
    }


@pytest.fixture(scope="module")
def simulation_run(tmp_path_factory):
    return _simulate_and_bench(tmp_path_factory.mktemp("sim_a"))


def test_criterion_6_simulation_benchmark(simulation_run):
    report = simulation_run["report"]
    errors = [r for r in report.computed if r.error]
    assert not errors, f"model failures: {errors}"
    qglm, glm, mean = report.mse("QGLM"), report.mse("GLM"), report.mse("Mean")
    per = report.qglm_evaluation.per_repeat
    within = abs(qglm - glm) / glm
    seconds = simulation_run["seconds"]
    print(simulation_run["text"])
    detail = (f"QGLM {qglm:.4f} (10 repeats, init seeds 0..9, range {per.min():.4f}-{per.max():.4f}) "
              f"vs Mean {mean:.4f} and GLM {glm:.4f}; |QGLM-GLM|/GLM = {within:.3f} (<= 0.10); "
              f"Boosted {report.mse('Boosted Regression'):.4f}; bench {seconds / 60:.1f} min "
              f"(target 30 min)")
    assert report.label == "simulated" and len(report.paper) == len(PAPER_ROWS["simulated"])
    _check(6, qglm <= mean and within <= 0.10 and seconds < 30 * 60, detail)


def _forest_fires_path():
    env = os.environ.get("QGLM_FORESTFIRES_CSV")
    path = Path(env) if env else REPO / "data" / "forestfires.csv"
    return path if path.is_file() else None


def _forest_fires_reports(path, families=FOREST_FIRES_FAMILIES):
    table = load_forest_fires(path)
    out = []
    for family in range(families):
        seed = 100 * family
        config, _ = parse_config(["bench", "--seed", str(seed), "--label", "forestfires"])
        dataset, _ = preprocess_table(table, TsneConfig(seed=seed), seed=seed)
        report = run_benchmark(config, dataset)
        out.append((report, render_report(report)))
    return out


# -- criterion 7 ---------------------------------------------------------------------------------


def test_criterion_7_forest_fires_benchmark():
    path = _forest_fires_path()
    if path is None:
        _check(7, False, "not run: the UCI Forest Fires CSV is not available in this environment "
                         "(set QGLM_FORESTFIRES_CSV or add data/forestfires.csv)")
    start = time.perf_counter()
    reports = _forest_fires_reports(path)
    seconds = time.perf_counter() - start
    wins = sum(r.mse("QGLM") <= r.mse("Mean") for r, _ in reports)
    rendered = all("## Computed" in t and "## Paper-reported" in t for _, t in reports)
    ratios = ", ".join(f"{r.mse('QGLM') / r.mse('Mean'):.3f}" for r, _ in reports)
    _check(7, wins >= 7 and rendered and seconds < 20 * 60,
           f"QGLM <= Mean on {wins}/{len(reports)} seed families (need 7); QGLM/Mean ratios "
           f"{ratios}; {seconds / 60:.1f} min (limit 20 min)")


def _first_difference(a, b):
    for k, (x, y) in enumerate(zip(a.splitlines(), b.splitlines()), start=1):
        if x != y:
            return f" (line {k}: {x!r} vs {y!r})"
    return " (lengths differ)"


def test_criterion_8_determinism(simulation_run):
    # the data path is echoed in the report, so an identical config reuses it
    again = _simulate_and_bench(simulation_run["workdir"])
    same_csv = again["csv"] == simulation_run["csv"]
    same_report = again["text"].encode() == simulation_run["text"].encode()
    parts = [f"simulation dataset bytes {'identical' if same_csv else 'DIFFER'}",
             f"simulation report bytes {'identical' if same_report else 'DIFFER'}"
             + ("" if same_report else _first_difference(simulation_run["text"], again["text"]))]
    ok = same_csv and same_report
    path = _forest_fires_path()
    if path is None:
        ok = False
        parts.append("Forest Fires half not run: data file absent (see criterion 7)")
    else:
        first = [text for _, text in _forest_fires_reports(path, families=1)]
        second = [text for _, text in _forest_fires_reports(path, families=1)]
        parts.append(f"Forest Fires report bytes {'identical' if first == second else 'DIFFER'}")
        ok = ok and first == second
    _check(8, ok, "; ".join(parts))


def test_criterion_9_cutoff_stability(simulation_run):
    evaluation = simulation_run["report"].qglm_evaluation
    dataset = parse_dataset(simulation_run["csv"].decode("utf-8"))
    base = TrainConfig()
    wide = TrainConfig(cutoff=14)
    changes, wide_mses = [], []
    for result, mse10 in zip(evaluation.results, evaluation.per_repeat):
        mse14 = score_test_set(result.params, dataset, wide)
        assert score_test_set(result.params, dataset, base) == mse10
        wide_mses.append(mse14)
        changes.append(abs(mse14 - mse10) / mse10)
    mean_change = abs(np.mean(wide_mses) - evaluation.mean_mse) / evaluation.mean_mse
    _check(9, max(changes) < 0.02,
           f"largest per-repeat relative change c=10 -> c=14: {max(changes):.2e}; change of the "
           f"mean: {mean_change:.2e} (tol 0.02)")
