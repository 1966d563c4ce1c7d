import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import qglm.cli as cli
from qglm.bench import (
    MODELS,
    PAPER_ROWS,
    BenchmarkReport,
    ReportRow,
    RunConfig,
    build_config,
    config_from_text,
    render_report,
    resolve_label,
    run_benchmark,
    sidecar_path,
)
from qglm.cli import main, parse_config
from qglm.dataset import Dataset, read_dataset
from qglm.errors import TruncationOverflowError, UsageError
from qglm.surrogate import write_surrogate_forest_fires
from qglm.tweedie import TweedieSpec, simulate_dataset

FAST = ["--iters", "2", "--repeats", "2"]


# -- configuration ------------------------------------------------------------------


def test_parse_example():
    config, verbose = parse_config("bench --data d.csv --models qglm,mean --seed 7".split())
    expect = dataclasses.replace(RunConfig(), data="d.csv", models=("qglm", "mean"), seed=7)
    assert config == expect and not verbose


def test_cli_beats_file_beats_default(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nseed = 1\nrepeats = 3  # trailing\n", encoding="utf-8")
    config, _ = parse_config(["bench", "--config", str(path), "--seed", "2"])
    assert config.seed == 2 and config.repeats == 3 and config.iterations == 80


def test_unknown_model_named():
    with pytest.raises(UsageError, match="forest"):
        parse_config(["bench", "--models", "qglm,forest"])


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("colour = red\n", "colour"),
        ("seed = -1\n", "unsigned"),
        ("learning_rate = fast\n", "real number"),
        ("seed 3\n", "key = value"),
        ("label = mars\n", "label"),
    ],
)
def test_bad_config_lines(text, fragment):
    with pytest.raises(UsageError, match=fragment):
        config_from_text(text)


def test_set_overrides_and_errors():
    config, _ = parse_config(["bench", "--set", "mstop=5", "--set", "coefficients=1,2"])
    assert config.mstop == 5 and config.coefficients == (1.0, 2.0)
    with pytest.raises(UsageError):
        parse_config(["bench", "--set", "mstop"])
    with pytest.raises(UsageError):
        parse_config(["bench", "--set", "nonsense=1"])
    with pytest.raises(UsageError):
        parse_config(["fly"])


def test_default_round_trip():
    assert config_from_text(RunConfig().to_text()) == RunConfig()


@given(
    st.integers(0, 2**40),
    st.lists(st.sampled_from(MODELS), min_size=1, max_size=4, unique=True),
    st.floats(1e-4, 10.0),
    st.integers(1, 500),
    st.sampled_from(["zscore", "log_percentile"]),
)
def test_config_round_trip(seed, models, lr, mstop, scaler):
    config = build_config(
        {"seed": seed, "models": ",".join(models), "learning_rate": repr(lr), "mstop": str(mstop),
         "scaler": scaler}
    )
    assert config_from_text(config.to_text()) == config


# -- benchmark -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_dataset():
    # large enough that the Poisson MLE exists despite the many zeros
    return simulate_dataset(TweedieSpec(), n=200, seed=2)


def test_mean_only_report(small_dataset):
    report = run_benchmark(RunConfig(models=("mean",)), small_dataset)
    assert len(report.computed) == 1 and report.paper == []
    _, ytr, _ = small_dataset.split("train")
    _, yte, _ = small_dataset.split("test")
    assert report.mse("Mean") == pytest.approx(np.mean((yte - ytr.mean()) ** 2), abs=1e-15)


def test_full_model_set_on_simulated_label(small_dataset):
    config = RunConfig(label="simulated", iterations=2, repeats=10)
    report = run_benchmark(config, small_dataset)
    assert [r.algorithm for r in report.computed] == ["QGLM", "GLM", "Boosted Regression", "Mean"]
    assert all(r.error is None and r.scaled_mse >= 0 for r in report.computed)
    assert len(report.paper) == len(PAPER_ROWS["simulated"])
    assert report.qglm_evaluation.per_repeat.size == 10
    assert any("init seeds 0..9" in n for n in report.notes)


def test_failing_model_becomes_error_row(small_dataset):
    ds = Dataset(
        small_dataset.features,
        small_dataset.targets_raw,
        np.clip(small_dataset.targets_scaled * 0.5, -3, 3),
        small_dataset.train_indices,
        small_dataset.test_indices,
    )
    report = run_benchmark(RunConfig(models=("glm", "mean")), ds)
    glm, mean = report.computed
    assert glm.error and glm.scaled_mse is None
    assert mean.error is None
    md = render_report(report)
    assert "| GLM | error: " in md and "| Mean | " in md


def test_label_resolution(tmp_path):
    data = tmp_path / "sim.csv"
    assert resolve_label(RunConfig(data=str(data))) == "none"
    sidecar_path(data).write_text("dataset_label = forestfires\n", encoding="utf-8")
    assert resolve_label(RunConfig(data=str(data))) == "forestfires"
    assert resolve_label(RunConfig(data=str(data), label="simulated")) == "simulated"
    assert sidecar_path(data).name == "sim.provenance.txt"


# -- rendering ---------------------------------------------------------------------------


def test_markdown_mean_row():
    report = BenchmarkReport("simulated", [ReportRow("Mean", 0.85, "computed")])
    assert "| Mean | 0.850 |" in render_report(report)


def test_paper_only_report():
    rows = [ReportRow(a, v, "paper") for a, v in PAPER_ROWS["forestfires"]]
    md = render_report(BenchmarkReport("forestfires", rows))
    assert "## Computed" not in md
    assert "## Paper-reported (source=paper, not computed here)" in md
    assert "| QGLM | 0.106 |" in md


def test_computed_rows_come_first():
    rows = [ReportRow("Mean", 0.9, "computed"), ReportRow("BART", 0.78, "paper")]
    md = render_report(BenchmarkReport("simulated", rows))
    assert md.index("## Computed") < md.index("| Mean | 0.900 |") < md.index("## Paper") < md.index("| BART |")


def test_csv_report():
    rows = [ReportRow("Mean", 0.85, "computed", seconds=0.014), ReportRow("GLM", 0.81, "paper")]
    text = render_report(BenchmarkReport("simulated", rows), "csv")
    assert text.splitlines() == [
        "algorithm,scaled_mse,source,seconds",
        "Mean,0.850,computed,0.01",
        "GLM,0.810,paper,",
    ]


def test_unknown_format():
    with pytest.raises(UsageError):
        render_report(BenchmarkReport("none"), "html")


# -- command line ---------------------------------------------------------------------------


def test_simulate_then_bench_is_deterministic(tmp_path, capsys):
    data = tmp_path / "sim.csv"
    assert main(["simulate", "--out", str(data), "--set", "n_observations=200"]) == 0
    assert "dataset_label = simulated" in sidecar_path(data).read_text()
    reports = []
    out = tmp_path / "report.md"
    for _ in range(2):
        assert main(["bench", "--data", str(data), "--out", str(out)] + FAST) == 0
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]
    text = reports[0].decode()
    assert text.startswith("# Benchmark: simulated")
    assert "error" not in text
    assert "| QGLM |" in text and "| Algorithm | Scaled Model MSE |" in text


def test_train_command(tmp_path, capsys):
    data, params = tmp_path / "sim.csv", tmp_path / "params.txt"
    main(["simulate", "--out", str(data), "--set", "n_observations=40"])
    assert main(["train", "--data", str(data), "--out", str(params), "--iters", "1"]) == 0
    assert params.read_text().startswith("# qglm num_modes=4 cutoff=10")
    assert "test mse" in capsys.readouterr().err


def test_preprocess_command(tmp_path):
    raw, out = tmp_path / "ff.csv", tmp_path / "ff_proc.csv"
    write_surrogate_forest_fires(raw, n=60, seed=3)
    argv = ["preprocess", "--data", str(raw), "--out", str(out), "--tsne-perplexity", "10",
            "--set", "tsne_iterations=300"]
    assert main(argv) == 0
    ds = read_dataset(out)
    assert ds.features.shape == (60, 4) and ds.scaler is not None
    side = sidecar_path(out).read_text()
    assert side.startswith("dataset_label = forestfires") and "tsne_perplexity = 10.0" in side


def test_exit_codes(tmp_path, monkeypatch, capsys):
    assert main(["bench"]) == 1
    assert main(["bench", "--models", "forest", "--data", "x.csv"]) == 1
    assert main(["bench", "--data", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n", encoding="utf-8")
    assert main(["bench", "--data", str(bad)]) == 2
    assert "data error" in capsys.readouterr().err

    data = tmp_path / "sim.csv"
    main(["simulate", "--out", str(data), "--set", "n_observations=20"])

    def overflow(*args, **kwargs):
        raise TruncationOverflowError("state left the cutoff space")

    monkeypatch.setattr(cli, "train", overflow)
    assert main(["train", "--data", str(data)]) == 3
    assert "numerical failure" in capsys.readouterr().err
