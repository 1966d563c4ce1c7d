"""Run configuration, benchmark orchestration and report rendering."""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import baselines
from .circuit import TrainConfig, evaluate_repeated
from .errors import QGLMError, UsageError

log = logging.getLogger(__name__)

COMMANDS = ("simulate", "preprocess", "train", "bench")
MODELS = ("qglm", "glm", "boost", "mean")
DISPLAY_NAMES = {"qglm": "QGLM", "glm": "GLM", "boost": "Boosted Regression", "mean": "Mean"}
LABELS = ("auto", "simulated", "forestfires", "none")

# Scaled-MSE rows as published, keyed by dataset label; never computed here.
PAPER_ROWS = {
    "simulated": [
        ("Random Forest", 0.80),
        ("BART", 0.78),
        ("Boosted Regression", 0.78),
        ("DGLARS", 0.81),
        ("Hlasso", 0.81),
        ("GLM", 0.81),
        ("QGLM", 0.82),
        ("Mean", 0.85),
    ],
    "forestfires": [
        ("Random Forest", 0.125),
        ("BART", 0.125),
        ("Boosted Regression", 0.119),
        ("DGLARS", 0.114),
        ("Hlasso", 0.120),
        ("GLM", 0.119),
        ("QGLM", 0.106),
        ("Mean", 0.115),
    ],
}


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    command: str = "bench"
    data: str = ""
    out: str = ""
    seed: int = 0
    models: tuple = MODELS
    label: str = "auto"
    format: str = "markdown"
    # qglm training
    learning_rate: float = 0.1
    iterations: int = 80
    repeats: int = 10
    cutoff: int = 10
    encoding_scale: float = 0.5
    init_scale: float = 0.05
    # simulation
    n_observations: int = 1000
    power_xi: float = 1.0
    dispersion_phi: float = 8.0
    coefficients: tuple = (0.5, 0.3, -0.4)
    num_noise_features: int = 1
    train_fraction: float = 0.7
    scaler: str = "zscore"
    # t-SNE
    out_dims: int = 4
    perplexity: float = 30.0
    tsne_iterations: int = 1000
    tsne_learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    # boosting
    mstop: int = 100
    shrinkage: float = 0.1

    def train_config(self):
        return TrainConfig(
            learning_rate=self.learning_rate,
            iterations=self.iterations,
            repeats=self.repeats,
            cutoff=self.cutoff,
            seed=self.seed,
            encoding_scale=self.encoding_scale,
            init_scale=self.init_scale,
        )

    def to_text(self):
        return "".join(f"{f.name} = {_format_value(getattr(self, f.name))}\n" for f in fields(self))


_CHOICES = {
    "command": COMMANDS,
    "label": LABELS,
    "format": ("markdown", "csv"),
    "scaler": ("zscore", "log_percentile"),
}
_FORMS = {int: "an unsigned integer", float: "a real number", str: "text"}


def _field_types():
    return {f.name: type(f.default) for f in fields(RunConfig)}


def _format_value(value):
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(key, text):
    kind = _field_types()[key]
    text = text.strip()
    try:
        if key == "models":
            names = tuple(t.strip() for t in text.split(",") if t.strip())
            bad = [t for t in names if t not in MODELS]
            if bad or not names:
                raise UsageError(
                    f"unknown model {bad[0]!r} for 'models'; expected a comma list from {MODELS}"
                    if bad else "'models' needs at least one model"
                )
            return names
        if key == "coefficients":
            return tuple(float(t) for t in text.split(",") if t.strip())
        if kind is int:
            value = int(text)
            if value < 0:
                raise ValueError
            return value
        if kind is float:
            return float(text)
    except ValueError:
        raise UsageError(f"key {key!r} expects {_FORMS.get(kind, 'a list')}, got {text!r}") from None
    if key in _CHOICES and text not in _CHOICES[key]:
        raise UsageError(f"key {key!r} must be one of {_CHOICES[key]}, got {text!r}")
    return text


def parse_config_text(text):
    """``key = value`` lines with ``#`` comments; returns raw overrides."""
    values = {}
    known = _field_types()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise UsageError(f"line {lineno}: expected 'key = value', got {line!r}")
        if key not in known:
            raise UsageError(f"line {lineno}: unknown key {key!r}")
        values[key] = _parse_value(key, value)
    return values


def build_config(cli_values, file_text=None):
    """Merge with precedence CLI > config file > defaults."""
    merged = parse_config_text(file_text) if file_text else {}
    known = _field_types()
    for key, value in cli_values.items():
        if key not in known:
            raise UsageError(f"unknown key {key!r}")
        merged[key] = _parse_value(key, value) if isinstance(value, str) else value
    return RunConfig(**merged)


def config_from_text(text):
    return build_config({}, text)


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class ReportRow:
    algorithm: str
    scaled_mse: float | None
    source: str  # "computed" or "paper"
    seconds: float | None = None
    error: str | None = None


@dataclass
class BenchmarkReport:
    label: str
    rows: list = field(default_factory=list)
    config_echo: str = ""
    notes: list = field(default_factory=list)
    qglm_evaluation: object = field(default=None, repr=False)  # not rendered

    @property
    def computed(self):
        return [r for r in self.rows if r.source == "computed"]

    @property
    def paper(self):
        return [r for r in self.rows if r.source == "paper"]

    def mse(self, algorithm):
        for r in self.computed:
            if r.algorithm == algorithm:
                return r.scaled_mse
        raise KeyError(algorithm)


def sidecar_path(data_path):
    p = Path(data_path)
    return p.with_name(p.stem + ".provenance.txt")


def resolve_label(config):
    if config.label != "auto":
        return config.label
    if not config.data:
        return "none"
    side = sidecar_path(config.data)
    if side.exists():
        for line in side.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition("=")
            if key.strip() == "dataset_label" and value.strip() in PAPER_ROWS:
                return value.strip()
    return "none"


def _fit_and_score(name, dataset, config):
    xtr, ytr, rtr = dataset.split("train")
    xte, yte, _ = dataset.split("test")
    if name == "mean":
        return baselines.scaled_mse(baselines.fit_mean(ytr).predict(xte), yte), None, None
    if name == "boost":
        model = baselines.fit_boosted_linear(xtr, ytr, config.mstop, config.shrinkage)
        return baselines.scaled_mse(model.predict(xte), yte), None, None
    if name == "glm":
        if dataset.scaler is None:
            raise QGLMError("dataset's y_scaled does not match a known outcome scaler")
        model = baselines.fit_poisson_irls(xtr, rtr)
        return baselines.scaled_mse(model.predict(xte), yte, dataset.scaler), None, None
    evaluation = evaluate_repeated(dataset, config.train_config())
    seeds = f"{config.seed}..{config.seed + config.repeats - 1}"
    per = ", ".join(f"{v:.6f}" for v in evaluation.per_repeat)
    return evaluation.mean_mse, f"QGLM per-repeat test MSE (init seeds {seeds}): {per}", evaluation


def run_benchmark(config, dataset):
    """Fit every requested model; a failing model becomes an error row."""
    label = resolve_label(config)
    report = BenchmarkReport(label=label, config_echo=config.to_text())
    for name in config.models:
        start = time.perf_counter()
        try:
            mse, note, evaluation = _fit_and_score(name, dataset, config)
            row = ReportRow(DISPLAY_NAMES[name], mse, "computed")
            if note:
                report.notes.append(note)
            if evaluation is not None:
                report.qglm_evaluation = evaluation
        except (QGLMError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            log.error("%s failed: %s", name, exc)
            row = ReportRow(DISPLAY_NAMES[name], None, "computed", error=f"{type(exc).__name__}: {exc}")
        row.seconds = time.perf_counter() - start
        report.rows.append(row)
    for algorithm, value in PAPER_ROWS.get(label, []):
        report.rows.append(ReportRow(algorithm, value, "paper"))
    return report


def _cell(row):
    return f"{row.scaled_mse:.3f}" if row.error is None else f"error: {row.error}"


def render_report(report, fmt="markdown"):
    """Markdown (no timings, so identical runs give identical bytes) or CSV."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["algorithm", "scaled_mse", "source", "seconds"])
        for r in report.rows:
            mse = f"{r.scaled_mse:.3f}" if r.error is None else "error"
            secs = "" if r.seconds is None else f"{r.seconds:.2f}"
            writer.writerow([r.algorithm, mse, r.source, secs])
        return buf.getvalue()
    if fmt != "markdown":
        raise UsageError(f"unknown report format {fmt!r}")

    lines = [f"# Benchmark: {report.label}", ""]
    if report.computed:
        lines += ["## Computed", "", "| Algorithm | Scaled Model MSE |", "|---|---|"]
        lines += [f"| {r.algorithm} | {_cell(r)} |" for r in report.computed]
        lines.append("")
    if report.paper:
        lines += [
            "## Paper-reported (source=paper, not computed here)",
            "",
            "| Algorithm | Scaled Model MSE |",
            "|---|---|",
        ]
        lines += [f"| {r.algorithm} | {r.scaled_mse:.3f} |" for r in report.paper]
        lines.append("")
    if report.notes:
        lines += ["## Notes", ""] + [f"- {n}" for n in report.notes] + [""]
    if report.config_echo:
        lines += ["## Configuration", "", "```", report.config_echo.rstrip("\n"), "```", ""]
    return "\n".join(lines)
