"""Command-line entry point: ``qglm {simulate,preprocess,train,bench} [flags]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bench import COMMANDS, build_config, render_report, run_benchmark, sidecar_path
from .circuit import format_params, test_set_mse, train
from .dataset import read_dataset, write_dataset
from .errors import DataError, DegenerateStateError, EncodingError, ParameterError, UsageError
from .preprocess import TsneConfig, load_forest_fires, preprocess_table
from .tweedie import TweedieSpec, simulate_dataset

log = logging.getLogger("qglm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

# flag -> RunConfig key
FLAGS = {
    "--data": "data",
    "--out": "out",
    "--seed": "seed",
    "--models": "models",
    "--repeats": "repeats",
    "--iters": "iterations",
    "--lr": "learning_rate",
    "--cutoff": "cutoff",
    "--tsne-perplexity": "perplexity",
    "--components": "out_dims",
    "--label": "label",
    "--format": "format",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser():
    parser = _Parser(prog="qglm", description="QGLM simulation, training and benchmarking")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value config file")
    for flag, key in FLAGS.items():
        parser.add_argument(flag, dest=key, default=None)
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def parse_config(argv):
    """CLI tokens (and the optional ``--config`` file) to a :class:`RunConfig`."""
    args = _parser().parse_args(argv)
    file_text = None
    if args.config:
        try:
            file_text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config file {args.config!r}: {exc.strerror}") from None
    cli = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        cli[key.strip()] = value
    for key in FLAGS.values():
        value = getattr(args, key)
        if value is not None:
            cli[key] = value
    cli["command"] = args.command
    return build_config(cli, file_text), args.verbose


def _require(config, *keys):
    for key in keys:
        if not getattr(config, key):
            raise UsageError(f"{config.command} needs a path for {key!r} (--{key} <path>)")


def _write_text(path, text):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _tsne_config(config):
    return TsneConfig(
        out_dims=config.out_dims,
        perplexity=config.perplexity,
        iterations=config.tsne_iterations,
        learning_rate=config.tsne_learning_rate,
        early_exaggeration=config.early_exaggeration,
        seed=config.seed,
    )


def cmd_simulate(config):
    _require(config, "out")
    spec = TweedieSpec(
        power_xi=config.power_xi,
        dispersion_phi=config.dispersion_phi,
        coefficients=config.coefficients,
        num_noise_features=config.num_noise_features,
    )
    ds = simulate_dataset(spec, config.n_observations, config.seed, config.scaler, config.train_fraction)
    write_dataset(ds, config.out)
    prov = [
        "dataset_label = simulated",
        f"seed = {config.seed}",
        f"n_observations = {config.n_observations}",
        f"power_xi = {config.power_xi!r}",
        f"dispersion_phi = {config.dispersion_phi!r}",
        f"coefficients = {','.join(repr(c) for c in config.coefficients)}",
        f"num_noise_features = {config.num_noise_features}",
        f"scaler_method = {ds.scaler.method}",
        f"scaler_offset = {ds.scaler.offset!r}",
        f"scaler_scale = {ds.scaler.scale!r}",
        f"outcome_clamped = {ds.scaler.clamped(ds.targets_raw)}",
    ]
    sidecar_path(config.out).write_text("\n".join(prov) + "\n", encoding="utf-8")
    log.info("wrote %d rows to %s", ds.num_observations, config.out)


def cmd_preprocess(config):
    _require(config, "data", "out")
    table = load_forest_fires(config.data)
    ds, prov = preprocess_table(
        table, _tsne_config(config), config.seed, config.scaler, config.train_fraction
    )
    write_dataset(ds, config.out)
    text = "dataset_label = forestfires\n" + f"source = {config.data}\n" + prov.render()
    sidecar_path(config.out).write_text(text, encoding="utf-8")
    log.info("wrote %d rows to %s", ds.num_observations, config.out)


def cmd_train(config):
    _require(config, "data")
    ds = read_dataset(config.data)
    cfg = config.train_config()
    result = train(ds, cfg)
    _write_text(config.out, format_params(result.params, cfg))
    print(
        f"train mse {result.loss_trace[0]:.6f} -> {result.loss_trace[-1]:.6f}; "
        f"test mse {test_set_mse(result.params, ds, cfg):.6f}",
        file=sys.stderr,
    )


def cmd_bench(config):
    _require(config, "data")
    ds = read_dataset(config.data)
    report = run_benchmark(config, ds)
    _write_text(config.out, render_report(report, config.format))


HANDLERS = {
    "simulate": cmd_simulate,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "bench": cmd_bench,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        config, verbose = parse_config(argv)
        logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")
        HANDLERS[config.command](config)
    except (UsageError, ParameterError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DegenerateStateError, EncodingError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
