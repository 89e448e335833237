"""Command-line interface: ``tmixad {fit,score,eval,toy,bench}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DataError, Dataset, SplitSpec, generate_group_anomaly_toy, load_csv, split_inductive, write_csv
from .metrics import MetricError, MetricReport, aggregate, evaluate
from .modelio import ModelFileError, atomic_write, load_model, save_model
from .scoring import ScoreMode
from .trainer import ABLATIONS, ConfigError, TrainConfig, fit, score_inductive

logger = logging.getLogger("tmixad")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class NumericError(RuntimeError):
    pass


# ---------------------------------------------------------------- config

def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _optional_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


_CONVERTERS = {
    "K": int, "l": float, "em_tol": float, "em_max_iter": int, "epochs": int,
    "lr": float, "hidden": int, "latent": _optional_int, "outer_iters": int,
    "seed": int, "density_mode": str, "score_mode": str, "u_unsquared": _to_bool,
    "encoder_init": str, "batch_size": _optional_int,
    "gaussian_mixture": _to_bool, "no_joint_likelihood": _to_bool, "no_indicator": _to_bool,
}
assert set(_CONVERTERS) == {f.name for f in fields(TrainConfig)}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; blank lines and ``#`` comments ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from None
    return out


def build_config(args) -> TrainConfig:
    values = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"no such config file: {path}")
        values.update(parse_config_text(path.read_text(encoding="utf-8")))
    for name in _CONVERTERS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    for name in getattr(args, "ablation", None) or []:
        values[name] = True
    return TrainConfig(**values)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training configuration (overrides --config)")
    g.add_argument("--config", help="flat key = value file with TrainConfig fields")
    g.add_argument("--K", type=int, help="mixture components (default 10)")
    g.add_argument("--l", type=float, help="outlier fraction trimmed per iteration (default 0.01)")
    g.add_argument("--em-tol", dest="em_tol", type=float, help="EM tolerance on the log-likelihood (default 1e-3)")
    g.add_argument("--em-max-iter", dest="em_max_iter", type=int, help="EM iteration cap (default 100)")
    g.add_argument("--epochs", type=int, help="encoder epochs per outer iteration (default 100)")
    g.add_argument("--lr", type=float, help="Adam learning rate (default 1e-4)")
    g.add_argument("--hidden", type=int, help="hidden width (default 128)")
    g.add_argument("--latent", type=_optional_int, help="latent width (default min(D, 8))")
    g.add_argument("--outer-iters", dest="outer_iters", type=int, help="alternating iterations (default 10)")
    g.add_argument("--seed", type=int, help="random seed (default 0)")
    g.add_argument("--density-mode", dest="density_mode", choices=["paper_exact", "standard_t", "gaussian"])
    g.add_argument("--score-mode", dest="score_mode", choices=["vector", "scalar"])
    g.add_argument("--u-unsquared", dest="u_unsquared", action="store_const", const=True,
                   help="use the unsquared Mahalanobis distance in the EM scale factor")
    g.add_argument("--encoder-init", dest="encoder_init", choices=["random", "identity"])
    g.add_argument("--batch-size", dest="batch_size", type=_optional_int)
    g.add_argument("--ablation", action="append", choices=ABLATIONS,
                   help="ablation variant (at most one)")


# ---------------------------------------------------------------- io helpers

def _write_json(doc, path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with atomic_write(path) as fh:
            fh.write(text)


def _check_finite(scores: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(scores)):
        raise NumericError("non-finite anomaly scores")
    return scores


def write_scores(scores: np.ndarray, path) -> None:
    lines = ["index,score"] + [f"{i},{format(float(s), '.17g')}" for i, s in enumerate(scores)]
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with atomic_write(path) as fh:
            fh.write(text)


def read_scores(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such scores file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "score" not in reader.fieldnames:
            raise DataError(f"{path} lacks a 'score' column")
        try:
            return np.array([float(row["score"]) for row in reader], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise DataError(f"{path}: bad score value: {exc}") from None


# ---------------------------------------------------------------- commands

def cmd_fit(args) -> int:
    config = build_config(args)
    train = load_csv(args.train_csv, args.label_column)
    model = fit(train, config)
    _check_finite(model.train_scores)
    save_model(model, args.out)
    log_path = args.log or str(Path(args.out).with_suffix("")) + ".log.json"
    _write_json({"dataset": train.name, "n": train.n, "d": train.d, "iterations": model.history}, log_path)
    logger.info("wrote %s and %s", args.out, log_path)
    return EXIT_OK


def cmd_score(args) -> int:
    model = load_model(args.model)
    data = load_csv(args.data_csv, args.label_column)
    scores = _check_finite(score_inductive(model, data, args.mode).scores)
    write_scores(scores, args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    scores = read_scores(args.scores_csv)
    if args.labels:
        labels = load_csv(args.labels, args.label_column).labels
        name = Path(args.labels).stem
    elif args.data:
        labels = load_csv(args.data, args.label_column).labels
        name = Path(args.data).stem
    else:
        raise ConfigError("eval needs --labels or --data")
    if labels.size != scores.size:
        raise DataError(f"misaligned inputs: {scores.size} scores vs {labels.size} labels")
    report = evaluate(scores, labels, seed=args.seed)
    doc = {"dataset": args.dataset or name, "method": args.method, **report.to_dict()}
    _write_json(doc, args.out)
    return EXIT_OK


def cmd_toy(args) -> int:
    ds = generate_group_anomaly_toy(args.seed)
    with atomic_write(args.out) as fh:
        write_csv(ds, fh, label_column="label")
    return EXIT_OK


def run_bench(datasets: list[Dataset], config: TrainConfig, seeds, methods, train_fraction: float = 0.7) -> dict:
    """Fit once per (dataset, seed), score the held-out split in every
    requested score mode and aggregate."""
    runs: dict[tuple[str, str], list[MetricReport]] = {}
    records, timings = [], []
    for ds in datasets:
        for seed in seeds:
            train, test = split_inductive(ds, SplitSpec(train_fraction, seed, True))
            cfg = TrainConfig(**{**config.to_dict(), "seed": seed})
            t0 = time.perf_counter()
            model = fit(train, cfg)
            fit_s = time.perf_counter() - t0
            for method in methods:
                t1 = time.perf_counter()
                scores = _check_finite(score_inductive(model, test, method).scores)
                infer_s = time.perf_counter() - t1
                report = evaluate(scores, test.labels, seed)
                runs.setdefault((method, ds.name), []).append(report)
                records.append({"dataset": ds.name, "method": method, **report.to_dict()})
                timings.append({"dataset": ds.name, "method": method, "seed": seed,
                                "fit_seconds": fit_s, "infer_seconds": infer_s})
            logger.info("%s seed %d: fit %.2fs", ds.name, seed, fit_s)
    return {"records": records, "timings": timings, "aggregate": aggregate(runs),
            "config": config.to_dict()}


def cmd_bench(args) -> int:
    root = Path(args.dataset_dir)
    if not root.is_dir():
        raise DataError(f"unreadable dataset directory: {root}")
    paths = sorted(root.glob("*.csv"))
    if not paths:
        raise DataError(f"no CSV files in {root}")
    config = build_config(args)
    datasets = [load_csv(p, label_column=args.label_column) for p in paths]
    methods = [ScoreMode(m).value for m in args.methods.split(",")]
    doc = run_bench(datasets, config, range(args.seeds), methods, args.train_fraction)
    _write_json(doc, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tmixad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train a model on a CSV")
    p.add_argument("train_csv")
    p.add_argument("--label-column", help="column to drop from the features")
    p.add_argument("--out", required=True, help="model file (JSON)")
    p.add_argument("--log", help="training log (JSON); default <out>.log.json")
    _add_config_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score rows with a saved model")
    p.add_argument("model")
    p.add_argument("data_csv")
    p.add_argument("--mode", choices=["vector", "scalar"], help="default: the model's score_mode")
    p.add_argument("--label-column", help="column to drop from the features")
    p.add_argument("--out", default="-", help="scores CSV (index,score); '-' for stdout")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUC-ROC / AUC-PR of a scores file")
    p.add_argument("scores_csv")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--labels", help="CSV holding the label column")
    src.add_argument("--data", help="labelled data CSV")
    p.add_argument("--label-column", default="label")
    p.add_argument("--dataset")
    p.add_argument("--method", default="tmixad")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("toy", help="write the synthetic group-anomaly dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("bench", help="fit/score/eval every CSV in a directory")
    p.add_argument("dataset_dir")
    p.add_argument("--label-column", default="label")
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--methods", default="vector,scalar")
    p.add_argument("--train-fraction", type=float, default=0.7)
    p.add_argument("--out", default="-")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"tmixad: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelFileError, MetricError) as exc:
        print(f"tmixad: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"tmixad: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"tmixad: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
