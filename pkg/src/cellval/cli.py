"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 compute
error, 5 oracle-check mismatch, 1 anything unexpected.  Errors are printed
to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .checks import oob_equivalence, shapley_agreement
from .config import COMMANDS, RunConfig, build_config
from .data import Dataset, load_csv, normalize, prepare
from .errors import ComputeError, ConfigError, DataError
from .experiments.images import (TriggerSpec, load_image_csv, superpixel_shape, synth_images,
                                 trigger_cell_mask)
from .experiments.metrics import DetectionCurve, ideal_auc
from .experiments.protocols import (STREAM_DATA, STREAM_SPLIT, Stopwatch, backdoor_run,
                                    fixation_run, mislabel_run, outlier_run, synthetic_tabular,
                                    value_cells)
from .io import cell_scores_csv, pgm_p2, point_scores_csv, report_json, write_atomic
from .seeding import derive_seed, round_half_up
from .valuation import marginalize

EXIT_OK, EXIT_UNEXPECTED, EXIT_CONFIG, EXIT_DATA, EXIT_COMPUTE, EXIT_CHECK = 0, 1, 2, 3, 4, 5
CURVE_POINTS = 201

log = logging.getLogger("cellval")


def version_string() -> str:
    """``v<version>`` plus ``-g<commit>`` when run from a git checkout."""
    base = f"v{__version__}"
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return base
    rev = out.stdout.strip()
    return f"{base}-g{rev}" if out.returncode == 0 and rev else base


def _clean(obj):
    """Make a value JSON-safe: numpy scalars to Python, NaN to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return None if not np.isfinite(obj) else float(obj)
    return obj


class Run:
    """Collects outputs and report fields for one command invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.watch = Stopwatch()
        self.metrics: dict = {}
        self.curves: dict = {}
        self.seeds: dict = {"run": cfg.seed}
        self.warnings: list = []
        self.outputs: list = []

    def stage(self, name):
        log.info("stage %s", name)
        return self.watch.stage(name)

    def write(self, rel: str, text: str) -> None:
        write_atomic(self.out / rel, text)
        self.outputs.append(rel)

    def report(self) -> dict:
        return _clean({
            "command": self.cfg.command,
            "version": version_string(),
            "config": self.cfg.to_dict(),
            "seeds": self.seeds,
            "metrics": self.metrics,
            "curves": self.curves,
            "warnings": self.warnings,
            "outputs": sorted(self.outputs + ["report.json"]),
            "timings": {k: round(v, 6) for k, v in self.watch.timings.items()},
        })


def _label_arg(labels: str):
    return int(labels) if labels.lstrip("-").isdigit() else labels


def _tabular(run: Run, need_test: bool) -> tuple[Dataset, Dataset | None]:
    cfg = run.cfg
    with run.stage("load"):
        if cfg.data is None:
            run.seeds["data"] = derive_seed(cfg.seed, STREAM_DATA)
            train, test = synthetic_tabular(cfg.seed, cfg.n_train, cfg.n_test, cfg.n_features,
                                            cfg.class_sep, cfg.pooled_normalization)
            return train, (test if need_test else None)
        ds = load_csv(cfg.data, _label_arg(cfg.labels))
        if not need_test:
            return normalize(ds)[0], None
        n_test = round_half_up(cfg.test_fraction * ds.n)
        if n_test < 1 or ds.n - n_test < 2:
            raise DataError(f"{ds.n} rows are too few for a {cfg.test_fraction} test split")
        run.seeds["split"] = derive_seed(cfg.seed, STREAM_SPLIT)
        train, test, _ = prepare(ds, ds.n - n_test, n_test, run.seeds["split"],
                                 cfg.pooled_normalization)
        return train, test


def cmd_value(run: Run, threads: int) -> None:
    cfg = run.cfg
    ds, _ = _tabular(run, need_test=False)
    ens = cfg.ensemble_config()
    run.seeds["ensemble"] = ens.master_seed
    rec, cv = value_cells(ds, ens, cfg.score_function, threads, run.watch)
    pv = marginalize(cv)
    with run.stage("write"):
        run.write("cell_scores.csv", cell_scores_csv(cv.scores, ds.feature_names))
        run.write("point_scores.csv", point_scores_csv(pv.scores))
    run.metrics = {"n": ds.n, "d": ds.d, "subset_size": ens.subset_size(ds.d),
                   "missing_cells": int(cv.missing.sum()),
                   "partial_rows": int(pv.partial.sum()),
                   "missing_rows": int(np.isnan(pv.scores).sum())}


def _outlier(run: Run, threads: int, train: Dataset):
    cfg = run.cfg
    res = outlier_run(train, cfg.ensemble_config(), cfg.score_function, cfg.row_ratio,
                      cfg.col_ratio, cfg.tail_prob, cfg.seed, threads)
    run.watch.timings.update(res.timings)
    run.seeds.update(res.seeds)
    run.warnings += res.warnings
    prevalence = float(res.mask.mean())
    run.metrics.update({"auc": res.curve.auc, "random_auc": res.random_curve.auc,
                        "ideal_auc": ideal_auc(prevalence), "corrupted_cells": int(res.mask.sum()),
                        "corrupted_share": prevalence,
                        "missing_cells": int(res.cells.missing.sum()),
                        "missing_corrupted_cells": res.curve.n_excluded_true})
    run.curves["detection"] = _thin(res.curve)
    run.curves["random"] = _thin(res.random_curve)
    return res


def _thin(curve) -> dict:
    keep = np.unique(np.linspace(0, len(curve.fractions) - 1, CURVE_POINTS).round().astype(int))
    return DetectionCurve(curve.fractions[keep], curve.rates[keep], curve.auc,
                          curve.n_excluded, curve.n_excluded_true).to_dict()


def cmd_outlier_bench(run: Run, threads: int) -> None:
    train, _ = _tabular(run, need_test=False)
    res = _outlier(run, threads, train)
    with run.stage("write"):
        run.write("cell_scores.csv", cell_scores_csv(res.cells.scores, train.feature_names))


def cmd_fix(run: Run, threads: int) -> None:
    cfg = run.cfg
    train, test = _tabular(run, need_test=True)
    res = _outlier(run, threads, train)
    with run.stage("fixation"):
        curve = fixation_run(res, test, cfg.budgets, cfg.fix_mode, cfg.missing)
    run.curves["fixation"] = curve.to_dict()
    run.metrics["accuracy_by_budget"] = dict(zip((repr(b) for b in cfg.budgets),
                                                 curve.accuracies.tolist()))
    with run.stage("write"):
        run.write("cell_scores.csv", cell_scores_csv(res.cells.scores, train.feature_names))


def cmd_mislabel(run: Run, threads: int) -> None:
    cfg = run.cfg
    train, test = _tabular(run, need_test=True)
    if train.n_classes != 2:
        raise DataError("mislabel needs a binary label column")
    res = mislabel_run(train, test, cfg.ensemble_config(), cfg.score_function, cfg.flip_ratio,
                       cfg.max_remove_fraction, cfg.remove_step, cfg.seed, threads)
    run.watch.timings.update(res.timings)
    run.seeds.update(res.seeds)
    run.metrics.update({"aucpr": res.aucpr, "base_rate": float(res.flipped.mean()),
                        "flipped": int(res.flipped.sum()),
                        "missing_points": int(np.isnan(res.points.scores).sum()),
                        "removal_truncated": res.removal.truncated})
    run.curves["removal"] = res.removal.to_dict()
    with run.stage("write"):
        run.write("cell_scores.csv", cell_scores_csv(res.cells.scores, train.feature_names))
        run.write("point_scores.csv", point_scores_csv(res.points.scores))


def cmd_backdoor(run: Run, threads: int) -> None:
    cfg = run.cfg
    with run.stage("load"):
        if cfg.data is None:
            run.seeds["data"] = derive_seed(cfg.seed, STREAM_DATA)
            imgs = synth_images(cfg.n_images, cfg.height, cfg.width, run.seeds["data"])
        else:
            imgs = load_image_csv(cfg.data, cfg.height, cfg.width, cfg.channels,
                                  _label_arg(cfg.labels))
    spec = TriggerSpec(pattern=np.ones((cfg.trigger_size, cfg.trigger_size)),
                       poison_fraction=cfg.poison_fraction, source_class=cfg.source_class,
                       target_class=cfg.target_class)
    res = backdoor_run(imgs, spec, cfg.ensemble_config(), cfg.seed, threads, cfg.score_function)
    run.watch.timings.update(res.timings)
    run.seeds.update(res.seeds)
    h2, w2 = superpixel_shape(cfg.height, cfg.width)
    trigger = trigger_cell_mask(spec, cfg.height, cfg.width)
    argmax_in_trigger = 0
    with run.stage("write"):
        for i in res.poisoned:
            row = res.cells.scores[i]
            run.write(f"heatmaps/img_{int(i):05d}.pgm", pgm_p2(row.reshape(h2, w2)))
            if not np.all(np.isnan(row)) and trigger[int(np.nanargmax(row))]:
                argmax_in_trigger += 1
        run.write("cell_scores.csv", cell_scores_csv(res.cells.scores, res.features.feature_names))
    run.metrics.update({"mean_auc": res.mean_auc, "poisoned_images": len(res.poisoned),
                        "trigger_cells": int(trigger.sum()),
                        "argmax_in_trigger": argmax_in_trigger})
    run.curves["per_image_auc"] = {"images": res.poisoned.tolist(),
                                   "auc": [c.auc for c in res.curves]}


def cmd_oracle_check(run: Run, threads: int) -> int:
    cfg = run.cfg
    with run.stage("oob"):
        oob = oob_equivalence(range(cfg.oracle_instances), threads=threads)
    with run.stage("shapley"):
        shap = shapley_agreement(cfg.seed)
    run.metrics.update(oob)
    run.metrics.update(shap)
    ok = (oob["cell_gap"] <= 1e-12 and oob["point_gap"] <= 1e-12 and oob["bagging_gap"] <= 1e-12
          and shap["enumerator_gap"] <= 1e-12 and shap["efficiency_gap"] <= 1e-12
          and shap["mc_gap"] <= 0.05)
    run.metrics["passed"] = ok
    return EXIT_OK if ok else EXIT_CHECK


HANDLERS = {"value": cmd_value, "outlier-bench": cmd_outlier_bench, "fix": cmd_fix,
            "mislabel": cmd_mislabel, "backdoor": cmd_backdoor, "oracle-check": cmd_oracle_check}


def _set_pair(text: str):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip().replace("-", "_"), yaml.safe_load(value)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellval", description="Cell-level out-of-bag data valuation.")
    p.add_argument("--version", action="version", version=f"cellval {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON or YAML file of run settings")
        s.add_argument("--data", help="CSV with a header row; omit for synthetic data")
        s.add_argument("--labels", help="label column name or index (default: last)")
        s.add_argument("--seed", type=int)
        s.add_argument("--trees", type=int)
        s.add_argument("--feature-ratio", type=float)
        s.add_argument("--score-fn", choices=["accuracy", "neg_squared_error", "dist_reg_accuracy"])
        s.add_argument("--weak-learner", choices=["tree", "logistic"])
        s.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
        s.add_argument("--out-dir")
        s.add_argument("--set", dest="sets", action="append", type=_set_pair, default=[],
                       metavar="KEY=VALUE", help="override any other setting (YAML value)")
        s.add_argument("-q", "--quiet", action="store_true")
    return p


def _error(code: int, exc: Exception) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, ConfigError):
        payload["field"] = exc.field
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        if args.threads < 1:
            raise ConfigError("threads", "must be >= 1")
        overrides = dict(args.sets)
        overrides.update({"data": args.data, "labels": args.labels, "seed": args.seed,
                          "trees": args.trees, "feature_ratio": args.feature_ratio,
                          "score_fn": args.score_fn, "weak_learner": args.weak_learner,
                          "out_dir": args.out_dir})
        cfg = build_config(args.command, args.config, overrides)
        run = Run(cfg)
        t0 = time.perf_counter()
        code = HANDLERS[cfg.command](run, args.threads) or EXIT_OK
        run.watch.timings["total"] = time.perf_counter() - t0
        write_atomic(run.out / "report.json", report_json(run.report()))
        log.info("wrote %s", run.out / "report.json")
        return code
    except ConfigError as exc:
        return _error(EXIT_CONFIG, exc)
    except DataError as exc:
        return _error(EXIT_DATA, exc)
    except ComputeError as exc:
        return _error(EXIT_COMPUTE, exc)
    except OSError as exc:
        return _error(EXIT_DATA, exc)


if __name__ == "__main__":
    sys.exit(main())
