from __future__ import annotations

import hashlib
import json

import numpy as np
import pytest

from cellval import cli
from cellval.config import RunConfig
from cellval.data import dumps_csv, load_csv, normalize, synth_gaussian
from cellval.ensemble import train_ensemble
from cellval.errors import ComputeError
from cellval.experiments.images import trigger_cell_mask, TriggerSpec
from cellval.experiments.protocols import synthetic_tabular
from cellval.io import read_pgm_p2, read_score_csv
from cellval.learners import accuracy, fit_logistic
from cellval.valuation import compute_data_oob


def run(args, tmp_path, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out-dir", str(out), "-q"])
    return code, out


def report(out):
    return json.loads((out / "report.json").read_text())


def test_value_default_shapes(tmp_path):
    code, out = run(["value"], tmp_path)
    assert code == 0
    cells = read_score_csv(out / "cell_scores.csv")
    points = read_score_csv(out / "point_scores.csv")
    assert cells.shape == (1000, 20) and points.shape == (1000, 2)
    rep = report(out)
    assert RunConfig.from_mapping(rep["config"]) == RunConfig(command="value", out_dir=str(out))
    assert rep["version"].startswith("v")
    assert set(rep["seeds"]) >= {"run", "data", "ensemble"}


def test_full_ratio_points_equal_data_oob(tmp_path):
    code, out = run(["value", "--feature-ratio", "1.0", "--trees", "80", "--seed", "5"], tmp_path)
    assert code == 0
    cfg = RunConfig.from_mapping(report(out)["config"])
    train, _ = synthetic_tabular(5, cfg.n_train, cfg.n_test, cfg.n_features, cfg.class_sep)
    ref = compute_data_oob(train_ensemble(train, cfg.ensemble_config()), train).scores
    got = read_score_csv(out / "point_scores.csv")[:, 1]
    assert np.array_equal(np.isnan(got), np.isnan(ref))
    assert np.nanmax(np.abs(got - ref)) <= 1e-12


def test_config_error_exit_code(tmp_path, capsys):
    code, _ = run(["value", "--feature-ratio", "1.5"], tmp_path)
    assert code == cli.EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["field"] == "feature_ratio"


def test_data_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,y\n1,0\nzz,1\n")
    code, _ = run(["value", "--data", str(bad)], tmp_path)
    assert code == cli.EXIT_DATA


def test_compute_error_exit_code(tmp_path, monkeypatch):
    def boom(run, threads):
        raise ComputeError("no learner covers the cell")
    monkeypatch.setitem(cli.HANDLERS, "value", boom)
    code, _ = run(["value"], tmp_path)
    assert code == cli.EXIT_COMPUTE


def test_value_on_csv_does_not_touch_input(tmp_path):
    ds = synth_gaussian(120, 4, 2.0, 0)
    src = tmp_path / "in.csv"
    src.write_text(dumps_csv(ds))
    before = hashlib.sha256(src.read_bytes()).hexdigest()
    code, out = run(["value", "--data", str(src), "--labels", "label", "--trees", "30"], tmp_path)
    assert code == 0
    assert hashlib.sha256(src.read_bytes()).hexdigest() == before
    assert read_score_csv(out / "cell_scores.csv").shape == (120, 4)
    assert (out / "cell_scores.csv").read_text().splitlines()[0] == "x0,x1,x2,x3"


def test_config_file_and_set_overrides(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("trees: 20\nn_train: 100\nn_test: 50\nn_features: 5\n")
    code, out = run(["value", "--config", str(cfg), "--trees", "25", "--set", "n_features=6"],
                    tmp_path)
    assert code == 0
    echoed = report(out)["config"]
    assert (echoed["trees"], echoed["n_features"], echoed["n_train"]) == (25, 6, 100)


def test_fix_three_budgets(tmp_path):
    code, out = run(["fix", "--trees", "60", "--set", "budgets=[0, 0.5, 1]",
                     "--set", "n_train=300", "--set", "n_test=400"], tmp_path)
    assert code == 0
    rep = report(out)
    curve = rep["curves"]["fixation"]
    assert curve["budgets"] == [0.0, 0.5, 1.0] and len(curve["accuracies"]) == 3
    train, test = synthetic_tabular(0, 300, 400, 20)
    clean_acc = accuracy(fit_logistic(train.features, train.labels), test)
    assert curve["accuracies"][-1] == clean_acc


def test_mislabel_beats_base_rate(tmp_path):
    code, out = run(["mislabel", "--trees", "300"], tmp_path)
    assert code == 0
    m = report(out)["metrics"]
    assert m["base_rate"] == 0.1 and m["aucpr"] > 0.1


def test_backdoor_heatmaps(tmp_path):
    code, out = run(["backdoor", "--trees", "300", "--set", "n_images=300"], tmp_path)
    assert code == 0
    rep = report(out)
    images = rep["curves"]["per_image_auc"]["images"]
    maps = sorted((out / "heatmaps").iterdir())
    assert len(maps) == len(images) == rep["metrics"]["poisoned_images"]
    trigger = trigger_cell_mask(TriggerSpec(), 16, 16).reshape(8, 8)
    ideal = 1 - 4 / 64 / 2
    for img, auc in zip(images, rep["curves"]["per_image_auc"]["auc"]):
        gray = read_pgm_p2(out / "heatmaps" / f"img_{img:05d}.pgm")
        assert gray.shape == (8, 8) and gray.max() == 255
        if auc == pytest.approx(ideal):
            assert trigger[gray == 255].all()


def test_oracle_check(tmp_path):
    code, out = run(["oracle-check", "--set", "oracle_instances=3"], tmp_path)
    assert code == 0 and report(out)["metrics"]["passed"] is True


def strip(rep):
    rep = dict(rep)
    rep.pop("timings")
    return rep


@pytest.mark.parametrize("command,extra", [
    ("value", []), ("outlier-bench", []), ("fix", []), ("mislabel", []),
    ("backdoor", ["--set", "n_images=200"]), ("oracle-check", ["--set", "oracle_instances=2"])])
def test_rerun_determinism_across_threads(tmp_path, command, extra):
    args = [command, "--trees", "40", "--seed", "11", *extra]
    outs = [run([*args, "--threads", t], tmp_path, f"o{t}{k}")[1]
            for t, k in (("1", "a"), ("1", "b"), ("8", "c"))]
    first = outs[0]
    files = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    for other in outs[1:]:
        assert sorted(p.relative_to(other) for p in other.rglob("*") if p.is_file()) == files
        for f in files:
            if f.name == "report.json":
                a, b = strip(report(first)), strip(report(other))
                a["config"].pop("out_dir"), b["config"].pop("out_dir")
                assert a == b
            else:
                assert (first / f).read_bytes() == (other / f).read_bytes()


def test_outlier_auc_falls_with_milder_outliers(tmp_path):
    medians = []
    for tail in (0.01, 0.1, 0.3):
        aucs = []
        for seed in range(5):
            code, out = run(["outlier-bench", "--trees", "300", "--seed", str(seed),
                             "--set", f"tail_prob={tail}"], tmp_path, f"t{tail}_{seed}")
            assert code == 0
            aucs.append(report(out)["metrics"]["auc"])
        medians.append(float(np.median(aucs)))
    assert medians[0] > medians[1] > medians[2]
