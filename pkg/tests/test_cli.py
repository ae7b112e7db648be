"""End-to-end command-line tests on a miniature configuration."""

import json
from pathlib import Path

import pytest

from sncv.cli import main

MINI_CONFIG = """
[population]
n_train = 1200
n_tune = 400
n_test = 600
feature_dim = 6
clusters_per_class = 8
cluster_scatter = 5.0

[train]
hidden_units = 16
max_epochs = 12
patience = 4

[experiment]
n_boot = 150
n_lowest = 60
min_fold_size = 50
"""


@pytest.fixture(scope="module")
def mini_config(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "mini.cfg"
    cfg.write_text(MINI_CONFIG)
    return cfg


@pytest.fixture(scope="module")
def generated(mini_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    rc = main(["--config", str(mini_config), "--seed", "7", "--out", str(out), "gen"])
    assert rc == 0
    return out


def run_cli(mini_config, out, *args, seed="7"):
    return main(["--config", str(mini_config), "--seed", seed, "--out", str(out), *args])


class TestGen:
    def test_outputs_exist_and_tau_reasonable(self, generated):
        for name in ("scheme.json", "pool.json", "population.csv", "train.csv",
                     "tune.csv", "test.csv", "gen_report.json"):
            assert (generated / name).exists()
        report = json.loads((generated / "gen_report.json").read_text())
        assert abs(report["tau"] - 0.246) < 0.04  # small-n draw tolerance
        assert report["seed"] == 7

    def test_byte_identical_across_runs(self, mini_config, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run_cli(mini_config, out_a, "gen") == 0
        assert run_cli(mini_config, out_b, "gen") == 0
        for name in ("train.csv", "tune.csv", "pool.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_missing_scheme_file_exits_2(self, mini_config, tmp_path, capsys):
        rc = main(["--config", str(mini_config), "--seed", "7",
                   "--out", str(tmp_path), "gen", "--scheme", "/nope/missing.json"])
        assert rc == 2
        assert "missing.json" in capsys.readouterr().err

    def test_missing_seed_exits_2(self, mini_config, tmp_path, capsys):
        rc = main(["--config", str(mini_config), "--out", str(tmp_path), "gen"])
        assert rc == 2
        assert "seed" in capsys.readouterr().err


class TestSplitTrainScore:
    def test_split(self, mini_config, generated, tmp_path):
        rc = run_cli(mini_config, tmp_path, "split",
                     "--train", str(generated / "train.csv"),
                     "--scheme", str(generated / "scheme.json"))
        assert rc == 0
        d1 = (tmp_path / "d1.csv").read_text().strip().splitlines()
        d2 = (tmp_path / "d2.csv").read_text().strip().splitlines()
        assert len(d1) - 1 == 600 and len(d2) - 1 == 600

    def test_train_writes_model(self, mini_config, generated, tmp_path):
        rc = run_cli(mini_config, tmp_path, "train",
                     "--train", str(generated / "train.csv"),
                     "--tune", str(generated / "tune.csv"),
                     "--scheme", str(generated / "scheme.json"))
        assert rc == 0
        assert (tmp_path / "model.json").exists()
        report = json.loads((tmp_path / "train_report.json").read_text())
        assert 0.5 < report["tune_auc_at_stop"] <= 1.0

    def test_score_then_select_modes(self, mini_config, generated, tmp_path):
        score_dir = tmp_path / "score"
        rc = run_cli(mini_config, score_dir, "score",
                     "--train", str(generated / "train.csv"),
                     "--tune", str(generated / "tune.csv"),
                     "--scheme", str(generated / "scheme.json"))
        assert rc == 0
        scored = score_dir / "scored.csv"
        assert scored.exists()

        sel_dir = tmp_path / "sel"
        rc = run_cli(mini_config, sel_dir, "select",
                     "--train", str(scored), "--scheme", str(generated / "scheme.json"),
                     "--k", "400")
        assert rc == 0
        summary = json.loads((sel_dir / "selection_summary.json").read_text())
        assert summary["n_selected"] == 400
        assert summary["mode"] == "stratified"

        ncv_dir = tmp_path / "ncv"
        rc = run_cli(mini_config, ncv_dir, "select",
                     "--train", str(scored), "--scheme", str(generated / "scheme.json"),
                     "--select-mode", "ncv")
        assert rc == 0
        summary = json.loads((ncv_dir / "selection_summary.json").read_text())
        assert summary["mode"] == "ncv-binary"
        assert summary["k_requested"] is None


class TestPipeline:
    def test_pipeline_artifacts_and_k_grid(self, mini_config, generated, tmp_path):
        rc = run_cli(mini_config, tmp_path, "pipeline",
                     "--train", str(generated / "train.csv"),
                     "--tune", str(generated / "tune.csv"),
                     "--scheme", str(generated / "scheme.json"),
                     "--k-grid", "0.625,0.75,0.875")
        assert rc == 0
        for name in ("model_final.json", "scored.csv", "qs_histogram.csv",
                     "pipeline_report.json"):
            assert (tmp_path / name).exists()
        report = json.loads((tmp_path / "pipeline_report.json").read_text())
        assert len(report["k_grid_tune_auc"]) == 3
        assert str(report["k_used"]) in report["k_grid_tune_auc"]
        best = max(report["k_grid_tune_auc"].values())
        assert report["k_grid_tune_auc"][str(report["k_used"])] == best

    def test_histogram_gap_zero(self, mini_config, generated, tmp_path):
        rc = run_cli(mini_config, tmp_path, "pipeline",
                     "--train", str(generated / "train.csv"),
                     "--tune", str(generated / "tune.csv"),
                     "--scheme", str(generated / "scheme.json"), "--k", "900")
        assert rc == 0
        rows = (tmp_path / "qs_histogram.csv").read_text().strip().splitlines()[1:]
        for row in rows:
            lo, hi, c_non, c_ref = row.split(",")
            if float(lo) >= -0.25 + 1e-9 and float(hi) <= 0.25 - 1e-9:
                assert c_non == "0" and c_ref == "0"


@pytest.fixture(scope="module")
def scored_csv(mini_config, generated, tmp_path_factory):
    out = tmp_path_factory.mktemp("scored")
    rc = run_cli(mini_config, out, "score",
                 "--train", str(generated / "train.csv"),
                 "--tune", str(generated / "tune.csv"),
                 "--scheme", str(generated / "scheme.json"))
    assert rc == 0
    return out / "scored.csv"


class TestRelabelAndGraders:
    def test_relabel_report(self, mini_config, generated, scored_csv, tmp_path):
        rc = run_cli(mini_config, tmp_path, "relabel",
                     "--train", str(scored_csv),
                     "--scheme", str(generated / "scheme.json"))
        assert rc == 0
        report = json.loads((tmp_path / "relabel_report.json").read_text())
        assert report["n_relabeled"] == 60
        confusion = report["confusion"]
        assert sum(sum(row) for row in confusion) == 60
        rows = (tmp_path / "relabel_rows.csv").read_text().strip().splitlines()
        assert len(rows) - 1 == 60

    def test_graders_threshold_flag_matches_default(self, mini_config, generated,
                                                    scored_csv, tmp_path):
        out_a = tmp_path / "default"
        out_b = tmp_path / "explicit"
        rc = run_cli(mini_config, out_a, "graders",
                     "--train", str(scored_csv),
                     "--scheme", str(generated / "scheme.json"),
                     "--pool", str(generated / "pool.json"))
        assert rc == 0
        rc = run_cli(mini_config, out_b, "graders",
                     "--train", str(scored_csv),
                     "--scheme", str(generated / "scheme.json"),
                     "--pool", str(generated / "pool.json"),
                     "--mismatch-threshold", "0.3")
        assert rc == 0
        a = json.loads((out_a / "grader_report.json").read_text())
        b = json.loads((out_b / "grader_report.json").read_text())
        assert a["graders"] == b["graders"]
        assert a["flagged_role_shares"] == b["flagged_role_shares"]


class TestBandsAndBurden:
    def test_bands_reports(self, mini_config, generated, tmp_path):
        rc = run_cli(mini_config, tmp_path, "bands",
                     "--train", str(generated / "train.csv"),
                     "--tune", str(generated / "tune.csv"),
                     "--scheme", str(generated / "scheme.json"),
                     "--k-grid", "0.5,0.75")
        assert rc == 0
        auc_rows = (tmp_path / "bands_auc.csv").read_text().strip().splitlines()
        comp_rows = (tmp_path / "bands_composition.csv").read_text().strip().splitlines()
        assert len(auc_rows) - 1 == 3  # 0.5, 0.75 and the full band
        assert len(comp_rows) - 1 == 3
        # full band: high and low selections coincide, delta is zero
        last = auc_rows[-1].split(",")
        assert float(last[3]) == 0.0
        # unstratified top band holds a smaller positive share than the bottom
        first_comp = comp_rows[1].split(",")
        assert float(first_comp[1]) < float(first_comp[2])

    def test_burden_report(self, mini_config, generated, tmp_path):
        rc = run_cli(mini_config, tmp_path, "burden",
                     "--train", str(generated / "train.csv"),
                     "--tune", str(generated / "tune.csv"),
                     "--test", str(generated / "test.csv"),
                     "--scheme", str(generated / "scheme.json"),
                     "--subsample-fraction", "1.0")
        assert rc == 0
        report = json.loads((tmp_path / "burden_report.json").read_text())
        assert set(report["arms"]) == {"full_baseline", "subsample_baseline",
                                       "subsample_sncv", "subsample_ncv"}
        assert len(report["noninferiority_tests"]) == 3
        assert len(report["two_tailed_tests"]) == 3
        # f = 1.0 makes the subsample the full set: identical training data
        assert report["n_subsample"] == 1200


class TestEval:
    def test_single_and_pair_eval(self, mini_config, generated, tmp_path):
        model_dir = tmp_path / "m"
        rc = run_cli(mini_config, model_dir, "train",
                     "--train", str(generated / "train.csv"),
                     "--tune", str(generated / "tune.csv"),
                     "--scheme", str(generated / "scheme.json"))
        assert rc == 0
        out = tmp_path / "eval"
        rc = run_cli(mini_config, out, "eval",
                     "--train", str(generated / "test.csv"),
                     "--scheme", str(generated / "scheme.json"),
                     "--model", str(model_dir / "model.json"),
                     "--model", str(model_dir / "model.json"))
        assert rc == 0
        report = json.loads((out / "eval_report.json").read_text())
        assert len(report["models"]) == 1  # same path twice keys once
        assert report["two_tailed"]["delta"] == 0.0
        assert report["two_tailed"]["p_two_tailed"] == 1.0
        assert report["noninferiority"]["decision"] == "non-inferior"

    def test_eval_without_model_exits_2(self, mini_config, generated, tmp_path, capsys):
        rc = run_cli(mini_config, tmp_path, "eval",
                     "--train", str(generated / "test.csv"),
                     "--scheme", str(generated / "scheme.json"))
        assert rc == 2
