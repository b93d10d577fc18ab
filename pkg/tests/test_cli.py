"""End-to-end CLI tests: simulate -> train -> impute -> aggregate -> diagnose."""

import csv
import json
import os

import numpy as np
import pytest

from costboost.boosting import load_model, predict
from costboost.cli import entrypoint, main
from costboost.data import CsvSchema, load_csv


def run_ok(argv):
    assert main(argv) == 0


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    run_ok([
        "simulate", "--rows", "160", "--test-rows", "60", "--seed", "5",
        "--out-dir", str(out),
    ])
    return out


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, sim_dir):
    out = tmp_path_factory.mktemp("run")
    run_ok([
        "train", str(sim_dir / "train.csv"), "--response", "response",
        "--id-column", "row_id", "--weights-column", "weight",
        "--cost-ratio", "3:1", "--learning-rate", "0.1", "--max-trees", "30",
        "--folds", "3", "--seed", "5", "--out-dir", str(out),
    ])
    return out


class TestSimulate:
    def test_outputs_exist_with_manifest(self, sim_dir):
        for name in ("train.csv", "test.csv", "manifest.json"):
            assert (sim_dir / name).exists()
        manifest = json.load(open(sim_dir / "manifest.json"))
        assert manifest["command"] == "simulate"
        assert {o["path"] for o in manifest["outputs"]} == {"train.csv", "test.csv"}

    def test_oracle_column_in_test_file(self, sim_dir):
        rows = read_rows(sim_dir / "test.csv")
        assert len(rows) == 60
        assert "oracle_0.75" in rows[0]

    def test_reruns_are_byte_identical(self, sim_dir, tmp_path):
        again = tmp_path / "again"
        run_ok([
            "simulate", "--rows", "160", "--test-rows", "60", "--seed", "5",
            "--out-dir", str(again),
        ])
        assert read_bytes(sim_dir / "train.csv") == read_bytes(again / "train.csv")
        assert read_bytes(sim_dir / "test.csv") == read_bytes(again / "test.csv")

    def test_seed_changes_bytes(self, sim_dir, tmp_path):
        other = tmp_path / "other"
        run_ok([
            "simulate", "--rows", "160", "--test-rows", "60", "--seed", "6",
            "--out-dir", str(other),
        ])
        assert read_bytes(sim_dir / "train.csv") != read_bytes(other / "train.csv")

    def test_count_mode_emits_nonnegative_integers(self, tmp_path):
        out = tmp_path / "counts"
        run_ok(["simulate", "--rows", "50", "--test-rows", "10", "--count-mode",
                "--out-dir", str(out)])
        values = [float(r["response"]) for r in read_rows(out / "train.csv")]
        assert all(v >= 0 and v == int(v) for v in values)


class TestTrain:
    def test_outputs_and_stdout(self, run_dir, capsys):
        for name in ("model.json", "cv_curve.csv", "cv_curve.png", "manifest.json"):
            assert (run_dir / name).exists()

    def test_cost_ratio_echoed_in_manifest(self, run_dir):
        manifest = json.load(open(run_dir / "manifest.json"))
        assert manifest["config"]["cost_ratio"] == "3:1"
        assert manifest["config"]["alpha"] == 0.75

    def test_cv_table_matches_model_budget(self, run_dir):
        rows = read_rows(run_dir / "cv_curve.csv")
        assert len(rows) == 30
        assert [r["iteration"] for r in rows[:3]] == ["1", "2", "3"]
        model = load_model(str(run_dir / "model.json"))
        assert 1 <= model.n_trees <= 30

    def test_prints_selection_summary(self, sim_dir, tmp_path, capsys):
        out = tmp_path / "verbose"
        run_ok([
            "train", str(sim_dir / "train.csv"), "--response", "response",
        "--id-column", "row_id", "--weights-column", "weight",
            "--alpha", "0.5", "--learning-rate", "0.1", "--max-trees", "10",
            "--folds", "3", "--seed", "5", "--out-dir", str(out), "--no-plots",
        ])
        captured = capsys.readouterr().out
        assert "selected iterations:" in captured
        assert "final training deviance:" in captured

    def test_cost_ratio_1_1_equals_alpha_half(self, sim_dir, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        common = [
            "train", str(sim_dir / "train.csv"), "--response", "response",
        "--id-column", "row_id", "--weights-column", "weight",
            "--learning-rate", "0.1", "--max-trees", "12", "--folds", "3",
            "--seed", "9", "--no-plots",
        ]
        run_ok(common + ["--cost-ratio", "1:1", "--out-dir", str(a)])
        run_ok(common + ["--alpha", "0.5", "--out-dir", str(b)])
        assert read_bytes(a / "model.json") == read_bytes(b / "model.json")

    def test_reruns_byte_identical_including_plot(self, sim_dir, run_dir, tmp_path):
        again = tmp_path / "again"
        run_ok([
            "train", str(sim_dir / "train.csv"), "--response", "response",
        "--id-column", "row_id", "--weights-column", "weight",
            "--cost-ratio", "3:1", "--learning-rate", "0.1", "--max-trees", "30",
            "--folds", "3", "--seed", "5", "--out-dir", str(again),
        ])
        for name in ("model.json", "cv_curve.csv", "cv_curve.png"):
            assert read_bytes(run_dir / name) == read_bytes(again / name), name

    def test_conflicting_alpha_flags_fail(self, sim_dir, tmp_path, capsys):
        rc = entrypoint([
            "train", str(sim_dir / "train.csv"), "--response", "response",
        "--id-column", "row_id", "--weights-column", "weight",
            "--alpha", "0.5", "--cost-ratio", "3:1",
            "--out-dir", str(tmp_path / "x"),
        ])
        assert rc == 2
        err = capsys.readouterr().err
        assert err.startswith("error: ")
        assert "\n" not in err.strip()

    def test_missing_alpha_fails(self, sim_dir, tmp_path):
        rc = entrypoint([
            "train", str(sim_dir / "train.csv"), "--response", "response",
        "--id-column", "row_id", "--weights-column", "weight",
            "--out-dir", str(tmp_path / "x"),
        ])
        assert rc == 2

    def test_ten_to_one_ratio_resolves_in_manifest(self, sim_dir, tmp_path):
        out = tmp_path / "ten"
        run_ok([
            "train", str(sim_dir / "train.csv"), "--response", "response",
            "--id-column", "row_id", "--weights-column", "weight",
            "--cost-ratio", "10:1", "--learning-rate", "0.1", "--max-trees", "8",
            "--folds", "3", "--seed", "5", "--no-plots", "--out-dir", str(out),
        ])
        manifest = json.load(open(out / "manifest.json"))
        assert manifest["config"]["cost_ratio"] == "10:1"
        assert manifest["config"]["alpha"] == 10 / 11

    def test_tuning_defaults(self, sim_dir, tmp_path):
        from costboost.cli import build_parser

        args = build_parser().parse_args([
            "train", "whatever.csv", "--response", "y", "--alpha", "0.5",
            "--out-dir", "o",
        ])
        assert args.learning_rate == 0.001
        assert args.max_trees == 6000
        assert args.splits == 10
        assert args.min_node == 5
        assert args.subsample == 0.5
        assert args.folds == 10

        diag = build_parser().parse_args(["diagnose", "m.json", "d.csv", "--out-dir", "o"])
        assert diag.pd_points == 100
        assert diag.baseline_replicates == 50


class TestImpute:
    def test_scores_test_file(self, sim_dir, run_dir, tmp_path):
        out = tmp_path / "scored"
        run_ok([
            "impute", str(run_dir / "model.json"), str(sim_dir / "test.csv"),
            "--id-column", "row_id", "--out-dir", str(out),
        ])
        rows = read_rows(out / "predictions.csv")
        assert len(rows) == 60
        assert rows[0]["row_id"].startswith("u")

        model = load_model(str(run_dir / "model.json"))
        data = load_csv(
            str(sim_dir / "test.csv"),
            CsvSchema(row_id="row_id", predictors=model.predictor_names),
        )
        expected = predict(model, data)
        got = np.array([float(r["imputed_value"]) for r in rows])
        assert np.array_equal(got, expected)

    def test_zero_trees_gives_constant(self, sim_dir, run_dir, tmp_path):
        out = tmp_path / "flat"
        run_ok([
            "impute", str(run_dir / "model.json"), str(sim_dir / "test.csv"),
            "--n-trees", "0", "--out-dir", str(out),
        ])
        model = load_model(str(run_dir / "model.json"))
        values = {float(r["imputed_value"]) for r in read_rows(out / "predictions.csv")}
        assert values == {model.f0}

    def test_schema_mismatch_fails(self, run_dir, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        rc = entrypoint([
            "impute", str(run_dir / "model.json"), str(bad),
            "--out-dir", str(tmp_path / "x"),
        ])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_per_row_spread_across_cost_ratios(self, sim_dir, run_dir, tmp_path):
        # two models at different cost ratios scored on the same rows give
        # the analyst a per-row spread; heavier underestimation penalties
        # push imputed values up
        sym_dir = tmp_path / "sym"
        run_ok([
            "train", str(sim_dir / "train.csv"), "--response", "response",
        "--id-column", "row_id", "--weights-column", "weight",
            "--cost-ratio", "1:1", "--learning-rate", "0.1", "--max-trees", "30",
            "--folds", "3", "--seed", "5", "--no-plots", "--out-dir", str(sym_dir),
        ])
        s1 = tmp_path / "scored1"
        s2 = tmp_path / "scored2"
        run_ok(["impute", str(sym_dir / "model.json"), str(sim_dir / "test.csv"),
                "--out-dir", str(s1)])
        run_ok(["impute", str(run_dir / "model.json"), str(sim_dir / "test.csv"),
                "--out-dir", str(s2)])
        v1 = np.array([float(r["imputed_value"]) for r in read_rows(s1 / "predictions.csv")])
        v2 = np.array([float(r["imputed_value"]) for r in read_rows(s2 / "predictions.csv")])
        assert v2.mean() > v1.mean()


class TestAggregate:
    def write_csv(self, path, header, rows):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        return str(path)

    def test_observed_plus_imputed_totals(self, tmp_path):
        obs = self.write_csv(tmp_path / "obs.csv", ["row_id", "y", "stratum"],
                             [["a", "3", "s1"], ["b", "5", "s1"]])
        imp = self.write_csv(tmp_path / "imp.csv", ["row_id", "imputed_value", "stratum"],
                             [["c", "10", "s1"]])
        out = tmp_path / "totals"
        run_ok([
            "aggregate", "--imputed", imp, "--observed", obs,
            "--observed-value-column", "y", "--out-dir", str(out),
        ])
        rows = {r["stratum"]: r for r in read_rows(out / "totals.csv")}
        assert float(rows["s1"]["total"]) == 18.0
        assert float(rows["TOTAL"]["total"]) == 18.0
        assert rows["s1"]["n_observed"] == "2"
        assert rows["s1"]["n_imputed"] == "1"

    def test_empty_imputed_set(self, tmp_path):
        obs = self.write_csv(tmp_path / "obs.csv", ["row_id", "y", "stratum"],
                             [["a", "3", "s1"], ["b", "4", "s2"]])
        imp = self.write_csv(tmp_path / "imp.csv", ["row_id", "imputed_value", "stratum"], [])
        out = tmp_path / "totals"
        run_ok([
            "aggregate", "--imputed", imp, "--observed", obs,
            "--observed-value-column", "y", "--out-dir", str(out),
        ])
        rows = {r["stratum"]: r for r in read_rows(out / "totals.csv")}
        assert float(rows["TOTAL"]["total"]) == 7.0
        assert float(rows["s1"]["total"]) == 3.0

    def test_totals_invariant_to_row_order(self, tmp_path):
        rows = [[f"r{i}", repr(0.1 * i + 0.01), f"s{i % 3}"] for i in range(30)]
        imp1 = self.write_csv(tmp_path / "i1.csv",
                              ["row_id", "imputed_value", "stratum"], rows)
        imp2 = self.write_csv(tmp_path / "i2.csv",
                              ["row_id", "imputed_value", "stratum"], rows[::-1])
        out1 = tmp_path / "t1"
        out2 = tmp_path / "t2"
        run_ok(["aggregate", "--imputed", imp1, "--out-dir", str(out1)])
        run_ok(["aggregate", "--imputed", imp2, "--out-dir", str(out2)])
        assert read_bytes(out1 / "totals.csv") == read_bytes(out2 / "totals.csv")

    def test_overlapping_ids_fail(self, tmp_path, capsys):
        obs = self.write_csv(tmp_path / "obs.csv", ["row_id", "y", "stratum"],
                             [["a", "3", "s1"]])
        imp = self.write_csv(tmp_path / "imp.csv", ["row_id", "imputed_value", "stratum"],
                             [["a", "10", "s1"]])
        rc = entrypoint(["aggregate", "--imputed", imp, "--observed", obs,
                         "--observed-value-column", "y",
                         "--out-dir", str(tmp_path / "x")])
        assert rc == 2
        assert "both observed and imputed" in capsys.readouterr().err


class TestDiagnose:
    def test_skip_baseline_outputs(self, sim_dir, run_dir, tmp_path):
        out = tmp_path / "diag"
        run_ok([
            "diagnose", str(run_dir / "model.json"), str(sim_dir / "train.csv"),
            "--skip-baseline", "--pd-points", "20", "--out-dir", str(out),
        ])
        for name in ("partial_dependence.csv", "pd_deciles.csv", "influence.csv",
                     "influence.png", "pd_x1.png", "pd_x2.png", "pd_x3.png",
                     "manifest.json"):
            assert (out / name).exists(), name
        pd_rows = read_rows(out / "partial_dependence.csv")
        assert len(pd_rows) == 3 * 20
        inf_rows = read_rows(out / "influence.csv")
        assert list(inf_rows[0].keys()) == ["predictor", "empirical"]
        assert sum(float(r["empirical"]) for r in inf_rows) == pytest.approx(100.0)

    def test_two_point_grid(self, sim_dir, run_dir, tmp_path):
        out = tmp_path / "diag2"
        run_ok([
            "diagnose", str(run_dir / "model.json"), str(sim_dir / "train.csv"),
            "--skip-baseline", "--pd-points", "2", "--no-plots",
            "--out-dir", str(out),
        ])
        pd_rows = read_rows(out / "partial_dependence.csv")
        assert len(pd_rows) == 3 * 2

    def test_baseline_reports_mean_and_sd(self, sim_dir, run_dir, tmp_path):
        out = tmp_path / "diag3"
        run_ok([
            "diagnose", str(run_dir / "model.json"), str(sim_dir / "train.csv"),
            "--response", "response", "--baseline-replicates", "2",
            "--baseline-max-trees", "8", "--no-plots", "--out-dir", str(out),
        ])
        inf_rows = read_rows(out / "influence.csv")
        assert list(inf_rows[0].keys()) == [
            "predictor", "empirical", "baseline_mean", "baseline_sd"
        ]
        manifest = json.load(open(out / "manifest.json"))
        assert manifest["config"]["baseline_replicates"] == 2
        assert manifest["config"]["baseline_max_trees"] == 8

    def test_baseline_without_response_fails(self, sim_dir, run_dir, tmp_path, capsys):
        rc = entrypoint([
            "diagnose", str(run_dir / "model.json"), str(sim_dir / "train.csv"),
            "--baseline-replicates", "1", "--out-dir", str(tmp_path / "x"),
        ])
        assert rc == 2
        assert "response" in capsys.readouterr().err


class TestManifest:
    def test_manifest_digests_match_outputs(self, run_dir):
        import hashlib

        manifest = json.load(open(run_dir / "manifest.json"))
        for entry in manifest["outputs"]:
            blob = read_bytes(run_dir / entry["path"])
            assert hashlib.sha256(blob).hexdigest() == entry["sha256"]
            assert len(blob) == entry["bytes"]

    def test_manifest_records_input_digest(self, sim_dir, run_dir):
        import hashlib

        manifest = json.load(open(run_dir / "manifest.json"))
        (train_input,) = manifest["inputs"]
        blob = read_bytes(train_input["path"])
        assert hashlib.sha256(blob).hexdigest() == train_input["sha256"]

    def test_exactly_one_manifest_per_out_dir(self, run_dir):
        names = os.listdir(run_dir)
        assert names.count("manifest.json") == 1
