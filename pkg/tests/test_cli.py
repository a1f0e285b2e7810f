"""End-to-end CLI contracts: files, schemas, exit codes, determinism."""

import json
import os

import numpy as np
import pytest

import shiftscope as ss
from shiftscope.cli import main


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small end-to-end workspace: data + one trained model."""
    root = tmp_path_factory.mktemp("cliws")
    data_dir = root / "data"
    assert run("gen-data", "--category", "2", "--deltas", "0,1,2",
               "--seed", "7", "--out", str(data_dir),
               "--n-per-class", "60", "--n", "60") == 0
    model = root / "model.ssp"
    assert run("train", "--data", str(data_dir / "id.csv"), "--loss", "ce",
               "--seed", "3", "--epochs", "60", "--out", str(model)) == 0
    return root, data_dir, model


class TestGenData:
    def test_file_contract(self, workspace):
        _, data_dir, _ = workspace
        names = sorted(os.listdir(data_dir))
        assert names == ["id.csv", "nas_cat2_d0.csv", "nas_cat2_d1.csv",
                         "nas_cat2_d2.csv"]

    def test_missing_out_is_usage_error(self):
        assert run("gen-data", "--category", "2", "--deltas", "0,1") == 2

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("gen-data", "--category", "1", "--deltas", "0,0.5",
                       "--seed", "9", "--out", str(out),
                       "--n-per-class", "30", "--n", "30") == 0
        for name in os.listdir(a):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_bad_deltas(self, tmp_path):
        assert run("gen-data", "--category", "1", "--deltas", "0,2,1",
                   "--out", str(tmp_path / "x")) == 2
        assert run("gen-data", "--category", "9", "--deltas", "0,1",
                   "--out", str(tmp_path / "x")) == 2


class TestTrain:
    def test_zero_weight_full_equals_ce(self, workspace, tmp_path):
        _, data_dir, _ = workspace
        m1, m2 = tmp_path / "ce.ssp", tmp_path / "full0.ssp"
        assert run("train", "--data", str(data_dir / "id.csv"),
                   "--loss", "ce", "--seed", "5", "--epochs", "30",
                   "--out", str(m1)) == 0
        assert run("train", "--data", str(data_dir / "id.csv"),
                   "--loss", "full", "--w-dist", "0", "--l2", "0",
                   "--l3", "0", "--seed", "5", "--epochs", "30",
                   "--out", str(m2)) == 0
        a, b = ss.load_net(m1), ss.load_net(m2)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)

    def test_log_has_all_components(self, workspace, tmp_path):
        _, data_dir, _ = workspace
        model = tmp_path / "full.ssp"
        assert run("train", "--data", str(data_dir / "id.csv"),
                   "--loss", "full", "--seed", "5", "--epochs", "10",
                   "--out", str(model)) == 0
        lines = (tmp_path / "full.ssp.log.csv").read_text().splitlines()
        assert lines[0] == "epoch,total,ce,dist,entropy"
        assert len(lines) == 11
        row = lines[1].split(",")
        assert float(row[3]) != 0.0 and float(row[4]) != 0.0

    def test_negative_lambda_is_usage_error(self, workspace, tmp_path):
        _, data_dir, _ = workspace
        assert run("train", "--data", str(data_dir / "id.csv"),
                   "--loss", "full", "--l2", "-1",
                   "--out", str(tmp_path / "x.ssp")) == 2


class TestEval:
    def test_report_schema(self, workspace, tmp_path):
        _, data_dir, model = workspace
        report_path = tmp_path / "report.json"
        assert run("eval", "--model", str(model),
                   "--id", str(data_dir / "id.csv"),
                   "--nas", str(data_dir / "nas_cat2_d1.csv"),
                   str(data_dir / "nas_cat2_d2.csv"),
                   "--scorers", "msp,mahalanobis",
                   "--metrics", "auroc,tnr95",
                   "--out", str(report_path)) == 0
        report = json.loads(report_path.read_text())
        assert report["schema_version"] == 1
        assert report["kind"] == "eval-report"
        rows = report["rows"]
        assert len(rows) == 2 * 2 * 2    # nas files x scorers x metrics
        deltas = {r["delta"] for r in rows}
        assert deltas == {1.0, 2.0}      # parsed from the _d{..} suffix
        assert {r["scorer"] for r in rows} == {"msp", "mahalanobis"}

    def test_identical_id_and_nas_gives_half_auroc(self, workspace, tmp_path):
        _, data_dir, model = workspace
        report_path = tmp_path / "null.json"
        assert run("eval", "--model", str(model),
                   "--id", str(data_dir / "id.csv"),
                   "--nas", str(data_dir / "id.csv"),
                   "--scorers", "msp,energy,mahalanobis",
                   "--metrics", "auroc", "--out", str(report_path)) == 0
        report = json.loads(report_path.read_text())
        for row in report["rows"]:
            assert row["value"] == pytest.approx(0.5, abs=0.05)

    def test_unknown_scorer_lists_valid_names(self, workspace, tmp_path,
                                              capsys):
        _, data_dir, model = workspace
        code = run("eval", "--model", str(model),
                   "--id", str(data_dir / "id.csv"),
                   "--nas", str(data_dir / "nas_cat2_d1.csv"),
                   "--scorers", "knn", "--out", str(tmp_path / "r.json"))
        assert code == 2
        err = capsys.readouterr().err
        assert "mahalanobis" in err and "energy" in err

    def test_all_default_scorers_and_metrics(self, workspace, tmp_path):
        _, data_dir, model = workspace
        report_path = tmp_path / "all.json"
        assert run("eval", "--model", str(model),
                   "--id", str(data_dir / "id.csv"),
                   "--nas", str(data_dir / "nas_cat2_d2.csv"),
                   "--out", str(report_path)) == 0
        report = json.loads(report_path.read_text())
        assert len(report["rows"]) == 6 * 5

    def test_dimension_mismatch(self, workspace, tmp_path):
        _, data_dir, model = workspace
        bad = tmp_path / "bad.csv"
        bad.write_text("x1,x2,x3,label\n1,2,3,1\n4,5,6,2\n")
        assert run("eval", "--model", str(model), "--id", str(bad),
                   "--nas", str(bad), "--out", str(tmp_path / "r.json")) == 2


class TestSweep:
    def test_single_cell_trail(self, workspace, tmp_path):
        _, data_dir, _ = workspace
        out = tmp_path / "sweep.json"
        assert run("sweep", "--data", str(data_dir / "id.csv"),
                   "--l2", "0.1", "--l3", "0.0001", "--seed", "3",
                   "--epochs", "30", "--out", str(out)) == 0
        report = json.loads(out.read_text())
        assert report["kind"] == "sweep-report"
        assert len(report["records"]) == 1
        partial = (tmp_path / "sweep.json.partial.jsonl").read_text()
        assert len(partial.splitlines()) == 1

    def test_partial_trail_flushed_per_candidate(self, workspace, tmp_path):
        _, data_dir, _ = workspace
        out = tmp_path / "sweep2.json"
        assert run("sweep", "--data", str(data_dir / "id.csv"),
                   "--l2", "0.1,1.0", "--l3", "0.001", "--seed", "3",
                   "--epochs", "20", "--out", str(out)) == 0
        lines = (tmp_path / "sweep2.json.partial.jsonl").read_text(
        ).splitlines()
        assert len(lines) == 2
        for line in lines:
            rec = json.loads(line)
            assert {"w_var", "w_corr", "harmonic_mean",
                    "residual_mass"} <= set(rec)

    def test_invalid_grid_value(self, workspace, tmp_path):
        _, data_dir, _ = workspace
        assert run("sweep", "--data", str(data_dir / "id.csv"),
                   "--l2", "0", "--out", str(tmp_path / "s.json")) == 2


class TestReport:
    def _eval(self, workspace, tmp_path, seed):
        root, data_dir, _ = workspace
        model = tmp_path / f"m{seed}.ssp"
        assert run("train", "--data", str(data_dir / "id.csv"),
                   "--loss", "ce", "--seed", str(seed), "--epochs", "40",
                   "--out", str(model)) == 0
        rep = tmp_path / f"eval{seed}.json"
        assert run("eval", "--model", str(model),
                   "--id", str(data_dir / "id.csv"),
                   "--nas", str(data_dir / "nas_cat2_d1.csv"),
                   str(data_dir / "nas_cat2_d2.csv"),
                   "--scorers", "msp,energy", "--metrics", "auroc",
                   "--out", str(rep)) == 0
        return rep

    def test_aggregation_across_seeds(self, workspace, tmp_path):
        reps = [self._eval(workspace, tmp_path, s) for s in (31, 32, 33)]
        out_dir = tmp_path / "report"
        assert run("report", "--eval-jsons", *map(str, reps),
                   "--out", str(out_dir)) == 0
        lines = (out_dir / "summary.csv").read_text().splitlines()
        assert lines[0] == "delta,scorer,metric,mean,std"
        assert len(lines) == 1 + 2 * 2      # deltas x scorers
        assert (out_dir / "curve_msp_auroc.csv").exists()
        assert (out_dir / "score_means.csv").exists()

    def test_single_file_std_zero(self, workspace, tmp_path):
        rep = self._eval(workspace, tmp_path, 41)
        out_dir = tmp_path / "single"
        assert run("report", "--eval-jsons", str(rep),
                   "--out", str(out_dir)) == 0
        for line in (out_dir / "summary.csv").read_text().splitlines()[1:]:
            assert float(line.split(",")[4]) == 0.0

    def test_mismatched_delta_grids_exit_1(self, workspace, tmp_path, capsys):
        root, data_dir, model = workspace
        rep1 = self._eval(workspace, tmp_path, 51)
        rep2 = tmp_path / "other.json"
        assert run("eval", "--model", str(model),
                   "--id", str(data_dir / "id.csv"),
                   "--nas", str(data_dir / "nas_cat2_d1.csv"),
                   "--scorers", "msp,energy", "--metrics", "auroc",
                   "--out", str(rep2)) == 0
        code = run("report", "--eval-jsons", str(rep1), str(rep2),
                   "--out", str(tmp_path / "mismatch"))
        assert code == 1
        assert "disagree" in capsys.readouterr().err


class TestLandscape:
    def test_csv_contract(self, workspace, tmp_path):
        _, data_dir, model = workspace
        out = tmp_path / "grid.csv"
        assert run("landscape", "--model", str(model), "--scorer", "msp",
                   "--bounds=-8,8,-8,8", "--resolution", "5",
                   "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,y,score"
        assert len(lines) == 1 + 25

    def test_distance_scorer_needs_fit(self, workspace, tmp_path):
        _, data_dir, model = workspace
        assert run("landscape", "--model", str(model),
                   "--scorer", "mahalanobis",
                   "--out", str(tmp_path / "g.csv")) == 2
        assert run("landscape", "--model", str(model),
                   "--scorer", "mahalanobis",
                   "--fit", str(data_dir / "id.csv"),
                   "--out", str(tmp_path / "g.csv")) == 0

    def test_deterministic_rerun(self, workspace, tmp_path):
        _, data_dir, model = workspace
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            assert run("landscape", "--model", str(model), "--scorer",
                       "energy", "--bounds=-5,5,-5,5", "--resolution",
                       "6,4", "--out", str(out)) == 0
        assert a.read_bytes() == b.read_bytes()


class TestConfigFile:
    def test_config_supplies_defaults_flags_win(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "category": 1, "deltas": [0, 0.5], "seed": 4,
            "n-per-class": 25, "n": 25, "out": str(tmp_path / "from_cfg")}))
        assert run("gen-data", "--config", str(cfg)) == 0
        assert (tmp_path / "from_cfg" / "nas_cat1_d0.5.csv").exists()
        # explicit flag beats the config value
        assert run("gen-data", "--config", str(cfg), "--out",
                   str(tmp_path / "explicit")) == 0
        assert (tmp_path / "explicit" / "id.csv").exists()

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"not-a-flag": 1}))
        assert run("gen-data", "--config", str(cfg), "--deltas", "0",
                   "--out", str(tmp_path / "x")) == 2

    def test_missing_config_file(self, tmp_path):
        assert run("gen-data", "--config", str(tmp_path / "nope.json"),
                   "--deltas", "0", "--out", str(tmp_path / "x")) == 2


class TestCsvErrorsSurfaceAsRuntime:
    def test_malformed_data_file(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("x1,x2,label\n1,2\n")
        assert run("train", "--data", str(bad),
                   "--out", str(tmp_path / "m.ssp")) == 1


class TestSweepWorkers:
    def test_parallel_workers_match_serial_report(self, workspace, tmp_path,
                                                  monkeypatch):
        _, data_dir, _ = workspace
        serial, parallel = tmp_path / "serial.json", tmp_path / "par.json"
        args = ["sweep", "--data", str(data_dir / "id.csv"),
                "--l2", "0.1,1.0", "--l3", "0.01", "--seed", "3",
                "--epochs", "20"]
        monkeypatch.delenv("SHIFTSCOPE_THREADS", raising=False)
        assert run(*args, "--out", str(serial)) == 0
        monkeypatch.setenv("SHIFTSCOPE_THREADS", "2")
        assert run(*args, "--out", str(parallel)) == 0
        a = json.loads(serial.read_text())
        b = json.loads(parallel.read_text())
        assert a == b


class TestLossVariants:
    @pytest.mark.parametrize("variant", ["ce", "ce+dist", "ce+entropy",
                                         "full"])
    def test_each_variant_trains(self, workspace, tmp_path, variant):
        _, data_dir, _ = workspace
        model = tmp_path / f"{variant.replace('+', '_')}.ssp"
        assert run("train", "--data", str(data_dir / "id.csv"),
                   "--loss", variant, "--seed", "2", "--epochs", "10",
                   "--out", str(model)) == 0
        assert ss.load_net(model).n_classes == 3
