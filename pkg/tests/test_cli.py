"""Command-line driver: subcommands, exit codes, manifests, determinism."""

import numpy as np
import pytest

from spectral_rbm import cli
from spectral_rbm.classifier import load_ensemble
from spectral_rbm.dataset import LabeledDataset, load_csv, save_csv


def run(*argv):
    return cli.main(list(argv))


def kv(path):
    pairs = {}
    for line in path.read_text().splitlines():
        key, _, value = line.partition("=")
        pairs[key] = value
    return pairs


def write_raw_csv(path, rows=24, dim=6, classes=2, seed=0):
    """Small real-valued dataset with positive entries (no zero rows)."""
    rng = np.random.default_rng(seed)
    features = rng.random((rows, dim)) + 0.1
    labels = np.arange(rows, dtype=np.int64) % classes
    # give each class a crude scale difference so binarization is not noise
    features[labels == 1] *= 2.0
    ds = LabeledDataset(features, labels, tuple(f"f{i + 1}" for i in range(dim)))
    save_csv(ds, path, label_column="label")


def synth_small(path, per_class=12, dim=8, seed=0):
    code = run("synth", "--out", str(path), "--classes", "2",
               "--per-class", str(per_class), "--dim", str(dim),
               "--noise", "0.05", "--seed", str(seed))
    assert code == 0


TINY_TRAIN = ("--hidden-units", "4", "--epochs", "3", "--seed", "0")


class TestSynth:
    def test_writes_expected_shape(self, tmp_path, capsys):
        out = tmp_path / "data.csv"
        code = run("synth", "--out", str(out), "--classes", "2",
                   "--per-class", "200", "--dim", "100", "--noise", "0.05",
                   "--seed", "7")
        assert code == 0
        ds = load_csv(out, "label")
        assert ds.sample_count == 400
        assert ds.dim == 100
        assert np.all((ds.features == 0.0) | (ds.features == 1.0))
        assert "400 rows" in capsys.readouterr().out

    def test_manifest_written(self, tmp_path):
        out = tmp_path / "data.csv"
        synth_small(out)
        manifest = kv(tmp_path / "data.csv.manifest")
        assert manifest["manifest_version"] == "1"
        assert manifest["command"] == "synth"
        assert manifest["config.classes"] == "2"
        assert manifest["config.seed"] == "0"
        assert manifest["output.dataset"] == str(out)
        assert "timestamp_utc" in manifest

    def test_rerun_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        synth_small(a, seed=5)
        synth_small(b, seed=5)
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_output(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        synth_small(a, seed=5)
        synth_small(b, seed=6)
        assert a.read_bytes() != b.read_bytes()

    def test_invalid_spec_is_usage_error(self, tmp_path, capsys):
        code = run("synth", "--out", str(tmp_path / "x.csv"), "--classes", "1")
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_defaults_give_400_rows(self, tmp_path):
        out = tmp_path / "d.csv"
        assert run("synth", "--out", str(out)) == 0
        assert load_csv(out, "label").sample_count == 400


class TestPreprocess:
    def test_output_is_binary_with_sidecar(self, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        out = tmp_path / "bin.csv"
        code = run("preprocess", str(raw), "--out", str(out), "--alpha", "0.4")
        assert code == 0
        ds = load_csv(out, "label")
        assert np.all((ds.features == 0.0) | (ds.features == 1.0))
        sidecar = kv(tmp_path / "bin.csv.sidecar")
        assert sidecar["sidecar_version"] == "1"
        assert float(sidecar["alpha"]) == 0.4
        assert sidecar["scope"] == "per-class"
        assert sidecar["test_time_stats"] == "pooled-train-minmax"
        assert float(sidecar["min"]) <= float(sidecar["max"])
        assert "class.0.min" in sidecar
        assert "class.1.max" in sidecar

    def test_global_scope_sidecar_has_no_class_stats(self, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        out = tmp_path / "bin.csv"
        assert run("preprocess", str(raw), "--out", str(out),
                   "--scope", "global") == 0
        sidecar = kv(tmp_path / "bin.csv.sidecar")
        assert sidecar["scope"] == "global"
        assert not any(key.startswith("class.") for key in sidecar)

    def test_fraction_alpha_token(self, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        out = tmp_path / "bin.csv"
        assert run("preprocess", str(raw), "--out", str(out),
                   "--alpha", "2/5") == 0
        assert float(kv(tmp_path / "bin.csv.sidecar")["alpha"]) == 0.4

    def test_alpha_out_of_range_is_usage_error(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        for bad in ("1.5", "0", "x/y"):
            code = run("preprocess", str(raw), "--out", str(tmp_path / "o.csv"),
                       "--alpha", bad)
            assert code == 2
        assert "error" in capsys.readouterr().err

    def test_rerun_byte_identical(self, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run("preprocess", str(raw), "--out", str(a)) == 0
        assert run("preprocess", str(raw), "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()
        norm = lambda p, s: p.read_text().replace(s, "OUT")
        assert norm(tmp_path / "a.csv.sidecar", "a.csv") == norm(tmp_path / "b.csv.sidecar", "b.csv")

    def test_missing_input_is_io_error(self, tmp_path, capsys):
        code = run("preprocess", str(tmp_path / "absent.csv"),
                   "--out", str(tmp_path / "o.csv"))
        assert code == 3
        assert "error" in capsys.readouterr().err

    def test_reuse_stats_applies_training_minmax(self, tmp_path):
        train_raw = tmp_path / "train.csv"
        test_raw = tmp_path / "test.csv"
        write_raw_csv(train_raw, seed=1)
        write_raw_csv(test_raw, seed=2)
        train_bin = tmp_path / "train_bin.csv"
        assert run("preprocess", str(train_raw), "--out", str(train_bin),
                   "--alpha", "0.3") == 0
        test_bin = tmp_path / "test_bin.csv"
        code = run("preprocess", str(test_raw), "--out", str(test_bin),
                   "--reuse-stats", str(tmp_path / "train_bin.csv.sidecar"))
        assert code == 0
        ds = load_csv(test_bin, "label")
        assert np.all((ds.features == 0.0) | (ds.features == 1.0))
        manifest = kv(tmp_path / "test_bin.csv.manifest")
        assert float(manifest["config.alpha"]) == 0.3
        assert "input.sidecar.sha256" in manifest

    def test_reuse_stats_forbids_alpha_and_scope(self, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        bin_out = tmp_path / "bin.csv"
        assert run("preprocess", str(raw), "--out", str(bin_out)) == 0
        sidecar = str(tmp_path / "bin.csv.sidecar")
        for extra in (("--alpha", "0.5"), ("--scope", "global")):
            code = run("preprocess", str(raw), "--out", str(tmp_path / "x.csv"),
                       "--reuse-stats", sidecar, *extra)
            assert code == 2

    def test_reuse_stats_rejects_incomplete_sidecar(self, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        bad = tmp_path / "bad.sidecar"
        bad.write_text("sidecar_version=1\nalpha=0.5\n")
        code = run("preprocess", str(raw), "--out", str(tmp_path / "o.csv"),
                   "--reuse-stats", str(bad))
        assert code == 2

    def test_custom_sidecar_path(self, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        side = tmp_path / "stats.txt"
        assert run("preprocess", str(raw), "--out", str(tmp_path / "o.csv"),
                   "--sidecar", str(side)) == 0
        assert side.exists()


class TestTrain:
    def test_smoke_and_model_loads(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        synth_small(data)
        model = tmp_path / "model.rbme"
        code = run("train", str(data), "--out", str(model), *TINY_TRAIN)
        assert code == 0
        ensemble = load_ensemble(model)
        assert ensemble.classes == [0, 1]
        assert "trained 2 class models" in capsys.readouterr().out
        manifest = kv(tmp_path / "model.rbme.manifest")
        assert manifest["config.hidden_units"] == "4"
        assert manifest["config.learning_rate"] == "0.1"
        assert "input.dataset.sha256" in manifest

    def test_same_seed_bit_identical_models(self, tmp_path):
        data = tmp_path / "data.csv"
        synth_small(data)
        a, b = tmp_path / "a.rbme", tmp_path / "b.rbme"
        assert run("train", str(data), "--out", str(a), *TINY_TRAIN) == 0
        assert run("train", str(data), "--out", str(b), *TINY_TRAIN) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_non_binary_input_names_the_fix(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        code = run("train", str(raw), "--out", str(tmp_path / "m.rbme"),
                   *TINY_TRAIN)
        assert code == 2
        assert "preprocess" in capsys.readouterr().err

    def test_zero_epochs_is_usage_error(self, tmp_path):
        data = tmp_path / "data.csv"
        synth_small(data)
        code = run("train", str(data), "--out", str(tmp_path / "m.rbme"),
                   "--epochs", "0")
        assert code == 2

    def test_divergent_run_is_convergence_error(self, tmp_path, capsys):
        data = tmp_path / "data.csv"
        synth_small(data)
        code = run("train", str(data), "--out", str(tmp_path / "m.rbme"),
                   "--hidden-units", "4", "--epochs", "50",
                   "--learning-rate", "1e300")
        assert code == 4
        assert "error" in capsys.readouterr().err

    def test_flag_aliases(self, tmp_path):
        data = tmp_path / "data.csv"
        synth_small(data)
        model = tmp_path / "m.rbme"
        code = run("train", str(data), "--out", str(model),
                   "--hidden", "4", "--lr", "0.1", "--epochs", "2")
        assert code == 0
        assert kv(tmp_path / "m.rbme.manifest")["config.hidden_units"] == "4"

    def test_config_file_supplies_values_and_flags_win(self, tmp_path):
        data = tmp_path / "data.csv"
        synth_small(data)
        config = tmp_path / "run.conf"
        config.write_text("# training setup\nhidden_units=4\nepochs=3\nseed=9\n")
        model_a = tmp_path / "a.rbme"
        assert run("train", str(data), "--out", str(model_a),
                   "--config", str(config)) == 0
        manifest_a = kv(tmp_path / "a.rbme.manifest")
        assert manifest_a["config.hidden_units"] == "4"
        assert manifest_a["config.epochs"] == "3"
        assert manifest_a["config.seed"] == "9"
        # explicit flag beats the file
        model_b = tmp_path / "b.rbme"
        assert run("train", str(data), "--out", str(model_b),
                   "--config", str(config), "--epochs", "2") == 0
        assert kv(tmp_path / "b.rbme.manifest")["config.epochs"] == "2"

    def test_malformed_config_file(self, tmp_path):
        data = tmp_path / "data.csv"
        synth_small(data)
        config = tmp_path / "bad.conf"
        config.write_text("this is not a pair\n")
        code = run("train", str(data), "--out", str(tmp_path / "m.rbme"),
                   "--config", str(config))
        assert code == 2


class TestEvaluate:
    def fitted_model(self, tmp_path):
        data = tmp_path / "data.csv"
        synth_small(data, per_class=20)
        model = tmp_path / "model.rbme"
        assert run("train", str(data), "--out", str(model), "--hidden-units", "6",
                   "--epochs", "10", "--seed", "0") == 0
        return data, model

    def test_report_on_training_data(self, tmp_path, capsys):
        data, model = self.fitted_model(tmp_path)
        code = run("evaluate", str(model), str(data))
        assert code == 0
        out = capsys.readouterr().out
        assert "accuracy" in out

    def test_report_file(self, tmp_path):
        data, model = self.fitted_model(tmp_path)
        report_path = tmp_path / "report.txt"
        assert run("evaluate", str(model), str(data),
                   "--out", str(report_path)) == 0
        report = kv(report_path)
        assert report["report_version"] == "1"
        assert report["sample_count"] == "40"
        assert 0.0 <= float(report["accuracy"]) <= 1.0
        assert "confusion.0.0" in report
        manifest = kv(tmp_path / "report.txt.manifest")
        assert "input.model.sha256" in manifest

    def test_missing_truth_column_is_usage_error(self, tmp_path, capsys):
        data, model = self.fitted_model(tmp_path)
        ds = load_csv(data, "label")
        bad = tmp_path / "unlabeled.csv"
        save_csv(LabeledDataset(ds.features, ds.labels,
                                tuple(f"f{i}" for i in range(ds.dim))),
                 bad, label_column="outcome")
        code = run("evaluate", str(model), str(bad))
        assert code == 2
        assert "label" in capsys.readouterr().err

    def test_dimension_mismatch_is_usage_error(self, tmp_path, capsys):
        data, model = self.fitted_model(tmp_path)
        narrow = tmp_path / "narrow.csv"
        synth_small(narrow, dim=5)
        code = run("evaluate", str(model), str(narrow))
        assert code == 2
        assert "features" in capsys.readouterr().err

    def test_missing_model_is_io_error(self, tmp_path):
        data = tmp_path / "data.csv"
        synth_small(data)
        assert run("evaluate", str(tmp_path / "absent.rbme"), str(data)) == 3

    def test_non_binary_test_data_is_usage_error(self, tmp_path):
        data, model = self.fitted_model(tmp_path)
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw, dim=8)
        assert run("evaluate", str(model), str(raw)) == 2


class TestSweepAlpha:
    def test_two_alpha_table(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw, rows=24, dim=6)
        code = run("sweep-alpha", str(raw), "--alphas", "1/4,1/2",
                   "--hidden-units", "3", "--epochs", "2",
                   "--train-fraction", "0.5")
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3  # header + one row per alpha
        assert lines[0].split() == ["alpha", "accuracy", "recall[0]", "recall[1]"]
        assert lines[1].split()[0] == "1/4"
        assert lines[2].split()[0] == "1/2"

    def test_default_grid_is_nine_rows(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw, rows=16, dim=5)
        code = run("sweep-alpha", str(raw), "--hidden-units", "2",
                   "--epochs", "1")
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 10

    def test_table_file_and_manifest(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw, rows=24, dim=6)
        table_path = tmp_path / "table.txt"
        code = run("sweep-alpha", str(raw), "--alphas", "1/2",
                   "--hidden-units", "3", "--epochs", "2",
                   "--out", str(table_path))
        assert code == 0
        assert table_path.read_text().strip() == capsys.readouterr().out.strip()
        manifest = kv(tmp_path / "table.txt.manifest")
        assert manifest["command"] == "sweep-alpha"
        assert manifest["config.alphas"] == "1/2"

    def test_bad_alpha_token_is_usage_error(self, tmp_path):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw)
        assert run("sweep-alpha", str(raw), "--alphas", "1/2,banana",
                   "--hidden-units", "2", "--epochs", "1") == 2

    def test_deterministic_table(self, tmp_path, capsys):
        raw = tmp_path / "raw.csv"
        write_raw_csv(raw, rows=24, dim=6)
        args = ("sweep-alpha", str(raw), "--alphas", "1/3", "--hidden-units", "3",
                "--epochs", "2", "--seed", "4", "--split-seed", "1")
        assert run(*args) == 0
        first = capsys.readouterr().out
        assert run(*args) == 0
        assert capsys.readouterr().out == first


class TestMainPlumbing:
    def test_no_subcommand_is_usage_error(self):
        assert run() == 2

    def test_unknown_subcommand_is_usage_error(self):
        assert run("frobnicate") == 2

    def test_help_exits_zero(self):
        assert run("--help") == 0

    def test_version_exits_zero(self, capsys):
        assert run("--version") == 0
        assert "spectral-rbm" in capsys.readouterr().out
