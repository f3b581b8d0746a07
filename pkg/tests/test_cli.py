"""End-to-end tests for the `fit` command line."""

import csv
import json

import pytest
import yaml

from src.cli import build_parser, collect_overrides, main
from src.utils.manifest_io import read_manifest

SYNTH_FLAGS = ["--num-classes", "4", "--latent-dim", "3", "--train-shots", "6", "--test-shots", "5"]
FED_FLAGS = [
    "--num-classes", "6", "--latent-dim", "4", "--train-shots", "20", "--test-shots", "5",
    "--num-clients", "4", "--classes-per-client", "3", "--shots-per-class", "4",
    "--clients-per-round", "2", "--local-steps", "1", "--support-set-size", "10",
]


def read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def last_error(capsys) -> dict:
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    assert main(["synth", "--out-dir", str(out), *SYNTH_FLAGS, "--seed", "3"]) == 0
    return out


class TestParser:
    def test_flags_map_to_config_keys(self):
        args = build_parser().parse_args(
            ["finetune", "--learning-rate", "0.01", "--variant", "qda", "--no-compact-lda"]
        )
        overrides = collect_overrides(args)
        assert overrides["train.learning_rate"] == 0.01
        assert overrides["run.variant"] == "qda"
        assert overrides["run.compact_lda"] is False
        assert overrides["train.iterations"] is None

    def test_fedsim_learning_rate_is_federated(self):
        args = build_parser().parse_args(["fedsim", "--learning-rate", "0.02"])
        assert collect_overrides(args)["fed.learning_rate"] == 0.02

    def test_paramcount_requires_positive_ints(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["paramcount", "lda", "0", "2048", "11648"])
        assert excinfo.value.code == 2

    def test_bad_log_level(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            main(["synth", "--out-dir", str(tmp_path), "--log-level", "chatty"])
        assert excinfo.value.code == 2


class TestSynthCommand:
    def test_outputs(self, synth_dir):
        for name in ("train.csv", "test.csv", "oracle_film.bin", "backbone.json", "manifest.json"):
            assert (synth_dir / name).exists()
        manifest = read_json(synth_dir / "manifest.json")
        assert manifest["command"] == "synth"
        assert manifest["seed"] == 3
        assert manifest["config"]["synth"]["seed"] == 3

    def test_rerun_from_manifest(self, synth_dir, tmp_path):
        again = tmp_path / "again"
        config = str(synth_dir / "manifest.json")
        assert main(["synth", "--config", config, "--out-dir", str(again)]) == 0
        assert (again / "train.csv").read_bytes() == (synth_dir / "train.csv").read_bytes()


class TestFinetuneCommand:
    """Fine-tuning, evaluation and their output files."""

    def finetune(self, synth_dir, out, *extra):
        return main(
            [
                "finetune",
                "--data", str(synth_dir / "train.csv"),
                "--test", str(synth_dir / "test.csv"),
                "--backbone", str(synth_dir / "backbone.json"),
                "--out-dir", str(out),
                "--support-set-size", "12",
                *extra,
            ]
        )

    def test_zero_iterations_matches_baseline(self, synth_dir, tmp_path):
        out = tmp_path / "ft"
        assert self.finetune(synth_dir, out, "--iterations", "0") == 0
        assert read_json(out / "report.json") == read_json(out / "baseline_report.json")
        assert read_manifest(out / "trace.jsonl") == []

    def test_outputs_and_eval(self, synth_dir, tmp_path):
        out = tmp_path / "ft"
        assert self.finetune(synth_dir, out, "--iterations", "3", "--variant", "lda") == 0
        for name in ("film.bin", "weights.bin", "cache.bin", "timings.jsonl", "backbone.json"):
            assert (out / name).exists()
        assert [r["iteration"] for r in read_manifest(out / "trace.jsonl")] == [0, 1, 2]
        report = read_json(out / "report.json")
        assert 0.0 <= report["accuracy"] <= 1.0
        assert len(report["confusion_matrix"]) == 4

        rebuilt = tmp_path / "eval_rebuilt"
        code = main(
            [
                "eval",
                "--data", str(synth_dir / "train.csv"),
                "--test", str(synth_dir / "test.csv"),
                "--film", str(out / "film.bin"),
                "--weights", str(out / "weights.bin"),
                "--variant", "lda",
                "--out-dir", str(rebuilt),
            ]
        )
        assert code == 0
        assert read_json(rebuilt / "report.json")["accuracy"] == report["accuracy"]

        cached = tmp_path / "eval_cached"
        code = main(
            [
                "eval",
                "--test", str(synth_dir / "test.csv"),
                "--film", str(out / "film.bin"),
                "--cache", str(out / "cache.bin"),
                "--out-dir", str(cached),
            ]
        )
        assert code == 0
        assert read_json(cached / "report.json")["accuracy"] == report["accuracy"]

    def test_rerun_is_byte_identical(self, synth_dir, tmp_path):
        flags = ("--iterations", "4", "--variant", "qda", "--seed", "3")
        assert self.finetune(synth_dir, tmp_path / "first", *flags) == 0
        assert self.finetune(synth_dir, tmp_path / "second", *flags) == 0
        for name in ("film.bin", "film.bin.json", "weights.bin", "weights.bin.json", "trace.jsonl"):
            first = (tmp_path / "first" / name).read_bytes()
            assert first == (tmp_path / "second" / name).read_bytes(), name

    def test_linear_variant(self, synth_dir, tmp_path):
        out = tmp_path / "linear"
        code = self.finetune(
            synth_dir, out, "--iterations", "5", "--variant", "linear", "--learning-rate", "0.05"
        )
        assert code == 0
        assert (out / "linear_head.bin").exists()
        assert not (out / "cache.bin").exists()
        assert len(read_manifest(out / "trace.jsonl")) == 5

    def test_synthetic_when_no_data(self, tmp_path):
        out = tmp_path / "ft"
        code = main(
            ["finetune", "--out-dir", str(out), *SYNTH_FLAGS, "--iterations", "2",
             "--variant", "protonets", "--support-set-size", "8"]
        )
        assert code == 0
        assert (out / "report.json").exists()

    def test_eval_needs_test_set(self, synth_dir, tmp_path):
        code = main(["eval", "--data", str(synth_dir / "train.csv"), "--out-dir", str(tmp_path)])
        assert code == 1

    def test_missing_input(self, tmp_path):
        code = main(["finetune", "--data", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)])
        assert code == 1


class TestErrors:
    """Library errors become one JSON line on stderr and exit code 1."""

    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2,0\n1,x,1\n")
        assert main(["finetune", "--data", str(bad), "--out-dir", str(tmp_path / "o")]) == 1
        record = last_error(capsys)
        assert record["error"] == "ParseError"
        assert (record["row"], record["column"]) == (2, 2)

    def test_unknown_config_key(self, tmp_path, capsys):
        config = tmp_path / "config.yaml"
        config.write_text(yaml.dump({"bogus": 1}))
        assert main(["synth", "--config", str(config), "--out-dir", str(tmp_path)]) == 1
        assert last_error(capsys)["error"] == "ConfigError"

    def test_unknown_section_key(self, tmp_path, capsys):
        config = tmp_path / "config.yaml"
        config.write_text(yaml.dump({"synth": {"num_clases": 3}}))
        assert main(["synth", "--config", str(config), "--out-dir", str(tmp_path)]) == 1
        record = last_error(capsys)
        assert record["error"] == "ConfigError"
        assert "num_clases" in record["message"]

    def test_non_finite_cell(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2,0\n1,nan,1\n")
        assert main(["finetune", "--data", str(bad), "--out-dir", str(tmp_path / "o")]) == 1
        record = last_error(capsys)
        assert record["error"] == "ParseError"
        assert (record["row"], record["column"]) == (2, 2)

    def test_unknown_backbone_kind(self, synth_dir, tmp_path, capsys):
        spec = tmp_path / "backbone.json"
        spec.write_text(json.dumps({"kind": "resnet", "input_dim": 3}))
        code = main(
            ["finetune", "--data", str(synth_dir / "train.csv"), "--backbone", str(spec),
             "--out-dir", str(tmp_path / "o")]
        )
        assert code == 1
        record = last_error(capsys)
        assert record["error"] == "ConfigError"
        assert "resnet" in record["message"]

    def test_malformed_backbone_json(self, synth_dir, tmp_path, capsys):
        spec = tmp_path / "backbone.json"
        spec.write_text("{\n  \"kind\": \n")
        code = main(
            ["finetune", "--data", str(synth_dir / "train.csv"), "--backbone", str(spec),
             "--out-dir", str(tmp_path / "o")]
        )
        assert code == 1
        assert last_error(capsys)["error"] == "ParseError"


class TestFedsimCommand:
    """Federated simulation and the communication ledger."""

    def test_ledger_only(self, tmp_path, capsys):
        out = tmp_path / "ledger"
        code = main(
            ["fedsim", "--ledger-only", "--psi-count", "11648", "--rounds", "60",
             "--clients-per-round", "5", "--out-dir", str(out)]
        )
        assert code == 0
        ledger = read_json(out / "ledger.json")
        fit, bit = ledger["methods"]
        assert (fit["per_round"], fit["overall"]) == (116_480, 6_988_800)
        assert (bit["per_round"], bit["overall"]) == (237_051_520, 14_223_091_200)
        assert "6,988,800" in capsys.readouterr().out

    def test_ledger_default_psi_count(self, tmp_path):
        out = tmp_path / "ledger"
        assert main(["fedsim", "--ledger-only", "--out-dir", str(out)]) == 0
        assert read_json(out / "ledger.json")["methods"][0]["payload"] == 11_648

    def test_zero_rounds(self, tmp_path):
        out = tmp_path / "fed"
        assert main(["fedsim", *FED_FLAGS, "--rounds", "0", "--out-dir", str(out)]) == 0
        (baseline,) = read_manifest(out / "rounds.jsonl")
        assert baseline["round"] == 0
        assert baseline["cum_cost"] == 0
        for name in ("global_film.bin", "global_cache.bin", "clients.json", "summary.json"):
            assert (out / name).exists()
        assert len(list((out / "personalized").glob("client_*.bin"))) == 4

    def test_ladder_over_seeds(self, tmp_path):
        out = tmp_path / "fed"
        code = main(
            ["fedsim", *FED_FLAGS, "--rounds", "1", "--ladder", "--seeds", "2",
             "--out-dir", str(out), "--seed", "4"]
        )
        assert code == 0
        assert (out / "seed_4" / "bounds.json").exists()
        assert (out / "seed_5" / "rounds.jsonl").exists()
        summary = read_json(out / "summary.json")
        assert summary["seeds"] == [4, 5]
        for name in ("lower", "fl", "upper"):
            assert summary[f"{name}_global_acc"]["n"] == 2

    def test_too_small_for_partition(self, tmp_path, capsys):
        flags = ["--num-classes", "4", "--train-shots", "2", "--classes-per-client", "4"]
        assert main(["fedsim", *flags, "--out-dir", str(tmp_path)]) == 1
        assert last_error(capsys)["error"] == "InsufficientData"


class TestParamcountCommand:
    def test_json(self, capsys):
        assert main(["paramcount", "lda", "10", "2048", "11648", "--json"]) == 0
        rows = json.loads(capsys.readouterr().out)
        assert [r["variant"] for r in rows] == ["lda", "bit-linear"]
        assert rows[0]["updateable"] == 32_140
        assert rows[1]["updateable"] == 23_520_832

    def test_table(self, capsys):
        assert main(["paramcount", "qda", "100", "2048", "11648"]) == 0
        out = capsys.readouterr().out
        assert "210,034,051" in out
        assert "8.8603" in out

    def test_reference_variant_alone(self, capsys):
        assert main(["paramcount", "bit-linear", "10", "2048", "11648", "--json"]) == 0
        assert len(json.loads(capsys.readouterr().out)) == 1


class TestFilmstatsCommand:
    def test_identity_film_is_zero(self, synth_dir, tmp_path):
        ft = tmp_path / "ft"
        code = main(
            ["finetune", "--data", str(synth_dir / "train.csv"), "--iterations", "0",
             "--out-dir", str(ft)]
        )
        assert code == 0
        out = tmp_path / "stats"
        assert main(["filmstats", str(ft / "film.bin"), "--out-dir", str(out)]) == 0
        with open(out / "filmstats.csv", newline="", encoding="utf-8") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 1
        assert rows[0]["width"] == "3"
        for key, value in rows[0].items():
            if key.startswith(("gamma_", "beta_")):
                assert float(value) == 0.0

    def test_missing_blob(self, tmp_path):
        assert main(["filmstats", str(tmp_path / "none.bin"), "--out-dir", str(tmp_path)]) == 1
