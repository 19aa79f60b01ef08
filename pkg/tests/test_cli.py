import csv
import json

import numpy as np
import pytest

from p3speller import cli, dataformat, synth
from p3speller.config import PipelineConfig, config_from_dict, load_config
from p3speller.errors import DivergenceError


def run(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def tiny_pipeline(tmp_path_factory):
    """synth -> preprocess -> train artifacts shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    train_eegb = root / "train.eegb"
    test_eegb = root / "test.eegb"
    cfg_path = root / "cfg.json"
    cfg_path.write_text(json.dumps({"train": {"epochs": 6}}))
    assert run("synth", "--out", str(train_eegb), "--characters", "4",
               "--amplitude", "6", "--seed", "1") == 0
    assert run("synth", "--out", str(test_eegb), "--characters", "3",
               "--amplitude", "6", "--seed", "2") == 0
    train_epb = root / "train.epb"
    assert run("preprocess", "--session", str(train_eegb),
               "--out", str(train_epb), "--config", str(cfg_path)) == 0
    models = root / "models"
    assert run("train", "--epochs-file", str(train_epb),
               "--out-dir", str(models), "--config", str(cfg_path)) == 0
    return {"root": root, "train_eegb": train_eegb, "test_eegb": test_eegb,
            "train_epb": train_epb, "bundle": models / "bundle.json",
            "config": cfg_path}


class TestConfig:
    def test_defaults_round_trip(self):
        cfg = PipelineConfig()
        assert config_from_dict(cfg.to_dict()) == cfg

    def test_unknown_section_rejected(self):
        with pytest.raises(ValueError, match="unknown config sections"):
            config_from_dict({"fltr": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown keys"):
            config_from_dict({"train": {"learnig_rate": 0.1}})

    def test_hash_stable_and_sensitive(self):
        a = PipelineConfig()
        b = config_from_dict({"train": {"epochs": 31}})
        assert a.hash() == PipelineConfig().hash()
        assert a.hash() != b.hash()


class TestArtifacts:
    def test_train_outputs(self, tiny_pipeline):
        models = tiny_pipeline["bundle"].parent
        manifest = json.loads(tiny_pipeline["bundle"].read_text())
        assert len(manifest["members"]) == 5
        assert abs(sum(manifest["weights"]) - 1.0) < 1e-9
        assert (models / "member0.spsq").exists()
        assert (models / "subsets.json").exists()
        report = json.loads((models / "training_report.json").read_text())
        assert report["config_hash"] == load_config(
            str(tiny_pipeline["config"])).hash()
        assert len(report["history"]) == 5
        assert "train" in report["timings_s"]

    def test_evaluate_report_shape(self, tiny_pipeline):
        out = tiny_pipeline["root"] / "eval"
        assert run("evaluate", "--bundle", str(tiny_pipeline["bundle"]),
                   "--epochs-file", str(tiny_pipeline["train_epb"]),
                   "--out", str(out), "--config",
                   str(tiny_pipeline["config"])) == 0
        with open(f"{out}.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["name"] for r in rows] == \
            [f"member{i}" for i in range(5)] + ["ensemble"]
        for field in ("tp", "tn", "fn", "fp", "precision", "recall",
                      "accuracy", "f1", "auc"):
            assert field in rows[0]
        doc = json.loads((f"{out}.json") and open(f"{out}.json").read())
        assert doc["results"][-1]["name"] == "ensemble"

    def test_recompute_weights(self, tiny_pipeline):
        out = tiny_pipeline["root"] / "eval2"
        wpath = tiny_pipeline["root"] / "reweights.json"
        assert run("evaluate", "--bundle", str(tiny_pipeline["bundle"]),
                   "--epochs-file", str(tiny_pipeline["train_epb"]),
                   "--out", str(out), "--recompute-weights", str(wpath)) == 0
        doc = json.loads(wpath.read_text())
        assert len(doc["weights"]) == 5
        assert abs(sum(doc["weights"]) - 1.0) < 1e-9

    def test_spell_curve(self, tiny_pipeline):
        out = tiny_pipeline["root"] / "curve"
        assert run("spell", "--bundle", str(tiny_pipeline["bundle"]),
                   "--session", str(tiny_pipeline["test_eegb"]),
                   "--out", str(out), "--config",
                   str(tiny_pipeline["config"])) == 0
        with open(f"{out}.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["repetitions", "ensemble"]
        assert len(rows) == 16

    def test_spell_oracle_all_ones(self, tiny_pipeline):
        out = tiny_pipeline["root"] / "oracle"
        assert run("spell", "--session", str(tiny_pipeline["test_eegb"]),
                   "--out", str(out), "--oracle-scores") == 0
        doc = json.loads(open(f"{out}.json").read())
        assert doc["curves"]["oracle"] == [1.0] * 15

    def test_ablate_members_and_ensemble(self, tiny_pipeline):
        out = tiny_pipeline["root"] / "ablation"
        assert run("ablate", "--bundle", str(tiny_pipeline["bundle"]),
                   "--session", str(tiny_pipeline["test_eegb"]),
                   "--out", str(out), "--config",
                   str(tiny_pipeline["config"])) == 0
        with open(f"{out}.csv") as fh:
            header = next(csv.reader(fh))
        assert header == ["repetitions", "ensemble"] \
            + [f"member{i}" for i in range(5)]

    def test_spell_deterministic_given_config(self, tiny_pipeline):
        a = tiny_pipeline["root"] / "det_a"
        b = tiny_pipeline["root"] / "det_b"
        for out in (a, b):
            assert run("spell", "--bundle", str(tiny_pipeline["bundle"]),
                       "--session", str(tiny_pipeline["test_eegb"]),
                       "--out", str(out)) == 0
        assert open(f"{a}.csv").read() == open(f"{b}.csv").read()


class TestSimulate:
    def test_chance_level_flat(self, tmp_path):
        out = tmp_path / "sim"
        assert run("simulate", "--dprime", "0", "--reps", "15",
                   "--n", "40000", "--out", str(out)) == 0
        doc = json.loads(open(f"{out}.json").read())
        sigma = np.sqrt((1 / 36) * (35 / 36) / 40000)
        assert np.all(np.abs(np.array(doc["simulated"]) - 1 / 36)
                      <= 3 * sigma)
        assert np.allclose(doc["analytic"], 1 / 36, atol=1e-8)

    def test_auc_route(self, tmp_path):
        out = tmp_path / "sim_auc"
        assert run("simulate", "--auc", "0.69041", "--reps", "3",
                   "--n", "5000", "--out", str(out)) == 0
        doc = json.loads(open(f"{out}.json").read())
        assert doc["dprime"] == pytest.approx(0.70288, abs=1e-4)

    def test_requires_exactly_one_input(self, tmp_path):
        assert run("simulate", "--out", str(tmp_path / "x")) == 2


class TestExitCodes:
    def test_usage_error_is_two(self, capsys):
        with pytest.raises(SystemExit) as err:
            run("nonsense-command")
        assert err.value.code == 2

    def test_missing_file_is_io(self, tmp_path):
        assert run("preprocess", "--session", str(tmp_path / "nope.eegb"),
                   "--out", str(tmp_path / "x.epb")) == 5

    def test_corrupt_file_is_data_error(self, tmp_path):
        bad = tmp_path / "bad.eegb"
        bad.write_bytes(b"not an eegb container")
        assert run("preprocess", "--session", str(bad),
                   "--out", str(tmp_path / "x.epb")) == 3

    def test_unlabeled_training_is_data_error(self, tmp_path):
        session = synth.generate_session(
            synth.SynthConfig(n_characters=1, amplitude=0.0, n_channels=2,
                              seed=30))
        session.markers = [
            dataformat.StimulusMarker(m.sample_index, m.code, False)
            for m in session.markers]
        session.labeled = False
        eegb = tmp_path / "unlabeled.eegb"
        dataformat.write_session(session, eegb)
        epb = tmp_path / "unlabeled.epb"
        assert run("preprocess", "--session", str(eegb),
                   "--out", str(epb)) == 0
        assert run("train", "--epochs-file", str(epb),
                   "--out-dir", str(tmp_path / "m")) == 3

    def test_divergence_is_numeric_error(self, monkeypatch, tmp_path):
        def boom(args):
            raise DivergenceError("synthetic divergence")
        monkeypatch.setattr(cli, "cmd_simulate", boom)
        parser = cli.build_parser()
        args = parser.parse_args(["simulate", "--dprime", "0",
                                  "--out", str(tmp_path / "x")])
        monkeypatch.setattr(args, "func", boom)
        # exercise main()'s exception mapping directly
        monkeypatch.setattr(cli.argparse.ArgumentParser, "parse_args",
                            lambda self, argv=None: args)
        assert cli.main([]) == 4


class TestWorkerEnv:
    def test_worker_count_env(self, monkeypatch):
        monkeypatch.delenv("P3SPELLER_WORKERS", raising=False)
        assert cli.worker_count() == 1
        monkeypatch.setenv("P3SPELLER_WORKERS", "3")
        assert cli.worker_count() == 3
        monkeypatch.setenv("P3SPELLER_WORKERS", "junk")
        assert cli.worker_count() == 1
