import numpy as np
import pytest

from scorelab.cli import main
from scorelab.config import parse_config

BASE_CONFIG = """
# small smoke configuration
seed = 5
dataset.n = 16
train.sigma_tn = 0.3
train.iterations = 60
train.batch = 16
sample.count = 32
sample.steps = 16
eval.heldout = 64
"""


class TestConfigParsing:
    def test_defaults_and_overrides(self):
        cfg = parse_config(BASE_CONFIG)
        assert cfg["seed"] == 5
        assert cfg["dataset.n"] == 16
        assert cfg["schedule.sigma_max"] == 0.995  # untouched default
        assert cfg["train.sigma_tn_list"] == (0.0, 0.1, 0.4, 0.7)

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown key"):
            parse_config("dataset.nn = 3")

    def test_bad_value_rejected(self):
        with pytest.raises(ValueError, match="bad value"):
            parse_config("dataset.n = many")

    def test_bad_choice_rejected(self):
        with pytest.raises(ValueError):
            parse_config("train.loss_mode = sgd")

    def test_sigma_tn_range(self):
        with pytest.raises(ValueError):
            parse_config("train.sigma_tn = 1.0")

    def test_file_kind_needs_path(self):
        with pytest.raises(ValueError):
            parse_config("dataset.kind = file")

    def test_comments_and_blank_lines(self):
        cfg = parse_config("\n# note\nseed = 9   # trailing\n\n")
        assert cfg["seed"] == 9

    def test_seed_override(self):
        cfg = parse_config(BASE_CONFIG).override_seed(77)
        assert cfg["seed"] == 77
        assert cfg.raw_text == BASE_CONFIG


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(BASE_CONFIG, encoding="utf-8")
    return path


def read_csv_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# scorelab-csv format=1 seed=")
    header = lines[1].split(",")
    return header, [line.split(",") for line in lines[2:]]


class TestCommands:
    def test_train_outputs(self, cfg_file, tmp_path):
        out = tmp_path / "run"
        assert main(["train", "--config", str(cfg_file), "--out", str(out)]) == 0
        assert (out / "checkpoint.bin").exists()
        assert (out / "config.txt").read_text() == BASE_CONFIG
        header, rows = read_csv_rows(out / "loss.csv")
        assert header == ["iteration", "loss", "clean_loss"]
        assert len(rows) == 60

    def test_train_deterministic_outputs(self, cfg_file, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["train", "--config", str(cfg_file), "--out", str(out)]) == 0
            outs.append((out / "checkpoint.bin").read_bytes() + (out / "loss.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_sample_from_checkpoint_then_eval(self, cfg_file, tmp_path):
        run = tmp_path / "run"
        main(["train", "--config", str(cfg_file), "--out", str(run)])
        cfg2 = tmp_path / "sample.cfg"
        cfg2.write_text(BASE_CONFIG + f"sample.checkpoint = {run / 'checkpoint.bin'}\n")
        out2 = tmp_path / "samples"
        assert main(["sample", "--config", str(cfg2), "--out", str(out2)]) == 0
        pts = np.loadtxt(out2 / "samples.csv", delimiter=",")
        assert pts.shape == (32, 2)
        assert np.all(np.isfinite(pts))

        cfg3 = tmp_path / "eval.cfg"
        cfg3.write_text(BASE_CONFIG + f"eval.gen = {out2 / 'samples.csv'}\n")
        out3 = tmp_path / "eval"
        assert main(["eval", "--config", str(cfg3), "--out", str(out3)]) == 0
        header, rows = read_csv_rows(out3 / "eval.csv")
        assert header == ["metric", "threshold", "value"]
        assert any(r[0] == "memorization_fraction" for r in rows)

    def test_eval_of_training_set_is_fully_memorized(self, cfg_file, tmp_path):
        # generated == training data: every similarity threshold fraction is 1
        from scorelab.datasets import gauss_ring, save_points

        pts = gauss_ring(16, seed=5).points
        gen_path = tmp_path / "gen.csv"
        save_points(gen_path, pts)
        cfg = tmp_path / "eval.cfg"
        cfg.write_text(BASE_CONFIG + f"eval.gen = {gen_path}\n")
        out = tmp_path / "eval"
        assert main(["eval", "--config", str(cfg), "--out", str(out)]) == 0
        _, rows = read_csv_rows(out / "eval.csv")
        for metric, _, value in rows:
            if metric in ("memorization_fraction", "nn_similarity_fraction"):
                assert float(value) == 1.0

    def test_sample_empirical_field(self, cfg_file, tmp_path):
        cfg2 = tmp_path / "samp.cfg"
        cfg2.write_text(BASE_CONFIG + "sample.field = empirical-ddpm\n")
        out = tmp_path / "samples"
        assert main(["sample", "--config", str(cfg2), "--out", str(out)]) == 0
        assert (out / "samples.csv").exists()

    def test_sample_flag_overrides(self, cfg_file, tmp_path):
        cfg2 = tmp_path / "samp.cfg"
        cfg2.write_text(BASE_CONFIG + "sample.field = empirical-ddpm\n")
        out = tmp_path / "samples"
        rc = main(
            ["sample", "--config", str(cfg2), "--out", str(out),
             "--steps", "10", "--stop-t", "0.5", "--record"]
        )
        assert rc == 0
        traj = np.load(out / "trajectory.npz")
        assert traj["states"].shape[0] == 11  # steps + 1 snapshots, under the cap
        assert traj["times"][-1] == pytest.approx(0.5)

    def test_mi_monotone_columns(self, cfg_file, tmp_path):
        out = tmp_path / "mi"
        assert main(["mi", "--config", str(cfg_file), "--out", str(out)]) == 0
        header, rows = read_csv_rows(out / "mi.csv")
        assert header == ["sigma_tn", "mi_ambient", "mi_ddpm", "bound"]
        amb = [float(r[1]) for r in rows]
        assert all(a > b for a, b in zip(amb, amb[1:]))
        for r in rows:
            assert float(r[3]) >= float(r[2]) - 1e-12

    def test_gmm_csv(self, cfg_file, tmp_path):
        out = tmp_path / "gmm"
        assert main(["gmm", "--config", str(cfg_file), "--out", str(out)]) == 0
        header, rows = read_csv_rows(out / "gmm.csv")
        assert header == ["sigma_t", "tv", "status"]
        tvs = [float(r[1]) for r in rows]
        assert all(a > b for a, b in zip(tvs, tvs[1:]))

    def test_subpop_csvs(self, tmp_path):
        cfg = tmp_path / "sp.cfg"
        cfg.write_text("seed = 3\nsubpop.n = 4\nsubpop.N = 6\nsubpop.zipf_k = 3\nsubpop.draws = 50000\n")
        out = tmp_path / "sp"
        assert main(["subpop", "--config", str(cfg), "--out", str(out)]) == 0
        header, rows = read_csv_rows(out / "subpop_tau.csv")
        assert header == ["ell", "tau", "method", "quadrature"]
        assert len(rows) == 4
        _, decomp = read_csv_rows(out / "subpop_decomp.csv")
        assert float(decomp[0][2]) <= 1e-12

    def test_sweep_rejects_short_list(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(BASE_CONFIG + "train.sigma_tn_list = 0.0\n")
        assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_sweep_small_run(self, tmp_path):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(
            "seed = 2\ndataset.n = 16\ntrain.iterations = 40\ntrain.batch = 16\n"
            "sample.count = 24\nsample.steps = 12\ntrain.sigma_tn_list = 0.0,0.4\n"
        )
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == 0
        header, rows = read_csv_rows(out / "sweep.csv")
        assert header == ["sigma_tn", "quality_w2", "memorization", "on_frontier", "status"]
        assert len(rows) == 2
        assert (out / "legs" / "sigma_0" / "checkpoint.bin").exists()
        assert (out / "legs" / "sigma_0.4" / "samples.csv").exists()


class TestExitCodes:
    def test_usage_error_is_1(self):
        assert main(["train", "--nonsense"]) == 1
        assert main([]) == 1

    def test_runtime_error_is_2(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("dataset.kind = file\ndataset.path = /does/not/exist.csv\n")
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2

    def test_missing_config_is_2(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path / "o")]) == 2
