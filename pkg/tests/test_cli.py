import numpy as np
import pytest

from thzris.cli import main
from thzris.config import Config, ConfigError, config_from_dict, load_config, save_config


@pytest.fixture
def tiny_cfg(tmp_path):
    """Small mixed-link scene that runs the whole pipeline in seconds."""
    cfg = Config()
    cfg.scene.bs_position = [-5.0, 0.0, 2.0]
    cfg.scene.ris_position = [3.0, 4.0, 20.0]
    cfg.scene.buildings = [{"lo": [-4.5, -3.0, 0.0], "hi": [-4.0, 1.0, 2.6]}]
    cfg.scene.grid_origin = [0.0, -2.0, 10.0]
    cfg.scene.grid_spacing = [0.6, 0.6, 0.4]
    cfg.scene.grid_counts = [16, 8, 2]
    cfg.channel.bs_antennas = 8
    cfg.channel.ris_elements = 16
    cfg.channel.n_subcarriers = 128
    cfg.codebooks.bs_size = 8
    cfg.codebooks.ris_size = 16
    cfg.dataset.n_sequences = 150
    cfg.dataset.seed = 11
    cfg.training.epochs = 2
    cfg.training.batch_size = 32
    cfg.output_dir = str(tmp_path / "run")
    path = tmp_path / "tiny.yaml"
    save_config(cfg, path)
    return path, tmp_path / "run"


def run_cli(cfg_path, *args):
    return main(["--config", str(cfg_path), *args])


class TestConfigValidation:
    def test_defaults_valid(self):
        config_from_dict(Config().to_dict())

    def test_bad_values_listed_together(self):
        raw = Config().to_dict()
        raw["dataset"]["train_fraction"] = 1.5
        raw["model"]["dropout"] = 1.0
        with pytest.raises(ConfigError) as err:
            config_from_dict(raw)
        assert "dataset.train_fraction" in str(err.value)
        assert "model.dropout" in str(err.value)

    def test_unknown_key_rejected(self):
        raw = Config().to_dict()
        raw["channel"]["bogus_knob"] = 3
        with pytest.raises(ConfigError, match="bogus_knob"):
            config_from_dict(raw)

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="mystery"):
            config_from_dict({"mystery": {}})

    def test_tap_window_must_cover_scene(self):
        raw = Config().to_dict()
        raw["channel"]["n_taps"] = 16  # 16 ns: ~4.8 m, scene spans ~100 m
        with pytest.raises(ConfigError, match="tap window"):
            config_from_dict(raw)

    def test_window_must_leave_label_step(self):
        raw = Config().to_dict()
        raw["model"]["window"] = 10
        with pytest.raises(ConfigError, match="window"):
            config_from_dict(raw)

    def test_shipped_configs_load(self):
        for name in ("configs/desk.yaml", "configs/paper.yaml"):
            cfg = load_config(name)
            assert cfg.channel.carrier_frequency_hz == 200e9
            assert cfg.channel.n_subcarriers == 512

    def test_invalid_config_exit_code_2(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("dataset:\n  train_fraction: 2.0\n")
        assert main(["--config", str(path), "label"]) == 2

    def test_missing_config_exit_code_2(self, tmp_path):
        assert main(["--config", str(tmp_path / "nope.yaml"), "label"]) == 2


class TestPipeline:
    def test_label_generate_train_eval_report(self, tiny_cfg, capsys):
        cfg_path, out = tiny_cfg
        for cmd in ("label", "generate", "train", "eval", "report"):
            assert run_cli(cfg_path, cmd) == 0, cmd
        seen = capsys.readouterr().out
        for prefix in ("label:", "generate:", "train:", "eval:", "report:"):
            assert prefix in seen
        for name in ("labeled_grid.csv", "dataset.txt", "checkpoint_beam_best.npz",
                     "checkpoint_beam_final.npz", "checkpoint_link_final.npz",
                     "epochs.csv", "perbeam.csv", "heatmap.csv", "regions.csv",
                     "epochs.svg", "perbeam.svg", "heatmap.svg"):
            assert (out / name).exists(), name

    def test_label_idempotent(self, tiny_cfg):
        cfg_path, out = tiny_cfg
        assert run_cli(cfg_path, "label") == 0
        first = (out / "labeled_grid.csv").read_bytes()
        assert run_cli(cfg_path, "label") == 0
        assert (out / "labeled_grid.csv").read_bytes() == first

    def test_label_all_direct_without_buildings(self, tiny_cfg, capsys):
        cfg_path, out = tiny_cfg
        cfg = load_config(cfg_path)
        cfg.scene.buildings = []
        save_config(cfg, cfg_path)
        assert run_cli(cfg_path, "label") == 0
        summary = capsys.readouterr().out
        assert "0 ris, 0 outage" in summary

    def test_generate_without_label_exit_3(self, tiny_cfg):
        cfg_path, _ = tiny_cfg
        assert run_cli(cfg_path, "generate") == 3

    def test_train_without_dataset_exit_3(self, tiny_cfg):
        cfg_path, _ = tiny_cfg
        assert run_cli(cfg_path, "train") == 3

    def test_eval_without_checkpoint_exit_3(self, tiny_cfg):
        cfg_path, out = tiny_cfg
        assert run_cli(cfg_path, "label") == 0
        assert run_cli(cfg_path, "generate") == 0
        assert run_cli(cfg_path, "eval") == 3

    def test_report_without_csvs_exit_3(self, tiny_cfg):
        cfg_path, _ = tiny_cfg
        assert run_cli(cfg_path, "report") == 3

    def test_corrupt_dataset_exit_4(self, tiny_cfg):
        cfg_path, out = tiny_cfg
        assert run_cli(cfg_path, "label") == 0
        out.mkdir(parents=True, exist_ok=True)
        (out / "dataset.txt").write_text("not a dataset\n")
        assert run_cli(cfg_path, "train") == 4

    def test_zero_epochs_initial_metrics_only(self, tiny_cfg):
        cfg_path, out = tiny_cfg
        cfg = load_config(cfg_path)
        cfg.training.epochs = 0
        save_config(cfg, cfg_path)
        for cmd in ("label", "generate", "train"):
            assert run_cli(cfg_path, cmd) == 0
        assert (out / "epochs.csv").read_text() == \
            "epoch,train_loss,val_top1,val_top3,val_top5,link_acc\n"
        assert (out / "checkpoint_beam_best.npz").exists()

    def test_seed_flag_overrides_config(self, tiny_cfg):
        cfg_path, out = tiny_cfg
        assert run_cli(cfg_path, "label") == 0
        assert run_cli(cfg_path, "generate") == 0
        base = (out / "dataset.txt").read_bytes()
        assert run_cli(cfg_path, "--seed", "99", "generate") == 0
        reseeded = (out / "dataset.txt").read_bytes()
        assert base != reseeded
        assert b"seed=99" in reseeded.splitlines()[0]

    def test_out_flag_redirects(self, tiny_cfg, tmp_path):
        cfg_path, _ = tiny_cfg
        alt = tmp_path / "elsewhere"
        assert main(["--config", str(cfg_path), "--out", str(alt), "label"]) == 0
        assert (alt / "labeled_grid.csv").exists()

    def test_threads_flag_matches_single(self, tiny_cfg, tmp_path):
        cfg_path, out = tiny_cfg
        assert run_cli(cfg_path, "label") == 0
        single = (out / "labeled_grid.csv").read_bytes()
        alt = tmp_path / "threaded"
        assert main(["--config", str(cfg_path), "--out", str(alt),
                     "--threads", "4", "label"]) == 0
        assert (alt / "labeled_grid.csv").read_bytes() == single
