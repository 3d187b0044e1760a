"""CLI and experiment orchestration: configs, sweeps, rendering, exit codes."""

import json
import shutil

import numpy as np
import pytest

from magfield.cli import main
from magfield.dataset import load_dataset
from magfield.evaluate import read_metrics_csv
from magfield.experiment import (ExperimentConfig, config_from_dict,
                                 config_to_dict, desk_scale_preset, load_config,
                                 save_config, train_config_for)
from magfield.room import synthesize_field
from magfield.dataset import room_from_meta, sources_from_meta


def micro_config(out_dir, **overrides) -> dict:
    cfg = {
        "room": {"dims": [3, 4, 6], "t60": 0.2},
        "frequencies_hz": [200.0],
        "num_measurements": [12],
        "methods": ["prb_pinn", "nf", "nearest"],
        "seeds": [0],
        "lattice_n": 7,
        "max_order": 4,
        "network": {"rff_rows": 6, "hidden_width": 12, "hidden_layers": 2,
                    "rff_scale": 1.5},
        "train": {"iterations": 60, "collocation_count": 16, "log_every": 20},
        "out_dir": str(out_dir),
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, **overrides):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(micro_config(tmp_path / "out", **overrides)))
    return path


class TestConfig:
    def test_roundtrip_semantic_equality(self, tmp_path):
        path = write_config(tmp_path)
        cfg = load_config(path)
        resaved = tmp_path / "resaved.json"
        save_config(cfg, resaved)
        again = load_config(resaved)
        assert config_to_dict(cfg) == config_to_dict(again)

    @pytest.mark.parametrize("mutate,needle", [
        (lambda d: d.update(bogus=1), "bogus"),
        (lambda d: d["room"].update(shape="L"), "shape"),
        (lambda d: d["network"].update(dropout=0.5), "dropout"),
        (lambda d: d["train"].update(warmup=10), "warmup"),
    ])
    def test_unknown_keys_rejected(self, tmp_path, mutate, needle):
        doc = micro_config(tmp_path / "out")
        mutate(doc)
        with pytest.raises(ValueError, match=needle):
            config_from_dict(doc)

    def test_method_validation(self, tmp_path):
        with pytest.raises(ValueError, match="unknown methods"):
            config_from_dict(micro_config(tmp_path, methods=["kriging"]))
        with pytest.raises(ValueError, match="method list"):
            config_from_dict(micro_config(tmp_path, methods=[]))

    def test_desk_scale_preset(self):
        cfg = desk_scale_preset(ExperimentConfig())
        assert cfg.lattice_n == 17
        assert cfg.train.iterations == 20_000
        assert cfg.network.hidden_width == 64
        assert cfg.frequencies_hz == [200.0, 400.0, 600.0]  # grid unchanged

    def test_full_scale_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.lattice_n == 33
        assert cfg.train.iterations == 500_000
        assert cfg.train.lr0 == 1e-3
        assert cfg.train.lambda_data == 0.1
        assert cfg.train.lambda_pde == 1e-3
        assert cfg.network.rff_rows == 128
        assert cfg.network.hidden_width == 256
        assert cfg.network.hidden_layers == 4
        assert cfg.frequencies_hz == [200.0, 400.0, 600.0]
        assert cfg.num_measurements == [5, 10, 20, 50]
        assert len(cfg.seeds) == 64

    def test_method_lambda_dispatch(self):
        cfg = ExperimentConfig()
        assert train_config_for(cfg, "nf", 3).lambda_pde == 0.0
        assert train_config_for(cfg, "nf", 3).lambda_data == 0.1
        assert train_config_for(cfg, "prb_pinn", 3).lambda_pde == 1e-3
        assert train_config_for(cfg, "prb_pinn", 3, lambda_pde=1.0).lambda_pde == 1.0
        assert train_config_for(cfg, "prb_pinn", 3).seed == 3


class TestSimulate:
    def test_deterministic_bytes(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["simulate", "--config", str(path)]) == 0
        ds_path = tmp_path / "out/200Hz/M12/seed0/dataset.csv"
        first = ds_path.read_bytes()
        assert main(["simulate", "--config", str(path), "--force"]) == 0
        assert ds_path.read_bytes() == first

    def test_desk_scale_lattice_sizes(self, tmp_path):
        path = write_config(tmp_path, lattice_n=17, num_measurements=[20])
        assert main(["simulate", "--config", str(path)]) == 0
        ds, _ = load_dataset(tmp_path / "out/200Hz/M20/seed0/dataset.csv")
        assert ds.meas_points.shape[0] == 20
        assert ds.test_points.shape[0] == 17**3 - 20


class TestTrainCommand:
    def test_nearest_writes_descriptor_only(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["train", "--config", str(path), "--method", "nearest"]) == 0
        cell = tmp_path / "out/200Hz/M12/seed0/nearest"
        assert (cell / "interpolator.json").exists()
        assert not (cell / "ckpt_final.json").exists()

    def test_nf_then_evaluate(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["train", "--config", str(path), "--method", "nf"]) == 0
        cell = tmp_path / "out/200Hz/M12/seed0/nf"
        log = (cell / "trainlog.csv").read_text().splitlines()
        assert log[0] == "iteration,data_db,pde,total,lr"
        assert all(float(line.split(",")[2]) == 0.0 for line in log[1:])
        assert main(["evaluate", "--config", str(path), "--method", "nf"]) == 0
        rows = read_metrics_csv(cell / "metrics.csv")
        assert rows[0]["method"] == "nf"


class TestSweep:
    def test_full_grid_with_lambda_sweep(self, tmp_path):
        path = write_config(tmp_path, lambda_pde_sweep=[1e-4, 1e-2])
        assert main(["sweep", "--config", str(path)]) == 0
        rows = read_metrics_csv(tmp_path / "out/metrics.csv")
        labels = sorted(r["method"] for r in rows)
        assert labels == sorted(["prb_pinn", "nf", "nearest",
                                 "prb_pinn(lambda_pde=0.0001)",
                                 "prb_pinn(lambda_pde=0.01)"])

    def test_rerun_is_deterministic(self, tmp_path):
        pa = write_config(tmp_path)
        assert main(["sweep", "--config", str(pa)]) == 0
        table_a = (tmp_path / "out/metrics.csv").read_bytes()
        shutil.rmtree(tmp_path / "out")
        assert main(["sweep", "--config", str(pa)]) == 0
        assert (tmp_path / "out/metrics.csv").read_bytes() == table_a

    def test_cell_isolation(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["sweep", "--config", str(path)]) == 0
        cell = tmp_path / "out/200Hz/M12/seed0"
        nf_metrics = (cell / "nf/metrics.csv").read_bytes()
        prb_ckpt = (cell / "prb_pinn/ckpt_final.json").read_bytes()
        shutil.rmtree(cell / "nf")
        assert main(["sweep", "--config", str(path)]) == 0
        assert (cell / "nf/metrics.csv").read_bytes() == nf_metrics
        assert (cell / "prb_pinn/ckpt_final.json").read_bytes() == prb_ckpt

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_failed_cells_recorded_sweep_continues(self, tmp_path):
        doc = micro_config(tmp_path / "out", methods=["prb_pinn", "nearest"])
        doc["train"]["lr0"] = 1e200  # prb cells diverge, nearest is unaffected
        doc["train"]["iterations"] = 30
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc))
        assert main(["sweep", "--config", str(path)]) == 2
        rows = read_metrics_csv(tmp_path / "out/metrics.csv")
        assert [r["method"] for r in rows] == ["nearest"]

    def test_out_flag_overrides_directory(self, tmp_path):
        path = write_config(tmp_path)
        alt = tmp_path / "elsewhere"
        assert main(["simulate", "--config", str(path), "--out", str(alt)]) == 0
        assert (alt / "200Hz/M12/seed0/dataset.csv").exists()


class TestRender:
    def test_slices_and_ground_truth_oracle(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["train", "--config", str(path), "--method", "nf"]) == 0
        assert main(["render", "--config", str(path), "--resolution", "9"]) == 0
        slices = tmp_path / "out/200Hz/M12/seed0/slices"
        for name in ("ground_truth", "nearest", "nf"):
            assert (slices / f"{name}.pgm").exists()
        header = (slices / "ground_truth.pgm").read_text().splitlines()[:3]
        assert header == ["P2", "9 9", "255"]

        ds, meta = load_dataset(tmp_path / "out/200Hz/M12/seed0/dataset.csv")
        smeta = json.loads((slices / "ground_truth.meta.json").read_text())
        vals = np.loadtxt(slices / "ground_truth.csv", delimiter=",")
        u = np.linspace(smeta["u_range"][0], smeta["u_range"][1], 9)
        v = np.linspace(smeta["v_range"][0], smeta["v_range"][1], 9)
        uu, vv = np.meshgrid(u, v, indexing="ij")
        pts = np.stack([uu.ravel(),
                        np.full(uu.size, smeta["plane_value"]),
                        vv.ravel()], axis=1)
        field = synthesize_field(room_from_meta(meta), sources_from_meta(meta),
                                 pts, meta["frequency_hz"], meta["max_order"])
        assert np.allclose(vals, np.abs(field).reshape(9, 9), rtol=1e-12)

    def test_default_resolution_is_65(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["simulate", "--config", str(path)]) == 0
        assert main(["render", "--config", str(path), "--method", "nearest"]) == 0
        pgm = tmp_path / "out/200Hz/M12/seed0/slices/nearest.pgm"
        assert pgm.read_text().splitlines()[1] == "65 65"


class TestExitCodes:
    def test_usage_error_is_1(self):
        with pytest.raises(SystemExit) as err:
            main(["train"])  # --method is required
        assert err.value.code == 1

    def test_unknown_subcommand_is_1(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 1

    def test_bad_config_key_is_1(self, tmp_path):
        path = tmp_path / "bad.json"
        doc = micro_config(tmp_path / "out")
        doc["no_such_key"] = 1
        path.write_text(json.dumps(doc))
        assert main(["simulate", "--config", str(path)]) == 1

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_abort_is_2(self, tmp_path):
        path = tmp_path / "config.json"
        doc = micro_config(tmp_path / "out")
        doc["train"]["lr0"] = 1e200  # guaranteed divergence
        doc["train"]["iterations"] = 30
        path.write_text(json.dumps(doc))
        assert main(["simulate", "--config", str(path)]) == 0
        assert main(["train", "--config", str(path), "--method", "prb_pinn"]) == 2

    def test_missing_dataset_render_is_3(self, tmp_path):
        path = write_config(tmp_path)
        assert main(["render", "--config", str(path)]) == 3
