"""End-to-end tests for the command-line interface (all through ``main``)."""

import json

import numpy as np
import pytest

from dualcassi.cli import _infer_shift_step, main
from dualcassi.core import CodedAperture
from dualcassi.cube_io import load_cube, load_frame, load_mask, save_mask
from dualcassi.experiment import config_to_dict, default_config
from dualcassi.forward import CassiOperator
from dualcassi.scenes import SceneSpec, generate_scene
from dualcassi.selfsup import load_checkpoint
from dualcassi.solvers import SolverParams, reconstruct_gaptv


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    rc = main([
        "simulate", "--width", "12", "--height", "12", "--bands", "3",
        "--seed", "1", "--mask-seed", "2", "--out", str(out),
    ])
    assert rc == 0
    return out


def test_infer_shift_step():
    assert _infer_shift_step(14, 12, 3) == 1
    assert _infer_shift_step(16, 12, 3) == 2
    assert _infer_shift_step(5, 12, 1) == 1
    with pytest.raises(ValueError, match="incompatible"):
        _infer_shift_step(12, 12, 3)
    with pytest.raises(ValueError, match="incompatible"):
        _infer_shift_step(15, 12, 3)


def test_simulate_writes_consistent_files(sim_dir, capsys):
    truth = load_cube(sim_dir / "truth.json")
    want = generate_scene(SceneSpec(width=12, height=12, bands=3, seed=1))
    assert np.array_equal(truth.data, want.data)
    mask = load_mask(sim_dir / "mask.json")
    assert mask.is_binary()
    gray, header = load_frame(sim_dir / "measurement_gray.json")
    assert gray.values.shape == (12, 14)
    assert (header["kind"], header["grid_bands"]) == ("cassi", 3)
    color, _ = load_frame(sim_dir / "measurement_color.json")
    assert color.values.shape == (12, 12)


def test_simulate_hadamard_mask(tmp_path):
    out = tmp_path / "sim"
    rc = main([
        "simulate", "--width", "8", "--height", "8", "--bands", "2",
        "--mask-kind", "hadamard-derived", "--order", "4", "--out", str(out),
    ])
    assert rc == 0
    mask = load_mask(out / "mask.json")
    assert mask.is_binary()
    assert mask.values[0, 0] == 1.0


def test_simulate_from_files_and_extent_check(sim_dir, tmp_path, capsys):
    out = tmp_path / "resim"
    rc = main([
        "simulate", "--cube", str(sim_dir / "truth.json"),
        "--mask", str(sim_dir / "mask.json"), "--out", str(out),
    ])
    assert rc == 0
    a = (sim_dir / "measurement_gray.json.bin").read_bytes()
    b = (out / "measurement_gray.json.bin").read_bytes()
    assert a == b

    small = tmp_path / "small_mask.json"
    save_mask(CodedAperture(values=np.ones((8, 8))), small)
    rc = main([
        "simulate", "--cube", str(sim_dir / "truth.json"),
        "--mask", str(small), "--out", str(tmp_path / "bad"),
    ])
    captured = capsys.readouterr()
    assert rc == 1
    assert captured.err.startswith("error:")
    assert "does not match" in captured.err


def test_reconstruct_gaptv_matches_direct_call(sim_dir, tmp_path):
    out = tmp_path / "recon.json"
    rc = main([
        "reconstruct", "--method", "gaptv", "--gray", str(sim_dir / "measurement_gray.json"),
        "--mask", str(sim_dir / "mask.json"), "--max-iters", "5", "--out", str(out),
    ])
    assert rc == 0
    got = load_cube(out)
    gray, _ = load_frame(sim_dir / "measurement_gray.json")
    mask = load_mask(sim_dir / "mask.json")
    truth = load_cube(sim_dir / "truth.json")
    op = CassiOperator(mask=mask, bands=3)
    cube, _ = reconstruct_gaptv(gray, op, SolverParams(max_iters=5), truth.grid)
    assert np.array_equal(got.data, np.clip(cube.data, 0.0, 1.0))


def test_reconstruct_twist_runs(sim_dir, tmp_path):
    out = tmp_path / "recon.json"
    rc = main([
        "reconstruct", "--method", "twist", "--gray", str(sim_dir / "measurement_gray.json"),
        "--mask", str(sim_dir / "mask.json"), "--max-iters", "3", "--out", str(out),
    ])
    assert rc == 0
    assert load_cube(out).data.shape == (3, 12, 12)


def test_reconstruct_with_nonunit_shift_step(tmp_path):
    out = tmp_path / "sim"
    rc = main([
        "simulate", "--width", "12", "--height", "12", "--bands", "3",
        "--shift-step", "2", "--out", str(out),
    ])
    assert rc == 0
    gray, _ = load_frame(out / "measurement_gray.json")
    assert gray.values.shape == (12, 16)
    rc = main([
        "reconstruct", "--method", "gaptv", "--gray", str(out / "measurement_gray.json"),
        "--mask", str(out / "mask.json"), "--max-iters", "3",
        "--out", str(tmp_path / "recon.json"),
    ])
    assert rc == 0
    assert load_cube(tmp_path / "recon.json").data.shape == (3, 12, 12)


def test_reconstruct_selfsup_requires_color(sim_dir, tmp_path, capsys):
    rc = main([
        "reconstruct", "--method", "selfsup", "--gray", str(sim_dir / "measurement_gray.json"),
        "--mask", str(sim_dir / "mask.json"), "--out", str(tmp_path / "recon.json"),
    ])
    captured = capsys.readouterr()
    assert rc == 1
    assert captured.err == "error: --color is required for the selfsup method\n"


def test_reconstruct_selfsup_and_infer_round_trip(sim_dir, tmp_path):
    recon_path = tmp_path / "recon.json"
    ckpt = tmp_path / "net.json"
    rc = main([
        "reconstruct", "--method", "selfsup", "--gray", str(sim_dir / "measurement_gray.json"),
        "--color", str(sim_dir / "measurement_color.json"),
        "--mask", str(sim_dir / "mask.json"),
        "--epochs", "2", "--hidden", "2",
        "--checkpoint-out", str(ckpt), "--out", str(recon_path),
    ])
    assert rc == 0
    assert load_checkpoint(ckpt).hidden == 2
    infer_path = tmp_path / "infer.json"
    rc = main([
        "infer", "--checkpoint", str(ckpt), "--gray", str(sim_dir / "measurement_gray.json"),
        "--out", str(infer_path),
    ])
    assert rc == 0
    a = load_cube(recon_path)
    b = load_cube(infer_path)
    assert np.array_equal(a.data, b.data)
    assert a.data.min() >= 0.0 and a.data.max() <= 1.0


def test_evaluate_identical_cubes(sim_dir, tmp_path, capsys):
    out = tmp_path / "row.csv"
    rc = main([
        "evaluate", "--ref", str(sim_dir / "truth.json"), "--test", str(sim_dir / "truth.json"),
        "--scene-id", "s0", "--method", "ident", "--out", str(out),
    ])
    captured = capsys.readouterr()
    assert rc == 0
    lines = captured.out.splitlines()
    assert lines[0] == "scene_id,method,psnr_db,ssim,sam_deg"
    assert lines[1] == "s0,ident,99.0,1.0,0.0"
    assert out.read_text() == captured.out


def test_evaluate_missing_file(tmp_path, capsys):
    rc = main([
        "evaluate", "--ref", str(tmp_path / "nope.json"), "--test", str(tmp_path / "nope.json"),
    ])
    captured = capsys.readouterr()
    assert rc == 1
    assert captured.err.startswith("error:")


def test_experiment_command(tmp_path, capsys):
    cfg = config_to_dict(default_config())
    cfg["scene"].update(width=12, height=12, bands=3, seed=1)
    cfg["methods"] = ["gaptv"]
    cfg["solver"]["max_iters"] = 3
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "run"
    rc = main(["experiment", "--config", str(cfg_path), "--output-dir", str(out)])
    captured = capsys.readouterr()
    assert rc == 0
    assert (out / "metrics.csv").exists()
    assert (out / "gaptv" / "recon.json").exists()
    assert captured.out.splitlines()[0].startswith("smooth-blobs-seed1,gaptv,")
    assert f"report written to {out}" in captured.out


def test_experiment_command_rejects_bad_config(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"scene": {"width": 8, "height": 8, "bands": 3}, "zzz": 1}))
    rc = main(["experiment", "--config", str(cfg_path)])
    captured = capsys.readouterr()
    assert rc == 1
    assert "unknown config field" in captured.err


def test_train_command(sim_dir, tmp_path, capsys):
    ckpt = tmp_path / "net.json"
    trace = tmp_path / "trace.csv"
    rc = main([
        "train",
        "--pair", str(sim_dir / "measurement_gray.json"), str(sim_dir / "measurement_color.json"),
        "--mask", str(sim_dir / "mask.json"),
        "--epochs", "2", "--hidden", "2",
        "--trace", str(trace), "--out", str(ckpt),
    ])
    captured = capsys.readouterr()
    assert rc == 0
    assert "trained 2 epochs" in captured.out
    net = load_checkpoint(ckpt)
    assert (net.bands, net.hidden) == (3, 2)
    lines = trace.read_text().splitlines()
    assert lines[0] == "epoch,loss_gray,loss_color,total"
    assert len(lines) == 3


def test_train_requires_pairs(sim_dir, tmp_path, capsys):
    rc = main(["train", "--mask", str(sim_dir / "mask.json"), "--out", str(tmp_path / "n.json")])
    captured = capsys.readouterr()
    assert rc == 1
    assert "at least one --pair" in captured.err


def test_train_rejects_mismatched_grids(sim_dir, tmp_path, capsys):
    other = tmp_path / "sim4"
    assert main([
        "simulate", "--width", "12", "--height", "12", "--bands", "4", "--out", str(other),
    ]) == 0
    rc = main([
        "train",
        "--pair", str(sim_dir / "measurement_gray.json"), str(sim_dir / "measurement_color.json"),
        "--pair", str(other / "measurement_gray.json"), str(other / "measurement_color.json"),
        "--mask", str(sim_dir / "mask.json"),
        "--out", str(tmp_path / "n.json"),
    ])
    captured = capsys.readouterr()
    assert rc == 1
    assert "disagree on the wavelength grid" in captured.err
