"""Command-line interface.

Subcommands cover the full simulate / reconstruct / evaluate cycle plus
training and inference with the self-supervised network:

* ``simulate``: synthetic (or user-supplied) scene + mask -> measurement files
* ``reconstruct``: measurement files -> reconstructed cube file
* ``evaluate``: reference + test cube -> metrics CSV row
* ``experiment``: JSON config -> full report directory
* ``train``: measurement pairs -> network checkpoint
* ``infer``: checkpoint + coded frame -> reconstructed cube file

Every command exits 0 on success and nonzero with a one-line diagnostic on
stderr otherwise.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import HsiCube, WavelengthGrid
from .cube_io import load_cube, load_frame, load_mask, save_cube, save_frame, save_mask
from .experiment import (
    METRICS_CSV_HEADER,
    default_color_op,
    load_config,
    run_experiment,
    simulate_measurements,
)
from .forward import CassiOperator
from .metrics import evaluate
from .scenes import MASK_KINDS, SCENE_FAMILIES, MaskSpec, SceneSpec, generate_mask, generate_scene
from .selfsup import (
    TrainConfig,
    load_checkpoint,
    reconstruct_selfsup,
    save_checkpoint,
    train_selfsup,
)
from .solvers import SolverParams, reconstruct_gaptv, reconstruct_twist


def _grid_from_header(header: dict) -> WavelengthGrid:
    # Frame headers keep the source cube's band count in grid_bands; the
    # container's own bands field describes the single-plane payload.
    return WavelengthGrid(
        start_nm=float(header["start_nm"]),
        step_nm=float(header["step_nm"]),
        bands=int(header.get("grid_bands", header["bands"])),
    )


def _infer_shift_step(frame_width: int, mask_width: int, bands: int) -> int:
    if bands == 1:
        return 1
    overhang = frame_width - mask_width
    if overhang <= 0 or overhang % (bands - 1):
        raise ValueError(
            f"frame width {frame_width} is incompatible with mask width "
            f"{mask_width} and {bands} bands"
        )
    return overhang // (bands - 1)


def _clip_unit(cube: HsiCube) -> HsiCube:
    return HsiCube(grid=cube.grid, data=np.clip(cube.data, 0.0, 1.0))


def _add_scene_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cube", help="load the ground-truth cube from a file instead of generating it")
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--bands", type=int, default=8)
    p.add_argument("--family", choices=SCENE_FAMILIES, default="smooth-blobs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--elements", type=int, default=6)
    p.add_argument("--noise-sigma", type=float, default=0.0)


def _add_mask_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mask", help="load the coded aperture from a file instead of generating it")
    p.add_argument("--mask-kind", choices=MASK_KINDS, default="bernoulli")
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--order", type=int, default=4)
    p.add_argument("--mask-seed", type=int, default=0)


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    d = SolverParams()
    p.add_argument("--max-iters", type=int, default=d.max_iters)
    p.add_argument("--tv-weight", type=float, default=d.tv_weight)
    p.add_argument("--tv-inner-iters", type=int, default=d.tv_inner_iters)
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--solver-seed", type=int, default=d.seed)


def _add_train_args(p: argparse.ArgumentParser) -> None:
    d = TrainConfig()
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--lr", type=float, default=d.lr)
    p.add_argument("--lr-decay-factor", type=float, default=d.lr_decay_factor)
    p.add_argument("--lr-decay-every", type=int, default=d.lr_decay_every)
    p.add_argument("--weight-gray", type=float, default=d.weight_gray)
    p.add_argument("--weight-color", type=float, default=d.weight_color)
    p.add_argument("--hidden", type=int, default=d.hidden)
    p.add_argument("--train-seed", type=int, default=d.seed)


def _solver_params(args) -> SolverParams:
    return SolverParams(
        max_iters=args.max_iters,
        tv_weight=args.tv_weight,
        tv_inner_iters=args.tv_inner_iters,
        tol=args.tol,
        seed=args.solver_seed,
    )


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        lr_decay_factor=args.lr_decay_factor,
        lr_decay_every=args.lr_decay_every,
        weight_gray=args.weight_gray,
        weight_color=args.weight_color,
        hidden=args.hidden,
        seed=args.train_seed,
    )


def _cmd_simulate(args) -> int:
    if args.cube:
        truth = load_cube(args.cube)
    else:
        spec = SceneSpec(
            width=args.width, height=args.height, bands=args.bands,
            family=args.family, seed=args.seed,
            noise_sigma=args.noise_sigma, elements=args.elements,
        )
        truth = generate_scene(spec)
    bands, height, width = truth.data.shape
    if args.mask:
        mask = load_mask(args.mask)
        if (mask.height, mask.width) != (height, width):
            raise ValueError("loaded mask does not match the scene extent")
    else:
        mspec = MaskSpec(
            kind=args.mask_kind, density=args.density,
            order=args.order, seed=args.mask_seed,
        )
        mask = generate_mask(mspec, width, height)
    cassi_op = CassiOperator(mask=mask, bands=bands, shift_step=args.shift_step)
    color_op = default_color_op(truth.grid)
    gray, color = simulate_measurements(
        truth, cassi_op, color_op, args.noise_sigma, args.seed
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_cube(truth, out / "truth.json")
    save_mask(mask, out / "mask.json")
    save_frame(gray, out / "measurement_gray.json", truth.grid)
    save_frame(color, out / "measurement_color.json", truth.grid)
    print(f"wrote truth, mask and both measurements to {out}")
    return 0


def _cmd_reconstruct(args) -> int:
    gray, header = load_frame(args.gray)
    grid = _grid_from_header(header)
    mask = load_mask(args.mask)
    step = _infer_shift_step(gray.width, mask.width, grid.bands)
    cassi_op = CassiOperator(mask=mask, bands=grid.bands, shift_step=step)
    if args.method in ("twist", "gaptv"):
        solve = reconstruct_twist if args.method == "twist" else reconstruct_gaptv
        cube, _ = solve(gray, cassi_op, _solver_params(args), grid)
    else:
        if not args.color:
            raise ValueError("--color is required for the selfsup method")
        color, _ = load_frame(args.color)
        tcfg = _train_config(args)
        net, _ = train_selfsup([(gray, color)], cassi_op, default_color_op(grid), tcfg)
        if args.checkpoint_out:
            save_checkpoint(net, args.checkpoint_out, tcfg)
        cube = reconstruct_selfsup(gray, net, grid)
    save_cube(_clip_unit(cube), args.out)
    print(f"wrote reconstruction to {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    ref = load_cube(args.ref)
    test = load_cube(args.test)
    row = evaluate(ref, test).csv_row(args.scene_id, args.method)
    text = METRICS_CSV_HEADER + "\n" + row + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    print(text, end="")
    return 0


def _cmd_experiment(args) -> int:
    cfg = load_config(args.config)
    if args.output_dir:
        cfg = replace(cfg, output_dir=args.output_dir)
    report = run_experiment(cfg)
    for method, m in report.metrics.items():
        print(m.csv_row(report.scene_id, method))
    print(f"report written to {report.output_dir}")
    return 0


def _cmd_train(args) -> int:
    if not args.pair:
        raise ValueError("at least one --pair GRAY COLOR is required")
    pairs = []
    grid = None
    for gray_path, color_path in args.pair:
        gray, header = load_frame(gray_path)
        color, _ = load_frame(color_path)
        g = _grid_from_header(header)
        if grid is None:
            grid = g
        elif (g.start_nm, g.step_nm, g.bands) != (grid.start_nm, grid.step_nm, grid.bands):
            raise ValueError("measurement pairs disagree on the wavelength grid")
        pairs.append((gray, color))
    mask = load_mask(args.mask)
    step = _infer_shift_step(pairs[0][0].width, mask.width, grid.bands)
    cassi_op = CassiOperator(mask=mask, bands=grid.bands, shift_step=step)
    tcfg = _train_config(args)
    net, report = train_selfsup(pairs, cassi_op, default_color_op(grid), tcfg)
    save_checkpoint(net, args.out, tcfg)
    if args.trace:
        report.export_csv(args.trace)
    final = report.trace[-1, 2] if report.epochs_run else float("nan")
    print(f"trained {report.epochs_run} epochs (final loss {final!r}); checkpoint at {args.out}")
    return 0


def _cmd_infer(args) -> int:
    net = load_checkpoint(args.checkpoint)
    gray, header = load_frame(args.gray)
    cube = reconstruct_selfsup(gray, net, _grid_from_header(header))
    save_cube(_clip_unit(cube), args.out)
    print(f"wrote reconstruction to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualcassi",
        description="Dual-camera compressive spectral imaging: simulate, reconstruct, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="scene + mask -> measurement files")
    _add_scene_args(p)
    _add_mask_args(p)
    p.add_argument("--shift-step", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("reconstruct", help="measurement files -> cube")
    p.add_argument("--method", choices=("twist", "gaptv", "selfsup"), required=True)
    p.add_argument("--gray", required=True, help="coded measurement file")
    p.add_argument("--mask", required=True, help="coded aperture file")
    p.add_argument("--color", help="raw color measurement (selfsup only)")
    p.add_argument("--checkpoint-out", help="also save the trained net (selfsup only)")
    _add_solver_args(p)
    _add_train_args(p)
    p.add_argument("--out", required=True, help="output cube file")
    p.set_defaults(func=_cmd_reconstruct)

    p = sub.add_parser("evaluate", help="two cubes -> metrics CSV row")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--scene-id", default="scene")
    p.add_argument("--method", default="method")
    p.add_argument("--out", help="also write the CSV to this path")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="JSON config -> full report directory")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("train", help="measurement pairs -> checkpoint")
    p.add_argument(
        "--pair", nargs=2, action="append", metavar=("GRAY", "COLOR"),
        help="one coded + color measurement pair (repeatable)",
    )
    p.add_argument("--mask", required=True)
    _add_train_args(p)
    p.add_argument("--trace", help="write the training trace CSV to this path")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("infer", help="checkpoint + coded frame -> cube")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--gray", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_infer)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
