"""Command-line entry point.

Subcommands: ``simulate``, ``train``, ``evaluate``, ``sweep``, ``render``.
Exit codes: 0 success, 1 usage/configuration error, 2 numerical abort,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dataset import load_dataset
from .errors import NumericsError
from .evaluate import PlaneSpec, render_slice
from .experiment import (ExperimentConfig, cell_dir, dataset_path,
                         desk_scale_preset, evaluate_cell, ground_truth_predictor,
                         load_config, method_label, run_sweep, simulate_cell,
                         train_cell)
from .baselines import NnInterpolator, nn_predict
from .model import load_model


class _Parser(argparse.ArgumentParser):
    """argparse maps usage errors to exit code 2; this artifact uses 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None,
                   help="experiment JSON (defaults to the built-in configuration)")
    p.add_argument("--out", type=Path, default=None, help="override output directory")
    p.add_argument("--desk-scale", action="store_true",
                   help="apply the reduced lattice/iterations preset")


def _add_selectors(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--frequency", type=float, default=None, help="Hz")
    p.add_argument("--measurements", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="magfield",
                     description="Acoustic magnitude field estimation experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write ground-truth datasets")
    _add_common(p)
    _add_selectors(p)
    p.add_argument("--force", action="store_true", help="rewrite existing datasets")

    p = sub.add_parser("train", help="train one method on one dataset cell")
    _add_common(p)
    _add_selectors(p)
    p.add_argument("--method", required=True, choices=("prb_pinn", "nf", "nearest"))
    p.add_argument("--lambda-pde", type=float, default=None,
                   help="physics weight override (prb_pinn only)")

    p = sub.add_parser("evaluate", help="compute test-set metrics for a cell")
    _add_common(p)
    _add_selectors(p)
    p.add_argument("--method", default=None, choices=("prb_pinn", "nf", "nearest"))
    p.add_argument("--lambda-pde", type=float, default=None)

    p = sub.add_parser("sweep", help="run the full experiment grid")
    _add_common(p)

    p = sub.add_parser("render", help="write magnitude-slice images for a cell")
    _add_common(p)
    _add_selectors(p)
    p.add_argument("--method", default=None,
                   help="render only this method (default: all found)")
    p.add_argument("--axis", default="y", choices=("x", "y", "z"),
                   help="axis held fixed (default y: an x-z slice)")
    p.add_argument("--value", type=float, default=None,
                   help="plane offset (default: region center)")
    p.add_argument("--resolution", type=int, default=65)
    p.add_argument("--render-out", type=Path, default=None,
                   help="image directory (default: <cell>/slices)")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config is not None else ExperimentConfig()
    if args.desk_scale:
        cfg = desk_scale_preset(cfg)
    if args.out is not None:
        cfg.out_dir = str(args.out)
    return cfg


def _cell(cfg: ExperimentConfig, args) -> tuple[float, int, int]:
    freq = args.frequency if args.frequency is not None else cfg.frequencies_hz[0]
    m = args.measurements if args.measurements is not None else cfg.num_measurements[0]
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    return freq, m, seed


def cmd_simulate(args) -> int:
    cfg = _config(args)
    freqs = [args.frequency] if args.frequency is not None else cfg.frequencies_hz
    counts = [args.measurements] if args.measurements is not None else cfg.num_measurements
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    for freq in freqs:
        for m in counts:
            for seed in seeds:
                path = simulate_cell(cfg, freq, m, seed, force=args.force)
                print(f"dataset: {path}")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    freq, m, seed = _cell(cfg, args)
    out = train_cell(cfg, freq, m, seed, args.method, args.lambda_pde)
    print(f"trained {method_label(args.method, args.lambda_pde)} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    freq, m, seed = _cell(cfg, args)
    methods = [args.method] if args.method else cfg.methods
    for method in methods:
        metrics = evaluate_cell(cfg, freq, m, seed, method, args.lambda_pde)
        print(f"{metrics.method}: mean {metrics.mean_lsd_db:.4f} dB, "
              f"median {metrics.median_lsd_db:.4f} dB")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    rows, failures = run_sweep(cfg, progress=print)
    print(f"sweep complete: {len(rows)} cells ok, {len(failures)} failed; "
          f"table at {Path(cfg.out_dir) / 'metrics.csv'}")
    for msg in failures:
        print(f"  failed: {msg}", file=sys.stderr)
    return 0 if not failures else 2


def cmd_render(args) -> int:
    cfg = _config(args)
    freq, m, seed = _cell(cfg, args)
    ds_path = dataset_path(cfg, freq, m, seed)
    if not ds_path.exists():
        raise FileNotFoundError(f"dataset not found: {ds_path}")
    ds, meta = load_dataset(ds_path)
    value = args.value if args.value is not None else \
        float(ds.region_center["xyz".index(args.axis)])
    plane = PlaneSpec(args.axis, value)
    res = (args.resolution, args.resolution)
    out = args.render_out if args.render_out is not None else \
        cell_dir(cfg, freq, m, seed) / "slices"
    bounds = ds.region_bounds()

    predictors = {"ground_truth": ground_truth_predictor(meta)}
    interp = NnInterpolator.from_dataset(ds)
    predictors["nearest"] = lambda x: nn_predict(interp, x)
    cell = cell_dir(cfg, freq, m, seed)
    for sub in sorted(cell.iterdir()) if cell.exists() else []:
        ckpt = sub / "ckpt_final.json"
        if sub.is_dir() and ckpt.exists():
            predictors[sub.name] = load_model(ckpt).magnitude
    if args.method is not None:
        wanted = {"nearest": ["nearest"]}.get(args.method, [args.method])
        missing = [w for w in wanted if w not in predictors]
        if missing:
            raise FileNotFoundError(
                f"no checkpoint for method {args.method!r} in {cell}")
        predictors = {k: predictors[k] for k in ("ground_truth", *wanted)}

    for name, predict in predictors.items():
        grid = render_slice(predict, plane, res, out, bounds, name=name)
        print(f"slice: {out / (name + '.pgm')} "
              f"(dB range {grid.db_range[0]:.2f} .. {grid.db_range[1]:.2f})")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit:
        raise
    except NumericsError as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
