"""Command line: ``qcycle run | scan | validate``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io
from .harness import ScanSpec, TrajectoryAborted, run_scan, run_trajectory


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcycle", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "simulate one trajectory and write trajectory.csv"),
                        ("scan", "run a parameter scan and write scan.csv"),
                        ("validate", "check every registered model invariant")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="key = value parameter file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--trajectories", type=int)
        p.add_argument("--t-end", type=float, help="trajectory length in us")
        p.add_argument("--dt", type=float, help="time step in us")
        p.add_argument("--emit-plot-script", action="store_true",
                       help="also write a gnuplot script next to the CSV")
        if name == "validate":
            p.add_argument("--quick", action="store_true",
                           help="shorter trajectories for the statistical checks")
        if name == "scan":
            p.add_argument("--workers", type=int, default=1)
    return parser


def _load(args) -> io.RunConfig:
    text = args.config.read_text(encoding="utf-8") if args.config else ""
    cfg = io.parse_config(text)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trajectories is not None:
        cfg.trajectories = args.trajectories
    if args.t_end is not None:
        cfg.t_end = args.t_end
    if args.dt is not None:
        cfg.params = cfg.params.replace(dt=args.dt)
    if cfg.scan is not None:
        cfg.scan = ScanSpec(cfg.scan.variable, cfg.scan.grid, cfg.scan.scheme, cfg.trajectories,
                            cfg.t_end, cfg.params.dt, cfg.seed, cfg.sample_every)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            from .validation import run_all
            return 0 if run_all(quick=args.quick) else 1
        cfg = _load(args)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            result = run_trajectory(cfg.params, cfg.seed, cfg.t_end,
                                    sample_every=cfg.sample_every)
            io.write_trajectory_csv(result, args.out / "trajectory.csv")
            (args.out / "resolved.cfg").write_text(
                io.emit_config(cfg.params, seed=cfg.seed, sample_every=cfg.sample_every),
                encoding="utf-8")
            csv_name, kind = "trajectory.csv", "trajectory"
            print(f"n_e = {result.n_e:.4f}  N_p = {result.N_p:.4f}  QY = {result.qy:.4f}")
        else:
            if cfg.scan is None:
                raise io.ConfigError("scan.variable", None, "scan needs scan.variable in --config")
            result = run_scan(cfg.scan, cfg.params, workers=args.workers)
            io.write_scan_csv(result, args.out / "scan.csv")
            (args.out / "resolved.cfg").write_text(io.emit_config(cfg.params, cfg.scan),
                                                    encoding="utf-8")
            csv_name, kind = "scan.csv", "scan"
        if args.emit_plot_script:
            (args.out / (Path(csv_name).stem + ".gp")).write_text(io.plot_script(csv_name, kind),
                                                                  encoding="utf-8")
    except (io.ConfigError, TrajectoryAborted, OSError, ValueError) as exc:
        print(f"qcycle {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
