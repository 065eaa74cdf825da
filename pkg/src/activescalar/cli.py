"""Command-line entry point.

Exit codes: 0 every verdict passed, 2 some verdict failed, 1 the run could
not be completed, 64 usage error.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Sequence

from . import experiments as ex
from .config import RunConfig, load_config, parse_config
from .errors import ActiveScalarError
from .evolve import evolve
from .initial_data import build_datum
from .storage import snapshot_name, write_diagnostics_csv, write_snapshot

EXIT_OK, EXIT_ERROR, EXIT_FAILED, EXIT_USAGE = 0, 1, 2, 64
ENV_OUTPUT = "ACTIVESCALAR_OUTPUT_DIR"

COMMANDS = ("simulate", "decay-study", "scaling-study", "symmetry-study", "picard-study",
            "dependence-study", "smoothing-study", "probe-semigroup", "validate-config")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="activescalar",
                     description="Pseudo-spectral active scalar simulator and study runner.")
    parser.add_argument("command", choices=COMMANDS, metavar="command",
                        help="one of: " + ", ".join(COMMANDS))
    parser.add_argument("--config", help="INI configuration file (defaults if omitted)")
    parser.add_argument("--output-dir", help=f"artifact directory (overrides ${ENV_OUTPUT})")
    parser.add_argument("--seed", type=int, help="override study.seed")
    return parser


def _output_dir(args, cfg: RunConfig) -> str:
    return args.output_dir or os.environ.get(ENV_OUTPUT) or cfg.output_directory


def _datum(cfg: RunConfig, seed: int, kind: str | None = None):
    return build_datum(cfg.grid, kind or cfg.study.datum, cfg.solver.gamma,
                       cfg.coupling.order, seed=seed)


def _run_study(command: str, cfg: RunConfig, seed: int) -> ex.StudyReport:
    s, solver, spec = cfg.study, cfg.solver, cfg.coupling
    echo = cfg.echo()
    if command == "decay-study":
        return ex.run_decay_study(_datum(cfg, seed), solver, spec, q_list=s.q_list,
                                  with_l1=s.with_l1, config_echo=echo)
    if command == "scaling-study":
        return ex.run_scaling_study(_datum(cfg, seed), solver, spec, lam=s.lam,
                                    config_echo=echo)
    if command == "symmetry-study":
        if s.datum not in ("odd", "even", "radial", "nonradial"):
            raise ActiveScalarError(
                f"study.datum must be odd, even, radial or nonradial, got {s.datum!r}")
        return ex.run_symmetry_study(_datum(cfg, seed), solver, spec, s.datum,
                                     config_echo=echo)
    if command == "picard-study":
        return ex.run_picard_study(_datum(cfg, seed), solver, spec, amplitudes=s.amplitudes,
                                   config_echo=echo)
    if command == "dependence-study":
        return ex.run_dependence_study(_datum(cfg, seed), solver, spec,
                                       perturbation_sizes=s.perturbations, seed=seed + 11,
                                       config_echo=echo)
    if command == "smoothing-study":
        return ex.run_smoothing_study(_datum(cfg, seed, "rough"), solver, spec,
                                      config_echo=echo)
    if command == "probe-semigroup":
        return ex.run_semigroup_probe(cfg.grid, gammas=(solver.gamma,), kappa=solver.kappa,
                                      config_echo=echo)
    raise AssertionError(command)


def _simulate(cfg: RunConfig, seed: int, out_dir: str) -> int:
    start = time.perf_counter()
    theta0 = _datum(cfg, seed)
    traj = evolve(theta0, cfg.solver, cfg.coupling)
    os.makedirs(out_dir, exist_ok=True)
    prefix = cfg.output_prefix
    csv_path = write_diagnostics_csv(traj.diagnostics,
                                     os.path.join(out_dir, f"{prefix}diagnostics.csv"))
    for i, (t, f) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        write_snapshot(f, t, os.path.join(out_dir, snapshot_name(prefix, t, i)))
    with open(os.path.join(out_dir, f"{prefix}config.ini"), "w") as fh:
        fh.write(cfg.echo())
    last = traj.diagnostics[-1]
    print(f"simulate: {traj.steps} steps to t = {last.t:.6g} "
          f"({traj.rejections} step rejections, {time.perf_counter() - start:.1f} s)")
    print(f"  L2 {last.l2:.6g}  Linf {last.linf:.6g}  mean {last.mean:.3g}")
    print(f"  diagnostics: {csv_path}")
    print(f"  snapshots:   {len(traj.snapshots)} files in {out_dir}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"activescalar: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config) if args.config else parse_config("")
        if args.command == "validate-config":
            print(cfg.echo(), end="")
            print("configuration OK")
            return EXIT_OK
        seed = cfg.study.seed if args.seed is None else args.seed
        out_dir = _output_dir(args, cfg)
        if args.command == "simulate":
            return _simulate(cfg, seed, out_dir)
        report = _run_study(args.command, cfg, seed)
        paths = report.write(out_dir, cfg.output_prefix)
    except (ActiveScalarError, OSError, ValueError) as exc:
        print(f"activescalar: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(report.summary())
    print(f"  report: {paths[0]}")
    print(f"  series: {paths[1]}")
    return EXIT_OK if report.passed else EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
