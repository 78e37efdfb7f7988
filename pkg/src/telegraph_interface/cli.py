"""Command-line entry point: ``telegraph-interface <subcommand> --config FILE``."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, validation
from .kinetic import simulate_ensemble
from .model import ParameterError, ScaledModel, total_mass

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _load(args, default_mode=None) -> harness.ExperimentConfig:
    if args.config is None:
        if default_mode is None:
            raise harness.ConfigError("--config is required for this subcommand")
        return harness.config_from_dict({"mode": default_mode, "params": {"p": 0.7, "q": 0.3}})
    cfg = harness.parse_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise harness.ConfigError("--seed must be an unsigned 64-bit integer")
        if cfg.mc is not None:
            cfg = replace(cfg, mc=replace(cfg.mc, seed=args.seed))
    return cfg


def _out_dir(args, cfg) -> Path:
    out = args.out or (cfg.output if cfg is not None else None) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_mode(cfg, mode):
    if cfg.mode != mode:
        raise harness.ConfigError(f"this subcommand needs mode {mode!r}, config has {cfg.mode!r}")


def cmd_converge(args, mode) -> int:
    cfg = _load(args)
    _require_mode(cfg, mode)
    report = harness.run_convergence(cfg, threads=args.threads, timing=args.timing)
    harness.emit_report(report, _out_dir(args, cfg))
    sys.stdout.write(harness.report_csv(report))
    return EXIT_OK if report.passed() else EXIT_FAIL


def cmd_validate(args) -> int:
    cfg = _load(args, default_mode="KernelValidation")
    _require_mode(cfg, "KernelValidation")
    checks = validation.run_kernel_validation(cfg.params.p, cfg.params.q)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "error", "tolerance", "passed"])
    for c in checks:
        w.writerow([c.name, repr(float(c.error)), repr(float(c.tolerance)), "pass" if c.passed else "fail"])
    out = _out_dir(args, cfg)
    (out / "validation.csv").write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if cfg.mc is None or cfg.mc.n_particles < 1:
        raise harness.ConfigError("simulate needs an 'mc' section with n_particles >= 1")
    d0 = cfg.initial.density(cfg.grid)
    grid = harness.coarsen(d0, cfg.mc.coarsen).grid
    out = _out_dir(args, cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epsilon", "t", "n_particles", "killed_fraction", "mass", "n_outside"])
    for i, eps in enumerate(cfg.epsilons):
        model = ScaledModel(eps, t_macro=cfg.t_macro)
        res = simulate_ensemble(d0, cfg.mc.n_particles, model, cfg.params, grid, cfg.mc.seed, args.threads)
        w.writerow([
            repr(eps), repr(cfg.t_macro), cfg.mc.n_particles,
            repr(res.killed_fraction), repr(total_mass(res.density)), res.n_outside,
        ])
        (out / f"mc_density_{i}.csv").write_text(harness.density_csv(res.density))
    (out / "simulate.csv").write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_kernel_table(args) -> int:
    cfg = _load(args)
    if cfg.kernel_table is None:
        raise harness.ConfigError("kernel-table needs a 'kernel_table' section with t, x, y lists")
    if any(t <= 0 for t in cfg.kernel_table.t):
        raise harness.ConfigError("kernel_table.t values must be > 0")
    try:
        rows = harness.kernel_table_rows(cfg.params, cfg.kernel_table)
    except ParameterError as exc:
        raise harness.ConfigError(str(exc)) from None
    text = harness.kernel_table_csv(rows)
    (_out_dir(args, cfg) / "kernel_table.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telegraph-interface",
        description="Diffusion limits of a two-line telegraph process with an interface.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("converge-nokill", "L1 convergence to skew Brownian motion"),
        ("converge-kill", "L1 convergence to minimal Brownian motion"),
        ("validate-kernels", "identity checks for the analytic kernels"),
        ("simulate", "Monte Carlo ensemble histograms"),
        ("kernel-table", "tabulate skew Brownian transition densities"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--out", help="output directory (default: config 'output' or .)")
        p.add_argument("--seed", type=int, help="override mc.seed (unsigned 64-bit)")
        p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
        p.add_argument("--timing", action="store_true", help="fill the runtime_s column (output no longer byte-stable)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    handlers = {
        "converge-nokill": lambda a: cmd_converge(a, "NoKillLimit"),
        "converge-kill": lambda a: cmd_converge(a, "KillLimit"),
        "validate-kernels": cmd_validate,
        "simulate": cmd_simulate,
        "kernel-table": cmd_kernel_table,
    }
    try:
        return handlers[args.command](args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
