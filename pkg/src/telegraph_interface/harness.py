"""Experiment configuration, convergence runs and report files."""

from __future__ import annotations

import csv
import difflib
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import erf

from . import kernels
from .kinetic import simulate_ensemble
from .model import (
    Grid,
    InterfaceParams,
    ParameterError,
    ScaledModel,
    TwoLineDensity,
    from_line,
    l1_distance,
    project_P,
    to_line,
    total_mass,
    validate,
)
from .transport import SolverConfig, TransportLedger, evolve_G_epsilon

log = logging.getLogger(__name__)

MODES = ("NoKillLimit", "KillLimit", "KernelValidation")
CSV_HEADER = [
    "epsilon",
    "t",
    "l1_error_pde",
    "l1_error_mc",
    "mass_solver",
    "mass_limit",
    "killed_fraction",
    "edge_leakage",
    "runtime_s",
]
KERNEL_TABLE_HEADER = ["t", "x", "y", "gamma_value", "side"]
LEAKAGE_WARN = 1e-6


class ConfigError(ValueError):
    """Malformed or inadmissible experiment configuration (exit code 2)."""


# --- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class GaussianInit:
    center: float = -2.0
    width: float = 0.5
    line: str = "plus"

    def density(self, grid: Grid) -> TwoLineDensity:
        cdf = 0.5 * (1.0 + erf((grid.edges - self.center) / (self.width * math.sqrt(2.0))))
        cells = np.diff(cdf) / grid.dx
        zero = np.zeros_like(cells)
        rows = {
            "plus": [cells, zero],
            "minus": [zero, cells],
            "both": [0.5 * cells, 0.5 * cells],
        }[self.line]
        return TwoLineDensity(grid, np.stack(rows))


@dataclass(frozen=True)
class MCConfig:
    n_particles: int
    seed: int = 0
    coarsen: int = 1


@dataclass(frozen=True)
class KernelTableConfig:
    t: tuple
    x: tuple
    y: tuple


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    params: InterfaceParams
    epsilons: tuple = (0.4, 0.2, 0.1, 0.05)
    t_macro: float = 1.0
    grid: Grid = Grid(8.0, 4096)
    initial: GaussianInit = GaussianInit()
    solver: SolverConfig = SolverConfig()
    mc: MCConfig | None = None
    kernel_table: KernelTableConfig | None = None
    export_densities: bool = False
    final_error_max: float | None = None
    output: str | None = None

    def to_dict(self) -> dict:
        d = {
            "mode": self.mode,
            "params": self.params.as_dict(),
            "epsilons": list(self.epsilons),
            "t_macro": self.t_macro,
            "grid": {"half_width": self.grid.half_width, "n_cells": self.grid.n_cells},
            "initial": asdict(self.initial),
            "solver": {"cfl": self.solver.cfl, "splitting": self.solver.splitting},
            "export_densities": self.export_densities,
        }
        if self.mc is not None:
            d["mc"] = asdict(self.mc)
        if self.kernel_table is not None:
            d["kernel_table"] = {k: list(v) for k, v in asdict(self.kernel_table).items()}
        if self.final_error_max is not None:
            d["final_error_max"] = self.final_error_max
        if self.output is not None:
            d["output"] = self.output
        return d


_TOP_KEYS = {
    "mode", "params", "epsilons", "t_macro", "grid", "initial", "solver", "mc",
    "kernel_table", "export_densities", "final_error_max", "output",
}
_SECTION_KEYS = {
    "params": {"p", "p_prime", "q", "q_prime"},
    "grid": {"half_width", "n_cells"},
    "initial": {"center", "width", "line"},
    "solver": {"cfl", "splitting"},
    "mc": {"n_particles", "seed", "coarsen"},
    "kernel_table": {"t", "x", "y"},
}


def _check_keys(section: str, got: dict, allowed: set):
    if not isinstance(got, dict):
        raise ConfigError(f"'{section}' must be a JSON object")
    for key in got:
        if key not in allowed:
            hint = difflib.get_close_matches(key, sorted(allowed), n=1, cutoff=0.5)
            where = f" in '{section}'" if section != "config" else ""
            msg = f"unknown key '{key}'{where}"
            if hint:
                msg += f"; did you mean '{hint[0]}'?"
            raise ConfigError(msg)


def degenerate_killing_message(params: InterfaceParams) -> str | None:
    """Why a killing configuration has no minimal-BM limit, or None if it has one."""
    if params.gamma_kill > 0:
        return None
    if params.p0 == 0 and params.p == 0 and params.q0 > 0:
        return (
            "gamma_kill = 0: with p0 = p = 0 every particle approaching from the left "
            "is reflected and can never filter to the right half-axis to be killed there, "
            "so the minimal Brownian motion is not a good approximation"
        )
    if params.q0 == 0 and params.q == 0 and params.p0 > 0:
        return (
            "gamma_kill = 0: with q0 = q = 0 every particle approaching from the right "
            "is reflected and can never filter to the left half-axis to be killed there, "
            "so the minimal Brownian motion is not a good approximation"
        )
    return "gamma_kill = 0: no effective killing at the interface; use NoKillLimit"


def check_hypotheses(mode: str, params: InterfaceParams):
    if mode == "NoKillLimit":
        if not params.no_kill:
            raise ConfigError(
                f"NoKillLimit needs p+p'=1 and q+q'=1 (got p0={params.p0!r}, q0={params.q0!r})"
            )
        if not params.p + params.q > 0:
            raise ConfigError("NoKillLimit needs p+q>0")
    elif mode == "KillLimit":
        msg = degenerate_killing_message(params)
        if msg:
            raise ConfigError(msg)


def config_from_dict(raw: dict) -> ExperimentConfig:
    _check_keys("config", raw, _TOP_KEYS)
    for section, allowed in _SECTION_KEYS.items():
        if raw.get(section) is not None:
            _check_keys(section, raw[section], allowed)
    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"'mode' must be one of {', '.join(MODES)}; got {mode!r}")
    if "params" not in raw:
        raise ConfigError("missing 'params'")
    praw = raw["params"]
    try:
        p = float(praw["p"])
        q = float(praw["q"])
        params = validate(
            p, float(praw.get("p_prime", 1.0 - p)), q, float(praw.get("q_prime", 1.0 - q))
        )
    except KeyError as exc:
        raise ConfigError(f"missing params key {exc}") from None
    except (ParameterError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

    try:
        epsilons = tuple(float(e) for e in raw.get("epsilons", (0.4, 0.2, 0.1, 0.05)))
        t_macro = float(raw.get("t_macro", 1.0))
        g = raw.get("grid") or {}
        grid = Grid(float(g.get("half_width", 8.0)), int(g.get("n_cells", 4096)))
        initial = GaussianInit(**(raw.get("initial") or {}))
        if initial.line not in ("plus", "minus", "both"):
            raise ConfigError("initial.line must be 'plus', 'minus' or 'both'")
        if not initial.width > 0:
            raise ConfigError("initial.width must be > 0")
        solver = SolverConfig(**(raw.get("solver") or {}))
        mc = raw.get("mc")
        mc = MCConfig(**mc) if mc is not None else None
        kt = raw.get("kernel_table")
        kt = KernelTableConfig(*(tuple(float(v) for v in kt[k]) for k in ("t", "x", "y"))) if kt else None
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None

    if not epsilons:
        raise ConfigError("'epsilons' must be non-empty")
    if any(e <= 0 for e in epsilons):
        raise ConfigError("all epsilons must be > 0")
    if any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ConfigError("'epsilons' must be strictly decreasing")
    if t_macro < 0:
        raise ConfigError("'t_macro' must be >= 0")
    if mc is not None:
        if mc.n_particles < 1:
            raise ConfigError("mc.n_particles must be >= 1")
        if mc.coarsen < 1 or grid.n_cells % (2 * mc.coarsen):
            raise ConfigError("mc.coarsen must divide n_cells/2")
    check_hypotheses(mode, params)
    final = raw.get("final_error_max")
    return ExperimentConfig(
        mode=mode,
        params=params,
        epsilons=epsilons,
        t_macro=t_macro,
        grid=grid,
        initial=initial,
        solver=solver,
        mc=mc,
        kernel_table=kt,
        export_densities=bool(raw.get("export_densities", False)),
        final_error_max=None if final is None else float(final),
        output=raw.get("output"),
    )


def parse_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(raw)


# --- convergence experiments ------------------------------------------------


@dataclass
class ConvergenceRow:
    epsilon: float
    t: float
    l1_error_pde: float
    l1_error_mc: float | None
    mass_solver: float
    mass_limit: float
    killed_fraction: float
    edge_leakage: float
    runtime_s: float | None = None


@dataclass
class ConvergenceReport:
    mode: str
    config: ExperimentConfig
    rows: list
    warnings: list = field(default_factory=list)
    densities: dict = field(default_factory=dict)

    @property
    def errors(self) -> list:
        return [r.l1_error_pde for r in self.rows]

    def strictly_decreasing(self) -> bool:
        e = self.errors
        return all(b < a for a, b in zip(e, e[1:]))

    def passed(self) -> bool:
        ok = self.strictly_decreasing()
        if self.config.final_error_max is not None:
            ok = ok and self.errors[-1] < self.config.final_error_max
        return ok


def limit_density(d0: TwoLineDensity, t: float, params: InterfaceParams, mode: str) -> TwoLineDensity:
    """Limit semigroup applied to P d0, as a two-line density in L0."""
    rho0 = to_line(project_P(d0))
    if mode == "NoKillLimit":
        rho = kernels.skew_density_evolve(rho0, t, params)
    else:
        rho = kernels.minimal_density_evolve(rho0, t)
    return from_line(rho)


def coarsen(d: TwoLineDensity, factor: int) -> TwoLineDensity:
    if factor == 1:
        return d
    g = Grid(d.grid.half_width, d.grid.n_cells // factor)
    return TwoLineDensity(g, d.values.reshape(2, g.n_cells, factor).mean(axis=2))


def _run_one(config: ExperimentConfig, eps: float, d0, limit, seed, threads, timing):
    start = time.perf_counter()
    ledger = TransportLedger()
    sol = evolve_G_epsilon(d0, eps, config.t_macro, config.params, config.solver, ledger)
    l1_pde = l1_distance(sol, limit)
    l1_mc = None
    killed = ledger.killed / total_mass(d0)
    if config.mc is not None:
        coarse_grid = coarsen(d0, config.mc.coarsen).grid
        ens = simulate_ensemble(
            d0,
            config.mc.n_particles,
            ScaledModel(eps, t_macro=config.t_macro),
            config.params,
            coarse_grid,
            seed,
            threads,
        )
        mc_density = ens.density.with_values(ens.density.values * total_mass(d0))
        l1_mc = l1_distance(mc_density, coarsen(limit, config.mc.coarsen))
        killed = ens.killed_fraction
    runtime = time.perf_counter() - start
    row = ConvergenceRow(
        epsilon=eps,
        t=config.t_macro,
        l1_error_pde=l1_pde,
        l1_error_mc=l1_mc,
        mass_solver=total_mass(sol),
        mass_limit=total_mass(limit),
        killed_fraction=killed,
        edge_leakage=ledger.edge_outflow,
        runtime_s=runtime if timing else None,
    )
    log.info("eps=%g l1=%.6g (%.2fs)", eps, l1_pde, runtime)
    return row, sol


def predicted_tail_mass(config: ExperimentConfig) -> float:
    """Twice the mass of N(center, width^2 + t) outside [-L, L].

    The factor two covers the skew kernel, which can double the Gaussian
    weight on one side of the interface.
    """
    sd = math.sqrt(config.initial.width**2 + config.t_macro)
    L, c = config.grid.half_width, config.initial.center
    tails = 0.5 * math.erfc((L - c) / (sd * math.sqrt(2.0))) + 0.5 * math.erfc((L + c) / (sd * math.sqrt(2.0)))
    return 2.0 * tails


def _leakage_warnings(config: ExperimentConfig, rows) -> list:
    out = []
    tail = predicted_tail_mass(config)
    if tail > LEAKAGE_WARN:
        out.append(
            f"half_width={config.grid.half_width} leaves a predicted tail mass {tail:.3g} "
            f"outside the grid (threshold {LEAKAGE_WARN})"
        )
    for row in rows:
        if row.edge_leakage > LEAKAGE_WARN:
            out.append(f"edge leakage {row.edge_leakage:.3g} at eps={row.epsilon} exceeds {LEAKAGE_WARN}")
    return out


def run_convergence(config: ExperimentConfig, seed=None, threads: int = 1, timing: bool = False):
    check_hypotheses(config.mode, config.params)
    if config.mode == "KernelValidation":
        raise ConfigError("convergence runs need mode NoKillLimit or KillLimit")
    if seed is None:
        seed = config.mc.seed if config.mc is not None else 0
    d0 = config.initial.density(config.grid)
    limit = limit_density(d0, config.t_macro, config.params, config.mode)
    jobs = [(eps, d0, limit, seed, 1, timing) for eps in config.epsilons]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: _run_one(config, *j), jobs))
    else:
        results = [_run_one(config, *j) for j in jobs]
    rows = [r for r, _ in results]
    report = ConvergenceReport(config.mode, config, rows)
    report.warnings = _leakage_warnings(config, rows)
    for w in report.warnings:
        log.warning(w)
    if config.export_densities:
        report.densities = {
            "limit": limit,
            **{f"eps_{i}": sol for i, (_, sol) in enumerate(results)},
        }
    return report


def run_convergence_no_kill(config: ExperimentConfig, **kw) -> ConvergenceReport:
    if config.mode != "NoKillLimit":
        raise ConfigError("run_convergence_no_kill needs mode NoKillLimit")
    return run_convergence(config, **kw)


def run_convergence_kill(config: ExperimentConfig, **kw) -> ConvergenceReport:
    if config.mode != "KillLimit":
        raise ConfigError("run_convergence_kill needs mode KillLimit")
    return run_convergence(config, **kw)


# --- output -----------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def report_csv(report: ConvergenceReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.rows:
        w.writerow([_fmt(getattr(r, k)) for k in CSV_HEADER])
    return buf.getvalue()


def report_summary(report: ConvergenceReport) -> dict:
    return {
        "mode": report.mode,
        "config": report.config.to_dict(),
        "epsilons": [r.epsilon for r in report.rows],
        "l1_error_pde": report.errors,
        "strictly_decreasing": report.strictly_decreasing(),
        "final_error": report.errors[-1] if report.rows else None,
        "passed": report.passed(),
        "warnings": report.warnings,
    }


def density_csv(d: TwoLineDensity) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "density_plus", "density_minus"])
    for x, u, v in zip(d.grid.centers, d.values[0], d.values[1]):
        w.writerow([repr(float(x)), repr(float(u)), repr(float(v))])
    return buf.getvalue()


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def emit_report(report: ConvergenceReport, out_dir) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.csv", out / "summary.json"]
    written[0].write_text(report_csv(report))
    written[1].write_text(_dump_json(report_summary(report)))
    for name, d in report.densities.items():
        path = out / f"density_{name}.csv"
        path.write_text(density_csv(d))
        written.append(path)
    return written


def kernel_table_rows(params, table: KernelTableConfig) -> list:
    rows = []
    for t in table.t:
        for x in table.x:
            side = "plus" if x > 0 else ("minus" if x < 0 else "zero")
            for y in table.y:
                value = float(kernels.gamma(t, x, y, params))
                rows.append((t, x, y, value, side))
    return rows


def kernel_table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(KERNEL_TABLE_HEADER)
    for t, x, y, value, side in rows:
        w.writerow([repr(float(t)), repr(float(x)), repr(float(y)), repr(value), side])
    return buf.getvalue()
