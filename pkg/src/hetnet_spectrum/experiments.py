"""Reproducible experiment drivers: load sweeps, partition plots, power runs."""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .model import InstabilityError, SpectrumPartition
from .optimizer import (
    LPFailure,
    SolveReport,
    full_reuse_baseline,
    solve,
    solve_orthogonal_baseline,
)
from .power import alternate
from .queuesim import SimConfig, simulate
from .topology import (
    Deployment,
    EfficiencyTable,
    RadioParams,
    build_efficiency_table,
    drop_scenario,
    generate_hex_grid,
    members_of,
)

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
ORTHOGONAL = "orthogonal"
FULL_REUSE = "full-reuse"
SCHEMES = (OPTIMAL, ORTHOGONAL, FULL_REUSE)

SWEEP_COLUMNS = ["load", "scheme", "analytic_delay", "simulated_delay", "ci95",
                 "support_size", "status"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    area_width_m: float = 100.0
    area_height_m: float = 100.0
    spacing_m: float = 20.0
    num_bts: int = 7
    seed: int = 0
    radio: RadioParams = field(default_factory=RadioParams)
    traffic_mode: str = "uniform"  # or "proportional" to hexagons served
    load_basis: str = "per-bts"  # or "total"
    loads: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
    schemes: tuple[str, ...] = SCHEMES
    sim: SimConfig = field(default_factory=lambda: SimConfig(horizon=2e4, replications=10))
    power_budget: float = 1.0
    power_tol: float = 1e-4
    power_max_iters: int = 20
    solver_tol: float = 1e-8
    output: str | None = None

    def __post_init__(self):
        self.loads = tuple(float(v) for v in self.loads)
        self.schemes = tuple(self.schemes)
        if any(b <= a for a, b in zip(self.loads, self.loads[1:])):
            raise ConfigError("loads must be strictly increasing")
        if any(v <= 0 for v in self.loads):
            raise ConfigError("loads must be positive")
        if not self.schemes or any(s not in SCHEMES for s in self.schemes):
            raise ConfigError(f"schemes must be a nonempty subset of {SCHEMES}")
        if self.traffic_mode not in ("uniform", "proportional"):
            raise ConfigError(f"unknown traffic_mode {self.traffic_mode!r}")
        if self.load_basis not in ("per-bts", "total"):
            raise ConfigError(f"unknown load_basis {self.load_basis!r}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        data = dict(data)
        try:
            if "radio" in data:
                radio = dict(data["radio"])
                if isinstance(radio.get("tx_psd"), list):
                    radio["tx_psd"] = tuple(radio["tx_psd"])
                data["radio"] = RadioParams(**radio)
            if "sim" in data:
                data["sim"] = SimConfig(**data["sim"])
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["loads"] = list(self.loads)
        out["schemes"] = list(self.schemes)
        return out


@dataclass
class Scenario:
    deployment: Deployment
    table: EfficiencyTable
    seed: int  # seed that produced an orphan-free drop


def build_scenario(config: ExperimentConfig) -> Scenario:
    grid = generate_hex_grid(config.area_width_m, config.area_height_m, config.spacing_m)
    deployment, used = drop_scenario(grid, config.num_bts, config.seed)
    if used != config.seed:
        log.info("seed %d orphaned a BTS; using seed %d", config.seed, used)
    return Scenario(deployment, build_efficiency_table(deployment, config.radio), used)


def arrival_rates(config: ExperimentConfig, deployment: Deployment, load: float) -> np.ndarray:
    """Per-BTS arrival rates for a nominal average load."""
    k = deployment.k
    per_bts = load / k if config.load_basis == "total" else load
    if config.traffic_mode == "uniform":
        return np.full(k, per_bts)
    served = deployment.served_weight()
    return per_bts * k * served / served.sum()


def solve_scheme(scheme: str, table: EfficiencyTable, lam, tol: float = 1e-8) -> SolveReport:
    if scheme == OPTIMAL:
        return solve(table, lam, tol=tol)
    if scheme == ORTHOGONAL:
        return solve_orthogonal_baseline(table, lam, tol=tol)
    if scheme == FULL_REUSE:
        return full_reuse_baseline(table, lam)
    raise ConfigError(f"unknown scheme {scheme!r}")


def _fmt(value) -> str:
    return "" if value is None else f"{value:.9g}"


@dataclass
class SweepRow:
    load: float
    scheme: str
    analytic_delay: float | None
    simulated_delay: float | None
    ci95: float | None
    support_size: int | None
    status: str

    def cells(self) -> list[str]:
        return [_fmt(self.load), self.scheme, _fmt(self.analytic_delay),
                _fmt(self.simulated_delay), _fmt(self.ci95),
                "" if self.support_size is None else str(self.support_size), self.status]


def sweep_point(config: ExperimentConfig, scenario: Scenario, load_index: int,
                scheme: str, simulate_point: bool = True) -> SweepRow:
    load = config.loads[load_index]
    lam = arrival_rates(config, scenario.deployment, load)
    try:
        rep = solve_scheme(scheme, scenario.table, lam, config.solver_tol)
    except (LPFailure, InstabilityError, np.linalg.LinAlgError) as exc:
        return SweepRow(load, scheme, None, None, None, None, f"error: {exc}")
    if not rep.feasible:
        return SweepRow(load, scheme, None, None, None, None, "infeasible")
    if not simulate_point:
        return SweepRow(load, scheme, rep.objective_value, None, None, rep.support_size, "ok")
    seed = int(np.random.SeedSequence([config.sim.seed, load_index, SCHEMES.index(scheme)])
               .generate_state(1, dtype=np.uint32)[0])
    stats = simulate(scenario.table, rep.partition, lam, dataclasses.replace(config.sim, seed=seed))
    status = "diverged" if stats.diverged else "ok"
    return SweepRow(load, scheme, rep.objective_value, stats.aggregate_sojourn,
                    stats.aggregate_ci, rep.support_size, status)


def run_sweep(config: ExperimentConfig, scenario: Scenario | None = None,
              simulate_points: bool = True) -> list[SweepRow]:
    """Solve (and simulate) every scheme at every load, in (load, scheme) order."""
    scenario = scenario or build_scenario(config)
    return [sweep_point(config, scenario, li, scheme, simulate_points)
            for li in range(len(config.loads)) for scheme in config.schemes]


def rows_to_csv(rows: list[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow(row.cells())
    return buf.getvalue()


def render_partition(partition: SpectrumPartition, width: int = 60) -> str:
    """Text picture of a partition: one row per BTS, one column block per segment.

    Segments appear in bitmask order with widths proportional to their
    bandwidth; ``#`` marks the BTS's transmitting on a segment.
    """
    segments = list(partition.x.items())
    cols = [max(5, round(v * width)) for _, v in segments]
    header = "segment  " + "|".join(f"{b:<{c}}" for (b, _), c in zip(segments, cols))
    widths = "width    " + "|".join(f"{v:<{c}.3f}" for (_, v), c in zip(segments, cols))
    lines = [header, widths]
    for i in range(partition.k):
        cells = ["#" * c if i in members_of(b) else "." * c for (b, _), c in zip(segments, cols)]
        lines.append(f"BTS {i + 1:<4} " + "|".join(cells))
    lines.append(f"{len(segments)} segments for {partition.k} BTS's")
    return "\n".join(lines)


def show_partition(config: ExperimentConfig, load: float,
                   scenario: Scenario | None = None) -> str:
    scenario = scenario or build_scenario(config)
    lam = arrival_rates(config, scenario.deployment, load)
    rep = solve(scenario.table, lam, tol=config.solver_tol)
    if not rep.feasible:
        return f"load {load:g}: infeasible"
    return f"load {load:g}: objective {rep.objective_value:.6g}\n" + render_partition(rep.partition)


def run_power(config: ExperimentConfig, load: float, scenario: Scenario | None = None):
    """Run the power/spectrum alternation and return ``(report, csv_text)``."""
    scenario = scenario or build_scenario(config)
    lam = arrival_rates(config, scenario.deployment, load)
    report = alternate(scenario.deployment, config.radio, config.power_budget, lam,
                       tol=config.power_tol, max_iters=config.power_max_iters,
                       solver_tol=config.solver_tol)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "iteration", "phase", "objective", "support_size"])
    for n, step in enumerate(report.steps):
        writer.writerow([n, step.iteration, step.phase,
                         _fmt(step.objective) if np.isfinite(step.objective) else "",
                         len(step.partition.support())])
    writer.writerow(["converged", str(report.converged).lower(), report.status, "", ""])
    return report, buf.getvalue()
