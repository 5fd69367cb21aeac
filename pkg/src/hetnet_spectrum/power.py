"""Alternating spectrum allocation and transmit-PSD updates.

Under a total power budget a BTS that uses only part of the band can raise
its PSD on that part. Starting from every BTS spreading its budget over the
whole band, we alternate between re-solving the spectrum allocation for the
current efficiencies and re-spreading each budget over the bandwidth the
BTS now occupies. Convergence is not guaranteed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import InstabilityError, SpectrumPartition, objective
from .optimizer import SolveReport, solve
from .topology import Deployment, RadioParams, build_efficiency_table

SPECTRUM_UPDATE = "spectrum-update"
PSD_UPDATE = "psd-update"


class ZeroBandwidthError(ValueError):
    """A BTS holds no bandwidth, so its PSD is undefined."""


@dataclass
class PowerStep:
    iteration: int
    phase: str
    objective: float
    partition: SpectrumPartition
    psd: np.ndarray


@dataclass
class PowerIterationReport:
    steps: list[PowerStep] = field(default_factory=list)
    converged: bool = False
    status: str = "ok"

    @property
    def final_psd(self) -> np.ndarray:
        return self.steps[-1].psd

    @property
    def final_partition(self) -> SpectrumPartition:
        return self.steps[-1].partition

    @property
    def objective_trace(self) -> list[float]:
        return [s.objective for s in self.steps]

    @property
    def rounds(self) -> int:
        return sum(1 for s in self.steps if s.phase == PSD_UPDATE)

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "status": self.status,
            "steps": [{"iteration": s.iteration, "phase": s.phase,
                       "objective": s.objective if np.isfinite(s.objective) else None,
                       "psd": [float(p) for p in s.psd],
                       "partition": s.partition.to_dict()} for s in self.steps],
        }


def update_psd(partition: SpectrumPartition, budget) -> np.ndarray:
    """Spread each BTS's total power evenly over the bandwidth it uses."""
    budget = np.broadcast_to(np.asarray(budget, dtype=float), (partition.k,))
    if np.any(budget <= 0):
        raise ValueError("power budgets must be positive")
    used = partition.bandwidth_per_bts()
    idle = np.flatnonzero(used <= 0)
    if idle.size:
        raise ZeroBandwidthError(f"BTS {', '.join(str(i + 1) for i in idle)} hold no bandwidth")
    return budget / used


def _safe_objective(partition, table, lam) -> float:
    try:
        return objective(partition, table, lam)
    except InstabilityError:
        return float("inf")


def alternate(deployment: Deployment, radio: RadioParams, budget, lam,
              tol: float = 1e-4, max_iters: int = 20, solver_tol: float = 1e-8) -> PowerIterationReport:
    """Alternate spectrum and PSD updates until the partition settles.

    One round is a PSD update followed by a spectrum update; the report
    holds the initial solve and then two steps per round. ``converged`` is
    set once a spectrum update moves the partition by less than ``tol`` in
    L1 distance.
    """
    lam = np.asarray(lam, dtype=float)
    budget = np.broadcast_to(np.asarray(budget, dtype=float), (deployment.k,)).copy()
    psd = budget.copy()
    table = build_efficiency_table(deployment, radio, psd)
    report = PowerIterationReport()
    sol: SolveReport = solve(table, lam, tol=solver_tol)
    if not sol.feasible:
        report.status = "infeasible"
        return report
    partition = sol.partition
    report.steps.append(PowerStep(0, SPECTRUM_UPDATE, sol.objective_value, partition, psd))
    for it in range(1, max_iters + 1):
        psd = update_psd(partition, budget)
        table = build_efficiency_table(deployment, radio, psd)
        report.steps.append(PowerStep(it, PSD_UPDATE, _safe_objective(partition, table, lam),
                                      partition, psd))
        sol = solve(table, lam, tol=solver_tol)
        if not sol.feasible:
            report.status = "infeasible"
            return report
        moved = sol.partition.l1_distance(partition)
        partition = sol.partition
        report.steps.append(PowerStep(it, SPECTRUM_UPDATE, sol.objective_value, partition, psd))
        if moved < tol:
            report.converged = True
            break
    return report
