"""Delay-minimizing spectrum partitions.

:func:`solve` grows a candidate set of BTS subsets: it minimizes the
objective over the current candidates, prices every subset by its partial
derivative, adds the ``K`` cheapest, and stops once those were already
candidates. Restricted minimization is an active-set projected Newton method
on the simplex face spanned by the candidates.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .model import (
    STABILITY_MARGIN,
    ZERO_THRESHOLD,
    InstabilityError,
    SpectrumPartition,
    objective,
    objective_gradient,
    traffic_weights,
    worst_case_rates,
)
from .topology import EfficiencyTable

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max-iterations"


class LPFailure(RuntimeError):
    """The phase-one linear program could not be solved."""


class ToleranceNotReached(RuntimeError):
    """Restricted minimization hit its iteration cap; ``partition`` is the best point found."""

    def __init__(self, partition: SpectrumPartition, gap: float, iterations: int):
        self.partition = partition
        self.gap = gap
        self.iterations = iterations
        super().__init__(f"optimality gap {gap:.3g} after {iterations} iterations")


@dataclass(frozen=True)
class Feasibility:
    """Outcome of the phase-one LP: the max-min stability slack and its witness."""

    margin: float
    partition: SpectrumPartition | None

    @property
    def feasible(self) -> bool:
        return self.partition is not None


@dataclass
class SolveReport:
    partition: SpectrumPartition | None
    rates: np.ndarray | None
    objective_value: float
    iterations: int
    objective_trace: list[float]
    status: str
    candidate_sizes: list[int] = field(default_factory=list)

    @property
    def support_size(self) -> int:
        return 0 if self.partition is None else len(self.partition.support(ZERO_THRESHOLD))

    @property
    def feasible(self) -> bool:
        return self.partition is not None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective_value if self.feasible else None,
            "iterations": self.iterations,
            "objective_trace": list(self.objective_trace),
            "candidate_sizes": list(self.candidate_sizes),
            "support_size": self.support_size,
            "rates": None if self.rates is None else [float(r) for r in self.rates],
            "partition": None if self.partition is None else self.partition.to_dict(),
        }


def _infeasible_report() -> SolveReport:
    return SolveReport(None, None, float("inf"), 0, [], INFEASIBLE)


def _all_masks(k: int) -> np.ndarray:
    return np.arange(1, 1 << k)


def find_feasible(table: EfficiencyTable, lam, candidates=None) -> Feasibility:
    """Find a strictly stable partition by maximizing the smallest rate slack.

    Solves ``max t`` subject to ``r_i - lam_i >= t``, ``sum x = 1`` and
    ``x >= 0`` with the dual simplex method, so the witness is a basic
    solution with at most ``K + 1`` nonzero segments. The problem is
    infeasible when ``t <= 0``.
    """
    lam = np.asarray(lam, dtype=float)
    masks = _all_masks(table.k) if candidates is None else np.array(sorted(candidates))
    n = len(masks)
    s = table.s[masks]  # (n, k)
    # variables: x (n), t
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-s.T, np.ones((table.k, 1))])
    a_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    bounds = [(0, None)] * n + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=-lam, A_eq=a_eq, b_eq=[1.0],
                  bounds=bounds, method="highs-ds")
    if res.status != 0:
        raise LPFailure(res.message)
    margin = float(res.x[-1])
    if margin <= STABILITY_MARGIN:
        return Feasibility(margin, None)
    x = np.clip(res.x[:n], 0.0, None)
    dense = np.zeros(1 << table.k)
    dense[masks] = x
    return Feasibility(margin, SpectrumPartition.from_dense(table.k, dense))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, n + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class _FaceProblem:
    """Objective restricted to the candidate columns of the table."""

    def __init__(self, s: np.ndarray, lam: np.ndarray, margin: float):
        self.s = s  # (n, k)
        self.lam = lam
        self.w = traffic_weights(lam)
        self.margin = margin

    def value(self, y: np.ndarray) -> float:
        slack = self.s.T @ y - self.lam
        if np.any(slack <= self.margin):
            return np.inf
        return float(np.sum(self.w / slack))

    def grad(self, y: np.ndarray) -> np.ndarray:
        slack = self.s.T @ y - self.lam
        return -(self.s @ (self.w / slack**2))

    def newton_direction(self, y: np.ndarray, free: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Newton step on the face ``{sum d = 0, d_j = 0 off free}``."""
        slack = self.s.T @ y - self.lam
        a = self.s[free]
        h = (a * (2.0 * self.w / slack**3)) @ a.T
        n = len(free)
        ridge = 1e-12 * max(np.trace(h) / n, 1e-300)
        scale = np.sqrt(np.trace(h) / n)
        kkt = np.zeros((n + 1, n + 1))
        kkt[:n, :n] = h + ridge * np.eye(n)
        kkt[:n, n] = kkt[n, :n] = scale
        # shifting g by a constant leaves d unchanged and avoids cancellation
        gf = g[free]
        rhs = np.concatenate([gf.mean() - gf, [0.0]])
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        d = sol[:n]
        return d - d.mean()


_ROUNDING = 1e3 * np.finfo(float).eps


def _armijo(problem: _FaceProblem, y, f, d, slope, max_step=1.0):
    """Backtrack from ``max_step`` along ``d``; returns (step, new point, value) or None."""
    step = max_step
    while step > 1e-16:
        y_new = y + step * d
        f_new = problem.value(y_new)
        if f_new <= f + 1e-4 * step * slope:
            return step, y_new, f_new
        step *= 0.5
    return None


def _minimize_simplex(problem: _FaceProblem, y0: np.ndarray, tol: float,
                      max_iter: int) -> tuple[np.ndarray, float, float, int]:
    """Active-set projected Newton method on the probability simplex.

    Newton steps run on the face spanned by the current support; once that
    face is (nearly) optimal, a projected-gradient step lets new coordinates
    enter. Stops when the Frank-Wolfe gap ``g.y - min(g)``, an upper bound on
    the distance to the optimal value, falls below ``tol * max(1, f)``.
    Iterates only ever decrease the objective.
    """
    y = y0.copy()
    f = problem.value(y)
    if not np.isfinite(f):
        raise ValueError("starting point is not stable")
    g = problem.grad(y)
    alpha = 1.0 / max(float(np.ptp(g)), 1e-12)
    gap = float(g @ y - g.min())
    for it in range(max_iter):
        threshold = tol * max(1.0, f)
        if gap <= threshold:
            return y, f, gap, it
        free = np.flatnonzero(y > 0)
        face_gap = float(g[free] @ y[free] - g[free].min())
        accepted = None
        if free.size > 1 and face_gap > 0.5 * threshold:
            d_free = problem.newton_direction(y, free, g)
            slope = float(g[free] @ d_free)
            if slope < 0:
                d = np.zeros_like(y)
                d[free] = d_free
                neg = d < 0
                ratios = np.full_like(y, np.inf)
                ratios[neg] = -y[neg] / d[neg]
                blocking = int(np.argmin(ratios))
                max_step = min(1.0, float(ratios[blocking]))
                accepted = _armijo(problem, y, f, d, slope, max_step)
                if accepted is None and -slope <= _ROUNDING * abs(f):
                    # decrease is below the resolution of f; take the full
                    # step if it does not measurably increase f
                    y_try = y + max_step * d
                    f_try = problem.value(y_try)
                    if f_try <= f + 8 * np.finfo(float).eps * abs(f):
                        accepted = (max_step, y_try, f_try)
                if accepted is not None and accepted[0] == ratios[blocking]:
                    accepted[1][blocking] = 0.0
        if accepted is None:
            for _ in range(60):
                d = project_simplex(y - alpha * g) - y
                slope = float(g @ d)
                if slope >= 0:
                    break
                accepted = _armijo(problem, y, f, d, slope)
                if accepted is not None:
                    break
                alpha *= 0.1
            if accepted is None:
                break
        _, y_new, _ = accepted
        y_new = np.maximum(y_new, 0.0)
        y_new /= y_new.sum()
        f_new = problem.value(y_new)
        if not f_new <= f + 8 * np.finfo(float).eps * abs(f):
            break
        g_new = problem.grad(y_new)
        sv, gv = y_new - y, g_new - g
        sy = float(sv @ gv)
        if sy > 0:
            alpha = min(1e12, max(1e-12, float(sv @ sv) / sy))
        y, f, g = y_new, f_new, g_new
        gap = float(g @ y - g.min())
    return y, f, gap, it + 1


def solve_restricted(candidates, x0: SpectrumPartition, table: EfficiencyTable, lam,
                     tol: float = 1e-8, max_iter: int = 10_000,
                     margin: float = STABILITY_MARGIN) -> SpectrumPartition:
    """Minimize the objective over partitions supported inside ``candidates``.

    ``x0`` must be stable and supported inside ``candidates``. The result is
    within ``tol`` (relative to ``max(1, objective)``) of the restricted
    optimum and never worse than ``x0``.

    Raises
    ------
    ToleranceNotReached
        If ``max_iter`` iterations do not close the gap; the exception carries
        the best partition found.
    """
    lam = np.asarray(lam, dtype=float)
    masks = np.array(sorted(candidates))
    if masks.size == 0 or masks.min() < 1 or masks.max() >= 1 << table.k:
        raise ValueError("candidates must be nonempty BTS subsets")
    outside = set(x0.x) - set(masks.tolist())
    if outside:
        raise ValueError(f"x0 uses subsets outside the candidate set: {sorted(outside)}")
    y0 = x0.dense()[masks]
    problem = _FaceProblem(table.s[masks], lam, margin)
    y, f, gap, iters = _minimize_simplex(problem, y0, tol, max_iter)
    dense = np.zeros(1 << table.k)
    dense[masks] = y
    result = SpectrumPartition.from_dense(table.k, dense)
    if gap > tol * max(1.0, f):
        raise ToleranceNotReached(result, gap, iters)
    return result


def _report(partition: SpectrumPartition, table: EfficiencyTable, lam, trace, iterations,
            status, sizes=()) -> SolveReport:
    rates = worst_case_rates(partition, table)
    return SolveReport(partition, rates, objective(partition, table, lam), iterations,
                       list(trace), status, list(sizes))


def _restricted_or_best(candidates, x0, table, lam, tol, max_inner):
    try:
        return solve_restricted(candidates, x0, table, lam, tol, max_inner)
    except ToleranceNotReached as exc:
        log.warning("restricted solve stopped early: %s", exc)
        return exc.partition


def solve(table: EfficiencyTable, lam, tol: float = 1e-8, max_outer_iters: int = 50,
          max_inner_iters: int = 10_000) -> SolveReport:
    """Minimize the conservative delay over all ``2**K - 1`` sharing combinations.

    Starts from full reuse when that is stable, else from the phase-one LP
    witness. Each pass minimizes over the candidate set, computes the partial
    derivative for every subset, and adds the ``K`` subsets with the smallest
    derivatives (ties broken by bitmask). The loop ends when those ``K``
    subsets were all candidates already.
    """
    lam = np.asarray(lam, dtype=float)
    k = table.k
    if lam.shape != (k,):
        raise ValueError(f"need {k} arrival rates, got shape {lam.shape}")
    x0 = SpectrumPartition.full_reuse(k)
    try:
        objective(x0, table, lam)
    except InstabilityError:
        feas = find_feasible(table, lam)
        if not feas.feasible:
            return _infeasible_report()
        x0 = feas.partition

    masks = _all_masks(k)
    candidates = set(x0.x)
    previous: set[int] = set()
    newest = set(masks.tolist())
    trace = [objective(x0, table, lam)]
    sizes = []
    x = x0
    iterations = 0
    while not newest <= previous:
        if iterations == max_outer_iters:
            return _report(x, table, lam, trace, iterations, MAX_ITERATIONS, sizes)
        iterations += 1
        previous = set(candidates)
        sizes.append(len(previous))
        x = _restricted_or_best(previous, x0, table, lam, tol, max_inner_iters)
        trace.append(objective(x, table, lam))
        grad = objective_gradient(x, table, lam)[masks]
        order = np.argsort(grad, kind="stable")[:k]
        newest = set(masks[order].tolist())
        candidates |= newest
        x0 = x
    return _report(x, table, lam, trace, iterations, OPTIMAL, sizes)


def solve_orthogonal_baseline(table: EfficiencyTable, lam, tol: float = 1e-8,
                              max_inner_iters: int = 10_000) -> SolveReport:
    """Best partition in which no two BTS's share spectrum."""
    singletons = [1 << i for i in range(table.k)]
    feas = find_feasible(table, lam, singletons)
    if not feas.feasible:
        return _infeasible_report()
    x = _restricted_or_best(singletons, feas.partition, table, lam, tol, max_inner_iters)
    return _report(x, table, lam, [objective(feas.partition, table, lam),
                                   objective(x, table, lam)], 1, OPTIMAL, [table.k])


def full_reuse_baseline(table: EfficiencyTable, lam) -> SolveReport:
    """Every BTS transmits on the whole band."""
    x = SpectrumPartition.full_reuse(table.k)
    try:
        value = objective(x, table, lam)
    except InstabilityError:
        return _infeasible_report()
    return SolveReport(x, worst_case_rates(x, table), value, 0, [value], OPTIMAL, [1])
