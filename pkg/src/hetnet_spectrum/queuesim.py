"""Simulation of the coupled (interactive) BTS queues.

Each BTS is a FCFS queue with Poisson arrivals and unit-mean exponential
packets. While a set ``A`` of BTS's is backlogged, BTS ``i`` serves at
``r_i(A) = sum_B x[B] s_i(B & A)``, so a queue's speed depends on which
neighbours are currently idle. The chain is simulated exactly, either with
competing exponential clocks or by uniformization against a constant
dominating rate.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats

from .model import SpectrumPartition, objective, rates_all_active_sets
from .topology import EfficiencyTable

EVENT = "event"
UNIFORMIZATION = "uniformization"


@dataclass(frozen=True)
class SimConfig:
    horizon: float = 1e5
    warmup: float | None = None  # default 1% of horizon
    seed: int = 0
    replications: int = 10
    max_packets: int = 1_000_000
    method: str = EVENT

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 0 <= self.warmup_time < self.horizon:
            raise ValueError("warmup must lie in [0, horizon)")
        if self.method not in (EVENT, UNIFORMIZATION):
            raise ValueError(f"unknown method {self.method!r}")
        if self.max_packets < 1:
            raise ValueError("max_packets must be positive")

    @property
    def warmup_time(self) -> float:
        return 0.01 * self.horizon if self.warmup is None else float(self.warmup)

    def replication_seeds(self) -> list[int]:
        children = np.random.SeedSequence(self.seed).spawn(self.replications)
        return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


@dataclass
class SimulationStats:
    """Replication means and 95% confidence half-widths.

    ``mean_sojourn`` and ``aggregate_sojourn`` come from Little's law applied
    to time-averaged queue lengths; the ``packet_*`` fields tally the sojourn
    of every packet that arrived after warm-up and left before the horizon.
    """

    lam: np.ndarray
    mean_queue_length: np.ndarray
    mean_sojourn: np.ndarray
    mean_sojourn_ci: np.ndarray
    aggregate_sojourn: float
    aggregate_ci: float
    packet_sojourn: np.ndarray
    packet_aggregate_sojourn: float
    packet_aggregate_ci: float
    active_fraction: np.ndarray
    replications: int
    diverged: bool = False
    per_replication: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def to_dict(self) -> dict:
        def arr(a):
            return [float(v) for v in a]
        return {
            "lambda": arr(self.lam),
            "mean_queue_length": arr(self.mean_queue_length),
            "mean_sojourn": arr(self.mean_sojourn),
            "mean_sojourn_ci95": arr(self.mean_sojourn_ci),
            "aggregate_sojourn": float(self.aggregate_sojourn),
            "aggregate_ci95": float(self.aggregate_ci),
            "packet_sojourn": arr(self.packet_sojourn),
            "packet_aggregate_sojourn": float(self.packet_aggregate_sojourn),
            "packet_aggregate_ci95": float(self.packet_aggregate_ci),
            "active_fraction": arr(self.active_fraction),
            "replications": self.replications,
            "diverged": self.diverged,
        }

    def to_csv(self) -> str:
        """One row per BTS plus an ``all`` row with the aggregate."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bts", "lambda", "mean_queue_length", "mean_sojourn", "ci95",
                         "packet_sojourn", "active_fraction"])
        for i in range(len(self.lam)):
            writer.writerow([i + 1, f"{self.lam[i]:.9g}", f"{self.mean_queue_length[i]:.9g}",
                             f"{self.mean_sojourn[i]:.9g}", f"{self.mean_sojourn_ci[i]:.9g}",
                             f"{self.packet_sojourn[i]:.9g}", f"{self.active_fraction[i]:.9g}"])
        writer.writerow(["all", f"{self.lam.sum():.9g}", f"{self.mean_queue_length.sum():.9g}",
                         f"{self.aggregate_sojourn:.9g}", f"{self.aggregate_ci:.9g}",
                         f"{self.packet_aggregate_sojourn:.9g}", ""])
        return buf.getvalue()


@numba.njit(cache=True)
def _simulate_chain(rates, lam, horizon, warmup, seed, max_packets, uniformize):
    """One replication; returns per-BTS accumulators and a divergence flag.

    ``rates[A, i]`` is the service rate of BTS ``i`` under active set ``A``.
    """
    np.random.seed(seed)
    k = lam.shape[0]
    lam_total = lam.sum()
    peak = 0.0
    if uniformize:
        for i in range(k):
            best = 0.0
            for a in range(rates.shape[0]):
                if rates[a, i] > best:
                    best = rates[a, i]
            peak += best
    bound = lam_total + peak

    cap = 64
    arrivals = np.empty((k, cap))
    head = np.zeros(k, dtype=np.int64)
    q = np.zeros(k, dtype=np.int64)
    area = np.zeros(k)
    busy = np.zeros(k)
    soj_sum = np.zeros(k)
    soj_n = np.zeros(k)
    active = 0
    total_q = 0
    t = 0.0
    diverged = False

    while True:
        rate = bound
        if not uniformize:
            rate = lam_total
            for i in range(k):
                if q[i] > 0:
                    rate += rates[active, i]
        dt = np.random.exponential(1.0 / rate)
        t_next = t + dt
        lo = t if t > warmup else warmup
        hi = t_next if t_next < horizon else horizon
        if hi > lo:
            for i in range(k):
                area[i] += q[i] * (hi - lo)
                if q[i] > 0:
                    busy[i] += hi - lo
        if t_next >= horizon:
            break
        t = t_next

        u = np.random.random() * rate
        event = -1
        departure = False
        acc = 0.0
        for i in range(k):
            acc += lam[i]
            if u < acc:
                event = i
                break
        if event < 0:
            for i in range(k):
                if q[i] > 0:
                    acc += rates[active, i]
                    if u < acc:
                        event = i
                        departure = True
                        break
        if event < 0:
            continue  # self-loop of the uniformized chain

        i = event
        if departure:
            arrived = arrivals[i, head[i]]
            head[i] = (head[i] + 1) % cap
            q[i] -= 1
            total_q -= 1
            if q[i] == 0:
                active &= ~(1 << i)
            if arrived >= warmup:
                soj_sum[i] += t - arrived
                soj_n[i] += 1
        else:
            if q[i] == cap:
                new_cap = 2 * cap
                grown = np.empty((k, new_cap))
                for j in range(k):
                    for m in range(q[j]):
                        grown[j, m] = arrivals[j, (head[j] + m) % cap]
                    head[j] = 0
                arrivals = grown
                cap = new_cap
            arrivals[i, (head[i] + q[i]) % cap] = t
            q[i] += 1
            total_q += 1
            active |= 1 << i
            if total_q > max_packets:
                diverged = True
                break
    measured = (t if diverged else horizon) - warmup
    return area, busy, soj_sum, soj_n, measured, diverged


def _ci95(samples: np.ndarray, axis=0) -> np.ndarray:
    n = samples.shape[axis]
    if n < 2:
        return np.full(np.delete(samples.shape, axis), np.inf) if samples.ndim > 1 else np.inf
    sd = samples.std(axis=axis, ddof=1)
    return stats.t.ppf(0.975, n - 1) * sd / np.sqrt(n)


def simulate_rates(rates: np.ndarray, lam, config: SimConfig = SimConfig()) -> SimulationStats:
    """Simulate queues whose service rates are given per active set.

    Parameters
    ----------
    rates : ndarray, shape (2**K, K)
        ``rates[A, i]`` is the service rate of BTS ``i`` when the backlogged
        BTS's are the bitmask ``A``.
    lam : array_like, shape (K,)
        Poisson arrival rates.
    config : SimConfig
    """
    lam = np.asarray(lam, dtype=float)
    rates = np.ascontiguousarray(rates, dtype=float)
    k = lam.size
    if rates.shape != (1 << k, k):
        raise ValueError(f"rates must have shape {(1 << k, k)}, got {rates.shape}")
    if np.any(lam <= 0):
        raise ValueError("arrival rates must be positive")
    warmup = config.warmup_time
    lengths, busy_frac, packet, packet_agg, diverged = [], [], [], [], False
    for seed in config.replication_seeds():
        area, busy, soj_sum, soj_n, measured, div = _simulate_chain(
            rates, lam, float(config.horizon), warmup, seed, config.max_packets,
            config.method == UNIFORMIZATION)
        diverged |= div
        lengths.append(area / measured)
        busy_frac.append(busy / measured)
        with np.errstate(invalid="ignore", divide="ignore"):
            packet.append(soj_sum / soj_n)
            packet_agg.append(soj_sum.sum() / soj_n.sum())
    lengths = np.array(lengths)
    sojourn = lengths / lam
    aggregate = lengths.sum(axis=1) / lam.sum()
    packet_agg = np.array(packet_agg)
    with warnings.catch_warnings():
        # a diverged or very short run may record no completed packets
        warnings.simplefilter("ignore", RuntimeWarning)
        packet_mean = np.nanmean(np.array(packet), axis=0)
        packet_agg_mean = float(np.nanmean(packet_agg))
    return SimulationStats(
        lam=lam,
        mean_queue_length=lengths.mean(axis=0),
        mean_sojourn=sojourn.mean(axis=0),
        mean_sojourn_ci=np.atleast_1d(_ci95(sojourn)),
        aggregate_sojourn=float(aggregate.mean()),
        aggregate_ci=float(_ci95(aggregate)),
        packet_sojourn=packet_mean,
        packet_aggregate_sojourn=packet_agg_mean,
        packet_aggregate_ci=float(_ci95(packet_agg)),
        active_fraction=np.array(busy_frac).mean(axis=0),
        replications=config.replications,
        diverged=diverged,
        per_replication=aggregate,
    )


def simulate(table: EfficiencyTable, partition: SpectrumPartition, lam,
             config: SimConfig = SimConfig()) -> SimulationStats:
    """Simulate the interactive queues induced by ``partition``."""
    return simulate_rates(rates_all_active_sets(partition, table), lam, config)


def compare_bound(table: EfficiencyTable, partition: SpectrumPartition, lam,
                  config: SimConfig = SimConfig()) -> tuple[float, SimulationStats]:
    """Conservative analytic delay next to the simulated one.

    Raises :class:`~hetnet_spectrum.model.InstabilityError` when the
    worst-case rates do not stabilize every queue.
    """
    analytic = objective(partition, table, lam)
    return analytic, simulate(table, partition, lam, config)
