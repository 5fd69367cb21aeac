"""Spectrum partitions, service rates and the conservative delay objective."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .topology import EfficiencyTable, members_of

STABILITY_MARGIN = 1e-9
ZERO_THRESHOLD = 1e-9


class InstabilityError(ValueError):
    """Raised when a service rate does not exceed its arrival rate."""

    def __init__(self, bts: int | None, rate: float, arrival: float):
        self.bts = bts
        self.rate = rate
        self.arrival = arrival
        who = "queue" if bts is None else f"BTS {bts + 1}"
        super().__init__(
            f"{who} is unstable: service rate {rate:.6g} <= arrival rate {arrival:.6g}")


@dataclass(frozen=True)
class SpectrumPartition:
    """Bandwidth fraction ``x[B]`` of every BTS subset ``B`` (keyed by bitmask).

    Only nonzero entries are stored. The fractions are nonnegative and sum
    to one; the empty set never carries bandwidth.
    """

    k: int
    x: Mapping[int, float]

    def __post_init__(self):
        x = {int(b): float(v) for b, v in self.x.items() if v != 0.0}
        n = 1 << self.k
        for b, v in x.items():
            if not 0 < b < n:
                raise ValueError(f"subset mask {b} is out of range for k={self.k}")
            if v < 0:
                raise ValueError(f"negative bandwidth {v} on subset {b}")
        total = sum(x.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"bandwidth fractions sum to {total}, not 1")
        object.__setattr__(self, "x", dict(sorted(x.items())))

    @classmethod
    def from_dense(cls, k: int, dense: np.ndarray, threshold: float = 0.0) -> SpectrumPartition:
        dense = np.asarray(dense, dtype=float)
        keep = np.flatnonzero(dense > threshold)
        keep = keep[keep > 0]
        vals = dense[keep]
        vals = vals / vals.sum()
        return cls(k, dict(zip(keep.tolist(), vals.tolist())))

    @classmethod
    def full_reuse(cls, k: int) -> SpectrumPartition:
        return cls(k, {(1 << k) - 1: 1.0})

    @classmethod
    def orthogonal(cls, fractions) -> SpectrumPartition:
        fractions = np.asarray(fractions, dtype=float)
        return cls(len(fractions), {1 << i: f for i, f in enumerate(fractions)})

    def dense(self) -> np.ndarray:
        out = np.zeros(1 << self.k)
        for b, v in self.x.items():
            out[b] = v
        return out

    def support(self, threshold: float = ZERO_THRESHOLD) -> list[int]:
        return [b for b, v in self.x.items() if v > threshold]

    def bandwidth_per_bts(self) -> np.ndarray:
        """Total bandwidth ``sum_{B containing i} x[B]`` used by each BTS."""
        out = np.zeros(self.k)
        for b, v in self.x.items():
            for i in members_of(b):
                out[i] += v
        return out

    def l1_distance(self, other: SpectrumPartition) -> float:
        keys = set(self.x) | set(other.x)
        return sum(abs(self.x.get(b, 0.0) - other.x.get(b, 0.0)) for b in keys)

    def to_dict(self) -> dict:
        return {"k": self.k,
                "x": [{"mask": b, "bts": [i + 1 for i in members_of(b)], "fraction": v}
                      for b, v in self.x.items()]}

    @classmethod
    def from_dict(cls, data: dict) -> SpectrumPartition:
        return cls(int(data["k"]), {int(e["mask"]): float(e["fraction"]) for e in data["x"]})


def _check_k(partition: SpectrumPartition, table: EfficiencyTable) -> None:
    if partition.k != table.k:
        raise ValueError(f"partition has k={partition.k} but table has k={table.k}")


def _as_dense(partition, table: EfficiencyTable) -> np.ndarray:
    if isinstance(partition, SpectrumPartition):
        _check_k(partition, table)
        return partition.dense()
    x = np.asarray(partition, dtype=float)
    if x.shape != (1 << table.k,):
        raise ValueError(f"dense partition must have length {1 << table.k}, got {x.shape}")
    return x


def traffic_weights(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("arrival rates must be positive")
    return lam / lam.sum()


def service_rate(partition, table: EfficiencyTable, active_set: int, i: int) -> float:
    """Rate of BTS ``i`` when the BTS's in ``active_set`` are transmitting.

    Each segment ``B`` contributes ``x[B] * s_i(B & active_set)``: only the
    members of ``B`` that are active interfere on it.
    """
    x = _as_dense(partition, table)
    masks = np.flatnonzero(x)
    return float(np.dot(x[masks], table.s[masks & active_set, i]))


def rates_all_active_sets(partition, table: EfficiencyTable) -> np.ndarray:
    """``R[A, i]``: rate of BTS ``i`` under every active set ``A``."""
    x = _as_dense(partition, table)
    active = np.arange(1 << table.k)
    out = np.zeros((1 << table.k, table.k))
    for b in np.flatnonzero(x):
        out += x[b] * table.s[active & b]
    return out


def worst_case_rates(partition, table: EfficiencyTable) -> np.ndarray:
    """Rates when every BTS is always transmitting."""
    return table.s.T @ _as_dense(partition, table)


def mm1_sojourn(rate: float, lam: float, margin: float = STABILITY_MARGIN) -> float:
    """Mean sojourn time ``1 / (rate - lam)`` of an M/M/1 queue."""
    if rate - lam <= margin:
        raise InstabilityError(None, rate, lam)
    return 1.0 / (rate - lam)


def _slack(rates: np.ndarray, lam: np.ndarray, margin: float) -> np.ndarray:
    slack = rates - lam
    bad = np.flatnonzero(slack <= margin)
    if bad.size:
        i = int(bad[0])
        raise InstabilityError(i, float(rates[i]), float(lam[i]))
    return slack


def objective_from_rates(rates, lam, margin: float = STABILITY_MARGIN) -> float:
    lam = np.asarray(lam, dtype=float)
    slack = _slack(np.asarray(rates, dtype=float), lam, margin)
    return float(np.sum(traffic_weights(lam) / slack))


def objective(partition, table: EfficiencyTable, lam, margin: float = STABILITY_MARGIN) -> float:
    """Traffic-weighted mean of the per-BTS M/M/1 sojourn times at worst-case rates."""
    return objective_from_rates(worst_case_rates(partition, table), lam, margin)


def objective_gradient(partition, table: EfficiencyTable, lam,
                       margin: float = STABILITY_MARGIN) -> np.ndarray:
    """Partial derivative of :func:`objective` with respect to every ``x[B]``.

    Returns a dense vector indexed by bitmask; entry 0 (the empty set) is 0.
    """
    lam = np.asarray(lam, dtype=float)
    slack = _slack(worst_case_rates(partition, table), lam, margin)
    return -(table.s @ (traffic_weights(lam) / slack**2))
