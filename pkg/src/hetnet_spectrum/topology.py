"""Quantized HetNet scenarios and their spectral-efficiency tables.

The service area is tiled by flat-top hexagons whose centers stand in for the
UE locations of each hexagon. Base stations (BTS's) sit on hexagon vertices,
every hexagon is served by its nearest BTS (ties split evenly) and the
per-BTS spectral efficiency on a band shared by the active set ``C`` is the
association-weighted mean of the per-hexagon Shannon efficiencies.

BTS ``i`` (0-based in arrays, ``i + 1`` in user-facing ids) corresponds to bit
``i`` of a subset bitmask.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAX_BTS = 16

# Coordinates are rounded to this many decimals when deduplicating vertices
# and when testing distance ties.
_COORD_DECIMALS = 6
_TIE_RTOL = 1e-9


class TopologyError(ValueError):
    """Raised for invalid grid dimensions or deployment requests."""


class OrphanBtsError(TopologyError):
    """Raised when some BTS is not the nearest BTS of any hexagon."""

    def __init__(self, bts: list[int]):
        self.bts = bts
        ids = ", ".join(str(i + 1) for i in bts)
        super().__init__(f"BTS {ids} serve no hexagon")


@dataclass(frozen=True)
class HexGrid:
    area_width_m: float
    area_height_m: float
    center_spacing_m: float
    cells: np.ndarray  # (n_cells, 2) hexagon centers
    vertices: np.ndarray  # (n_vertices, 2) hexagon corners inside the area

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class RadioParams:
    """Physical-layer constants.

    ``tx_psd`` may be a scalar (same PSD at every BTS) or one value per BTS.
    Defaults are 1 W/Hz transmit PSD, 0.125 uW/Hz noise and a path-loss
    exponent of 3.
    """

    tx_psd: float | tuple[float, ...] = 1.0
    noise_psd: float = 0.125e-6
    pathloss_exponent: float = 3.0
    log_base: str = "natural"
    d_min_m: float = 1.0

    def __post_init__(self):
        psd = np.atleast_1d(np.asarray(self.tx_psd, dtype=float))
        if np.any(psd <= 0) or self.noise_psd <= 0 or self.pathloss_exponent <= 0:
            raise ValueError("tx_psd, noise_psd and pathloss_exponent must be positive")
        if self.log_base not in ("natural", "base2"):
            raise ValueError(f"log_base must be 'natural' or 'base2', got {self.log_base!r}")
        if self.d_min_m <= 0:
            raise ValueError("d_min_m must be positive")
        if not np.isscalar(self.tx_psd):
            object.__setattr__(self, "tx_psd", tuple(float(p) for p in psd))

    def psd_vector(self, k: int) -> np.ndarray:
        psd = np.atleast_1d(np.asarray(self.tx_psd, dtype=float))
        if psd.size == 1:
            return np.full(k, psd[0])
        if psd.size != k:
            raise ValueError(f"tx_psd has {psd.size} entries for {k} BTS's")
        return psd.copy()


@dataclass(frozen=True)
class Deployment:
    grid: HexGrid
    bts_positions: np.ndarray  # (k, 2)
    bts_vertices: tuple[int, ...] = ()
    # (n_cells, k) association weights; rows sum to 1. None until associate().
    association: np.ndarray | None = field(default=None, compare=False)

    @property
    def k(self) -> int:
        return len(self.bts_positions)

    def served_weight(self) -> np.ndarray:
        """Number of hexagons (fractional on ties) served by each BTS."""
        if self.association is None:
            raise TopologyError("deployment has no association; call associate() first")
        return self.association.sum(axis=0)


@dataclass(frozen=True)
class EfficiencyTable:
    """Spectral efficiencies ``s[C, i]`` for every active-set bitmask ``C``.

    Row 0 (the empty set) is all zeros and ``s[C, i] == 0`` whenever bit ``i``
    of ``C`` is clear.
    """

    s: np.ndarray  # (2**k, k)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 2 or s.shape[0] != 1 << s.shape[1]:
            raise ValueError(f"table must have shape (2**k, k), got {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def k(self) -> int:
        return self.s.shape[1]

    @property
    def full_mask(self) -> int:
        return (1 << self.k) - 1

    def __getitem__(self, key):
        return self.s[key]

    @classmethod
    def from_function(cls, k: int, func) -> EfficiencyTable:
        """Build a table from ``func(i, members)`` called for every ``i in C``."""
        s = np.zeros((1 << k, k))
        for c in range(1, 1 << k):
            members = frozenset(members_of(c))
            for i in members:
                s[c, i] = func(i, members)
        return cls(s)

    @classmethod
    def interference_free(cls, own: np.ndarray) -> EfficiencyTable:
        """Table with ``s_i(C) = own[i]`` for every ``C`` containing ``i``."""
        own = np.asarray(own, dtype=float)
        return cls(membership_matrix(len(own)) * own)


def members_of(mask: int) -> list[int]:
    """0-based BTS indices whose bits are set in ``mask``."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def mask_of(members) -> int:
    mask = 0
    for i in members:
        mask |= 1 << i
    return mask


def membership_matrix(k: int) -> np.ndarray:
    """``M[C, i] = 1`` iff bit ``i`` of ``C`` is set, shape ``(2**k, k)``."""
    masks = np.arange(1 << k)[:, None]
    return ((masks >> np.arange(k)) & 1).astype(float)


def generate_hex_grid(area_width_m: float, area_height_m: float,
                      center_spacing_m: float) -> HexGrid:
    """Tile a rectangle with flat-top hexagons.

    The lattice is anchored with a hexagon center at the middle of the area;
    a hexagon is kept when its center lies in the closed rectangle, and a
    vertex of a kept hexagon is kept when it lies in the closed rectangle.
    """
    w, h, d = float(area_width_m), float(area_height_m), float(center_spacing_m)
    if not (w > 0 and h > 0 and d > 0):
        raise TopologyError("area dimensions and spacing must be positive")
    if d > min(w, h):
        raise TopologyError("center spacing exceeds the area")

    radius = d / math.sqrt(3.0)
    col_step = 1.5 * radius
    cx, cy = w / 2, h / 2
    eps = 1e-9 * max(w, h)

    n_cols = int(math.ceil(w / col_step)) + 1
    n_rows = int(math.ceil(h / d)) + 1
    cells = []
    for col in range(-n_cols, n_cols + 1):
        x = cx + col * col_step
        if not -eps <= x <= w + eps:
            continue
        offset = d / 2 if col % 2 else 0.0
        for row in range(-n_rows, n_rows + 1):
            y = cy + row * d + offset
            if -eps <= y <= h + eps:
                cells.append((x, y))
    cells = np.array(sorted(cells, key=lambda p: (round(p[0], 6), round(p[1], 6))))

    angles = np.deg2rad(np.arange(0, 360, 60))
    corners = np.stack([np.cos(angles), np.sin(angles)], axis=1) * radius
    seen = {}
    for c in cells:
        for v in c + corners:
            if -eps <= v[0] <= w + eps and -eps <= v[1] <= h + eps:
                key = (round(v[0], _COORD_DECIMALS), round(v[1], _COORD_DECIMALS))
                seen.setdefault(key, v)
    vertices = np.array([seen[key] for key in sorted(seen)])
    return HexGrid(w, h, d, cells, vertices)


def place_bts(grid: HexGrid, k: int, seed: int | None = None) -> Deployment:
    """Drop ``k`` BTS's on distinct hexagon vertices chosen uniformly at random."""
    if k < 1:
        raise TopologyError("need at least one BTS")
    if k > MAX_BTS:
        raise TopologyError(f"at most {MAX_BTS} BTS's are supported, got {k}")
    if k > grid.n_vertices:
        raise TopologyError(f"cannot place {k} BTS's on {grid.n_vertices} vertices")
    rng = np.random.default_rng(seed)
    idx = rng.choice(grid.n_vertices, size=k, replace=False)
    return Deployment(grid, grid.vertices[idx].copy(), tuple(int(i) for i in idx))


def _distances(deployment: Deployment, d_min: float = 0.0) -> np.ndarray:
    """(n_cells, k) hexagon-center to BTS distances."""
    diff = deployment.grid.cells[:, None, :] - deployment.bts_positions[None, :, :]
    return np.maximum(np.hypot(diff[..., 0], diff[..., 1]), d_min)


def associate(deployment: Deployment) -> Deployment:
    """Assign every hexagon to its nearest BTS, splitting exact ties evenly."""
    dist = _distances(deployment)
    nearest = dist.min(axis=1, keepdims=True)
    tied = np.isclose(dist, nearest, rtol=_TIE_RTOL, atol=0.0)
    weights = tied / tied.sum(axis=1, keepdims=True)
    return Deployment(deployment.grid, deployment.bts_positions,
                      deployment.bts_vertices, weights)


def drop_scenario(grid: HexGrid, k: int, seed: int, max_tries: int = 100) -> tuple[Deployment, int]:
    """Place and associate ``k`` BTS's, re-dropping until none is orphaned.

    Returns the deployment and the seed that produced it (``seed``,
    ``seed + 1``, ...).
    """
    for attempt in range(max_tries):
        dep = associate(place_bts(grid, k, seed + attempt))
        if np.all(dep.served_weight() > 0):
            return dep, seed + attempt
    raise TopologyError(f"no orphan-free deployment within {max_tries} seeds")


def build_efficiency_table(deployment: Deployment, radio: RadioParams,
                           tx_psd=None) -> EfficiencyTable:
    """Average Shannon efficiency of every BTS under every active set.

    Parameters
    ----------
    deployment : Deployment
        Associated deployment.
    radio : RadioParams
        Noise, path-loss and log base. Transmit PSDs come from ``tx_psd`` if
        given, else from ``radio.tx_psd``.
    tx_psd : array_like, optional
        Per-BTS transmit PSD; interference from BTS ``j`` uses ``tx_psd[j]``.

    Returns
    -------
    EfficiencyTable
    """
    if deployment.association is None:
        raise TopologyError("deployment has no association; call associate() first")
    k = deployment.k
    if k > MAX_BTS:
        raise TopologyError(f"at most {MAX_BTS} BTS's are supported, got {k}")
    weights = deployment.association
    served = weights.sum(axis=0)
    orphans = [i for i in range(k) if served[i] <= 0]
    if orphans:
        raise OrphanBtsError(orphans)

    psd = radio.psd_vector(k) if tx_psd is None else np.asarray(tx_psd, dtype=float)
    if psd.shape != (k,) or np.any(psd <= 0):
        raise ValueError("tx_psd must hold one positive value per BTS")

    gain = _distances(deployment, radio.d_min_m) ** (-radio.pathloss_exponent)
    rx = gain * psd  # (n_cells, k) received PSD from each BTS at each hexagon
    member = membership_matrix(k)  # (2**k, k)
    # interference on i under C is the sum over C of received PSD minus i's own
    total = member @ rx.T  # (2**k, n_cells)
    log = np.log if radio.log_base == "natural" else np.log2
    s = np.zeros((1 << k, k))
    for i in range(k):
        cells = weights[:, i] > 0
        w = weights[cells, i] / served[i]
        rows = member[:, i] > 0
        signal = rx[cells, i]
        interference = np.maximum(total[np.ix_(rows, cells)] - signal, 0.0)
        eff = log1p_base(signal / (interference + radio.noise_psd), log)
        s[rows, i] = eff @ w
    return EfficiencyTable(s)


def log1p_base(x: np.ndarray, log) -> np.ndarray:
    if log is np.log:
        return np.log1p(x)
    return np.log1p(x) / math.log(2.0)


def deployment_to_dict(deployment: Deployment) -> dict:
    g = deployment.grid
    out = {
        "grid": {
            "area_width_m": g.area_width_m,
            "area_height_m": g.area_height_m,
            "center_spacing_m": g.center_spacing_m,
            "cells": [[i, float(x), float(y)] for i, (x, y) in enumerate(g.cells)],
            "vertices": [[i, float(x), float(y)] for i, (x, y) in enumerate(g.vertices)],
        },
        "bts_positions": [[i + 1, float(x), float(y)]
                          for i, (x, y) in enumerate(deployment.bts_positions)],
        "bts_vertices": list(deployment.bts_vertices),
    }
    if deployment.association is not None:
        out["association"] = {
            str(c): [[i + 1, float(wt)] for i, wt in enumerate(row) if wt > 0]
            for c, row in enumerate(deployment.association)
        }
    return out


def deployment_from_dict(data: dict) -> Deployment:
    g = data["grid"]
    cells = np.array([[x, y] for _, x, y in g["cells"]], dtype=float).reshape(-1, 2)
    vertices = np.array([[x, y] for _, x, y in g["vertices"]], dtype=float).reshape(-1, 2)
    grid = HexGrid(g["area_width_m"], g["area_height_m"], g["center_spacing_m"], cells, vertices)
    pos = np.array([[x, y] for _, x, y in data["bts_positions"]], dtype=float).reshape(-1, 2)
    assoc = None
    if "association" in data:
        assoc = np.zeros((len(cells), len(pos)))
        for c, entries in data["association"].items():
            for bts_id, wt in entries:
                assoc[int(c), bts_id - 1] = wt
    return Deployment(grid, pos, tuple(data.get("bts_vertices", ())), assoc)


def table_to_dict(table: EfficiencyTable) -> dict:
    return {
        "k": table.k,
        "s": {str(c): [float(v) for v in table.s[c]] for c in range(1, 1 << table.k)},
    }


def table_from_dict(data: dict) -> EfficiencyTable:
    k = int(data["k"])
    s = np.zeros((1 << k, k))
    for c, row in data["s"].items():
        s[int(c)] = row
    return EfficiencyTable(s)


def save_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())
