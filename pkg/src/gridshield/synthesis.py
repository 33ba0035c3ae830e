"""Sampled abstraction, safety fixpoint and most-permissive strategy.

Transitions are sampled: every cell contributes a regular lattice of
support points and, for stochastic models, the disturbance extremes plus a
few pseudo-random draws.  The resulting shield is empirically sound at that
sampling density, not formally guaranteed.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigMismatch, Degenerate, SingularFit
from .grid import INSIDE, GridSpec, Region
from .shield import Strategy
from .transform import Transform

INSET = 1e-9


@dataclass(frozen=True)
class SamplingConfig:
    per_axis: int = 4
    random_disturbances: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.per_axis < 1:
            raise ValueError("per_axis must be at least 1")
        if self.random_disturbances < 0:
            raise ValueError("random_disturbances must be non-negative")


def unit_lattice(dim: int, per_axis: int) -> np.ndarray:
    """Relative positions in ``[0, 1)^dim`` of the support points of a cell."""
    if per_axis == 1:
        axis = np.array([0.5])
    else:
        # both faces pulled in slightly so roundoff in the dynamics cannot
        # push an on-boundary sample into the neighbouring cell
        axis = np.linspace(INSET, 1.0 - INSET, per_axis)
    return np.array(list(itertools.product(axis, repeat=dim)))


def support_points(lo, hi, per_axis: int) -> np.ndarray:
    """Lattice of ``per_axis ** d`` points spanning the half-open box ``[lo, hi)``, corners inset by 1e-9."""
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    return lo + unit_lattice(len(lo), per_axis) * (hi - lo)


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _splitmix(x):
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def hashed_uniform(seed: int, *keys) -> np.ndarray:
    """Uniform ``[0, 1)`` draws that depend only on ``seed`` and the integer keys.

    Counter-based, so a (cell, action, point) triple gets the same
    disturbance regardless of chunking or evaluation order.
    """
    with np.errstate(over="ignore"):
        h = _splitmix(np.uint64(seed) * np.ones(1, dtype=np.uint64))
        for k in keys:
            h = _splitmix(h ^ np.asarray(k, dtype=np.int64).astype(np.uint64))
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _disturbance_extremes(arity: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=arity)))


@dataclass
class TransitionTable:
    """Sampled transitions in CSR form over rows ``action * n_cells + cell``."""

    grid: GridSpec
    actions: tuple[str, ...]
    indptr: np.ndarray
    indices: np.ndarray
    escapes: np.ndarray
    has_preimage: np.ndarray
    samples: int = 0

    @property
    def n_cells(self) -> int:
        return self.grid.size

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def _row(self, cell, action) -> int:
        c = cell if isinstance(cell, (int, np.integer)) else self.grid.flat_id(cell)
        a = action if isinstance(action, (int, np.integer)) else self.actions.index(action)
        return a * self.n_cells + int(c)

    def successor_ids(self, cell, action) -> np.ndarray:
        r = self._row(cell, action)
        return self.indices[self.indptr[r]: self.indptr[r + 1]]

    def successors(self, cell, action) -> set[tuple[int, ...]]:
        return {self.grid.index_of(int(i)) for i in self.successor_ids(cell, action)}

    def escaping(self, cell, action) -> bool:
        return bool(self.escapes[self._row(cell, action)])

    def arrays(self):
        return self.indptr, self.indices, self.escapes, self.n_cells, self.n_actions


def _check_boxes(grid: GridSpec, transform: Transform):
    if grid.dim != transform.t_dim or not (
        np.allclose(grid.lower, transform.t_lower, rtol=0, atol=1e-9)
        and np.allclose(grid.upper, transform.t_upper, rtol=0, atol=1e-9)
    ):
        raise ConfigMismatch(
            f"grid box {grid.lower}..{grid.upper} differs from the {transform.name} codomain "
            f"{transform.t_lower}..{transform.t_upper}"
        )


def preimage_mask(grid: GridSpec, transform: Transform, per_axis: int = 4) -> np.ndarray:
    """Cells with at least one support point that has a preimage in S."""
    lattice = unit_lattice(grid.dim, per_axis)
    out = np.zeros(grid.size, dtype=bool)
    step = max(1, 1_000_000 // len(lattice))
    for start in range(0, grid.size, step):
        ids = np.arange(start, min(start + step, grid.size))
        lo, hi = grid.cell_bounds(ids)
        pts = lo[:, None, :] + lattice[None] * (hi - lo)[:, None, :]
        _, ok = transform.inverse(pts.reshape(-1, grid.dim))
        out[ids] = ok.reshape(len(ids), -1).any(axis=1)
    return out


def compute_transitions(model, transform: Transform, grid: GridSpec,
                        cfg: SamplingConfig = SamplingConfig(), chunk_samples: int = 1_000_000) -> TransitionTable:
    """Sample ``C -a-> C'`` for every cell and action of a grid over T.

    Sampled successors outside the S box or the T box set the escape flag.
    Support points without a preimage contribute nothing, so cells with no
    preimage at all get empty successor sets and no escape.
    """
    _check_boxes(grid, transform)
    n = grid.size
    lattice = unit_lattice(grid.dim, cfg.per_axis)
    n_points = len(lattice)
    k = model.disturbance_arity
    if k:
        extremes = _disturbance_extremes(k)
        n_dist = len(extremes) + cfg.random_disturbances
    else:
        n_dist = 1
    per_cell = n_points * n_dist
    step = max(1, chunk_samples // per_cell)

    has_pre = np.zeros(n, dtype=bool)
    escapes = np.zeros((len(model.actions), n), dtype=np.uint8)
    indptr_parts, index_parts = [], []
    total = 0
    for a in range(len(model.actions)):
        keys = []
        for start in range(0, n, step):
            ids = np.arange(start, min(start + step, n))
            lo, hi = grid.cell_bounds(ids)
            pts = (lo[:, None, :] + lattice[None] * (hi - lo)[:, None, :]).reshape(-1, grid.dim)
            src = np.repeat(ids, n_points)
            point = np.tile(np.arange(n_points), len(ids))
            s, ok = transform.inverse(pts)
            if a == 0:
                has_pre[ids] = ok.reshape(len(ids), n_points).any(axis=1)
            s, src, point = s[ok], src[ok], point[ok]
            if k:
                m = len(s)
                u = np.empty((m, n_dist, k))
                u[:, : len(extremes)] = extremes[None]
                for j in range(cfg.random_disturbances):
                    for dim in range(k):
                        u[:, len(extremes) + j, dim] = hashed_uniform(cfg.seed, src, a, point, j, dim)
                s = np.repeat(s, n_dist, axis=0)
                src = np.repeat(src, n_dist)
                nxt = model.step(s, a, u.reshape(-1, k))
            else:
                nxt = model.step(s, a)
            total += len(nxt)
            t = transform.forward(nxt)
            dst = grid.cell_ids(t)
            esc = (dst < 0) | ~model.in_bounds(nxt)
            escapes[a, src[esc]] = 1
            keys.append(src[~esc] * n + dst[~esc])
        keys = np.unique(np.concatenate(keys)) if keys else np.empty(0, dtype=np.int64)
        counts = np.bincount(keys // n, minlength=n)
        indptr_parts.append(counts)
        index_parts.append(keys % n)
    indptr = np.zeros(len(model.actions) * n + 1, dtype=np.int64)
    np.cumsum(np.concatenate(indptr_parts), out=indptr[1:])
    indices = np.concatenate(index_parts).astype(np.int64)
    return TransitionTable(grid, tuple(model.actions), indptr, indices, escapes.reshape(-1), has_pre, total)


def initial_safe(grid: GridSpec, transform: Transform, safety: Region, has_preimage=None,
                 per_axis: int = 4) -> np.ndarray:
    """Cells over T whose preimage lies inside ``safety``, restricted to cells with a preimage."""
    lo, hi = grid.cell_bounds()
    inside = transform.classify_region(safety, lo, hi) == INSIDE
    if has_preimage is None:
        has_preimage = preimage_mask(grid, transform, per_axis)
    return inside & has_preimage


def solve(tt: TransitionTable, init, max_sweeps: int = -1) -> tuple[np.ndarray, int]:
    """Removal sweeps from ``init``; returns the surviving cells and the sweep count."""
    safe, sweeps = kernels.fixpoint_sweeps(
        tt.indptr, tt.indices, tt.escapes, tt.n_cells, tt.n_actions,
        np.asarray(init, dtype=np.uint8), max_sweeps,
    )
    return np.asarray(safe).astype(bool), sweeps


def fixpoint(tt: TransitionTable, init) -> np.ndarray:
    """Greatest set of controllable cells inside ``init``."""
    return solve(tt, init)[0]


def bounded_fixpoint(tt: TransitionTable, init, k: int) -> np.ndarray:
    """The marking after exactly ``k`` removal sweeps; only ``k``-step safe, not a shield."""
    if k < 0:
        raise ValueError("k must be non-negative")
    return solve(tt, init, k)[0]


def most_permissive(tt: TransitionTable, safe, transform: Transform) -> Strategy:
    masks = kernels.action_masks(
        tt.indptr, tt.indices, tt.escapes, tt.n_cells, tt.n_actions, np.asarray(safe, dtype=np.uint8)
    )
    return Strategy(tt.grid, np.asarray(masks, dtype=np.uint8), tt.actions, transform)


@dataclass
class SynthesisResult:
    strategy: Strategy
    table: TransitionTable
    initial: np.ndarray
    safe: np.ndarray
    sweeps: int
    timings: dict = field(default_factory=dict)

    @property
    def controllable(self) -> int:
        return int(self.safe.sum())

    def stats(self) -> dict:
        return {
            "cells": self.table.n_cells,
            "initially_safe": int(self.initial.sum()),
            "controllable": self.controllable,
            "sweeps": self.sweeps,
            "samples": self.table.samples,
            "seconds": round(self.timings.get("total", 0.0), 4),
        }


def synthesize(model, transform: Transform, grid: GridSpec, cfg: SamplingConfig = SamplingConfig(),
               max_sweeps: int = -1) -> SynthesisResult:
    """Transitions, initial marking, fixpoint (or ``max_sweeps`` sweeps) and strategy in one go."""
    t0 = time.perf_counter()
    tt = compute_transitions(model, transform, grid, cfg)
    t1 = time.perf_counter()
    init = initial_safe(grid, transform, model.safety, tt.has_preimage)
    safe, sweeps = solve(tt, init, max_sweeps)
    strategy = most_permissive(tt, safe, transform)
    t2 = time.perf_counter()
    timings = {"transitions": t1 - t0, "fixpoint": t2 - t1, "total": t2 - t0}
    return SynthesisResult(strategy, tt, init, safe, sweeps, timings)


# ---------------------------------------------------------------------------
# Engineering a transformation from a coarse marking


def extract_boundaries(marking, grid: GridSpec) -> list[tuple[float, float, float, float]]:
    """Per column along axis 0: ``(theta_center, upper, lower, mid)`` of the marked band along axis 1."""
    if grid.dim != 2:
        raise Degenerate("boundary extraction needs a 2-D grid")
    m = np.asarray(marking, dtype=bool).reshape(grid.counts)
    b0, b1 = grid.boundaries(0), grid.boundaries(1)
    centers0 = (b0[:-1] + b0[1:]) / 2
    centers1 = (b1[:-1] + b1[1:]) / 2
    rows = []
    for i in range(grid.counts[0]):
        marked = np.flatnonzero(m[i])
        if marked.size == 0:
            continue
        upper, lower = centers1[marked[-1]], centers1[marked[0]]
        rows.append((float(centers0[i]), float(upper), float(lower), float((upper + lower) / 2)))
    if not rows:
        raise Degenerate("no column contains a marked cell")
    return rows


def fit_polynomial(points, powers=(1, 3), tol: float = 1e-12) -> np.ndarray:
    """Least-squares coefficients of ``sum c_k x^k`` over ``powers``, via the normal equations."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    design = np.stack([x**p for p in powers], axis=1)
    normal = design.T @ design
    rhs = design.T @ y
    scale = np.sqrt(np.outer(np.diag(normal), np.diag(normal)))
    if np.any(np.diag(normal) == 0):
        raise SingularFit("a basis column is identically zero")
    eig = np.linalg.eigvalsh(normal / scale)
    if eig.min() <= tol * eig.max():
        raise SingularFit(f"normal matrix is rank-deficient (eigenvalues {eig})")
    return np.linalg.solve(normal, rhs)
