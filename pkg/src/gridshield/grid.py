"""Regular axis-aligned grids over a bounded box, and regions to approximate with them.

Cells are half-open ``[lower, upper)`` in every dimension, so every point of
the bounding box belongs to exactly one cell.  Regions classify boxes
three-valued (outside / straddles / inside), which makes inner and outer
cell approximations exact for the primitives and propagates through unions,
intersections and complements.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidIndex, OutOfBounds

OUTSIDE = 0
STRADDLE = 1
INSIDE = 2


@dataclass(frozen=True)
class GridSpec:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(x) for x in np.atleast_1d(self.lower))
        upper = tuple(float(x) for x in np.atleast_1d(self.upper))
        counts = tuple(int(x) for x in np.atleast_1d(self.counts))
        if not (len(lower) == len(upper) == len(counts)) or not lower:
            raise ValueError("lower, upper and counts must have the same nonzero length")
        for i, (lo, hi, n) in enumerate(zip(lower, upper, counts)):
            if not lo < hi:
                raise ValueError(f"dimension {i}: lower {lo} must be below upper {hi}")
            if n < 1:
                raise ValueError(f"dimension {i}: cell count must be positive, got {n}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_dims(cls, dims):
        """Build from a list of ``(low, high, count)`` triples."""
        lo, hi, n = zip(*dims)
        return cls(lo, hi, n)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper)

    @property
    def diameters(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.counts)

    def boundaries(self, axis: int) -> np.ndarray:
        """The ``counts[axis] + 1`` cell boundaries along one axis."""
        i = np.arange(self.counts[axis] + 1)
        b = self.lower[axis] + i * self.diameters[axis]
        b[-1] = self.upper[axis]
        return b

    # -- points to cells ------------------------------------------------

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((p >= self.lo) & (p < self.hi), axis=1)

    def cell_indices(self, points) -> np.ndarray:
        """Integer cell coordinates for a batch of points, ``-1`` rows when out of bounds."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.contains(p)
        diam = self.diameters
        with np.errstate(invalid="ignore"):
            idx = np.floor((p - self.lo) / diam)
        idx = np.where(np.isfinite(idx), idx, 0).astype(np.int64)
        counts = np.asarray(self.counts)
        idx = np.clip(idx, 0, counts - 1)
        # Float division may land one cell off near a boundary; settle it
        # against the same boundaries cell_box reports.
        for ax in range(self.dim):
            b = self.boundaries(ax)
            col = idx[:, ax]
            x = p[:, ax]
            down = x < b[col]
            col[down] -= 1
            up = x >= b[np.minimum(col + 1, counts[ax])]
            col[up & (col + 1 < counts[ax])] += 1
            np.clip(col, 0, counts[ax] - 1, out=col)
        idx[~inside] = -1
        return idx

    def cell_ids(self, points) -> np.ndarray:
        """Flat row-major cell ids for a batch of points, ``-1`` when out of bounds."""
        idx = self.cell_indices(points)
        flat = np.ravel_multi_index(tuple(np.maximum(idx, 0).T), self.counts)
        flat[idx[:, 0] < 0] = -1
        return flat

    def cell_of(self, s) -> tuple[int, ...]:
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.shape[0] != self.dim:
            raise OutOfBounds(f"point has {s.shape[0]} coordinates, grid has {self.dim}")
        idx = self.cell_indices(s[None, :])[0]
        if idx[0] < 0:
            raise OutOfBounds(f"point {tuple(s)} outside grid box {self.lower}..{self.upper}")
        return tuple(int(i) for i in idx)

    def flat_id(self, c) -> int:
        self._check_index(c)
        return int(np.ravel_multi_index(tuple(c), self.counts))

    def index_of(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.size:
            raise InvalidIndex(f"flat id {flat} outside [0, {self.size})")
        return tuple(int(i) for i in np.unravel_index(flat, self.counts))

    def _check_index(self, c):
        if len(c) != self.dim or any(not 0 <= int(i) < n for i, n in zip(c, self.counts)):
            raise InvalidIndex(f"cell index {tuple(c)} invalid for counts {self.counts}")

    # -- cells to boxes -------------------------------------------------

    def cell_box(self, c) -> tuple[np.ndarray, np.ndarray]:
        self._check_index(c)
        lo = np.array([self.boundaries(ax)[i] for ax, i in enumerate(c)])
        hi = np.array([self.boundaries(ax)[i + 1] for ax, i in enumerate(c)])
        return lo, hi

    def cell_bounds(self, ids=None) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper corners, shape ``(n, dim)``, of the given flat ids (default: all)."""
        if ids is None:
            ids = np.arange(self.size)
        idx = np.stack(np.unravel_index(np.asarray(ids), self.counts), axis=1)
        lo = np.empty(idx.shape)
        hi = np.empty(idx.shape)
        for ax in range(self.dim):
            b = self.boundaries(ax)
            lo[:, ax] = b[idx[:, ax]]
            hi[:, ax] = b[idx[:, ax] + 1]
        return lo, hi

    def centers(self, ids=None) -> np.ndarray:
        lo, hi = self.cell_bounds(ids)
        return (lo + hi) / 2

    # -- region approximation -------------------------------------------

    def classify(self, region: Region) -> np.ndarray:
        lo, hi = self.cell_bounds()
        return region.classify(lo, hi)

    def outer_mask(self, region: Region) -> np.ndarray:
        return self.classify(region) != OUTSIDE

    def inner_mask(self, region: Region) -> np.ndarray:
        return self.classify(region) == INSIDE

    def outer_cells(self, region: Region) -> set[tuple[int, ...]]:
        """All cells intersecting ``region``."""
        return self._index_set(self.outer_mask(region))

    def inner_cells(self, region: Region) -> set[tuple[int, ...]]:
        """All cells contained in ``region``."""
        return self._index_set(self.inner_mask(region))

    def _index_set(self, mask) -> set[tuple[int, ...]]:
        ids = np.flatnonzero(mask)
        idx = np.stack(np.unravel_index(ids, self.counts), axis=1)
        return {tuple(int(i) for i in row) for row in idx}


# ---------------------------------------------------------------------------
# Regions


class Region:
    """A set of points supporting exact membership and three-valued box tests."""

    def contains(self, points) -> np.ndarray:
        raise NotImplementedError

    def classify(self, lo, hi) -> np.ndarray:
        """Classify boxes ``[lo, hi)`` (shape ``(n, d)``) as OUTSIDE, STRADDLE or INSIDE."""
        raise NotImplementedError

    def __or__(self, other):
        return Union((self, other))

    def __and__(self, other):
        return Intersection((self, other))

    def __invert__(self):
        return Complement(self)


def _points(points):
    return np.atleast_2d(np.asarray(points, dtype=float))


@dataclass(frozen=True)
class Disc(Region):
    """Closed Euclidean ball."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(x) for x in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, points):
        p = _points(points)
        return np.sum((p - np.asarray(self.center)) ** 2, axis=1) <= self.radius**2

    def classify(self, lo, hi):
        lo, hi = _points(lo), _points(hi)
        c = np.asarray(self.center)
        nearest = np.clip(c, lo, hi)
        d_near = np.sum((nearest - c) ** 2, axis=1)
        far = np.maximum(np.abs(lo - c), np.abs(hi - c))
        d_far = np.sum(far**2, axis=1)
        r2 = self.radius**2
        out = np.full(lo.shape[0], STRADDLE, dtype=np.int8)
        out[d_far <= r2] = INSIDE
        out[d_near > r2] = OUTSIDE
        return out


@dataclass(frozen=True)
class HalfPlane(Region):
    """``{x : normal . x <= offset}``."""

    normal: tuple[float, ...]
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple(float(x) for x in self.normal))
        object.__setattr__(self, "offset", float(self.offset))

    def contains(self, points):
        return _points(points) @ np.asarray(self.normal) <= self.offset

    def classify(self, lo, hi):
        lo, hi = _points(lo), _points(hi)
        n = np.asarray(self.normal)
        lo_val = np.sum(np.where(n >= 0, lo, hi) * n, axis=1)
        hi_val = np.sum(np.where(n >= 0, hi, lo) * n, axis=1)
        out = np.full(lo.shape[0], STRADDLE, dtype=np.int8)
        out[hi_val <= self.offset] = INSIDE
        out[lo_val > self.offset] = OUTSIDE
        return out


@dataclass(frozen=True)
class Box(Region):
    """Axis-aligned box, half-open ``[lower, upper)`` unless ``closed`` (then ``[lower, upper]``).

    Infinite bounds leave a dimension unconstrained.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(x) for x in self.lower))
        object.__setattr__(self, "upper", tuple(float(x) for x in self.upper))

    def contains(self, points):
        p = _points(points)
        below = p <= np.asarray(self.upper) if self.closed else p < np.asarray(self.upper)
        return np.all((p >= np.asarray(self.lower)) & below, axis=1)

    def classify(self, lo, hi):
        lo, hi = _points(lo), _points(hi)
        blo, bhi = np.asarray(self.lower), np.asarray(self.upper)
        inside = np.all((lo >= blo) & (hi <= bhi), axis=1)
        start = np.maximum(lo, blo)
        if self.closed:
            meets = (start <= bhi) & (start < hi)
        else:
            meets = start < np.minimum(hi, bhi)
        out = np.full(lo.shape[0], STRADDLE, dtype=np.int8)
        out[inside] = INSIDE
        out[~np.all(meets, axis=1)] = OUTSIDE
        return out


@dataclass(frozen=True)
class Union(Region):
    parts: tuple[Region, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, points):
        p = _points(points)
        out = np.zeros(p.shape[0], dtype=bool)
        for part in self.parts:
            out |= part.contains(p)
        return out

    def classify(self, lo, hi):
        lo = _points(lo)
        out = np.full(lo.shape[0], OUTSIDE, dtype=np.int8)
        for part in self.parts:
            np.maximum(out, part.classify(lo, hi), out=out)
        return out


@dataclass(frozen=True)
class Intersection(Region):
    parts: tuple[Region, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))

    def contains(self, points):
        p = _points(points)
        out = np.ones(p.shape[0], dtype=bool)
        for part in self.parts:
            out &= part.contains(p)
        return out

    def classify(self, lo, hi):
        lo = _points(lo)
        out = np.full(lo.shape[0], INSIDE, dtype=np.int8)
        for part in self.parts:
            np.minimum(out, part.classify(lo, hi), out=out)
        return out


@dataclass(frozen=True)
class Complement(Region):
    inner: Region

    def contains(self, points):
        return ~self.inner.contains(points)

    def classify(self, lo, hi):
        return (INSIDE - self.inner.classify(lo, hi)).astype(np.int8)


EVERYWHERE = Complement(Union(()))
