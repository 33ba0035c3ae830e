"""State-space transformations ``f: S -> T`` with set-valued inverses.

All transformations shipped here are injective on their domain, so the
batched ``inverse`` returns at most one preimage per point plus a validity
mask; ``preimage`` keeps the set-valued interface for single points.
"""
from __future__ import annotations

import math

import numpy as np

from .grid import (
    INSIDE,
    OUTSIDE,
    Box,
    Complement,
    Disc,
    Intersection,
    Region,
    Union,
)


def _rows(x):
    return np.atleast_2d(np.asarray(x, dtype=float))


class Transform:
    name = "transform"
    tag = -1
    injective = True
    surjective = False

    def __init__(self, s_lower, s_upper, t_lower, t_upper):
        self.s_lower = tuple(float(x) for x in s_lower)
        self.s_upper = tuple(float(x) for x in s_upper)
        self.t_lower = tuple(float(x) for x in t_lower)
        self.t_upper = tuple(float(x) for x in t_upper)

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(f'{p:g}' for p in self.params())})"

    def __eq__(self, other):
        return isinstance(other, Transform) and self.tag == other.tag and self.params() == other.params()

    def __hash__(self):
        return hash((self.tag, tuple(self.params())))

    def params(self) -> list[float]:
        return [*self.s_lower, *self.s_upper, *self.t_lower, *self.t_upper]

    @property
    def s_dim(self) -> int:
        return len(self.s_lower)

    @property
    def t_dim(self) -> int:
        return len(self.t_lower)

    def _in_s(self, s):
        return np.all((s >= np.asarray(self.s_lower)) & (s < np.asarray(self.s_upper)), axis=1)

    def in_codomain(self, t) -> np.ndarray:
        t = _rows(t)
        return np.all((t >= np.asarray(self.t_lower)) & (t < np.asarray(self.t_upper)), axis=1)

    def defined(self, s) -> np.ndarray:
        return np.ones(_rows(s).shape[0], dtype=bool)

    def forward(self, s) -> np.ndarray:
        """Map states to T; rows where ``f`` is undefined come back as NaN."""
        raise NotImplementedError

    def inverse(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Preimage points and a mask of rows that have one inside the S box."""
        raise NotImplementedError

    def inverse_box(self, lo, hi) -> tuple[np.ndarray, np.ndarray]:
        """Interval hull in S of the preimage of boxes ``[lo, hi]`` in T."""
        raise NotImplementedError

    def push_primitive(self, region: Region) -> Region | None:
        """The exact image of a primitive region in T, when one is known."""
        return None

    def preimage(self, t) -> list[np.ndarray]:
        s, ok = self.inverse(_rows(t))
        return [s[0]] if ok[0] else []

    def classify_region(self, region: Region, lo, hi) -> np.ndarray:
        """Three-valued classification of T boxes against the image of an S region.

        Boolean structure is walked here; primitives use an exact image when
        available and otherwise the interval hull of the box's preimage,
        clipped to the S box.
        """
        lo, hi = _rows(lo), _rows(hi)
        if isinstance(region, Complement):
            return (INSIDE - self.classify_region(region.inner, lo, hi)).astype(np.int8)
        if isinstance(region, Union):
            out = np.full(lo.shape[0], OUTSIDE, dtype=np.int8)
            for part in region.parts:
                np.maximum(out, self.classify_region(part, lo, hi), out=out)
            return out
        if isinstance(region, Intersection):
            out = np.full(lo.shape[0], INSIDE, dtype=np.int8)
            for part in region.parts:
                np.minimum(out, self.classify_region(part, lo, hi), out=out)
            return out
        pushed = self.push_primitive(region)
        if pushed is not None:
            return pushed.classify(lo, hi)
        slo, shi = self.inverse_box(lo, hi)
        slo = np.maximum(slo, np.asarray(self.s_lower))
        shi = np.minimum(shi, np.asarray(self.s_upper))
        out = region.classify(slo, shi)
        # no preimage at all: vacuously inside, emptiness is judged elsewhere
        out[np.any(slo > shi, axis=1)] = INSIDE
        return out


class IdentityTransform(Transform):
    name = "identity"
    tag = 0
    surjective = True

    def __init__(self, lower, upper):
        super().__init__(lower, upper, lower, upper)

    def params(self):
        return [*self.s_lower, *self.s_upper]

    def forward(self, s):
        return _rows(s).copy()

    def inverse(self, t):
        t = _rows(t)
        return t.copy(), self._in_s(t)

    def inverse_box(self, lo, hi):
        return _rows(lo).copy(), _rows(hi).copy()

    def push_primitive(self, region):
        return region


def identity_transform(lower, upper) -> IdentityTransform:
    return IdentityTransform(lower, upper)


def _cos_range(a, b):
    """Elementwise range of cos over ``[a, b]`` with ``b - a < 2 pi``."""
    lo = np.minimum(np.cos(a), np.cos(b))
    hi = np.maximum(np.cos(a), np.cos(b))
    k_max = np.ceil(a / (2 * math.pi))
    has_max = 2 * math.pi * k_max <= b
    k_min = np.ceil((a - math.pi) / (2 * math.pi))
    has_min = 2 * math.pi * k_min + math.pi <= b
    hi = np.where(has_max, 1.0, hi)
    lo = np.where(has_min, -1.0, lo)
    return lo, hi


def _interval_mul(alo, ahi, blo, bhi):
    prods = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return prods.min(axis=0), prods.max(axis=0)


class PolarTransform(Transform):
    """``(x, y) -> (atan2(y, x), hypot(x, y))`` with the angle in ``[-pi, pi)``."""

    name = "polar"
    tag = 1

    def __init__(self, bound: float = 2.0, r_max: float = 2.0, eps: float = 1e-9):
        self.bound = float(bound)
        self.r_max = float(r_max)
        self.eps = float(eps)
        super().__init__((-bound, -bound), (bound, bound), (-math.pi, 0.0), (math.pi, r_max))

    def params(self):
        return [self.bound, self.r_max, self.eps]

    def defined(self, s):
        s = _rows(s)
        return np.hypot(s[:, 0], s[:, 1]) >= self.eps

    def forward(self, s):
        s = _rows(s)
        theta = np.arctan2(s[:, 1], s[:, 0])
        theta = np.where(theta >= math.pi, -math.pi, theta)
        r = np.hypot(s[:, 0], s[:, 1])
        out = np.stack([theta, r], axis=1)
        out[r < self.eps] = np.nan
        return out

    def inverse(self, t):
        t = _rows(t)
        theta, r = t[:, 0], t[:, 1]
        s = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        return s, (r >= self.eps) & self._in_s(s)

    def inverse_box(self, lo, hi):
        lo, hi = _rows(lo), _rows(hi)
        clo, chi = _cos_range(lo[:, 0], hi[:, 0])
        # sin(x) = cos(x - pi/2)
        slo, shi = _cos_range(lo[:, 0] - math.pi / 2, hi[:, 0] - math.pi / 2)
        r0, r1 = np.maximum(lo[:, 1], 0.0), hi[:, 1]
        xlo, xhi = _interval_mul(r0, r1, clo, chi)
        ylo, yhi = _interval_mul(r0, r1, slo, shi)
        return np.stack([xlo, ylo], axis=1), np.stack([xhi, yhi], axis=1)

    def push_primitive(self, region):
        if isinstance(region, Disc) and np.allclose(region.center, 0.0, atol=1e-12):
            return Box((-math.inf, -math.inf), (math.inf, region.radius), closed=True)
        return None


def polar_transform(bound: float = 2.0, r_max: float = 2.0, eps: float = 1e-9) -> PolarTransform:
    return PolarTransform(bound, r_max, eps)


class EnergyTransform(Transform):
    """``(v, p) -> (m g p + m v^2 / 2, v)``: mechanical energy and velocity."""

    name = "energy"
    tag = 2

    def __init__(self, m: float = 1.0, g: float = 9.81, v_bound: float = 13.0, p_max: float = 8.0,
                 e_max: float = 100.0):
        self.m, self.g = float(m), float(g)
        self.v_bound, self.p_max, self.e_max = float(v_bound), float(p_max), float(e_max)
        super().__init__((-v_bound, 0.0), (v_bound, p_max), (0.0, -v_bound), (e_max, v_bound))

    def params(self):
        return [self.m, self.g, self.v_bound, self.p_max, self.e_max]

    def forward(self, s):
        s = _rows(s)
        v, p = s[:, 0], s[:, 1]
        return np.stack([self.m * self.g * p + 0.5 * self.m * v * v, v], axis=1)

    def inverse(self, t):
        t = _rows(t)
        e, v = t[:, 0], t[:, 1]
        p = (e - 0.5 * self.m * v * v) / (self.m * self.g)
        s = np.stack([v, p], axis=1)
        return s, self._in_s(s)

    def inverse_box(self, lo, hi):
        lo, hi = _rows(lo), _rows(hi)
        v0, v1 = lo[:, 1], hi[:, 1]
        sq_max = np.maximum(v0 * v0, v1 * v1)
        sq_min = np.where((v0 <= 0) & (v1 >= 0), 0.0, np.minimum(v0 * v0, v1 * v1))
        mg = self.m * self.g
        p0 = (lo[:, 0] - 0.5 * self.m * sq_max) / mg
        p1 = (hi[:, 0] - 0.5 * self.m * sq_min) / mg
        return np.stack([v0, p0], axis=1), np.stack([v1, p1], axis=1)


def energy_transform(m: float = 1.0, g: float = 9.81, v_bound: float = 13.0, p_max: float = 8.0,
                     e_max: float = 100.0) -> EnergyTransform:
    return EnergyTransform(m, g, v_bound, p_max, e_max)


DEFAULT_POLE_COEFFS = (-4.5508, -141.6953)


class PolyOffsetTransform(Transform):
    """``(theta, omega) -> (theta, omega - p(theta))`` for an odd polynomial ``p``.

    ``coeffs[i]`` multiplies ``theta ** (2 i + 1)``.
    """

    name = "poly_offset"
    tag = 3
    surjective = False

    def __init__(self, coeffs=DEFAULT_POLE_COEFFS, theta_bound: float = 0.2095, omega_bound: float = 3.0):
        self.coeffs = tuple(float(c) for c in coeffs)
        if not self.coeffs:
            raise ValueError("at least one coefficient is required")
        self.theta_bound, self.omega_bound = float(theta_bound), float(omega_bound)
        box_lo, box_hi = (-theta_bound, -omega_bound), (theta_bound, omega_bound)
        super().__init__(box_lo, box_hi, box_lo, box_hi)
        full = np.zeros(2 * len(self.coeffs))
        full[1::2] = self.coeffs
        self._poly = np.polynomial.Polynomial(full)
        crit = self._poly.deriv().roots()
        self._critical = np.sort(crit[np.abs(crit.imag) < 1e-12].real)

    def params(self):
        return [self.theta_bound, self.omega_bound, *self.coeffs]

    def offset(self, theta) -> np.ndarray:
        return self._poly(np.asarray(theta, dtype=float))

    def forward(self, s):
        s = _rows(s)
        return np.stack([s[:, 0], s[:, 1] - self.offset(s[:, 0])], axis=1)

    def inverse(self, t):
        t = _rows(t)
        s = np.stack([t[:, 0], t[:, 1] + self.offset(t[:, 0])], axis=1)
        return s, self._in_s(s)

    def _offset_range(self, a, b):
        vals = [self.offset(a), self.offset(b)]
        lo, hi = np.minimum(*vals), np.maximum(*vals)
        for c in self._critical:
            pc = float(self.offset(c))
            inside = (a <= c) & (c <= b)
            lo = np.where(inside, np.minimum(lo, pc), lo)
            hi = np.where(inside, np.maximum(hi, pc), hi)
        return lo, hi

    def inverse_box(self, lo, hi):
        lo, hi = _rows(lo), _rows(hi)
        plo, phi = self._offset_range(lo[:, 0], hi[:, 0])
        return (np.stack([lo[:, 0], lo[:, 1] + plo], axis=1),
                np.stack([hi[:, 0], hi[:, 1] + phi], axis=1))

    def push_primitive(self, region):
        # regions that constrain only theta are unchanged by the shear
        if isinstance(region, Box) and math.isinf(region.lower[1]) and math.isinf(region.upper[1]):
            return region
        return None


def poly_offset_transform(coeffs=DEFAULT_POLE_COEFFS, theta_bound: float = 0.2095,
                          omega_bound: float = 3.0) -> PolyOffsetTransform:
    return PolyOffsetTransform(coeffs, theta_bound, omega_bound)


def from_params(tag: int, params) -> Transform:
    """Rebuild a transform from its serialized tag and parameter list."""
    params = [float(p) for p in params]
    if tag == IdentityTransform.tag:
        d = len(params) // 2
        return IdentityTransform(params[:d], params[d:])
    if tag == PolarTransform.tag:
        return PolarTransform(*params)
    if tag == EnergyTransform.tag:
        return EnergyTransform(*params)
    if tag == PolyOffsetTransform.tag:
        return PolyOffsetTransform(params[2:], params[0], params[1])
    raise ValueError(f"unknown transform tag {tag}")


def transformed_successor(model, tr: Transform, t, action, disturbances=None) -> np.ndarray:
    """Successors in T of a single T point: ``f(step(f^-1(t), a))`` over every disturbance sample.

    Returns an array of shape ``(n, t_dim)``; empty when ``t`` has no preimage.
    Successors on which ``f`` is undefined are dropped.
    """
    pre = tr.preimage(t)
    if not pre:
        return np.empty((0, tr.t_dim))
    if model.disturbance_arity == 0:
        samples = np.zeros((1, 0))
    else:
        samples = np.asarray(disturbances, dtype=float).reshape(-1, model.disturbance_arity)
    out = []
    for s in pre:
        states = np.repeat(s[None, :], len(samples), axis=0)
        nxt = model.step(states, action, samples if model.disturbance_arity else None)
        out.append(tr.forward(nxt))
    res = np.concatenate(out)
    return res[~np.isnan(res).any(axis=1)]
