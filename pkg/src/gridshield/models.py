"""Discrete-time control systems of the case studies.

Every model exposes a batched successor ``step(states, action, u)`` where
``u`` holds disturbance samples in ``[0, 1]^k``; deterministic models have
``k = 0`` and ignore it.  Successors may leave the model's bounding box;
synthesis treats that as an escape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import Box, Complement, Disc, Intersection, Region, Union


@dataclass(frozen=True, eq=False)
class ControlModel:
    name: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    actions: tuple[str, ...]
    step_fn: Callable[[np.ndarray, int, np.ndarray], np.ndarray]
    disturbance_arity: int
    safety: Region
    period: float
    params: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def action_index(self, a) -> int:
        if isinstance(a, (int, np.integer)):
            if not 0 <= a < len(self.actions):
                raise ValueError(f"{self.name}: no action with index {a}")
            return int(a)
        try:
            return self.actions.index(a)
        except ValueError:
            raise ValueError(f"{self.name}: unknown action {a!r}; expected one of {self.actions}") from None

    def step(self, states, action, u=None) -> np.ndarray:
        """Successor of one state (1-D input) or a batch of states (2-D input)."""
        s = np.asarray(states, dtype=float)
        single = s.ndim == 1
        s = np.atleast_2d(s)
        a = self.action_index(action)
        if self.disturbance_arity == 0:
            u = np.zeros((s.shape[0], 0))
        else:
            if u is None:
                raise ValueError(f"{self.name} needs {self.disturbance_arity} disturbance value(s)")
            u = np.asarray(u, dtype=float).reshape(-1, self.disturbance_arity)
            if u.shape[0] == 1 and s.shape[0] > 1:
                u = np.broadcast_to(u, (s.shape[0], self.disturbance_arity))
        out = self.step_fn(s, a, u)
        return out[0] if single else out

    def in_bounds(self, states) -> np.ndarray:
        s = np.atleast_2d(np.asarray(states, dtype=float))
        return np.all((s >= np.asarray(self.lower)) & (s < np.asarray(self.upper)), axis=1)

    def is_safe(self, states) -> np.ndarray:
        return self.safety.contains(states)


# ---------------------------------------------------------------------------
# Harmonic oscillator and satellite


def rotation(t: float) -> np.ndarray:
    """Closed form of ``exp(A t)`` for ``A = [[0, 1], [-1, 0]]``."""
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s], [-s, c]])


def oscillator_step(s, t: float = 1.2) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return s @ rotation(t).T


def oscillator(period: float = 1.2, obstacle_radius: float = 0.4, bound: float = 2.0) -> ControlModel:
    rot = rotation(period)

    def step(s, a, u):
        return s @ rot.T

    return ControlModel(
        name="oscillator",
        lower=(-bound, -bound),
        upper=(bound, bound),
        actions=("a",),
        step_fn=step,
        disturbance_arity=0,
        safety=Complement(Disc((0.0, 0.0), obstacle_radius)),
        period=period,
        params={"obstacle_radius": obstacle_radius, "bound": bound},
    )


SATELLITE_SCALE = {"ahead": 1.0, "out": 1.01, "in": 0.99}


def default_obstacles() -> list[tuple[float, float, float]]:
    """Central disc plus four smaller discs on the diagonals, as ``(x, y, radius)``."""
    obstacles = [(0.0, 0.0, 0.4)]
    for deg in (45, 135, 225, 315):
        rad = math.radians(deg)
        obstacles.append((1.2 * math.cos(rad), 1.2 * math.sin(rad), 0.3))
    return obstacles


def _satellite_batch(s, a, period, scales):
    return (s * scales[a]) @ rotation(period).T


def satellite_step(s, a, period: float = 0.05) -> np.ndarray:
    scales = list(SATELLITE_SCALE.values())
    a = a if isinstance(a, int) else list(SATELLITE_SCALE).index(a)
    return _satellite_batch(np.asarray(s, dtype=float), a, period, scales)


def satellite(obstacles=None, period: float = 0.05, max_radius: float = 2.0, bound: float = 2.0) -> ControlModel:
    obstacles = default_obstacles() if obstacles is None else [tuple(o) for o in obstacles]
    scales = list(SATELLITE_SCALE.values())
    rot = rotation(period)

    def step(s, a, u):
        return (s * scales[a]) @ rot.T

    blocked = Union(tuple(Disc((x, y), r) for x, y, r in obstacles))
    return ControlModel(
        name="satellite",
        lower=(-bound, -bound),
        upper=(bound, bound),
        actions=tuple(SATELLITE_SCALE),
        step_fn=step,
        disturbance_arity=0,
        safety=Intersection((Disc((0.0, 0.0), max_radius), Complement(blocked))),
        period=period,
        params={"obstacles": obstacles, "max_radius": max_radius, "bound": bound},
    )


# ---------------------------------------------------------------------------
# Bouncing ball


@dataclass(frozen=True)
class BallParams:
    g: float = 9.81
    period: float = 0.1
    hit_height: float = 4.0
    hit_speed: float = 4.0
    damping_min: float = 0.85
    damping_span: float = 0.12
    # Post-bounce speeds below this put the ball to rest; avoids Zeno chains.
    rest_speed: float = 0.1
    max_bounces: int = 64


def _ball_batch(s, a, u, prm: BallParams):
    v = s[:, 0].copy()
    p = s[:, 1].copy()
    if a == 1:
        hit = p >= prm.hit_height
        v[hit] = np.minimum(v[hit], 0.0) - prm.hit_speed
    c = prm.damping_min + prm.damping_span * u[:, 0]
    g = prm.g
    remaining = np.full(v.shape, prm.period)
    active = np.ones(v.shape, dtype=bool)
    resting = (p <= 0.0) & (np.abs(v) < prm.rest_speed)
    v[resting] = 0.0
    p[resting] = 0.0
    active &= ~resting
    for _ in range(prm.max_bounces):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        vi, pi, ti = v[idx], np.maximum(p[idx], 0.0), remaining[idx]
        # time until p(t) = pi + vi t - g t^2 / 2 reaches zero
        t_ground = (vi + np.sqrt(vi * vi + 2.0 * g * pi)) / g
        lands = t_ground < ti
        fly = ~lands
        j = idx[fly]
        tf = ti[fly]
        v[j] = vi[fly] - g * tf
        p[j] = np.maximum(pi[fly] + vi[fly] * tf - 0.5 * g * tf * tf, 0.0)
        active[j] = False
        k = idx[lands]
        tl = t_ground[lands]
        impact = vi[lands] - g * tl
        v_new = -c[k] * impact
        remaining[k] = ti[lands] - tl
        p[k] = 0.0
        stop = v_new < prm.rest_speed
        v[k] = np.where(stop, 0.0, v_new)
        active[k[stop]] = False
    else:
        v[active] = 0.0
        p[active] = 0.0
    return np.stack([v, p], axis=1)


def bouncing_ball_step(s, a, u: float = 0.0, params: BallParams = BallParams()) -> np.ndarray:
    a = a if isinstance(a, int) else ("nohit", "hit").index(a)
    s = np.asarray(s, dtype=float)
    out = _ball_batch(np.atleast_2d(s), a, np.atleast_2d(np.asarray(u, dtype=float)).reshape(-1, 1), params)
    return out[0] if s.ndim == 1 else out


def mechanical_energy(s, m: float = 1.0, g: float = 9.81) -> np.ndarray:
    s = np.atleast_2d(np.asarray(s, dtype=float))
    return m * g * s[:, 1] + 0.5 * m * s[:, 0] ** 2


def bouncing_ball(params: BallParams = BallParams(), v_bound: float = 13.0, p_max: float = 8.0) -> ControlModel:
    unsafe = Box((-1.0, -math.inf), (1.0, 0.01), closed=True)
    return ControlModel(
        name="bouncing_ball",
        lower=(-v_bound, 0.0),
        upper=(v_bound, p_max),
        actions=("nohit", "hit"),
        step_fn=lambda s, a, u: _ball_batch(s, a, u, params),
        disturbance_arity=1,
        safety=Complement(unsafe),
        period=params.period,
        params={"ball": params},
    )


# ---------------------------------------------------------------------------
# Cart-pole


@dataclass(frozen=True)
class CartPoleParams:
    g: float = 9.8
    length: float = 0.5
    m_pole: float = 0.1
    m_cart: float = 1.0
    force: float = 10.0
    period: float = 0.02
    substeps: int = 1
    cone: float = 0.2095


def _cart_pole_rhs(y, F, prm: CartPoleParams):
    theta, omega, v = y[:, 0], y[:, 1], y[:, 3]
    total = prm.m_cart + prm.m_pole
    sin, cos = np.sin(theta), np.cos(theta)
    omega_dot = (prm.g * sin + cos * ((-F - prm.m_pole * prm.length * omega**2 * sin) / total)) / (
        prm.length * (4.0 / 3.0 - prm.m_pole * cos**2 / total)
    )
    v_dot = (F + prm.m_pole * prm.length * (omega**2 * sin - omega_dot * cos)) / total
    return np.stack([omega, omega_dot, v, v_dot], axis=1)


def _cart_pole_batch(s, a, prm: CartPoleParams, force=None):
    F = (prm.force if a == 1 else -prm.force) if force is None else force
    h = prm.period / prm.substeps
    y = s
    for _ in range(prm.substeps):
        k1 = _cart_pole_rhs(y, F, prm)
        k2 = _cart_pole_rhs(y + 0.5 * h * k1, F, prm)
        k3 = _cart_pole_rhs(y + 0.5 * h * k2, F, prm)
        k4 = _cart_pole_rhs(y + h * k3, F, prm)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def cart_pole_step(s, a, params: CartPoleParams = CartPoleParams(), force=None) -> np.ndarray:
    """One control period of the cart-pole with RK4.  ``force`` overrides the action's push."""
    a = a if isinstance(a, int) else ("left", "right").index(a)
    s = np.asarray(s, dtype=float)
    out = _cart_pole_batch(np.atleast_2d(s), a, params, force)
    return out[0] if s.ndim == 1 else out


def cart_pole(params: CartPoleParams = CartPoleParams(), theta_bound: float = 0.2095,
              omega_bound: float = 3.0, x_bound: float = 2.4, v_bound: float = 3.0) -> ControlModel:
    """Full four-dimensional cart-pole ``(theta, omega, x, v)``."""
    inf = math.inf
    return ControlModel(
        name="cart_pole",
        lower=(-theta_bound, -omega_bound, -x_bound, -v_bound),
        upper=(theta_bound, omega_bound, x_bound, v_bound),
        actions=("left", "right"),
        step_fn=lambda s, a, u: _cart_pole_batch(s, a, params),
        disturbance_arity=0,
        safety=Box((-params.cone, -inf, -inf, -inf), (params.cone, inf, inf, inf), closed=True),
        period=params.period,
        params={"cart_pole": params},
    )


def pole(params: CartPoleParams = CartPoleParams(), theta_bound: float = 0.2095,
         omega_bound: float = 3.0) -> ControlModel:
    """The pole dimensions ``(theta, omega)`` of the cart-pole, used for shield synthesis.

    The pole's motion does not depend on the cart position or velocity, so
    the cart dimensions are carried as zeros and dropped.
    """

    def step(s, a, u):
        full = np.zeros((s.shape[0], 4))
        full[:, :2] = s
        return _cart_pole_batch(full, a, params)[:, :2]

    return ControlModel(
        name="pole",
        lower=(-theta_bound, -omega_bound),
        upper=(theta_bound, omega_bound),
        actions=("left", "right"),
        step_fn=step,
        disturbance_arity=0,
        safety=Box((-params.cone, -math.inf), (params.cone, math.inf), closed=True),
        period=params.period,
        params={"cart_pole": params},
    )


# ---------------------------------------------------------------------------
# Reward models.  Each holds per-episode state for a batch of parallel episodes.


class RewardModel:
    maximize = True

    def reset(self, states, rng):
        pass

    def step(self, states, actions, next_states, rng, rows=None):
        """Return ``(reward, next_states)``; the model may rewrite the successor.

        ``rows`` selects which episodes of the batch the arrays belong to
        (default: all of them).
        """
        raise NotImplementedError


class DestinationReward(RewardModel):
    """+1 each time the agent touches the current destination disc, which then respawns."""

    maximize = True

    def __init__(self, obstacles, radius: float = 0.3, max_radius: float = 2.0):
        self.obstacles = np.asarray(obstacles, dtype=float).reshape(-1, 3)
        self.radius = radius
        self.max_radius = max_radius
        self.targets = np.zeros((0, 2))

    def _spawn(self, n, rng):
        out = np.empty((n, 2))
        filled = 0
        while filled < n:
            m = 2 * (n - filled) + 8
            r = self.max_radius * np.sqrt(rng.random(m))
            phi = rng.uniform(-math.pi, math.pi, m)
            cand = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
            ok = np.ones(m, dtype=bool)
            for x, y, rad in self.obstacles:
                ok &= np.hypot(cand[:, 0] - x, cand[:, 1] - y) > rad
            cand = cand[ok][: n - filled]
            out[filled: filled + len(cand)] = cand
            filled += len(cand)
        return out

    def reset(self, states, rng):
        self.targets = self._spawn(len(states), rng)

    def step(self, states, actions, next_states, rng, rows=None):
        rows = np.arange(len(self.targets)) if rows is None else rows
        d = np.hypot(*(next_states[:, :2] - self.targets[rows]).T)
        got = d <= self.radius
        if got.any():
            self.targets[rows[got]] = self._spawn(int(got.sum()), rng)
        return got.astype(float), next_states


class HitCost(RewardModel):
    """Cost 1 for every ``hit`` action taken."""

    maximize = False

    def __init__(self, hit_action: int = 1):
        self.hit_action = hit_action

    def step(self, states, actions, next_states, rng, rows=None):
        return (np.asarray(actions) == self.hit_action).astype(float), next_states


class CartResetCost(RewardModel):
    """Cost 1 each time the cart drifts more than ``max_offset`` from its start; the cart is then reset."""

    maximize = False

    def __init__(self, max_offset: float = 2.4):
        self.max_offset = max_offset
        self.origin = np.zeros((0, 2))

    def reset(self, states, rng):
        self.origin = np.asarray(states, dtype=float)[:, 2:4].copy()

    def step(self, states, actions, next_states, rng, rows=None):
        origin = self.origin if rows is None else self.origin[rows]
        far = np.abs(next_states[:, 2] - origin[:, 0]) > self.max_offset
        if far.any():
            next_states = next_states.copy()
            next_states[far, 2:4] = origin[far]
        return far.astype(float), next_states


MODELS = {
    "oscillator": oscillator,
    "satellite": satellite,
    "bouncing_ball": bouncing_ball,
    "cart_pole": cart_pole,
    "pole": pole,
}
