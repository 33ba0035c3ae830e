"""Shielded tabular Q-learning and Monte-Carlo evaluation.

Episodes run as a batch in lockstep so that model steps, shield lookups and
reward bookkeeping are vectorized.  A shield restricts every choice, during
exploration and exploitation alike, to the allowed actions of the current
state.  Learning can observe the raw state (``space="S"``) or its image
under the task transform (``space="T"``).
"""
from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import models as M
from . import transform as T
from .errors import CorruptFile, UncontrollableStart
from .grid import GridSpec
from .models import ControlModel, RewardModel
from .shield import QTABLE_MAGIC, Strategy, read_header, write_header
from .transform import Transform

SPACES = ("S", "T")


@dataclass
class Task:
    """Everything needed to run episodes of one case study."""

    name: str
    model: ControlModel
    make_reward: Callable[[], RewardModel]
    sample_starts: Callable[[int, np.random.Generator], np.ndarray]
    horizon: float
    # state dimensions seen by the shield and the transform
    shield_dims: tuple[int, ...]
    transform: Transform
    obs_counts: dict = field(default_factory=dict)
    violation_penalty: float = 100.0

    @property
    def horizon_steps(self) -> int:
        return int(round(self.horizon / self.model.period))

    def observe(self, states, space: str) -> np.ndarray:
        """Observation of a batch of states in the learning space."""
        if space == "S":
            return states
        obs = states.copy()
        obs[:, list(self.shield_dims)] = self.transform.forward(states[:, list(self.shield_dims)])
        return obs

    def obs_grid(self, space: str) -> GridSpec:
        lower = list(self.model.lower)
        upper = list(self.model.upper)
        if space == "T":
            for j, d in enumerate(self.shield_dims):
                lower[d], upper[d] = self.transform.t_lower[j], self.transform.t_upper[j]
        return GridSpec(tuple(lower), tuple(upper), tuple(self.obs_counts[space]))

    def allowed(self, shield: Strategy | None, states) -> np.ndarray:
        """Allowed-action masks for a batch; every action when unshielded."""
        full = (1 << len(self.model.actions)) - 1
        if shield is None:
            return np.full(len(states), full, dtype=np.uint8)
        return shield.masks_in_S(states[:, list(self.shield_dims)])


def _check_space(space):
    if space not in SPACES:
        raise ValueError(f"space must be one of {SPACES}, got {space!r}")


# ---------------------------------------------------------------------------
# Case studies


def _satellite_starts(obstacles, r_lo=1.0, r_hi=1.5):
    obs = np.asarray(obstacles, dtype=float).reshape(-1, 3)

    def sample(n, rng):
        out = np.empty((n, 2))
        filled = 0
        while filled < n:
            m = 2 * (n - filled) + 8
            r = rng.uniform(r_lo, r_hi, m)
            phi = rng.uniform(-math.pi, math.pi, m)
            cand = np.stack([r * np.cos(phi), r * np.sin(phi)], axis=1)
            ok = np.ones(m, dtype=bool)
            for x, y, rad in obs:
                ok &= np.hypot(cand[:, 0] - x, cand[:, 1] - y) > rad
            cand = cand[ok][: n - filled]
            out[filled: filled + len(cand)] = cand
            filled += len(cand)
        return out

    return sample


def _fixed_starts(state):
    state = np.asarray(state, dtype=float)
    return lambda n, rng: np.tile(state, (n, 1))


def _jitter_starts(center, width):
    center = np.asarray(center, dtype=float)
    return lambda n, rng: center + rng.uniform(-width, width, (n, len(center)))


def satellite_task(obstacles=None, destination_radius=0.3, start_radius=(1.0, 1.5),
                   horizon=120.0, obs_counts=None) -> Task:
    model = M.satellite(obstacles)
    obstacles = model.params["obstacles"]
    return Task(
        name="satellite",
        model=model,
        make_reward=lambda: M.DestinationReward(obstacles, destination_radius),
        sample_starts=_satellite_starts(obstacles, *start_radius),
        horizon=horizon,
        shield_dims=(0, 1),
        transform=T.polar_transform(),
        obs_counts=obs_counts or {"S": (40, 40), "T": (40, 40)},
    )


def bouncing_ball_task(start=(0.0, 7.0), horizon=120.0, obs_counts=None, params=M.BallParams()) -> Task:
    return Task(
        name="bouncing_ball",
        model=M.bouncing_ball(params),
        make_reward=M.HitCost,
        sample_starts=_fixed_starts(start),
        horizon=horizon,
        shield_dims=(0, 1),
        transform=T.energy_transform(g=params.g),
        obs_counts=obs_counts or {"S": (26, 16), "T": (25, 26)},
    )


def cart_pole_task(coeffs=T.DEFAULT_POLE_COEFFS, jitter=0.05, horizon=10.0, obs_counts=None,
                   max_offset=2.4) -> Task:
    return Task(
        name="cart_pole",
        model=M.cart_pole(),
        make_reward=lambda: M.CartResetCost(max_offset),
        sample_starts=_jitter_starts((0.0, 0.0, 0.0, 0.0), jitter),
        horizon=horizon,
        shield_dims=(0, 1),
        transform=T.poly_offset_transform(coeffs),
        obs_counts=obs_counts or {"S": (20, 20, 4, 4), "T": (20, 20, 4, 4)},
    )


TASKS = {
    "satellite": satellite_task,
    "bouncing_ball": bouncing_ball_task,
    "cart_pole": cart_pole_task,
}


# ---------------------------------------------------------------------------
# Q-table


@dataclass
class QTable:
    grid: GridSpec
    actions: tuple[str, ...]
    space: str = "S"
    alpha: float = 0.1
    gamma: float = 0.97
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.7
    values: np.ndarray | None = None

    def __post_init__(self):
        _check_space(self.space)
        if self.values is None:
            self.values = np.zeros((self.grid.size, len(self.actions)))
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.size, len(self.actions))

    def __eq__(self, other):
        return (
            isinstance(other, QTable)
            and self.grid == other.grid
            and self.actions == other.actions
            and self.space == other.space
            and self.hyper() == other.hyper()
            and np.array_equal(self.values, other.values)
        )

    def hyper(self) -> tuple[float, ...]:
        return (self.alpha, self.gamma, self.eps_start, self.eps_end, self.eps_fraction)

    def epsilon(self, episode: int, episodes: int) -> float:
        """Linear decay from ``eps_start`` to ``eps_end`` over the first ``eps_fraction`` of training."""
        span = self.eps_fraction * episodes
        if span <= 0:
            return self.eps_end
        frac = min(1.0, episode / span)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def cells(self, obs) -> np.ndarray:
        """Observation cells, clamping points outside the grid onto its border cells."""
        lo = np.asarray(self.grid.lower)
        hi = np.nextafter(np.asarray(self.grid.upper), -np.inf)
        return self.grid.cell_ids(np.clip(obs, lo, hi))

    def greedy(self, cells, allowed) -> np.ndarray:
        """Highest-valued allowed action per row; ties go to the lowest index."""
        q = self.values[cells]
        bits = (allowed[:, None] >> np.arange(len(self.actions))) & 1
        q = np.where(bits.astype(bool), q, -np.inf)
        return np.argmax(q, axis=1)

    def best_value(self, cells, allowed) -> np.ndarray:
        q = self.values[cells]
        bits = ((allowed[:, None] >> np.arange(len(self.actions))) & 1).astype(bool)
        q = np.where(bits, q, -np.inf)
        best = q.max(axis=1)
        return np.where(np.isfinite(best), best, 0.0)

    # -- persistence --------------------------------------------------------

    def to_bytes(self, transform: Transform) -> bytes:
        buf = io.BytesIO()
        write_header(buf, QTABLE_MAGIC, self.grid, self.actions, transform)
        buf.write(struct.pack("<B5d", SPACES.index(self.space), *self.hyper()))
        buf.write(self.values.astype("<f8").tobytes())
        return buf.getvalue()

    def save(self, path, transform: Transform):
        Path(path).write_bytes(self.to_bytes(transform))

    @classmethod
    def from_bytes(cls, data: bytes) -> tuple[QTable, Transform]:
        buf = io.BytesIO(data)
        grid, actions, transform = read_header(buf, QTABLE_MAGIC)
        raw = buf.read(struct.calcsize("<B5d"))
        if len(raw) != struct.calcsize("<B5d"):
            raise CorruptFile("truncated Q-table record")
        space, *hyper = struct.unpack("<B5d", raw)
        if space >= len(SPACES):
            raise CorruptFile(f"unknown learning space {space}")
        body = buf.read()
        if len(body) != 8 * grid.size * len(actions):
            raise CorruptFile(f"value array has {len(body)} bytes, expected {8 * grid.size * len(actions)}")
        values = np.frombuffer(body, dtype="<f8").astype(float)
        return cls(grid, actions, SPACES[space], *hyper, values=values), transform

    @classmethod
    def load(cls, path) -> tuple[QTable, Transform]:
        return cls.from_bytes(Path(path).read_bytes())


def new_qtable(task: Task, space: str = "S", **hyper) -> QTable:
    _check_space(space)
    return QTable(task.obs_grid(space), task.model.actions, space, **hyper)


# ---------------------------------------------------------------------------
# Episodes


@dataclass(frozen=True)
class EpisodeResult:
    ret: float
    violations: int
    steps: int
    seed: int


@dataclass
class Summary:
    episodes: list[EpisodeResult]

    @property
    def mean_return(self) -> float:
        return float(np.mean([e.ret for e in self.episodes])) if self.episodes else 0.0

    @property
    def violations(self) -> int:
        return int(sum(e.violations for e in self.episodes))

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["episode", "return", "violations", "steps"])
        for i, e in enumerate(self.episodes):
            w.writerow([i, repr(e.ret), e.violations, e.steps])
        w.writerow(["summary", repr(self.mean_return), self.violations, sum(e.steps for e in self.episodes)])
        return out.getvalue()


def controllable_starts(task: Task, shields, n: int, rng, max_rounds: int = 1000) -> np.ndarray:
    """Draw ``n`` start states that every given shield considers controllable."""
    shields = [s for s in shields if s is not None]
    out = np.empty((n, task.model.dim))
    filled = 0
    for _ in range(max_rounds):
        cand = task.sample_starts(n - filled, rng)
        ok = np.ones(len(cand), dtype=bool)
        for sh in shields:
            ok &= task.allowed(sh, cand) > 0
        cand = cand[ok]
        out[filled: filled + len(cand)] = cand
        filled += len(cand)
        if filled == n:
            return out
    raise UncontrollableStart(f"{task.name}: could not draw controllable start states")


def _check_starts(task: Task, shield, starts):
    if shield is not None:
        bad = task.allowed(shield, starts) == 0
        if bad.any():
            raise UncontrollableStart(
                f"{task.name}: start state {tuple(starts[np.argmax(bad)])} is outside the controllable set"
            )


def _random_allowed(allowed, rng, n_actions) -> np.ndarray:
    bits = ((allowed[:, None] >> np.arange(n_actions)) & 1).astype(float)
    bits[bits.sum(axis=1) == 0] = 1.0
    cum = np.cumsum(bits / bits.sum(axis=1, keepdims=True), axis=1)
    return np.minimum((rng.random(len(allowed))[:, None] > cum).sum(axis=1), n_actions - 1)


def _run_batch(task: Task, starts, rng, shield=None, qtable=None, eps=None, horizon=None, learn=False):
    """Run a batch of episodes in lockstep; returns per-episode (return, violations, steps).

    ``eps`` is a per-episode exploration rate (``None``: greedy).  Without a
    Q-table actions are uniform over the allowed set.  Episodes end at the
    horizon or at the first unsafe state.
    """
    model = task.model
    n, n_actions = len(starts), len(model.actions)
    horizon = task.horizon_steps if horizon is None else horizon
    reward = task.make_reward()
    states = starts.copy()
    reward.reset(states, rng)
    sign = 1.0 if reward.maximize else -1.0
    returns = np.zeros(n)
    violations = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    u = None
    for _ in range(horizon):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            break
        s = states[idx]
        allowed = task.allowed(shield, s)
        if qtable is not None:
            cells = qtable.cells(task.observe(s, qtable.space))
            actions = qtable.greedy(cells, np.where(allowed == 0, (1 << n_actions) - 1, allowed))
            if eps is not None:
                explore = rng.random(len(idx)) < eps[idx]
                actions = np.where(explore, _random_allowed(allowed, rng, n_actions), actions)
        else:
            actions = _random_allowed(allowed, rng, n_actions)
        if model.disturbance_arity:
            u = rng.random((len(idx), model.disturbance_arity))
        nxt = np.empty_like(s)
        for a in range(n_actions):
            sel = actions == a
            if sel.any():
                nxt[sel] = model.step(s[sel], a, None if u is None else u[sel])
        r, nxt = reward.step(s, actions, nxt, rng, idx)
        unsafe = ~model.is_safe(nxt)
        returns[idx] += r
        violations[idx] += unsafe
        steps[idx] += 1
        if learn:
            penalty = np.where(unsafe, task.violation_penalty, 0.0)
            target_r = sign * r - penalty
            nxt_cells = qtable.cells(task.observe(nxt, qtable.space))
            future = qtable.best_value(nxt_cells, task.allowed(shield, nxt))
            target = target_r + qtable.gamma * np.where(unsafe, 0.0, future)
            # episodes sharing a (cell, action) take one step toward their mean target
            flat = cells * n_actions + actions
            total = np.bincount(flat, weights=target, minlength=qtable.values.size)
            count = np.bincount(flat, minlength=qtable.values.size)
            hit = np.flatnonzero(count)
            rc = np.divmod(hit, n_actions)
            qtable.values[rc] += qtable.alpha * (total[hit] / count[hit] - qtable.values[rc])
        states[idx] = nxt
        alive[idx[unsafe]] = False
    return returns, violations, steps


def train(task: Task, shield: Strategy | None = None, space: str = "S", episodes: int = 100,
          seed: int = 0, batch: int = 10, starts=None, **hyper) -> QTable:
    """Tabular Q-learning, optionally under a shield.

    Episodes run ``batch`` at a time; updates within a step are applied
    together.  ``starts`` pins the start states (cycled), otherwise they are
    drawn from the task and redrawn until controllable.
    """
    q = new_qtable(task, space, **hyper)
    rng = np.random.default_rng(seed)
    if starts is not None:
        starts = np.atleast_2d(np.asarray(starts, dtype=float))
        _check_starts(task, shield, starts)
    done = 0
    while done < episodes:
        n = min(batch, episodes - done)
        if starts is None:
            s0 = controllable_starts(task, [shield], n, rng)
        else:
            s0 = starts[np.arange(done, done + n) % len(starts)]
        eps = np.array([q.epsilon(done + i, episodes) for i in range(n)])
        _run_batch(task, s0, rng, shield, q, eps, learn=True)
        done += n
    return q


def evaluate(task: Task, policy: QTable | None = None, shield: Strategy | None = None,
             episodes: int = 1000, horizon: int | None = None, seed: int = 0, batch: int = 1000,
             start_shields=()) -> Summary:
    """Greedy (or, without a policy, uniformly random) episodes under an optional shield.

    Start states are drawn until controllable under ``shield`` and every
    shield in ``start_shields``, so compared runs can share start states.
    """
    rng = np.random.default_rng(seed)
    results = []
    done = 0
    while done < episodes:
        n = min(batch, episodes - done)
        s0 = controllable_starts(task, [shield, *start_shields], n, rng)
        ret, vio, steps = _run_batch(task, s0, rng, shield, policy, None, horizon)
        results += [EpisodeResult(float(r), int(v), int(k), seed) for r, v, k in zip(ret, vio, steps)]
        done += n
    return Summary(results)


@dataclass
class Rollout:
    states: np.ndarray
    actions: np.ndarray
    unsafe: np.ndarray

    def to_csv(self, names) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["step", *names, "action", "unsafe"])
        for i, s in enumerate(self.states):
            a = self.actions[i] if i < len(self.actions) else ""
            w.writerow([i, *(repr(float(x)) for x in s), a, int(self.unsafe[i])])
        return out.getvalue()


def random_rollout(model: ControlModel, steps: int, seed: int = 0, start=None) -> Rollout:
    """Uniformly random actions from ``start`` (default: the centre of S); never stops early."""
    rng = np.random.default_rng(seed)
    s = np.asarray(start if start is not None else (np.asarray(model.lower) + model.upper) / 2, dtype=float)
    states = [s]
    actions = []
    for _ in range(steps):
        a = int(rng.integers(len(model.actions)))
        u = rng.random(model.disturbance_arity) if model.disturbance_arity else None
        s = model.step(s, a, u)
        states.append(s)
        actions.append(model.actions[a])
    states = np.array(states)
    return Rollout(states, np.array(actions), ~model.is_safe(states))
