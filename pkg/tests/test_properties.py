"""Invariants checked over generated inputs."""
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from gridshield import _kernels_py, models as M, synthesis as syn, transform as T
from gridshield.grid import Box, Complement, Disc, GridSpec, HalfPlane, Intersection, Union
from gridshield.shield import Strategy, to_tree
from gridshield.synthesis import TransitionTable

try:
    from gridshield import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

BACKENDS = [_kernels_py] + ([_kernels_c] if _kernels_c is not None else [])

finite = st.floats(-50, 50, allow_nan=False)


@st.composite
def grids(draw, max_dim=3):
    d = draw(st.integers(1, max_dim))
    lo = [draw(finite) for _ in range(d)]
    hi = [x + draw(st.floats(0.01, 20)) for x in lo]
    counts = [draw(st.integers(1, 6)) for _ in range(d)]
    return GridSpec(lo, hi, counts)


# -- grid ---------------------------------------------------------------------


@given(grids(), st.data())
def test_every_point_in_exactly_one_cell(grid, data):
    unit = [data.draw(st.floats(0, 1, exclude_max=True)) for _ in range(grid.dim)]
    p = np.asarray(grid.lower) + np.asarray(unit) * (np.asarray(grid.upper) - grid.lower)
    assume(grid.contains(p[None])[0])
    lo, hi = grid.cell_bounds()
    owners = np.flatnonzero(np.all((p >= lo) & (p < hi), axis=1))
    assert len(owners) == 1
    assert grid.flat_id(grid.cell_of(p)) == owners[0]


@st.composite
def regions(draw, depth=2):
    kind = draw(st.sampled_from(["disc", "box", "half"] + (["union", "inter", "not"] if depth else [])))
    if kind == "disc":
        return Disc((draw(st.floats(-3, 3)), draw(st.floats(-3, 3))), draw(st.floats(0, 3)))
    if kind == "box":
        x, y = draw(st.floats(-3, 3)), draw(st.floats(-3, 3))
        return Box((x, y), (x + draw(st.floats(0, 4)), y + draw(st.floats(0, 4))), closed=draw(st.booleans()))
    if kind == "half":
        a = draw(st.floats(0, 2 * math.pi))
        return HalfPlane((math.cos(a), math.sin(a)), draw(st.floats(-3, 3)))
    if kind == "not":
        return Complement(draw(regions(depth - 1)))
    parts = tuple(draw(st.lists(regions(depth - 1), min_size=1, max_size=3)))
    return Union(parts) if kind == "union" else Intersection(parts)


G2 = GridSpec((-3, -3), (3, 3), (12, 12))


@given(regions())
def test_inner_within_outer_and_duality(region):
    inner, outer = G2.inner_mask(region), G2.outer_mask(region)
    assert not (inner & ~outer).any()
    assert np.array_equal(G2.inner_mask(Complement(region)), ~outer)
    assert np.array_equal(G2.outer_mask(Complement(region)), ~inner)


@given(regions())
def test_classification_agrees_with_samples(region):
    lo, hi = G2.cell_bounds()
    cls = region.classify(lo, hi)
    u = np.random.default_rng(0).random((16, 2)) * (1 - 1e-9)
    for i in range(0, G2.size, 7):
        pts = lo[i] + u * (hi[i] - lo[i])
        inside = region.contains(pts)
        if cls[i] == 2:
            assert inside.all()
        elif cls[i] == 0:
            assert not inside.any()


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 2), st.floats(0, 2))
def test_approximations_are_monotone(x, y, r, extra):
    small, big = Disc((x, y), r), Disc((x, y), r + extra)
    assert not (G2.inner_mask(small) & ~G2.inner_mask(big)).any()
    assert not (G2.outer_mask(small) & ~G2.outer_mask(big)).any()


# -- transforms ---------------------------------------------------------------

TRANSFORMS = [
    T.identity_transform((-2, -2), (2, 2)),
    T.polar_transform(),
    T.energy_transform(),
    T.poly_offset_transform(),
    T.poly_offset_transform((-2.23675176674951, -108.26359193022034)),
]


@pytest.mark.parametrize("tr", TRANSFORMS, ids=lambda t: t.name)
def test_round_trip_10k(tr):
    rng = np.random.default_rng(11)
    s = rng.uniform(tr.s_lower, tr.s_upper, (10_000, 2))
    s = s[tr.defined(s)]
    t = tr.forward(s)
    back, ok = tr.inverse(t)
    assert ok.all()
    assert np.abs(back - s).max() < 1e-9
    assert np.abs(tr.forward(back) - t).max() < 1e-9


@given(st.floats(-2, 2, exclude_max=True), st.floats(-2, 2, exclude_max=True))
def test_polar_angle_range(x, y):
    tr = T.polar_transform()
    assume(math.hypot(x, y) >= 1e-9)
    theta = tr.forward([[x, y]])[0, 0]
    assert -math.pi <= theta < math.pi


def _commuting_cases():
    return [
        (M.oscillator(), T.polar_transform()),
        (M.satellite(), T.polar_transform()),
        (M.bouncing_ball(), T.energy_transform()),
        (M.pole(), T.poly_offset_transform()),
        (M.oscillator(), T.identity_transform((-2, -2), (2, 2))),
    ]


@pytest.mark.parametrize("case", range(5))
@given(data=st.data())
def test_transformed_successor_commutes(case, data):
    model, tr = _commuting_cases()[case]
    s = np.array([data.draw(st.floats(lo, hi, exclude_max=True)) for lo, hi in zip(model.lower, model.upper)])
    assume(tr.defined(s[None])[0] and tr.in_codomain(tr.forward(s[None]))[0])
    a = data.draw(st.integers(0, len(model.actions) - 1))
    u = [data.draw(st.floats(0, 1))] if model.disturbance_arity else None
    direct = tr.forward(model.step(s[None], a, u))
    assume(not np.isnan(direct).any())
    via_T = T.transformed_successor(model, tr, tr.forward(s[None])[0], a, u)
    assert len(via_T) == 1
    d = np.abs(via_T[0] - direct[0])
    if tr.name == "polar":
        d[0] = min(d[0], 2 * math.pi - d[0])
    assert d.max() < 1e-9


@given(st.floats(-5, 5), st.floats(0.5, 8), st.floats(0, 1))
def test_energy_conserved_without_bounce(v, p, u):
    # no contact within one period: the parabola stays above ground
    assume(p + v * 0.1 - 0.5 * 9.81 * 0.01 > 0 and (v <= 0 or p > 0))
    t_ground = (v + math.sqrt(v * v + 2 * 9.81 * p)) / 9.81
    assume(t_ground > 0.1 + 1e-6)
    nxt = M.bouncing_ball_step(np.array([v, p]), "nohit", u)
    assert abs(M.mechanical_energy(nxt)[0] - M.mechanical_energy([v, p])[0]) < 1e-9


@given(st.floats(-13, 13), st.floats(0, 8, exclude_max=True), st.floats(0, 1))
def test_energy_never_grows_without_hit(v, p, u):
    nxt = M.bouncing_ball_step(np.array([v, p]), "nohit", u)
    assert M.mechanical_energy(nxt)[0] <= M.mechanical_energy([v, p])[0] + 1e-9


@given(st.floats(-2, 2), st.floats(-2, 2), st.sampled_from(["ahead", "out", "in"]))
def test_satellite_radius_scales(x, y, a):
    r = math.hypot(x, y)
    out = M.satellite_step(np.array([x, y]), a)
    assert math.hypot(*out) == pytest.approx(r * M.SATELLITE_SCALE[a], rel=1e-12, abs=1e-15)


@given(st.floats(-0.2, 0.2), st.floats(-2, 2), st.sampled_from(["left", "right"]))
def test_rk4_substeps_converge(theta, omega, a):
    s = np.array([theta, omega, 0.0, 0.0])
    one = M.cart_pole_step(s, a, M.CartPoleParams(substeps=1))
    many = M.cart_pole_step(s, a, M.CartPoleParams(substeps=32))
    assert np.abs(one - many).max() < 1e-6


# -- fixpoint -----------------------------------------------------------------


@st.composite
def tables(draw):
    n = draw(st.integers(1, 25))
    k = draw(st.integers(1, 3))
    succ = [sorted(draw(st.sets(st.integers(0, n - 1), max_size=4))) for _ in range(n * k)]
    esc = [draw(st.booleans()) if draw(st.integers(0, 4)) == 0 else False for _ in range(n * k)]
    init = np.array([draw(st.booleans()) for _ in range(n)])
    indptr = np.concatenate([[0], np.cumsum([len(x) for x in succ])]).astype(np.int64)
    indices = np.array([c for x in succ for c in x], dtype=np.int64)
    grid = GridSpec((0,), (1,), (n,))
    tt = TransitionTable(grid, tuple("abc"[:k]), indptr, indices, np.array(esc, dtype=np.uint8),
                         np.ones(n, dtype=bool))
    return tt, succ, esc, init


def reference_fixpoint(succ, esc, init, n, k, order):
    """Remove cells one at a time, in the given order, until nothing changes."""
    safe = set(np.flatnonzero(init).tolist())
    changed = True
    while changed:
        changed = False
        for c in order:
            if c in safe and not any(
                not esc[a * n + c] and all(d in safe for d in succ[a * n + c]) for a in range(k)
            ):
                safe.discard(c)
                changed = True
    out = np.zeros(n, dtype=bool)
    out[list(safe)] = True
    return out


@given(tables(), st.randoms(use_true_random=False))
def test_fixpoint_is_order_independent(table, rnd):
    tt, succ, esc, init = table
    n, k = tt.n_cells, tt.n_actions
    order = list(range(n))
    rnd.shuffle(order)
    expect = reference_fixpoint(succ, esc, init, n, k, order)
    assert np.array_equal(reference_fixpoint(succ, esc, init, n, k, order[::-1]), expect)
    for backend in BACKENDS:
        safe, _ = backend.fixpoint_sweeps(*tt.arrays(), init.astype(np.uint8))
        assert np.array_equal(np.asarray(safe, dtype=bool), expect)


@given(tables())
def test_backends_agree(table):
    tt, _, _, init = table
    results = []
    for backend in BACKENDS:
        safe, sweeps = backend.fixpoint_sweeps(*tt.arrays(), init.astype(np.uint8))
        masks = backend.action_masks(*tt.arrays(), safe)
        bounded, _ = backend.fixpoint_sweeps(*tt.arrays(), init.astype(np.uint8), 1)
        results.append((np.asarray(safe).tobytes(), sweeps, np.asarray(masks).tobytes(),
                        np.asarray(bounded).tobytes()))
    assert all(r == results[0] for r in results)


@given(tables(), st.data())
def test_fixpoint_monotone_and_sound(table, data):
    tt, succ, esc, init = table
    extra = np.array([data.draw(st.booleans()) for _ in range(tt.n_cells)])
    small, big = syn.fixpoint(tt, init), syn.fixpoint(tt, init | extra)
    assert not (small & ~big).any()
    assert not (small & ~init).any()
    masks = syn.most_permissive(tt, small, T.identity_transform((0,), (1,))).masks
    for c in np.flatnonzero(small):
        assert masks[c]
        for a in range(tt.n_actions):
            if masks[c] >> a & 1:
                row = a * tt.n_cells + c
                assert not esc[row] and small[succ[row]].all()


@given(tables())
def test_bounded_fixpoint_is_antitone(table):
    tt, _, _, init = table
    prev = init
    for k in range(tt.n_cells + 1):
        cur = syn.bounded_fixpoint(tt, init, k)
        assert not (cur & ~prev).any()
        prev = cur
    assert np.array_equal(prev, syn.fixpoint(tt, init))


def test_more_support_points_only_add_transitions():
    ball, tr = M.bouncing_ball(), T.energy_transform()
    g = GridSpec(tr.t_lower, tr.t_upper, (25, 26))
    # extremes only: the 2-point lattice is a subset of the 4-point one
    coarse = syn.compute_transitions(ball, tr, g, syn.SamplingConfig(per_axis=2, random_disturbances=0))
    fine = syn.compute_transitions(ball, tr, g, syn.SamplingConfig(per_axis=4, random_disturbances=0))
    assert not (coarse.escapes.astype(bool) & ~fine.escapes.astype(bool)).any()
    for row in range(2 * g.size):
        a = set(coarse.indices[coarse.indptr[row]: coarse.indptr[row + 1]])
        b = set(fine.indices[fine.indptr[row]: fine.indptr[row + 1]])
        assert a <= b
    init = syn.initial_safe(g, tr, ball.safety, coarse.has_preimage)
    assert not (syn.fixpoint(fine, init) & ~syn.fixpoint(coarse, init)).any()


# -- shields ------------------------------------------------------------------


@st.composite
def strategies(draw):
    d = draw(st.integers(1, 3))
    counts = [draw(st.integers(1, 7)) for _ in range(d)]
    n_actions = draw(st.integers(1, 3))
    n = int(np.prod(counts))
    palette = draw(st.lists(st.integers(0, (1 << n_actions) - 1), min_size=1, max_size=4))
    masks = [draw(st.sampled_from(palette)) for _ in range(n)]
    lo = tuple(float(i) for i in range(d))
    hi = tuple(x + 1.5 for x in lo)
    return Strategy(GridSpec(lo, hi, counts), masks, tuple("xyz"[:n_actions]), T.identity_transform(lo, hi))


@given(strategies())
def test_tree_equivalent_and_lookahead_no_worse(sg):
    plain = to_tree(sg, lookahead_cells=0)
    look = to_tree(sg)
    assert plain.equivalent_to(sg) and look.equivalent_to(sg)
    assert look.node_count <= plain.node_count
    assert look.node_count <= 2 * sg.grid.size - 1


@given(strategies())
def test_save_load_bit_exact(sg):
    raw = sg.to_bytes()
    back = Strategy.from_bytes(raw)
    assert back == sg and back.to_bytes() == raw
    tree = to_tree(sg)
    assert type(tree).from_bytes(tree.to_bytes()).to_bytes() == tree.to_bytes()


# -- closed-loop rollouts ----------------------------------------------------


def _rollout_starts(res, n, rng):
    st_ = res.strategy
    cells = rng.choice(np.flatnonzero(res.safe), n)
    lo, hi = st_.grid.cell_bounds(cells)
    t = lo + rng.random((n, st_.grid.dim)) * (hi - lo)
    s, ok = st_.transform.inverse(t)
    return s[ok]


@pytest.mark.parametrize("name", ["bouncing_ball", "satellite", "cart_pole"])
def test_rollouts_stay_controllable(shields, name):
    res, _ = shields.get(name, "T")
    st_ = res.strategy
    model = M.pole() if name == "cart_pole" else {"bouncing_ball": M.bouncing_ball, "satellite": M.satellite}[name]()
    rng = np.random.default_rng(21)
    s = _rollout_starts(res, 200, rng)
    assert len(s) > 100
    for _ in range(1000):
        masks = st_.masks_in_S(s)
        assert (masks > 0).all() and model.is_safe(s).all()
        bits = (masks[:, None] >> np.arange(len(model.actions))) & 1
        pick = np.argmax(bits * rng.random(bits.shape), axis=1)
        u = rng.random((len(s), 1)) if model.disturbance_arity else None
        nxt = np.empty_like(s)
        for a in range(len(model.actions)):
            sel = pick == a
            if sel.any():
                nxt[sel] = model.step(s[sel], a, None if u is None else u[sel])
        s = nxt


@pytest.mark.parametrize("name", ["bouncing_ball", "satellite", "cart_pole"])
def test_rollouts_in_T_via_transformed_successor(shields, name):
    res, _ = shields.get(name, "T")
    st_ = res.strategy
    model = M.pole() if name == "cart_pole" else {"bouncing_ball": M.bouncing_ball, "satellite": M.satellite}[name]()
    tr = st_.transform
    rng = np.random.default_rng(5)
    for s in _rollout_starts(res, 3, rng):
        t = tr.forward(s[None])[0]
        for _ in range(1000):
            allowed = sorted(st_.allowed_in_T(t))
            assert allowed
            a = allowed[rng.integers(len(allowed))]
            u = [rng.random()] if model.disturbance_arity else None
            (t,) = T.transformed_successor(model, tr, t, a, u)
