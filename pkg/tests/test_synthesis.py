import math

import numpy as np
import pytest

from gridshield import models as M, synthesis as syn, transform as T
from gridshield.errors import ConfigMismatch, Degenerate, SingularFit
from gridshield.grid import Box, GridSpec

OSC = M.oscillator()
POLAR = T.polar_transform()
IDENT = T.identity_transform(OSC.lower, OSC.upper)
G_ID = GridSpec(IDENT.t_lower, IDENT.t_upper, (4, 4))
G_POLAR = GridSpec(POLAR.t_lower, POLAR.t_upper, (4, 4))


def test_support_points():
    pts = syn.support_points((0, 0), (1, 1), 2)
    assert len(pts) == 4
    assert np.all(np.abs(pts - np.round(pts)) < 1e-8)
    assert np.allclose(syn.support_points((0, 0), (2, 4), 1), [[1, 2]])


def test_support_points_stay_in_their_cell():
    g = GridSpec((-3, 0.1), (7, 0.2), (7, 3))
    for cell in [(0, 0), (3, 1), (6, 2)]:
        lo, hi = g.cell_box(cell)
        for p in syn.support_points(lo, hi, 4):
            assert g.cell_of(p) == cell


def test_sampling_config_validation():
    with pytest.raises(ValueError):
        syn.SamplingConfig(per_axis=0)
    with pytest.raises(ValueError):
        syn.SamplingConfig(random_disturbances=-1)


def test_hashed_uniform_is_order_free():
    a = syn.hashed_uniform(7, np.arange(10), 1)
    b = syn.hashed_uniform(7, np.arange(10)[::-1], 1)[::-1]
    assert np.array_equal(a, b)
    assert np.all((a >= 0) & (a < 1))
    assert not np.array_equal(a, syn.hashed_uniform(8, np.arange(10), 1))


def test_grid_box_must_match_codomain():
    with pytest.raises(ConfigMismatch):
        syn.compute_transitions(OSC, POLAR, G_ID)


def test_polar_transitions_keep_radius_row():
    tt = syn.compute_transitions(OSC, POLAR, G_POLAR)
    for cell in range(16):
        row = G_POLAR.index_of(cell)[1]
        assert {G_POLAR.index_of(int(c))[1] for c in tt.successor_ids(cell, 0)} == {row}
        assert not tt.escaping(cell, 0)


def test_identity_transition_into_obstacle():
    s = np.array([-1.2, -0.6])
    c, sn = math.cos(1.2), math.sin(1.2)
    nxt = (s[0] * c + s[1] * sn, -s[0] * sn + s[1] * c)
    assert G_ID.cell_of(nxt) == (1, 2)  # a centre obstacle cell
    tt = syn.compute_transitions(OSC, IDENT, G_ID)
    assert (1, 2) in tt.successors(G_ID.cell_of(s), 0)


def test_deterministic_single_point_gives_one_successor():
    tt = syn.compute_transitions(OSC, IDENT, G_ID, syn.SamplingConfig(per_axis=1))
    for cell in range(16):
        n = len(tt.successor_ids(cell, 0))
        assert n == (0 if tt.escaping(cell, 0) else 1)


def test_sample_count():
    ball = M.bouncing_ball()
    g = GridSpec((0, -13), (100, 13), (5, 4))
    tt = syn.compute_transitions(ball, T.energy_transform(), g, syn.SamplingConfig(per_axis=2))
    per_point = 2 + 2  # two extremes, two random draws
    assert tt.samples <= g.size * 4 * per_point * 2
    assert tt.samples % per_point == 0


def test_chunking_does_not_change_table():
    ball = M.bouncing_ball()
    tr = T.energy_transform()
    g = GridSpec(tr.t_lower, tr.t_upper, (10, 8))
    a = syn.compute_transitions(ball, tr, g, syn.SamplingConfig(per_axis=3))
    b = syn.compute_transitions(ball, tr, g, syn.SamplingConfig(per_axis=3), chunk_samples=50)
    assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.escapes, b.escapes)


def test_empty_preimage_cells():
    tr = T.energy_transform()
    g = GridSpec(tr.t_lower, tr.t_upper, (25, 26))
    tt = syn.compute_transitions(M.bouncing_ball(), tr, g)
    # E in [0, 4) with |v| >= 3 is pure kinetic overshoot: no state maps there
    cell = g.flat_id((0, 0))
    assert not tt.has_preimage[cell]
    assert len(tt.successor_ids(cell, 0)) == 0 and not tt.escaping(cell, 0)


def test_initial_marking_polar():
    init = syn.initial_safe(G_POLAR, POLAR, OSC.safety).reshape(4, 4)
    assert not init[:, 0].any() and init[:, 1:].all()


def test_initial_marking_everything():
    tr = T.energy_transform()
    g = GridSpec(tr.t_lower, tr.t_upper, (25, 26))
    everything = Box((-math.inf, -math.inf), (math.inf, math.inf))
    pre = syn.preimage_mask(g, tr)
    assert np.array_equal(syn.initial_safe(g, tr, everything), pre)
    assert 0 < pre.sum() < g.size


def test_oscillator_identity_fixpoint_empty():
    res = syn.synthesize(OSC, IDENT, G_ID)
    assert res.controllable == 0
    assert res.strategy.n_controllable == 0


def test_oscillator_polar_fixpoint_is_initial_marking():
    res = syn.synthesize(OSC, POLAR, G_POLAR)
    assert np.array_equal(res.safe, res.initial)
    assert res.controllable == 12 and res.sweeps == 0
    stats = res.stats()
    assert stats["cells"] == 16 and stats["controllable"] == 12


def test_empty_initial_set():
    tt = syn.compute_transitions(OSC, POLAR, G_POLAR)
    assert not syn.fixpoint(tt, np.zeros(16, dtype=bool)).any()


def test_bounded_fixpoint_limits():
    tt = syn.compute_transitions(OSC, IDENT, G_ID)
    init = syn.initial_safe(G_ID, IDENT, OSC.safety, tt.has_preimage)
    assert np.array_equal(syn.bounded_fixpoint(tt, init, 0), init)
    assert np.array_equal(syn.bounded_fixpoint(tt, init, 16), syn.fixpoint(tt, init))
    with pytest.raises(ValueError):
        syn.bounded_fixpoint(tt, init, -1)


def test_grid_level_soundness_of_strategy():
    ball = M.bouncing_ball()
    tr = T.energy_transform()
    g = GridSpec(tr.t_lower, tr.t_upper, (25, 26))
    res = syn.synthesize(ball, tr, g, syn.SamplingConfig(per_axis=4))
    tt, masks = res.table, res.strategy.masks
    for cell in np.flatnonzero(res.safe):
        assert masks[cell]
        for a in range(2):
            if masks[cell] >> a & 1:
                assert not tt.escaping(int(cell), a)
                assert res.safe[tt.successor_ids(int(cell), a)].all()
    assert not masks[~res.safe].any()


# -- boundary extraction and fitting ------------------------------------------

G_BAND = GridSpec((-1, -1), (1, 1), (4, 4))


def test_rectangle_marking_has_constant_mid():
    m = np.zeros((4, 4), dtype=bool)
    m[:, 1:3] = True
    rows = np.array(syn.extract_boundaries(m, G_BAND))
    assert np.allclose(rows[:, 3], 0.0)
    assert np.allclose(rows[:, 1], 0.25) and np.allclose(rows[:, 2], -0.25)


def test_point_symmetric_marking_gives_odd_mid():
    m = np.zeros((4, 4), dtype=bool)
    m[0, 2:] = m[1, 1:3] = True
    m[3, :2] = m[2, 1:3] = True
    rows = np.array(syn.extract_boundaries(m, G_BAND))
    assert np.allclose(rows[:, 3], -rows[::-1, 3])
    assert np.allclose(rows[:, 0], -rows[::-1, 0])


def test_degenerate_markings():
    with pytest.raises(Degenerate):
        syn.extract_boundaries(np.zeros(16, dtype=bool), G_BAND)
    with pytest.raises(Degenerate):
        syn.extract_boundaries(np.ones(8, dtype=bool), GridSpec((0,), (1,), (8,)))


def test_cart_pole_k3_band_tilts_down():
    pole = M.pole()
    tr = T.identity_transform(pole.lower, pole.upper)
    g = GridSpec(tr.t_lower, tr.t_upper, (20, 20))
    tt = syn.compute_transitions(pole, tr, g, syn.SamplingConfig(per_axis=1))
    init = syn.initial_safe(g, tr, pole.safety, tt.has_preimage)
    m = syn.bounded_fixpoint(tt, init, 3)
    assert m.any()
    rows = np.array(syn.extract_boundaries(m, g))
    near = np.abs(rows[:, 0]) < 0.1
    slope = np.polyfit(rows[near, 0], rows[near, 3], 1)[0]
    assert slope < 0


def test_fit_recovers_coefficients():
    x = np.linspace(-0.2, 0.2, 21)
    y = -4.5508 * x - 141.6953 * x**3
    c = syn.fit_polynomial(np.stack([x, y], axis=1))
    assert c == pytest.approx([-4.5508, -141.6953], abs=1e-6)


def test_fit_trivial_cases():
    x = np.linspace(-1, 1, 9)
    assert syn.fit_polynomial(np.stack([x, 0 * x], axis=1)) == pytest.approx([0, 0], abs=1e-15)
    assert syn.fit_polynomial(np.stack([x, 2 * x], axis=1)) == pytest.approx([2, 0], abs=1e-12)


def test_fit_rejects_singular_systems():
    with pytest.raises(SingularFit):
        syn.fit_polynomial([(0.5, 1.0), (0.5, 2.0)])
    with pytest.raises(SingularFit):
        syn.fit_polynomial([(0.0, 1.0), (0.0, 2.0)])
