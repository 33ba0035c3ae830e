import time

import pytest
from hypothesis import HealthCheck, settings

from gridshield import models, synthesis as syn, transform as T
from gridshield.grid import GridSpec

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA = []


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(_CRITERIA, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def criterion():
    """Record one pass/fail line for the acceptance summary, then assert it."""

    def record(n, ok, detail):
        _CRITERIA.append((n, bool(ok), detail))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


# Case-study configurations shared by several test modules.
CASES = {
    "bouncing_ball": dict(model=models.bouncing_ball, T=lambda m: T.energy_transform(), T_counts=(25, 26),
                          S_counts=(260, 250), sampling=syn.SamplingConfig(per_axis=8)),
    "satellite": dict(model=models.satellite, T=lambda m: T.polar_transform(), T_counts=(91, 300),
                      S_counts=(420, 420), sampling=syn.SamplingConfig(per_axis=4)),
    "cart_pole": dict(model=models.pole, T=lambda m: T.poly_offset_transform(), T_counts=(20, 20),
                      S_counts=(30, 30), sampling=syn.SamplingConfig(per_axis=4)),
}


def synth_case(name, space):
    c = CASES[name]
    model = c["model"]()
    tr = c["T"](model) if space == "T" else T.identity_transform(model.lower, model.upper)
    grid = GridSpec(tr.t_lower, tr.t_upper, c[f"{space}_counts"])
    t = time.perf_counter()
    res = syn.synthesize(model, tr, grid, c["sampling"])
    return res, time.perf_counter() - t


class _Cache:
    def __init__(self):
        self._store = {}

    def get(self, name, space):
        key = (name, space)
        if key not in self._store:
            self._store[key] = synth_case(name, space)
        return self._store[key]


@pytest.fixture(scope="session")
def shields():
    """Lazily synthesized case-study shields: ``shields.get(name, "S"|"T") -> (result, seconds)``."""
    return _Cache()
