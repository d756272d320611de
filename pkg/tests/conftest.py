import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tewa import wta

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_instance(rng: np.random.Generator, max_types=3, max_inventory=4, max_count=4, max_salvo=2):
    W = int(rng.integers(1, max_types + 1))
    S = int(rng.integers(1, max_types + 1))
    weapons = tuple(
        wta.WeaponType(
            f"W{w}",
            int(rng.integers(0, max_inventory + 1)),
            tuple(int(v) for v in rng.integers(1, max_salvo + 1, size=S)),
            tuple(float(v) for v in np.round(rng.uniform(0, 1, size=S), 3)),
        )
        for w in range(W)
    )
    targets = tuple(
        wta.TargetTypeSpec(f"T{s}", int(rng.integers(0, max_count + 1)), float(np.round(rng.uniform(0.5, 10), 2)))
        for s in range(S)
    )
    return wta.WtaInstance(weapons, targets)


@pytest.fixture
def small_instances():
    rng = np.random.default_rng(20240501)
    return [random_instance(rng) for _ in range(200)]


# acceptance lines, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
