"""Property checks over random effect vectors and designs."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from platformtrial import ShapeFamily, shape, solve_boundaries
from platformtrial.model import equal_schedule
from platformtrial.oc import (
    conjunctive_power,
    disjunctive_power,
    fwer_global_null,
    outcome_cells,
    pairwise_power,
)
from platformtrial.simulate import SimConfig, simulate

TH = -math.log(0.69)
NINF = -math.inf
INTEGRATION = 1e-5
FIXTURES_OK = [HealthCheck.function_scoped_fixture]


@settings(max_examples=60, deadline=None, derandomize=True, suppress_health_check=FIXTURES_OK)
@given(st.lists(st.floats(TH, 3 * TH), min_size=2, max_size=2))
def test_conjunctive_power_minimal_at_clinical_effect(flair_conjunctive, theta):
    d = flair_conjunctive
    base = conjunctive_power(d.schedule, d.boundaries, (TH, TH), TH)
    assert conjunctive_power(d.schedule, d.boundaries, theta, TH) >= base - 2 * INTEGRATION


@pytest.fixture(scope="module")
def three_arm():
    s = equal_schedule(3, 2, 60, (0, 30, 60))
    return s, solve_boundaries(s, "triangular", 0.025)


@settings(max_examples=50, deadline=None, derandomize=True, suppress_health_check=FIXTURES_OK)
@given(st.lists(st.floats(TH, 2.5 * TH), min_size=3, max_size=3))
def test_conjunctive_minimality_three_arms(three_arm, theta):
    s, b = three_arm
    base = conjunctive_power(s, b, (TH,) * 3, TH)
    assert conjunctive_power(s, b, theta, TH) >= base - 2 * INTEGRATION


def _scan(values):
    return all(y >= x - 2 * INTEGRATION for x, y in zip(values, values[1:]))


@pytest.mark.parametrize("arm", [0, 1])
@pytest.mark.parametrize("other", [NINF, 0.0, TH])
def test_power_monotone_in_each_effect(flair_pairwise, arm, other):
    d = flair_pairwise
    grid = np.linspace(-0.3, 0.9, 9)

    def theta(t):
        out = [other, other]
        out[arm] = t
        return tuple(out)

    assert _scan([pairwise_power(d.schedule, d.boundaries, arm, t) for t in grid])
    assert _scan([disjunctive_power(d.schedule, d.boundaries, theta(t)) for t in grid])
    # the set of relevant arms is fixed on each side of theta_clin
    for part in (grid[grid < TH], grid[grid >= TH]):
        assert _scan([conjunctive_power(d.schedule, d.boundaries, theta(t), TH) for t in part])


effects = st.sampled_from([NINF, -0.2, 0.0, 0.15, TH, 0.6])


@settings(max_examples=40, deadline=None, derandomize=True, suppress_health_check=FIXTURES_OK)
@given(st.tuples(effects, effects, effects))
def test_power_ordering(three_arm, theta):
    s, b = three_arm
    pw = [pairwise_power(s, b, k, t) for k, t in enumerate(theta)]
    conj = conjunctive_power(s, b, theta, TH)
    disj = disjunctive_power(s, b, theta)
    relevant = [pw[k] for k, t in enumerate(theta) if t >= TH]
    eps = 2 * INTEGRATION
    if relevant:
        assert conj <= min(relevant) + eps
        assert min(relevant) <= max(pw) + eps
    assert max(pw) <= disj + eps


@settings(max_examples=12, deadline=None, derandomize=True)
@given(
    K=st.integers(1, 3),
    J=st.integers(1, 3),
    n=st.integers(20, 80),
    gaps=st.lists(st.floats(0, 1), min_size=2, max_size=2),
    theta=st.lists(st.sampled_from([NINF, 0.0, 0.2, 0.4]), min_size=3, max_size=3),
    family=st.sampled_from(["triangular", "obrien-fleming", "pocock"]),
)
def test_outcome_cells_normalised(K, J, n, gaps, theta, family):
    before = [0]
    for g in sorted(gaps)[: K - 1]:
        before.append(max(before[-1], int(g * J * n)))
    s = equal_schedule(K, J, n, tuple(before))
    b = shape(ShapeFamily(family, J), 2.0, K)
    cells = outcome_cells(s, b, tuple(theta[:K]))
    assert sum(c.prob for c in cells) == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("before", [(0, 0), (0, 76), (0, 152)])
def test_fwer_strictly_decreasing(before):
    s = equal_schedule(2, 2, 76, before)
    fam = ShapeFamily("triangular", 2)
    values = [fwer_global_null(s, shape(fam, a, 2)) for a in np.linspace(1.0, 2.6, 12)]
    assert all(x > y for x, y in zip(values, values[1:]))


@pytest.mark.parametrize("theta", sorted(set(itertools.product([NINF, -0.2, 0.0, TH, 0.8], repeat=2))))
def test_strong_control_by_simulation(flair_pairwise, theta):
    d = flair_pairwise
    sim = simulate(SimConfig(d.schedule, d.boundaries, theta, replicates=100_000, seed=11))
    assert sim.fwer.value <= 0.025 + 3 * sim.fwer.se
