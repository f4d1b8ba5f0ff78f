import math

import numpy as np
import pytest

from platformtrial.model import correlation_matrix, equal_schedule
from platformtrial.oc import operating_characteristics
from platformtrial.simulate import Rate, SimConfig, correlation_check, simulate

NINF = -math.inf


def config(d, theta, reps=60_000, **kw):
    return SimConfig(d.schedule, d.boundaries, theta, replicates=reps, seed=7,
                     theta_clin=d.spec.theta_clin, **kw)


def test_bit_reproducible_and_thread_independent(flair_pairwise, theta_clin):
    a = simulate(config(flair_pairwise, (theta_clin, 0.0), 120_000))
    b = simulate(config(flair_pairwise, (theta_clin, 0.0), 120_000))
    c = simulate(config(flair_pairwise, (theta_clin, 0.0), 120_000, threads=3))
    assert a.to_dict() == b.to_dict() == c.to_dict()


def test_seed_changes_result(flair_pairwise):
    a = simulate(config(flair_pairwise, (0.0, 0.0)))
    b = simulate(SimConfig(flair_pairwise.schedule, flair_pairwise.boundaries, (0.0, 0.0),
                           replicates=60_000, seed=8))
    assert a.expected_n != b.expected_n


def test_agrees_with_analytic(flair_pairwise, theta_clin):
    d = flair_pairwise
    theta = (theta_clin, NINF)
    sim = simulate(config(d, theta, 200_000))
    oc = operating_characteristics(d.schedule, d.boundaries, theta, theta_clin)
    assert abs(sim.pairwise_power[0].value - oc.pairwise_power[0]) < 3 * sim.pairwise_power[0].se
    assert sim.pairwise_power[1].value == 0.0
    assert abs(sim.expected_n - oc.expected_n) < 3 * sim.expected_n_se
    hist = dict(sim.n_histogram)
    assert sum(hist.values()) == pytest.approx(1.0)
    assert max(hist) <= d.max_sample_size()


def test_patient_level_mode_agrees(flair_pairwise):
    d = flair_pairwise
    sim = simulate(config(d, (0.0, 0.0), 40_000, patient_level=True))
    oc = operating_characteristics(d.schedule, d.boundaries, (0.0, 0.0), d.spec.theta_clin)
    assert abs(sim.fwer.value - oc.fwer) < 3 * sim.fwer.se
    assert abs(sim.expected_n - oc.expected_n) < 3 * sim.expected_n_se


def test_exit_distribution(flair_pairwise):
    sim = simulate(config(flair_pairwise, (0.0, NINF), 20_000))
    assert sim.exit_distribution[1] == {(1, 0): 1.0}
    assert sum(sim.exit_distribution[0].values()) == pytest.approx(1.0)


def test_correlation_matches_model():
    s = equal_schedule(3, 2, 50, (0, 40, 70))
    emp = correlation_check(s, replicates=200_000, seed=3)
    model = correlation_matrix(s, (2, 2, 2))
    assert np.max(np.abs(emp - model)) < 0.01


def test_rate_and_validation(flair_pairwise):
    r = Rate.of(25, 100)
    assert r.value == 0.25 and r.se == pytest.approx(math.sqrt(0.25 * 0.75 / 100))
    with pytest.raises(ValueError):
        config(flair_pairwise, (0.0,))
    with pytest.raises(ValueError):
        config(flair_pairwise, (0.0, 0.0), reps=0)
