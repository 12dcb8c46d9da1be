import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from repeater_cutoffs.analytic import three_node_performance
from repeater_cutoffs.deterministic import (
    CUTOFF_CAPS,
    absorption_distribution,
    build_deterministic_model,
    deterministic_performance,
    expected_delivery_time,
    expected_werner_deterministic,
)
from repeater_cutoffs.exact import evaluate_exact
from repeater_cutoffs.model import ChainParams, Deterministic, Probabilistic
from repeater_cutoffs.montecarlo import estimate_performance

EMPTY3 = (-1, -1)


def test_three_node_transitions():
    p_g, p_s = 0.3, 0.6
    m = build_deterministic_model(ChainParams(3, p_g, p_s), 4)
    one_link = m.transition(EMPTY3, (0, -1)) + m.transition(EMPTY3, (-1, 0))
    assert one_link == pytest.approx(2 * p_g * (1 - p_g), abs=1e-15)
    assert m.transition(EMPTY3, (0, 0)) == pytest.approx(p_g**2 * p_s, abs=1e-15)
    for t in range(4):
        assert m.transition((t, -1), (t + 1, 0)) == pytest.approx(p_g * p_s, abs=1e-15)


def test_three_node_never_store_state_space():
    p_g, p_s = 0.4, 0.9
    m = build_deterministic_model(ChainParams(3, p_g, p_s), 0)
    assert m.states == [EMPTY3, (0, 0)]
    assert m.transition(EMPTY3, (0, 0)) == pytest.approx(p_g**2 * p_s, abs=1e-15)
    assert expected_delivery_time(m) == pytest.approx(1 / (p_g**2 * p_s), rel=1e-12)
    assert absorption_distribution(m) == {(0, 0): pytest.approx(1.0, abs=1e-12)}


def test_e2e_path_with_late_centre_link_is_discarded():
    # edge links at step 1, centre link at step 2: an age-2 end-to-end link
    params = ChainParams(4, 0.5, 0.8, 20.0)
    plain = build_deterministic_model(params, 1)
    e2e = build_deterministic_model(params, 1, e2e_cutoff=True)
    edges = (0, -1, 0)
    assert plain.transition(edges, (2, 0, 0)) == pytest.approx(0.5 * 0.8**2, abs=1e-15)
    assert (2, 0, 0) not in e2e.index
    assert e2e.transition(edges, (-1, -1, -1)) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("n_node", [3, 4, 5])
def test_absorbing_state_shape(n_node):
    m = build_deterministic_model(ChainParams(n_node, 0.4, 0.9, 10.0), 3)
    for s in m.absorbing_states:
        assert s[0] >= 0 and all(x == 0 for x in s[1:])
    for s in m.transient_states:
        assert -1 in s
        assert all(x < 3 for x in s)


@given(
    st.sampled_from([3, 4, 5]),
    st.floats(0.01, 1.0),
    st.floats(0.05, 1.0),
    st.integers(0, 8),
    st.booleans(),
)
def test_row_stochastic(n_node, p_g, p_s, t_c, e2e):
    m = build_deterministic_model(ChainParams(n_node, p_g, p_s, 30.0), t_c, e2e)
    assert np.all(m.P >= 0)
    assert np.max(np.abs(m.P.sum(axis=1) - 1.0)) <= 1e-12
    k = m.n_transient
    assert np.array_equal(m.P[k:, k:], np.eye(len(m.absorbing_states)))


@given(st.floats(0.02, 0.99), st.floats(0.05, 1.0), st.integers(0, 25))
def test_three_node_matches_closed_forms(p_g, p_s, t_c):
    params = ChainParams(3, p_g, p_s, 17.0, 0.93)
    exact = deterministic_performance(params, t_c)
    closed = three_node_performance(params, Deterministic(t_c))
    assert exact.expected_delivery_time == pytest.approx(closed.expected_delivery_time, rel=1e-10)
    assert exact.expected_werner == pytest.approx(closed.expected_werner, abs=1e-10)


@given(st.floats(0.02, 0.99), st.integers(1, 25))
def test_three_node_absorption_closed_form(p_g, t_c):
    m = build_deterministic_model(ChainParams(3, p_g, 0.8), t_c)
    gamma = absorption_distribution(m)
    assert sum(gamma.values()) == pytest.approx(1.0, abs=1e-10)
    expected = 1 / (1 + 2 * (1 - p_g) / p_g * (1 - (1 - p_g) ** t_c))
    assert gamma[(0, 0)] == pytest.approx(expected, abs=1e-10)


@pytest.mark.parametrize("n_node", [4, 5])
def test_no_decoherence_gives_w0_power(n_node):
    params = ChainParams(n_node, 0.3, 0.7, math.inf, 0.97)
    for t_c in (0, 2, 5):
        m = build_deterministic_model(params, t_c)
        assert expected_werner_deterministic(m, params) == pytest.approx(0.97 ** (n_node - 1), rel=1e-12)


@pytest.mark.parametrize("n_node", [4, 5])
def test_monotone_up_to_cap(n_node):
    params = ChainParams(n_node, 0.2, 1.0, 20.0)
    no_cutoff = evaluate_exact(params, Probabilistic(0.0))
    previous = None
    for t_c in range(CUTOFF_CAPS[n_node]):
        perf = deterministic_performance(params, t_c)
        assert perf.rate <= no_cutoff.rate * (1 + 1e-9)
        if previous is not None:
            assert perf.expected_werner <= previous.expected_werner * (1 + 1e-12)
        previous = perf


def test_no_cutoff_limit_approached_from_below():
    params = ChainParams(4, 0.3, 0.9, 20.0)
    limit = evaluate_exact(params, Probabilistic(0.0))
    gaps = [abs(deterministic_performance(params, t).expected_delivery_time - limit.expected_delivery_time)
            for t in (2, 6, 12, 24)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_e2e_variant_identical_for_three_nodes():
    params = ChainParams(3, 0.25, 0.8, 20.0)
    for t_c in range(6):
        a = deterministic_performance(params, t_c)
        b = deterministic_performance(params, t_c, e2e_cutoff=True)
        assert b.expected_delivery_time == pytest.approx(a.expected_delivery_time, rel=1e-12)
        assert b.expected_werner == pytest.approx(a.expected_werner, abs=1e-12)


def test_e2e_rate_suppression():
    params = ChainParams(4, 0.85, 1.0, 20.0)
    assert deterministic_performance(params, 1, True).rate < deterministic_performance(params, 0).rate


@pytest.mark.parametrize("n_node,t_c", [(4, 30), (5, 20), (6, 1), (4, math.inf), (4, -1), (4, 1.5)])
def test_rejects_unsupported(n_node, t_c):
    with pytest.raises(ValueError):
        build_deterministic_model(ChainParams(n_node, 0.5), t_c)


def test_cap_can_be_lifted():
    m = build_deterministic_model(ChainParams(4, 0.5), 30, enforce_cap=False)
    assert m.n_transient > 0


def test_delivery_time_against_simulation():
    params = ChainParams(4, 0.5, 1.0, 20.0)
    exact = deterministic_performance(params, 0)
    mc = estimate_performance(params, Deterministic(0), 50_000, 20, seed=3, shortcut=False)
    assert abs(mc.performance.expected_delivery_time - exact.expected_delivery_time) <= 3 * mc.t_stderr


def test_absorption_against_age_histogram():
    params = ChainParams(4, 0.5, 0.9, 20.0)
    t_c = 2
    gamma = absorption_distribution(build_deterministic_model(params, t_c))
    mc = estimate_performance(params, Deterministic(t_c), 50_000, 20, seed=9)
    ages = np.round(np.log(mc.end_werners.ravel()) / np.log(params.lam)).astype(int)
    n = ages.size
    for state, g in gamma.items():
        freq = np.mean(ages == state[0])
        se = math.sqrt(max(g * (1 - g), 1e-12) / n)
        assert abs(freq - g) <= 3 * se + 1e-12, (state, freq, g)
