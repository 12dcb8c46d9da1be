import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repeater_cutoffs.analytic import three_node_performance
from repeater_cutoffs.deterministic import deterministic_performance
from repeater_cutoffs.markov import expected_delivery_time
from repeater_cutoffs.model import ChainParams, Deterministic, Probabilistic
from repeater_cutoffs.montecarlo import ReferenceChain
from repeater_cutoffs.probabilistic import (
    build_probabilistic_model,
    expected_werner_matrices,
    probabilistic_performance,
)

W0, LAM = 0.93, 0.87


def _updates(n_node, p_c=0.3, p_g=0.4, p_s=0.8):
    params = ChainParams(n_node, p_g, p_s, -1.0 / math.log(LAM), W0)
    return build_probabilistic_model(params, p_c)


def test_three_node_transitions():
    p_g, p_s, p_c = 0.3, 0.6, 0.25
    model, _ = build_probabilistic_model(ChainParams(3, p_g, p_s), p_c)
    assert model.transition("00", "11") == pytest.approx(p_g**2 * p_s, abs=1e-15)
    assert model.transition("00", "10") == pytest.approx(p_g * (1 - p_g) * (1 - p_c), abs=1e-15)
    assert model.transition("10", "11") == pytest.approx(p_g * p_s, abs=1e-15)
    assert model.transition("10", "10") == pytest.approx((1 - p_g) * (1 - p_c), abs=1e-15)
    assert model.transition("10", "00") == pytest.approx((1 - p_g) * p_c + p_g * (1 - p_s), abs=1e-15)


class TestReferenceMatrices:
    """Werner update matrices written out by hand for small chains."""

    def test_three_node_set(self):
        _, u = _updates(3)
        lam, w0 = u.M[("10", "10")][0, 0], W0
        assert lam == pytest.approx(LAM, rel=1e-12)
        np.testing.assert_allclose(u.M[("00", "00")], np.eye(3), atol=1e-15)
        np.testing.assert_allclose(u.M[("00", "10")], np.diag([w0, 1, w0]), atol=1e-15)
        expect = np.zeros((3, 3))
        expect[2] = w0**2
        np.testing.assert_allclose(u.M[("00", "11")], expect, atol=1e-15)
        expect = np.zeros((3, 3))
        expect[1] = 1.0
        np.testing.assert_allclose(u.M[("10", "00")], expect, atol=1e-15)
        np.testing.assert_allclose(u.M[("10", "10")], np.diag([lam, 1, lam]), atol=1e-15)
        expect = np.zeros((3, 3))
        expect[2] = w0 * lam
        np.testing.assert_allclose(u.M[("10", "11")], expect, atol=1e-15)

    def test_five_node_growth(self):
        _, u = _updates(5)
        w0, lam = W0, LAM
        expect = np.zeros((5, 5))
        expect[1, 0] = expect[1, 1] = w0 * lam
        expect[2, 2] = 1.0
        expect[3, 3] = w0
        expect[4, 4] = w0**2 * lam
        np.testing.assert_allclose(u.M[("0100", "1101")], expect, rtol=1e-12, atol=1e-15)

    def test_five_node_merge(self):
        _, u = _updates(5)
        expect = np.zeros((5, 5))
        expect[3, 3] = 1.0
        expect[4, [0, 1, 2, 4]] = W0 * LAM**2
        np.testing.assert_allclose(u.M[("1010", "1110")], expect, rtol=1e-12, atol=1e-15)

    def test_five_node_loss(self):
        _, u = _updates(5)
        expect = np.zeros((5, 5))
        expect[1, 0] = expect[1, 1] = 1.0
        expect[2, 2] = expect[2, 4] = LAM
        expect[3, 3] = 1.0
        np.testing.assert_allclose(u.M[("1010", "0010")], expect, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("n_node", [3, 4, 5])
def test_update_structure(n_node):
    model, u = _updates(n_node)
    for (s, t), m in u.M.items():
        assert np.all(np.count_nonzero(m, axis=0) == 1), (s, t)
        assert np.all(m >= 0) and np.all(m <= 1)
        p = model.transition(s, t)
        assert p > 0
        assert np.all(u.H[(s, t)] <= p * (1 + 1e-15))


def test_two_step_products_bounded():
    model, u = _updates(5)
    rng = np.random.default_rng(1)
    keys = list(u.H)
    checked = 0
    while checked < 50:
        s, t = keys[rng.integers(len(keys))]
        follow = [k for k in keys if k[0] == t]
        if not follow:
            continue
        t2 = follow[rng.integers(len(follow))][1]
        bound = model.transition(s, t) * model.transition(t, t2)
        assert np.all(u.H[(s, t)] @ u.H[(t, t2)] <= bound * (1 + 1e-12))
        checked += 1


@pytest.mark.parametrize("n_node", [3, 4])
def test_path_sum_converges_to_solve(n_node):
    model, u = _updates(n_node, p_c=0.2, p_g=0.5)
    transient = model.transient_states
    full = model.absorbing_states[0]
    d = n_node
    k = len(transient)
    pos = {s: i for i, s in enumerate(transient)}
    G = np.zeros((k * d, k * d))
    R = np.zeros((k * d, d))
    for (s, t), h in u.H.items():
        i = pos[s]
        if t == full:
            R[i * d:(i + 1) * d] += h
        else:
            j = pos[t]
            G[i * d:(i + 1) * d, j * d:(j + 1) * d] += h
    total = np.zeros_like(R)
    term = R.copy()
    for _ in range(2000):
        total += term
        term = G @ term
    solved = expected_werner_matrices(model, u)
    t_bar = expected_delivery_time(model)
    for s, i in pos.items():
        block = total[i * d:(i + 1) * d]
        assert np.all(block <= t_bar)
        np.testing.assert_allclose(block, solved[s], atol=1e-8)


@given(st.floats(0.02, 0.99), st.floats(0.05, 1.0), st.floats(0.0, 1.0), st.floats(2.0, 100.0))
def test_three_node_matches_closed_form(p_g, p_s, p_c, tau):
    params = ChainParams(3, p_g, p_s, tau, 0.95)
    a = probabilistic_performance(params, p_c)
    b = three_node_performance(params, Probabilistic(p_c))
    assert a.expected_delivery_time == pytest.approx(b.expected_delivery_time, rel=1e-10)
    assert a.expected_werner == pytest.approx(b.expected_werner, abs=1e-10)


@settings(max_examples=20)
@given(st.sampled_from([4, 5]), st.floats(0.05, 0.99), st.floats(0.1, 1.0))
def test_full_cutoff_is_never_store(n_node, p_g, p_s):
    params = ChainParams(n_node, p_g, p_s, 20.0, 0.97)
    a = probabilistic_performance(params, 1.0)
    b = deterministic_performance(params, 0)
    assert a.expected_delivery_time == pytest.approx(b.expected_delivery_time, rel=1e-10)
    assert a.expected_werner == pytest.approx(b.expected_werner, abs=1e-10)
    assert a.expected_delivery_time == pytest.approx(1 / (p_g ** (n_node - 1) * p_s ** (n_node - 2)), rel=1e-10)


@pytest.mark.parametrize("n_node", [4, 5])
def test_no_cutoff_limit(n_node):
    params = ChainParams(n_node, 0.4, 0.9, 20.0)
    limit = probabilistic_performance(params, 0.0)
    gaps = [abs(deterministic_performance(params, t).expected_werner - limit.expected_werner)
            for t in (1, 3, 6, 12, 18)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        build_probabilistic_model(ChainParams(6, 0.5), 0.2)
    with pytest.raises(ValueError):
        build_probabilistic_model(ChainParams(4, 0.5), 1.2)


@pytest.mark.parametrize("n_node", [4, 5])
def test_werner_vectors_follow_update_products(n_node):
    params = ChainParams(n_node, 0.45, 0.8, 12.0, 0.95)
    p_c = 0.3
    _, u = build_probabilistic_model(params, p_c)
    n = params.n_segments
    chain = ReferenceChain(params, Probabilistic(p_c), seed=n_node)
    steps = 0
    while steps < 10_000:
        vec = np.ones(n + 1)
        state = "0" * n
        for rec in chain.run_episode():
            vec = vec @ u.M[(state, rec.occupancy)]
            np.testing.assert_allclose(vec, rec.werner_vector, rtol=1e-12, atol=1e-15)
            state = rec.occupancy
            steps += 1
