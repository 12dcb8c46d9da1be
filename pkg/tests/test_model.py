import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from repeater_cutoffs.model import (
    ChainParams,
    ChainPerformance,
    Deterministic,
    DeterministicE2E,
    Probabilistic,
    age_werner,
    binary_entropy,
    fidelity_from_werner,
    lambda_from_tau,
    skf,
    skr,
    swap_werner,
)

# frozen from a 30-digit mpmath evaluation
LAMBDA_TAU20 = 0.951229424500714009
SKF_090 = 0.427206085768087742
LAMBDA_SQ_TAU20 = 0.904837418035959573

unit = st.floats(0.0, 1.0)


class TestChainParams:
    def test_segments_and_lambda(self):
        p = ChainParams(5, 0.3, 0.8, 20.0, 0.9)
        assert p.n_segments == 4
        assert p.lam == pytest.approx(LAMBDA_TAU20, abs=1e-15)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_node=2, p_g=0.5),
            dict(n_node=3.5, p_g=0.5),
            dict(n_node=3, p_g=0.0),
            dict(n_node=3, p_g=1.1),
            dict(n_node=3, p_g=0.5, p_s=0.0),
            dict(n_node=3, p_g=0.5, tau_coh=-1.0),
            dict(n_node=3, p_g=0.5, w0=0.0),
            dict(n_node=3, p_g=0.5, w0=1.5),
            dict(n_node=3, p_g=math.nan),
        ],
    )
    def test_rejects_out_of_domain(self, kwargs):
        with pytest.raises(ValueError):
            ChainParams(**kwargs)

    def test_replace_keeps_validation(self):
        p = ChainParams(3, 0.5)
        assert p.replace(p_g=0.2).p_g == 0.2
        with pytest.raises(ValueError):
            p.replace(p_s=2.0)


class TestPolicies:
    def test_names_and_params(self):
        assert Probabilistic(0.3).name == "probabilistic"
        assert Deterministic(4).param == 4
        assert DeterministicE2E(math.inf).param == math.inf
        assert DeterministicE2E(2).name == "deterministic-e2e"

    @pytest.mark.parametrize("bad", [-1, 2.5, math.nan, True])
    def test_cutoff_time_domain(self, bad):
        with pytest.raises(ValueError):
            Deterministic(bad)

    @pytest.mark.parametrize("bad", [-0.1, 1.01, math.nan])
    def test_cutoff_probability_domain(self, bad):
        with pytest.raises(ValueError):
            Probabilistic(bad)

    def test_integral_float_cutoff_time_is_normalized(self):
        assert Deterministic(3.0).t_c == 3
        assert isinstance(Deterministic(3.0).t_c, int)


class TestLambda:
    def test_examples(self):
        assert lambda_from_tau(math.inf) == 1.0
        assert lambda_from_tau(0.0) == 0.0
        assert lambda_from_tau(20.0) == pytest.approx(LAMBDA_TAU20, abs=1e-15)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            lambda_from_tau(-0.5)


class TestFidelity:
    def test_examples(self):
        assert fidelity_from_werner(1.0) == 1.0
        assert fidelity_from_werner(0.0) == 0.25
        assert fidelity_from_werner(0.78) == pytest.approx(0.835, abs=1e-15)
        assert fidelity_from_werner(-1.0 / 3.0) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("w", [-0.5, 1.1])
    def test_domain(self, w):
        with pytest.raises(ValueError):
            fidelity_from_werner(w)

    @given(st.floats(-1.0 / 3.0, 1.0), st.floats(-1.0 / 3.0, 1.0))
    def test_affine_increasing(self, a, b):
        fa, fb = fidelity_from_werner(a), fidelity_from_werner(b)
        if a < b:
            assert fa <= fb
        # strict once the gap exceeds the rounding of (1 + 3w) / 4
        if b - a > 1e-15:
            assert fa < fb
        assert fb - fa == pytest.approx(0.75 * (b - a), abs=1e-12)


class TestSecretKey:
    def test_skf_examples(self):
        assert skf(1.0) == 1.0
        assert skf(0.7) == 0.0
        assert skf(0.9) == pytest.approx(SKF_090, abs=1e-14)

    def test_skr_examples(self):
        assert skr(0.5, 1.0) == 0.5
        assert skr(10.0, 0.5) == 0.0
        assert skr(0.01, 0.9) == pytest.approx(0.01 * SKF_090, rel=1e-13)

    def test_skr_rejects_nonpositive_rate(self):
        with pytest.raises(ValueError):
            skr(0.0, 1.0)

    def test_skf_domain(self):
        with pytest.raises(ValueError):
            skf(1.2)

    def test_binary_entropy_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0
        assert binary_entropy(0.5) == 1.0

    @given(unit, unit)
    def test_skf_monotone(self, a, b):
        lo, hi = min(a, b), max(a, b)
        assert skf(lo) <= skf(hi)

    @given(st.floats(0.0, 0.77))
    def test_skf_zero_below_threshold(self, w):
        assert skf(w) == 0.0

    @given(st.floats(0.79, 1.0))
    def test_skf_positive_above_threshold(self, w):
        assert skf(w) > 0.0


class TestWernerArithmetic:
    def test_examples(self):
        assert swap_werner(1.0, 1.0) == 1.0
        assert swap_werner(0.37, 1.0) == 0.37
        assert swap_werner(0.9, 0.8) == pytest.approx(0.72, abs=1e-15)
        assert age_werner(0.6, 0, 0.5) == 0.6
        assert age_werner(1.0, 17, 1.0) == 1.0
        assert age_werner(1.0, 2, LAMBDA_TAU20) == pytest.approx(LAMBDA_SQ_TAU20, abs=1e-12)

    @given(unit, unit, unit)
    def test_swap_commutative_associative(self, a, b, c):
        assert swap_werner(a, b) == swap_werner(b, a)
        assert swap_werner(swap_werner(a, b), c) == pytest.approx(swap_werner(a, swap_werner(b, c)), abs=1e-15)

    @given(unit, st.integers(0, 200), st.integers(0, 200), unit)
    def test_age_composes(self, w, a, b, lam):
        once = age_werner(w, a + b, lam)
        twice = age_werner(age_werner(w, a, lam), b, lam)
        assert once == pytest.approx(twice, abs=1e-12)

    def test_age_rejects_negative_steps(self):
        with pytest.raises(ValueError):
            age_werner(1.0, -1, 0.5)


class TestChainPerformance:
    @given(st.floats(1.0, 1e9), unit)
    def test_fields_consistent(self, t, w):
        perf = ChainPerformance.from_delivery(t, w)
        assert perf.rate == 1.0 / t
        assert perf.fidelity == fidelity_from_werner(w)
        assert perf.skr == perf.rate * skf(w)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            ChainPerformance.from_delivery(0.0, 0.5)
        with pytest.raises(ValueError):
            ChainPerformance.from_delivery(1.0, 1.01)

    def test_round_off_clipped(self):
        assert ChainPerformance.from_delivery(2.0, 1.0 + 1e-13).expected_werner == 1.0
