"""Closed forms for three-node chains.

Both policies share one structure: with a storage kernel ``K_lambda`` the
three-node rate and expected Werner parameter are

    R     = p_g**2 * p_s * (1 + 2 K_1) / (1 + 2 p_g K_1)
    w_bar = w0**2 * (1 + 2 K_lambda) / (1 + 2 K_1)

where ``K = A(t_c)`` for a cutoff time and ``K = B(p_c)`` for a cutoff
probability.
"""
from __future__ import annotations

import math

from .model import (
    ChainParams,
    ChainPerformance,
    CutoffPolicy,
    Deterministic,
    DeterministicE2E,
    Probabilistic,
)

__all__ = ["a_lambda", "b_lambda", "three_node_performance", "crossover_pc"]


def a_lambda(p_g: float, lam: float, t_c) -> float:
    """``sum_{t=1}^{t_c} ((1 - p_g) lam)**t``, in closed form also for ``t_c = inf``."""
    nu = (1.0 - p_g) * lam
    if t_c == math.inf:
        if nu >= 1.0:
            raise ValueError("A(inf) diverges for (1 - p_g) * lambda = 1")
        return nu / (1.0 - nu)
    if t_c < 0:
        raise ValueError(f"t_c must be nonnegative, got {t_c!r}")
    if nu == 1.0:
        return float(t_c)
    return nu * (1.0 - nu**t_c) / (1.0 - nu)


def b_lambda(p_g: float, lam: float, p_c: float) -> float:
    """``sum_{t>=1} ((1 - p_g)(1 - p_c) lam)**t``."""
    nu = (1.0 - p_g) * (1.0 - p_c) * lam
    if nu >= 1.0:
        raise ValueError("B diverges for (1 - p_g)(1 - p_c) lambda = 1")
    return nu / (1.0 - nu)


def _kernels(params: ChainParams, policy: CutoffPolicy):
    lam = params.lam
    if isinstance(policy, Probabilistic):
        return b_lambda(params.p_g, 1.0, policy.p_c), b_lambda(params.p_g, lam, policy.p_c)
    if isinstance(policy, (Deterministic, DeterministicE2E)):
        return a_lambda(params.p_g, 1.0, policy.t_c), a_lambda(params.p_g, lam, policy.t_c)
    raise TypeError(f"unknown cutoff policy {policy!r}")


def three_node_performance(params: ChainParams, policy: CutoffPolicy) -> ChainPerformance:
    """Exact rate and expected Werner parameter of a three-node chain.

    The end-to-end cutoff never triggers with three nodes, so
    ``DeterministicE2E`` gives the same result as ``Deterministic``.
    """
    if params.n_node != 3:
        raise ValueError(f"closed forms exist for n_node = 3 only, got {params.n_node}")
    k1, k_lam = _kernels(params, policy)
    p_g, p_s = params.p_g, params.p_s
    delivery_time = (1.0 + 2.0 * p_g * k1) / ((1.0 + 2.0 * k1) * p_g * p_g * p_s)
    w_bar = params.w0**2 * (1.0 + 2.0 * k_lam) / (1.0 + 2.0 * k1)
    return ChainPerformance.from_delivery(delivery_time, w_bar)


def crossover_pc(p_g: float, t_c) -> float:
    """Cutoff probability whose three-node rate equals that of cutoff time ``t_c``."""
    if not 0 < p_g <= 1:
        raise ValueError(f"p_g must lie in (0, 1], got {p_g!r}")
    if t_c == math.inf:
        return 0.0
    if t_c == 0:
        return 1.0
    q = 1.0 - p_g
    return min(p_g * q**t_c / (1.0 - q ** (t_c + 1)), 1.0)
