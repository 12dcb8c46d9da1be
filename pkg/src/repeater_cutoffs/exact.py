"""Single entry point for the exact solvers (closed forms and Markov chains)."""
from __future__ import annotations

import math

from .analytic import three_node_performance
from .deterministic import deterministic_performance
from .model import ChainParams, ChainPerformance, CutoffPolicy, Deterministic, DeterministicE2E, Probabilistic
from .probabilistic import probabilistic_performance

__all__ = ["EXACT_NODES", "evaluate_exact"]

EXACT_NODES = (3, 4, 5)


def evaluate_exact(params: ChainParams, policy: CutoffPolicy, *, enforce_cap: bool = True) -> ChainPerformance:
    """Exact performance for chains of 3 to 5 nodes.

    Three-node chains use the closed forms. Longer chains solve the
    age-tuple chain for a finite cutoff time and the bit-string chain for a
    cutoff probability. A cutoff time of ``inf`` never discards anything,
    so it is evaluated as cutoff probability 0.
    """
    if params.n_node not in EXACT_NODES:
        raise ValueError(f"exact evaluation supports n_node in 3..5, got {params.n_node}")
    if params.n_node == 3:
        return three_node_performance(params, policy)
    if isinstance(policy, Probabilistic):
        return probabilistic_performance(params, policy.p_c)
    if isinstance(policy, (Deterministic, DeterministicE2E)):
        if policy.t_c == math.inf:
            return probabilistic_performance(params, 0.0)
        e2e = isinstance(policy, DeterministicE2E)
        return deterministic_performance(params, policy.t_c, e2e, enforce_cap=enforce_cap)
    raise TypeError(f"unknown cutoff policy {policy!r}")
