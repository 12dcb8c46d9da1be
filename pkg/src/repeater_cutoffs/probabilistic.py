"""Exact probabilistic-cutoff chains of 3, 4 and 5 nodes.

Link ages are not part of the state. A state is a bit string over the
segments; ``k`` adjacent ones form a single link spanning ``k`` segments.
The expected Werner parameter of the end-to-end link comes from Werner
vectors ``u`` of length ``n + 1``: entry ``a < n`` holds the Werner
parameter of the link on segment ``a`` (1 if empty) and entry ``n`` the
product over all links. A transition ``s -> s'`` updates ``u' = u @ M[s, s']``,
and ``H[s, s'] = P[s, s'] * M[s, s']`` weighs the update by its probability.

With at most two disjoint links (``n <= 4``) every entry of ``u'`` is a
single entry of ``u`` times ``w0**l * lam**m``, which is what keeps the
vector finite. Longer chains need more entries and are not supported.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .dynamics import decode_runs, is_end_to_end, swap_phase_outcomes
from .markov import MarkovModel, absorption_distribution, escape_probabilities, expected_delivery_time
from .model import ChainParams, ChainPerformance
from .numerics import DenseSystem, solve_dense

__all__ = [
    "WernerUpdateSet",
    "build_probabilistic_model",
    "werner_update_matrix",
    "expected_delivery_time_prob",
    "expected_werner_matrices",
    "expected_werner_prob",
    "probabilistic_performance",
    "SUPPORTED_NODES",
]

SUPPORTED_NODES = (3, 4, 5)

Transition = Tuple[str, str]


@dataclass(frozen=True)
class WernerUpdateSet:
    """Update matrices ``M`` and probability-weighted matrices ``H`` per transition."""

    M: Dict[Transition, np.ndarray]
    H: Dict[Transition, np.ndarray]


def _runs(state: str):
    return decode_runs([c == "1" for c in state])


def _encode(links, n_segments: int) -> str:
    bits = ["0"] * n_segments
    for start, end, *_ in links:
        for i in range(start, end):
            bits[i] = "1"
    return "".join(bits)


def werner_update_matrix(state: str, next_state: str, kept, w0: float, lam: float) -> np.ndarray:
    """Werner update matrix for ``state -> next_state``.

    ``kept`` holds the links of ``next_state`` as produced by
    :func:`~repeater_cutoffs.dynamics.swap_phase_outcomes`, whose ``sources``
    index the runs of ``state`` from left to right. Each column gets exactly
    one nonzero entry:

    * a link built from no old link reads its own (previously empty) entry,
      one old link reads that link's leftmost segment, two old links read
      the product entry ``n``;
    * segments left empty read themselves if they were empty before,
      otherwise the lowest empty segment of ``state`` (an entry equal to 1);
    * the product entry reads entry ``n`` when every old link survives,
      the surviving link's segment when only one of two survives, and the
      reset segment when none survives.

    An end-to-end link consumes every old link, so all of its columns read
    entry ``n``.
    """
    n = len(state)
    old_rows = [start for start, _ in _runs(state)]
    empty_before = [i for i, c in enumerate(state) if c == "0"]
    if not empty_before:
        raise ValueError("the end-to-end state has no outgoing updates")
    reset = empty_before[0]
    M = np.zeros((n + 1, n + 1))
    if is_end_to_end(kept, n):
        _, _, _, sources, n_new = kept[0]
        M[n, :] = w0**n_new * lam ** len(sources)
        return M
    covered = [False] * n
    surviving = []
    total_new = 0
    for start, end, _, sources, n_new in kept:
        factor = w0**n_new * lam ** len(sources)
        surviving.extend(sources)
        total_new += n_new
        for a in range(start, end):
            covered[a] = True
            if len(sources) == 0:
                M[a, a] = factor
            elif len(sources) == 1:
                M[old_rows[sources[0]], a] = factor
            elif len(sources) == 2:
                M[n, a] = factor
            else:
                raise ValueError("more than two old links merged; chain too long for Werner vectors")
    for a in range(n):
        if not covered[a]:
            M[a if state[a] == "0" else reset, a] = 1.0
    product = w0**total_new * lam ** len(surviving)
    if len(surviving) == len(old_rows):
        M[n, n] = product
    elif len(surviving) == 0:
        M[reset, n] = product
    elif len(surviving) == 1:
        M[old_rows[surviving[0]], n] = product
    else:
        raise ValueError("two surviving links out of more; chain too long for Werner vectors")
    return M


def build_probabilistic_model(params: ChainParams, p_c: float) -> Tuple[MarkovModel, WernerUpdateSet]:
    """Transition matrix over bit strings plus the Werner update matrices.

    Each link left after the swap phase is discarded independently with
    probability ``p_c``.
    """
    if params.n_node not in SUPPORTED_NODES:
        raise ValueError(f"exact probabilistic model supports n_node in 3..5, got {params.n_node}")
    if not 0.0 <= p_c <= 1.0:
        raise ValueError(f"p_c must lie in [0, 1], got {p_c!r}")
    n = params.n_segments
    w0, lam = params.w0, params.lam
    full = "1" * n
    transient = ["".join(bits) for bits in itertools.product("01", repeat=n)][:-1]
    states = transient + [full]
    index = {s: i for i, s in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    M: Dict[Transition, np.ndarray] = {}
    for s in transient:
        links = [(start, end, 0) for start, end in _runs(s)]
        i = index[s]
        for p, after in swap_phase_outcomes(links, n, params.p_g, params.p_s):
            if is_end_to_end(after, n):
                branches = [(p, after)]
            else:
                branches = []
                for discard in itertools.product((False, True), repeat=len(after)):
                    k = sum(discard)
                    q = p * p_c**k * (1.0 - p_c) ** (len(after) - k)
                    if q > 0.0:
                        branches.append((q, tuple(l for l, d in zip(after, discard) if not d)))
            for q, kept in branches:
                t = _encode(kept, n)
                P[i, index[t]] += q
                update = werner_update_matrix(s, t, kept, w0, lam)
                previous = M.setdefault((s, t), update)
                if previous is not update and not np.array_equal(previous, update):
                    raise AssertionError(f"transition {s}->{t} has two different Werner updates")
    P[index[full], index[full]] = 1.0
    H = {key: P[index[key[0]], index[key[1]]] * m for key, m in M.items()}
    model = MarkovModel(transient, [full], P, transient[0])
    return model, WernerUpdateSet(M, H)


def expected_delivery_time_prob(model: MarkovModel) -> float:
    """Expected delivery time from the empty chain (a ``2**n - 1`` dimensional solve)."""
    return expected_delivery_time(model)


def expected_werner_matrices(model: MarkovModel, updates: WernerUpdateSet) -> Dict[str, np.ndarray]:
    """Expected Werner update matrices until absorption, one per transient state.

    Solves ``Mbar[s] = H[s, 1] + sum_{s'} H[s, s'] Mbar[s']`` as one stacked
    dense system over ``(state, vector index)`` pairs.
    """
    transient = list(model.transient_states)
    full = model.absorbing_states[0]
    d = len(full) + 1
    k = len(transient)
    A = np.eye(k * d)
    rhs = np.zeros((k * d, d))
    pos = {s: i for i, s in enumerate(transient)}
    for (s, t), h in updates.H.items():
        i = pos[s]
        if t == full:
            rhs[i * d:(i + 1) * d] += h
        else:
            j = pos[t]
            A[i * d:(i + 1) * d, j * d:(j + 1) * d] -= h
    # diagonal as escape probability plus the decay of a self-loop, avoiding 1 - P[s, s]
    escape = escape_probabilities(model)
    for s, i in pos.items():
        h = updates.H.get((s, s))
        decay = 0.0 if h is None else model.transition(s, s) * (1.0 - np.diag(updates.M[(s, s)]))
        A[np.arange(i * d, (i + 1) * d), np.arange(i * d, (i + 1) * d)] = escape[i] + decay
    x = solve_dense(DenseSystem(A, rhs))
    return {s: x[pos[s] * d:(pos[s] + 1) * d] for s in transient}


def expected_werner_prob(model: MarkovModel, updates: WernerUpdateSet, params: ChainParams) -> float:
    """Last entry of the empty chain's all-ones Werner vector after the expected update."""
    n = params.n_segments
    mbar = expected_werner_matrices(model, updates)[model.start]
    return float(mbar[:, n].sum())


def probabilistic_performance(params: ChainParams, p_c: float) -> ChainPerformance:
    model, updates = build_probabilistic_model(params, p_c)
    return ChainPerformance.from_delivery(
        expected_delivery_time_prob(model), expected_werner_prob(model, updates, params)
    )


# re-exported so callers can treat both exact modules alike
__all__ += ["absorption_distribution"]
