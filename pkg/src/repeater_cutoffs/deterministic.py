"""Exact deterministic-cutoff chains of 3, 4 and 5 nodes.

States are age tuples ``(t_0, ..., t_{n-1})``: ``-1`` marks an empty
segment, a link stores its age on its leftmost segment and 0 on the other
segments it spans. Absorbing states have the form ``(t, 0, ..., 0)``.
"""
from __future__ import annotations

import math
from collections import deque
from typing import Dict, Tuple

import numpy as np

from .dynamics import decode_runs, is_end_to_end, swap_phase_outcomes
from .markov import MarkovModel, absorption_distribution, expected_delivery_time
from .model import ChainParams, ChainPerformance

__all__ = [
    "AgeTuple",
    "CUTOFF_CAPS",
    "build_deterministic_model",
    "expected_delivery_time",
    "absorption_distribution",
    "expected_werner_deterministic",
    "deterministic_performance",
]

AgeTuple = Tuple[int, ...]

# t_c must stay below these; state spaces grow as t_c**2
CUTOFF_CAPS = {3: None, 4: 30, 5: 20}


def links_of(state: AgeTuple):
    """``(start, end, age)`` triples of the links in an age tuple."""
    runs = decode_runs([t >= 0 for t in state])
    return [(s, e, state[s]) for s, e in runs]


def encode(links, n_segments: int) -> AgeTuple:
    state = [-1] * n_segments
    for start, end, age, *_ in links:
        state[start] = age
        for i in range(start + 1, end):
            state[i] = 0
    return tuple(state)


def check_cutoff_time(n_node: int, t_c, enforce_cap: bool = True) -> int:
    if n_node not in CUTOFF_CAPS:
        raise ValueError(f"exact deterministic model supports n_node in 3..5, got {n_node}")
    if t_c == math.inf or int(t_c) != t_c or t_c < 0:
        raise ValueError(f"t_c must be a finite nonnegative integer, got {t_c!r}")
    cap = CUTOFF_CAPS[n_node]
    if enforce_cap and cap is not None and t_c >= cap:
        raise ValueError(f"t_c must be below {cap} for n_node={n_node}, got {t_c}")
    return int(t_c)


def build_deterministic_model(
    params: ChainParams, t_c: int, e2e_cutoff: bool = False, *, enforce_cap: bool = True
) -> MarkovModel:
    """Enumerate the states reachable from the empty chain and their transitions.

    With ``e2e_cutoff`` an end-to-end link older than ``t_c`` is discarded and
    the chain returns to the empty state.
    """
    t_c = check_cutoff_time(params.n_node, t_c, enforce_cap)
    n = params.n_segments
    empty = (-1,) * n
    rows: Dict[AgeTuple, Dict[AgeTuple, float]] = {}
    absorbing = set()
    queue = deque([empty])
    seen = {empty}
    while queue:
        state = queue.popleft()
        row = rows.setdefault(state, {})
        for p, links in swap_phase_outcomes(links_of(state), n, params.p_g, params.p_s):
            if is_end_to_end(links, n):
                age = links[0][2]
                if e2e_cutoff and age > t_c:
                    nxt = empty
                else:
                    nxt = (age,) + (0,) * (n - 1)
                    absorbing.add(nxt)
            else:
                nxt = encode([l for l in links if l[2] < t_c], n)
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
            row[nxt] = row.get(nxt, 0.0) + p
    transient = sorted(rows)
    absorbing_states = sorted(absorbing)
    index = {s: i for i, s in enumerate(transient + absorbing_states)}
    P = np.zeros((len(index), len(index)))
    for s, row in rows.items():
        i = index[s]
        for t, p in row.items():
            P[i, index[t]] += p
    k = len(transient)
    P[np.arange(k, len(index)), np.arange(k, len(index))] = 1.0
    return MarkovModel(transient, absorbing_states, P, empty)


def expected_werner_deterministic(model: MarkovModel, params: ChainParams) -> float:
    """Absorption-weighted Werner parameter ``sum gamma(t) w0**n lam**t``."""
    lam = params.lam
    w_end = params.w0**params.n_segments
    return sum(g * w_end * lam ** state[0] for state, g in absorption_distribution(model).items())


def deterministic_performance(params: ChainParams, t_c: int, e2e_cutoff: bool = False, **kw) -> ChainPerformance:
    model = build_deterministic_model(params, t_c, e2e_cutoff, **kw)
    return ChainPerformance.from_delivery(
        expected_delivery_time(model), expected_werner_deterministic(model, params)
    )
