"""Absorbing Markov chains: container and hitting-time / absorption solves."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Sequence

import numpy as np

from .numerics import DenseSystem, solve_dense

__all__ = [
    "MarkovModel",
    "escape_probabilities",
    "fundamental_matrix_system",
    "expected_delivery_time",
    "absorption_distribution",
]


@dataclass(frozen=True)
class MarkovModel:
    """Transient states first, then absorbing ones; ``P`` is indexed in that order.

    ``start`` is the state the chain starts from (the empty chain).
    """

    transient_states: Sequence[Hashable]
    absorbing_states: Sequence[Hashable]
    P: np.ndarray
    start: Hashable
    index: Dict[Hashable, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        states = list(self.transient_states) + list(self.absorbing_states)
        object.__setattr__(self, "index", {s: i for i, s in enumerate(states)})
        self.P.setflags(write=False)

    @property
    def states(self) -> List[Hashable]:
        return list(self.transient_states) + list(self.absorbing_states)

    @property
    def n_transient(self) -> int:
        return len(self.transient_states)

    @property
    def Q(self) -> np.ndarray:
        """Transient-to-transient block of ``P``."""
        k = self.n_transient
        return self.P[:k, :k]

    @property
    def R(self) -> np.ndarray:
        """Transient-to-absorbing block of ``P``."""
        k = self.n_transient
        return self.P[:k, k:]

    def transition(self, s, t) -> float:
        return float(self.P[self.index[s], self.index[t]])


def escape_probabilities(model: MarkovModel) -> np.ndarray:
    """``1 - P[s, s]`` per transient state, summed from the other entries of the row.

    Forming ``1 - P[s, s]`` directly cancels catastrophically when a state
    almost surely stays put (a long chain at small ``p_g``).
    """
    k = model.n_transient
    off = model.P[:k].copy()
    off[np.arange(k), np.arange(k)] = 0.0
    return off.sum(axis=1)


def fundamental_matrix_system(model: MarkovModel) -> np.ndarray:
    """``I - Q`` with the diagonal taken from :func:`escape_probabilities`."""
    k = model.n_transient
    a = -model.Q.copy()
    a[np.arange(k), np.arange(k)] = escape_probabilities(model)
    return a


def _fundamental_system(model: MarkovModel, rhs) -> np.ndarray:
    return solve_dense(DenseSystem(fundamental_matrix_system(model), rhs))


def expected_delivery_time(model: MarkovModel) -> float:
    """Expected hitting time of the absorbing set from ``model.start``.

    Solves ``v = 1 + Q v`` over the transient states.
    """
    v = _fundamental_system(model, np.ones(model.n_transient))
    return float(v[model.index[model.start]])


def absorption_distribution(model: MarkovModel) -> Dict[Hashable, float]:
    """Probability of ending in each absorbing state when starting from ``model.start``.

    Solves ``gamma = R + Q gamma`` with one right-hand side per absorbing state.
    """
    gamma = _fundamental_system(model, model.R)
    row = np.atleast_1d(gamma[model.index[model.start]])
    return {s: float(g) for s, g in zip(model.absorbing_states, row)}
