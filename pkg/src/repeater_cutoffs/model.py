"""Chain parameters, cutoff policies and Werner-parameter arithmetic.

Only Werner parameters are tracked: every link in the chain is a Werner
state, swaps multiply Werner parameters and one time step of storage
multiplies a link's Werner parameter by ``lambda = exp(-1 / tau_coh)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

__all__ = [
    "ChainParams",
    "CutoffPolicy",
    "Probabilistic",
    "Deterministic",
    "DeterministicE2E",
    "ChainPerformance",
    "lambda_from_tau",
    "fidelity_from_werner",
    "binary_entropy",
    "skf",
    "skr",
    "swap_werner",
    "age_werner",
]

# slack for Werner parameters that leave [0, 1] through round-off only
_ROUND_OFF = 1e-12


def _is_probability(x, allow_zero=True):
    lo_ok = x >= 0 if allow_zero else x > 0
    return lo_ok and x <= 1


@dataclass(frozen=True)
class ChainParams:
    """Hardware parameters of a homogeneous repeater chain.

    Parameters
    ----------
    n_node : int
        Number of nodes including both end nodes (at least 3).
    p_g : float
        Elementary link generation probability per time step, in (0, 1].
    p_s : float
        Swap success probability, in (0, 1].
    tau_coh : float
        Effective two-qubit coherence time in time steps; ``math.inf`` means
        no decoherence.
    w0 : float
        Werner parameter of a freshly generated link, in (0, 1].
    """

    n_node: int
    p_g: float
    p_s: float = 1.0
    tau_coh: float = math.inf
    w0: float = 1.0

    def __post_init__(self):
        if isinstance(self.n_node, bool) or int(self.n_node) != self.n_node or self.n_node < 3:
            raise ValueError(f"n_node must be an integer >= 3, got {self.n_node!r}")
        object.__setattr__(self, "n_node", int(self.n_node))
        if not _is_probability(self.p_g, allow_zero=False):
            raise ValueError(f"p_g must lie in (0, 1], got {self.p_g!r}")
        if not _is_probability(self.p_s, allow_zero=False):
            raise ValueError(f"p_s must lie in (0, 1], got {self.p_s!r}")
        if not self.tau_coh >= 0:
            raise ValueError(f"tau_coh must be nonnegative, got {self.tau_coh!r}")
        if not _is_probability(self.w0, allow_zero=False):
            raise ValueError(f"w0 must lie in (0, 1], got {self.w0!r}")

    @property
    def n_segments(self) -> int:
        return self.n_node - 1

    @property
    def lam(self) -> float:
        """Depolarizing parameter applied per time step of storage."""
        return lambda_from_tau(self.tau_coh)

    def replace(self, **changes) -> "ChainParams":
        fields = dict(n_node=self.n_node, p_g=self.p_g, p_s=self.p_s, tau_coh=self.tau_coh, w0=self.w0)
        fields.update(changes)
        return ChainParams(**fields)


@dataclass(frozen=True)
class Probabilistic:
    """Discard every link left after the swap phase with probability ``p_c``."""

    p_c: float

    def __post_init__(self):
        if not _is_probability(self.p_c):
            raise ValueError(f"p_c must lie in [0, 1], got {self.p_c!r}")

    @property
    def name(self) -> str:
        return "probabilistic"

    @property
    def param(self) -> float:
        return self.p_c


def _check_cutoff_time(t_c):
    if t_c == math.inf:
        return math.inf
    if isinstance(t_c, bool) or int(t_c) != t_c or t_c < 0:
        raise ValueError(f"t_c must be a nonnegative integer or inf, got {t_c!r}")
    return int(t_c)


@dataclass(frozen=True)
class Deterministic:
    """Discard every link left after the swap phase whose age is ``>= t_c``."""

    t_c: Union[int, float]

    def __post_init__(self):
        object.__setattr__(self, "t_c", _check_cutoff_time(self.t_c))

    @property
    def name(self) -> str:
        return "deterministic"

    @property
    def param(self):
        return self.t_c


@dataclass(frozen=True)
class DeterministicE2E:
    """Deterministic cutoff that also discards end-to-end links older than ``t_c``."""

    t_c: Union[int, float]

    def __post_init__(self):
        object.__setattr__(self, "t_c", _check_cutoff_time(self.t_c))

    @property
    def name(self) -> str:
        return "deterministic-e2e"

    @property
    def param(self):
        return self.t_c


CutoffPolicy = Union[Probabilistic, Deterministic, DeterministicE2E]


def lambda_from_tau(tau_coh: float) -> float:
    """Depolarizing parameter ``exp(-1/tau_coh)``; 0 at ``tau_coh = 0``, 1 at ``inf``."""
    if not tau_coh >= 0:
        raise ValueError(f"tau_coh must be nonnegative, got {tau_coh!r}")
    if tau_coh == 0:
        return 0.0
    return math.exp(-1.0 / tau_coh)


def fidelity_from_werner(w: float) -> float:
    if not -1.0 / 3.0 - _ROUND_OFF <= w <= 1.0 + _ROUND_OFF:
        raise ValueError(f"Werner parameter must lie in [-1/3, 1], got {w!r}")
    return (1.0 + 3.0 * w) / 4.0


def binary_entropy(x: float) -> float:
    """Binary entropy in bits with ``0 log 0 = 0``."""
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _check_unit_werner(w):
    if not -_ROUND_OFF <= w <= 1.0 + _ROUND_OFF:
        raise ValueError(f"Werner parameter must lie in [0, 1], got {w!r}")
    return min(max(w, 0.0), 1.0)


def skf(w_bar: float) -> float:
    """Secret-key fraction of entanglement-based BB84 on a Werner state."""
    w_bar = _check_unit_werner(w_bar)
    return max(1.0 - 2.0 * binary_entropy((1.0 - w_bar) / 2.0), 0.0)


def skr(rate: float, w_bar: float) -> float:
    """Secret-key rate in bits per time step."""
    if not rate > 0:
        raise ValueError(f"rate must be positive, got {rate!r}")
    return rate * skf(w_bar)


def swap_werner(w_left: float, w_right: float) -> float:
    return w_left * w_right


def age_werner(w: float, steps: int, lam: float) -> float:
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    return w * lam**steps


@dataclass(frozen=True)
class ChainPerformance:
    """Rate, fidelity and secret-key rate for one (params, policy) point."""

    expected_delivery_time: float
    rate: float
    expected_werner: float
    fidelity: float
    skr: float

    @classmethod
    def from_delivery(cls, expected_delivery_time: float, expected_werner: float) -> "ChainPerformance":
        if not expected_delivery_time > 0:
            raise ValueError(f"expected delivery time must be positive, got {expected_delivery_time!r}")
        w = _check_unit_werner(expected_werner)
        rate = 1.0 / expected_delivery_time
        return cls(
            expected_delivery_time=expected_delivery_time,
            rate=rate,
            expected_werner=w,
            fidelity=fidelity_from_werner(w),
            skr=skr(rate, w),
        )
