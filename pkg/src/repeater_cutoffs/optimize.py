"""Secret-key-rate maximization over the cutoff probability or the cutoff time.

Cutoff probabilities are searched on a grid of spacing 0.01; exact
evaluators then refine the best grid cell by golden section. Cutoff times
are searched exhaustively below ``t_c_max``. The search is justified when
the best value found is at least ``R(no cutoff) * SKF(w_bar(t_c_max))``, a
bound on the SKR of every ``t_c >= t_c_max`` because the rate never exceeds
the no-cutoff rate and ``w_bar`` does not increase with ``t_c``. Whether the
bound is met is recorded in the result's certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.optimize

from .exact import evaluate_exact
from .model import ChainParams, ChainPerformance, Deterministic, DeterministicE2E, Probabilistic, skf
from .analytic import crossover_pc
from .numerics import golden_section_max

__all__ = [
    "SkrEstimate",
    "ExactEvaluator",
    "Certificate",
    "OptimizationResult",
    "RatioResult",
    "PC_GRID",
    "DEFAULT_TC_MAX",
    "default_tc_max",
    "maximize_over_pc",
    "maximize_over_tc",
    "skr_ratio",
    "ThresholdResult",
    "max_rate_above_fidelity",
    "equal_rate_pc",
]

PC_GRID = np.round(np.linspace(0.0, 1.0, 101), 2)
PC_REFINE_TOL = 1e-4
DEFAULT_TC_MAX = {3: 50, 4: 29, 5: 19}
CERTIFICATE_SLACK = 1e-12


@dataclass(frozen=True)
class SkrEstimate:
    """SKR at one policy point; ``pruned`` means evaluation stopped once it could not win."""

    skr: float
    std: float = 0.0
    performance: Optional[ChainPerformance] = None
    pruned: bool = False


class ExactEvaluator:
    """Evaluate SKR with the exact solvers. Grid maxima are refined by golden section."""

    refine = True

    def __init__(self, enforce_cap: bool = True):
        self.enforce_cap = enforce_cap

    def __call__(self, params, policy, floor=None) -> SkrEstimate:
        perf = evaluate_exact(params, policy, enforce_cap=self.enforce_cap)
        return SkrEstimate(perf.skr, 0.0, perf)


@dataclass(frozen=True)
class Certificate:
    """Bound on the SKR of every cutoff time ``>= t_c_max``."""

    t_c_max: int
    no_cutoff_rate: float
    werner_at_max: float
    bound: float
    holds: bool


@dataclass(frozen=True)
class OptimizationResult:
    policy: str
    best_param: float
    best_skr: float
    evaluations: int
    skr_std: float = 0.0
    certificate: Optional[Certificate] = None
    grid: Sequence = ()
    grid_skr: Sequence = ()

    @property
    def certified(self) -> bool:
        return self.certificate is None or self.certificate.holds


@dataclass(frozen=True)
class RatioResult:
    """``max_pc SKR / max_tc SKR``; ``degenerate`` flags a zero denominator."""

    ratio: float
    degenerate: bool
    pc: OptimizationResult
    tc: OptimizationResult


def default_tc_max(params: ChainParams) -> int:
    """Search cap for cutoff times: module caps for exact sizes, ``tau_coh + 1`` otherwise."""
    if params.n_node in DEFAULT_TC_MAX:
        return DEFAULT_TC_MAX[params.n_node]
    if params.tau_coh == math.inf:
        raise ValueError("t_c_max is required when tau_coh is infinite")
    return int(math.floor(params.tau_coh)) + 1


def _scan(points, evaluate, prefer_later: bool):
    """Evaluate ``points`` in order and keep the best, passing the running best as a floor."""
    best_i, best = None, None
    values: List[float] = []
    evaluations = 0
    for i, x in enumerate(points):
        est = evaluate(x, None if best is None else best.skr)
        evaluations += 1
        values.append(math.nan if est.pruned else est.skr)
        if est.pruned:
            continue
        better = best is None or est.skr > best.skr or (prefer_later and est.skr == best.skr)
        if better:
            best_i, best = i, est
    return best_i, best, values, evaluations


def maximize_over_pc(params: ChainParams, evaluator: Optional[Callable] = None,
                     grid: Sequence[float] = PC_GRID) -> OptimizationResult:
    """Maximize SKR over the cutoff probability.

    The grid is scanned in ascending order and ties keep the smaller
    ``p_c``. With a refining evaluator the best grid point is polished by
    golden section on one grid cell either side, to a precision of 1e-4.
    """
    evaluator = evaluator or ExactEvaluator()
    grid = [float(x) for x in grid]
    best_i, best, values, evaluations = _scan(
        grid, lambda pc, floor: evaluator(params, Probabilistic(pc), floor=floor), prefer_later=False
    )
    best_pc, best_skr, best_std = grid[best_i], best.skr, best.std
    if getattr(evaluator, "refine", False) and len(grid) > 1:
        step = grid[1] - grid[0]
        lo, hi = max(best_pc - step, 0.0), min(best_pc + step, 1.0)
        counter = [0]

        def f(pc):
            counter[0] += 1
            return evaluator(params, Probabilistic(pc)).skr

        x, fx = golden_section_max(f, lo, hi, PC_REFINE_TOL)
        evaluations += counter[0]
        if fx > best_skr:
            best_pc, best_skr = x, fx
    return OptimizationResult("probabilistic", best_pc, best_skr, evaluations, best_std,
                              None, tuple(grid), tuple(values))


def maximize_over_tc(params: ChainParams, t_c_max: Optional[int] = None,
                     evaluator: Optional[Callable] = None, e2e_cutoff: bool = False,
                     descending: bool = False) -> OptimizationResult:
    """Maximize SKR over cutoff times ``0 .. t_c_max - 1``; ties keep the smaller ``t_c``.

    The certificate compares the best value with
    ``R(p_c = 0) * SKF(w_bar(t_c_max))``. A failed certificate is reported
    through ``certified``, not raised. ``descending`` scans large cutoff
    times first, which lets pruning evaluators skip slow small cutoffs.
    """
    evaluator = evaluator or ExactEvaluator()
    if t_c_max is None:
        t_c_max = default_tc_max(params)
    if int(t_c_max) != t_c_max or t_c_max < 1:
        raise ValueError(f"t_c_max must be a positive integer, got {t_c_max!r}")
    cls = DeterministicE2E if e2e_cutoff else Deterministic
    points = list(range(int(t_c_max)))
    if descending:
        points.reverse()
    best_i, best, values, evaluations = _scan(
        points, lambda tc, floor: evaluator(params, cls(tc), floor=floor), prefer_later=descending
    )
    no_cutoff = evaluator(params, Probabilistic(0.0)).performance
    at_max = _evaluate_uncapped(evaluator, params, cls(int(t_c_max))).performance
    bound = no_cutoff.rate * skf(at_max.expected_werner)
    # equality is enough; the slack absorbs round-off between the two evaluation paths
    holds = best.skr >= bound * (1.0 - CERTIFICATE_SLACK)
    certificate = Certificate(int(t_c_max), no_cutoff.rate, at_max.expected_werner, bound, holds)
    best_tc = points[best_i]
    if descending:
        points, values = points[::-1], values[::-1]
    return OptimizationResult(cls(0).name, best_tc, best.skr, evaluations + 2, best.std,
                              certificate, tuple(points), tuple(values))


def _evaluate_uncapped(evaluator, params, policy) -> SkrEstimate:
    if isinstance(evaluator, ExactEvaluator) and evaluator.enforce_cap:
        return ExactEvaluator(enforce_cap=False)(params, policy)
    return evaluator(params, policy)


def skr_ratio(params: ChainParams, evaluator: Optional[Callable] = None,
              t_c_max: Optional[int] = None) -> RatioResult:
    """Ratio of the best probabilistic to the best deterministic SKR.

    Returns 1 when both maxima vanish and ``inf`` when only the
    deterministic one does; both cases set ``degenerate``.
    """
    pc = maximize_over_pc(params, evaluator)
    tc = maximize_over_tc(params, t_c_max, evaluator)
    if tc.best_skr > 0:
        return RatioResult(pc.best_skr / tc.best_skr, False, pc, tc)
    return RatioResult(1.0 if pc.best_skr == 0 else math.inf, True, pc, tc)


@dataclass(frozen=True)
class ThresholdResult:
    """Highest rate of one policy family whose fidelity is at least ``f_min``.

    ``best_param`` is ``None`` when no parameter meets the threshold.
    """

    policy: str
    f_min: float
    best_param: Optional[float]
    rate: float
    fidelity: float


def max_rate_above_fidelity(params: ChainParams, f_min: float, policy: str,
                            t_c_max: Optional[int] = None, evaluate=None) -> ThresholdResult:
    """Best rate subject to ``F >= f_min`` for ``policy`` in {"deterministic", "probabilistic"}.

    Cutoff times ``0 .. t_c_max`` and ``inf`` are scanned directly. For cutoff
    probabilities the feasible grid points (spacing 0.01) are scanned and
    the boundary between the smallest feasible point and its infeasible
    neighbour is located by bisection on the fidelity, since lowering
    ``p_c`` trades fidelity for rate.
    """
    evaluate = evaluate or evaluate_exact
    best = (None, 0.0, math.nan)

    def consider(param, perf):
        nonlocal best
        if perf.fidelity >= f_min and (best[0] is None or perf.rate > best[1]):
            best = (param, perf.rate, perf.fidelity)

    if policy == "deterministic":
        if t_c_max is None:
            t_c_max = default_tc_max(params)
        for t_c in list(range(int(t_c_max) + 1)) + [math.inf]:
            consider(t_c, evaluate(params, Deterministic(t_c)))
    elif policy == "probabilistic":
        grid = [float(x) for x in PC_GRID]
        perfs = [evaluate(params, Probabilistic(pc)) for pc in grid]
        for pc, perf in zip(grid, perfs):
            consider(pc, perf)
        feasible = [i for i, perf in enumerate(perfs) if perf.fidelity >= f_min]
        if feasible and feasible[0] > 0:
            # bisection keeps ``hi`` feasible, so the returned point meets the threshold
            lo, hi = grid[feasible[0] - 1], grid[feasible[0]]
            hi_perf = perfs[feasible[0]]
            while True:
                mid = 0.5 * (lo + hi)
                if not lo < mid < hi:
                    break
                perf = evaluate(params, Probabilistic(mid))
                if perf.fidelity >= f_min:
                    hi, hi_perf = mid, perf
                else:
                    lo = mid
            consider(hi, hi_perf)
    else:
        raise ValueError(f"policy must be 'deterministic' or 'probabilistic', got {policy!r}")
    return ThresholdResult(policy, f_min, best[0], best[1], best[2])


def equal_rate_pc(params: ChainParams, t_c) -> float:
    """Cutoff probability whose rate equals that of cutoff time ``t_c``.

    Three-node chains use the closed form; longer chains solve
    ``R(p_c) = R(t_c)`` with Brent's method, using that the rate falls from
    the no-cutoff rate at ``p_c = 0`` to the never-store rate at ``p_c = 1``.
    """
    if params.n_node == 3:
        return crossover_pc(params.p_g, t_c)
    if t_c == 0:
        return 1.0
    target = evaluate_exact(params, Deterministic(t_c)).rate
    gap = lambda pc: evaluate_exact(params, Probabilistic(pc)).rate - target
    g0 = gap(0.0)
    if g0 <= 0.0:
        return 0.0
    return scipy.optimize.brentq(gap, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
