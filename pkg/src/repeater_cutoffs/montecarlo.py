"""Monte Carlo simulation of repeater-chain episodes.

An episode starts from the empty chain and ends when an end-to-end link is
delivered. The fast simulator is compiled with numba and tracks link ages
only: a link spanning ``k`` segments with age ``t`` has Werner parameter
``w0**k * lam**t``. Every episode draws from its own stream, seeded from
``numpy.random.SeedSequence(seed)`` by episode index, so estimates do not
depend on evaluation order.

:class:`ReferenceChain` is a slower pure-Python simulator that tracks
Werner parameters directly and logs every step. It serves as an
independent check of the fast simulator and of the exact models.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numba
import numpy as np

from .model import (
    ChainParams,
    ChainPerformance,
    CutoffPolicy,
    Deterministic,
    DeterministicE2E,
    Probabilistic,
    skf,
)

__all__ = [
    "DEFAULT_MAX_STEPS",
    "EpisodeCapExceeded",
    "EpisodeSample",
    "BatchEstimate",
    "MonteCarloResult",
    "MonteCarloEvaluator",
    "episode_seeds",
    "simulate_episode",
    "simulate_episodes",
    "estimate_performance",
    "ReferenceChain",
    "StepRecord",
]

DEFAULT_MAX_STEPS = 10**8

_PROBABILISTIC, _DETERMINISTIC, _DETERMINISTIC_E2E = 0, 1, 2
_NO_CUTOFF = np.iinfo(np.int64).max


class EpisodeCapExceeded(RuntimeError):
    """An episode ran past the step cap without delivering a link."""


@dataclass(frozen=True)
class EpisodeSample:
    delivery_time: int
    end_werner: float


@dataclass(frozen=True)
class BatchEstimate:
    """Per-batch estimates; ``skr_hat = skf(w_hat) / t_hat``."""

    t_hat: float
    w_hat: float
    skr_hat: float


@dataclass(frozen=True)
class MonteCarloResult:
    """Batched estimate of one policy point.

    ``performance`` uses the pooled sample means of the delivery time and
    Werner parameter. The reported secret-key rate ``skr`` is the mean of the
    batch estimates and ``skr_std`` their sample standard deviation.
    ``t_stderr`` and ``w_stderr`` are standard errors of the pooled means.
    """

    performance: ChainPerformance
    batches: List[BatchEstimate]
    skr: float
    skr_std: float
    t_stderr: float
    w_stderr: float
    delivery_times: np.ndarray = field(repr=False)
    end_werners: np.ndarray = field(repr=False)


def _encode_policy(policy: CutoffPolicy):
    if isinstance(policy, Probabilistic):
        return _PROBABILISTIC, float(policy.p_c), _NO_CUTOFF
    t_c = _NO_CUTOFF if policy.t_c == math.inf else int(policy.t_c)
    if isinstance(policy, DeterministicE2E):
        return _DETERMINISTIC_E2E, 0.0, t_c
    if isinstance(policy, Deterministic):
        return _DETERMINISTIC, 0.0, t_c
    raise TypeError(f"unknown cutoff policy {policy!r}")


def _never_stores(policy: CutoffPolicy) -> bool:
    if isinstance(policy, Probabilistic):
        return policy.p_c == 1.0
    return policy.t_c == 0


@numba.njit(cache=True)
def _episode(seed, n_seg, p_g, p_s, kind, p_c, t_c, never_store, max_steps):
    """Return ``(delivery_time, end_age)``; delivery time -1 if the cap is hit."""
    np.random.seed(seed)
    if never_store:
        # nothing survives a step, so only all-at-once deliveries count
        q = p_g**n_seg * p_s ** (n_seg - 1)
        if q >= 1.0:
            return 1, 0
        # inverse-transform geometric draw; stays finite for q far below 1e-16
        x = math.log1p(-np.random.random()) / math.log1p(-q)
        if x > max_steps:
            return -1, 0
        return max(math.ceil(x), 1), 0
    end = np.full(n_seg, -1, dtype=np.int64)  # end[i] > i marks a link starting at i
    age = np.zeros(n_seg, dtype=np.int64)
    new_end = np.full(n_seg, -1, dtype=np.int64)
    new_age = np.zeros(n_seg, dtype=np.int64)
    for step in range(1, max_steps + 1):
        # generation on segments not covered by a link, aging of stored links
        i = 0
        while i < n_seg:
            if end[i] > i:
                age[i] += 1
                i = end[i]
            else:
                if np.random.random() < p_g:
                    end[i] = i + 1
                    age[i] = 0
                i += 1
        # swap-asap: a run of adjacent links survives only if all its swaps succeed
        new_end[:] = -1
        i = 0
        while i < n_seg:
            if end[i] <= i:
                i += 1
                continue
            j = i
            total_age = 0
            ok = True
            first = True
            while j < n_seg and end[j] > j:
                if not first and np.random.random() >= p_s:
                    ok = False
                first = False
                total_age += age[j]
                j = end[j]
            if ok:
                new_end[i] = j
                new_age[i] = total_age
            i = j
        if new_end[0] == n_seg:
            if kind == 2 and new_age[0] > t_c:
                end[:] = -1
                continue
            return step, new_age[0]
        # cutoff phase
        for i in range(n_seg):
            end[i] = -1
            if new_end[i] > i:
                if kind == 0:
                    keep = np.random.random() >= p_c
                else:
                    keep = new_age[i] < t_c
                if keep:
                    end[i] = new_end[i]
                    age[i] = new_age[i]
    return -1, 0


@numba.njit(cache=True)
def _episodes(seeds, n_seg, p_g, p_s, kind, p_c, t_c, never_store, max_steps):
    times = np.empty(seeds.shape[0], dtype=np.int64)
    ages = np.empty(seeds.shape[0], dtype=np.int64)
    for k in range(seeds.shape[0]):
        t, a = _episode(seeds[k], n_seg, p_g, p_s, kind, p_c, t_c, never_store, max_steps)
        times[k] = t
        ages[k] = a
    return times, ages


def episode_seeds(seed: int, n_episodes: int) -> np.ndarray:
    """One 32-bit seed per episode index, derived from a single root seed."""
    return np.random.SeedSequence(seed).generate_state(n_episodes, dtype=np.uint32)


def simulate_episodes(params: ChainParams, policy: CutoffPolicy, seeds: Sequence[int],
                      max_steps: int = DEFAULT_MAX_STEPS, shortcut: bool = True):
    """Delivery times and end-to-end Werner parameters for the given episode seeds.

    Policies that never store a link (``p_c = 1`` or ``t_c = 0``) deliver
    after a geometric number of steps with success probability
    ``p_g**n * p_s**(n-1)``; with ``shortcut`` that time is drawn directly
    instead of stepping through the chain.

    Raises
    ------
    EpisodeCapExceeded
        If any episode needs more than ``max_steps`` steps.
    """
    kind, p_c, t_c = _encode_policy(policy)
    seeds = np.asarray(seeds, dtype=np.uint32)
    times, ages = _episodes(seeds, params.n_segments, params.p_g, params.p_s, kind, p_c, t_c,
                            shortcut and _never_stores(policy), int(max_steps))
    if np.any(times < 0):
        raise EpisodeCapExceeded(f"an episode exceeded {max_steps} steps for {params} and {policy}")
    werners = params.w0**params.n_segments * params.lam ** ages.astype(float)
    return times, werners


def simulate_episode(params: ChainParams, policy: CutoffPolicy, seed: int,
                     max_steps: int = DEFAULT_MAX_STEPS) -> EpisodeSample:
    times, werners = simulate_episodes(params, policy, [seed], max_steps)
    return EpisodeSample(int(times[0]), float(werners[0]))


def _batch_estimates(times: np.ndarray, werners: np.ndarray) -> List[BatchEstimate]:
    out = []
    for t_row, w_row in zip(times, werners):
        t_hat = float(t_row.mean())
        w_hat = float(min(max(w_row.mean(), 0.0), 1.0))
        out.append(BatchEstimate(t_hat, w_hat, skf(w_hat) / t_hat))
    return out


def estimate_performance(params: ChainParams, policy: CutoffPolicy, n_samples: int = 100,
                         n_batches: int = 20, seed: int = 0, *, floor: Optional[float] = None,
                         max_steps: int = DEFAULT_MAX_STEPS, shortcut: bool = True) -> Optional[MonteCarloResult]:
    """Batched estimate over ``n_batches`` batches of ``n_samples`` episodes.

    Episode ``i`` of batch ``j`` uses seed index ``j * n_samples + i``.
    ``shortcut`` is passed on to :func:`simulate_episodes`.

    With ``floor`` set, episodes run one per batch in turn and the estimate
    is abandoned (``None`` is returned) as soon as the batch-mean SKR is
    certain to end strictly below ``floor``. The bound assumes every
    remaining episode takes a single step and delivers a perfect link
    (``skf(w0**n)``), so an abandoned point could never have reached it.
    """
    if int(n_samples) != n_samples or n_samples < 1:
        raise ValueError(f"n_samples must be a positive integer, got {n_samples!r}")
    if int(n_batches) != n_batches or n_batches < 2:
        raise ValueError(f"n_batches must be an integer >= 2, got {n_batches!r}")
    n_samples, n_batches = int(n_samples), int(n_batches)
    seeds = episode_seeds(seed, n_samples * n_batches).reshape(n_batches, n_samples)
    if floor is None:
        times, werners = simulate_episodes(params, policy, seeds.ravel(), max_steps, shortcut)
        times = times.reshape(n_batches, n_samples)
        werners = werners.reshape(n_batches, n_samples)
    else:
        times = np.zeros((n_batches, n_samples), dtype=np.int64)
        werners = np.zeros((n_batches, n_samples))
        best_skf = skf(params.w0**params.n_segments)
        for i in range(n_samples):
            t_col, w_col = simulate_episodes(params, policy, seeds[:, i], max_steps, shortcut)
            times[:, i], werners[:, i] = t_col, w_col
            remaining = n_samples - i - 1
            partial = times[:, : i + 1].sum(axis=1)
            bound = best_skf * float(np.mean(n_samples / (partial + remaining)))
            if bound < floor:
                return None
    batches = _batch_estimates(times, werners)
    skrs = np.array([b.skr_hat for b in batches])
    flat_t, flat_w = times.ravel().astype(float), werners.ravel()
    n_total = flat_t.size
    perf = ChainPerformance.from_delivery(float(flat_t.mean()), float(min(max(flat_w.mean(), 0.0), 1.0)))
    return MonteCarloResult(
        performance=perf,
        batches=batches,
        skr=float(skrs.mean()),
        skr_std=float(skrs.std(ddof=1)),
        t_stderr=float(flat_t.std(ddof=1) / math.sqrt(n_total)),
        w_stderr=float(flat_w.std(ddof=1) / math.sqrt(n_total)),
        delivery_times=times,
        end_werners=werners,
    )


class MonteCarloEvaluator:
    """SKR evaluator for the optimizer backed by :func:`estimate_performance`.

    Grid maxima are not refined: the statistical noise exceeds a golden-section
    step. Every policy point reuses the same seed (common random numbers).
    """

    refine = False

    def __init__(self, n_samples: int = 100, n_batches: int = 20, seed: int = 0,
                 max_steps: int = DEFAULT_MAX_STEPS, prune: bool = True):
        self.n_samples = n_samples
        self.n_batches = n_batches
        self.seed = seed
        self.max_steps = max_steps
        self.prune = prune

    def __call__(self, params, policy, floor=None):
        from .optimize import SkrEstimate

        res = estimate_performance(params, policy, self.n_samples, self.n_batches, self.seed,
                                   floor=floor if self.prune else None, max_steps=self.max_steps)
        if res is None:
            return SkrEstimate(math.nan, math.nan, None, pruned=True)
        return SkrEstimate(res.skr, res.skr_std, res.performance)


@dataclass(frozen=True)
class StepRecord:
    """State after one step of :class:`ReferenceChain`.

    ``occupancy`` is the bit string of covered segments and ``werner_vector``
    the Werner parameter of the link covering each segment (1 if empty)
    followed by the product over all links. ``ages`` lists the age of every
    stored link after the cutoff phase, left to right.
    """

    occupancy: str
    werner_vector: tuple
    ages: tuple
    delivered: bool


class ReferenceChain:
    """Step-by-step simulator that stores each link's Werner parameter explicitly.

    Links are ``[start, end, age, werner]`` lists. Draw order differs from
    the compiled simulator, so the two agree in distribution only.
    """

    def __init__(self, params: ChainParams, policy: CutoffPolicy, seed=None):
        self.params = params
        self.policy = policy
        self.rng = random.Random(seed)
        self.links: List[list] = []
        self.time = 0

    def _record(self, delivered):
        n = self.params.n_segments
        vec = [1.0] * (n + 1)
        bits = ["0"] * n
        prod = 1.0
        for start, end, _, w in self.links:
            prod *= w
            for a in range(start, end):
                vec[a] = w
                bits[a] = "1"
        vec[n] = prod
        return StepRecord("".join(bits), tuple(vec), tuple(l[2] for l in self.links), delivered)

    def step(self) -> StepRecord:
        p = self.params
        n, lam = p.n_segments, p.lam
        rng = self.rng
        self.time += 1
        covered = [False] * n
        for link in self.links:
            link[2] += 1
            link[3] *= lam
            for a in range(link[0], link[1]):
                covered[a] = True
        for a in range(n):
            if not covered[a] and rng.random() < p.p_g:
                self.links.append([a, a + 1, 0, p.w0])
        self.links.sort()
        merged = []
        run = []
        for link in self.links + [None]:
            if link is not None and run and run[-1][1] == link[0]:
                run.append(link)
                continue
            if run:
                swaps_ok = all(rng.random() < p.p_s for _ in range(len(run) - 1))
                if swaps_ok:
                    w = 1.0
                    for r in run:
                        w *= r[3]
                    merged.append([run[0][0], run[-1][1], sum(r[2] for r in run), w])
            run = [link] if link is not None else []
        self.links = merged
        if len(merged) == 1 and merged[0][0] == 0 and merged[0][1] == n:
            if isinstance(self.policy, DeterministicE2E) and merged[0][2] > self.policy.t_c:
                self.links = []
                return self._record(False)
            return self._record(True)
        if isinstance(self.policy, Probabilistic):
            self.links = [l for l in merged if rng.random() >= self.policy.p_c]
        else:
            self.links = [l for l in merged if l[2] < self.policy.t_c]
        return self._record(False)

    def run_episode(self, max_steps: int = DEFAULT_MAX_STEPS) -> List[StepRecord]:
        """Run from the empty chain until delivery and return every step's record."""
        self.links = []
        self.time = 0
        records = []
        while True:
            rec = self.step()
            records.append(rec)
            if rec.delivered:
                return records
            if self.time >= max_steps:
                raise EpisodeCapExceeded(f"reference episode exceeded {max_steps} steps")
