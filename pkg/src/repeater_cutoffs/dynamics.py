"""Exhaustive enumeration of one repeater-chain time step.

A time step has three phases: heralded entanglement generation (HEG) on
every segment not covered by a link, swap-asap on every node holding two
links, then the cutoff phase. This module enumerates the first two phases;
the exact builders apply their own cutoff rule to each outcome.

A link is a tuple ``(start, end, age, sources, n_new)`` covering segments
``start .. end - 1``. ``sources`` lists the indices of the links present at
the start of the step that were merged into it and ``n_new`` counts the
fresh elementary links merged into it.

Swaps inside one run of adjacent links happen simultaneously. A failed
swap measures out the links on both of its sides, so a run survives only
if all of its swaps succeed.
"""
from __future__ import annotations

import itertools
from typing import Iterator, List, Sequence, Tuple

__all__ = ["decode_runs", "swap_phase_outcomes", "is_end_to_end"]

Link = Tuple[int, int, int, Tuple[int, ...], int]


def decode_runs(occupied: Sequence[bool]) -> List[Tuple[int, int]]:
    """Maximal runs of occupied segments as ``(start, end)`` pairs."""
    runs = []
    start = None
    for i, occ in enumerate(occupied):
        if occ and start is None:
            start = i
        elif not occ and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(occupied)))
    return runs


def is_end_to_end(links: Sequence[Link], n_segments: int) -> bool:
    return len(links) == 1 and links[0][0] == 0 and links[0][1] == n_segments


def _merge(run: Sequence[Link]) -> Link:
    sources: Tuple[int, ...] = ()
    for link in run:
        sources += link[3]
    return (run[0][0], run[-1][1], sum(l[2] for l in run), sources, sum(l[4] for l in run))


def swap_phase_outcomes(
    links: Sequence[Tuple[int, int, int]], n_segments: int, p_g: float, p_s: float
) -> Iterator[Tuple[float, Tuple[Link, ...]]]:
    """Yield ``(probability, links after the swap phase)`` for every outcome.

    ``links`` are ``(start, end, age)`` triples present at the start of the
    step, ordered by ``start``. Existing links age by one step during the
    HEG phase; freshly generated links have age 0. Outcomes with zero
    probability are skipped, so the yielded probabilities sum to one.
    """
    occupied = [False] * n_segments
    for start, end, _ in links:
        for i in range(start, end):
            occupied[i] = True
    empties = [i for i in range(n_segments) if not occupied[i]]
    aged = [(s, e, a + 1, (k,), 0) for k, (s, e, a) in enumerate(links)]
    n_empty = len(empties)
    for generated in itertools.product((False, True), repeat=n_empty):
        k = sum(generated)
        p_heg = p_g**k * (1.0 - p_g) ** (n_empty - k)
        if p_heg == 0.0:
            continue
        present = aged + [(i, i + 1, 0, (), 1) for i, g in zip(empties, generated) if g]
        present.sort()
        runs: List[List[Link]] = []
        for link in present:
            if runs and runs[-1][-1][1] == link[0]:
                runs[-1].append(link)
            else:
                runs.append([link])
        singles = tuple(r[0] for r in runs if len(r) == 1)
        multi = [r for r in runs if len(r) > 1]
        for swapped in itertools.product((True, False), repeat=len(multi)):
            p = p_heg
            kept = list(singles)
            for run, ok in zip(multi, swapped):
                p_run = p_s ** (len(run) - 1)
                if ok:
                    p *= p_run
                    kept.append(_merge(run))
                else:
                    p *= 1.0 - p_run
            if p == 0.0:
                continue
            kept.sort()
            yield p, tuple(kept)
