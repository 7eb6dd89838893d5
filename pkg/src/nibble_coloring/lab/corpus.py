import logging
import math
from functools import partial
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from nibble_coloring.io.base import JsonFileIOBase
from nibble_coloring.lab.concentration import MAX_EXCEPTIONAL_PROBABILITY, verify_inequality
from nibble_coloring.lab.distance import sup_direction_estimate, verify_talagrand
from nibble_coloring.lab.space import ProductSpace, WitnessStructure
from nibble_coloring.util.parallel import map_ordered
from nibble_coloring.util.rng import derive_seed, make_rng

logger = logging.getLogger(__name__)

# Coin biases used by random spaces; dyadic so that exact arithmetic stays exact.
BIASES = (0.25, 0.5, 0.75)
STRUCTURE_KEY = 1
EVENT_KEY = 2
# Event pairs with at most this many coins also get every distance checked from below by sampled directions.
CROSS_CHECK_MAX_M = 6
DIRECTION_SAMPLES = 64
DIRECTION_GAP_TOLERANCE = 1e-6


class CorpusEntry(BaseModel):
    seed: int
    space: ProductSpace
    structure: WitnessStructure


class EventPair(BaseModel):
    """Two events A, B of m fair coins, each listed outcome by outcome."""

    seed: int
    m: int
    A: List[List[int]]
    B: List[List[int]]


class WitnessCorpus(JsonFileIOBase):
    """Randomized test vectors: witness structures over small product spaces and event pairs over fair coins."""

    structures: List[CorpusEntry] = Field(default_factory=list)
    event_pairs: List[EventPair] = Field(default_factory=list)


def _cylinder(rng: np.random.Generator, m: int, size: int) -> Tuple[np.ndarray, np.ndarray]:
    trials = np.sort(rng.choice(m, size=min(size, m), replace=False))
    return trials, rng.integers(0, 2, size=trials.size)


def _matches(outcomes: np.ndarray, cylinder: Tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    trials, pattern = cylinder
    return np.all(outcomes[:, trials] == pattern, axis=1)


def random_structure(seed: int, m_max: int = 8, n_max: int = 20, exceptional: bool = False) -> CorpusEntry:
    """A random structure whose witness properties hold by construction.

    Each indicator fires when the outcome matches one of one or two random cylinders (trial subsets with fixed
    values); its witness set is the trials of the first matching cylinder. With `exceptional`, Ω* is a random
    cylinder of probability at most 1/6 on which the indicators are overwritten at random. β and D are the exact
    maxima over the non-exceptional outcomes.
    """
    rng = make_rng(seed)
    m = int(rng.integers(2, m_max + 1))
    n = int(rng.integers(1, n_max + 1))
    space = ProductSpace.biased_coins(rng.choice(BIASES, size=m).tolist())
    outcomes = space.outcomes()
    N = len(outcomes)

    indicators = np.zeros((N, n), dtype=np.int64)
    witness_rows: List[List[List[int]]] = [[[] for _ in range(n)] for _ in range(N)]
    for i in range(n):
        cylinders = [_cylinder(rng, m, int(rng.integers(1, 4))) for _ in range(int(rng.integers(1, 3)))]
        claimed = np.zeros(N, dtype=bool)
        for cylinder in cylinders:
            hits = np.flatnonzero(_matches(outcomes, cylinder) & ~claimed)
            claimed[hits] = True
            trials = cylinder[0].tolist()
            for x in hits.tolist():
                witness_rows[x][i] = trials
        indicators[:, i] = claimed

    exceptional_set: List[int] = []
    if exceptional and m >= 2:
        weights = space.weights()
        trials = rng.permutation(m)
        pattern = rng.integers(0, 2, size=m)
        mask = np.ones(N, dtype=bool)
        for k in range(m):
            mask &= outcomes[:, trials[k]] == pattern[k]
            if math.fsum(weights[mask]) <= MAX_EXCEPTIONAL_PROBABILITY:
                break
        if math.fsum(weights[mask]) <= MAX_EXCEPTIONAL_PROBABILITY:
            exceptional_set = np.flatnonzero(mask).tolist()
            indicators[mask] = rng.integers(0, 2, size=(len(exceptional_set), n))
            for x in exceptional_set:
                witness_rows[x] = [[] for _ in range(n)]

    normal = np.ones(N, dtype=bool)
    normal[exceptional_set] = False
    loads = np.zeros(m, dtype=np.int64)
    total = 0
    for x in np.flatnonzero(normal).tolist():
        row = witness_rows[x]
        counts = np.bincount([j for trials in row for j in trials], minlength=m)
        loads = np.maximum(loads, counts)
        total = max(total, int(counts.sum()))

    structure = WitnessStructure(
        n=n,
        beta=max(int(loads.max(initial=0)), 1),
        D=max(total, 1),
        indicators=indicators.tolist(),
        witnesses=witness_rows,
        exceptional=exceptional_set,
    )
    return CorpusEntry(seed=seed, space=space, structure=structure)


def hamming_ball(center: Sequence[int], radius: int) -> List[List[int]]:
    """Every 0/1 vector within Hamming distance `radius` of `center`."""
    center = np.asarray(center, dtype=np.int64)
    m = center.size
    cube = np.stack(np.unravel_index(np.arange(1 << m), [2] * m), axis=1)
    return cube[(cube != center).sum(axis=1) <= radius].tolist()


def random_event_pair(seed: int, m_max: int = 12) -> EventPair:
    """Two Hamming balls around random centers of a random cube dimension m ≤ `m_max`."""
    rng = make_rng(seed)
    m = int(rng.integers(2, m_max + 1))
    centers = rng.integers(0, 2, size=(2, m))
    radii = rng.integers(0, max(1, m // 4) + 1, size=2)
    return EventPair(
        seed=seed,
        m=m,
        A=hamming_ball(centers[0], int(radii[0])),
        B=hamming_ball(centers[1], int(radii[1])),
    )


def build_corpus(
    count: int,
    seed: int,
    m_max: int = 8,
    n_max: int = 20,
    exceptional_every: int = 5,
    event_pairs: int = 0,
    event_m_max: int = 12,
) -> WitnessCorpus:
    """`count` random structures, every `exceptional_every`-th one with an exceptional set, plus event pairs."""
    structures = [
        random_structure(
            derive_seed(seed, STRUCTURE_KEY, k),
            m_max,
            n_max,
            exceptional=exceptional_every > 0 and k % exceptional_every == 0,
        )
        for k in range(count)
    ]
    pairs = [random_event_pair(derive_seed(seed, EVENT_KEY, k), event_m_max) for k in range(event_pairs)]
    logger.info(
        "Built corpus of %d structures (%d with exceptional outcomes) and %d event pairs",
        len(structures),
        sum(1 for s in structures if s.structure.exceptional),
        len(pairs),
    )
    return WitnessCorpus(structures=structures, event_pairs=pairs)


class CorpusFinding(BaseModel):
    index: int
    tau: float
    tail: float
    bound: float


class CorpusReport(BaseModel):
    """Concentration and Talagrand checks over a corpus. Any violation with the full threshold is a bug."""

    structures: int = 0
    with_exceptional: int = 0
    checked: int = 0
    skipped: int = 0
    violations: List[CorpusFinding] = Field(default_factory=list)
    event_pairs: int = 0
    talagrand_failures: List[int] = Field(default_factory=list)
    cross_checked: int = 0
    max_direction_gap: float = 0.0

    @property
    def ok(self) -> bool:
        return (
            not self.violations
            and not self.talagrand_failures
            and abs(self.max_direction_gap) <= DIRECTION_GAP_TOLERANCE
        )


def _check_entry(entry: CorpusEntry, tau_grid: Sequence[float], include_exceptional_term: bool):
    return verify_inequality(entry.space, entry.structure, tau_grid, include_exceptional_term)


def _check_pair(pair: EventPair) -> Tuple[bool, Optional[float]]:
    holds = verify_talagrand(ProductSpace.fair_coins(pair.m), pair.A, pair.B).holds
    if pair.m > CROSS_CHECK_MAX_M:
        return holds, None
    gaps = [sup_direction_estimate(y, pair.A, DIRECTION_SAMPLES, pair.seed).gap for y in pair.B]
    return holds, max(gaps, key=abs)


def run_corpus(
    corpus: WitnessCorpus,
    tau_grid: Sequence[float],
    include_exceptional_term: bool = True,
    workers: Optional[int] = None,
) -> CorpusReport:
    """Verify every structure over `tau_grid` and every event pair, merging results in corpus order."""
    reports = map_ordered(
        partial(_check_entry, tau_grid=list(tau_grid), include_exceptional_term=include_exceptional_term),
        corpus.structures,
        workers,
    )
    result = CorpusReport(
        structures=len(corpus.structures),
        with_exceptional=sum(1 for entry in corpus.structures if entry.structure.exceptional),
        event_pairs=len(corpus.event_pairs),
    )
    for index, report in enumerate(reports):
        result.checked += len(report.checks) - len(report.skipped)
        result.skipped += len(report.skipped)
        result.violations.extend(
            CorpusFinding(index=index, tau=c.tau, tail=c.tail, bound=c.bound) for c in report.violations
        )
    pair_checks = map_ordered(_check_pair, corpus.event_pairs, workers)
    result.talagrand_failures = [index for index, (holds, _) in enumerate(pair_checks) if not holds]
    gaps = [gap for _, gap in pair_checks if gap is not None]
    result.cross_checked = len(gaps)
    result.max_direction_gap = max(gaps, key=abs, default=0.0)
    return result
