"""Random halving of graphs with bounded degree and codegree, and the split-then-color pipeline built on it."""

import logging
import math
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, Field

from nibble_coloring.coloring.pipeline import color_graph
from nibble_coloring.config import NibbleConfig
from nibble_coloring.errors import NibbleError, PartFailureError, PreconditionError
from nibble_coloring.graph.core import Graph, ListAssignment, PartialColoring, adjacency_matrix, check_proper
from nibble_coloring.io.base import JsonFileIOBase
from nibble_coloring.lab.tools import lll_ok
from nibble_coloring.util.rng import derive_seed, make_rng

logger = logging.getLogger(__name__)

SPLIT_KEY = 1
PART_KEY = 2


def split_bound(x: float) -> float:
    """x/2 + x^(2/3)."""
    return x / 2 + x ** (2 / 3)


def weak_vu_color_bound(delta: float, zeta: float, eps: float, s: int) -> float:
    """(1+ε)·ζ^(1/16s)·Δ colors."""
    return (1 + eps) * zeta ** (1 / (16 * s)) * delta


class PartitionSchedule(JsonFileIOBase):
    """Halving schedule d_1 = Δ, t_1 = ζΔ, d_{i+1} = d_i/2 + d_i^(2/3), t_{i+1} = t_i/2 + t_i^(2/3).

    Attributes:
        delta (float): Initial maximum degree Δ.
        zeta (float): Codegree ratio ζ.
        eps (float): Slack ε.
        s (int): Codegree arity.
        k (int): Number of parts, the smallest power of 2 with Δ/k ≤ exp((1-ε/4)ζ^(-1/16s)).
        i_star (int): log2(k) + 1.
        d_seq (List[float]): d_1..d_{i*}.
        t_seq (List[float]): t_1..t_{i*}.
        sqrt_ok (List[bool]): t_i > √d_i.
        ordered (List[bool]): d_i > t_i.
        ratio_decreasing (List[bool]): d_{i+1}/t_{i+1} < d_i/t_i, for each i < i* with t_i < d_i.
        lll_p (List[float]): 2·exp(-(2/3)·d_i^(1/6)) for each split level.
        lll_degree (List[float]): 2·d_i^(s+2) for each split level.
        lll_ok (List[bool]): 4·p·d_LLL ≤ 1 for each split level.
        inverse_sixth_sum (float): Σ d_i^(-1/6) over the split levels.
        final_ratio_ok (bool): d_{i*}/t_{i*} > log^(16s) d_{i*}.
        color_bound (float): (1+ε)ζ^(1/16s)Δ.
        warnings (List[str]): Checks that failed at this scale.
    """

    delta: float
    zeta: float
    eps: float
    s: int = 2
    k: int = 1
    i_star: int = 1
    d_seq: List[float] = Field(default_factory=list)
    t_seq: List[float] = Field(default_factory=list)
    sqrt_ok: List[bool] = Field(default_factory=list)
    ordered: List[bool] = Field(default_factory=list)
    ratio_decreasing: List[bool] = Field(default_factory=list)
    lll_p: List[float] = Field(default_factory=list)
    lll_degree: List[float] = Field(default_factory=list)
    lll_ok: List[bool] = Field(default_factory=list)
    inverse_sixth_sum: float = 0.0
    final_ratio_ok: bool = False
    color_bound: float = 0.0
    warnings: List[str] = Field(default_factory=list)


def _part_count(delta: float, zeta: float, eps: float, s: int) -> int:
    """Smallest power of 2 with log Δ - log k ≤ (1-ε/4)·ζ^(-1/16s)."""
    limit = (1 - eps / 4) * zeta ** (-1 / (16 * s))
    log_delta = math.log(delta)
    j = max(0, math.ceil((log_delta - limit) / math.log(2)))
    while log_delta - j * math.log(2) > limit:
        j += 1
    while j > 0 and log_delta - (j - 1) * math.log(2) <= limit:
        j -= 1
    return 2**j


def build_schedule(delta: float, zeta: float, eps: float, s: int = 2) -> PartitionSchedule:
    """Halving schedule and its diagnostics. Failed checks are reported, never raised."""
    if delta < 1:
        raise PreconditionError(f"Δ must be at least 1, got {delta}")
    if not 0 < zeta <= 1:
        raise PreconditionError(f"ζ must lie in (0, 1], got {zeta}")
    if not 0 < eps < 1 / 3:
        raise PreconditionError(f"ε must lie in (0, 1/3), got {eps}")
    if s < 2:
        raise PreconditionError(f"s must be at least 2, got {s}")

    k = _part_count(delta, zeta, eps, s)
    i_star = int(math.log2(k)) + 1
    schedule = PartitionSchedule(
        delta=delta,
        zeta=zeta,
        eps=eps,
        s=s,
        k=k,
        i_star=i_star,
        color_bound=weak_vu_color_bound(delta, zeta, eps, s),
    )

    d, t = float(delta), zeta * delta
    for i in range(1, i_star + 1):
        schedule.d_seq.append(d)
        schedule.t_seq.append(t)
        schedule.sqrt_ok.append(t > math.sqrt(d))
        schedule.ordered.append(d > t)
        if i == i_star:
            break
        p = 2 * math.exp(-(2 / 3) * d ** (1 / 6))
        degree = 2 * d ** (s + 2)
        schedule.lll_p.append(p)
        schedule.lll_degree.append(degree)
        schedule.lll_ok.append(lll_ok(p, degree))
        schedule.inverse_sixth_sum += d ** (-1 / 6)
        next_d, next_t = split_bound(d), split_bound(t)
        if t < d:
            schedule.ratio_decreasing.append(next_d / next_t < d / t)
        d, t = next_d, next_t

    d_last, t_last = schedule.d_seq[-1], schedule.t_seq[-1]
    schedule.final_ratio_ok = d_last > 1 and d_last / t_last > math.log(d_last) ** (16 * s)

    failed_sqrt = [i + 1 for i, ok in enumerate(schedule.sqrt_ok) if not ok]
    if failed_sqrt:
        schedule.warnings.append(f"t_i ≤ √d_i at levels {failed_sqrt}")
    if not all(schedule.lll_ok):
        schedule.warnings.append("local lemma condition 4·p·d_LLL ≤ 1 fails at some split level")
    if not all(schedule.ratio_decreasing):
        schedule.warnings.append("d_i/t_i is not decreasing")
    for warning in schedule.warnings:
        logger.warning("Partition schedule Δ=%g ζ=%g: %s", delta, zeta, warning)
    logger.info(
        "Partition schedule: k=%d parts, i*=%d, Σ d_i^(-1/6)=%.4g, d_i*/t_i* > log^16s d_i*: %s",
        k,
        i_star,
        schedule.inverse_sixth_sum,
        schedule.final_ratio_ok,
    )
    return schedule


class BipartitionResult(BaseModel):
    """Outcome of `random_bipartition`.

    Attributes:
        parts (Tuple[List[int], List[int]]): S1 and S2, sorted.
        resamplings (int): Bad events resampled.
        success (bool): Whether both parts satisfy the bounds.
        surviving_events (List[str]): Bad events still holding on failure.
    """

    parts: Tuple[List[int], List[int]]
    resamplings: int = 0
    success: bool = True
    surviving_events: List[str] = Field(default_factory=list)


def _degree_event(A: sp.csr_matrix, side: np.ndarray, bound: float) -> Optional[int]:
    worst = None
    for j in (0, 1):
        counts = A @ (side == j).astype(np.int64)
        bad = np.flatnonzero(counts > bound)
        if bad.size and (worst is None or bad[0] < worst):
            worst = int(bad[0])
    return worst


def _pair_codegree_event(A: sp.csr_matrix, side: np.ndarray, bound: float) -> Optional[Tuple[int, ...]]:
    worst = None
    for j in (0, 1):
        square = sp.triu(A @ sp.diags((side == j).astype(np.int64)) @ A, k=1).tocoo()
        hit = square.data > bound
        if hit.any():
            first = min(zip(square.row[hit].tolist(), square.col[hit].tolist()))
            if worst is None or first < worst:
                worst = first
    return worst


def _tuple_codegree_event(G: Graph, side: np.ndarray, s: int, bound: float) -> Optional[Tuple[int, ...]]:
    worst = None
    for j in (0, 1):
        counts: Dict[Tuple[int, ...], int] = {}
        for w in np.flatnonzero(side == j).tolist():
            for tup in combinations(G.adjacency[w], s):
                counts[tup] = counts.get(tup, 0) + 1
        bad = [tup for tup, k in counts.items() if k > bound]
        if bad and (worst is None or min(bad) < worst):
            worst = min(bad)
    return worst


def _common_neighbors(G: Graph, tup: Tuple[int, ...]) -> List[int]:
    common = set(G.neighbor_set(tup[0]))
    for v in tup[1:]:
        common &= G.neighbor_set(v)
    return sorted(common)


def random_bipartition(
    G: Graph,
    s: int,
    d: float,
    t: float,
    seed: int,
    max_retries: int = 100,
) -> BipartitionResult:
    """Split V into two parts whose induced graphs have degree ≤ d/2 + d^(2/3) and s-codegree ≤ t/2 + t^(2/3).

    Vertices start on uniform random sides. While a bad event holds (a vertex with too many neighbors on one side,
    or an s-tuple with too many common neighbors on one side), the first one in (vertex, then tuple) order has the
    sides of its variables redrawn: the neighborhood of the vertex, or the common neighborhood of the tuple.
    """
    if G.max_degree() > d:
        raise PreconditionError(f"maximum degree {G.max_degree()} exceeds d={d}")
    if G.max_codegree(s) > t:
        raise PreconditionError(f"maximum {s}-codegree {G.max_codegree(s)} exceeds t={t}")

    rng = make_rng(seed)
    side = rng.integers(0, 2, size=G.n)
    degree_bound, codegree_bound = split_bound(d), split_bound(t)
    A = adjacency_matrix(G)

    resamplings = 0
    while True:
        variables = None
        vertex = _degree_event(A, side, degree_bound)
        if vertex is not None:
            variables, event = G.adjacency[vertex], f"degree of vertex {vertex}"
        else:
            tup = _pair_codegree_event(A, side, codegree_bound) if s == 2 else _tuple_codegree_event(G, side, s, codegree_bound)
            if tup is not None:
                variables, event = _common_neighbors(G, tup), f"codegree of tuple {tup}"
        if variables is None:
            break
        if resamplings >= max_retries:
            logger.warning("Bipartition gave up after %d resamplings: %s", resamplings, event)
            return BipartitionResult(
                parts=_parts(side),
                resamplings=resamplings,
                success=False,
                surviving_events=[event],
            )
        side[variables] = rng.integers(0, 2, size=len(variables))
        resamplings += 1

    logger.debug("Bipartition of %d vertices after %d resamplings", G.n, resamplings)
    return BipartitionResult(parts=_parts(side), resamplings=resamplings)


def _parts(side: np.ndarray) -> Tuple[List[int], List[int]]:
    return np.flatnonzero(side == 0).tolist(), np.flatnonzero(side == 1).tolist()


class PartReport(BaseModel):
    part: int
    vertices: int
    max_degree: int
    palette: Tuple[int, int]
    colors_used: int


class WeakVuResult(BaseModel):
    """Total coloring from `weak_vu_pipeline`, with the schedule and per-part palettes."""

    coloring: PartialColoring
    schedule: PartitionSchedule
    parts: List[PartReport] = Field(default_factory=list)
    palette_size: int = 0
    colors_used: int = 0


def weak_vu_pipeline(
    G: Graph,
    zeta: float,
    eps: float,
    s: int,
    seed: int,
    config: Optional[NibbleConfig] = None,
    max_retries: int = 100,
) -> WeakVuResult:
    """Split G by repeated random halving, then color every part from its own disjoint range of colors.

    Part j gets the palette offset_j + 1 .. offset_j + q_j with q_j = max(Δ_j + 1, ⌈(1+ε)ζ^(1/16s)Δ/k⌉), Δ_j the
    maximum degree of the part.
    """
    config = config or NibbleConfig(eps=eps, s=s)
    delta = max(G.max_degree(), 1)
    if G.max_codegree(s) > zeta * delta:
        raise PreconditionError(f"maximum {s}-codegree {G.max_codegree(s)} exceeds ζΔ = {zeta * delta:g}")
    schedule = build_schedule(delta, zeta, eps, s)

    parts: List[List[int]] = [list(range(G.n))]
    for level in range(1, schedule.i_star):
        d, t = schedule.d_seq[level - 1], schedule.t_seq[level - 1]
        next_parts = []
        for index, vertices in enumerate(parts):
            sub, mapping = G.induced_subgraph(vertices)
            result = random_bipartition(sub, s, d, t, derive_seed(seed, SPLIT_KEY, level, index), max_retries)
            if not result.success:
                raise PartFailureError(index, NibbleError(f"bipartition failed: {result.surviving_events}"))
            next_parts.extend([mapping[v] for v in half] for half in result.parts)
        parts = next_parts

    share = math.ceil(schedule.color_bound / len(parts))
    assignment: Dict[int, int] = {}
    reports = []
    offset = 0
    for index, vertices in enumerate(parts):
        sub, mapping = G.induced_subgraph(vertices)
        q = max(sub.max_degree() + 1, share)
        lists = ListAssignment.uniform(sub.n, range(offset + 1, offset + q + 1))
        try:
            outcome = color_graph(sub, lists, config, derive_seed(seed, PART_KEY, index))
        except NibbleError as err:
            raise PartFailureError(index, err) from err
        for v, c in outcome.coloring.assignment.items():
            assignment[mapping[v]] = c
        reports.append(
            PartReport(
                part=index,
                vertices=sub.n,
                max_degree=sub.max_degree(),
                palette=(offset + 1, offset + q),
                colors_used=outcome.coloring.colors_used(),
            ),
        )
        offset += q

    phi = PartialColoring(assignment=assignment)
    check_proper(G, phi, what="union of the part colorings")
    logger.info("Weak-Vu pipeline: %d parts, palette %d, %d colors used", len(parts), offset, phi.colors_used())
    return WeakVuResult(coloring=phi, schedule=schedule, parts=reports, palette_size=offset, colors_used=phi.colors_used())
