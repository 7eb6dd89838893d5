"""One round of the wasteful coloring procedure.

A round activates each vertex with probability η, assigns every activated vertex a uniform color from its list,
removes each assigned color from the lists of the neighbors that have it, keeps the colors that survived at their
own vertex and finally flips an equalizing coin per surviving (vertex, color) pair, so that every color stays in a
list with probability exactly `keep`.

Random draws happen in a fixed order: activations by ascending vertex, assignments by ascending activated vertex,
coin flips by ascending (vertex, color) over every list.
"""

import logging
import math
from typing import Dict, List, Set, Tuple

import numpy as np
from pydantic import BaseModel, Field, computed_field

from nibble_coloring.errors import InvariantError, PreconditionError, SizeLimitError
from nibble_coloring.graph.core import (
    Graph,
    ListAssignment,
    PartialColoring,
    flat_color_degrees,
    neighbors_with_color,
)
from nibble_coloring.util.rng import make_rng

logger = logging.getLogger(__name__)

MAX_SURVIVAL_NEIGHBORS = 20


def keep_value(d: float, ell: float, eta: float) -> float:
    """keep(d, ℓ, η) = (1 - η/ℓ)^d."""
    if ell < 1:
        raise PreconditionError(f"list size must be at least 1, got {ell}")
    if not 0 <= eta <= 1:
        raise PreconditionError(f"activation probability must lie in [0, 1], got {eta}")
    return (1.0 - eta / ell) ** d


def uncolor_value(d: float, ell: float, eta: float) -> float:
    return 1.0 - eta * keep_value(d, ell, eta)


class RoundParams(BaseModel):
    """Parameters of one round: the pair parameters plus the derived keep and uncolor probabilities."""

    d: float = Field(ge=0)
    ell: float = Field(ge=1)
    s: int = Field(default=2, ge=2)
    eta: float = Field(ge=0, le=1)

    @computed_field
    @property
    def keep(self) -> float:
        return keep_value(self.d, self.ell, self.eta)

    @computed_field
    @property
    def uncolor(self) -> float:
        return 1.0 - self.eta * self.keep


def eq_value(p: RoundParams, dvc: float) -> float:
    """Equalizing survival probability keep·(1 - η/ℓ)^(-dvc) of a color with color-degree `dvc`."""
    if dvc > p.d:
        raise PreconditionError(f"color-degree {dvc} exceeds d={p.d}: equalizing probability would exceed 1")
    base = 1.0 - p.eta / p.ell
    if dvc == p.d:
        return 1.0
    return p.keep * base ** (-dvc) if base > 0 else 0.0


def expected_color_degree_bound(p: RoundParams, size_s: int, q: int) -> float:
    """Upper bound |S|·keep·uncolor + (q+1)|S|/d on the expected surviving color-degree into a set S."""
    if p.d <= 0:
        raise PreconditionError("d must be positive")
    return size_s * p.keep * p.uncolor + (q + 1) * size_s / p.d


def list_size_deviation_bound(ell: float, exponent: float) -> float:
    """Concentration window ℓ/log^exponent ℓ of the surviving list size. Infinite (vacuous) for ℓ ≤ 1."""
    if ell <= 1:
        return math.inf
    return ell / math.log(ell) ** exponent


class OutcomeTrace(BaseModel):
    """Sparse record of one round's random outcome, sufficient to replay it.

    Attributes:
        seed (int): Seed the round was drawn from.
        params (RoundParams): Round parameters.
        activated (Dict[int, int]): A_v for every activated vertex. Non-activated vertices have A_v = 0.
        fired (List[Tuple[int, int]]): Every (v, c) whose equalizing flip removed c from L(v).
        list_sizes (Dict[int, int]): |L'(v)| for every vertex left uncolored.
    """

    seed: int
    params: RoundParams
    activated: Dict[int, int] = Field(default_factory=dict)
    fired: List[Tuple[int, int]] = Field(default_factory=list)
    list_sizes: Dict[int, int] = Field(default_factory=dict)

    def outcome(self, v: int) -> int:
        return self.activated.get(v, 0)


class RoundResult(BaseModel):
    """Outcome of a round in the round's own vertex ids.

    `graph` and `lists` live on the uncolored vertices relabelled 0..k-1; `vertices[i]` is the id of new vertex i
    in the round's input graph.
    """

    graph: Graph
    lists: ListAssignment
    coloring: PartialColoring
    vertices: List[int]
    trace: OutcomeTrace
    removed: int = 0


def _check_inputs(G: Graph, L: ListAssignment) -> None:
    if len(L) != G.n:
        raise PreconditionError(f"list assignment covers {len(L)} vertices, graph has {G.n}")


def _equalizing_probabilities(G: Graph, L: ListAssignment, p: RoundParams) -> np.ndarray:
    """eq(v, c) for every (v, c ∈ L(v)) in vertex-then-color order, as `eq_value` computes it."""
    dvc = flat_color_degrees(G, L)
    if dvc.size and dvc.max() > p.d:
        raise PreconditionError(f"color-degree {dvc.max()} exceeds d={p.d}: equalizing probability would exceed 1")
    base = 1.0 - p.eta / p.ell
    eqs = p.keep * base ** (-dvc.astype(np.float64)) if base > 0 else np.zeros(dvc.size)
    eqs[dvc == p.d] = 1.0
    return eqs


def _assignment_step(G: Graph, L: ListAssignment, activated: Dict[int, int]) -> Tuple[List[Set[int]], Dict[int, int]]:
    """Wasteful removal of every assigned color from the neighbors holding it, then the colors kept at home."""
    removed: List[Set[int]] = [set() for _ in range(G.n)]
    for v, c in activated.items():
        for u in neighbors_with_color(G, L, v, c):
            removed[u].add(c)
    coloring = {v: c for v, c in activated.items() if c not in removed[v]}
    return removed, coloring


def _finish(
    G: Graph,
    L: ListAssignment,
    removed: List[Set[int]],
    coloring: Dict[int, int],
    trace: OutcomeTrace,
) -> RoundResult:
    fired: Dict[int, Set[int]] = {}
    for v, c in trace.fired:
        fired.setdefault(v, set()).add(c)
    remaining = [v for v in range(G.n) if v not in coloring]
    survivors = {}
    for v in remaining:
        dropped = removed[v] | fired.get(v, set())
        survivors[v] = [c for c in L.lists[v] if c not in dropped] if dropped else L.lists[v]
    sub, vertices = G.induced_subgraph(remaining)
    trace.list_sizes = {v: len(survivors[v]) for v in remaining}
    return RoundResult(
        graph=sub,
        # Sub-lists of validated lists stay sorted and duplicate-free.
        lists=ListAssignment.model_construct(lists=[survivors[v] for v in remaining]),
        coloring=PartialColoring(assignment=coloring),
        vertices=vertices,
        trace=trace,
        removed=sum(len(r) for r in removed),
    )


def run_round(G: Graph, L: ListAssignment, p: RoundParams, seed: int) -> RoundResult:
    """Run one round on a preprocessed pair.

    Args:
        G: Graph of the round.
        L: Lists of the round, trimmed and pruned.
        p: Round parameters. Every color-degree of (G, L) must be at most `p.d`.
        seed: Seed of the round.

    Returns:
        RoundResult: Remaining graph and lists, the partial coloring and the outcome trace.
    """
    _check_inputs(G, L)
    eqs = _equalizing_probabilities(G, L, p)
    rng = make_rng(seed)

    draws = rng.random(G.n)
    active = np.flatnonzero(draws < p.eta)
    picks = rng.random(active.size)
    activated: Dict[int, int] = {}
    for v, u in zip(active.tolist(), picks.tolist()):
        colors = L.lists[v]
        if not colors:
            raise PreconditionError(f"activated vertex {v} has an empty list")
        activated[v] = colors[min(int(u * len(colors)), len(colors) - 1)]

    removed, coloring = _assignment_step(G, L, activated)

    # One flip per (v, c in L(v)) for every vertex; only uncolored vertices act on theirs.
    flips = rng.random(eqs.size)
    owners = np.repeat(np.arange(G.n), [len(colors) for colors in L.lists])
    uncolored = np.ones(G.n, dtype=bool)
    uncolored[list(coloring)] = False
    hits = np.flatnonzero((flips < 1.0 - eqs) & uncolored[owners])
    flat_colors = np.fromiter((c for colors in L.lists for c in colors), dtype=np.int64, count=eqs.size)
    fired: List[Tuple[int, int]] = [
        (v, c) for v, c in zip(owners[hits].tolist(), flat_colors[hits].tolist()) if c not in removed[v]
    ]

    trace = OutcomeTrace(seed=seed, params=p, activated=activated, fired=fired)
    logger.debug(
        "Round seed=%d: %d activated, %d colored, %d flips fired",
        seed,
        len(activated),
        len(coloring),
        len(fired),
    )
    return _finish(G, L, removed, coloring, trace)


def replay_round(G: Graph, L: ListAssignment, p: RoundParams, trace: OutcomeTrace) -> RoundResult:
    """Recompute a round's result from its recorded outcome without drawing any randomness."""
    _check_inputs(G, L)
    for v, c in trace.activated.items():
        if c not in L.color_set(v):
            raise PreconditionError(f"trace assigns color {c} to vertex {v} outside its list")
    removed, coloring = _assignment_step(G, L, trace.activated)
    replayed = OutcomeTrace(seed=trace.seed, params=p, activated=dict(trace.activated), fired=list(trace.fired))
    return _finish(G, L, removed, coloring, replayed)


def exact_survival_probability(G: Graph, L: ListAssignment, p: RoundParams, v: int, c: int) -> float:
    """Exact Pr(c ∈ L'(v)) by enumerating the outcomes of the trials that can remove c from L(v).

    Each neighbor u in N_L(v, c) is either assigned c (probability η/|L(u)|) or not; c survives the assignment step
    iff no neighbor is assigned c, and then survives the equalizing flip with probability eq(v, c).
    """
    _check_inputs(G, L)
    G.check_vertex(v)
    if c not in L.color_set(v):
        raise PreconditionError(f"color {c} is not in the list of vertex {v}")
    neighbors = neighbors_with_color(G, L, v, c)
    k = len(neighbors)
    if k > MAX_SURVIVAL_NEIGHBORS:
        raise SizeLimitError(f"survival space of ({v}, {c}) has 2^{k} outcomes, above the 2^{MAX_SURVIVAL_NEIGHBORS} cap")

    hit = np.array([p.eta / L.size(u) for u in neighbors], dtype=np.float64)
    outcomes = np.arange(2**k, dtype=np.int64)
    probabilities = np.ones(outcomes.size, dtype=np.float64)
    for i in range(k):
        bit = (outcomes >> i) & 1
        probabilities *= np.where(bit == 1, hit[i], 1.0 - hit[i])
    if abs(probabilities.sum() - 1.0) >= 1e-9:
        raise InvariantError(f"outcome probabilities sum to {probabilities.sum()!r}, not 1")

    # c survives the assignment step only in the outcome where no neighbor is assigned c.
    survive_assignment = float(probabilities[outcomes == 0].sum())
    return survive_assignment * eq_value(p, k)
