import logging
from itertools import combinations
from typing import Callable, Dict, List, Literal, Optional, Set, Tuple

import networkx as nx
import numpy as np
from pydantic import Field, model_validator

from nibble_coloring.errors import InfeasibleError, PreconditionError
from nibble_coloring.graph.core import Graph, ListAssignment
from nibble_coloring.io.base import JsonFileIOBase
from nibble_coloring.util.rng import derive_seed, make_rng

logger = logging.getLogger(__name__)

FIXTURES: Dict[str, Callable[[], nx.Graph]] = {
    "C5": lambda: nx.cycle_graph(5),
    "Petersen": nx.petersen_graph,
    "K13": lambda: nx.star_graph(3),
    "rook3x3": lambda: nx.cartesian_product(nx.complete_graph(3), nx.complete_graph(3)),
}

LISTS_KEY = 1


class GenSpec(JsonFileIOBase):
    """What `generate` builds.

    Attributes:
        family (str): gnp, bipartite_random, blowup_cycle, kst_free_sample or fixture.
        n (int): Number of vertices. Ignored for fixtures.
        target_degree (float): Target maximum degree Δ. Sets the edge probability when `p` is omitted.
        codegree_cap (int): Maximum allowed s-codegree, enforced by edge deletion. None means uncapped, except for
            kst_free_sample where it defaults to 1.
        s (int): Codegree arity.
        seed (int): Seed of every random choice.
        p (float): Edge probability. Overrides `target_degree`.
        fixture (str): Fixture name, one of C5, Petersen, K13, rook3x3.
        palette (int): Palette size q of the lists written next to the graph.
        list_size (int): List size ℓ of those lists.
    """

    family: Literal["gnp", "bipartite_random", "blowup_cycle", "kst_free_sample", "fixture"]
    n: int = Field(default=1, ge=1)
    target_degree: float = Field(default=0.0, ge=0)
    codegree_cap: Optional[int] = Field(default=None, ge=0)
    s: int = Field(default=2, ge=2)
    seed: int = Field(default=0, ge=0)
    p: Optional[float] = Field(default=None, ge=0, le=1)
    fixture: Optional[str] = None
    palette: Optional[int] = Field(default=None, ge=1)
    list_size: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_family(self) -> "GenSpec":
        if self.family == "fixture" and self.fixture not in FIXTURES:
            raise ValueError(f"fixture must be one of {sorted(FIXTURES)}, got {self.fixture!r}")
        if (self.palette is None) != (self.list_size is None):
            raise ValueError("palette and list_size must be given together")
        return self

    def edge_probability(self, n: int) -> float:
        if self.p is not None:
            return self.p
        return min(1.0, self.target_degree / max(n - 1, 1))


def _relabel(graph: nx.Graph) -> Graph:
    return Graph.from_networkx(nx.convert_node_labels_to_integers(graph, ordering="sorted"))


def _blowup_cycle(n: int, target_degree: float) -> Graph:
    """Vertex v sits in blob v mod k of a k-cycle, adjacent to every vertex of the two neighboring blobs."""
    blob_size = max(1, round(target_degree / 2))
    k = max(3, n // blob_size)
    blobs: List[List[int]] = [list(range(i, n, k)) for i in range(k)]
    edges = [(u, v) for i in range(k) for u in blobs[i] for v in blobs[(i + 1) % k] if u != v]
    return Graph.from_edges(n, {(min(u, v), max(u, v)) for u, v in edges})


def _tuples_through(adjacency: List[Set[int]], w: int, v: int, s: int):
    """s-tuples containing v whose members are all neighbors of w."""
    others = sorted(adjacency[w] - {v})
    for rest in combinations(others, s - 1):
        yield tuple(sorted((v, *rest)))


def cap_codegree(G: Graph, s: int, cap: int) -> Graph:
    """Delete edges, scanning them in lexicographic order, until every s-codegree is at most `cap`.

    An edge uw is deleted when, at the time it is scanned, w is a common neighbor of some s-tuple containing u with
    codegree above the cap (or symmetrically with u and w swapped). Deletions only lower codegrees, so one pass
    suffices.
    """
    adjacency = [set(row) for row in G.adjacency]
    counts: Dict[Tuple[int, ...], int] = {}
    for w in range(G.n):
        for tup in combinations(G.adjacency[w], s):
            counts[tup] = counts.get(tup, 0) + 1
    if not any(k > cap for k in counts.values()):
        return G

    removed = []
    for u, v in G.edges():
        hit = any(counts.get(tup, 0) > cap for tup in _tuples_through(adjacency, u, v, s)) or any(
            counts.get(tup, 0) > cap for tup in _tuples_through(adjacency, v, u, s)
        )
        if not hit:
            continue
        for tup in _tuples_through(adjacency, u, v, s):
            counts[tup] -= 1
        for tup in _tuples_through(adjacency, v, u, s):
            counts[tup] -= 1
        adjacency[u].discard(v)
        adjacency[v].discard(u)
        removed.append((u, v))
    logger.info("Deleted %d of %d edges to cap the %d-codegree at %d", len(removed), G.num_edges, s, cap)
    return G.without_edges(removed)


def generate(spec: GenSpec) -> Graph:
    """Build the graph described by `spec`. Deterministic given `spec.seed`."""
    seed = derive_seed(spec.seed)
    cap = spec.codegree_cap
    if spec.family == "fixture":
        return _relabel(FIXTURES[spec.fixture]())
    if spec.family == "gnp":
        G = Graph.from_networkx(nx.fast_gnp_random_graph(spec.n, spec.edge_probability(spec.n), seed=seed))
    elif spec.family in ("bipartite_random", "kst_free_sample"):
        top = spec.n // 2
        p = spec.p if spec.p is not None else min(1.0, spec.target_degree / max(spec.n - top, 1))
        G = Graph.from_networkx(nx.bipartite.random_graph(top, spec.n - top, p, seed=seed))
        if spec.family == "kst_free_sample" and cap is None:
            cap = 1
    else:
        G = _blowup_cycle(spec.n, spec.target_degree)

    if cap is not None:
        sampled = G.num_edges
        G = cap_codegree(G, spec.s, cap)
        if G.num_edges == 0 and sampled > 0 and spec.target_degree > 0:
            raise InfeasibleError(
                f"codegree cap {cap} deleted every edge of a {spec.family} graph with target degree "
                f"{spec.target_degree}",
            )
    logger.debug("Generated %s graph: n=%d, m=%d, max degree %d", spec.family, G.n, G.num_edges, G.max_degree())
    return G


def uniform_lists(n: int, q: int, ell: int, seed: int) -> ListAssignment:
    """Independent uniform ℓ-subsets of {1..q}, one per vertex."""
    if ell > q:
        raise PreconditionError(f"list size {ell} exceeds palette size {q}")
    if ell < 1:
        raise PreconditionError(f"list size must be at least 1, got {ell}")
    rng = make_rng(seed)
    return ListAssignment(lists=[np.sort(rng.choice(q, size=ell, replace=False) + 1).tolist() for _ in range(n)])


def generate_lists(spec: GenSpec, G: Graph) -> Optional[ListAssignment]:
    """Lists for `generate(spec)` when the spec names a palette, else None."""
    if spec.palette is None:
        return None
    return uniform_lists(G.n, spec.palette, spec.list_size, derive_seed(spec.seed, LISTS_KEY))
