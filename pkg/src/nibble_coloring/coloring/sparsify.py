"""Palette sparsification: sample short lists from a large palette and color only the edges whose lists meet."""

import logging
import math
import time
from functools import partial
from typing import List, Optional

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import BaseModel

from nibble_coloring.coloring.pipeline import color_graph
from nibble_coloring.config import NibbleConfig
from nibble_coloring.errors import NibbleError, PreconditionError
from nibble_coloring.graph.core import Graph, ListAssignment, PartialColoring, adjacency_matrix, check_proper
from nibble_coloring.graph.generators import uniform_lists
from nibble_coloring.util.parallel import map_ordered
from nibble_coloring.util.rng import derive_seed

logger = logging.getLogger(__name__)

LISTS_KEY = 1
COLOR_KEY = 2

CSV_COLUMNS = ["seed", "q", "ell", "edges", "sparsified_edges", "success", "colors_used", "reason"]


def sparsification_palette(delta: float, gamma: float, eps: float) -> float:
    """(1+ε)Δ/(γ log Δ)."""
    if delta <= 1 or gamma <= 0:
        raise PreconditionError(f"need Δ > 1 and γ > 0, got Δ={delta}, γ={gamma}")
    return (1 + eps) * delta / (gamma * math.log(delta))


def sparsification_list_size(delta: float, gamma: float, n: int, c: float) -> float:
    """Δ^γ + C·√(log n)."""
    if n < 1:
        raise PreconditionError(f"n must be at least 1, got {n}")
    return delta**gamma + c * math.sqrt(math.log(n))


def sparsified_graph(G: Graph, L: ListAssignment) -> Graph:
    """G restricted to E' = {uv : L(u) ∩ L(v) ≠ ∅}."""
    if len(L) != G.n:
        raise PreconditionError(f"list assignment covers {len(L)} vertices, graph has {G.n}")
    if G.num_edges == 0:
        return G
    palette = {c: i for i, c in enumerate(L.palette())}
    rows = np.repeat(np.arange(G.n), [L.size(v) for v in range(G.n)])
    cols = np.fromiter((palette[c] for colors in L.lists for c in colors), dtype=np.int64, count=rows.size)
    M = sp.csr_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(G.n, len(palette)))
    shared = adjacency_matrix(G).multiply(M @ M.T).tocoo()
    keep = (shared.data > 0) & (shared.row < shared.col)
    return Graph.from_edges(G.n, zip(shared.row[keep].tolist(), shared.col[keep].tolist()))


class SparsifyResult(BaseModel):
    """One sparsification trial.

    Attributes:
        seed (int): Trial seed.
        q (int): Palette size.
        ell (int): Sampled list size.
        edges (int): |E|.
        sparsified_edges (int): |E'|.
        success (bool): Whether a proper coloring from the sampled lists was found.
        coloring (PartialColoring): The coloring on success.
        colors_used (int): Distinct colors of the coloring, 0 on failure.
        reason (str): Why the coloring failed, empty on success.
        wall_time (float): Seconds spent in the trial.
    """

    seed: int
    q: int
    ell: int
    edges: int
    sparsified_edges: int
    success: bool
    coloring: Optional[PartialColoring] = None
    colors_used: int = 0
    reason: str = ""
    wall_time: float = 0.0


def sparsify_and_color(
    G: Graph,
    q: int,
    ell: int,
    seed: int,
    config: Optional[NibbleConfig] = None,
) -> SparsifyResult:
    """Sample L'(v) as uniform ℓ-subsets of {1..q}, keep the edges whose lists meet and color (G[E'], L').

    Pipeline failures are reported through `success` and `reason`, never raised.
    """
    start = time.perf_counter()
    lists = uniform_lists(G.n, q, ell, derive_seed(seed, LISTS_KEY))
    sparse = sparsified_graph(G, lists)
    result = SparsifyResult(seed=seed, q=q, ell=ell, edges=G.num_edges, sparsified_edges=sparse.num_edges, success=False)
    try:
        outcome = color_graph(sparse, lists, config, derive_seed(seed, COLOR_KEY))
    except NibbleError as err:
        result.reason = f"{type(err).__name__}: {err}"
        logger.info("Sparsified coloring with seed %d failed: %s", seed, result.reason)
    else:
        check_proper(G, outcome.coloring, lists, "sparsified coloring on the full graph")
        result.success = True
        result.coloring = outcome.coloring
        result.colors_used = outcome.coloring.colors_used()
    result.wall_time = time.perf_counter() - start
    return result


def _trial(seed: int, G: Graph, q: int, ell: int, config: Optional[NibbleConfig]) -> SparsifyResult:
    return sparsify_and_color(G, q, ell, seed, config)


def sparsify_trials(
    G: Graph,
    q: int,
    ell: int,
    trials: int,
    seed: int,
    config: Optional[NibbleConfig] = None,
    workers: Optional[int] = None,
) -> List[SparsifyResult]:
    """`trials` independent runs with seeds derive_seed(seed, t), in trial order."""
    seeds = [derive_seed(seed, t) for t in range(trials)]
    return map_ordered(partial(_trial, G=G, q=q, ell=ell, config=config), seeds, workers)


def trials_frame(results: List[SparsifyResult], timing: bool = False) -> pd.DataFrame:
    """CSV-ready table of trial results. Wall time is included only with `timing`, to keep the rest reproducible."""
    columns = CSV_COLUMNS + (["wall_time"] if timing else [])
    return pd.DataFrame([r.model_dump(include=set(columns)) for r in results], columns=columns)


class CollisionReport(BaseModel):
    """Singleton-list experiment: the fraction |E'|/|E| against its expectation 1/q."""

    q: int
    trials: int
    rates: List[float]
    mean: float
    standard_error: float

    @property
    def expected(self) -> float:
        return 1 / self.q

    def within(self, sigmas: float = 3.0) -> bool:
        return abs(self.mean - self.expected) <= sigmas * self.standard_error


def collision_rate_trials(G: Graph, q: int, trials: int, seed: int) -> CollisionReport:
    """Sample singleton lists `trials` times and record |E'|/|E| for each."""
    if G.num_edges == 0:
        raise PreconditionError("collision rate is undefined on an edgeless graph")
    if trials < 2:
        raise PreconditionError(f"need at least 2 trials, got {trials}")
    rates = np.array(
        [
            sparsified_graph(G, uniform_lists(G.n, q, 1, derive_seed(seed, t, LISTS_KEY))).num_edges / G.num_edges
            for t in range(trials)
        ],
    )
    return CollisionReport(
        q=q,
        trials=trials,
        rates=rates.tolist(),
        mean=float(rates.mean()),
        standard_error=float(rates.std(ddof=1) / math.sqrt(trials)),
    )
