import logging
from typing import Dict, List, Optional, Set

from pydantic import BaseModel, Field

from nibble_coloring.errors import FinisherError, InfeasibleError, PreconditionError
from nibble_coloring.graph.core import Graph, ListAssignment, PartialColoring, check_proper, max_color_degree
from nibble_coloring.util.rng import make_rng

logger = logging.getLogger(__name__)


class FinisherReport(BaseModel):
    """How the finisher completed a coloring.

    Attributes:
        sweeps (int): Random sweeps performed.
        conflicts (List[int]): Vertices left uncolored by conflicts after each sweep.
        greedy (int): Vertices colored by the greedy fallback.
        margin (bool): Whether |L(v)| ≥ 8·(max color-degree) held on entry.
    """

    sweeps: int = 0
    conflicts: List[int] = Field(default_factory=list)
    greedy: int = 0
    margin: bool = True


class FinisherResult(BaseModel):
    coloring: PartialColoring
    report: FinisherReport


def _available(G: Graph, L: ListAssignment, colors: Dict[int, int], v: int) -> List[int]:
    taken = {colors[u] for u in G.adjacency[v] if u in colors}
    return [c for c in L.lists[v] if c not in taken]


def _greedy(G: Graph, L: ListAssignment, colors: Dict[int, int], uncolored: Set[int]) -> int:
    """Color, smallest available color first, any uncolored vertex with more available colors than uncolored
    neighbors, until none is left or none qualifies. Returns the number of vertices colored."""
    colored = 0
    progress = True
    while uncolored and progress:
        progress = False
        for v in sorted(uncolored):
            available = _available(G, L, colors, v)
            pending = sum(1 for u in G.adjacency[v] if u in uncolored)
            if len(available) > pending:
                colors[v] = available[0]
                uncolored.discard(v)
                colored += 1
                progress = True
    return colored


def has_slack(G: Graph, L: ListAssignment) -> bool:
    """Whether |L(v)| > deg(v) for every vertex, the condition of the greedy fallback."""
    return all(L.size(v) > G.degree(v) for v in range(G.n))


def finisher_ready(G: Graph, L: ListAssignment) -> bool:
    """Whether `complete_coloring` accepts the pair."""
    return L.min_size() >= 8 * max_color_degree(G, L) or has_slack(G, L)


def complete_coloring(
    G: Graph,
    L: ListAssignment,
    seed: int,
    max_iterations: int = 100,
    partial: Optional[PartialColoring] = None,
) -> FinisherResult:
    """Complete a coloring when lists dominate color-degrees.

    Every sweep, each uncolored vertex picks a uniform color from its list minus the colors of its colored
    neighbors; both ends of an edge whose ends picked the same color are uncolored again. After `max_iterations`
    sweeps without progress the remaining vertices are colored greedily while that stays possible.

    Args:
        G: Graph to color.
        L: Lists. Requires |L(v)| ≥ 8·(max color-degree), or |L(v)| > deg(v) for the greedy fallback.
        seed: Seed of the sweeps.
        max_iterations: Sweeps without progress before falling back to greedy.
        partial: Colors already fixed, kept as they are.

    Returns:
        FinisherResult: A total proper coloring and how it was reached.
    """
    if len(L) != G.n:
        raise PreconditionError(f"list assignment covers {len(L)} vertices, graph has {G.n}")
    d = max_color_degree(G, L)
    margin = L.min_size() >= 8 * d
    if not margin and not has_slack(G, L):
        raise InfeasibleError(
            f"finisher needs |L(v)| ≥ 8·{d} or |L(v)| > deg(v): minimum list size is {L.min_size()}",
        )

    report = FinisherReport(margin=margin)
    colors: Dict[int, int] = dict(partial.assignment) if partial is not None else {}
    uncolored = {v for v in range(G.n) if v not in colors}
    rng = make_rng(seed)
    stalled = 0
    while uncolored and stalled < max_iterations:
        order = sorted(uncolored)
        picks = rng.random(len(order))
        proposal: Dict[int, int] = {}
        for v, u in zip(order, picks.tolist()):
            available = _available(G, L, colors, v)
            if available:
                proposal[v] = available[min(int(u * len(available)), len(available) - 1)]
        clashes = {v for v, c in proposal.items() for w in G.adjacency[v] if proposal.get(w) == c}
        accepted = {v: c for v, c in proposal.items() if v not in clashes}
        colors.update(accepted)
        uncolored -= accepted.keys()
        report.sweeps += 1
        report.conflicts.append(len(uncolored))
        stalled = 0 if accepted else stalled + 1

    if uncolored:
        logger.info("Finisher stalled with %d uncolored vertices after %d sweeps", len(uncolored), report.sweeps)
        report.greedy = _greedy(G, L, colors, uncolored)
        if uncolored:
            raise FinisherError(
                f"{len(uncolored)} vertices remain uncolored after {report.sweeps} sweeps and the greedy fallback",
                uncolored=sorted(uncolored),
            )

    phi = PartialColoring(assignment=colors)
    check_proper(G, phi, L, "finisher coloring")
    return FinisherResult(coloring=phi, report=report)
