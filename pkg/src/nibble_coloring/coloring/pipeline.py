import logging
from typing import Optional

from pydantic import BaseModel

from nibble_coloring.coloring.finisher import FinisherReport, complete_coloring, finisher_ready, has_slack
from nibble_coloring.coloring.nibble import NibbleSchedule, RunReport, run_nibble
from nibble_coloring.config import NibbleConfig
from nibble_coloring.errors import InfeasibleError, InvariantError
from nibble_coloring.graph.core import (
    Graph,
    ListAssignment,
    PartialColoring,
    check_proper,
    max_color_degree,
    preprocess,
)
from nibble_coloring.io.trace import TraceLog
from nibble_coloring.util.rng import derive_seed

logger = logging.getLogger(__name__)

# Derived-seed key of the finisher, disjoint from the (round, retry) keys of the nibble.
FINISHER_KEY = 0


class PipelineResult(BaseModel):
    """Total coloring from `color_graph`.

    Attributes:
        coloring (PartialColoring): Total proper coloring with φ(v) ∈ L(v).
        report (RunReport): Nibble run report, with `colors_used` and `palette_size` filled in.
        finisher (FinisherReport): How the finisher completed the coloring.
        finisher_scope (str): "remainder" when the finisher colored the nibble remainder, "whole" when it ran on the
            input with the nibble coloring held fixed.
        trace (TraceLog): Accepted round outcomes.
    """

    coloring: PartialColoring
    report: RunReport
    finisher: FinisherReport
    finisher_scope: str = "remainder"
    trace: TraceLog


def color_graph(
    G: Graph,
    L: ListAssignment,
    config: Optional[NibbleConfig] = None,
    seed: int = 0,
    schedule: Optional[NibbleSchedule] = None,
) -> PipelineResult:
    """Nibble rounds down to the finisher threshold, then complete the coloring.

    Args:
        G: Graph to color.
        L: Lists, one per vertex.
        config: Pipeline configuration. Defaults to override mode with ε = 0.1.
        seed: Master seed of the run.
        schedule: Strict-mode schedule, see `run_nibble`.

    Returns:
        PipelineResult: The total coloring and the reports of both stages.
    """
    config = config or NibbleConfig()
    run = run_nibble(G, L, config, seed, schedule=schedule)
    finisher_seed = derive_seed(seed, FINISHER_KEY)

    remainder_G, remainder_L = run.graph, run.lists
    if remainder_L.min_size() > 0:
        trimmed_G, trimmed_L = preprocess(remainder_G, remainder_L, remainder_L.min_size())
        if trimmed_L.min_size() >= 8 * max_color_degree(trimmed_G, trimmed_L):
            remainder_G, remainder_L = trimmed_G, trimmed_L

    if finisher_ready(remainder_G, remainder_L):
        finished = complete_coloring(remainder_G, remainder_L, finisher_seed, config.finisher_max_iterations)
        phi = run.coloring.merged(finished.coloring.relabelled(run.vertices))
        scope = "remainder"
    elif has_slack(G, L):
        logger.info("Remainder of %d vertices is not finisher-ready, finishing on the whole graph", run.graph.n)
        finished = complete_coloring(G, L, finisher_seed, config.finisher_max_iterations, partial=run.coloring)
        phi = finished.coloring
        scope = "whole"
    else:
        raise InfeasibleError(
            f"nibble stopped ({run.report.stop_reason}) with {run.graph.n} vertices left, minimum list "
            f"{run.lists.min_size()} against color-degree {run.report.handoff.max_color_degree}, and the input "
            "has no list slack to fall back on",
        )

    if not phi.is_total(G.n):
        raise InvariantError(f"pipeline left {sum(v not in phi.assignment for v in range(G.n))} vertices uncolored")
    check_proper(G, phi, L, "pipeline coloring")
    run.report.colors_used = phi.colors_used()
    run.report.palette_size = len(L.palette())
    logger.info(
        "Colored %d vertices with %d colors (palette %d) after %d rounds",
        G.n,
        run.report.colors_used,
        run.report.palette_size,
        len(run.report.rounds),
    )
    return PipelineResult(
        coloring=phi,
        report=run.report,
        finisher=finished.report,
        finisher_scope=scope,
        trace=run.trace,
    )
