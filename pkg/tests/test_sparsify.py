import math

import networkx as nx
import pytest
from nibble_coloring.coloring.sparsify import (
    CSV_COLUMNS,
    collision_rate_trials,
    sparsification_list_size,
    sparsification_palette,
    sparsified_graph,
    sparsify_and_color,
    sparsify_trials,
    trials_frame,
)
from nibble_coloring.errors import PreconditionError
from nibble_coloring.graph.core import Graph, ListAssignment, is_proper


@pytest.fixture
def petersen() -> Graph:
    return Graph.from_networkx(nx.petersen_graph())


def test_formulas():
    assert sparsification_palette(100, 0.5, 0.1) == pytest.approx(1.1 * 100 / (0.5 * math.log(100)))
    assert sparsification_list_size(100, 0.5, 1000, 2) == pytest.approx(10 + 2 * math.sqrt(math.log(1000)))
    with pytest.raises(PreconditionError):
        sparsification_palette(1, 0.5, 0.1)


def test_full_lists_keep_every_edge(petersen: Graph):
    sparse = sparsified_graph(petersen, ListAssignment.uniform(10, range(1, 5)))
    assert sparse.edges() == petersen.edges()


def test_disjoint_lists_drop_edges():
    G = Graph.from_edges(3, [(0, 1), (1, 2)])
    sparse = sparsified_graph(G, ListAssignment(lists=[[1], [1, 2], [3]]))
    assert sparse.edges() == [(0, 1)]


def test_sparsify_and_color(petersen: Graph):
    result = sparsify_and_color(petersen, q=4, ell=4, seed=2)

    assert result.success, result.reason
    assert result.sparsified_edges == result.edges == 15
    assert is_proper(petersen, result.coloring)
    assert 0 < result.colors_used <= 4


def test_failure_is_reported():
    G = Graph.from_networkx(nx.complete_graph(5))

    result = sparsify_and_color(G, q=2, ell=1, seed=0)

    assert not result.success
    assert result.reason
    assert result.coloring is None


def test_trials_frame(petersen: Graph):
    results = sparsify_trials(petersen, q=6, ell=4, trials=3, seed=5)

    frame = trials_frame(results)
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == 3
    assert frame["q"].tolist() == [6, 6, 6]
    assert "wall_time" in trials_frame(results, timing=True).columns


def test_trials_are_reproducible(petersen: Graph):
    a = trials_frame(sparsify_trials(petersen, q=6, ell=4, trials=3, seed=5))
    b = trials_frame(sparsify_trials(petersen, q=6, ell=4, trials=3, seed=5))
    assert a.to_csv(index=False) == b.to_csv(index=False)


def test_collision_rate_needs_edges_and_trials():
    with pytest.raises(PreconditionError):
        collision_rate_trials(Graph.empty(3), q=5, trials=10, seed=0)
    with pytest.raises(PreconditionError):
        collision_rate_trials(Graph.from_edges(2, [(0, 1)]), q=5, trials=1, seed=0)


@pytest.mark.slow
@pytest.mark.parametrize("q", [10, 50])
def test_collision_rate(q: int):
    G = Graph.from_networkx(nx.gnp_random_graph(200, 0.1, seed=1))

    report = collision_rate_trials(G, q=q, trials=1000, seed=3)

    assert report.expected == pytest.approx(1 / q)
    assert len(report.rates) == 1000
    assert report.within(3), (report.mean, report.standard_error)
