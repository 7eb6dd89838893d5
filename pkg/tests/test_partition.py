import math

import networkx as nx
import pytest
from nibble_coloring.coloring.partition import (
    PartitionSchedule,
    build_schedule,
    random_bipartition,
    split_bound,
    weak_vu_color_bound,
    weak_vu_pipeline,
)
from nibble_coloring.errors import PreconditionError
from nibble_coloring.graph.core import Graph, ListAssignment, is_proper, max_metrics


def test_split_bound():
    assert split_bound(1024) == pytest.approx(613.594, abs=1e-3)
    assert weak_vu_color_bound(100, 1, 0.1, 2) == pytest.approx(110)


def test_schedule_zeta_one():
    schedule = build_schedule(1024, 1.0, 0.1)

    assert schedule.t_seq == schedule.d_seq
    assert not any(schedule.ordered), "d_i = t_i at every level."
    if schedule.i_star > 1:
        assert schedule.d_seq[1] == pytest.approx(613.594, abs=1e-3)


def test_schedule_part_count():
    delta, zeta, eps, s = 1e6, 0.01, 0.1, 2
    schedule = build_schedule(delta, zeta, eps, s)

    limit = (1 - eps / 4) * zeta ** (-1 / (16 * s))
    assert math.log(delta) - math.log(schedule.k) <= limit
    assert schedule.k == 1 or math.log(delta) - math.log(schedule.k // 2) > limit
    assert schedule.i_star == int(math.log2(schedule.k)) + 1
    assert len(schedule.d_seq) == len(schedule.t_seq) == schedule.i_star
    assert len(schedule.lll_p) == schedule.i_star - 1


def test_schedule_ratio_decreases():
    schedule = build_schedule(1e6, 0.01, 0.1)

    assert schedule.ratio_decreasing
    assert all(schedule.ratio_decreasing)
    for d, t in zip(schedule.d_seq, schedule.t_seq):
        assert d > t


def test_schedule_round_trip(tmp_path):
    schedule = build_schedule(5000, 0.2, 0.1)
    path = tmp_path / "partition.json"
    schedule.to_file(path)

    assert str(PartitionSchedule.from_file(path)) == path.read_text()


@pytest.mark.parametrize(
    "args",
    [(0, 0.5, 0.1, 2), (100, 0, 0.1, 2), (100, 1.5, 0.1, 2), (100, 0.5, 0.4, 2), (100, 0.5, 0.1, 1)],
)
def test_schedule_preconditions(args):
    with pytest.raises(PreconditionError):
        build_schedule(*args)


def test_bipartition_trivial():
    result = random_bipartition(Graph.empty(10), 2, 1, 1, seed=0)
    assert result.success and result.resamplings == 0
    assert sorted(result.parts[0] + result.parts[1]) == list(range(10))

    single = random_bipartition(Graph.empty(1), 2, 1, 1, seed=0)
    assert sorted(single.parts[0] + single.parts[1]) == [0]


def _check_halves(G: Graph, parts, d: float, t: float):
    assert sorted(parts[0] + parts[1]) == list(range(G.n))
    for half in parts:
        sub, _ = G.induced_subgraph(half)
        # With one shared color, color-degree and color-codegree are degree and codegree.
        metrics = max_metrics(sub, ListAssignment.uniform(sub.n, [1]), 2)
        assert metrics.max_color_degree <= split_bound(d)
        assert metrics.max_color_codegree <= split_bound(t)


@pytest.mark.parametrize("seed", range(3))
def test_bipartition_bounds(seed: int):
    G = Graph.from_networkx(nx.gnp_random_graph(200, 0.1, seed=seed))
    d, t = G.max_degree(), G.max_codegree(2)

    result = random_bipartition(G, 2, d, t, seed)

    assert result.success, result.surviving_events
    _check_halves(G, result.parts, d, t)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_bipartition_large(seed: int):
    G = Graph.from_networkx(nx.gnp_random_graph(500, 0.05, seed=seed))
    d, t = G.max_degree(), G.max_codegree(2)

    result = random_bipartition(G, 2, d, t, seed, max_retries=100)

    assert result.success, result.surviving_events
    assert result.resamplings <= 100
    _check_halves(G, result.parts, d, t)


def test_bipartition_preconditions():
    G = Graph.from_networkx(nx.petersen_graph())
    with pytest.raises(PreconditionError):
        random_bipartition(G, 2, 2, 3, seed=0)
    with pytest.raises(PreconditionError):
        random_bipartition(G, 2, 3, 0.5, seed=0)


@pytest.mark.parametrize("seed", range(3))
def test_weak_vu_petersen(seed: int):
    G = Graph.from_networkx(nx.petersen_graph())

    result = weak_vu_pipeline(G, zeta=1.0, eps=0.1, s=2, seed=seed)

    assert result.coloring.is_total(10)
    assert is_proper(G, result.coloring)
    assert len(result.parts) == result.schedule.k == 2
    ranges = [range(part.palette[0], part.palette[1] + 1) for part in result.parts]
    assert not set(ranges[0]) & set(ranges[1])
    for v, c in result.coloring.assignment.items():
        assert any(c in r for r in ranges)
    assert result.colors_used <= result.palette_size


def test_weak_vu_codegree_precondition():
    G = Graph.from_edges(5, [(a, x) for a in (0, 1) for x in (2, 3, 4)])
    with pytest.raises(PreconditionError, match="codegree"):
        weak_vu_pipeline(G, zeta=0.5, eps=0.1, s=2, seed=0)
