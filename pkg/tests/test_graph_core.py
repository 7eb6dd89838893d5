from itertools import combinations
from pathlib import Path
from typing import Tuple

import networkx as nx
import pytest
from nibble_coloring.errors import InvariantError, PreconditionError
from nibble_coloring.graph.core import (
    Graph,
    ListAssignment,
    PairParams,
    PartialColoring,
    check_proper,
    color_codegree_counts,
    color_degree,
    coloring_violations,
    flat_color_degrees,
    is_proper,
    max_color_codegree,
    max_color_degree,
    max_metrics,
    preprocess,
    s_color_codegree,
    validate_pair,
)
from nibble_coloring.graph.generators import uniform_lists


def test_graph(c5_graph_file: Tuple[Path, Graph]):
    path, exp = c5_graph_file

    graph = Graph.from_file(path)

    for key in exp.model_fields:
        assert getattr(graph, key) == getattr(exp, key), f"Field {key} does not match."

    with open(path, "r") as f:
        assert str(graph) == f.read(), "Serialization does not match."


def test_petersen_graph(petersen_graph_file: Tuple[Path, Graph]):
    path, exp = petersen_graph_file

    graph = Graph.from_file(path)

    assert graph.adjacency == exp.adjacency
    assert graph.max_degree() == 3
    assert graph.max_codegree(2) == 1, "Petersen graph has no 4-cycles."
    with open(path, "r") as f:
        assert str(graph) == f.read(), "Serialization does not match."


def test_lists(c5_lists_file: Tuple[Path, ListAssignment]):
    path, exp = c5_lists_file

    lists = ListAssignment.from_file(path)

    assert lists.lists == exp.lists
    with open(path, "r") as f:
        assert str(lists) == f.read(), "Serialization does not match."


def test_coloring(c5_coloring_file: Tuple[Path, PartialColoring]):
    path, exp = c5_coloring_file

    phi = PartialColoring.from_file(path)

    assert phi.assignment == exp.assignment
    assert phi.colors_used() == 3
    with open(path, "r") as f:
        assert str(phi) == f.read(), "Serialization does not match."


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("3\n", "line 1"),
        ("3 1\n0 x\n", "line 2"),
        ("3 1\n0 5\n", "line 2"),
        ("3 2\n0 1\n", "announces 2 edges"),
    ],
)
def test_graph_malformed(text: str, match: str):
    with pytest.raises(PreconditionError, match=match):
        Graph.from_string(text)


def test_graph_rejects_loops_and_asymmetry():
    with pytest.raises(PreconditionError):
        Graph.from_edges(3, [(1, 1)])
    with pytest.raises(ValueError):
        Graph(n=2, adjacency=[[1], []])


def test_invalid_vertex():
    G = Graph.from_edges(3, [(0, 1)])
    with pytest.raises(PreconditionError, match="invalid vertex"):
        G.degree(3)
    with pytest.raises(PreconditionError, match="repeats"):
        G.codegree([0, 0])


def test_color_degree(star):
    G, L = star
    assert color_degree(G, L, 0, 1) == 3
    assert color_degree(G, L, 0, 2) == 0, "Color absent from every neighbor list."

    cycle = Graph.from_networkx(nx.cycle_graph(5))
    assert color_degree(cycle, ListAssignment.uniform(5, [1, 2]), 0, 2) == 2


def test_flat_color_degrees():
    G = Graph.from_networkx(nx.gnp_random_graph(12, 0.4, seed=5))
    L = uniform_lists(12, 6, 3, seed=5)

    expected = [color_degree(G, L, v, c) for v in range(12) for c in L.lists[v]]
    assert flat_color_degrees(G, L).tolist() == expected
    assert flat_color_degrees(Graph.empty(2), ListAssignment.uniform(2, [1, 2])).tolist() == [0, 0, 0, 0]


def test_s_color_codegree():
    # K_{2,3}: a=0, b=1 against x, y, z = 2, 3, 4
    G = Graph.from_edges(5, [(a, x) for a in (0, 1) for x in (2, 3, 4)])
    L = ListAssignment.uniform(5, [1])

    assert s_color_codegree(G, L, (0, 1), 1) == 3
    assert s_color_codegree(G, L, (1, 0), 1) == 3
    assert s_color_codegree(G, L, (0, 2), 1) == 0, "Disjoint neighborhoods."
    with pytest.raises(PreconditionError):
        s_color_codegree(G, L, (0, 0), 1)


def test_s_color_codegree_brute_force():
    G = Graph.from_networkx(nx.gnp_random_graph(8, 0.5, seed=3))
    L = uniform_lists(8, 4, 2, seed=11)
    counts = color_codegree_counts(G, L, 2)

    for s in (2, 3):
        for tup in combinations(range(8), s):
            common = set.intersection(*(set(G.adjacency[v]) for v in tup))
            for c in range(1, 5):
                expected = sum(1 for u in common if c in L.lists[u])
                assert s_color_codegree(G, L, tup, c) == expected
                if s == 2 and all(c in L.lists[v] for v in tup) and expected:
                    assert counts[(tup, c)] == expected


def test_max_metrics(star):
    assert max_metrics(Graph.empty(4), ListAssignment.uniform(4, [1, 2, 3])) == max_metrics(
        Graph.empty(4),
        ListAssignment.uniform(4, [4, 5, 6]),
    )
    metrics = max_metrics(Graph.empty(4), ListAssignment.uniform(4, [1, 2, 3]))
    assert (metrics.max_color_degree, metrics.max_color_codegree, metrics.min_list_size) == (0, 0, 3)

    G, L = star
    metrics = max_metrics(G, L, 2)
    # Every pair of leaves shares exactly one neighbor, the center.
    assert (metrics.max_color_degree, metrics.max_color_codegree, metrics.min_list_size) == (3, 1, 1)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_max_metrics_brute_force(seed: int):
    G = Graph.from_networkx(nx.gnp_random_graph(10, 0.4, seed=seed))
    L = uniform_lists(10, 5, 3, seed=seed)

    max_degree = max(color_degree(G, L, v, c) for v in range(10) for c in L.lists[v])
    max_codegree = max(
        s_color_codegree(G, L, tup, c)
        for tup in combinations(range(10), 2)
        for c in set(L.lists[tup[0]]) & set(L.lists[tup[1]])
    )
    assert max_color_degree(G, L) == max_degree
    assert max_color_codegree(G, L, 2) == max_codegree
    assert max_color_codegree(G, L, 3) == max(color_codegree_counts(G, L, 3).values(), default=0)


def test_preprocess():
    G = Graph.empty(1)
    _, L = preprocess(G, ListAssignment.from_sets([[3, 1, 2]]), 2)
    assert L.lists == [[1, 2]]

    G, _ = preprocess(Graph.from_edges(2, [(0, 1)]), ListAssignment(lists=[[1], [2]]), 1)
    assert G.num_edges == 0

    cycle = Graph.from_networkx(nx.cycle_graph(4))
    alternating = ListAssignment(lists=[[1], [2], [1], [2]])
    G, _ = preprocess(cycle, alternating, 1)
    assert G.num_edges == 0


def test_preprocess_idempotent():
    G = Graph.from_networkx(nx.gnp_random_graph(12, 0.4, seed=5))
    L = uniform_lists(12, 6, 4, seed=5)
    once = preprocess(G, L, 3)
    twice = preprocess(*once, 3)
    assert str(once[0]) == str(twice[0])
    assert once[1].lists == twice[1].lists


def test_preprocess_short_list():
    with pytest.raises(PreconditionError, match="vertex 1"):
        preprocess(Graph.empty(2), ListAssignment(lists=[[1, 2], [1]]), 2)


def test_validate_pair_valid():
    # η window (1/log²60, 1/(4 log 60)) ≈ (0.0597, 0.0611)
    G = Graph.from_networkx(nx.cycle_graph(5))
    L = ListAssignment.uniform(5, range(1, 21))
    report = validate_pair(G, L, PairParams(d=60, ell=20, s=2, eta=0.06, codegree_exponent=2))
    assert report.valid, report.violations
    assert not report.warnings


def test_validate_pair_violations():
    G = Graph.from_networkx(nx.cycle_graph(5))
    L = ListAssignment.uniform(5, range(1, 21))
    report = validate_pair(G, L, PairParams(d=2.5, ell=20, s=2, eta=0.06, codegree_exponent=2))
    assert "ℓ < 8d" in report.conditions()

    disjoint = ListAssignment(lists=[[1], [2]])
    report = validate_pair(Graph.from_edges(2, [(0, 1)]), disjoint, PairParams(d=1, ell=1, eta=0.1), strict=False)
    assert "shared-list edges" in report.conditions()
    assert any("(0, 1)" in v.detail for v in report.violations)


def test_validate_pair_strictness():
    G = Graph.from_networkx(nx.cycle_graph(5))
    L = ListAssignment.uniform(5, range(1, 51))
    p = PairParams(d=60, ell=50, s=2, eta=0.2, codegree_exponent=2)

    assert "η window" in validate_pair(G, L, p, strict=True).conditions()
    lenient = validate_pair(G, L, p, strict=False)
    assert lenient.valid
    assert [w.condition for w in lenient.warnings] == ["η window"]


def test_is_proper():
    G = Graph.from_edges(2, [(0, 1)])
    L = ListAssignment.uniform(2, [1, 2])

    assert is_proper(G, PartialColoring())
    assert not is_proper(G, PartialColoring(assignment={0: 1, 1: 1}))
    assert is_proper(G, PartialColoring(assignment={0: 1, 1: 2}), L)
    assert not is_proper(G, PartialColoring(assignment={0: 1, 1: 3}), L)


def test_coloring_violations(c5_graph_file, c5_bad_coloring_file):
    G = Graph.from_file(c5_graph_file[0])
    phi = PartialColoring.from_file(c5_bad_coloring_file[0])

    assert coloring_violations(G, phi) == ["edge (0, 1) is monochromatic with color 1"]
    with pytest.raises(InvariantError, match="monochromatic"):
        check_proper(G, phi)
    check_proper(G, PartialColoring(assignment={0: 1, 1: 2}), ListAssignment.uniform(5, [1, 2]))
    with pytest.raises(InvariantError, match="outside its list"):
        check_proper(G, PartialColoring(assignment={0: 3}), ListAssignment.uniform(5, [1, 2]))


def test_merge_and_relabel():
    phi = PartialColoring(assignment={0: 1})
    assert phi.merged(PartialColoring(assignment={1: 2})).assignment == {0: 1, 1: 2}
    with pytest.raises(PreconditionError, match="overlap"):
        phi.merged(phi)
    assert PartialColoring(assignment={0: 5, 1: 6}).relabelled([3, 7]).assignment == {3: 5, 7: 6}
