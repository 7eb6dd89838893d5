import math

import networkx as nx
import numpy as np
import pytest
from nibble_coloring.coloring.wcp import (
    RoundParams,
    eq_value,
    exact_survival_probability,
    expected_color_degree_bound,
    keep_value,
    list_size_deviation_bound,
    replay_round,
    run_round,
    uncolor_value,
)
from nibble_coloring.errors import PreconditionError, SizeLimitError
from nibble_coloring.graph.core import (
    Graph,
    ListAssignment,
    color_degree,
    is_proper,
    max_color_degree,
    neighbors_with_color,
)
from nibble_coloring.graph.generators import uniform_lists


def test_keep_value():
    assert keep_value(100, 50, 0.0) == 1.0
    assert keep_value(100, 50, 0.1) == pytest.approx(0.8185668, abs=1e-6)
    assert keep_value(1, 1, 0.5) == 0.5
    with pytest.raises(PreconditionError):
        keep_value(1, 0, 0.5)


def test_uncolor_value():
    assert uncolor_value(100, 50, 0.1) == pytest.approx(1 - 0.1 * 0.8185668, abs=1e-6)
    p = RoundParams(d=100, ell=50, eta=0.1)
    assert p.keep * p.uncolor < p.keep


def test_eq_value():
    p = RoundParams(d=100, ell=50, eta=0.1)
    assert eq_value(p, 100) == 1.0
    assert eq_value(p, 0) == pytest.approx(p.keep)
    # (1 - 0.1/50)^(100 - 50) = sqrt(keep)
    assert eq_value(p, 50) == pytest.approx(0.904747, abs=1e-5)
    assert eq_value(p, 50) == pytest.approx(math.sqrt(p.keep))
    with pytest.raises(PreconditionError):
        eq_value(p, 101)


def test_bounds():
    assert list_size_deviation_bound(1, 2) == math.inf
    assert list_size_deviation_bound(math.e**2, 2) == pytest.approx(math.e**2 / 4)
    p = RoundParams(d=10, ell=20, eta=0.1)
    assert expected_color_degree_bound(p, 5, 2) == pytest.approx(5 * p.keep * p.uncolor + 3 * 5 / 10)


def test_round_without_activation():
    G = Graph.from_networkx(nx.petersen_graph())
    L = ListAssignment.uniform(10, range(1, 5))
    result = run_round(G, L, RoundParams(d=3, ell=4, eta=0.0), seed=1)

    assert result.coloring.assignment == {}
    assert result.lists.lists == L.lists
    assert result.graph.adjacency == G.adjacency
    assert result.vertices == list(range(10))


def test_single_edge_survival():
    G = Graph.from_edges(2, [(0, 1)])
    L = ListAssignment.uniform(2, [1])
    p = RoundParams(d=1, ell=1, eta=0.5)
    assert eq_value(p, 1) == 1.0
    assert exact_survival_probability(G, L, p, 0, 1) == pytest.approx(0.5, abs=1e-12)

    # The other end is assigned 1 with probability 0.5, and then 1 leaves L(0).
    kept = 0
    for seed in range(2000):
        trace = run_round(G, L, p, seed).trace
        kept += trace.outcome(1) == 0
    assert abs(kept / 2000 - 0.5) < 4 * math.sqrt(0.25 / 2000)


def test_exact_survival_is_keep():
    instances = 0
    for seed in range(10):
        G = Graph.from_networkx(nx.gnp_random_graph(25, 0.25, seed=seed))
        L = uniform_lists(25, 8, 4, seed=seed)
        p = RoundParams(d=max(max_color_degree(G, L), 1), ell=4, eta=0.2)
        for v in range(0, 25, 5):
            c = L.lists[v][seed % 4]
            if len(neighbors_with_color(G, L, v, c)) <= 20:
                assert exact_survival_probability(G, L, p, v, c) == pytest.approx(p.keep, abs=1e-12)
                instances += 1
    assert instances >= 50


def test_exact_survival_isolated_and_capped():
    p = RoundParams(d=3, ell=2, eta=0.3)
    assert exact_survival_probability(Graph.empty(1), ListAssignment(lists=[[1, 2]]), p, 0, 1) == pytest.approx(p.keep)

    star = Graph.from_edges(22, [(0, v) for v in range(1, 22)])
    L = ListAssignment.uniform(22, [1])
    with pytest.raises(SizeLimitError):
        exact_survival_probability(star, L, RoundParams(d=21, ell=1, eta=0.1), 0, 1)
    with pytest.raises(PreconditionError):
        exact_survival_probability(star, L, RoundParams(d=21, ell=1, eta=0.1), 0, 2)


def test_mean_survival_monte_carlo():
    G = Graph.from_networkx(nx.gnp_random_graph(60, 0.15, seed=4))
    L = uniform_lists(60, 12, 6, seed=4)
    p = RoundParams(d=max_color_degree(G, L), ell=6, eta=0.3)
    v = max(range(60), key=G.degree)
    eqs = {c: eq_value(p, color_degree(G, L, v, c)) for c in L.lists[v]}

    # Survival after the assignment step, weighted by the equalizing probability.
    samples = []
    for seed in range(2000):
        activated = run_round(G, L, p, seed).trace.activated
        removed = {activated[u] for u in G.adjacency[v] if u in activated}
        samples.append(sum(eq for c, eq in eqs.items() if c not in removed))
    samples = np.asarray(samples)
    se = samples.std(ddof=1) / math.sqrt(samples.size)
    assert abs(samples.mean() - 6 * p.keep) <= 4 * se


@pytest.mark.slow
def test_mean_list_size_is_ell_keep():
    # Star K_{1,100} with full lists: the center has color-degree 100 in every color, each leaf has 1.
    G = Graph.from_edges(101, [(0, v) for v in range(1, 101)])
    L = ListAssignment.uniform(101, range(1, 451))
    p = RoundParams(d=100, ell=450, eta=0.1)
    assert p.keep == pytest.approx(0.978020, abs=1e-6)

    sampled = list(range(0, 100, 10))
    sizes = {v: [] for v in sampled}
    for seed in range(10_000):
        list_sizes = run_round(G, L, p, seed).trace.list_sizes
        for v in sampled:
            if v in list_sizes:
                sizes[v].append(list_sizes[v])

    for v, samples in sizes.items():
        samples = np.asarray(samples, dtype=np.float64)
        se = samples.std(ddof=1) / math.sqrt(samples.size)
        assert abs(samples.mean() - 450 * p.keep) <= 3 * se, (v, samples.mean(), se)


def test_vectorized_flips_match_eq_value():
    G = Graph.from_networkx(nx.gnp_random_graph(30, 0.3, seed=8))
    L = uniform_lists(30, 10, 6, seed=8)
    p = RoundParams(d=max_color_degree(G, L), ell=6, eta=0.3)

    fired = 0
    for seed in range(50):
        result = run_round(G, L, p, seed)
        for v, c in result.trace.fired:
            assert v not in result.coloring.domain
            assert eq_value(p, color_degree(G, L, v, c)) < 1.0
        fired += len(result.trace.fired)
    assert fired > 0

    # A vertex whose color-degree is d in every color never loses a color to a flip.
    star = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)])
    full = ListAssignment.uniform(4, [1, 2])
    for seed in range(20):
        assert all(v != 0 for v, _ in run_round(star, full, RoundParams(d=3, ell=2, eta=0.5), seed).trace.fired)


def test_round_contract():
    G = Graph.from_networkx(nx.gnp_random_graph(40, 0.2, seed=2))
    L = uniform_lists(40, 10, 6, seed=2)
    p = RoundParams(d=max_color_degree(G, L), ell=6, eta=0.4)

    for seed in range(20):
        result = run_round(G, L, p, seed)
        phi = result.coloring
        assert is_proper(G, phi, L)
        assert sorted(result.vertices) == sorted(set(range(40)) - phi.domain)
        for i, v in enumerate(result.vertices):
            taken = {phi.get(u) for u in G.adjacency[v]} - {None}
            assert not set(result.lists.lists[i]) & taken
            assert set(result.lists.lists[i]) <= set(L.lists[v])
            assert result.trace.list_sizes[v] == result.lists.size(i)


def test_replay_round():
    G = Graph.from_networkx(nx.gnp_random_graph(30, 0.2, seed=6))
    L = uniform_lists(30, 8, 5, seed=6)
    p = RoundParams(d=max_color_degree(G, L), ell=5, eta=0.3)

    for seed in range(5):
        result = run_round(G, L, p, seed)
        replayed = replay_round(G, L, p, result.trace)
        assert replayed.coloring.assignment == result.coloring.assignment
        assert replayed.lists.lists == result.lists.lists
        assert str(replayed.graph) == str(result.graph)
        assert replayed.trace.list_sizes == result.trace.list_sizes


def test_wasteful_removal():
    G = Graph.from_networkx(nx.cycle_graph(5))
    L = ListAssignment.uniform(5, [1, 2, 3])
    p = RoundParams(d=2, ell=3, eta=0.5)

    wasted = False
    for seed in range(100):
        result = run_round(G, L, p, seed)
        fired = set(result.trace.fired)
        for i, v in enumerate(result.vertices):
            neighbor_colors = {result.coloring.get(u) for u in G.adjacency[v]}
            lost = set(L.lists[v]) - set(result.lists.lists[i])
            if any(c not in neighbor_colors and (v, c) not in fired for c in lost):
                wasted = True
    assert wasted, "A color must sometimes leave a list without any neighbor keeping it."
