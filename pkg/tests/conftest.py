from pathlib import Path
from typing import Tuple

import networkx as nx
import pytest
from nibble_coloring.config import NibbleConfig
from nibble_coloring.graph.core import Graph, ListAssignment, PartialColoring
from nibble_coloring.graph.generators import GenSpec

DATA = Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="Run acceptance-scale tests.")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# Graphs
@pytest.fixture
def c5_graph_file() -> Tuple[Path, Graph]:
    res = Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
    return DATA / "C5.el", res


@pytest.fixture
def petersen_graph_file() -> Tuple[Path, Graph]:
    res = Graph.from_networkx(nx.petersen_graph())
    return DATA / "petersen.el", res


# Lists and colorings
@pytest.fixture
def c5_lists_file() -> Tuple[Path, ListAssignment]:
    res = ListAssignment.uniform(5, [1, 2, 3])
    return DATA / "C5_lists.json", res


@pytest.fixture
def petersen_lists_file() -> Tuple[Path, ListAssignment]:
    res = ListAssignment.uniform(10, range(1, 5))
    return DATA / "petersen_lists.json", res


@pytest.fixture
def c5_coloring_file() -> Tuple[Path, PartialColoring]:
    res = PartialColoring(assignment={0: 1, 1: 2, 2: 1, 3: 2, 4: 3})
    return DATA / "C5_coloring.json", res


@pytest.fixture
def c5_bad_coloring_file() -> Tuple[Path, PartialColoring]:
    res = PartialColoring(assignment={0: 1, 1: 1, 2: 2, 3: 1, 4: 3})
    return DATA / "C5_bad_coloring.json", res


# Specs and configs
@pytest.fixture
def petersen_spec_file() -> Tuple[Path, GenSpec]:
    res = GenSpec(family="fixture", fixture="Petersen", seed=7, palette=4, list_size=4)
    return DATA / "petersen_spec.json", res


@pytest.fixture
def config_file() -> Tuple[Path, NibbleConfig]:
    res = NibbleConfig(eps=0.1, eta=0.2, max_retries_per_round=50, finisher_max_iterations=50)
    return DATA / "config.json", res


@pytest.fixture
def star() -> Tuple[Graph, ListAssignment]:
    """K_{1,3} with center 0 and every list {1}."""
    return Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)]), ListAssignment.uniform(4, [1])
