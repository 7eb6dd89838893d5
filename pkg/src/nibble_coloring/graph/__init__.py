from nibble_coloring.graph.core import Graph, ListAssignment, PartialColoring
from nibble_coloring.graph.generators import GenSpec, generate, uniform_lists

__all__ = [
    "Graph",
    "ListAssignment",
    "PartialColoring",
    "GenSpec",
    "generate",
    "uniform_lists",
]
