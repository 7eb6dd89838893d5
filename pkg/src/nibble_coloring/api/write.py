from typing import Dict, Type

from nibble_coloring.coloring.nibble import NibbleSchedule, RunReport
from nibble_coloring.coloring.partition import PartitionSchedule
from nibble_coloring.config import NibbleConfig
from nibble_coloring.errors import PreconditionError
from nibble_coloring.graph.core import Graph, ListAssignment, PartialColoring
from nibble_coloring.graph.generators import GenSpec
from nibble_coloring.io.base import PATH_TYPE, FileIOBase, write_generic
from nibble_coloring.io.trace import TraceLog
from nibble_coloring.lab.corpus import WitnessCorpus


def write_graph(graph: Graph, path: PATH_TYPE) -> None:
    """Write a graph as an edge list, edges in lexicographic order.

    Args:
        graph: The graph to write.
        path: Local path or fsspec URL to write to.
    """
    write_generic(path, graph)


def write_json(data: FileIOBase, path: PATH_TYPE) -> None:
    write_generic(path, data)


def write_trace(trace: TraceLog, path: PATH_TYPE) -> None:
    write_generic(path, trace)


WRITER = {
    "graph": write_graph,
    "json": write_json,
    "trace": write_trace,
}

INFER_WRITER: Dict[Type[FileIOBase], str] = {
    Graph: "graph",
    ListAssignment: "json",
    PartialColoring: "json",
    GenSpec: "json",
    NibbleConfig: "json",
    NibbleSchedule: "json",
    PartitionSchedule: "json",
    RunReport: "json",
    WitnessCorpus: "json",
    TraceLog: "trace",
}


def write(data: FileIOBase, path: PATH_TYPE, writer: str = None) -> None:
    """Write any model the package reads back.

    Args:
        data: The object to write.
        path: Local path or fsspec URL to write to.
        writer: One of "graph", "json" or "trace". If None, the writer is inferred from the object type.
    """
    if writer is None:
        if type(data) not in INFER_WRITER:
            raise PreconditionError(f"no writer for {type(data).__name__}")
        writer = INFER_WRITER[type(data)]
    WRITER[writer](data, path)
