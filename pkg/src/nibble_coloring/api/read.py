import os
from typing import Dict, Type

import fsspec
from pydantic_core import from_json

from nibble_coloring.coloring.nibble import NibbleSchedule, RunReport
from nibble_coloring.coloring.partition import PartitionSchedule
from nibble_coloring.config import NibbleConfig
from nibble_coloring.errors import PreconditionError
from nibble_coloring.graph.core import Graph, ListAssignment, PartialColoring
from nibble_coloring.graph.generators import GenSpec
from nibble_coloring.io.base import PATH_TYPE, FileIOBase, read_generic
from nibble_coloring.io.trace import TraceLog
from nibble_coloring.lab.corpus import WitnessCorpus

READER: Dict[str, Type[FileIOBase]] = {
    "graph": Graph,
    "lists": ListAssignment,
    "coloring": PartialColoring,
    "trace": TraceLog,
    "spec": GenSpec,
    "config": NibbleConfig,
    "corpus": WitnessCorpus,
    "schedule": NibbleSchedule,
    "partition_schedule": PartitionSchedule,
    "report": RunReport,
}

INFER_READER = {
    ".el": "graph",
    ".txt": "graph",
    ".jsonl": "trace",
}

# Top-level JSON key -> reader, checked in order; anything else is read as a config.
INFER_JSON_READER = {
    "lists": "lists",
    "coloring": "coloring",
    "family": "spec",
    "structures": "corpus",
    "zeta": "partition_schedule",
    "kappa": "schedule",
    "mode": "report",
}


def _infer_json_reader(path: str) -> str:
    with fsspec.open(path, "r") as file:
        try:
            data = from_json(file.read())
        except ValueError as err:
            raise PreconditionError(f"{path}: malformed JSON: {err}") from err
    if not isinstance(data, dict):
        raise PreconditionError(f"{path}: expected a JSON object at the top level")
    return next((reader for key, reader in INFER_JSON_READER.items() if key in data), "config")


def read_graph(path: PATH_TYPE) -> Graph:
    """Read a graph from an edge list: a header line `n m`, then one `u v` line per edge.

    Args:
        path: Local path or fsspec URL of the edge list.

    Returns:
        Graph: The graph.
    """
    return read_generic(path, Graph)


def read_lists(path: PATH_TYPE) -> ListAssignment:
    return read_generic(path, ListAssignment)


def read_coloring(path: PATH_TYPE) -> PartialColoring:
    return read_generic(path, PartialColoring)


def read(path: PATH_TYPE, reader: str = None) -> FileIOBase:
    """Read any file the package writes.

    Args:
        path: Local path or fsspec URL.
        reader: One of the keys of `READER`. If None, the reader is inferred from the extension (`.el`, `.txt`,
        `.jsonl`) or, for JSON, from the top-level keys.

    Returns:
        FileIOBase: The loaded model.
    """
    if reader is None:
        path_str = path.decode() if isinstance(path, bytes) else str(path)
        _, ext = os.path.splitext(path_str)
        reader = INFER_READER.get(ext) or _infer_json_reader(path_str)
    if reader not in READER:
        raise PreconditionError(f"unknown reader {reader!r}, expected one of {sorted(READER)}")
    return read_generic(path, READER[reader])
