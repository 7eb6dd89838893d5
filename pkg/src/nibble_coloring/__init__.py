__version__ = "0.1.0"

from nibble_coloring.api.read import read
from nibble_coloring.api.write import write

__all__ = [
    "read",
    "write",
]
