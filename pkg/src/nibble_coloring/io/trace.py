from typing import List

from pydantic import BaseModel, Field, ValidationError

from nibble_coloring.coloring.wcp import OutcomeTrace
from nibble_coloring.errors import PreconditionError
from nibble_coloring.io.base import FileIOBase


class RoundRecord(BaseModel):
    """One accepted round of a nibble run.

    Attributes:
        round (int): 1-based round index.
        retries (int): Rejected attempts before this one.
        vertex_ids (List[int]): Original id of every vertex of the round's graph, in round-local order.
        trace (OutcomeTrace): The accepted outcome, in round-local ids.
        colored (int): Vertices colored in this round.
        remaining (int): Vertices left uncolored.
        min_list (int): Minimum surviving list size.
        max_color_degree (int): Maximum color-degree of the surviving pair.
    """

    round: int = Field(ge=1)
    retries: int = Field(default=0, ge=0)
    vertex_ids: List[int] = Field(default_factory=list)
    trace: OutcomeTrace
    colored: int = 0
    remaining: int = 0
    min_list: int = 0
    max_color_degree: int = 0


class TraceLog(FileIOBase):
    """JSONL log of round records, one per line."""

    records: List[RoundRecord] = Field(default_factory=list)

    @classmethod
    def from_string(cls, text: str) -> "TraceLog":
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(RoundRecord.model_validate_json(line))
            except ValidationError as err:
                raise PreconditionError(f"trace line {lineno}: {err.errors()[0]['msg']}") from err
        return cls(records=records)

    def __str__(self) -> str:
        return "".join(record.model_dump_json() + "\n" for record in self.records)

    def append(self, record: RoundRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)
