"""Finite product spaces and witness structures over them, enumerated exhaustively."""

import logging
from fractions import Fraction
from typing import Callable, Iterable, List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator

from nibble_coloring.errors import PreconditionError, SizeLimitError

logger = logging.getLogger(__name__)

# Largest number of outcomes enumerated exactly.
MAX_OUTCOMES = 1 << 24
PROBABILITY_TOLERANCE = 1e-12
# Rows of the outcome-by-outcome disagreement table built at once.
CHUNK = 1024


class ProductSpace(BaseModel):
    """Independent trials X_1..X_m, trial j taking values 0..k_j-1 with the given probabilities.

    Outcomes are enumerated in lexicographic order, trial 0 most significant; outcome indices refer to that order.
    """

    probabilities: List[List[float]] = Field(min_length=1)

    @field_validator("probabilities")
    @classmethod
    def _check_probabilities(cls, value: List[List[float]]) -> List[List[float]]:
        for j, probs in enumerate(value):
            if not probs:
                raise ValueError(f"trial {j} has no outcomes")
            if any(p < 0 for p in probs):
                raise ValueError(f"trial {j} has a negative probability")
            if abs(sum(probs) - 1) > PROBABILITY_TOLERANCE:
                raise ValueError(f"probabilities of trial {j} sum to {sum(probs)}, not 1")
        return value

    @classmethod
    def fair_coins(cls, m: int) -> "ProductSpace":
        return cls(probabilities=[[0.5, 0.5] for _ in range(m)])

    @classmethod
    def biased_coins(cls, ps: Iterable[float]) -> "ProductSpace":
        """Coins with Pr(X_j = 1) = ps[j]."""
        return cls(probabilities=[[1 - p, p] for p in ps])

    @property
    def m(self) -> int:
        return len(self.probabilities)

    @property
    def sizes(self) -> List[int]:
        return [len(probs) for probs in self.probabilities]

    @property
    def outcome_count(self) -> int:
        return int(np.prod(self.sizes, dtype=object))

    def check_enumerable(self) -> None:
        if self.outcome_count > MAX_OUTCOMES:
            raise SizeLimitError(f"{self.outcome_count} outcomes exceed the enumeration cap of {MAX_OUTCOMES}")

    def outcomes(self) -> np.ndarray:
        """All outcomes as an (N, m) array, in index order."""
        self.check_enumerable()
        index = np.arange(self.outcome_count)
        return np.stack(np.unravel_index(index, self.sizes), axis=1).astype(np.int64)

    def weights(self) -> np.ndarray:
        """Probability of every outcome, in index order."""
        self.check_enumerable()
        w = np.ones(1)
        for probs in self.probabilities:
            w = np.multiply.outer(w, np.asarray(probs, dtype=float)).ravel()
        return w

    def exact_weights(self) -> List[Fraction]:
        """Probabilities as exact rationals. Floats are dyadic, so the conversion is exact."""
        self.check_enumerable()
        w = [Fraction(1)]
        for probs in self.probabilities:
            factors = [Fraction(p) for p in probs]
            w = [a * b for a in w for b in factors]
        return w

    def index_of(self, outcomes: np.ndarray) -> np.ndarray:
        """Outcome indices of the rows of an (k, m) array."""
        outcomes = np.atleast_2d(outcomes)
        return np.ravel_multi_index(tuple(outcomes.T), self.sizes)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """`count` independent outcomes as a (count, m) array, drawn trial by trial."""
        columns = [rng.choice(len(probs), size=count, p=probs) for probs in self.probabilities]
        return np.stack(columns, axis=1).astype(np.int64)


def witness_masks(witnesses: List[List[List[int]]]) -> np.ndarray:
    """Bitmask of every witness set, as an (N, n) int64 array."""
    masks = np.zeros((len(witnesses), len(witnesses[0]) if witnesses else 0), dtype=np.int64)
    for x, row in enumerate(witnesses):
        for i, trials in enumerate(row):
            for j in trials:
                masks[x, i] |= 1 << j
    return masks


def _popcount(values: np.ndarray) -> np.ndarray:
    counts = np.zeros(values.shape, dtype=np.int64)
    values = values.copy()
    while values.any():
        counts += values & 1
        values >>= 1
    return counts


class WitnessStructure(BaseModel):
    """Indicators R_1..R_n on a product space, with witness sets and an exceptional outcome set.

    Every function is tabulated over the outcomes in index order.

    Attributes:
        n (int): Number of indicators.
        beta (float): Claimed bound on how many witness sets a trial belongs to.
        D (float): Claimed bound on Σ|W_i(x)|.
        indicators (List[List[int]]): R_i(x) for every outcome x, as 0/1.
        witnesses (List[List[List[int]]]): W_i(x) for every outcome x, as sorted trial indices.
        exceptional (List[int]): Indices of the exceptional outcomes Ω*.
    """

    n: int = Field(ge=1)
    beta: float = Field(gt=0)
    D: float = Field(gt=0)
    indicators: List[List[int]]
    witnesses: List[List[List[int]]]
    exceptional: List[int] = Field(default_factory=list)

    @classmethod
    def from_functions(
        cls,
        space: ProductSpace,
        n: int,
        indicator: Callable[[np.ndarray, int], int],
        witness: Callable[[np.ndarray, int], Iterable[int]],
        exceptional: Optional[Callable[[np.ndarray], bool]] = None,
        beta: float = 1.0,
        D: float = 1.0,
    ) -> "WitnessStructure":
        """Tabulate indicator(x, i), witness(x, i) and exceptional(x) over every outcome of `space`."""
        outcomes = space.outcomes()
        return cls(
            n=n,
            beta=beta,
            D=D,
            indicators=[[int(indicator(x, i)) for i in range(n)] for x in outcomes],
            witnesses=[[sorted(witness(x, i)) for i in range(n)] for x in outcomes],
            exceptional=[k for k, x in enumerate(outcomes) if exceptional is not None and exceptional(x)],
        )

    def indicator_matrix(self) -> np.ndarray:
        return np.asarray(self.indicators, dtype=np.int64).reshape(len(self.indicators), self.n)

    def values(self) -> np.ndarray:
        """R(x) = Σ_i R_i(x) for every outcome."""
        return self.indicator_matrix().sum(axis=1)

    def exceptional_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.indicators), dtype=bool)
        mask[self.exceptional] = True
        return mask

    def check_shape(self, space: ProductSpace) -> None:
        N = space.outcome_count
        if len(self.indicators) != N or len(self.witnesses) != N:
            raise PreconditionError(f"structure tabulates {len(self.indicators)} outcomes, space has {N}")
        if any(len(row) != self.n for row in self.indicators) or any(len(row) != self.n for row in self.witnesses):
            raise PreconditionError(f"every outcome needs {self.n} indicator values and witness sets")
        if any(not 0 <= k < N for k in self.exceptional):
            raise PreconditionError("exceptional outcome index out of range")
        if any(not 0 <= j < space.m for row in self.witnesses for trials in row for j in trials):
            raise PreconditionError(f"witness trial index out of range for m={space.m}")


class StructureCheck(BaseModel):
    """Outcome of `verify_structure`: one message per failed property, empty when all hold."""

    failures: List[str] = Field(default_factory=list)
    max_witness_load: int = 0
    max_witness_total: int = 0

    @property
    def ok(self) -> bool:
        return not self.failures


def _disagreements(outcomes: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Bitmask of the trials where outcome rows[a] and outcome cols[b] differ, as a (len(rows), len(cols)) array."""
    result = np.zeros((rows.size, cols.size), dtype=np.int64)
    for j in range(outcomes.shape[1]):
        result |= (outcomes[rows, j][:, None] != outcomes[cols, j][None, :]).astype(np.int64) << j
    return result


def verify_structure(space: ProductSpace, structure: WitnessStructure, limit: int = 10) -> StructureCheck:
    """Check on every non-exceptional outcome x:

    - W_i(x) = ∅ whenever R_i(x) = 0;
    - every non-exceptional y agreeing with x on W_i(x) has R_i(y) = 1;
    - every trial lies in at most β witness sets;
    - Σ_i |W_i(x)| ≤ D.

    At most `limit` failures are listed per property.
    """
    structure.check_shape(space)
    outcomes = space.outcomes()
    R = structure.indicator_matrix()
    masks = witness_masks(structure.witnesses)
    normal = ~structure.exceptional_mask()
    check = StructureCheck()

    empty_failures = np.argwhere((R == 0) & (masks != 0) & normal[:, None])
    for x, i in empty_failures[:limit].tolist():
        check.failures.append(f"W_{i}(x) is nonempty at outcome {x} where R_{i} = 0")

    witness_failures = 0
    for i in range(structure.n):
        holders = np.flatnonzero(normal & (R[:, i] == 1))
        breakers = np.flatnonzero(normal & (R[:, i] == 0))
        if holders.size == 0 or breakers.size == 0:
            continue
        for start in range(0, holders.size, CHUNK):
            rows = holders[start : start + CHUNK]
            agree = (_disagreements(outcomes, rows, breakers) & masks[rows, i][:, None]) == 0
            bad = np.argwhere(agree)
            for a, b in bad[: max(limit - witness_failures, 0)].tolist():
                check.failures.append(f"outcome {breakers[b]} agrees with outcome {rows[a]} on W_{i} but has R_{i} = 0")
            witness_failures += len(bad)

    loads = np.zeros((len(masks), space.m), dtype=np.int64)
    for j in range(space.m):
        loads[:, j] = ((masks >> j) & 1).sum(axis=1)
    loads[~normal] = 0
    totals = _popcount(masks).sum(axis=1)
    totals[~normal] = 0
    check.max_witness_load = int(loads.max(initial=0))
    check.max_witness_total = int(totals.max(initial=0))
    if check.max_witness_load > structure.beta:
        check.failures.append(f"a trial is a witness of {check.max_witness_load} indicators, above β={structure.beta}")
    if check.max_witness_total > structure.D:
        check.failures.append(f"Σ|W_i(x)| reaches {check.max_witness_total}, above D={structure.D}")
    for failure in check.failures:
        logger.debug("Witness structure check failed: %s", failure)
    return check
