import logging
import math
from itertools import combinations
from typing import List

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import binom

from nibble_coloring.errors import PreconditionError, SizeLimitError

logger = logging.getLogger(__name__)

# Largest m·n enumerated by the exhaustive bipartite search.
MAX_KST_CELLS = 16


def chernoff_bound(mu: float, delta: float) -> float:
    """Upper tail bound exp(-δ²μ/(2+δ)) on Pr(Y > (1+δ)μ)."""
    if mu <= 0 or delta <= 0:
        raise PreconditionError(f"mu and delta must be positive, got mu={mu}, delta={delta}")
    return math.exp(-(delta**2) * mu / (2 + delta))


def lll_ok(p: float, d_lll: float) -> bool:
    """Symmetric local lemma condition 4·p·d_LLL ≤ 1."""
    return 4 * p * d_lll <= 1


def kst_bound(m: int, n: int, s: int, t: int) -> float:
    """(t-1)^(1/s)·n·m^(1-1/s) + (s-1)·m, a strict upper bound on the edges of a K_{s,t}-free bipartite graph."""
    if min(m, n, s, t) < 1:
        raise PreconditionError(f"m, n, s, t must be at least 1, got {(m, n, s, t)}")
    return (t - 1) ** (1 / s) * n * m ** (1 - 1 / s) + (s - 1) * m


class ChernoffCheck(BaseModel):
    n: int
    p: float
    delta: float
    exact: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.exact <= self.bound


def chernoff_tail_check(n: int, p: float, delta: float) -> ChernoffCheck:
    """Exact binomial tail Pr(Y > (1+δ)np) against the Chernoff bound."""
    mu = n * p
    threshold = math.floor((1 + delta) * mu)
    exact = float(binom.sf(threshold, n, p))
    return ChernoffCheck(n=n, p=p, delta=delta, exact=exact, bound=chernoff_bound(mu, delta))


class KstCase(BaseModel):
    """Extremal edge count of K_{s,t}-free bipartite graphs with parts of sizes m (side of X) and n (side of Y)."""

    m: int
    n: int
    s: int
    t: int
    graphs: int
    max_free_edges: int
    bound: float

    @property
    def holds(self) -> bool:
        return self.max_free_edges < self.bound


class KstReport(BaseModel):
    cases: List[KstCase] = Field(default_factory=list)

    @property
    def violations(self) -> List[KstCase]:
        return [case for case in self.cases if not case.holds]


def _popcount_table(bits: int) -> np.ndarray:
    table = np.zeros(1 << bits, dtype=np.int64)
    for i in range(1, 1 << bits):
        table[i] = table[i >> 1] + (i & 1)
    return table


def max_kst_free_edges(m: int, n: int, s: int, t: int) -> KstCase:
    """Exhaustive search over all 2^(mn) bipartite graphs between A (size m) and B (size n).

    A graph contains a K_{s,t} iff some t rows of A have at least s common neighbors in B.
    """
    if m * n > MAX_KST_CELLS:
        raise SizeLimitError(f"2^{m * n} bipartite graphs exceed the 2^{MAX_KST_CELLS} enumeration cap")
    popcount = _popcount_table(n)
    codes = np.arange(1 << (m * n), dtype=np.int64)
    rows = np.stack([(codes >> (n * a)) & ((1 << n) - 1) for a in range(m)], axis=1)
    edges = popcount[rows].sum(axis=1)

    free = np.ones(codes.size, dtype=bool)
    for subset in combinations(range(m), t):
        common = np.bitwise_and.reduce(rows[:, list(subset)], axis=1)
        free &= popcount[common] < s
    return KstCase(
        m=m,
        n=n,
        s=s,
        t=t,
        graphs=int(codes.size),
        max_free_edges=int(edges[free].max()) if free.any() else 0,
        bound=kst_bound(m, n, s, t),
    )


def verify_kst(m_max: int = 4, n_max: int = 4, s_max: int = 4, t_max: int = 4) -> KstReport:
    """Check the bound for every 1 ≤ m ≤ m_max, 1 ≤ n ≤ n_max and 2 ≤ s ≤ s_max, 2 ≤ t ≤ t_max."""
    report = KstReport()
    for m in range(1, m_max + 1):
        for n in range(1, n_max + 1):
            for s in range(2, s_max + 1):
                for t in range(2, t_max + 1):
                    report.cases.append(max_kst_free_edges(m, n, s, t))
    if report.violations:
        logger.error("KST bound violated in %d cases", len(report.violations))
    return report
