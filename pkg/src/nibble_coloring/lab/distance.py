"""Convex distance between an outcome and a set of outcomes, and Talagrand's inequality on enumerable spaces.

dist(x, A) is the supremum over nonzero directions a of min_{y ∈ A} Σ_{x_i ≠ y_i} a_i / ‖a‖. By minimax duality it
equals the norm of the minimum-norm point of the convex hull of the disagreement vectors χ(x, y) = 1[x_i ≠ y_i],
which is computed here with Wolfe's algorithm.
"""

import logging
import math
from typing import List, Optional, Sequence

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict

from nibble_coloring.errors import PreconditionError, SizeLimitError
from nibble_coloring.lab.space import ProductSpace
from nibble_coloring.util.rng import make_rng

logger = logging.getLogger(__name__)

MAX_TRIALS = 24
MAX_WOLFE_ITERATIONS = 10_000
MAX_SUBSET_TRIALS = 12
EPS = 1e-12


class MinNormPoint(BaseModel):
    """Minimum-norm point of conv(P) with its convex weights over the rows of P."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    point: np.ndarray
    weights: np.ndarray
    iterations: int

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.point))


def _affine_minimizer(C: np.ndarray) -> np.ndarray:
    """Weights α with Σα = 1 minimizing ‖Cᵀα‖ over the affine hull of the rows of C."""
    k = C.shape[0]
    system = np.zeros((k + 1, k + 1))
    system[:k, :k] = C @ C.T
    system[:k, k] = 1
    system[k, :k] = 1
    rhs = np.zeros(k + 1)
    rhs[k] = 1
    solution, *_ = scipy.linalg.lstsq(system, rhs)
    return solution[:k]


def min_norm_point(P: np.ndarray, tol: float = 1e-12) -> MinNormPoint:
    """Wolfe's algorithm for the point of minimum Euclidean norm in the convex hull of the rows of P."""
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] == 0:
        raise PreconditionError("need at least one point")
    start = int(np.argmin(np.einsum("ij,ij->i", P, P)))
    support: List[int] = [start]
    weights = np.array([1.0])
    x = P[start].copy()

    iterations = 0
    while iterations < MAX_WOLFE_ITERATIONS:
        iterations += 1
        products = P @ x
        j = int(np.argmin(products))
        if x @ x - products[j] <= tol * max(1.0, x @ x) or j in support:
            break
        support.append(j)
        weights = np.append(weights, 0.0)

        while True:
            C = P[support]
            alpha = _affine_minimizer(C)
            if np.all(alpha > EPS):
                weights = alpha
                break
            falling = alpha <= EPS
            gap = weights[falling] - alpha[falling]
            theta = float(np.min(np.where(gap > 0, weights[falling] / np.where(gap > 0, gap, 1.0), 1.0)))
            weights = theta * alpha + (1 - theta) * weights
            weights[weights <= EPS] = 0.0
            keep = weights > 0
            if keep.all():
                keep[int(np.argmin(weights))] = False
            support = [s for s, k in zip(support, keep) if k]
            weights = weights[keep]
            weights /= weights.sum()
        x = P[support].T @ weights
    else:
        logger.warning("Minimum-norm point did not converge in %d iterations", MAX_WOLFE_ITERATIONS)

    full = np.zeros(P.shape[0])
    full[support] = weights
    return MinNormPoint(point=x, weights=full, iterations=iterations)


def _as_outcomes(A: Sequence[Sequence[int]], m: int) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=np.int64))
    if A.size == 0:
        raise PreconditionError("the outcome set must be nonempty")
    if A.shape[1] != m:
        raise PreconditionError(f"outcomes have {A.shape[1]} trials, expected {m}")
    return A


def disagreement_vectors(x: Sequence[int], A: Sequence[Sequence[int]]) -> np.ndarray:
    """χ(x, y) = 1[x_i ≠ y_i] for every y ∈ A, deduplicated and pruned to the minimal ones.

    A vector that dominates another coordinatewise never attains min_y a·χ(x, y) for a ≥ 0, so dropping it leaves
    the distance unchanged.
    """
    x = np.asarray(x, dtype=np.int64)
    bits = np.int64(1) << np.arange(x.size, dtype=np.int64)
    codes = np.unique((_as_outcomes(A, x.size) != x).astype(np.int64) @ bits)
    subset = (codes[None, :] & ~codes[:, None]) == 0
    np.fill_diagonal(subset, False)
    minimal = codes[~subset.any(axis=1)]
    return ((minimal[:, None] & bits[None, :]) != 0).astype(float)


def a_hamming_distance(x: Sequence[int], y: Sequence[int], a: Sequence[float]) -> float:
    """Σ_{x_i ≠ y_i} a_i / ‖a‖."""
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a)
    if norm == 0:
        raise PreconditionError("direction must be nonzero")
    return float(a[np.asarray(x) != np.asarray(y)].sum() / norm)


def directional_distance(x: Sequence[int], A: Sequence[Sequence[int]], a: Sequence[float]) -> float:
    """dist_a(x, A) = min_{y ∈ A} of the a-Hamming distance."""
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a)
    if norm == 0:
        raise PreconditionError("direction must be nonzero")
    chi = _as_outcomes(A, a.size) != np.asarray(x)
    return float((chi @ a).min() / norm)


def convex_distance(x: Sequence[int], A: Sequence[Sequence[int]], tol: float = 1e-12) -> float:
    """dist(x, A) as the norm of the minimum-norm point of conv{χ(x, y) : y ∈ A}."""
    x = np.asarray(x, dtype=np.int64)
    if x.size > MAX_TRIALS:
        raise SizeLimitError(f"convex distance is capped at m={MAX_TRIALS} trials, got {x.size}")
    chi = disagreement_vectors(x, A)
    if not chi.any(axis=1).all():
        return 0.0
    return min_norm_point(chi, tol).norm


def set_distance(A: Sequence[Sequence[int]], B: Sequence[Sequence[int]]) -> float:
    """dist(A, B) = min_{y ∈ B} dist(y, A)."""
    return min(convex_distance(y, A) for y in np.atleast_2d(np.asarray(B, dtype=np.int64)))


class DirectionEstimate(BaseModel):
    """dist(x, A) from below by explicit directions, against the value of the minimum-norm-point direction.

    Attributes:
        sampled (float): Best dist_a(x, A) over the sampled directions. Never uses the minimum-norm point.
        direction (List[float]): Sampled direction attaining `sampled`.
        dual (float): dist_a(x, A) at the minimum-norm point, which equals dist(x, A).
    """

    sampled: float
    direction: List[float]
    dual: float

    @property
    def gap(self) -> float:
        return self.dual - self.sampled


def _subset_directions(m: int) -> np.ndarray:
    """Indicator vector of every nonempty subset of the m trials."""
    masks = np.arange(1, 1 << m)
    return ((masks[:, None] >> np.arange(m)) & 1).astype(float)


def sup_direction_estimate(x: Sequence[int], A: Sequence[Sequence[int]], samples: int, seed: int) -> DirectionEstimate:
    """Best dist_a(x, A) over subset indicators (coordinate vectors only above `MAX_SUBSET_TRIALS` trials) and
    `samples` random nonnegative directions, next to the value at the minimum-norm point.

    Every sampled value is a lower bound on dist(x, A), so `gap` must be nonnegative up to rounding.
    """
    x = np.asarray(x, dtype=np.int64)
    chi = (_as_outcomes(A, x.size) != x).astype(float)
    rng = make_rng(seed)
    structured = _subset_directions(x.size) if x.size <= MAX_SUBSET_TRIALS else np.eye(x.size)
    candidates = np.vstack([structured, np.abs(rng.normal(size=(samples, x.size)))])
    norms = np.linalg.norm(candidates, axis=1)
    values = (chi @ candidates.T).min(axis=0) / np.where(norms > 0, norms, 1.0)
    best = int(np.argmax(values))

    dual = 0.0
    if chi.any(axis=1).all():
        z = min_norm_point(disagreement_vectors(x, A)).point
        if np.linalg.norm(z) > 0:
            dual = float((chi @ z).min() / np.linalg.norm(z))
    return DirectionEstimate(sampled=float(values[best]), direction=candidates[best].tolist(), dual=dual)


class TalagrandReport(BaseModel):
    """Pr(A)·Pr(B) against exp(-dist(A, B)²/4)."""

    pr_a: float
    pr_b: float
    distance: float
    bound: float

    @property
    def product(self) -> float:
        return self.pr_a * self.pr_b

    @property
    def holds(self) -> bool:
        return self.product < self.bound


def event_probability(space: ProductSpace, event: Sequence[Sequence[int]]) -> float:
    outcomes = _as_outcomes(event, space.m)
    indices = np.unique(space.index_of(outcomes))
    return float(math.fsum(space.weights()[indices]))


def verify_talagrand(
    space: ProductSpace,
    A: Sequence[Sequence[int]],
    B: Sequence[Sequence[int]],
    distance: Optional[float] = None,
) -> TalagrandReport:
    """Check Pr(A)·Pr(B) < exp(-dist(A, B)²/4). Failures are reported, not raised."""
    if space.m > MAX_TRIALS:
        raise SizeLimitError(f"convex distance is capped at m={MAX_TRIALS} trials, got {space.m}")
    space.check_enumerable()
    d = set_distance(A, B) if distance is None else distance
    report = TalagrandReport(
        pr_a=event_probability(space, A),
        pr_b=event_probability(space, B),
        distance=d,
        bound=math.exp(-(d**2) / 4),
    )
    if not report.holds:
        logger.warning("Pr(A)Pr(B) = %.6g is not below exp(-dist²/4) = %.6g", report.product, report.bound)
    return report
