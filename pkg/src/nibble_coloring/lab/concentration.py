"""Concentration of sums of witnessed indicators, allowing a set of exceptional outcomes.

For indicators R_1..R_n on a product space, with witness sets bounded by β (per trial) and D (in total) on the
non-exceptional outcomes and Pr(Ω*) ≤ 1/6, the sum R satisfies

    Pr(|R - E[R]| ≥ τ) < 6·exp(-τ²/(24βD)) + Pr(Ω*)    for τ ≥ 12·√(πβD) + 2·Pr(Ω*)·sup_{Ω*} R.

Everything here evaluates both sides exactly on enumerable spaces.
"""

import logging
import math
from fractions import Fraction
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from nibble_coloring.errors import PreconditionError, StructureError
from nibble_coloring.lab.space import ProductSpace, WitnessStructure, verify_structure
from nibble_coloring.util.rng import make_rng

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
MAX_EXCEPTIONAL_PROBABILITY = 1 / 6


def mahdian_exceptional_bound(beta: float, D: float, tau: float, pr_exceptional: float = 0.0) -> float:
    """6·exp(-τ²/(24βD)) + Pr(Ω*)."""
    if beta <= 0 or D <= 0:
        raise PreconditionError(f"β and D must be positive, got β={beta}, D={D}")
    return 6 * math.exp(-(tau**2) / (24 * beta * D)) + pr_exceptional


def tau_threshold(
    beta: float,
    D: float,
    pr_exceptional: float = 0.0,
    sup_exceptional: float = 0.0,
    include_exceptional_term: bool = True,
) -> float:
    """12·√(πβD) + 2·Pr(Ω*)·sup_{Ω*} R, the smallest τ the bound speaks about."""
    base = 12 * math.sqrt(math.pi * beta * D)
    return base + 2 * pr_exceptional * sup_exceptional if include_exceptional_term else base


def threshold_ok(
    tau: float,
    beta: float,
    D: float,
    pr_exceptional: float = 0.0,
    sup_exceptional: float = 0.0,
    include_exceptional_term: bool = True,
) -> bool:
    return tau >= tau_threshold(beta, D, pr_exceptional, sup_exceptional, include_exceptional_term)


class _Tails:
    """Deviation |R(x) - E[R]| of every outcome, ready for repeated tail queries."""

    def __init__(self, space: ProductSpace, structure: WitnessStructure, exact: bool = False):
        structure.check_shape(space)
        self.values = structure.values()
        self.exact = exact
        if exact:
            self.weights = space.exact_weights()
            if sum(self.weights) != 1:
                raise PreconditionError(f"outcome probabilities sum to {sum(self.weights)}, not 1")
            self.mean = sum(w * int(r) for w, r in zip(self.weights, self.values))
            self.deviation = [abs(int(r) - self.mean) for r in self.values]
        else:
            self.weights = space.weights()
            mass = math.fsum(self.weights)
            if abs(mass - 1) > 1e-12:
                raise PreconditionError(f"outcome probabilities sum to {mass}, not 1")
            self.mean = float(self.weights @ self.values)
            self.deviation = np.abs(self.values - self.mean)

    def tail(self, tau: float) -> Union[float, Fraction]:
        if self.exact:
            threshold = Fraction(tau)
            return sum((w for w, dev in zip(self.weights, self.deviation) if dev >= threshold), Fraction(0))
        return float(min(1.0, math.fsum(self.weights[self.deviation >= tau - TOLERANCE])))


def exact_tail(space: ProductSpace, structure: WitnessStructure, tau: float, exact: bool = False) -> Union[float, Fraction]:
    """Pr(|R - E[R]| ≥ τ) by enumerating every outcome.

    Args:
        space: Enumerable product space.
        structure: Indicators tabulated over `space`.
        tau: Deviation.
        exact: Use rational arithmetic and return a Fraction. Floating comparisons otherwise carry a 1e-9 tolerance.
    """
    return _Tails(space, structure, exact).tail(tau)


def exceptional_stats(space: ProductSpace, structure: WitnessStructure) -> Tuple[float, int]:
    """Pr(Ω*) and sup_{Ω*} R (0 when Ω* is empty)."""
    weights = space.weights()
    mask = structure.exceptional_mask()
    values = structure.values()
    return float(math.fsum(weights[mask])), int(values[mask].max(initial=0))


class TauCheck(BaseModel):
    tau: float
    in_regime: bool
    tail: Optional[float] = None
    bound: Optional[float] = None

    @property
    def holds(self) -> bool:
        return not self.in_regime or self.tail <= self.bound + 1e-12


class InequalityReport(BaseModel):
    """Exact tails against the bound over a grid of τ.

    Attributes:
        mean (float): E[R].
        pr_exceptional (float): Pr(Ω*).
        sup_exceptional (int): sup_{Ω*} R.
        threshold (float): Smallest in-regime τ.
        checks (List[TauCheck]): One entry per grid point; out-of-regime points carry no tail.
    """

    mean: float
    pr_exceptional: float
    sup_exceptional: int
    beta: float
    D: float
    threshold: float
    include_exceptional_term: bool = True
    checks: List[TauCheck] = Field(default_factory=list)

    @property
    def violations(self) -> List[TauCheck]:
        return [check for check in self.checks if not check.holds]

    @property
    def skipped(self) -> List[float]:
        return [check.tau for check in self.checks if not check.in_regime]


def verify_inequality(
    space: ProductSpace,
    structure: WitnessStructure,
    tau_grid: Iterable[float],
    include_exceptional_term: bool = True,
    exact: bool = False,
) -> InequalityReport:
    """Compare exact tails with the bound at every in-regime τ of the grid.

    Args:
        space: Enumerable product space.
        structure: Witness structure over `space`. Its properties are verified first.
        tau_grid: Deviations to check.
        include_exceptional_term: Keep the 2·Pr(Ω*)·sup R term in the threshold. Dropping it is only meant for
            demonstrating that the term is needed.
        exact: Compute tails with rational arithmetic.

    Returns:
        InequalityReport: Every grid point, with violations listed by `violations`.

    Raises:
        StructureError: When the witness properties fail or Pr(Ω*) > 1/6.
    """
    check = verify_structure(space, structure)
    if not check.ok:
        raise StructureError("witness structure fails its defining properties", check.failures)
    pr_exc, sup_exc = exceptional_stats(space, structure)
    if pr_exc > MAX_EXCEPTIONAL_PROBABILITY + TOLERANCE:
        raise StructureError(f"Pr(Ω*) = {pr_exc:.6g} exceeds 1/6", [f"Pr(Ω*) = {pr_exc}"])

    tails = _Tails(space, structure, exact)
    report = InequalityReport(
        mean=float(tails.mean),
        pr_exceptional=pr_exc,
        sup_exceptional=sup_exc,
        beta=structure.beta,
        D=structure.D,
        threshold=tau_threshold(structure.beta, structure.D, pr_exc, sup_exc, include_exceptional_term),
        include_exceptional_term=include_exceptional_term,
    )
    for tau in tau_grid:
        tau = float(tau)
        if tau < report.threshold:
            report.checks.append(TauCheck(tau=tau, in_regime=False))
            continue
        report.checks.append(
            TauCheck(
                tau=tau,
                in_regime=True,
                tail=float(tails.tail(tau)),
                bound=mahdian_exceptional_bound(structure.beta, structure.D, tau, pr_exc),
            ),
        )
    if report.violations and include_exceptional_term:
        logger.error("Concentration bound violated at τ = %s", [c.tau for c in report.violations])
    return report


class MonteCarloTail(BaseModel):
    tau: float
    samples: int
    estimate: float
    standard_error: float


def monte_carlo_tail(
    space: ProductSpace,
    structure: WitnessStructure,
    tau: float,
    samples: int,
    seed: int,
) -> MonteCarloTail:
    """Sampled estimate of Pr(|R - E[R]| ≥ τ), with E[R] taken exactly."""
    if samples < 2:
        raise PreconditionError(f"need at least 2 samples, got {samples}")
    tails = _Tails(space, structure)
    drawn = space.index_of(space.sample(samples, make_rng(seed)))
    hits = tails.deviation[drawn] >= tau - TOLERANCE
    p = float(hits.mean())
    return MonteCarloTail(tau=tau, samples=samples, estimate=p, standard_error=math.sqrt(p * (1 - p) / samples))


def adversarial_counter_instance(m: int = 4, n: int = 8, beta: float = 1e-3, D: float = 1e-3) -> Tuple[ProductSpace, WitnessStructure]:
    """Fair coins where R ≡ 0 off Ω* = {first three coins all 1} and R ≡ n on Ω*.

    Pr(Ω*) = 1/8 and no witness is ever needed, so any β, D > 0 qualify. With β·D small, τ just above 12·√(πβD)
    has Pr(|R - E[R]| ≥ τ) = 1 while the bound is about 1/8: the threshold is wrong without its 2·Pr(Ω*)·sup R term.
    """
    if m < 3:
        raise PreconditionError(f"need at least 3 coins, got m={m}")
    space = ProductSpace.fair_coins(m)
    return space, WitnessStructure.from_functions(
        space,
        n,
        indicator=lambda x, i: int(x[:3].all()),
        witness=lambda x, i: [],
        exceptional=lambda x: bool(x[:3].all()),
        beta=beta,
        D=D,
    )
