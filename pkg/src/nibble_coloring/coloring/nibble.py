"""Iterated nibble rounds with bad-event detection and round resampling.

Two modes share the driver:

* strict: parameters follow the recursion of `build_nibble_schedule` with η = κ/log d, the exponents 16s and 5, and
  (C1)-(C3) as hard preconditions. At any desk-scale d the schedule is infeasible and the run refuses.
* override: every round measures the current pair (minimum list size ℓ, maximum color-degree d), runs with the
  configured η and checks the round's outcome against targets computed from the measured pair with the configured
  exponents.
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from nibble_coloring.coloring.wcp import RoundParams, keep_value, list_size_deviation_bound, run_round
from nibble_coloring.config import NibbleConfig
from nibble_coloring.errors import PreconditionError, RetriesExhaustedError
from nibble_coloring.graph.core import (
    Graph,
    ListAssignment,
    PairParams,
    PartialColoring,
    check_proper,
    codegree_bound,
    color_codegree_events,
    color_degree_matrix,
    max_color_degree,
    preprocess,
    validate_pair,
)
from nibble_coloring.io.base import JsonFileIOBase
from nibble_coloring.io.trace import RoundRecord, TraceLog
from nibble_coloring.util.rng import derive_seed

logger = logging.getLogger(__name__)

# exp() overflows a double beyond this exponent.
MAX_EXP_ARGUMENT = 700.0


def kappa(eps: float) -> float:
    """κ(ε) = (1 + ε/2)·log(1 + ε/100)."""
    return (1 + eps / 2) * math.log(1 + eps / 100)


def default_eta(d: float, eps: float) -> float:
    """η(ε, d) = κ/log d."""
    return kappa(eps) / math.log(d)


def override_eta(d: float, ell: float) -> float:
    """Activation probability used in override mode when none is configured.

    The largest of the simple choices that keeps 4ηd < ℓ with a factor 2 margin and stays below 1/(4 log d).
    """
    eta = 0.5
    if d > 0:
        eta = min(eta, ell / (8 * d))
    if d > math.e:
        eta = min(eta, 1 / (4 * math.log(d)))
    return eta


def error_term(x: float, exponent: float) -> float:
    """x/log^exponent x. Infinite where log x is not positive, i.e. the window is vacuous."""
    return list_size_deviation_bound(x, exponent)


def lll_dependency_log10(d: float, s: int) -> float:
    """log10 of the dependency-degree bound 2^18·3²·d^(s+13) of the nibble round events."""
    return 18 * math.log10(2) + 2 * math.log10(3) + (s + 13) * math.log10(max(d, 1.0))


class ScheduleFlags(BaseModel):
    """Per-iteration condition flags, aligned with `NibbleSchedule.d_seq`."""

    c1: List[bool] = Field(default_factory=list)
    c2: List[bool] = Field(default_factory=list)
    c3: List[bool] = Field(default_factory=list)
    ratio_hypotheses: List[bool] = Field(default_factory=list)
    hat_hypotheses: List[bool] = Field(default_factory=list)
    hat_within: List[bool] = Field(default_factory=list)
    ell_lower_bound: List[bool] = Field(default_factory=list)


class NibbleSchedule(JsonFileIOBase):
    """The d_i, ℓ_i recursion and its feasibility.

    Attributes:
        d (float): Initial color-degree bound d_1.
        eps (float): Slack ε.
        kappa (float): κ(ε).
        eta (float): Activation probability, constant over iterations.
        error_exponent (float): Exponent of the error terms.
        d_tilde (float): Threshold of (C1).
        d_seq (List[float]): d_1, d_2, ...
        ell_seq (List[float]): ℓ_1, ℓ_2, ...
        keep_seq (List[float]): keep_i for every iteration that runs a round.
        uncolor_seq (List[float]): uncolor_i for every iteration that runs a round.
        d_hat_seq (List[float]): Error-free d̂_i.
        ell_hat_seq (List[float]): Error-free ℓ̂_i.
        i_star (int): First (1-based) iteration with ℓ_i ≥ 8d_i, None if never reached.
        stop_reason (str): "finisher_threshold", "iteration_cap" or "degenerate".
        iteration_cap (int): ⌈10·η^-1·log log d⌉ unless overridden.
        flags (ScheduleFlags): Per-iteration condition flags.
        check_failures (List[str]): Ratio and hat-sequence checks that failed although their hypotheses held.
        min_feasible_log_d (float): log of the smallest d with κ > 1/log d.
        min_feasible_d (float): exp of the above, None when it overflows.
        predicted_colors (float): (1+ε)d/log d.
    """

    d: float
    eps: float
    kappa: float
    eta: float
    error_exponent: float = 5.0
    d_tilde: float = float(2**20)
    d_seq: List[float] = Field(default_factory=list)
    ell_seq: List[float] = Field(default_factory=list)
    keep_seq: List[float] = Field(default_factory=list)
    uncolor_seq: List[float] = Field(default_factory=list)
    d_hat_seq: List[float] = Field(default_factory=list)
    ell_hat_seq: List[float] = Field(default_factory=list)
    i_star: Optional[int] = None
    stop_reason: str = "iteration_cap"
    iteration_cap: int = 1
    flags: ScheduleFlags = Field(default_factory=ScheduleFlags)
    check_failures: List[str] = Field(default_factory=list)
    min_feasible_log_d: float = math.inf
    min_feasible_d: Optional[float] = None
    predicted_colors: float = 0.0

    @property
    def rounds(self) -> int:
        """Number of nibble rounds before the finisher, i* - 1."""
        return len(self.keep_seq) if self.i_star is not None else 0

    def infeasibilities(self) -> List[str]:
        """Every (C1)-(C3) failure over iterations 1..i*-1, plus a missing i*."""
        problems = []
        if self.i_star is None:
            problems.append(f"ℓ_i ≥ 8d_i never reached ({self.stop_reason})")
        last = (self.i_star - 1) if self.i_star is not None else len(self.d_seq)
        for name in ("c1", "c2", "c3"):
            flags = getattr(self.flags, name)[:last]
            failed = [i + 1 for i, ok in enumerate(flags) if not ok]
            if failed:
                problems.append(f"(C{name[1]}) fails at iterations {failed[:5]}{' ...' if len(failed) > 5 else ''}")
        return problems

    @property
    def feasible(self) -> bool:
        return not self.infeasibilities()

    def round_params(self, i: int, s: int = 2) -> RoundParams:
        """Parameters of round i (1-based) with ℓ rounded up to an integer list size."""
        return RoundParams(d=self.d_seq[i - 1], ell=math.ceil(self.ell_seq[i - 1]), s=s, eta=self.eta)


def _log_or_none(x: float) -> Optional[float]:
    return math.log(x) if x > 1 else None


def _conditions(d_i: float, ell_i: float, eta: float, d_tilde: float) -> Tuple[bool, bool, bool]:
    c1 = d_i >= d_tilde
    c2 = 4 * eta * d_i < ell_i < 8 * d_i
    log_d = _log_or_none(d_i)
    c3 = log_d is not None and 1 / log_d**2 < eta < 1 / (4 * log_d)
    return c1, c2, c3


def _at_least(eta: float, factor: float, x: float, power: int) -> bool:
    log_x = _log_or_none(x)
    return log_x is not None and eta >= factor / log_x**power


def _within_log_window(value: float, hat: float) -> bool:
    log_hat = _log_or_none(hat)
    return log_hat is not None and abs(value - hat) <= hat / log_hat


def build_nibble_schedule(
    d: float,
    eps: float,
    eta: Optional[float] = None,
    error_exponent: float = 5.0,
    d_tilde: float = float(2**20),
    max_iterations: Optional[int] = None,
) -> NibbleSchedule:
    """Run the parameter recursion until ℓ_i ≥ 8d_i, the iteration cap, or a degenerate value.

    Args:
        d: Initial color-degree bound, at least 2.
        eps: Slack ε in (0, 1/3).
        eta: Activation probability. Defaults to κ/log d.
        error_exponent: Exponent e of the error terms ℓ/log^e ℓ and d/log^e d.
        d_tilde: Threshold of (C1).
        max_iterations: Overrides the ⌈10·η^-1·log log d⌉ cap.

    Returns:
        NibbleSchedule: Sequences, flags and feasibility. Infeasibility is data, never raised.
    """
    if d < 2:
        raise PreconditionError(f"d must be at least 2, got {d}")
    if not 0 < eps < 1 / 3:
        raise PreconditionError(f"eps must lie in (0, 1/3), got {eps}")

    k = kappa(eps)
    eta = default_eta(d, eps) if eta is None else eta
    if not 0 < eta < 1:
        raise PreconditionError(f"eta must lie in (0, 1), got {eta}")
    ell_1 = (1 + eps) * d / math.log(d)
    if max_iterations is None:
        max_iterations = max(1, math.ceil(10 / eta * max(math.log(math.log(d)), 0.0)))

    schedule = NibbleSchedule(
        d=d,
        eps=eps,
        kappa=k,
        eta=eta,
        error_exponent=error_exponent,
        d_tilde=d_tilde,
        iteration_cap=max_iterations,
        min_feasible_log_d=1 / k,
        min_feasible_d=math.exp(1 / k) if 1 / k < MAX_EXP_ARGUMENT else None,
        predicted_colors=ell_1,
    )
    flags = schedule.flags

    d_i, ell_i, d_hat, ell_hat = d, ell_1, d, ell_1
    ratio_hyp, hat_hyp, lower_hyp = True, True, True
    ell_floor = d ** (eps / 15)
    for i in range(1, max_iterations + 1):
        schedule.d_seq.append(d_i)
        schedule.ell_seq.append(ell_i)
        schedule.d_hat_seq.append(d_hat)
        schedule.ell_hat_seq.append(ell_hat)

        c1, c2, c3 = _conditions(d_i, ell_i, eta, d_tilde)
        flags.c1.append(c1)
        flags.c2.append(c2)
        flags.c3.append(c3)

        # Hypotheses of the hat-sequence window and the ℓ lower bound range over j < i.
        flags.hat_hypotheses.append(hat_hyp)
        within = _within_log_window(ell_i, ell_hat) and _within_log_window(d_i, d_hat)
        flags.hat_within.append(within)
        if hat_hyp and not within:
            schedule.check_failures.append(f"iteration {i}: hat-sequence window violated")
        flags.ell_lower_bound.append(ell_i >= ell_floor)
        if lower_hyp and ell_i < ell_floor:
            schedule.check_failures.append(f"iteration {i}: ℓ_i = {ell_i:.6g} below d^(ε/15) = {ell_floor:.6g}")

        ratio_hyp = (
            ratio_hyp
            and 8 * d_i >= ell_i
            and _at_least(eta, 6, d_i, int(error_exponent))
            and _at_least(eta, 6, ell_i, int(error_exponent))
        )
        flags.ratio_hypotheses.append(ratio_hyp)

        if ell_i >= 8 * d_i:
            schedule.i_star = i
            schedule.stop_reason = "finisher_threshold"
            break
        if ell_i <= 1 or d_i <= 1:
            schedule.stop_reason = "degenerate"
            break

        keep = keep_value(d_i, ell_i, eta)
        uncolor = 1 - eta * keep
        schedule.keep_seq.append(keep)
        schedule.uncolor_seq.append(uncolor)
        next_ell = keep * ell_i - ell_i / math.log(ell_i) ** error_exponent
        next_d = keep * uncolor * d_i + d_i / math.log(d_i) ** error_exponent

        if ratio_hyp and next_ell > 0 and next_d / next_ell > d_i / ell_i:
            schedule.check_failures.append(f"iteration {i}: ratio d/ℓ increased")

        hat_hyp = hat_hyp and _at_least(eta, 20, d_i, 3) and _at_least(eta, 20, ell_i, 3) and ell_i <= 8 * d_i
        lower_hyp = lower_hyp and ell_i <= 8 * d_i
        d_hat, ell_hat = keep * uncolor * d_hat, keep * ell_hat
        d_i, ell_i = next_d, next_ell
    else:
        schedule.stop_reason = "iteration_cap"

    for failure in schedule.check_failures[:10]:
        logger.warning("Schedule check failed although its hypotheses hold: %s", failure)
    logger.info(
        "Nibble schedule d=%g eps=%g: %d iterations, stop=%s, i*=%s",
        d,
        eps,
        len(schedule.d_seq),
        schedule.stop_reason,
        schedule.i_star,
    )
    return schedule


class BadEventReport(BaseModel):
    """Bad events of a round outcome, in the round's vertex ids.

    Attributes:
        list_events (List[int]): Vertices with |L'(v)| ≤ ℓ'.
        degree_events (List[Tuple[int, int]]): (v, c) with d_L'(v, c) ≥ d'.
        codegree_events (List[Tuple[List[int], int]]): (v_1..v_s, c) with d_L'(v_1..v_s, c) ≥ d'/log^e d'.
        slack_events (List[int]): Vertices that lost |L(v)| > deg(v) during the round.
        codegree_checked (bool): Whether codegree events were scanned at all.
    """

    list_events: List[int] = Field(default_factory=list)
    degree_events: List[Tuple[int, int]] = Field(default_factory=list)
    codegree_events: List[Tuple[List[int], int]] = Field(default_factory=list)
    slack_events: List[int] = Field(default_factory=list)
    codegree_checked: bool = True

    @property
    def empty(self) -> bool:
        return not (self.list_events or self.degree_events or self.codegree_events or self.slack_events)

    @property
    def count(self) -> int:
        return len(self.list_events) + len(self.degree_events) + len(self.codegree_events) + len(self.slack_events)

    def summary(self) -> str:
        return (
            f"{len(self.list_events)} list, {len(self.degree_events)} degree, "
            f"{len(self.codegree_events)} codegree, {len(self.slack_events)} slack events"
        )


def detect_bad_events(
    G: Graph,
    L: ListAssignment,
    ell_target: float,
    d_target: float,
    s: int = 2,
    exponent: Optional[float] = None,
) -> BadEventReport:
    """Exact scan for the three bad events of a round outcome.

    Args:
        G: Graph after the round.
        L: Lists after the round.
        ell_target: ℓ'. Negative values are clamped to 0, so an empty list is always an event.
        d_target: d'.
        s: Codegree arity.
        exponent: Exponent of the codegree threshold d'/log^e d'. None skips the codegree scan.

    Returns:
        BadEventReport: Empty iff all three conclusions hold.
    """
    report = BadEventReport(codegree_checked=exponent is not None)
    threshold = max(ell_target, 0.0)
    report.list_events = [v for v in range(G.n) if L.size(v) <= threshold]

    D, colors = color_degree_matrix(G, L)
    if d_target <= 0:
        report.degree_events = [(v, c) for v in range(G.n) for c in L.lists[v]]
    else:
        entries = D.tocoo()
        hit = entries.data >= d_target
        report.degree_events = sorted(zip(entries.row[hit].tolist(), colors[entries.col[hit]].tolist()))

    if exponent is not None and d_target > 1:
        bound = codegree_bound(d_target, exponent)
        report.codegree_events = [(list(tup), c) for tup, c, _ in color_codegree_events(G, L, s, bound)]
    return report


def slack_vertices(G: Graph, L: ListAssignment) -> List[int]:
    return [v for v in range(G.n) if L.size(v) > G.degree(v)]


class RoundStats(BaseModel):
    # Targets are infinite once ℓ or d drops to 1.
    model_config = ConfigDict(ser_json_inf_nan="constants")

    round: int
    ell: int
    d: float
    eta: float
    keep: float
    uncolor: float
    target_ell: float
    target_d: float
    retries: int
    colored: int
    remaining: int
    min_list: int
    max_color_degree: int
    codegree_checked: bool


class HandoffState(BaseModel):
    remaining: int
    min_list: int
    max_color_degree: int
    finisher_threshold: bool


class RunReport(JsonFileIOBase):
    """Run report of a nibble run: schedule, per-round statistics and the state handed to the finisher."""

    mode: str
    seed: int
    eps: float
    s: int = 2
    schedule: Optional[NibbleSchedule] = None
    rounds: List[RoundStats] = Field(default_factory=list)
    stop_reason: str = "finisher_threshold"
    handoff: Optional[HandoffState] = None
    lll_dependency_log10: Optional[float] = None
    colors_used: Optional[int] = None
    palette_size: Optional[int] = None


class NibbleRun(BaseModel):
    """Result of `run_nibble`.

    `coloring` uses the input vertex ids. `graph` and `lists` are the uncolored remainder relabelled 0..k-1, with
    `vertices[i]` the input id of remainder vertex i.
    """

    coloring: PartialColoring
    graph: Graph
    lists: ListAssignment
    vertices: List[int]
    report: RunReport
    trace: TraceLog


def _round_cap(config: NibbleConfig, d: float, eta: float) -> int:
    if config.max_rounds is not None:
        return config.max_rounds
    return max(1, math.ceil(10 / eta * max(math.log(math.log(max(d, 2.0))), 1.0)))


def _strict_preflight(G: Graph, L: ListAssignment, config: NibbleConfig, schedule: NibbleSchedule) -> None:
    problems = schedule.infeasibilities()
    if problems:
        raise PreconditionError("Strict mode refuses an infeasible schedule: " + "; ".join(problems))
    if schedule.rounds == 0:
        return
    p = schedule.round_params(1, config.s)
    G1, L1 = preprocess(G, L, int(p.ell))
    report = validate_pair(
        G1,
        L1,
        PairParams(d=p.d, ell=p.ell, s=config.s, eta=p.eta, codegree_exponent=config.resolved_codegree_exponent()),
        strict=True,
    )
    if not report.valid:
        raise PreconditionError("Round 1 pair is invalid: " + "; ".join(str(v) for v in report.violations))


def run_nibble(
    G: Graph,
    L: ListAssignment,
    config: NibbleConfig,
    seed: int,
    schedule: Optional[NibbleSchedule] = None,
) -> NibbleRun:
    """Iterate nibble rounds until lists dominate color-degrees, ready for the finisher.

    Args:
        G: Input graph.
        L: Input lists.
        config: Pipeline configuration. `config.strict` selects the mode.
        seed: Master seed. Round i, retry j uses `derive_seed(seed, i, j)`.
        schedule: Strict-mode schedule. Built from the measured maximum color-degree when omitted.

    Returns:
        NibbleRun: Accumulated coloring, the remainder, the run report and the round traces.
    """
    if len(L) != G.n:
        raise PreconditionError(f"list assignment covers {len(L)} vertices, graph has {G.n}")

    s = config.s
    mode = "strict" if config.strict else "override"
    report = RunReport(mode=mode, seed=seed, eps=config.eps, s=s)
    trace = TraceLog()

    if config.strict:
        if schedule is None:
            schedule = build_nibble_schedule(
                max(max_color_degree(G, L), 2),
                config.eps,
                error_exponent=config.resolved_error_exponent(),
                d_tilde=config.d_tilde,
            )
        report.schedule = schedule
        _strict_preflight(G, L, config, schedule)
        round_limit = schedule.rounds if config.max_rounds is None else min(schedule.rounds, config.max_rounds)
    else:
        round_limit = None

    error_exp = config.resolved_error_exponent()
    codegree_exp = config.resolved_codegree_exponent()
    ids = list(range(G.n))
    current_G, current_L = G, L
    coloring: Dict[int, int] = {}
    stop_reason = "finisher_threshold"
    i = 0

    while True:
        if current_G.n == 0:
            stop_reason = "empty"
            break
        if config.strict:
            if i >= round_limit:
                stop_reason = "finisher_threshold" if i == schedule.rounds else "round_cap"
                break
            p = schedule.round_params(i + 1, s)
            trimmed_G, trimmed_L = preprocess(current_G, current_L, int(p.ell))
            measured_d = max_color_degree(trimmed_G, trimmed_L)
        else:
            measured_ell = current_L.min_size()
            if measured_ell == 0:
                stop_reason = "empty_list"
                break
            trimmed_G, trimmed_L = preprocess(current_G, current_L, measured_ell)
            measured_d = max_color_degree(trimmed_G, trimmed_L)
            eta = config.eta if config.eta is not None else override_eta(measured_d, measured_ell)
            p = RoundParams(d=measured_d, ell=measured_ell, s=s, eta=eta)
            if round_limit is None:
                report.lll_dependency_log10 = lll_dependency_log10(measured_d, s)
                logger.info("Round event dependency bound 2^18*3^2*d^(s+13) = 10^%.1f", report.lll_dependency_log10)
                round_limit = _round_cap(config, measured_d, eta)

        if p.ell >= 8 * measured_d:
            stop_reason = "finisher_threshold"
            break
        if not config.strict and i >= round_limit:
            stop_reason = "round_cap"
            break

        i += 1
        if config.strict:
            target_ell, target_d = schedule.ell_seq[i], schedule.d_seq[i]
            exponent: Optional[float] = codegree_exp
        else:
            pair = validate_pair(
                trimmed_G,
                trimmed_L,
                PairParams(d=max(p.d, 0), ell=p.ell, s=s, eta=max(p.eta, 1e-12), codegree_exponent=codegree_exp),
                strict=False,
            )
            hard = [v for v in pair.violations if v.condition != "ℓ < 8d"]
            if hard and i == 1:
                raise PreconditionError("Round 1 pair is invalid: " + "; ".join(str(v) for v in hard))
            for violation in hard + pair.warnings:
                logger.debug("Round %d pair check: %s", i, violation)
            target_ell = p.keep * p.ell - error_term(p.ell, error_exp)
            target_d = p.keep * p.uncolor * p.d + error_term(p.d, error_exp)
            exponent = codegree_exp if not any(w.condition == "s-color-codegree" for w in pair.warnings) else None

        slack_before = set(slack_vertices(trimmed_G, trimmed_L)) if config.slack_event_enabled() else set()

        result, events = None, None
        for retry in range(config.max_retries_per_round):
            result = run_round(trimmed_G, trimmed_L, p, derive_seed(seed, i, retry))
            events = detect_bad_events(result.graph, result.lists, target_ell, target_d, s, exponent)
            if slack_before:
                events.slack_events = [
                    v_new
                    for v_new, v_old in enumerate(result.vertices)
                    if v_old in slack_before and result.lists.size(v_new) <= result.graph.degree(v_new)
                ]
            if events.empty:
                break
            logger.debug("Round %d retry %d rejected: %s", i, retry, events.summary())
        else:
            raise RetriesExhaustedError(
                f"Round {i} had bad events after {config.max_retries_per_round} attempts: {events.summary()}",
                report=events,
            )

        for v, c in result.coloring.assignment.items():
            coloring[ids[v]] = c
        check_proper(G, PartialColoring(assignment=coloring), L, f"coloring after round {i}")
        new_ids = [ids[v] for v in result.vertices]

        min_list = result.lists.min_size()
        max_degree = max_color_degree(result.graph, result.lists)
        report.rounds.append(
            RoundStats(
                round=i,
                ell=int(p.ell),
                d=p.d,
                eta=p.eta,
                keep=p.keep,
                uncolor=p.uncolor,
                target_ell=target_ell,
                target_d=target_d,
                retries=retry,
                colored=len(result.coloring.assignment),
                remaining=result.graph.n,
                min_list=min_list,
                max_color_degree=max_degree,
                codegree_checked=events.codegree_checked,
            ),
        )
        trace.append(
            RoundRecord(
                round=i,
                retries=retry,
                vertex_ids=ids,
                trace=result.trace,
                colored=len(result.coloring.assignment),
                remaining=result.graph.n,
                min_list=min_list,
                max_color_degree=max_degree,
            ),
        )
        logger.info(
            "Round %d: colored %d, %d remain, min list %d, max color-degree %d (%d retries)",
            i,
            len(result.coloring.assignment),
            result.graph.n,
            min_list,
            max_degree,
            retry,
        )
        ids, current_G, current_L = new_ids, result.graph, result.lists

    phi = PartialColoring(assignment=coloring)
    report.stop_reason = stop_reason
    report.handoff = HandoffState(
        remaining=current_G.n,
        min_list=current_L.min_size(),
        max_color_degree=max_color_degree(current_G, current_L),
        finisher_threshold=current_L.min_size() >= 8 * max_color_degree(current_G, current_L),
    )
    return NibbleRun(coloring=phi, graph=current_G, lists=current_L, vertices=ids, report=report, trace=trace)
