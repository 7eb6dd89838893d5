"""Command-line surface: `nibble gen | color | verify | stats | sparsify | schedule | partition-schedule | lab`.

Exit codes: 0 success, 1 verification failure, 2 usage error or malformed input, 3 pipeline failure.
"""

import json
import logging
from functools import wraps
from typing import List, Optional

import click
import numpy as np
from pydantic import BaseModel, ValidationError

from nibble_coloring import __version__
from nibble_coloring.api.read import read, read_coloring, read_graph, read_lists
from nibble_coloring.api.write import write, write_graph, write_json, write_trace
from nibble_coloring.coloring.nibble import build_nibble_schedule, override_eta
from nibble_coloring.coloring.partition import build_schedule, weak_vu_pipeline
from nibble_coloring.coloring.pipeline import color_graph
from nibble_coloring.coloring.sparsify import sparsify_trials, trials_frame
from nibble_coloring.config import NibbleConfig
from nibble_coloring.errors import NibbleError
from nibble_coloring.graph.core import Metrics, PairParams, PairReport, coloring_violations, max_metrics, validate_pair
from nibble_coloring.graph.generators import generate, generate_lists
from nibble_coloring.lab.corpus import build_corpus, run_corpus
from nibble_coloring.lab.tools import verify_kst
from nibble_coloring.util.rng import resolve_seed

logger = logging.getLogger(__name__)

EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_PIPELINE = 3

LOG_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


class InputError(click.ClickException):
    exit_code = EXIT_USAGE


class PipelineFailure(click.ClickException):
    exit_code = EXIT_PIPELINE


class VerificationFailure(click.ClickException):
    exit_code = EXIT_VERIFY


def _validation_message(err: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(part) for part in e['loc']) or '<root>'}: {e['msg']}" for e in err.errors())


def handle_errors(fn):
    """Map package exceptions to the documented exit codes."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as err:
            raise InputError(_validation_message(err)) from err
        except NibbleError as err:
            if isinstance(err, ValueError):
                raise InputError(str(err)) from err
            raise PipelineFailure(f"{type(err).__name__}: {err}") from err
        except (OSError, ValueError) as err:
            raise InputError(str(err)) from err

    return wrapper


def _seed(seed: Optional[int]) -> int:
    if seed is None:
        seed = resolve_seed(None)
        click.echo(f"seed: {seed}", err=True)
    return seed


def _echo_json(model: BaseModel) -> None:
    click.echo(model.model_dump_json(indent=2))


def _load_config(path: Optional[str], **overrides) -> NibbleConfig:
    config = read(path, "config") if path else NibbleConfig()
    return config.with_overrides(**overrides)


def parse_tau_grid(value: str) -> List[float]:
    """`a:b:step` as the list a, a+step, ..., up to b inclusive. A single number is a one-point grid."""
    parts = value.split(":")
    try:
        numbers = [float(p) for p in parts]
    except ValueError as err:
        raise click.BadParameter(f"expected 'a:b:step', got {value!r}") from err
    if len(numbers) == 1:
        return numbers
    if len(numbers) != 3 or numbers[2] <= 0 or numbers[1] < numbers[0]:
        raise click.BadParameter(f"expected 'a:b:step' with a <= b and step > 0, got {value!r}")
    a, b, step = numbers
    return np.arange(a, b + step / 2, step).tolist()


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", count=True, help="Increase log verbosity (-v info, -vv debug).")
def cli(verbose: int) -> None:
    """Randomized list coloring by nibble rounds, and a lab for the inequalities behind it."""
    logging.basicConfig(
        level=LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)],
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.option("--spec", "spec_path", required=True, help="Generator spec JSON.")
@click.option("--out", required=True, help="Edge list to write.")
@click.option("--lists", "lists_path", default=None, help="Write lists drawn from the spec's palette here.")
@click.option("--seed", type=int, default=None, help="Override the spec's seed.")
@handle_errors
def gen(spec_path: str, out: str, lists_path: Optional[str], seed: Optional[int]) -> None:
    """Generate a graph (and optionally lists) from a spec."""
    spec = read(spec_path, "spec")
    if seed is not None:
        spec = spec.model_copy(update={"seed": seed})
    G = generate(spec)
    write_graph(G, out)
    click.echo(f"wrote {out}: {G.n} vertices, {G.num_edges} edges, max degree {G.max_degree()}")
    if lists_path:
        lists = generate_lists(spec, G)
        if lists is None:
            raise InputError("--lists needs 'palette' and 'list_size' in the spec")
        write_json(lists, lists_path)
        click.echo(f"wrote {lists_path}: lists of size {spec.list_size} from {spec.palette} colors")


@cli.command()
@click.option("--graph", "graph_path", required=True, help="Edge list.")
@click.option("--lists", "lists_path", default=None, help="List assignment JSON. Not used with --zeta.")
@click.option("--eps", type=float, default=None, help="Slack ε in (0, 1/3).")
@click.option("--seed", type=int, default=None, help="Master seed. Drawn from entropy and printed when omitted.")
@click.option("--override-eta", type=float, default=None, help="Activation probability η (override mode).")
@click.option("--exp2", type=float, default=None, help="Codegree exponent, replacing 16s (override mode).")
@click.option("--exp5", type=float, default=None, help="Error-term exponent, replacing 5 (override mode).")
@click.option("--strict", is_flag=True, default=False, help="Run with the exact schedule and hard preconditions.")
@click.option("--config", "config_path", default=None, help="NibbleConfig JSON; flags win over its fields.")
@click.option("--zeta", type=float, default=None, help="Partition first: the s-codegree is at most ζΔ.")
@click.option("--s", type=int, default=None, help="Codegree arity.")
@click.option("--out", required=True, help="Coloring JSON to write.")
@click.option("--trace", "trace_path", default=None, help="Round trace JSONL to write.")
@click.option("--report", "report_path", default=None, help="Run report JSON to write.")
@handle_errors
def color(
    graph_path: str,
    lists_path: Optional[str],
    eps: Optional[float],
    seed: Optional[int],
    override_eta: Optional[float],
    exp2: Optional[float],
    exp5: Optional[float],
    strict: bool,
    config_path: Optional[str],
    zeta: Optional[float],
    s: Optional[int],
    out: str,
    trace_path: Optional[str],
    report_path: Optional[str],
) -> None:
    """Color a graph from its lists: nibble rounds, then the finisher."""
    config = _load_config(
        config_path,
        eps=eps,
        eta=override_eta,
        codegree_exponent=exp2,
        error_exponent=exp5,
        s=s,
        strict=True if strict else None,
    )
    G = read_graph(graph_path)
    seed = _seed(seed)

    if zeta is not None:
        if lists_path:
            logger.warning("--lists is ignored with --zeta: every part gets its own range of colors")
        result = weak_vu_pipeline(G, zeta, config.eps, config.s, seed, config)
        write_json(result.coloring, out)
        if report_path:
            write_json(result.schedule, report_path)
        if trace_path:
            logger.warning("No trace is written with --zeta")
        click.echo(
            f"colored {G.n} vertices in {len(result.parts)} parts with {result.colors_used} colors "
            f"(palette {result.palette_size})",
        )
        return

    if not lists_path:
        raise InputError("--lists is required unless --zeta is given")
    L = read_lists(lists_path)
    result = color_graph(G, L, config, seed)
    write_json(result.coloring, out)
    if trace_path:
        write_trace(result.trace, trace_path)
    if report_path:
        write_json(result.report, report_path)
    click.echo(
        f"colored {G.n} vertices with {result.report.colors_used} colors (palette {result.report.palette_size}) "
        f"after {len(result.report.rounds)} rounds",
    )


@cli.command()
@click.option("--graph", "graph_path", required=True, help="Edge list.")
@click.option("--coloring", "coloring_path", required=True, help="Coloring JSON.")
@click.option("--lists", "lists_path", default=None, help="Also check φ(v) ∈ L(v).")
@handle_errors
def verify(graph_path: str, coloring_path: str, lists_path: Optional[str]) -> None:
    """Exit 0 iff the coloring is total and proper (and respects the lists when given)."""
    G = read_graph(graph_path)
    phi = read_coloring(coloring_path)
    L = read_lists(lists_path) if lists_path else None
    problems = [f"vertex {v} is uncolored" for v in range(G.n) if v not in phi.assignment]
    problems += coloring_violations(G, phi, L)
    if problems:
        for problem in problems:
            click.echo(problem, err=True)
        raise VerificationFailure(f"{len(problems)} violations, first: {problems[0]}")
    click.echo(f"proper: {G.n} vertices, {phi.colors_used()} colors")


class StatsReport(BaseModel):
    metrics: Metrics
    params: PairParams
    pair: PairReport


@cli.command()
@click.option("--graph", "graph_path", required=True, help="Edge list.")
@click.option("--lists", "lists_path", required=True, help="List assignment JSON.")
@click.option("--s", type=int, default=2, show_default=True, help="Codegree arity.")
@click.option("--eta", type=float, default=None, help="η of the pair check. Defaults to the override-mode choice.")
@click.option("--exp2", type=float, default=None, help="Codegree exponent, replacing 16s.")
@click.option("--strict", is_flag=True, default=False, help="Treat the η window and codegree bound as violations.")
@handle_errors
def stats(graph_path: str, lists_path: str, s: int, eta: Optional[float], exp2: Optional[float], strict: bool) -> None:
    """Print the maximum color-degree and color-codegree, and the pair validation at the measured (d, ℓ)."""
    G = read_graph(graph_path)
    L = read_lists(lists_path)
    metrics = max_metrics(G, L, s)
    d, ell = metrics.max_color_degree, metrics.min_list_size
    params = PairParams(
        d=d,
        ell=ell,
        s=s,
        eta=override_eta(d, ell) if eta is None else eta,
        codegree_exponent=exp2,
    )
    _echo_json(StatsReport(metrics=metrics, params=params, pair=validate_pair(G, L, params, strict=strict)))


@cli.command()
@click.option("--graph", "graph_path", required=True, help="Edge list.")
@click.option("--q", type=int, required=True, help="Palette size.")
@click.option("--ell", type=int, required=True, help="Sampled list size.")
@click.option("--trials", type=int, default=1, show_default=True, help="Independent trials.")
@click.option("--seed", type=int, default=None, help="Master seed. Drawn from entropy and printed when omitted.")
@click.option("--config", "config_path", default=None, help="NibbleConfig JSON for the coloring.")
@click.option("--timing", is_flag=True, default=False, help="Add a wall_time column (not reproducible).")
@click.option("--parallel", type=int, default=None, help="Worker processes.")
@handle_errors
def sparsify(
    graph_path: str,
    q: int,
    ell: int,
    trials: int,
    seed: Optional[int],
    config_path: Optional[str],
    timing: bool,
    parallel: Optional[int],
) -> None:
    """Palette sparsification trials as CSV on stdout."""
    G = read_graph(graph_path)
    config = _load_config(config_path)
    results = sparsify_trials(G, q, ell, trials, _seed(seed), config, workers=parallel)
    click.echo(trials_frame(results, timing=timing).to_csv(index=False), nl=False)


@cli.command()
@click.option("--d", "d", type=float, required=True, help="Initial color-degree bound.")
@click.option("--eps", type=float, required=True, help="Slack ε in (0, 1/3).")
@click.option("--eta", type=float, default=None, help="Activation probability. Defaults to κ/log d.")
@click.option("--exp5", type=float, default=5.0, show_default=True, help="Error-term exponent.")
@click.option("--d-tilde", type=float, default=float(2**20), show_default=True, help="Threshold of (C1).")
@handle_errors
def schedule(d: float, eps: float, eta: Optional[float], exp5: float, d_tilde: float) -> None:
    """Print the d_i, ℓ_i recursion and its feasibility."""
    _echo_json(build_nibble_schedule(d, eps, eta=eta, error_exponent=exp5, d_tilde=d_tilde))


@cli.command("partition-schedule")
@click.option("--delta", type=float, required=True, help="Maximum degree Δ.")
@click.option("--zeta", type=float, required=True, help="Codegree ratio ζ in (0, 1].")
@click.option("--eps", type=float, required=True, help="Slack ε in (0, 1/3).")
@click.option("--s", type=int, default=2, show_default=True, help="Codegree arity.")
@handle_errors
def partition_schedule(delta: float, zeta: float, eps: float, s: int) -> None:
    """Print the degree/codegree halving schedule of the partition step."""
    _echo_json(build_schedule(delta, zeta, eps, s))


@cli.group()
def lab() -> None:
    """Exact checks of the probabilistic tools."""


@lab.command("run")
@click.option("--corpus", "corpus_path", required=True, help="Witness corpus JSON.")
@click.option("--tau-grid", required=True, help="Deviations as 'a:b:step'.")
@click.option(
    "--exceptional-term/--no-exceptional-term",
    default=True,
    show_default=True,
    help="Keep the 2·Pr(Ω*)·sup R term of the threshold.",
)
@click.option("--parallel", type=int, default=None, help="Worker processes.")
@handle_errors
def lab_run(corpus_path: str, tau_grid: str, exceptional_term: bool, parallel: Optional[int]) -> None:
    """Check the concentration bound and Talagrand's inequality on every corpus entry."""
    grid = parse_tau_grid(tau_grid)
    report = run_corpus(read(corpus_path, "corpus"), grid, exceptional_term, workers=parallel)
    _echo_json(report)
    if not report.ok:
        raise VerificationFailure(
            f"{len(report.violations)} concentration violations, {len(report.talagrand_failures)} Talagrand failures",
        )


@lab.command("kst")
@click.option("--m-max", type=int, default=4, show_default=True)
@click.option("--n-max", type=int, default=4, show_default=True)
@click.option("--s-max", type=int, default=4, show_default=True)
@click.option("--t-max", type=int, default=4, show_default=True)
@handle_errors
def lab_kst(m_max: int, n_max: int, s_max: int, t_max: int) -> None:
    """Exhaustively check the Kővári–Sós–Turán bound on small bipartite graphs."""
    report = verify_kst(m_max, n_max, s_max, t_max)
    click.echo(json.dumps({"cases": len(report.cases), "violations": [c.model_dump() for c in report.violations]}))
    if report.violations:
        raise VerificationFailure(f"{len(report.violations)} cases violate the bound")


@lab.command("corpus")
@click.option("--out", required=True, help="Corpus JSON to write.")
@click.option("--count", type=int, default=100, show_default=True, help="Witness structures.")
@click.option("--seed", type=int, default=None, help="Master seed. Drawn from entropy and printed when omitted.")
@click.option("--m-max", type=int, default=8, show_default=True, help="Maximum number of trials.")
@click.option("--n-max", type=int, default=20, show_default=True, help="Maximum number of indicators.")
@click.option("--exceptional-every", type=int, default=5, show_default=True, help="Every k-th has Ω* ≠ ∅.")
@click.option("--event-pairs", type=int, default=0, show_default=True, help="Talagrand event pairs.")
@click.option("--event-m-max", type=int, default=12, show_default=True, help="Maximum coins of an event pair.")
@handle_errors
def lab_corpus(
    out: str,
    count: int,
    seed: Optional[int],
    m_max: int,
    n_max: int,
    exceptional_every: int,
    event_pairs: int,
    event_m_max: int,
) -> None:
    """Write a randomized witness-structure corpus."""
    corpus = build_corpus(count, _seed(seed), m_max, n_max, exceptional_every, event_pairs, event_m_max)
    write(corpus, out)
    click.echo(f"wrote {out}: {len(corpus.structures)} structures, {len(corpus.event_pairs)} event pairs")


if __name__ == "__main__":
    cli()
