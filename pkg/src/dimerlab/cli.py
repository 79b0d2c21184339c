"""Command-line front end: ``dimerlab <command> [flags]``.

Every command prints one JSON document (or a CSV/DOT text) to stdout and
diagnostics to stderr. Exit status is 0 on success, 1 when a verification
check fails and 2 on invalid input.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .activity_log import log_activity
from .asymptotics import (
    chain_asymptotics,
    concentration_profile,
    continuum_entry,
    expected_ti_length,
    ti_length_slope,
)
from .counts import ROUTES, Normalization, count_configuration, grid_context, impurity_distribution
from .lattice import (
    build_g1,
    build_rooted,
    build_slotted,
    build_superposition,
    export_dot,
    graph_document,
)
from .models import DimerlabError, GridSpec, ImpurityConfig, build_spec, parse_dual, parse_vertex
from .settings import Settings, load_settings
from .tables import (
    FORMATS,
    chain_frame,
    concentration_frame,
    distribution_frame,
    render,
    ti_length_frame,
    write_output,
    write_table,
)
from .verify import SUITES, check_names, run_checks
from .walks import srw_hitting_estimate, ti_length_stats

logger = logging.getLogger(__name__)

SCHEMA = 1
GRAPHS = ("g1", "gk", "rooted", "slotted")


class UsageError(DimerlabError):
    """Raised when flags are individually valid but do not fit together."""

    pass


# --- Parser ---


def _grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--shape", required=True, help="rect:NxM or chain:N")
    p.add_argument(
        "--terminal",
        action="append",
        default=[],
        metavar="X,Y:D",
        help="terminal attachment (repeatable); chains use INDEX:D",
    )
    p.add_argument("--k", type=int, default=None, help="impurity count (default from terminals)")


def _out_flags(p: argparse.ArgumentParser, formats: Sequence[str]) -> None:
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--out", default=None, help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dimerlab",
        description="Exact counts, samplers and asymptotics for impurity dimer models.",
    )
    parser.add_argument("--version", action="version", version=f"dimerlab {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="count matchings for one impurity configuration")
    _grid_flags(p)
    p.add_argument("--at", help="vertex of the single impurity (k=1)")
    p.add_argument("--a", help="first boundary impurity (k=2)")
    p.add_argument("--b", help="second boundary impurity (k=2)")
    p.add_argument("--dual-a", help="dual endpoint of a, e.g. 1.5,2.5")
    p.add_argument("--dual-b", help="dual endpoint of b")
    p.add_argument(
        "--impurity",
        action="append",
        default=[],
        metavar="VERTEX[@DUAL]",
        help="impurity in boundary order (repeatable)",
    )
    p.add_argument("--route", choices=ROUTES + ("transfer",), default="cofactor")

    p = sub.add_parser("dist", help="single-impurity distribution table")
    _grid_flags(p)
    p.add_argument(
        "--normalization",
        choices=[n.value for n in Normalization],
        default=Normalization.PER_DUAL.value,
    )
    p.add_argument("--route", choices=ROUTES, default="cofactor")
    _out_flags(p, FORMATS)

    p = sub.add_parser("sample", help="Monte Carlo estimates with a fixed seed")
    samplers = p.add_subparsers(dest="sampler", required=True)
    s = samplers.add_parser("ust", help="TI-component statistics of uniform spanning trees")
    _grid_flags(s)
    s.add_argument("--n", type=int, required=True, help="number of trees")
    s.add_argument("--seed", type=int, required=True)
    s = samplers.add_parser("hitting", help="exit frequencies of simple random walks")
    _grid_flags(s)
    s.add_argument("--at", required=True, help="start vertex")
    s.add_argument("--n", type=int, required=True, help="number of walks")
    s.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("asym", help="asymptotic sweeps")
    sweeps = p.add_subparsers(dest="sweep", required=True)
    s = sweeps.add_parser("chain", help="chain weights and their decay rate")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--window", help="LO,HI range of the rate fit")
    _out_flags(s, FORMATS)
    s = sweeps.add_parser("lt", help="expected TI length on n x n grids")
    s.add_argument("--n", type=int, nargs="+", required=True)
    _out_flags(s, FORMATS)
    s = sweeps.add_parser("continuum", help="corner limit of the Green's function")
    s.add_argument("--x", type=int, default=1)
    s.add_argument("--y", type=int, default=1)
    s.add_argument("--tol", type=float, default=1e-6)
    s = sweeps.add_parser("concentration", help="tail masses of the impurity position")
    s.add_argument("--n", type=int, nargs="+", required=True)
    s.add_argument("--c", type=float, default=0.25)
    s.add_argument("--dim", type=int, choices=(1, 2), default=2)
    _out_flags(s, FORMATS)

    p = sub.add_parser("verify", help="run the self-check suite")
    p.add_argument("--suite", choices=SUITES, default="small")
    p.add_argument("--check", action="append", choices=check_names(), default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("export", help="write a graph as DOT or JSON")
    _grid_flags(p)
    p.add_argument("--graph", choices=GRAPHS, default="gk")
    _out_flags(p, ("dot", "json"))
    return parser


# --- Helpers ---


def _provenance(spec: Optional[GridSpec] = None, route: Optional[str] = None) -> dict:
    out: dict = {"version": __version__}
    if spec is not None:
        out["shape"] = spec.shape_label()
        out["terminals"] = spec.terminal_labels()
    if route is not None:
        out["route"] = route
    return out


def _document(command: str, provenance: dict, **body) -> str:
    doc = {"schema": SCHEMA, "command": command, "provenance": provenance}
    doc.update(body)
    return json.dumps(doc, indent=2) + "\n"


def _fraction(value) -> dict:
    return {"num": value.numerator, "den": value.denominator}


def _impurities(spec: GridSpec, args: argparse.Namespace) -> ImpurityConfig:
    """Collect impurities from ``--at``, ``--a/--b`` or ``--impurity``."""
    given = [bool(args.at), bool(args.a or args.b), bool(args.impurity)]
    if sum(given) != 1:
        raise UsageError("Give exactly one of --at, --a/--b or --impurity")
    if args.at:
        return ImpurityConfig((parse_vertex(spec.kind, args.at),))
    if args.a or args.b:
        if not (args.a and args.b):
            raise UsageError("--a and --b must be given together")
        points = (parse_vertex(spec.kind, args.a), parse_vertex(spec.kind, args.b))
        duals = tuple(parse_dual(d) if d else None for d in (args.dual_a, args.dual_b))
        return ImpurityConfig(points, duals)
    points, duals = [], []
    for text in args.impurity:
        where, _, dual = text.partition("@")
        points.append(parse_vertex(spec.kind, where))
        duals.append(parse_dual(dual) if dual else None)
    return ImpurityConfig(tuple(points), tuple(duals))


def _output_path(out: Optional[str], settings: Settings) -> Optional[Path]:
    if out is None:
        return None
    path = Path(out).expanduser()
    if path.parent == Path("."):
        path = settings.resolve_output_dir() / path
    return path


def _emit(text: str, out: Optional[str], settings: Settings) -> None:
    path = _output_path(out, settings)
    if path is None:
        sys.stdout.write(text)
        return
    logger.info("Wrote %s", write_output(text, path))


def _emit_table(df, out: Optional[str], settings: Settings) -> None:
    """Write a table as CSV to ``out`` or stdout."""
    path = _output_path(out, settings)
    text = write_table(df, "csv", path)
    if path is None:
        sys.stdout.write(text)
    else:
        logger.info("Wrote %s", path)


def _record(settings: Settings, action: str, shape: Optional[str] = None, **details) -> None:
    if not settings.activity_log:
        return
    try:
        log_activity(action, "cli", shape, **details)
    except OSError as e:
        logger.warning("Activity log not written: %s", e)


def _spec(args: argparse.Namespace) -> GridSpec:
    return build_spec(args.shape, args.terminal, args.k)


# --- Commands ---


def cmd_count(args: argparse.Namespace, settings: Settings) -> int:
    spec = _spec(args)
    config = _impurities(spec, args)
    result = count_configuration(spec, config, args.route)
    _emit(
        _document(
            "count",
            _provenance(spec, result.route),
            impurities=[list(p) for p in config.primals],
            duals=[list(d) if d else None for d in config.duals],
            count=result.value,
            parts=result.parts,
        ),
        None,
        settings,
    )
    _record(settings, "count", spec.shape_label(), route=result.route, value=result.value)
    return 0


def cmd_dist(args: argparse.Namespace, settings: Settings) -> int:
    spec = _spec(args)
    dist = impurity_distribution(spec, Normalization(args.normalization), args.route)
    df = distribution_frame(dist)
    if args.format == "csv":
        _emit_table(df, args.out, settings)
    else:
        top = dist.argmax()
        text = _document(
            "dist",
            _provenance(spec, args.route),
            normalization=dist.normalization.value,
            det_k=dist.det_k,
            total=dist.total,
            terminal_mass=_fraction(dist.terminal_mass),
            argmax=list(top),
            argmax_edge=_fraction(dist.edge_probability(top)),
            rows=json.loads(render(df, "json")),
        )
        _emit(text, args.out, settings)
    _record(settings, "dist", spec.shape_label(), normalization=dist.normalization.value)
    return 0


def cmd_sample(args: argparse.Namespace, settings: Settings) -> int:
    spec = _spec(args)
    if args.n < 1:
        raise UsageError("--n must be positive")
    if args.sampler == "ust":
        stats = ti_length_stats(spec, args.n, args.seed)
        column = grid_context(spec).K.column_of_inverse(spec.terminals[0].vertex)
        body = {
            "samples": stats.samples,
            "seed": stats.seed,
            "mean_lt": stats.mean,
            "stderr_lt": stats.stderr,
            "exact_lt": float(sum(column.values())),
            "membership": [
                {
                    "vertex": list(p),
                    "frequency": stats.membership[p],
                    "stderr": stats.membership_stderr[p],
                    "exact": float(column[p]),
                }
                for p in spec.vertices()
            ],
        }
    else:
        x = parse_vertex(spec.kind, args.at)
        est = srw_hitting_estimate(spec, x, args.n, args.seed)
        ctx = grid_context(spec)
        body = {
            "start": list(x),
            "walks": est.walks,
            "seed": est.seed,
            "terminals": [
                {
                    "terminal": label,
                    "frequency": frequency,
                    "stderr": est.stderr[t.slot],
                    "exact": float(ctx.K.column_of_inverse(t.vertex)[x]),
                }
                for t, label, frequency in zip(
                    spec.terminals, spec.terminal_labels(), est.terminal_frequencies(spec)
                )
            ],
        }
    _emit(_document(f"sample {args.sampler}", _provenance(spec), **body), None, settings)
    _record(settings, "sample", spec.shape_label(), sampler=args.sampler, n=args.n, seed=args.seed)
    return 0


def _window(text: Optional[str]) -> Optional[tuple[int, int]]:
    if not text:
        return None
    try:
        lo, hi = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"Invalid --window {text!r}; expected LO,HI")
    return lo, hi


def cmd_asym(args: argparse.Namespace, settings: Settings) -> int:
    fmt = getattr(args, "format", "json")
    body: dict = {}
    if args.sweep == "chain":
        result = chain_asymptotics(args.n, _window(args.window))
        df = chain_frame(result)
        body = {"n": result.n, "rate": result.rate, "lambda_plus": result.lambda_plus}
    elif args.sweep == "lt":
        values = [expected_ti_length(n) for n in args.n]
        df = ti_length_frame(args.n, values)
        body = {"slopes": {str(n): ti_length_slope(n) for n in args.n}}
    elif args.sweep == "continuum":
        est = continuum_entry(args.x, args.y, args.tol)
        df = None
        body = {
            "x": args.x,
            "y": args.y,
            "value": est.value,
            "error": est.error,
            "resolution": est.resolution,
        }
    else:
        rows = concentration_profile(args.n, args.c, args.dim, settings.exact_grid_limit)
        df = concentration_frame(rows)
    out = getattr(args, "out", None)
    if df is not None and fmt == "csv":
        _emit_table(df, out, settings)
    else:
        if df is not None:
            body["rows"] = json.loads(render(df, "json"))
        _emit(_document(f"asym {args.sweep}", _provenance(), **body), out, settings)
    _record(settings, "asym", sweep=args.sweep)
    return 0


def cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    results = run_checks(args.suite, args.check)
    passed = all(r.passed for r in results)
    text = _document(
        "verify",
        _provenance(),
        suite=args.suite,
        passed=passed,
        checks=[{k: v for k, v in r.as_dict().items() if k != "seconds"} for r in results],
    )
    _emit(text, args.out, settings)
    _record(settings, "verify", suite=args.suite, passed=passed)
    return 0 if passed else 1


def cmd_export(args: argparse.Namespace, settings: Settings) -> int:
    spec = _spec(args)
    builders = {
        "g1": build_g1,
        "gk": build_superposition,
        "rooted": build_rooted,
        "slotted": build_slotted,
    }
    g = builders[args.graph](spec)
    if args.format == "dot":
        text = export_dot(g)
    else:
        text = json.dumps(graph_document(g), indent=2) + "\n"
    _emit(text, args.out, settings)
    _record(settings, "export", spec.shape_label(), graph=args.graph, format=args.format)
    return 0


_COMMANDS = {
    "count": cmd_count,
    "dist": cmd_dist,
    "sample": cmd_sample,
    "asym": cmd_asym,
    "verify": cmd_verify,
    "export": cmd_export,
}


def _configure_logging(verbose: int, settings: Settings) -> None:
    if verbose >= 2:
        level = logging.DEBUG
    elif verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, str(settings.log_level).upper(), logging.WARNING)
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )
    logging.getLogger("dimerlab").setLevel(level)


def run(argv: Optional[Sequence[str]] = None, settings: Optional[Settings] = None) -> int:
    """Parse ``argv``, run the command and return its exit status."""
    args = build_parser().parse_args(argv)
    settings = settings or load_settings()
    _configure_logging(args.verbose, settings)
    try:
        return _COMMANDS[args.command](args, settings)
    except (DimerlabError, ValueError) as e:
        print(f"dimerlab: error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    """Entry point for the ``dimerlab`` console script."""
    sys.exit(run())


if __name__ == "__main__":
    main()
