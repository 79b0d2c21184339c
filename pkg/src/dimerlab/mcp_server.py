"""MCP server exposing dimerlab's exact counts as tools for LLM agents.

Every tool is read-only and returns JSON-serialisable data. Requires the
``mcp`` optional dependency (install with ``pip install dimerlab[mcp]``).
"""

try:
    from mcp.server.fastmcp import FastMCP
except ImportError:
    raise SystemExit(
        "The 'mcp' package is required for the MCP server.\n"
        "Install it with: pip install dimerlab[mcp]"
    )

from typing import Optional

from .activity_log import log_activity
from .asymptotics import chain_asymptotics, expected_ti_length
from .counts import Normalization, count_one_impurity, count_two_boundary, impurity_distribution
from .models import DimerlabError, build_spec, parse_vertex
from .settings import load_settings
from .verify import run_checks

mcp = FastMCP("dimerlab")

_settings = load_settings()


def _log(action: str, shape: Optional[str] = None, **details) -> None:
    if _settings.activity_log:
        log_activity(action, "mcp", shape, **details)


@mcp.tool()
def count_single_impurity(shape: str, terminal: str, at: str, route: str = "cofactor") -> dict | str:
    """Count matchings of G^(1) whose impurity sits at one vertex.

    Parameters
    ----------
    shape : str
        ``rect:NxM`` or ``chain:N``.
    terminal : str
        Terminal in flag syntax, e.g. ``1,1:W``.
    at : str
        Impurity vertex, e.g. ``2,2``.
    route : str
        ``cofactor``, ``hitting`` or ``grove``.

    Returns
    -------
    dict or str
        The count, or an error message.
    """
    try:
        spec = build_spec(shape, [terminal])
        result = count_one_impurity(spec, parse_vertex(spec.kind, at), route)
    except DimerlabError as e:
        return f"Invalid request: {e}"
    _log("count", spec.shape_label(), route=route, value=result.value)
    return {"count": result.value, "route": result.route}


@mcp.tool()
def count_boundary_pair(
    shape: str, terminals: list[str], a: str, b: str, route: str = "cofactor"
) -> dict | str:
    """Count matchings of G^(2) with boundary impurities at ``a`` and ``b``.

    Returns
    -------
    dict or str
        The count, or an error message.
    """
    try:
        spec = build_spec(shape, terminals, 2)
        result = count_two_boundary(
            spec, parse_vertex(spec.kind, a), parse_vertex(spec.kind, b), route
        )
    except DimerlabError as e:
        return f"Invalid request: {e}"
    _log("count", spec.shape_label(), route=route, value=result.value)
    return {"count": result.value, "route": result.route}


@mcp.tool()
def impurity_distribution_table(
    shape: str, terminal: str, normalization: str = "per-dual"
) -> dict | str:
    """Exact single-impurity distribution over all vertices.

    Returns
    -------
    dict or str
        Weights, probabilities as ``num/den`` strings and the terminal mass.
    """
    try:
        spec = build_spec(shape, [terminal])
        dist = impurity_distribution(spec, Normalization(normalization))
    except (DimerlabError, ValueError) as e:
        return f"Invalid request: {e}"
    _log("dist", spec.shape_label(), normalization=normalization)
    return {
        "det_k": dist.det_k,
        "total": dist.total,
        "terminal_mass": str(dist.terminal_mass),
        "rows": [
            {"vertex": list(p), "weight": w, "probability": str(dist.probabilities[p])}
            for p, w in dist.weights.items()
        ],
    }


@mcp.tool()
def expected_ti_length_tool(n: int) -> dict:
    """Expected TI-component size on the ``n x n`` grid with a corner terminal."""
    _log("asym", sweep="lt", n=n)
    return {"n": n, "expected_lt": expected_ti_length(n)}


@mcp.tool()
def chain_decay(n: int) -> dict | str:
    """Chain weights ``M(j)`` and their fitted geometric rate."""
    try:
        result = chain_asymptotics(n)
    except DimerlabError as e:
        return f"Invalid request: {e}"
    _log("asym", sweep="chain", n=n)
    return {"n": n, "weights": result.weights, "rate": result.rate}


@mcp.tool()
def run_small_verification() -> dict:
    """Run the small self-check suite and report every check."""
    results = run_checks("small")
    passed = all(r.passed for r in results)
    _log("verify", suite="small", passed=passed)
    return {"passed": passed, "checks": [r.as_dict() for r in results]}


def main() -> None:
    """Entry point for the ``dimerlab-mcp`` console script."""
    mcp.run()


if __name__ == "__main__":
    main()
