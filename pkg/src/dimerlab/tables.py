"""Tabular output for distributions, chain sweeps and asymptotic tables.

Exact rationals are written as integer ``num``/``den`` column pairs so CSV
files never lose precision; rows follow row-major vertex order.
"""

import json
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from .asymptotics import ChainAsymptotics, ConcentrationRow
from .counts import Distribution

FORMATS = ("json", "csv")


def distribution_frame(dist: Distribution) -> pd.DataFrame:
    """One row per vertex: weight ``M(x)`` and ``P(I1 = x)`` as num/den."""
    rows = []
    for (x, y), w in dist.weights.items():
        p = dist.probabilities[(x, y)]
        rows.append(
            {"x": x, "y": y, "weight": w, "num": p.numerator, "den": p.denominator}
        )
    return pd.DataFrame(rows, columns=["x", "y", "weight", "num", "den"])


def chain_frame(result: ChainAsymptotics) -> pd.DataFrame:
    ratios = result.ratios + [float("nan")]
    return pd.DataFrame(
        {
            "j": range(1, result.n + 1),
            "weight": result.weights,
            "num": [p.numerator for p in result.probabilities],
            "den": [p.denominator for p in result.probabilities],
            "ratio": ratios,
            "prefactor": result.prefactors,
        }
    )


def ti_length_frame(ns: Sequence[int], values: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame({"n": list(ns), "expected_lt": list(values)})


def concentration_frame(rows: Sequence[ConcentrationRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {"n": r.n, "c": r.c, "tail": r.tail, "bound": r.bound, "method": r.method}
            for r in rows
        ]
    )


def render(df: pd.DataFrame, fmt: str) -> str:
    """Render a table as CSV text or a JSON list of records.

    Raises
    ------
    ValueError
        On an unknown format.
    """
    if fmt == "csv":
        return df.to_csv(index=False)
    if fmt == "json":
        records = json.loads(df.to_json(orient="records"))
        return json.dumps(records, indent=2) + "\n"
    raise ValueError(f"Unknown table format {fmt!r}; expected one of {FORMATS}")


def write_output(text: str, path: Path) -> Path:
    """Write ``text`` to ``path``, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_table(df: pd.DataFrame, fmt: str, path: Optional[Path] = None) -> str:
    """Render ``df`` and write it to ``path`` when given; returns the text."""
    text = render(df, fmt)
    if path is not None:
        write_output(text, path)
    return text
