import json
from fractions import Fraction

import pandas as pd
import pytest

from dimerlab.asymptotics import chain_asymptotics, concentration_profile
from dimerlab.counts import impurity_distribution
from dimerlab.tables import (
    chain_frame,
    concentration_frame,
    distribution_frame,
    render,
    ti_length_frame,
    write_output,
    write_table,
)


def test_distribution_frame(square2):
    df = distribution_frame(impurity_distribution(square2))
    assert list(df.columns) == ["x", "y", "weight", "num", "den"]
    assert df["weight"].tolist() == [56, 16, 16, 8]
    assert (df.loc[0, "num"], df.loc[0, "den"]) == (7, 24)


def test_csv_keeps_exact_probabilities(square2, tmp_path):
    dist = impurity_distribution(square2)
    path = tmp_path / "tables" / "dist.csv"
    text = write_table(distribution_frame(dist), "csv", path)
    assert path.read_text() == text
    df = pd.read_csv(path)
    read = {(int(r.x), int(r.y)): Fraction(int(r.num), int(r.den)) for r in df.itertuples()}
    assert read == dist.probabilities


def test_write_output_creates_directories(tmp_path):
    path = write_output("x\n", tmp_path / "a" / "b.txt")
    assert path.read_text() == "x\n"



def test_render_json_records():
    records = json.loads(render(ti_length_frame([2, 3], [0.5, 0.75]), "json"))
    assert records == [{"n": 2, "expected_lt": 0.5}, {"n": 3, "expected_lt": 0.75}]
    with pytest.raises(ValueError, match="Unknown table format"):
        render(ti_length_frame([2], [0.5]), "xml")


def test_chain_and_concentration_frames():
    df = chain_frame(chain_asymptotics(6))
    assert df["j"].tolist() == list(range(1, 7))
    assert df["ratio"].isna().tolist() == [False] * 5 + [True]
    rows = concentration_frame(concentration_profile([4], 0.5))
    assert rows.loc[0, "method"] == "exact"
