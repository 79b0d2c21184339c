import math
from fractions import Fraction

import numpy as np
import pytest

from dimerlab.asymptotics import (
    LAMBDA_PLUS,
    SpectralGrid,
    SpectralRangeError,
    chain_asymptotics,
    concentration_profile,
    continuum_entry,
    exact_ti_length,
    expected_ti_length,
    recurrence_weights,
    spectral_entry,
    ti_length_slope,
)
from dimerlab.counts import grid_context
from dimerlab.models import GridSpec


def test_spectral_entry_matches_exact_inverse():
    assert spectral_entry(2, 2, 1, 1) == pytest.approx(7 / 24)
    assert spectral_entry(2, 2, 2, 2) == pytest.approx(1 / 24)
    column = grid_context(GridSpec("rect", 4, 5)).K.column_of_inverse((1, 1))
    for (x, y), value in column.items():
        assert spectral_entry(4, 5, x, y) == pytest.approx(float(value), abs=1e-12)


def test_spectral_column_agrees_with_entries():
    grid = SpectralGrid(3, 4)
    column = grid.column((2, 1))
    assert column.shape == (3, 4)
    assert column[2, 3] == pytest.approx(spectral_entry(3, 4, 3, 4, (2, 1)))
    assert np.all(grid.eigenvalues > 0)


def test_spectral_range_errors():
    with pytest.raises(SpectralRangeError):
        spectral_entry(2, 2, 3, 1)
    with pytest.raises(SpectralRangeError):
        SpectralGrid(0, 3)
    with pytest.raises(SpectralRangeError):
        continuum_entry(0, 1)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 6])
def test_ti_length_spectral_equals_exact(n):
    assert expected_ti_length(n) == pytest.approx(float(exact_ti_length(n)), rel=1e-12)


def test_exact_ti_length_of_square():
    assert exact_ti_length(2) == Fraction(96, 192)
    assert expected_ti_length(3, 2) == pytest.approx(float(exact_ti_length(3, 2)))


def test_ti_length_grows_like_log():
    assert expected_ti_length(64) < expected_ti_length(128)
    assert ti_length_slope(256) == pytest.approx(2 / math.pi, rel=0.1)


def test_continuum_corner_entry():
    est = continuum_entry(1, 1, tol=1e-5, max_resolution=1024)
    assert est.error < 1e-5 or est.resolution == 1024
    assert est.value == pytest.approx(spectral_entry(256, 256, 1, 1), rel=0.01)


def test_recurrence_weights():
    assert recurrence_weights(1) == [1]
    assert recurrence_weights(2) == [4, 1]
    assert recurrence_weights(4) == [56, 15, 4, 1]
    with pytest.raises(SpectralRangeError):
        recurrence_weights(0)


def test_chain_asymptotics():
    result = chain_asymptotics(40)
    assert result.weights == recurrence_weights(40)
    assert result.rate == pytest.approx(1 / LAMBDA_PLUS, rel=1e-6)
    assert all(r == pytest.approx(1 / LAMBDA_PLUS, rel=0.01) for r in result.ratios[5:16])
    assert sum(result.probabilities) < 1
    assert len(result.prefactors) == 40


def test_concentration_profile():
    rows = concentration_profile([4, 8, 16], 0.5)
    assert [r.method for r in rows] == ["exact", "exact", "spectral"]
    assert all(0 <= r.tail <= 1 for r in rows)
    loose = concentration_profile([8], 0.25)[0]
    assert loose.tail >= rows[1].tail
    chain = concentration_profile([10], 0.5, dim=1)
    assert chain[0].method == "exact"


def test_concentration_argument_checks():
    with pytest.raises(ValueError):
        concentration_profile([4], 0)
    with pytest.raises(ValueError):
        concentration_profile([4], 0.5, dim=3)


def test_concentration_tails_decrease():
    rows = concentration_profile([8, 16, 32], 0.25)
    assert [r.method for r in rows] == ["exact", "spectral", "spectral"]
    tails = [r.tail for r in rows]
    assert all(a > b for a, b in zip(tails, tails[1:]))
    line = [r.tail for r in concentration_profile([8, 16, 32, 40], 0.25, dim=1)]
    assert all(a > b for a, b in zip(line, line[1:]))
