import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from speedmeter.constants import CONSTANTS, UNITS, convert_momentum, hz_to_rad_s


def test_codata_2018_values():
    assert CONSTANTS.hbar == 1.054571817e-34
    assert CONSTANTS.k_B == 1.380649e-23
    assert CONSTANTS.G_N == 6.67430e-11
    assert CONSTANTS.c == 299792458.0


def test_constants_are_immutable():
    with pytest.raises(Exception):
        CONSTANTS.hbar = 1.0


def test_kev_factor_definition():
    assert UNITS.kev_per_c_to_si == pytest.approx(1000 * 1.602176634e-19 / 2.99792458e8, rel=1e-15)


def test_convert_zero():
    assert convert_momentum(0.0) == 0.0


def test_convert_ten_kev():
    assert convert_momentum(10.0) == pytest.approx(5.3443e-24, rel=1e-4)


def test_convert_one_kev():
    assert convert_momentum(1.0) == pytest.approx(5.3443e-25, rel=1e-4)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_convert_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        convert_momentum(bad)


def test_convert_rejects_negative():
    with pytest.raises(ValueError):
        convert_momentum(-1.0)


def test_convert_array():
    out = convert_momentum(np.array([1.0, 2.0]))
    assert out.shape == (2,)
    assert out[1] == pytest.approx(2 * out[0], rel=1e-15)


@given(st.floats(0, 1e6), st.floats(0, 1e3))
def test_convert_linear(x, a):
    assert convert_momentum(a * x) == pytest.approx(a * convert_momentum(x), rel=1e-12, abs=1e-300)


@given(st.floats(1e-6, 1e12))
def test_hz_round_trip(f):
    assert hz_to_rad_s(f) / UNITS.hz_to_angular == pytest.approx(f, rel=1e-12)
