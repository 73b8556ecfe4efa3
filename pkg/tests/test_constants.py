from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rampsim import ParameterError, as_fraction, derive_constants


def test_default_slot_grid():
    c = derive_constants(1.5, 4, 4.5, 15)
    assert c.tau == Fraction(31, 15)
    assert c.slot_spacing == 31
    assert c.slot_spacing == c.tau * c.Vf


def test_alternate_slot_grid():
    c = derive_constants(2, 5, 5, 10)
    assert c.tau == 3
    assert c.slot_spacing == 30


def test_floats_convert_exactly():
    c = derive_constants(1.5, 4, 4.5, 15)
    assert c.h == Fraction(3, 2)
    assert c.L == Fraction(9, 2)
    # a decimal literal with no exact binary form still converts exactly
    assert as_fraction(0.2, "x") == Fraction(1, 5)
    assert as_fraction("7/3", "x") == Fraction(7, 3)


def test_float_view_matches():
    c = derive_constants(1.5, 4, 4.5, 15)
    fv = c.float_view()
    assert fv["tau"] == pytest.approx(31 / 15)
    assert fv["slot_spacing"] == 31.0
    assert set(fv) == {"h", "S0", "L", "Vf", "a_min", "a_max", "tau", "slot_spacing"}


@pytest.mark.parametrize(
    "kwargs, field",
    [
        (dict(h=0), "h"),
        (dict(S0=-1), "S0"),
        (dict(L=0), "L"),
        (dict(Vf=0), "Vf"),
        (dict(a_min=0), "a_min"),
        (dict(a_max=-2), "a_max"),
    ],
)
def test_rejects_bad_parameter(kwargs, field):
    base = dict(h=1.5, S0=4, L=4.5, Vf=15)
    base.update(kwargs)
    with pytest.raises(ParameterError, match=field):
        derive_constants(**base)


@pytest.mark.parametrize("bad", [True, None, [1], "3/0", "pi"])
def test_as_fraction_rejects(bad):
    with pytest.raises(ParameterError, match="myfield"):
        as_fraction(bad, "myfield")


@given(st.fractions(min_value=Fraction(1, 100), max_value=100))
def test_roundtrip_rationals(x):
    assert as_fraction(x, "x") == x
    assert as_fraction(str(x), "x") == x


@given(
    h=st.fractions(min_value=Fraction(1, 10), max_value=5),
    pad=st.fractions(min_value=Fraction(1, 10), max_value=20),
    vf=st.fractions(min_value=1, max_value=40),
)
def test_spacing_is_tau_times_speed(h, pad, vf):
    c = derive_constants(h, pad, pad, vf)
    assert c.slot_spacing == c.tau * c.Vf
    assert c.tau > 0
