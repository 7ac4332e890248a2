from fractions import Fraction

import pytest

from hcolc import carrier as C
from hcolc.errors import KindMismatch, RangeError


def test_nat_zero_u64():
    assert C.nat_from_usize(0, "u64") == C.NatValue("u64", 0)


def test_nat_bignat_identity():
    assert C.nat_from_usize(5, "bignat").to_nat() == 5
    assert C.nat_from_usize(2**80, "bignat").to_nat() == 2**80


def test_nat_u64_overflow():
    with pytest.raises(RangeError):
        C.nat_from_usize(2**64, "u64")
    assert C.nat_from_usize(2**64 - 1, "u64").value == 2**64 - 1


def test_u64_arithmetic_wraps_but_stays_in_range():
    u = C.U64
    assert u.plus(2**64 - 1, 1) == 0
    assert u.minus(0, 1) == 2**64 - 1


def test_rational_plus_exact():
    assert C.ct_arith("plus", C.rational(1, 3), C.rational(1, 6)) == C.rational(1, 2)


def test_binary64_zless():
    assert C.ct_arith("zless", C.binary64(2.0), C.binary64(3.0)) == C.binary64(1.0)
    assert C.ct_arith("zless", C.binary64(3.0), C.binary64(2.0)) == C.binary64(0.0)


def test_binary64_rounds():
    s = C.ct_arith("plus", C.binary64(0.1), C.binary64(0.2))
    assert s != C.binary64(0.3)
    assert C.ct_arith("plus", C.rational(1, 10), C.rational(2, 10)) == C.rational(3, 10)


def test_signed_zero_is_distinct():
    assert C.binary64(0.0) != C.binary64(-0.0)


def test_kind_mismatch():
    with pytest.raises(KindMismatch):
        C.ct_arith("plus", C.rational(1), C.binary64(1.0))


def test_abs_is_unary():
    assert C.ct_arith("abs", C.rational(-3, 2)) == C.rational(3, 2)
    with pytest.raises(ValueError):
        C.ct_arith("abs", C.rational(1), C.rational(1))


def test_min_max():
    a, b = C.rational(1, 3), C.rational(1, 2)
    assert C.ct_arith("min", a, b) == a
    assert C.ct_arith("max", a, b) == b


@pytest.mark.parametrize("text,kind,value", [
    ("3/4", "rational", Fraction(3, 4)),
    ("-2", "rational", Fraction(-2)),
    ("0x1.8p1", "binary64", 3.0),
    ("0.5", "binary64", 0.5),
])
def test_literals(text, kind, value):
    v = C.parse_literal(text, kind)
    assert v.value == value
    assert C.parse_literal(C.format_literal(v), kind) == v
