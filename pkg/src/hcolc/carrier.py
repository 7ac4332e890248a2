"""Numeric carriers shared by every IR.

A carrier bundles the constants and operations of one number system.
Evaluators take a carrier object and work on its raw values (a
`Fraction`, a Python `float`, or an `SExpr`); `CarrierValue` is the
tagged form used at API boundaries where kinds must be checked.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

from . import symbolic as S
from .errors import KindMismatch, RangeError

U64_LIMIT = 1 << 64


class Carrier:
    name = "abstract"
    zero = None
    one = None

    def plus(self, a, b):
        raise NotImplementedError

    def sub(self, a, b):
        raise NotImplementedError

    def mult(self, a, b):
        raise NotImplementedError

    def min(self, a, b):
        raise NotImplementedError

    def max(self, a, b):
        raise NotImplementedError

    def abs(self, a):
        raise NotImplementedError

    def zless(self, a, b):
        raise NotImplementedError

    def from_fraction(self, q: Fraction):
        raise NotImplementedError

    def eq(self, a, b):
        return a == b

    def binop(self, name):
        return getattr(self, _BINOP_ALIASES.get(name, name))

    def __repr__(self):
        return f"<carrier {self.name}>"


_BINOP_ALIASES = {"mul": "mult", "lt": "zless", "minus": "sub", "add": "plus"}


class RationalCarrier(Carrier):
    name = "rational"
    zero = Fraction(0)
    one = Fraction(1)

    def plus(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mult(self, a, b):
        return a * b

    def min(self, a, b):
        return b if b < a else a

    def max(self, a, b):
        return b if b > a else a

    def abs(self, a):
        return abs(a)

    def zless(self, a, b):
        return self.one if a < b else self.zero

    def from_fraction(self, q):
        return Fraction(q)


class Binary64Carrier(Carrier):
    """IEEE-754 binary64; Python floats already round to nearest, ties to even."""

    name = "binary64"
    zero = 0.0
    one = 1.0

    def plus(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mult(self, a, b):
        return a * b

    def min(self, a, b):
        return b if b < a else a

    def max(self, a, b):
        return b if b > a else a

    def abs(self, a):
        return math.fabs(a)

    def zless(self, a, b):
        return 1.0 if a < b else 0.0

    def from_fraction(self, q):
        return float(Fraction(q))

    def eq(self, a, b):
        # bit-level agreement: distinguishes signed zeros
        return a == b and math.copysign(1.0, a) == math.copysign(1.0, b)


class SymbolicCarrier(Carrier):
    """Builds S-expression trees instead of computing."""

    name = "symbolic"
    zero = S.ZERO
    one = S.ONE

    def plus(self, a, b):
        return S.node("SPlus", a, b)

    def sub(self, a, b):
        return S.node("SSub", a, b)

    def mult(self, a, b):
        return S.node("SMult", a, b)

    def min(self, a, b):
        return S.node("SMin", a, b)

    def max(self, a, b):
        return S.node("SMax", a, b)

    def abs(self, a):
        return S.node("SAbs", a)

    def zless(self, a, b):
        return S.node("SZLess", a, b)

    def from_fraction(self, q):
        q = Fraction(q)
        if q == 0:
            return S.ZERO
        if q == 1:
            return S.ONE
        raise KindMismatch(f"symbolic carrier has no literal for {q}")


RATIONAL = RationalCarrier()
BINARY64 = Binary64Carrier()
SYMBOLIC = SymbolicCarrier()
CARRIERS = {c.name: c for c in (RATIONAL, BINARY64, SYMBOLIC)}


@dataclass(frozen=True)
class CarrierValue:
    kind: str
    value: object

    @property
    def carrier(self) -> Carrier:
        return CARRIERS[self.kind]

    def __eq__(self, other):
        if not isinstance(other, CarrierValue) or other.kind != self.kind:
            return NotImplemented
        return self.carrier.eq(self.value, other.value)

    def __hash__(self):
        return hash((self.kind, self.value))

    def __str__(self):
        return format_literal(self)


def rational(p, q=1) -> CarrierValue:
    return CarrierValue("rational", Fraction(p, q))


def binary64(x) -> CarrierValue:
    return CarrierValue("binary64", float(x))


def symbolic(e) -> CarrierValue:
    return CarrierValue("symbolic", e)


def zero(kind: str) -> CarrierValue:
    return CarrierValue(kind, CARRIERS[kind].zero)


def one(kind: str) -> CarrierValue:
    return CarrierValue(kind, CARRIERS[kind].one)


CT_OPS = ("plus", "sub", "mult", "min", "max", "abs", "zless")


def ct_arith(op: str, a: CarrierValue, b: CarrierValue | None = None) -> CarrierValue:
    """Apply one carrier operation to tagged values, checking that kinds agree."""
    if op not in CT_OPS:
        raise ValueError(f"unknown carrier operation {op}")
    c = a.carrier
    if op == "abs":
        if b is not None:
            raise ValueError("abs is unary")
        return CarrierValue(a.kind, c.abs(a.value))
    if b is None:
        raise ValueError(f"{op} is binary")
    if b.kind != a.kind:
        raise KindMismatch(f"{op}: {a.kind} vs {b.kind}")
    return CarrierValue(a.kind, getattr(c, op)(a.value, b.value))


_RATIONAL_RE = re.compile(r"^\s*(-?\d+)\s*(?:/\s*(\d+))?\s*$")


def parse_literal(text: str, kind: str) -> CarrierValue:
    """Read "p/q" for rationals; decimal or hex-float ("0x1.8p1") for doubles."""
    t = text.strip()
    if kind == "rational":
        m = _RATIONAL_RE.match(t)
        if m:
            return rational(int(m.group(1)), int(m.group(2) or 1))
        if "0x" in t.lower():
            return CarrierValue(kind, Fraction(float.fromhex(t)))
        return CarrierValue(kind, Fraction(t))
    if kind == "binary64":
        if "0x" in t.lower():
            return binary64(float.fromhex(t))
        if "/" in t:
            return binary64(float(Fraction(t)))
        return binary64(float(t))
    raise KindMismatch(f"no literal syntax for {kind}")


def format_literal(v: CarrierValue) -> str:
    if v.kind == "rational":
        q = v.value
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    if v.kind == "binary64":
        return repr(v.value)
    return str(v.value)


# --- naturals -------------------------------------------------------------


class NatKind:
    name = "abstract"

    def from_nat(self, n: int) -> int:
        raise NotImplementedError

    def plus(self, a, b):
        raise NotImplementedError

    def minus(self, a, b):
        raise NotImplementedError

    def mult(self, a, b):
        raise NotImplementedError

    def div(self, a, b):
        return a // b

    def mod(self, a, b):
        return a % b

    def min(self, a, b):
        return a if a <= b else b

    def max(self, a, b):
        return a if a >= b else b

    def __repr__(self):
        return f"<nat {self.name}>"


class BigNatKind(NatKind):
    """Unbounded naturals; subtraction truncates at zero."""

    name = "bignat"

    def from_nat(self, n):
        if n < 0:
            raise RangeError(f"{n} is not a natural")
        return n

    def plus(self, a, b):
        return a + b

    def minus(self, a, b):
        return a - b if a > b else 0

    def mult(self, a, b):
        return a * b


class U64Kind(NatKind):
    """64-bit unsigned machine integers; arithmetic wraps modulo 2^64."""

    name = "u64"

    def from_nat(self, n):
        if n < 0 or n >= U64_LIMIT:
            raise RangeError(f"{n} does not fit in 64 bits")
        return n

    def plus(self, a, b):
        return (a + b) % U64_LIMIT

    def minus(self, a, b):
        return (a - b) % U64_LIMIT

    def mult(self, a, b):
        return (a * b) % U64_LIMIT


BIGNAT = BigNatKind()
U64 = U64Kind()
NAT_KINDS = {k.name: k for k in (BIGNAT, U64)}


@dataclass(frozen=True)
class NatValue:
    kind: str
    value: int

    def to_nat(self) -> int:
        return self.value


def nat_from_usize(n: int, kind: str) -> NatValue:
    return NatValue(kind, NAT_KINDS[kind].from_nat(n))
