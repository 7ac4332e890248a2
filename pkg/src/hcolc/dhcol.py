"""Imperative deep-embedded language over a block/offset memory.

One AST serves both instantiations: `RHCOL` (exact rationals, unbounded
naturals) and `FHCOL` (binary64, 64-bit unsigned). Variables are de
Bruijn indices into an evaluation context of ``(DSHVal, protected)``
pairs; index 0 is the most recently pushed entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .carrier import BIGNAT, BINARY64, RATIONAL, SYMBOLIC, U64, NatKind
from .errors import EvalError, NatOverflow, RangeError, StructureMismatch, UnknownConstant
from .verdict import Verdict

# --- expressions ----------------------------------------------------------


class DExpr:
    def args(self):
        return tuple(getattr(self, k) for k in self.__dataclass_fields__)

    @property
    def ctor(self):
        return type(self).__name__


@dataclass(frozen=True)
class NVar(DExpr):
    idx: int


@dataclass(frozen=True)
class NConst(DExpr):
    value: int


N_OPS = ("NDiv", "NMod", "NPlus", "NMinus", "NMult", "NMin", "NMax")


@dataclass(frozen=True)
class NBin(DExpr):
    op: str
    a: DExpr
    b: DExpr

    def args(self):
        return (self.a, self.b)

    @property
    def ctor(self):
        return self.op


@dataclass(frozen=True)
class PVar(DExpr):
    idx: int


@dataclass(frozen=True)
class MPtrDeref(DExpr):
    p: PVar


@dataclass(frozen=True)
class MConst(DExpr):
    block: tuple  # sorted (offset, value) pairs
    size: int

    def args(self):
        return ("{" + ", ".join(f"{k}:{v}" for k, v in self.block) + "}", self.size)


@dataclass(frozen=True)
class AVar(DExpr):
    idx: int


@dataclass(frozen=True)
class AConst(DExpr):
    value: object


@dataclass(frozen=True)
class ANth(DExpr):
    m: DExpr
    n: DExpr


@dataclass(frozen=True)
class AAbs(DExpr):
    a: DExpr


A_OPS = ("APlus", "AMinus", "AMult", "AMin", "AMax", "AZless")


@dataclass(frozen=True)
class ABin(DExpr):
    op: str
    a: DExpr
    b: DExpr

    def args(self):
        return (self.a, self.b)

    @property
    def ctor(self):
        return self.op


def _nbin(op):
    return lambda a, b: NBin(op, a, b)


def _abin(op):
    return lambda a, b: ABin(op, a, b)


NDiv, NMod, NPlus, NMinus, NMult, NMin, NMax = (_nbin(o) for o in N_OPS)
APlus, AMinus, AMult, AMin, AMax, AZless = (_abin(o) for o in A_OPS)


# --- operators ------------------------------------------------------------


class DSHOperator(DExpr):
    pass


@dataclass(frozen=True)
class DSHNop(DSHOperator):
    pass


@dataclass(frozen=True)
class DSHAssign(DSHOperator):
    src: tuple  # (PExpr, NExpr)
    dst: tuple


@dataclass(frozen=True)
class DSHIMap(DSHOperator):
    n: int
    x: PVar
    y: PVar
    f: DExpr


@dataclass(frozen=True)
class DSHBinOp(DSHOperator):
    n: int
    x: PVar
    y: PVar
    f: DExpr


@dataclass(frozen=True)
class DSHMemMap2(DSHOperator):
    n: int
    x0: PVar
    x1: PVar
    y: PVar
    f: DExpr


@dataclass(frozen=True)
class DSHPower(DSHOperator):
    n: DExpr
    src: tuple
    dst: tuple
    f: DExpr
    initial: object


@dataclass(frozen=True)
class DSHLoop(DSHOperator):
    n: int
    body: DSHOperator


@dataclass(frozen=True)
class DSHAlloc(DSHOperator):
    size: int
    body: DSHOperator


@dataclass(frozen=True)
class DSHMemInit(DSHOperator):
    y: PVar
    value: object


@dataclass(frozen=True)
class DSHSeq(DSHOperator):
    f: DSHOperator
    g: DSHOperator


def seq(*ops) -> DSHOperator:
    """Right-nested sequence; empty is DSHNop."""
    if not ops:
        return DSHNop()
    out = ops[-1]
    for op in reversed(ops[:-1]):
        out = DSHSeq(op, out)
    return out


def render(e) -> str:
    """Constructor syntax, e.g. ``NMult (NConst 3) (NVar 2)``."""
    if isinstance(e, DExpr):
        parts = [e.ctor] + [_arg(a) for a in e.args()]
        return " ".join(parts)
    return _literal(e)


def _arg(a):
    if isinstance(a, DExpr):
        inner = render(a)
        return f"({inner})" if " " in inner else inner
    if isinstance(a, tuple) and len(a) == 2 and isinstance(a[0], DExpr):
        return f"({_arg(a[0])}, {_arg(a[1])})"
    return _literal(a)


def _literal(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --- values and contexts --------------------------------------------------


@dataclass(frozen=True)
class NatVal:
    value: int


@dataclass(frozen=True)
class CTypeVal:
    value: object


@dataclass(frozen=True)
class PtrVal:
    addr: int
    size: int


def entry(v, protected=False):
    return (v, protected)


@dataclass(frozen=True)
class Lang:
    """A carrier / natural-number instantiation of the language."""

    name: str
    carrier: object
    nat: NatKind


RHCOL = Lang("rhcol", RATIONAL, BIGNAT)
FHCOL = Lang("fhcol", BINARY64, U64)
SYMBOLIC_FHCOL = Lang("symbolic", SYMBOLIC, U64)


@dataclass(frozen=True)
class Ok:
    memory: dict


@dataclass(frozen=True)
class Err:
    error: EvalError


# --- expression evaluation ------------------------------------------------


def _lookup(sigma, i, what):
    if i < 0 or i >= len(sigma):
        raise EvalError("LookupError", f"error looking up {what}")
    return sigma[i]


def eval_pexpr(p, sigma, m):
    v, _ = _lookup(sigma, p.idx, "PVar")
    if type(v) is not PtrVal:
        raise EvalError("TypeError", "invalid PVar type")
    return v.addr, v.size


def eval_mexpr(e, sigma, m):
    if type(e) is MConst:
        return dict(e.block), e.size
    if type(e) is MPtrDeref:
        addr, size = eval_pexpr(e.p, sigma, m)
        if addr not in m:
            raise EvalError("MemError", "MPtrDeref lookup failed")
        return m[addr], size
    raise EvalError("TypeError", f"not a memory expression: {render(e)}")


def eval_nexpr(e, sigma, m, lang: Lang):
    t = type(e)
    if t is NConst:
        return e.value
    if t is NVar:
        v, _ = _lookup(sigma, e.idx, "NVar")
        if type(v) is not NatVal:
            raise EvalError("TypeError", "invalid NVar type")
        return v.value
    if t is NBin:
        k = lang.nat
        if e.op in ("NDiv", "NMod"):
            b = eval_nexpr(e.b, sigma, m, lang)
            if b == 0:
                raise EvalError("DivByZero", "Division by 0" if e.op == "NDiv" else "Mod by 0")
            a = eval_nexpr(e.a, sigma, m, lang)
            return k.div(a, b) if e.op == "NDiv" else k.mod(a, b)
        a = eval_nexpr(e.a, sigma, m, lang)
        b = eval_nexpr(e.b, sigma, m, lang)
        return {"NPlus": k.plus, "NMinus": k.minus, "NMult": k.mult,
                "NMin": k.min, "NMax": k.max}[e.op](a, b)
    raise EvalError("TypeError", f"not a nat expression: {render(e)}")


_ABIN = {"APlus": "plus", "AMinus": "sub", "AMult": "mult", "AMin": "min", "AMax": "max",
         "AZless": "zless"}


def _const(lang, v):
    # symbolic runs reuse float/rational programs; literals become leaves
    return lang.carrier.from_fraction(v) if lang.carrier is SYMBOLIC else v


def eval_aexpr(e, sigma, m, lang: Lang):
    t = type(e)
    c = lang.carrier
    if t is AVar:
        v, _ = _lookup(sigma, e.idx, "AVar")
        if type(v) is not CTypeVal:
            raise EvalError("TypeError", "invalid AVar type")
        return v.value
    if t is AConst:
        return _const(lang, e.value)
    if t is ABin:
        a = eval_aexpr(e.a, sigma, m, lang)
        b = eval_aexpr(e.b, sigma, m, lang)
        return getattr(c, _ABIN[e.op])(a, b)
    if t is AAbs:
        return c.abs(eval_aexpr(e.a, sigma, m, lang))
    if t is ANth:
        i = eval_nexpr(e.n, sigma, m, lang)
        block, size = eval_mexpr(e.m, sigma, m)
        if i >= size:
            raise EvalError("IndexOOB", "ANth index out of bounds")
        if i not in block:
            raise EvalError("SparseRead", "ANth not in memory")
        return _const(lang, block[i]) if type(e.m) is MConst else block[i]
    raise EvalError("TypeError", f"not a carrier expression: {render(e)}")


# --- operator evaluation --------------------------------------------------


def _block(m, addr):
    if addr not in m:
        raise EvalError("MemError", f"no block at address {addr}")
    return m[addr]


def _target(p, sigma, m):
    """Resolve a write destination; protected pointers refuse writes."""
    v, protected = _lookup(sigma, p.idx, "PVar")
    if type(v) is not PtrVal:
        raise EvalError("TypeError", "invalid PVar type")
    if protected:
        raise EvalError("Protected", f"write through protected pointer PVar {p.idx}")
    return v.addr, v.size, dict(_block(m, v.addr))


def _cell(block, k, what):
    if k not in block:
        raise EvalError("SparseRead", f"{what}: no value at offset {k}")
    return block[k]


def _from_nat(lang, n):
    try:
        return lang.nat.from_nat(n)
    except RangeError as err:
        raise EvalError("RangeError", str(err)) from None


def _store(m, addr, block):
    out = dict(m)
    out[addr] = block
    return out


def eval_dshoperator(sigma, op, m, fuel, lang: Lang = RHCOL, trace=None):
    """Big-step evaluation. Returns None when fuel runs out, else Ok or Err."""
    try:
        r = _eval_op(tuple(sigma), op, m, fuel, lang, trace)
    except EvalError as err:
        return Err(err)
    return None if r is None else Ok(r)


def _eval_op(sigma, op, m, fuel, lang, trace):
    if fuel <= 0:
        return None
    t = type(op)
    c = lang.carrier
    if trace is not None:
        trace.append({"op": t.__name__})
    if t is DSHNop:
        return m
    if t is DSHSeq:
        m1 = _eval_op(sigma, op.f, m, fuel - 1, lang, trace)
        if m1 is None:
            return None
        if trace is not None:
            trace.append({"after": render(op.f)[:60], "memory": _memory_json(m1)})
        return _eval_op(sigma, op.g, m1, fuel - 1, lang, trace)
    if t is DSHAssign:
        (xp, src), (yp, dst) = op.src, op.dst
        xaddr, _ = eval_pexpr(xp, sigma, m)
        yaddr, ysize, yb = _target(yp, sigma, m)
        xb = _block(m, xaddr)
        s = eval_nexpr(src, sigma, m, lang)
        d = eval_nexpr(dst, sigma, m, lang)
        if d >= ysize:
            raise EvalError("IndexOOB", "Assign destination out of bounds")
        yb[d] = _cell(xb, s, "Assign")
        return _store(m, yaddr, yb)
    if t is DSHIMap:
        xaddr, xsize = eval_pexpr(op.x, sigma, m)
        yaddr, _, yb = _target(op.y, sigma, m)
        xb = _block(m, xaddr)
        n = _from_nat(lang, op.n)
        if n > xsize:
            raise EvalError("IndexOOB", "IMap size exceeds input block")
        for k in range(n - 1, -1, -1):
            a = _cell(xb, k, "IMap")
            s2 = (entry(CTypeVal(a)), entry(NatVal(k))) + sigma
            yb[k] = eval_aexpr(op.f, s2, m, lang)
        return _store(m, yaddr, yb)
    if t is DSHBinOp:
        xaddr, _ = eval_pexpr(op.x, sigma, m)
        yaddr, ysize, yb = _target(op.y, sigma, m)
        xb = _block(m, xaddr)
        n = _from_nat(lang, op.n)
        if n > ysize:
            raise EvalError("IndexOOB", "BinOp size exceeds output block")
        for k in range(n - 1, -1, -1):
            a = _cell(xb, k, "BinOp")
            b = _cell(xb, k + n, "BinOp")
            s2 = (entry(CTypeVal(b)), entry(CTypeVal(a)), entry(NatVal(k))) + sigma
            yb[k] = eval_aexpr(op.f, s2, m, lang)
        return _store(m, yaddr, yb)
    if t is DSHMemMap2:
        a0, _ = eval_pexpr(op.x0, sigma, m)
        a1, _ = eval_pexpr(op.x1, sigma, m)
        x0b, x1b = _block(m, a0), _block(m, a1)
        yaddr, ysize, yb = _target(op.y, sigma, m)
        n = _from_nat(lang, op.n)
        if n > ysize:
            raise EvalError("IndexOOB", "MemMap2 size exceeds output block")
        for k in range(n - 1, -1, -1):
            a = _cell(x0b, k, "MemMap2")
            b = _cell(x1b, k, "MemMap2")
            s2 = (entry(CTypeVal(b)), entry(CTypeVal(a))) + sigma
            yb[k] = eval_aexpr(op.f, s2, m, lang)
        return _store(m, yaddr, yb)
    if t is DSHPower:
        (xp, src), (yp, dst) = op.src, op.dst
        xaddr, _ = eval_pexpr(xp, sigma, m)
        yaddr, ysize, yb = _target(yp, sigma, m)
        xb = _block(m, xaddr)
        s = eval_nexpr(src, sigma, m, lang)
        d = eval_nexpr(dst, sigma, m, lang)
        if d >= ysize:
            raise EvalError("IndexOOB", "Power destination out of bounds")
        n = eval_nexpr(op.n, sigma, m, lang)
        yb[d] = _const(lang, op.initial)
        for _ in range(n):
            a = _cell(xb, s, "Power")
            b = yb[d]
            s2 = (entry(CTypeVal(b)), entry(CTypeVal(a))) + sigma
            yb[d] = eval_aexpr(op.f, s2, m, lang)
        return _store(m, yaddr, yb)
    if t is DSHLoop:
        n = op.n
        if fuel - n < 1:
            return None
        for k in range(n):
            _from_nat(lang, k)
            m = _eval_op((entry(NatVal(k)),) + sigma, op.body, m, fuel - n + k, lang, trace)
            if m is None:
                return None
        return m
    if t is DSHAlloc:
        size = _from_nat(lang, op.size)
        tmp = next_free_address(m)
        m1 = dict(m)
        m1[tmp] = {}
        r = _eval_op((entry(PtrVal(tmp, size)),) + sigma, op.body, m1, fuel - 1, lang, trace)
        if r is None:
            return None
        r = dict(r)
        r.pop(tmp, None)
        return r
    if t is DSHMemInit:
        yaddr, ysize, yb = _target(op.y, sigma, m)
        v = _const(lang, op.value)
        for k in range(ysize):
            yb[k] = v
        return _store(m, yaddr, yb)
    raise EvalError("TypeError", f"not an operator: {op!r}")


def next_free_address(m) -> int:
    return max(m) + 1 if m else 0


def estimate_fuel(op) -> int:
    t = type(op)
    if t is DSHSeq:
        return 1 + max(estimate_fuel(op.f), estimate_fuel(op.g))
    if t is DSHAlloc:
        return 1 + estimate_fuel(op.body)
    if t is DSHLoop:
        return 1 + op.n + estimate_fuel(op.body)
    return 1


def _memory_json(m):
    return {str(a): {str(k): _literal(v) for k, v in sorted(b.items())} for a, b in sorted(m.items())}


def walk(op):
    yield op
    t = type(op)
    if t is DSHSeq:
        yield from walk(op.f)
        yield from walk(op.g)
    elif t in (DSHLoop, DSHAlloc):
        yield from walk(op.body)


# --- RHCOL -> FHCOL -------------------------------------------------------

DEFAULT_CONSTANTS = {Fraction(0): 0.0, Fraction(1): 1.0}


def translate_rhcol_to_fhcol(op, constants=None):
    """Structure-preserving carrier/natural translation. Only constants
    listed in `constants` cross over; naturals must fit in 64 bits."""
    table = DEFAULT_CONSTANTS if constants is None else constants
    return _tr(op, table)


def _tr_const(v, table):
    q = Fraction(v)
    if q not in table:
        raise UnknownConstant(v)
    return table[q]


def _tr_nat(n):
    try:
        return U64.from_nat(n)
    except RangeError:
        raise NatOverflow(n) from None


def _tr(e, table):
    t = type(e)
    if t in (NVar, PVar, AVar, DSHNop):
        return e
    if t is NConst:
        return NConst(_tr_nat(e.value))
    if t is NBin or t is ABin:
        return t(e.op, _tr(e.a, table), _tr(e.b, table))
    if t is MPtrDeref:
        return e
    if t is MConst:
        return MConst(tuple((_tr_nat(k), _tr_const(v, table)) for k, v in e.block), _tr_nat(e.size))
    if t is AConst:
        return AConst(_tr_const(e.value, table))
    if t is ANth:
        return ANth(_tr(e.m, table), _tr(e.n, table))
    if t is AAbs:
        return AAbs(_tr(e.a, table))
    if t is DSHAssign:
        return DSHAssign((e.src[0], _tr(e.src[1], table)), (e.dst[0], _tr(e.dst[1], table)))
    if t is DSHIMap or t is DSHBinOp:
        return t(_tr_nat(e.n), e.x, e.y, _tr(e.f, table))
    if t is DSHMemMap2:
        return DSHMemMap2(_tr_nat(e.n), e.x0, e.x1, e.y, _tr(e.f, table))
    if t is DSHPower:
        return DSHPower(_tr(e.n, table), (e.src[0], _tr(e.src[1], table)),
                        (e.dst[0], _tr(e.dst[1], table)), _tr(e.f, table),
                        _tr_const(e.initial, table))
    if t is DSHLoop:
        return DSHLoop(_tr_nat(e.n), _tr(e.body, table))
    if t is DSHAlloc:
        return DSHAlloc(_tr_nat(e.size), _tr(e.body, table))
    if t is DSHMemInit:
        return DSHMemInit(e.y, _tr_const(e.value, table))
    if t is DSHSeq:
        return DSHSeq(_tr(e.f, table), _tr(e.g, table))
    raise TypeError(f"cannot translate {e!r}")


def rational_context_to_float(sigma):
    out = []
    for v, p in sigma:
        if type(v) is CTypeVal:
            v = CTypeVal(float(v.value))
        out.append((v, p))
    return tuple(out)


def rational_memory_to_float(m):
    return {a: {k: float(v) for k, v in b.items()} for a, b in m.items()}


def float_memory_to_rational(m):
    return {a: {k: Fraction(v) for k, v in b.items()} for a, b in m.items()}


@dataclass
class RFReport:
    max_deviation: Fraction = Fraction(0)
    cells: int = 0
    runs: int = 0
    worst: dict = field(default_factory=dict)


def check_rf_equiv(r_op, f_op, sigma_pairs, m_pairs, heq_tolerance, cells=None) -> Verdict:
    """Run both instantiations on paired inputs; pass when every compared
    cell deviates by at most `heq_tolerance`. `cells`, if given, restricts
    the comparison to (address, offset) pairs."""
    tol = Fraction(heq_tolerance)
    rep = RFReport()
    fuel = max(estimate_fuel(r_op), estimate_fuel(f_op))
    for (sr, sf), (mr, mf) in zip(sigma_pairs, m_pairs):
        a = eval_dshoperator(sr, r_op, mr, fuel, RHCOL)
        b = eval_dshoperator(sf, f_op, mf, fuel, FHCOL)
        if type(a) is not type(b):
            raise StructureMismatch(f"rational run gave {type(a).__name__}, float run {type(b).__name__}")
        rep.runs += 1
        if type(a) is not Ok:
            continue
        ra, fb = a.memory, b.memory
        keys = cells if cells is not None else [(ad, k) for ad in sorted(ra) for k in sorted(ra[ad])]
        for ad, k in keys:
            if (ad in ra) != (ad in fb) or (k in ra.get(ad, {})) != (k in fb.get(ad, {})):
                raise StructureMismatch(f"cell ({ad},{k}) present in only one result")
            if k not in ra.get(ad, {}):
                continue
            fv = fb[ad][k]
            if not math.isfinite(fv):
                dev = None
            else:
                dev = abs(Fraction(fv) - ra[ad][k])
            rep.cells += 1
            if dev is None or dev > rep.max_deviation:
                rep.max_deviation = dev if dev is not None else Fraction(10) ** 300
                rep.worst = {"address": ad, "offset": k, "rational": str(ra[ad][k]), "float": fv.hex()}
    ok = rep.max_deviation <= tol
    return Verdict("Pass" if ok else "Fail", rep.runs,
                   {"max_deviation": float(rep.max_deviation), "tolerance": float(tol),
                    "cells": rep.cells, "worst": rep.worst})
