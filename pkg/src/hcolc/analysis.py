"""Analyses over compiled programs: symbolic execution, forward
rounding-error bounds, integer range closure traces and the safe
comparison with a margin."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np

from . import dhcol as D
from . import symbolic as S
from .errors import EvalError, UnboundedRange, Unsupported
from .verdict import FactsReport, Verdict

UNIT_ROUNDOFF = Fraction(1, 2**53)
U64_MAX = (1 << 64) - 1

# --- symbolic execution ---------------------------------------------------


def symbolic_memory(m):
    """Replace every stored cell by a fresh variable, numbered in ascending
    (address, offset) order."""
    out, k = {}, 0
    for a in sorted(m):
        out[a] = {}
        for off in sorted(m[a]):
            out[a][off] = S.svar(k)
            k += 1
    return out


def symbolic_exec(p, out_addr=None, out_offset=0, trace=None):
    """Run program `p` over symbolic inputs and return one output cell."""
    from .lowering import program_state

    sigma, m = program_state(p, [[0] * g.size for g in p.globals], [0] * p.i)
    sm = symbolic_memory(m)
    r = D.eval_dshoperator(sigma, p.op, sm, D.estimate_fuel(p.op), D.SYMBOLIC_FHCOL, trace)
    if r is None:
        raise EvalError("Fuel", "fuel exhausted")
    if type(r) is D.Err:
        raise r.error
    addr = len(p.globals) + 1 if out_addr is None else out_addr
    block = r.memory.get(addr, {})
    if out_offset not in block:
        raise EvalError("SparseRead", f"no output at ({addr}, {out_offset})")
    return block[out_offset]


def operator_path(trace):
    return [ev["op"] for ev in trace if "op" in ev]


# --- interval rounding-error bounds ---------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction
    e: Fraction = Fraction(0)

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")
        if self.e < 0:
            raise ValueError("negative error term")

    @property
    def mag(self):
        return max(abs(self.lo), abs(self.hi))

    def to_json(self):
        return {"lo": float(self.lo), "hi": float(self.hi), "err": float(self.e)}


def interval(lo, hi, e=0) -> Interval:
    return Interval(Fraction(lo), Fraction(hi), Fraction(e))


@dataclass
class ErrorBound:
    range: Interval
    abs_error: Fraction
    subterms: list = field(default_factory=list)

    def to_json(self):
        return {"range": self.range.to_json(), "abs_error": float(self.abs_error),
                "subterms": self.subterms}


def interval_error_bound(e: S.SExpr, env) -> ErrorBound:
    """First-order forward error propagation: every rounding operation adds
    `UNIT_ROUNDOFF` times the magnitude of its computed result."""
    memo = {}
    subterms = []

    def go(x):
        key = id(x)
        if key in memo:
            return memo[key]
        op = x.op
        if op == "SVar":
            if x.var not in env:
                raise UnboundedRange(f"no range for SVar {x.var}")
            r = env[x.var]
        elif op == "SConstZero":
            r = interval(0, 0)
        elif op == "SConstOne":
            r = interval(1, 1)
        elif op == "SZLess":
            raise Unsupported("comparisons are analysed with a safety margin")
        elif op == "SAbs":
            a = go(x.args[0])
            if a.lo >= 0:
                lo, hi = a.lo, a.hi
            elif a.hi <= 0:
                lo, hi = -a.hi, -a.lo
            else:
                lo, hi = Fraction(0), max(-a.lo, a.hi)
            r = Interval(lo, hi, a.e)
        else:
            a, b = go(x.args[0]), go(x.args[1])
            if op in ("SMin", "SMax"):
                f = min if op == "SMin" else max
                r = Interval(f(a.lo, b.lo), f(a.hi, b.hi), max(a.e, b.e))
            else:
                if op == "SPlus":
                    lo, hi = a.lo + b.lo, a.hi + b.hi
                    prop = a.e + b.e
                elif op == "SSub":
                    lo, hi = a.lo - b.hi, a.hi - b.lo
                    prop = a.e + b.e
                else:
                    ps = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
                    lo, hi = min(ps), max(ps)
                    prop = a.mag * b.e + b.mag * a.e + a.e * b.e
                mag = max(abs(lo), abs(hi)) + prop
                r = Interval(lo, hi, prop + UNIT_ROUNDOFF * mag)
        memo[key] = r
        if x.args:
            subterms.append({"term": S.render(x)[:80], **r.to_json()})
        return r

    top = go(e)
    return ErrorBound(top, top.e, subterms)


def safety_margin(lhs_err, rhs_err) -> Fraction:
    lhs_err, rhs_err = Fraction(lhs_err), Fraction(rhs_err)
    if lhs_err < 0 or rhs_err < 0:
        raise ValueError("error bounds are non-negative")
    return lhs_err + rhs_err


def safe_zless(a: float, b: float, eps: float) -> float:
    """One iff b - a, computed in binary64, exceeds eps."""
    return 1.0 if (b - a) > eps else 0.0


class _ArrayCarrier:
    """Elementwise carrier over numpy arrays (float64 or exact objects)."""

    def __init__(self, zero, one):
        self.zero, self.one = zero, one

    def plus(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mult(self, a, b):
        return a * b

    def min(self, a, b):
        return np.where(np.asarray(b < a, dtype=bool), b, a)

    def max(self, a, b):
        return np.where(np.asarray(b > a, dtype=bool), b, a)

    def abs(self, a):
        return np.abs(a)

    def zless(self, a, b):
        raise Unsupported("comparison")


_FLOAT_ARRAYS = _ArrayCarrier(np.float64(0.0), np.float64(1.0))
_EXACT_ARRAYS = _ArrayCarrier(gmpy2.mpq(0), gmpy2.mpq(1))


def sample_inputs(ranges, samples, seed):
    """Uniform binary64 draws inside each variable's range."""
    rng = np.random.default_rng(seed)
    return {v: rng.uniform(float(iv.lo), float(iv.hi), samples) for v, iv in sorted(ranges.items())}


def _exact(xs):
    return np.array([gmpy2.mpq(x) for x in xs.tolist()], dtype=object)


def max_observed_error(e: S.SExpr, inputs) -> Fraction:
    """Largest |binary64 - exact| over the sampled input columns."""
    used = S.variables(e)
    fl = S.evaluate(e, {v: inputs[v] for v in used}, _FLOAT_ARRAYS)
    ex = S.evaluate(e, {v: _exact(inputs[v]) for v in used}, _EXACT_ARRAYS)
    fl = np.broadcast_to(np.asarray(fl, dtype=np.float64), (len(next(iter(inputs.values()))),))
    worst = gmpy2.mpq(0)
    for f, x in zip(fl.tolist(), np.broadcast_to(ex, fl.shape).tolist()):
        d = abs(gmpy2.mpq(f) - x)
        if d > worst:
            worst = d
    return Fraction(int(worst.numerator), int(worst.denominator))


def check_bound_by_sampling(e: S.SExpr, ranges, bound, samples=10**6, seed=0,
                            chunk=200_000) -> Verdict:
    worst = Fraction(0)
    done = 0
    k = 0
    while done < samples:
        n = min(chunk, samples - done)
        inputs = sample_inputs(ranges, n, (seed, k))
        worst = max(worst, max_observed_error(e, inputs))
        done += n
        k += 1
    ok = worst <= Fraction(bound)
    return Verdict("Pass" if ok else "Fail", done,
                   {"max_observed": float(worst), "bound": float(bound)})


# --- Gappa-style problem text ---------------------------------------------


def _infix(e, names):
    op = e.op
    if op == "SVar":
        return names.get(e.var, f"v{e.var}")
    if op == "SConstZero":
        return "0.0"
    if op == "SConstOne":
        return "1.0"
    a = [_infix(x, names) for x in e.args]
    sym = {"SPlus": "+", "SSub": "-", "SMult": "*"}.get(op)
    if sym:
        return f"({a[0]} {sym} {a[1]})" if sym != "*" else f"({a[0]}*{a[1]})"
    raise Unsupported(op)


def _rounding_terms(e):
    """Largest subterms made only of + - *; abs and max are exact on floats."""
    if e.op in ("SAbs", "SMax", "SMin"):
        out = []
        for a in e.args:
            out.extend(_rounding_terms(a))
        return out
    return [e] if e.args else []


def gappa_problem(lhs: S.SExpr, rhs: S.SExpr, ranges, names) -> str:
    lines = ["@rnd64 = float<ieee_64, ne>;", ""]
    goals = []
    for side, e in (("lhs", lhs), ("rhs", rhs)):
        for k, t in enumerate(_rounding_terms(e)):
            body = _infix(t, names)
            nm = f"{side}{k}"
            lines.append(f"{nm} = {body};")
            lines.append(f"{nm}64 rnd64 = {body};")
            goals.append(f"|{nm}64 - {nm}| in ?")
    hyps = [f"{names.get(v, f'v{v}')} in [{float(iv.lo)!r}, {float(iv.hi)!r}]"
            for v, iv in sorted(ranges.items())]
    lines += ["", "{", "    " + "\n  /\\ ".join(hyps), "  ->", "    " + "\n  /\\ ".join(goals), "}"]
    return "\n".join(lines) + "\n"


# --- integer range closures -----------------------------------------------


@dataclass(frozen=True)
class Index:
    bound: int

    def __str__(self):
        return f"DSHIndex {self.bound}"


@dataclass(frozen=True)
class OtherVar:
    def __str__(self):
        return "DSHOtherVar"


OTHER = OtherVar()


@dataclass(frozen=True)
class RangeClosure:
    context: tuple
    expr: object

    def render(self):
        ctx = "; ".join(str(c) for c in self.context)
        return f"([{ctx}], {D.render(self.expr)})"


def closure_trace(op, sigma_ranges=()) -> list:
    """Every integer expression the evaluator would compute, with the
    ranges of the variables it may read. No arithmetic is performed."""
    out = []
    _ct(op, tuple(sigma_ranges), out)
    return out


def _ct(op, ctx, out):
    t = type(op)
    if t is D.DSHAssign:
        out.append(RangeClosure(ctx, op.src[1]))
        out.append(RangeClosure(ctx, op.dst[1]))
    elif t is D.DSHIMap:
        _ct_a(op.f, (OTHER, Index(op.n)) + ctx, out)
    elif t is D.DSHBinOp:
        _ct_a(op.f, (OTHER, OTHER, Index(op.n)) + ctx, out)
    elif t is D.DSHMemMap2:
        _ct_a(op.f, (OTHER, OTHER) + ctx, out)
    elif t is D.DSHPower:
        out.append(RangeClosure(ctx, op.src[1]))
        out.append(RangeClosure(ctx, op.dst[1]))
        out.append(RangeClosure(ctx, op.n))
        _ct_a(op.f, (OTHER, OTHER) + ctx, out)
    elif t is D.DSHLoop:
        for k in range(op.n - 1, -1, -1):
            _ct(op.body, (Index(k),) + ctx, out)
    elif t is D.DSHAlloc:
        _ct(op.body, (OTHER,) + ctx, out)
    elif t is D.DSHSeq:
        _ct(op.f, ctx, out)
        _ct(op.g, ctx, out)


def _ct_a(e, ctx, out):
    t = type(e)
    if t is D.ANth:
        out.append(RangeClosure(ctx, e.n))
    elif t is D.ABin:
        _ct_a(e.a, ctx, out)
        _ct_a(e.b, ctx, out)
    elif t is D.AAbs:
        _ct_a(e.a, ctx, out)


def _range(e, ctx, flags, limit=U64_MAX):
    t = type(e)
    if t is D.NConst:
        r = (e.value, e.value)
    elif t is D.NVar:
        c = ctx[e.idx] if e.idx < len(ctx) else None
        if type(c) is not Index:
            flags.append(f"NVar {e.idx} is not a ranged index")
            return (0, 0)
        r = (0, c.bound)
    else:
        (al, ah), (bl, bh) = _range(e.a, ctx, flags, limit), _range(e.b, ctx, flags, limit)
        op = e.op
        if op == "NPlus":
            r = (al + bl, ah + bh)
        elif op == "NMult":
            r = (al * bl, ah * bh)
        elif op == "NMinus":
            if bh > al:
                flags.append("UnderflowPossible")
            r = (max(al - bh, 0), max(ah - bl, 0))
        elif op in ("NDiv", "NMod"):
            if bl == 0:
                flags.append("DivByZeroPossible")
            r = (al // max(bh, 1), ah // max(bl, 1)) if op == "NDiv" else (0, max(bh - 1, 0))
        elif op == "NMin":
            r = (min(al, bl), min(ah, bh))
        else:
            r = (max(al, bl), max(ah, bh))
    if r[1] > limit:
        flags.append("OverflowPossible")
    return r


def check_trace_no_overflow(trace, width=64) -> FactsReport:
    """Interval evaluation of each closure; flags overflow past 2^width - 1
    and subtractions that may go below zero."""
    limit = (1 << width) - 1
    report = FactsReport()
    for k, cl in enumerate(trace):
        flags = []
        lo, hi = _range(cl.expr, cl.context, flags, limit)
        for f in dict.fromkeys(flags):
            report.add(f, closure=k, expr=D.render(cl.expr), range=[lo, hi])
        report.checked += 1
    return report
