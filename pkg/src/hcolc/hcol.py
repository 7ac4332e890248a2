"""Dense-vector operator language: AST, evaluator, breakdown rules and the
extensional-equivalence checker used to validate rewrites."""

from __future__ import annotations

import random
from dataclasses import dataclass, fields, replace
from fractions import Fraction

from . import scalar as F
from .carrier import RATIONAL
from .errors import DimMismatch, IllTyped, RewriteError
from .verdict import counterexample, equal


class HExpr:
    """Base class of HCOL operators."""

    children = ()

    def child_list(self):
        return [getattr(self, c) for c in self.children]

    def with_children(self, new):
        return replace(self, **dict(zip(self.children, new)))


@dataclass(frozen=True)
class HPointwise(HExpr):
    n: int
    f: F.Fn  # fun i x


@dataclass(frozen=True)
class HAtomic(HExpr):
    f: F.Fn  # fun x


@dataclass(frozen=True)
class HScalarProd(HExpr):
    n: int


@dataclass(frozen=True)
class HBinOp(HExpr):
    n: int
    f: F.Fn  # fun i a b


@dataclass(frozen=True)
class HReduction(HExpr):
    n: int
    f: F.Fn  # fun a b
    z: Fraction


@dataclass(frozen=True)
class HEvalPolynomial(HExpr):
    m: int  # number of coefficients
    a: object  # VConst or VVar


@dataclass(frozen=True)
class HPrepend(HExpr):
    m: int
    n: int
    a: object


@dataclass(frozen=True)
class HAppend(HExpr):
    m: int
    n: int
    a: object


@dataclass(frozen=True)
class HMonomialEnumerator(HExpr):
    n: int


@dataclass(frozen=True)
class HInductor(HExpr):
    n: int
    f: F.Fn  # fun acc x
    z: Fraction


@dataclass(frozen=True)
class HInduction(HExpr):
    n: int
    f: F.Fn
    z: Fraction


@dataclass(frozen=True)
class HInfinityNorm(HExpr):
    n: int


@dataclass(frozen=True)
class HChebyshevDistance(HExpr):
    n: int


@dataclass(frozen=True)
class HVMinus(HExpr):
    n: int


@dataclass(frozen=True)
class HCross(HExpr):
    f: HExpr
    g: HExpr
    children = ("f", "g")


@dataclass(frozen=True)
class HStack(HExpr):
    f: HExpr
    g: HExpr
    children = ("f", "g")


@dataclass(frozen=True)
class HCompose(HExpr):
    """f after g."""

    f: HExpr
    g: HExpr
    children = ("f", "g")


@dataclass(frozen=True)
class HTLess(HExpr):
    f: HExpr
    g: HExpr
    children = ("f", "g")


ALL_OPERATORS = (
    HPointwise, HAtomic, HScalarProd, HBinOp, HReduction, HEvalPolynomial,
    HPrepend, HAppend, HMonomialEnumerator, HInductor, HInduction,
    HInfinityNorm, HChebyshevDistance, HVMinus, HCross, HStack, HCompose, HTLess,
)


def _vec_len(a, m):
    if isinstance(a, F.VConst) and len(a.values) != m:
        raise IllTyped(f"constant vector has {len(a.values)} entries, expected {m}")


def dims(e: HExpr) -> tuple:
    t = type(e)
    if t is HPointwise:
        return (e.n, e.n)
    if t is HAtomic:
        return (1, 1)
    if t is HScalarProd:
        return (2 * e.n, 1)
    if t is HBinOp:
        return (2 * e.n, e.n)
    if t is HReduction:
        return (e.n, 1)
    if t is HEvalPolynomial:
        if e.m < 1:
            raise IllTyped("polynomial needs at least one coefficient")
        _vec_len(e.a, e.m)
        return (1, 1)
    if t is HPrepend or t is HAppend:
        _vec_len(e.a, e.m)
        return (e.n, e.m + e.n)
    if t is HMonomialEnumerator:
        return (1, e.n + 1)
    if t is HInductor:
        return (1, 1)
    if t is HInduction:
        return (1, e.n)
    if t is HInfinityNorm:
        return (e.n, 1)
    if t is HChebyshevDistance:
        return (2 * e.n, 1)
    if t is HVMinus:
        return (2 * e.n, e.n)
    if t is HCross:
        (m1, n1), (m2, n2) = dims(e.f), dims(e.g)
        return (m1 + m2, n1 + n2)
    if t is HStack:
        (m1, n1), (m2, n2) = dims(e.f), dims(e.g)
        if m1 != m2:
            raise IllTyped(f"stack members take {m1} and {m2} inputs")
        return (m1, n1 + n2)
    if t is HCompose:
        (tf, o), (i, tg) = dims(e.f), dims(e.g)
        if tf != tg:
            raise IllTyped(f"compose: inner produces {tg}, outer expects {tf}")
        return (i, o)
    if t is HTLess:
        (m1, n1), (m2, n2) = dims(e.f), dims(e.g)
        if n1 != n2:
            raise IllTyped(f"tless members produce {n1} and {n2} outputs")
        return (m1 + m2, n1)
    raise IllTyped(f"not an HCOL operator: {e!r}")


def _right_fold(c, f, xs, z, env):
    r = z
    for v in reversed(xs):
        r = F.apply(f, (v, r), env, c)
    return r


def _monomials(c, x, n):
    out = [c.one]
    for _ in range(n):
        out.append(c.mult(out[-1], x))
    return out


def _dot(c, xs, ys):
    # right fold of plus over pointwise products, initial zero
    r = c.zero
    for a, b in zip(reversed(xs), reversed(ys)):
        r = c.plus(c.mult(a, b), r)
    return r


def eval_hcol(e: HExpr, x, carrier=RATIONAL, env=()):
    """Evaluate `e` on the dense vector `x` (raw carrier values).

    `env` holds global vectors, index 0 first.
    """
    i, _ = dims(e)
    if len(x) != i:
        raise DimMismatch(f"{type(e).__name__} expects {i} inputs, got {len(x)}")
    return _eval(e, list(x), carrier, tuple(env))


def _eval(e, x, c, env):
    t = type(e)
    if t is HPointwise:
        return [F.apply(e.f, (k, v), env, c) for k, v in enumerate(x)]
    if t is HAtomic:
        return [F.apply(e.f, (x[0],), env, c)]
    if t is HScalarProd:
        return [_dot(c, x[: e.n], x[e.n:])]
    if t is HBinOp:
        n = e.n
        return [F.apply(e.f, (k, x[k], x[n + k]), env, c) for k in range(n)]
    if t is HReduction:
        return [_right_fold(c, e.f, x, c.from_fraction(e.z), env)]
    if t is HEvalPolynomial:
        a = F.eval_vec(e.a, env, c)
        return [_dot(c, a, _monomials(c, x[0], e.m - 1))]
    if t is HPrepend:
        return list(F.eval_vec(e.a, env, c)) + x
    if t is HAppend:
        return x + list(F.eval_vec(e.a, env, c))
    if t is HMonomialEnumerator:
        return _monomials(c, x[0], e.n)
    if t is HInductor:
        r = c.from_fraction(e.z)
        for _ in range(e.n):
            r = F.apply(e.f, (r, x[0]), env, c)
        return [r]
    if t is HInduction:
        out, r = [], c.from_fraction(e.z)
        for _ in range(e.n):
            out.append(r)
            r = F.apply(e.f, (r, x[0]), env, c)
        return out
    if t is HInfinityNorm:
        r = c.zero
        for v in reversed(x):
            r = c.max(c.abs(v), r)
        return [r]
    if t is HVMinus:
        n = e.n
        return [c.sub(x[k], x[n + k]) for k in range(n)]
    if t is HChebyshevDistance:
        return _eval(HInfinityNorm(e.n), _eval(HVMinus(e.n), x, c, env), c, env)
    if t is HCross:
        m1 = dims(e.f)[0]
        return _eval(e.f, x[:m1], c, env) + _eval(e.g, x[m1:], c, env)
    if t is HStack:
        return _eval(e.f, x, c, env) + _eval(e.g, x, c, env)
    if t is HCompose:
        return _eval(e.f, _eval(e.g, x, c, env), c, env)
    if t is HTLess:
        m1 = dims(e.f)[0]
        a, b = _eval(e.f, x[:m1], c, env), _eval(e.g, x[m1:], c, env)
        return [c.zless(p, q) for p, q in zip(a, b)]
    raise IllTyped(f"not an HCOL operator: {e!r}")


# --- breakdown rules ------------------------------------------------------


@dataclass(frozen=True)
class BreakdownRule:
    name: str
    matcher: object  # HExpr -> HExpr | None
    description: str = ""

    def __call__(self, e):
        return self.matcher(e)


def _r1(e):
    if type(e) is HScalarProd:
        return HCompose(HReduction(e.n, F.binary("plus"), Fraction(0)),
                        HBinOp(e.n, F.ignore_index("mul")))
    return None


def _r2(e):
    if type(e) is HEvalPolynomial:
        m = e.m
        return HCompose(HScalarProd(m), HCompose(HPrepend(m, m, e.a), HMonomialEnumerator(m - 1)))
    return None


def _r3(e):
    if type(e) is HChebyshevDistance:
        return HCompose(HInfinityNorm(e.n), HVMinus(e.n))
    return None


def _r4(e):
    if type(e) is HTLess:
        n = dims(e)[1]
        return HCompose(HBinOp(n, F.ignore_index("lt")), HCross(e.f, e.g))
    return None


def builtin_rules() -> list:
    return [
        BreakdownRule("R1", _r1, "scalar product as reduction of pointwise products"),
        BreakdownRule("R2", _r2, "polynomial as scalar product of coefficients and monomials"),
        BreakdownRule("R3", _r3, "Chebyshev distance as infinity norm of a difference"),
        BreakdownRule("R4", _r4, "comparison of two operators as binop over their cross product"),
    ]


RULES = {r.name: r for r in builtin_rules()}


def subterm(e, path):
    for k in path:
        kids = e.child_list()
        if k >= len(kids):
            raise IndexError(k)
        e = kids[k]
    return e


def replace_at(e, path, new):
    if not path:
        return new
    kids = e.child_list()
    k = path[0]
    if k >= len(kids):
        raise IndexError(k)
    kids[k] = replace_at(kids[k], path[1:], new)
    return e.with_children(kids)


def apply_rule_trace(e, trace, rules, dims_fn, step_offset=0):
    """Shared driver: rewrite `e` by (rule_name, path) steps, checking dims."""
    for step, (name, path) in enumerate(trace, start=step_offset):
        rule = rules.get(name)
        if rule is None:
            raise RewriteError(step, f"unknown rule {name}")
        try:
            target = subterm(e, tuple(path))
        except IndexError:
            raise RewriteError(step, f"path {list(path)} does not address a node") from None
        new = rule(target)
        if new is None:
            raise RewriteError(step, f"rule {name} does not match {type(target).__name__}")
        before = dims_fn(target)
        after = dims_fn(new)
        if before != after:
            raise RewriteError(step, f"rule {name} changed dims {before} -> {after}")
        e = replace_at(e, tuple(path), new)
    return e


def apply_breakdown_trace(e: HExpr, trace, rules=None) -> HExpr:
    return apply_rule_trace(e, trace, rules or RULES, dims)


def derive_breakdown_trace(e: HExpr, names=("R1",)) -> list:
    """Pre-order trace applying the named rules wherever they match once.
    Rewritten subtrees are not revisited."""
    trace = []

    def go(x, path):
        for nm in names:
            new = RULES[nm](x)
            if new is not None:
                trace.append((nm, list(path)))
                return
        for k, ch in enumerate(x.child_list()):
            go(ch, path + (k,))

    go(e, ())
    return trace


# --- equivalence ----------------------------------------------------------


def random_rational(rng: random.Random, span=60, den=16) -> Fraction:
    return Fraction(rng.randint(-span, span), rng.randint(1, den))


def random_env(rng, global_sizes):
    return tuple([random_rational(rng) for _ in range(k)] for k in global_sizes)


def check_extensional_equiv(e1: HExpr, e2: HExpr, samples: int, seed=0, global_sizes=()):
    """Compare both operators on `samples` seeded random rational vectors."""
    d1, d2 = dims(e1), dims(e2)
    if d1 != d2:
        raise DimMismatch(f"{d1} vs {d2}")
    rng = random.Random(seed)
    for s in range(samples):
        env = random_env(rng, global_sizes)
        x = [random_rational(rng) for _ in range(d1[0])]
        y1 = eval_hcol(e1, x, RATIONAL, env)
        y2 = eval_hcol(e2, x, RATIONAL, env)
        if y1 != y2:
            return counterexample(s + 1, x=[str(v) for v in x], y1=[str(v) for v in y1],
                                  y2=[str(v) for v in y2])
    return equal(samples)


def walk(e):
    yield e
    for k in e.child_list():
        yield from walk(k)


def to_json(e: HExpr):
    i, o = dims(e)
    out = {"op": type(e).__name__, "dims": [i, o]}
    for f in fields(e):
        v = getattr(e, f.name)
        if isinstance(v, HExpr):
            out[f.name] = to_json(v)
        elif isinstance(v, F.Fn):
            out[f.name] = F.show(v, [])
        elif isinstance(v, F.VConst):
            out[f.name] = [str(q) for q in v.values]
        elif isinstance(v, F.VVar):
            out[f.name] = {"global": v.idx}
        elif isinstance(v, Fraction):
            out[f.name] = str(v)
        else:
            out[f.name] = v
    return out
