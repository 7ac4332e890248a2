"""Sparse-vector operator language with structural and collision flags.

Operator families (`IUnion`, `IReduction`) carry a body under one extra
de Bruijn binder: inside the body, nat variable 0 is the member index.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from typing import NamedTuple

from . import hcol as H
from . import scalar as F
from .carrier import RATIONAL
from .errors import DimMismatch, IllTyped, MapNotInjective
from .verdict import FactsReport, counterexample, equal

SAFE = "safe"
UNSAFE = "unsafe"


class Rtheta(NamedTuple):
    value: object
    is_struct: bool = False
    is_collision: bool = False


def structural(s) -> Rtheta:
    return Rtheta(s, True, False)


def sparsify(xs):
    return [Rtheta(v, False, False) for v in xs]


def densify(xs, s):
    return [s if r.is_struct else r.value for r in xs]


class SHExpr:
    children = ()

    def child_list(self):
        return [getattr(self, c) for c in self.children]

    def with_children(self, new):
        return replace(self, **dict(zip(self.children, new)))


@dataclass(frozen=True)
class Embed(SHExpr):
    s: Fraction
    n: int
    b: object  # nat expression


@dataclass(frozen=True)
class Pick(SHExpr):
    s: Fraction
    n: int
    b: object


@dataclass(frozen=True)
class Scatter(SHExpr):
    """Input cell j goes to output cell index_map[j]."""

    s: Fraction
    n: int
    m: int
    index_map: tuple

    def __post_init__(self):
        _check_map(self.index_map, self.n, self.m, "scatter")


@dataclass(frozen=True)
class Gather(SHExpr):
    """Output cell j reads input cell index_map[j]."""

    s: Fraction
    n: int
    m: int
    index_map: tuple

    def __post_init__(self):
        _check_map(self.index_map, self.m, self.n, "gather")


def _check_map(f, dom, cod, what):
    if len(f) != dom:
        raise IllTyped(f"{what} map covers {len(f)} indices, expected {dom}")
    if any(not 0 <= v < cod for v in f):
        raise IllTyped(f"{what} map leaves [0,{cod})")
    if len(set(f)) != len(f):
        raise MapNotInjective(f"{what} map {list(f)} is not injective")


@dataclass(frozen=True)
class LiftHOperator(SHExpr):
    h: object
    s: Fraction


@dataclass(frozen=True)
class SHPointwise(SHExpr):
    s: Fraction
    n: int
    f: F.Fn  # fun i x


@dataclass(frozen=True)
class SHBinOp(SHExpr):
    s: Fraction
    n: int
    f: F.Fn  # fun i a b


@dataclass(frozen=True)
class SHInductor(SHExpr):
    s: Fraction
    n: object  # nat expression
    f: F.Fn  # fun acc x
    z: Fraction


@dataclass(frozen=True)
class Apply2Union(SHExpr):
    s: Fraction
    dot: F.Fn
    f: SHExpr
    g: SHExpr
    children = ("f", "g")


@dataclass(frozen=True)
class SafeCast(SHExpr):
    f: SHExpr
    children = ("f",)


@dataclass(frozen=True)
class UnSafeCast(SHExpr):
    f: SHExpr
    children = ("f",)


@dataclass(frozen=True)
class SHCompose(SHExpr):
    """f after g."""

    f: SHExpr
    g: SHExpr
    children = ("f", "g")


@dataclass(frozen=True)
class IReduction(SHExpr):
    s: Fraction
    dot: F.Fn
    z: Fraction
    n: int
    body: SHExpr
    children = ("body",)


@dataclass(frozen=True)
class IUnion(SHExpr):
    s: Fraction
    dot: F.Fn
    n: int
    body: SHExpr
    children = ("body",)


FINAL_SUBSET = (Embed, Pick, SHPointwise, SHBinOp, SHInductor, Apply2Union, SafeCast,
                UnSafeCast, SHCompose, IReduction, IUnion)


def sh_dims(e: SHExpr) -> tuple:
    t = type(e)
    if t is Embed:
        return (1, e.n)
    if t is Pick:
        return (e.n, 1)
    if t is Scatter or t is Gather:
        return (e.n, e.m)
    if t is LiftHOperator:
        return H.dims(e.h)
    if t is SHPointwise:
        return (e.n, e.n)
    if t is SHBinOp:
        return (2 * e.n, e.n)
    if t is SHInductor:
        return (1, 1)
    if t is Apply2Union:
        a, b = sh_dims(e.f), sh_dims(e.g)
        if a != b:
            raise IllTyped(f"union members have dims {a} and {b}")
        return a
    if t is SafeCast or t is UnSafeCast:
        return sh_dims(e.f)
    if t is SHCompose:
        (tf, o), (i, tg) = sh_dims(e.f), sh_dims(e.g)
        if tf != tg:
            raise IllTyped(f"compose: inner produces {tg}, outer expects {tf}")
        return (i, o)
    if t is IReduction or t is IUnion:
        return sh_dims(e.body)
    raise IllTyped(f"not a sparse operator: {e!r}")


# --- evaluation -----------------------------------------------------------


def vec2union(dot: F.Fn, a, b, kind=SAFE, carrier=RATIONAL, env=()):
    """Cell-wise union; two computed values are combined with `dot`."""
    if len(a) != len(b):
        raise DimMismatch(f"union of lengths {len(a)} and {len(b)}")
    out = []
    for p, q in zip(a, b):
        col = p.is_collision or q.is_collision
        if p.is_struct and q.is_struct:
            out.append(Rtheta(p.value, True, col))
        elif p.is_struct:
            out.append(Rtheta(q.value, False, col))
        elif q.is_struct:
            out.append(Rtheta(p.value, False, col))
        else:
            v = F.apply(dot, (p.value, q.value), env, carrier)
            out.append(Rtheta(v, False, col or kind == SAFE))
    return out


def eval_shcol(e: SHExpr, x, carrier=RATIONAL, env=(), mode=SAFE):
    """Evaluate on a sparse vector (list of `Rtheta`)."""
    i, _ = sh_dims(e)
    if len(x) != i:
        raise DimMismatch(f"{type(e).__name__} expects {i} inputs, got {len(x)}")
    return _eval(e, list(x), carrier, tuple(env), mode)


def _index(b, n, env, what):
    k = F.eval_nat(b, env)
    if k >= n:
        raise IllTyped(f"{what} index {k} not below {n}")
    return k


def _eval(e, x, c, env, mode):
    t = type(e)
    if t is SHCompose:
        return _eval(e.f, _eval(e.g, x, c, env, mode), c, env, mode)
    if t is Embed:
        out = [structural(c.from_fraction(e.s))] * e.n
        out = list(out)
        out[_index(e.b, e.n, env, "embed")] = x[0]
        return out
    if t is Pick:
        return [x[_index(e.b, e.n, env, "pick")]]
    if t is SHPointwise:
        return [Rtheta(F.apply(e.f, (k, r.value), env, c), r.is_struct, r.is_collision)
                for k, r in enumerate(x)]
    if t is SHBinOp:
        n = e.n
        out = []
        for k in range(n):
            p, q = x[k], x[n + k]
            v = F.apply(e.f, (k, p.value, q.value), env, c)
            out.append(Rtheta(v, p.is_struct and q.is_struct, p.is_collision or q.is_collision))
        return out
    if t is SHInductor:
        r = c.from_fraction(e.z)
        for _ in range(F.eval_nat(e.n, env)):
            r = F.apply(e.f, (r, x[0].value), env, c)
        return [Rtheta(r, x[0].is_struct, x[0].is_collision)]
    if t is Apply2Union:
        a = _eval(e.f, x, c, env, mode)
        b = _eval(e.g, x, c, env, mode)
        return vec2union(e.dot, a, b, mode, c, env)
    if t is IUnion:
        o = sh_dims(e)[1]
        acc = [structural(c.from_fraction(e.s))] * o
        for j in range(e.n):
            part = _eval(e.body, x, c, (j,) + env, mode)
            acc = vec2union(e.dot, acc, part, SAFE, c, env)
        return acc
    if t is IReduction:
        o = sh_dims(e)[1]
        acc = [Rtheta(c.from_fraction(e.z), False, False)] * o
        for j in range(e.n):
            part = _eval(e.body, x, c, (j,) + env, mode)
            acc = vec2union(e.dot, acc, part, UNSAFE, c, env)
        return acc
    if t is SafeCast:
        return _eval(e.f, x, c, env, SAFE)
    if t is UnSafeCast:
        return _eval(e.f, x, c, env, UNSAFE)
    if t is Scatter:
        out = [structural(c.from_fraction(e.s))] * e.m
        out = list(out)
        for j, tgt in enumerate(e.index_map):
            out[tgt] = x[j]
        return out
    if t is Gather:
        return [x[src] for src in e.index_map]
    if t is LiftHOperator:
        s = c.from_fraction(e.s)
        dense = densify(x, s)
        col = any(r.is_collision for r in x)
        y = H._eval(e.h, dense, c, env)
        return [Rtheta(v, False, col) for v in y]
    raise IllTyped(f"not a sparse operator: {e!r}")


# --- sparsity contracts ---------------------------------------------------


@dataclass(frozen=True)
class SparsityContract:
    i: int
    o: int
    in_index_set: frozenset
    out_index_set: frozenset

    def to_json(self):
        return {"in": sorted(self.in_index_set), "out": sorted(self.out_index_set),
                "dims": [self.i, self.o]}


def sparsity_contract(e: SHExpr, env=()) -> SparsityContract:
    i, o = sh_dims(e)
    ins, outs = _contract(e, tuple(env))
    return SparsityContract(i, o, frozenset(ins), frozenset(outs))


def _contract(e, env):
    t = type(e)
    i, o = sh_dims(e)
    full_in, full_out = set(range(i)), set(range(o))
    if t is Embed:
        return {0}, {_index(e.b, e.n, env, "embed")}
    if t is Pick:
        return {_index(e.b, e.n, env, "pick")}, {0}
    if t is Scatter:
        return full_in, set(e.index_map)
    if t is Gather:
        return set(e.index_map), full_out
    if t in (LiftHOperator, SHPointwise, SHBinOp, SHInductor):
        return full_in, full_out
    if t is Apply2Union:
        a, b = _contract(e.f, env), _contract(e.g, env)
        return a[0] | b[0], a[1] | b[1]
    if t is SafeCast or t is UnSafeCast:
        return _contract(e.f, env)
    if t is SHCompose:
        return _contract(e.g, env)[0], _contract(e.f, env)[1]
    if t is IUnion or t is IReduction:
        ins, outs = set(), set()
        for j in range(e.n):
            a = _contract(e.body, (j,) + env)
            ins |= a[0]
            outs |= a[1]
        return ins, (full_out if t is IReduction else outs)
    raise IllTyped(f"not a sparse operator: {e!r}")


def _random_sparse_input(rng, i, in_set, s):
    return [Rtheta(H.random_rational(rng), False, False) if k in in_set else structural(s)
            for k in range(i)]


def _disjointness(e, env, report, path=()):
    t = type(e)
    if t is Apply2Union:
        a = _contract(e.f, env)[1]
        b = _contract(e.g, env)[1]
        if a & b:
            report.add("overlapping union members", path=list(path), cells=sorted(a & b))
    if t is IUnion:
        seen = {}
        for j in range(e.n):
            outs = _contract(e.body, (j,) + env)[1]
            for k in outs:
                if k in seen:
                    report.add("overlapping family members", path=list(path),
                               members=[seen[k], j], cell=k)
                seen.setdefault(k, j)
    if t is IUnion or t is IReduction:
        for j in range(e.n):
            _disjointness(e.body, (j,) + env, report, path + (0,))
        return
    for k, ch in enumerate(e.child_list()):
        _disjointness(ch, env, report, path + (k,))


def facts_check(e: SHExpr, samples: int = 100, seed=0, global_sizes=()) -> FactsReport:
    """Structural well-formedness: exact output pattern, no collisions,
    disjoint union members."""
    report = FactsReport()
    try:
        con = sparsity_contract(e)
    except IllTyped as err:
        report.add("ill-typed", reason=str(err))
        return report
    _disjointness(e, (), report)
    rng = random.Random(seed)
    s = Fraction(0)
    for _ in range(samples):
        env = H.random_env(rng, global_sizes)
        x = _random_sparse_input(rng, con.i, con.in_index_set, RATIONAL.from_fraction(s))
        y = eval_shcol(e, x, RATIONAL, env)
        got = {k for k, r in enumerate(y) if not r.is_struct}
        if got != set(con.out_index_set):
            report.add("output pattern differs from contract", expected=sorted(con.out_index_set),
                       got=sorted(got))
            break
        bad = [k for k, r in enumerate(y) if r.is_collision]
        if bad:
            report.add("collision", cells=bad)
            break
        report.checked += 1
    return report


def lift_hcol(h, s=Fraction(0)) -> LiftHOperator:
    H.dims(h)
    return LiftHOperator(h, Fraction(s))


# --- rewriting ------------------------------------------------------------


def _scatter(s, off, k, total):
    """Place a k-vector at [off, off+k) of a `total`-vector."""
    if k == 1:
        return Embed(s, total, F.IConst(off))
    return IUnion(s, F.binary("plus"), k,
                  SHCompose(Embed(s, total, F.IBin("add", F.IVar(0), F.IConst(off))),
                            Pick(s, k, F.IVar(0))))


def _gather(s, off, k, total):
    """Read cells [off, off+k) of a `total`-vector."""
    if k == 1:
        return Pick(s, total, F.IConst(off))
    return IUnion(s, F.binary("plus"), k,
                  SHCompose(Embed(s, k, F.IVar(0)),
                            Pick(s, total, F.IBin("add", F.IVar(0), F.IConst(off)))))


def _pair_pick(s, n):
    """Family member j: [x[j], x[n+j]] as a 2-vector."""
    j = F.IVar(0)
    return Apply2Union(s, F.binary("plus"),
                       SHCompose(Embed(s, 2, F.IConst(0)), Pick(s, 2 * n, j)),
                       SHCompose(Embed(s, 2, F.IConst(1)),
                                 Pick(s, 2 * n, F.IBin("add", j, F.IConst(n)))))


def _lifted(e, cls):
    return type(e) is LiftHOperator and type(e.h) is cls


def _rw_compose(e):
    if _lifted(e, H.HCompose):
        return SHCompose(LiftHOperator(e.h.f, e.s), LiftHOperator(e.h.g, e.s))
    return None


def _rw_pointwise(e):
    if _lifted(e, H.HPointwise):
        return SHPointwise(e.s, e.h.n, e.h.f)
    return None


def _rw_atomic(e):
    if _lifted(e, H.HAtomic):
        f = e.h.f
        return SHPointwise(e.s, 1, F.Fn("nc", F.shift(f.body, 1, 1), ("i",) + f.param_names()))
    return None


def _rw_binop(e):
    if _lifted(e, H.HBinOp):
        return SHBinOp(e.s, e.h.n, e.h.f)
    return None


def _rw_vminus(e):
    if _lifted(e, H.HVMinus):
        return SHBinOp(e.s, e.h.n, F.ignore_index("sub"))
    return None


def _rw_inductor(e):
    if _lifted(e, H.HInductor):
        return SHInductor(e.s, F.IConst(e.h.n), e.h.f, e.h.z)
    return None


_AC_OPS = ("plus", "mul", "min", "max")


def _rw_reduction(e):
    if _lifted(e, H.HReduction):
        h = e.h
        if not any(F.is_named_binary(h.f, op) for op in _AC_OPS):
            return None
        return IReduction(e.s, h.f, h.z, h.n, Pick(e.s, h.n, F.IVar(0)))
    return None


def _rw_infinity_norm(e):
    if _lifted(e, H.HInfinityNorm):
        n = e.h.n
        return IReduction(e.s, F.binary("max"), Fraction(0), n,
                          SHCompose(SHPointwise(e.s, 1, F.indexed_unary(F.CAbs(F.CVar(0)))),
                                    Pick(e.s, n, F.IVar(0))))
    return None


def _chebyshev_family(s, n):
    return IReduction(s, F.binary("max"), Fraction(0), n,
                      SHCompose(SHPointwise(s, 1, F.indexed_unary(F.CAbs(F.CVar(0)))),
                                SHCompose(SHBinOp(s, 1, F.ignore_index("sub")), _pair_pick(s, n))))


def _rw_chebyshev(e):
    if type(e) is not LiftHOperator:
        return None
    h = e.h
    if type(h) is H.HChebyshevDistance:
        return _chebyshev_family(e.s, h.n)
    if (type(h) is H.HCompose and type(h.f) is H.HInfinityNorm and type(h.g) is H.HVMinus
            and h.f.n == h.g.n):
        return _chebyshev_family(e.s, h.f.n)
    return None


def _polynomial_parts(h):
    """Return (m, coefficient vector) if `h` is a polynomial in one of its
    broken-down shapes."""
    if type(h) is H.HEvalPolynomial:
        return h.m, h.a
    if type(h) is not H.HCompose:
        return None
    outer, inner = h.f, h.g
    if type(inner) is not H.HCompose:
        return None
    pre, mono = inner.f, inner.g
    if type(pre) is not H.HPrepend or type(mono) is not H.HMonomialEnumerator:
        return None
    m = pre.m
    if pre.n != m or mono.n != m - 1:
        return None
    if type(outer) is H.HScalarProd and outer.n == m:
        return m, pre.a
    if (type(outer) is H.HCompose and type(outer.f) is H.HReduction
            and outer.f.n == m and F.is_named_binary(outer.f.f, "plus") and outer.f.z == 0
            and type(outer.g) is H.HBinOp and outer.g.n == m
            and F.is_ignore_index_binop(outer.g.f, "mul")):
        return m, pre.a
    return None


def _rw_polynomial(e):
    if type(e) is not LiftHOperator:
        return None
    parts = _polynomial_parts(e.h)
    if parts is None:
        return None
    m, a = parts
    s = e.s
    # member j: x^j * a[j]; inside the lambda x=0, i=1, j=2, outer scope from 3
    term = F.indexed_unary(F.CBin("mul", F.CVar(0), F.CNth(F.shift(a, 3), F.IVar(2))))
    member = SHCompose(SHPointwise(s, 1, term),
                       SHInductor(s, F.IVar(0), F.binary("mul"), Fraction(1)))
    return IReduction(s, F.binary("plus"), Fraction(0), m, member)


def _rw_monomials(e):
    if _lifted(e, H.HMonomialEnumerator):
        k = e.h.n + 1
        return IUnion(e.s, F.binary("plus"), k,
                      SHCompose(Embed(e.s, k, F.IVar(0)),
                                SHInductor(e.s, F.IVar(0), F.binary("mul"), Fraction(1))))
    return None


def _rw_induction(e):
    if _lifted(e, H.HInduction):
        h = e.h
        return IUnion(e.s, F.binary("plus"), h.n,
                      SHCompose(Embed(e.s, h.n, F.IVar(0)),
                                SHInductor(e.s, F.IVar(0), F.shift(h.f, 1), h.z)))
    return None


def _rw_cross(e):
    if _lifted(e, H.HCross):
        h, s = e.h, e.s
        (m1, n1), (m2, n2) = H.dims(h.f), H.dims(h.g)
        M, N = m1 + m2, n1 + n2
        left = SHCompose(_scatter(s, 0, n1, N), SHCompose(LiftHOperator(h.f, s), _gather(s, 0, m1, M)))
        right = SHCompose(_scatter(s, n1, n2, N),
                          SHCompose(LiftHOperator(h.g, s), _gather(s, m1, m2, M)))
        return Apply2Union(s, F.binary("plus"), left, right)
    return None


def _rw_stack(e):
    if _lifted(e, H.HStack):
        h, s = e.h, e.s
        n1, n2 = H.dims(h.f)[1], H.dims(h.g)[1]
        N = n1 + n2
        return Apply2Union(s, F.binary("plus"),
                           SHCompose(_scatter(s, 0, n1, N), LiftHOperator(h.f, s)),
                           SHCompose(_scatter(s, n1, n2, N), LiftHOperator(h.g, s)))
    return None


SH_RULES = {
    "lift_polynomial": _rw_polynomial,
    "lift_chebyshev": _rw_chebyshev,
    "lift_pointwise": _rw_pointwise,
    "lift_atomic": _rw_atomic,
    "lift_binop": _rw_binop,
    "lift_vminus": _rw_vminus,
    "lift_inductor": _rw_inductor,
    "lift_reduction": _rw_reduction,
    "lift_infinity_norm": _rw_infinity_norm,
    "lift_monomials": _rw_monomials,
    "lift_induction": _rw_induction,
    "lift_cross": _rw_cross,
    "lift_stack": _rw_stack,
    "lift_compose": _rw_compose,
}


def apply_sh_rewrites(e: SHExpr, trace) -> SHExpr:
    return H.apply_rule_trace(e, trace, SH_RULES, sh_dims)


def derive_sh_trace(e: SHExpr) -> list:
    """Greedy trace eliminating lifts: first lifted node in pre-order, first
    matching rule in registry order."""
    trace = []
    while True:
        step = _find_step(e, ())
        if step is None:
            return trace
        name, path = step
        trace.append((name, list(path)))
        e = apply_sh_rewrites(e, [(name, path)])


def _find_step(e, path):
    if type(e) is LiftHOperator:
        for name, rule in SH_RULES.items():
            if rule(e) is not None:
                return name, path
        return None
    for k, ch in enumerate(e.child_list()):
        r = _find_step(ch, path + (k,))
        if r is not None:
            return r
    return None


def residual_lifts(e) -> list:
    out = []

    def go(x):
        if type(x) is LiftHOperator:
            out.append(type(x.h).__name__)
        for ch in x.child_list():
            go(ch)

    go(e)
    return out


def check_sh_hcol_equiv(h, se, samples: int, seed=0, global_sizes=()):
    """Densified sparse evaluation against dense evaluation on random inputs."""
    d1, d2 = H.dims(h), sh_dims(se)
    if d1 != d2:
        raise DimMismatch(f"{d1} vs {d2}")
    rng = random.Random(seed)
    s = Fraction(0)
    for k in range(samples):
        env = H.random_env(rng, global_sizes)
        x = [H.random_rational(rng) for _ in range(d1[0])]
        want = H.eval_hcol(h, x, RATIONAL, env)
        got = densify(eval_shcol(se, sparsify(x), RATIONAL, env), s)
        if want != got:
            return counterexample(k + 1, x=[str(v) for v in x], hcol=[str(v) for v in want],
                                  shcol=[str(v) for v in got])
    return equal(samples)


def walk(e):
    yield e
    for ch in e.child_list():
        yield from walk(ch)


def to_json(e: SHExpr, env=()):
    out = {"op": type(e).__name__, "dims": list(sh_dims(e))}
    try:
        out["contract"] = sparsity_contract(e, env).to_json()
    except (IllTyped, IndexError):
        pass
    for f in fields(e):
        v = getattr(e, f.name)
        if isinstance(v, SHExpr):
            out[f.name] = to_json(v, ((0,) + tuple(env)) if f.name == "body" else env)
        elif isinstance(v, F.Fn):
            out[f.name] = F.show(v, [])
        elif isinstance(v, H.HExpr):
            out[f.name] = H.to_json(v)
        elif isinstance(v, Fraction):
            out[f.name] = str(v)
        elif isinstance(v, (F.IVar, F.IConst, F.IBin)):
            out[f.name] = F.show(v, ["j%d" % k for k in range(8)])
        else:
            out[f.name] = v if not isinstance(v, tuple) else list(v)
    return out
