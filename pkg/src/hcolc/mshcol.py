"""Operators over memory blocks (finite offset -> value maps).

Reading an absent offset is an error rather than a structural default,
and unions fail when both sides write the same offset.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, fields, replace
from fractions import Fraction

from . import hcol as H
from . import scalar as F
from . import sigma as SH
from .carrier import RATIONAL
from .errors import DimMismatch, IllTyped, KeyOutOfRange, MergeCollision, PipelineError, SparseRead
from .verdict import FactsReport, counterexample, equal

# --- memory model ---------------------------------------------------------

MemBlock = dict  # offset -> value
Memory = dict  # address -> MemBlock


def mem_lookup(block: MemBlock, k: int):
    if k not in block:
        raise SparseRead(k)
    return block[k]


def memory_next_key(m: Memory) -> int:
    return max(m) + 1 if m else 0


def svector_to_mem_block(v) -> MemBlock:
    return {k: r.value for k, r in enumerate(v) if not r.is_struct}


def mem_block_to_svector(b: MemBlock, n: int, s) -> list:
    for k in b:
        if k >= n:
            raise KeyOutOfRange(f"offset {k} outside a block of {n}")
    return [SH.Rtheta(b[k], False, False) if k in b else SH.structural(s) for k in range(n)]


def block_to_json(b: MemBlock):
    return {str(k): str(b[k]) for k in sorted(b)}


def memory_to_json(m: Memory):
    return {str(a): block_to_json(m[a]) for a in sorted(m)}


# --- operators ------------------------------------------------------------


class MSHExpr:
    children = ()

    def child_list(self):
        return [getattr(self, c) for c in self.children]

    def with_children(self, new):
        return replace(self, **dict(zip(self.children, new)))


@dataclass(frozen=True)
class MSHEmbed(MSHExpr):
    n: int
    b: object


@dataclass(frozen=True)
class MSHPick(MSHExpr):
    n: int
    b: object


@dataclass(frozen=True)
class MSHPointwise(MSHExpr):
    n: int
    f: F.Fn


@dataclass(frozen=True)
class MSHBinOp(MSHExpr):
    n: int
    f: F.Fn


@dataclass(frozen=True)
class MSHInductor(MSHExpr):
    n: object
    f: F.Fn
    z: Fraction


@dataclass(frozen=True)
class MApply2Union(MSHExpr):
    dot: F.Fn
    f: MSHExpr
    g: MSHExpr
    children = ("f", "g")


@dataclass(frozen=True)
class MSHCompose(MSHExpr):
    f: MSHExpr
    g: MSHExpr
    children = ("f", "g")


@dataclass(frozen=True)
class MSHIReduction(MSHExpr):
    z: Fraction
    dot: F.Fn
    n: int
    body: MSHExpr
    children = ("body",)


@dataclass(frozen=True)
class MSHIUnion(MSHExpr):
    n: int
    body: MSHExpr
    children = ("body",)


def msh_dims(e: MSHExpr) -> tuple:
    t = type(e)
    if t is MSHEmbed:
        return (1, e.n)
    if t is MSHPick:
        return (e.n, 1)
    if t is MSHPointwise:
        return (e.n, e.n)
    if t is MSHBinOp:
        return (2 * e.n, e.n)
    if t is MSHInductor:
        return (1, 1)
    if t is MApply2Union:
        a, b = msh_dims(e.f), msh_dims(e.g)
        if a != b:
            raise IllTyped(f"union members have dims {a} and {b}")
        return a
    if t is MSHCompose:
        (tf, o), (i, tg) = msh_dims(e.f), msh_dims(e.g)
        if tf != tg:
            raise IllTyped(f"compose: inner produces {tg}, outer expects {tf}")
        return (i, o)
    if t is MSHIReduction or t is MSHIUnion:
        return msh_dims(e.body)
    raise IllTyped(f"not a memory operator: {e!r}")


def msh_contract(e: MSHExpr, env=()) -> SH.SparsityContract:
    i, o = msh_dims(e)
    ins, outs = _contract(e, tuple(env))
    return SH.SparsityContract(i, o, frozenset(ins), frozenset(outs))


def _contract(e, env):
    t = type(e)
    i, o = msh_dims(e)
    if t is MSHEmbed:
        return {0}, {SH._index(e.b, e.n, env, "embed")}
    if t is MSHPick:
        return {SH._index(e.b, e.n, env, "pick")}, {0}
    if t in (MSHPointwise, MSHBinOp, MSHInductor):
        return set(range(i)), set(range(o))
    if t is MApply2Union:
        a, b = _contract(e.f, env), _contract(e.g, env)
        return a[0] | b[0], a[1] | b[1]
    if t is MSHCompose:
        return _contract(e.g, env)[0], _contract(e.f, env)[1]
    ins, outs = set(), set()
    for j in range(e.n):
        a = _contract(e.body, (j,) + env)
        ins |= a[0]
        outs |= a[1]
    return ins, (set(range(o)) if t is MSHIReduction else outs)


# --- evaluation -----------------------------------------------------------


def merge_disjoint(a: MemBlock, b: MemBlock) -> MemBlock:
    out = dict(a)
    for k, v in b.items():
        if k in out:
            raise MergeCollision(k)
        out[k] = v
    return out


def merge_with(dot, a: MemBlock, b: MemBlock, carrier, env) -> MemBlock:
    out = dict(a)
    for k, v in b.items():
        out[k] = F.apply(dot, (out[k], v), env, carrier) if k in out else v
    return out


def eval_mshcol(e: MSHExpr, x: MemBlock, carrier=RATIONAL, env=()) -> MemBlock:
    """Evaluate on a memory block; raises SparseRead / MergeCollision."""
    return _eval(e, x, carrier, tuple(env))


def _eval(e, x, c, env):
    t = type(e)
    if t is MSHCompose:
        return _eval(e.f, _eval(e.g, x, c, env), c, env)
    if t is MSHEmbed:
        return {SH._index(e.b, e.n, env, "embed"): mem_lookup(x, 0)}
    if t is MSHPick:
        return {0: mem_lookup(x, SH._index(e.b, e.n, env, "pick"))}
    if t is MSHPointwise:
        return {k: F.apply(e.f, (k, mem_lookup(x, k)), env, c) for k in range(e.n)}
    if t is MSHBinOp:
        n = e.n
        return {k: F.apply(e.f, (k, mem_lookup(x, k), mem_lookup(x, n + k)), env, c)
                for k in range(n)}
    if t is MSHInductor:
        v = mem_lookup(x, 0)
        r = c.from_fraction(e.z)
        for _ in range(F.eval_nat(e.n, env)):
            r = F.apply(e.f, (r, v), env, c)
        return {0: r}
    if t is MApply2Union:
        return merge_disjoint(_eval(e.f, x, c, env), _eval(e.g, x, c, env))
    if t is MSHIUnion:
        acc = {}
        for j in range(e.n):
            acc = merge_disjoint(acc, _eval(e.body, x, c, (j,) + env))
        return acc
    if t is MSHIReduction:
        o = msh_dims(e)[1]
        acc = {k: c.from_fraction(e.z) for k in range(o)}
        for j in range(e.n):
            acc = merge_with(e.dot, acc, _eval(e.body, x, c, (j,) + env), c, env)
        return acc
    raise IllTyped(f"not a memory operator: {e!r}")


# --- validators -----------------------------------------------------------


def _random_block(rng, keys):
    return {k: H.random_rational(rng) for k in sorted(keys)}


def msh_facts_check(e: MSHExpr, samples: int = 100, seed=0, global_sizes=()) -> FactsReport:
    """Inputs covering the in set never fail; output keys equal the out set."""
    report = FactsReport()
    try:
        con = msh_contract(e)
    except IllTyped as err:
        report.add("ill-typed", reason=str(err))
        return report
    rng = random.Random(seed)
    for _ in range(samples):
        env = H.random_env(rng, global_sizes)
        x = _random_block(rng, con.in_index_set)
        try:
            y = eval_mshcol(e, x, RATIONAL, env)
        except PipelineError as err:
            report.add("failed on a block covering the in set", error=repr(err))
            break
        if set(y) != set(con.out_index_set):
            report.add("output keys differ from out set", expected=sorted(con.out_index_set),
                       got=sorted(y))
            break
        if any(k >= con.o for k in y):
            report.add("output key beyond dimension", keys=sorted(k for k in y if k >= con.o))
            break
        report.checked += 1
    return report


def check_sh_msh_compat(se, me: MSHExpr, samples: int, seed=0, global_sizes=()):
    """Memory-block run on the converted input equals the converted sparse run."""
    d1, d2 = SH.sh_dims(se), msh_dims(me)
    if d1 != d2:
        raise DimMismatch(f"{d1} vs {d2}")
    con = SH.sparsity_contract(se)
    rng = random.Random(seed)
    s = Fraction(0)
    for k in range(samples):
        env = H.random_env(rng, global_sizes)
        x = SH._random_sparse_input(rng, d1[0], con.in_index_set, s)
        want = svector_to_mem_block(SH.eval_shcol(se, x, RATIONAL, env))
        try:
            got = eval_mshcol(me, svector_to_mem_block(x), RATIONAL, env)
        except PipelineError as err:
            return counterexample(k + 1, x=block_to_json(svector_to_mem_block(x)),
                                  expected=block_to_json(want), error=repr(err))
        if got != want:
            return counterexample(k + 1, x=block_to_json(svector_to_mem_block(x)),
                                  expected=block_to_json(want), got=block_to_json(got))
    return equal(samples)


def walk(e):
    yield e
    for ch in e.child_list():
        yield from walk(ch)


def to_json(e: MSHExpr, env=()):
    out = {"op": type(e).__name__, "dims": list(msh_dims(e))}
    try:
        out["contract"] = msh_contract(e, env).to_json()
    except IllTyped:
        pass
    for f in fields(e):
        v = getattr(e, f.name)
        if isinstance(v, MSHExpr):
            out[f.name] = to_json(v, ((0,) + tuple(env)) if f.name == "body" else env)
        elif isinstance(v, F.Fn):
            out[f.name] = F.show(v, [])
        elif isinstance(v, Fraction):
            out[f.name] = str(v)
        elif isinstance(v, (F.IVar, F.IConst, F.IBin)):
            out[f.name] = F.show(v, ["j%d" % k for k in range(8)])
        else:
            out[f.name] = v
    return out
