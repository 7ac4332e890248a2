"""Translations sparse -> memory-block -> imperative, and the validators
that relate consecutive stages on sampled inputs."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from . import dhcol as D
from . import hcol as H
from . import mshcol as M
from . import scalar as F
from . import sigma as SH
from .carrier import RATIONAL
from .errors import CompileError, EvalError, PipelineError, Unsupported
from .verdict import Verdict, counterexample, equal

# --- sparse -> memory blocks ----------------------------------------------


def shcol_to_mshcol(e: SH.SHExpr) -> M.MSHExpr:
    t = type(e)
    if t is SH.Embed:
        return M.MSHEmbed(e.n, e.b)
    if t is SH.Pick:
        return M.MSHPick(e.n, e.b)
    if t is SH.SHPointwise:
        return M.MSHPointwise(e.n, e.f)
    if t is SH.SHBinOp:
        return M.MSHBinOp(e.n, e.f)
    if t is SH.SHInductor:
        return M.MSHInductor(e.n, e.f, e.z)
    if t is SH.Apply2Union:
        return M.MApply2Union(e.dot, shcol_to_mshcol(e.f), shcol_to_mshcol(e.g))
    if t is SH.SHCompose:
        return M.MSHCompose(shcol_to_mshcol(e.f), shcol_to_mshcol(e.g))
    if t is SH.SafeCast or t is SH.UnSafeCast:
        return shcol_to_mshcol(e.f)
    if t is SH.IReduction:
        return M.MSHIReduction(e.z, e.dot, e.n, shcol_to_mshcol(e.body))
    if t is SH.IUnion:
        return M.MSHIUnion(e.n, shcol_to_mshcol(e.body))
    raise Unsupported(f"{t.__name__} has no memory-block counterpart")


# --- variable resolvers ---------------------------------------------------


@dataclass(frozen=True)
class Id:
    def resolve(self, r: int) -> int:
        return r


@dataclass(frozen=True)
class Fake:
    """The target context has `n` extra innermost entries."""

    parent: object
    n: int

    def resolve(self, r: int) -> int:
        return self.parent.resolve(r) + self.n


@dataclass(frozen=True)
class Lambda:
    """`n` innermost binders exist on both sides."""

    parent: object
    n: int

    def resolve(self, r: int) -> int:
        return r if r < self.n else self.parent.resolve(r - self.n) + self.n


@dataclass(frozen=True)
class _SwapTop:
    """Swaps the two innermost binders: the power loop pushes the
    accumulator last while the scalar function names it first."""

    parent: object

    def resolve(self, r: int) -> int:
        return self.parent.resolve({0: 1, 1: 0}.get(r, r))


# --- memory blocks -> imperative ------------------------------------------


@dataclass(frozen=True)
class Global:
    name: str
    size: int
    kind: str = "ptr"


@dataclass
class CompileReport:
    templates: list = field(default_factory=list)

    def note(self, node, template):
        self.templates.append({"node": node, "template": template})


_A_OPS = {"plus": "APlus", "sub": "AMinus", "mul": "AMult", "min": "AMin", "max": "AMax",
          "lt": "AZless"}
_N_OPS = {"add": "NPlus", "sub": "NMinus", "mul": "NMult"}


def compile_nexpr(e, res) -> D.DExpr:
    t = type(e)
    if t is F.IConst:
        return D.NConst(e.value)
    if t is F.IVar:
        return D.NVar(res.resolve(e.idx))
    if t is F.IBin:
        return D.NBin(_N_OPS[e.op], compile_nexpr(e.a, res), compile_nexpr(e.b, res))
    raise CompileError(f"not an index expression: {e!r}")


def compile_cexpr(e, res) -> D.DExpr:
    t = type(e)
    if t is F.CVar:
        return D.AVar(res.resolve(e.idx))
    if t is F.CConst:
        return D.AConst(e.value)
    if t is F.CBin:
        return D.ABin(_A_OPS[e.op], compile_cexpr(e.a, res), compile_cexpr(e.b, res))
    if t is F.CAbs:
        return D.AAbs(compile_cexpr(e.a, res))
    if t is F.CNth:
        idx = compile_nexpr(e.index, res)
        if type(e.vec) is F.VVar:
            return D.ANth(D.MPtrDeref(D.PVar(res.resolve(e.vec.idx))), idx)
        if type(e.vec) is F.VConst:
            vals = e.vec.values
            return D.ANth(D.MConst(tuple(enumerate(vals)), len(vals)), idx)
    raise CompileError(f"not a scalar expression: {e!r}")


def compile_fn(fn: F.Fn, res) -> D.DExpr:
    return compile_cexpr(fn.body, Lambda(res, fn.arity))


def _incr(p: D.PVar, k: int) -> D.PVar:
    return D.PVar(p.idx + k)


def mshcol_to_dhcol(e: M.MSHExpr, res, vars, x_p: D.PVar, y_p: D.PVar, report=None):
    """Compile `e` reading block `x_p` and writing block `y_p`.
    `res` maps scalar-function variables to context indices."""
    report = report if report is not None else CompileReport()
    return list(vars), _compile(e, res, x_p, y_p, report)


def _compile(e, res, x, y, rep):
    t = type(e)
    name = t.__name__
    if t is M.MSHEmbed:
        rep.note(name, "DSHAssign x[0] -> y[b]")
        return D.DSHAssign((x, D.NConst(0)), (y, compile_nexpr(e.b, res)))
    if t is M.MSHPick:
        rep.note(name, "DSHAssign x[b] -> y[0]")
        return D.DSHAssign((x, compile_nexpr(e.b, res)), (y, D.NConst(0)))
    if t is M.MSHPointwise:
        rep.note(name, "DSHIMap")
        return D.DSHIMap(e.n, x, y, compile_fn(e.f, res))
    if t is M.MSHBinOp:
        rep.note(name, "DSHBinOp")
        return D.DSHBinOp(e.n, x, y, compile_fn(e.f, res))
    if t is M.MSHInductor:
        rep.note(name, "DSHPower")
        f = compile_cexpr(e.f.body, _SwapTop(Lambda(res, 2)))
        return D.DSHPower(compile_nexpr(e.n, res), (x, D.NConst(0)), (y, D.NConst(0)), f, e.z)
    if t is M.MApply2Union:
        rep.note(name, "DSHSeq f g on shared output")
        return D.DSHSeq(_compile(e.f, res, x, y, rep), _compile(e.g, res, x, y, rep))
    if t is M.MSHCompose:
        rep.note(name, "DSHAlloc tmp (DSHSeq g f)")
        tmp_size = M.msh_dims(e.g)[1]
        inner = Fake(res, 1)
        first = _compile(e.g, inner, _incr(x, 1), D.PVar(0), rep)
        second = _compile(e.f, inner, D.PVar(0), _incr(y, 1), rep)
        return D.DSHAlloc(tmp_size, D.DSHSeq(first, second))
    if t is M.MSHIUnion:
        rep.note(name, "DSHLoop")
        return D.DSHLoop(e.n, _compile(e.body, Lambda(res, 1), _incr(x, 1), _incr(y, 1), rep))
    if t is M.MSHIReduction:
        rep.note(name, "DSHMemInit; DSHAlloc tmp (DSHLoop (member; DSHMemMap2 dot))")
        o = M.msh_dims(e)[1]
        for j in range(e.n):
            outs = M._contract(e.body, (j,))[1]
            if outs != set(range(o)):
                raise CompileError("reduction members must write every output cell")
        body = _compile(e.body, Lambda(Fake(res, 1), 1), _incr(x, 2), D.PVar(1), rep)
        dot = compile_fn(e.dot, Fake(res, 2))
        y2 = _incr(y, 2)
        return D.DSHSeq(
            D.DSHMemInit(y, e.z),
            D.DSHAlloc(o, D.DSHLoop(e.n, D.DSHSeq(body, D.DSHMemMap2(o, y2, D.PVar(1), y2, dot)))))
    raise CompileError(f"cannot compile {name}")


@dataclass(frozen=True)
class DProgram:
    """A compiled operator: globals come first in the context, then the
    input and output pointers."""

    i: int
    o: int
    name: str
    globals: tuple
    op: D.DSHOperator

    @property
    def x_p(self):
        return D.PVar(len(self.globals))

    @property
    def y_p(self):
        return D.PVar(len(self.globals) + 1)


def compile_program(me: M.MSHExpr, global_sizes=(), name="op", report=None) -> DProgram:
    i, o = M.msh_dims(me)
    gl = tuple(Global(f"g{k}", n) for k, n in enumerate(global_sizes))
    k = len(gl)
    _, op = mshcol_to_dhcol(me, Id(), gl, D.PVar(k), D.PVar(k + 1), report)
    check_scope(op, k + 2)
    return DProgram(i, o, name, gl, op)


def translate_program(p: DProgram, constants=None) -> DProgram:
    return DProgram(p.i, p.o, p.name, p.globals, D.translate_rhcol_to_fhcol(p.op, constants))


def check_scope(op, depth: int):
    """Every variable must refer to an existing context entry."""
    for e, d in _scoped_exprs(op, depth):
        for v in _vars(e):
            if v >= d:
                raise CompileError(f"variable {v} escapes a context of {d} entries")


def _vars(e):
    if isinstance(e, (D.NVar, D.AVar, D.PVar)):
        yield e.idx
    elif isinstance(e, (D.NBin, D.ABin)):
        yield from _vars(e.a)
        yield from _vars(e.b)
    elif isinstance(e, D.AAbs):
        yield from _vars(e.a)
    elif isinstance(e, D.ANth):
        yield from _vars(e.m)
        yield from _vars(e.n)
    elif isinstance(e, D.MPtrDeref):
        yield from _vars(e.p)


def _scoped_exprs(op, d):
    t = type(op)
    if t is D.DSHAssign:
        for p, n in (op.src, op.dst):
            yield p, d
            yield n, d
    elif t is D.DSHIMap or t is D.DSHBinOp:
        yield op.x, d
        yield op.y, d
        yield op.f, d + (2 if t is D.DSHIMap else 3)
    elif t is D.DSHMemMap2:
        for p in (op.x0, op.x1, op.y):
            yield p, d
        yield op.f, d + 2
    elif t is D.DSHPower:
        for p, n in (op.src, op.dst):
            yield p, d
            yield n, d
        yield op.n, d
        yield op.f, d + 2
    elif t is D.DSHMemInit:
        yield op.y, d
    elif t is D.DSHLoop or t is D.DSHAlloc:
        yield from _scoped_exprs(op.body, d + 1)
    elif t is D.DSHSeq:
        yield from _scoped_exprs(op.f, d)
        yield from _scoped_exprs(op.g, d)


# --- contexts and memories for compiled programs --------------------------


def program_state(p: DProgram, globals_values, x_values, y_block=None):
    """Context and memory: globals at addresses 0..k-1, then X, then Y.
    Globals and X are write-protected."""
    k = len(p.globals)
    sigma = [D.entry(D.PtrVal(a, g.size), True) for a, g in enumerate(p.globals)]
    sigma.append(D.entry(D.PtrVal(k, p.i), True))
    sigma.append(D.entry(D.PtrVal(k + 1, p.o), False))
    m = {a: dict(enumerate(vs)) for a, vs in enumerate(globals_values)}
    m[k] = x_values if isinstance(x_values, dict) else dict(enumerate(x_values))
    m[k + 1] = dict(y_block or {})
    return tuple(sigma), m


def run_program(p: DProgram, globals_values, x_values, lang=D.RHCOL, fuel=None):
    sigma, m = program_state(p, globals_values, x_values)
    r = D.eval_dshoperator(sigma, p.op, m, fuel if fuel is not None else D.estimate_fuel(p.op), lang)
    return r, len(p.globals) + 1


def output_vector(p: DProgram, result):
    """Dense output read from a successful run."""
    y = result.memory[len(p.globals) + 1]
    return [y[k] for k in range(p.o)]


# --- validators -----------------------------------------------------------


def _snapshot(m):
    return {a: dict(b) for a, b in m.items()}


def check_dsh_pure(dop, y_p, sigma, m, samples=1, seed=0, lang=D.RHCOL) -> Verdict:
    """No net allocation, and nothing but the block behind `y_p` changes.
    Each sample re-randomizes the values already present in `m`."""
    rng = random.Random(seed)
    fuel = D.estimate_fuel(dop)
    try:
        y_addr, _ = D.eval_pexpr(y_p, sigma, m)
    except EvalError as err:
        return Verdict("Fail", 0, {"setup": str(err)})
    for s in range(samples):
        mb = m if s == 0 else {a: {k: H.random_rational(rng) for k in b} for a, b in m.items()}
        if lang is D.FHCOL:
            mb = D.rational_memory_to_float(mb)
        r = D.eval_dshoperator(sigma, dop, _snapshot(mb), fuel, lang)
        if r is None:
            return Verdict("Fail", s, {"violation": "fuel exhausted"})
        if type(r) is D.Err:
            continue
        ma = r.memory
        if set(ma) != set(mb):
            return counterexample(s + 1, violation="mem_stable", before=sorted(mb), after=sorted(ma))
        for a in mb:
            if a != y_addr and ma[a] != mb[a]:
                return counterexample(s + 1, violation="mem_write_safe", address=a)
    return Verdict("Pass", samples)


def _globals_env(p_globals, m):
    return tuple([m[a][k] for k in range(g.size)] for a, g in enumerate(p_globals))


def check_msh_dsh_compat(mop: M.MSHExpr, dop, sigma, m, samples=1, seed=0, x_p=None, y_p=None,
                         globals_=(), sparse_rate=0.1) -> Verdict:
    """Per-offset delta relation between the memory-block run and the
    imperative run, on sampled input blocks.

    Each sample redraws the X block on the operator's in set (sometimes
    dropping a key, to exercise the both-fail case), redraws globals and
    prefills Y with a random partial block."""
    k = len(globals_)
    x_p = x_p or D.PVar(k)
    y_p = y_p or D.PVar(k + 1)
    try:
        x_addr, _ = D.eval_pexpr(x_p, sigma, m)
        y_addr, y_size = D.eval_pexpr(y_p, sigma, m)
    except EvalError as err:
        raise PipelineError(f"setup: {err}") from None
    con = M.msh_contract(mop)
    rng = random.Random(seed)
    fuel = D.estimate_fuel(dop)
    both_fail = 0
    for s in range(samples):
        mem = _snapshot(m)
        for a, g in enumerate(globals_):
            mem[a] = {j: H.random_rational(rng) for j in range(g.size)}
        xb = {j: H.random_rational(rng) for j in sorted(con.in_index_set)}
        if xb and rng.random() < sparse_rate:
            xb.pop(rng.choice(sorted(xb)))
        mem[x_addr] = xb
        mem[y_addr] = {j: H.random_rational(rng) for j in range(y_size) if rng.random() < 0.5}
        mb = dict(mem[y_addr])
        env = _globals_env(globals_, mem)
        try:
            md = M.eval_mshcol(mop, xb, RATIONAL, env)
            merr = None
        except PipelineError as err:
            md, merr = None, err
        r = D.eval_dshoperator(sigma, dop, mem, fuel, D.RHCOL)
        if r is None:
            return counterexample(s + 1, violation="fuel exhausted")
        if merr is not None or type(r) is D.Err:
            if merr is not None and type(r) is D.Err:
                both_fail += 1
                continue
            return counterexample(s + 1, violation="only one side failed",
                                  msh=repr(merr), dsh=repr(getattr(r, "error", None)),
                                  x=M.block_to_json(xb))
        ma = r.memory[y_addr]
        for j in sorted(set(ma) | set(mb) | set(md)):
            if j in md:
                if ma.get(j) != md[j]:
                    return counterexample(s + 1, violation="MemExpected", offset=j,
                                          expected=str(md[j]), got=str(ma.get(j)))
            elif ma.get(j) != mb.get(j):
                return counterexample(s + 1, violation="MemPreserved", offset=j,
                                      before=str(mb.get(j)), got=str(ma.get(j)))
    return equal(samples, both_fail=both_fail)


def compat_fixture(p: DProgram):
    """A context/memory pair to seed the validators."""
    return program_state(p, [[Fraction(0)] * g.size for g in p.globals], [Fraction(0)] * p.i)
