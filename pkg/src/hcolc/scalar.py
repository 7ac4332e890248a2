"""First-order scalar functions used as operator parameters.

Variables are de Bruijn indices: index 0 is the innermost binder, so in
``fun i a b => ...`` the parameter ``b`` is 0, ``a`` is 1 and ``i`` is 2.
Binders outside the lambda (operator-family indices, global vectors)
continue the numbering above the lambda's own parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import IllTyped, PipelineError

# --- nat expressions (indices) --------------------------------------------


@dataclass(frozen=True)
class IVar:
    idx: int


@dataclass(frozen=True)
class IConst:
    value: int


@dataclass(frozen=True)
class IBin:
    op: str  # add | sub | mul
    a: object
    b: object


# --- vector references ----------------------------------------------------


@dataclass(frozen=True)
class VConst:
    values: tuple  # of Fraction


@dataclass(frozen=True)
class VVar:
    idx: int


# --- carrier expressions --------------------------------------------------


@dataclass(frozen=True)
class CVar:
    idx: int


@dataclass(frozen=True)
class CConst:
    value: Fraction


@dataclass(frozen=True)
class CAbs:
    a: object


@dataclass(frozen=True)
class CBin:
    op: str  # plus | sub | mul | min | max | lt
    a: object
    b: object


@dataclass(frozen=True)
class CNth:
    vec: object
    index: object


@dataclass(frozen=True)
class Fn:
    """A lambda. `kinds` has one letter per parameter, outermost first:
    'n' for a natural (an index), 'c' for a carrier value. Parameter
    names only matter for printing."""

    kinds: str
    body: object
    names: tuple = field(default=(), compare=False)

    @property
    def arity(self):
        return len(self.kinds)

    def param_names(self):
        if len(self.names) == self.arity:
            return self.names
        return tuple(f"p{k}" for k in range(self.arity))


CBIN_OPS = ("plus", "sub", "mul", "min", "max", "lt")
IBIN_OPS = ("add", "sub", "mul")


def const(q) -> CConst:
    return CConst(Fraction(q))


def binary(op: str) -> Fn:
    """Named binary function such as `plus`, as a two-parameter lambda."""
    if op not in CBIN_OPS:
        raise IllTyped(f"unknown binary function {op}")
    return Fn("cc", CBin(op, CVar(1), CVar(0)), ("a", "b"))


def ignore_index(op: str) -> Fn:
    """``fun i a b => op a b``"""
    return Fn("ncc", CBin(op, CVar(1), CVar(0)), ("i", "a", "b"))


def unary_abs() -> Fn:
    return Fn("c", CAbs(CVar(0)), ("x",))


def indexed_unary(body, names=("i", "x")) -> Fn:
    return Fn("nc", body, tuple(names))


# --- evaluation -----------------------------------------------------------


def eval_nat(e, env) -> int:
    t = type(e)
    if t is IConst:
        return e.value
    if t is IVar:
        v = env[e.idx]
        if not isinstance(v, int):
            raise IllTyped(f"variable {e.idx} is not a natural")
        return v
    if t is IBin:
        a, b = eval_nat(e.a, env), eval_nat(e.b, env)
        if e.op == "add":
            return a + b
        if e.op == "sub":
            return a - b if a > b else 0
        if e.op == "mul":
            return a * b
    raise IllTyped(f"not a nat expression: {e!r}")


def eval_vec(v, env, carrier):
    if type(v) is VConst:
        return [carrier.from_fraction(q) for q in v.values]
    if type(v) is VVar:
        vec = env[v.idx]
        if not isinstance(vec, (list, tuple)):
            raise IllTyped(f"variable {v.idx} is not a vector")
        return vec
    raise IllTyped(f"not a vector reference: {v!r}")


def eval_c(e, env, carrier):
    t = type(e)
    if t is CVar:
        return env[e.idx]
    if t is CBin:
        return carrier.binop(e.op)(eval_c(e.a, env, carrier), eval_c(e.b, env, carrier))
    if t is CConst:
        return carrier.from_fraction(e.value)
    if t is CAbs:
        return carrier.abs(eval_c(e.a, env, carrier))
    if t is CNth:
        i = eval_nat(e.index, env)
        if type(e.vec) is VConst:
            if i >= len(e.vec.values):
                raise PipelineError(f"Vnth index {i} out of bounds")
            return carrier.from_fraction(e.vec.values[i])
        vec = eval_vec(e.vec, env, carrier)
        if i >= len(vec):
            raise PipelineError(f"Vnth index {i} out of bounds")
        return vec[i]
    raise IllTyped(f"not a carrier expression: {e!r}")


def apply(fn: Fn, args, env, carrier):
    """Call `fn` on `args` (outermost parameter first) under the outer `env`."""
    if len(args) != fn.arity:
        raise IllTyped(f"expected {fn.arity} arguments, got {len(args)}")
    inner = tuple(reversed(args)) + tuple(env)
    return eval_c(fn.body, inner, carrier)


# --- de Bruijn utilities --------------------------------------------------


def shift(e, k: int, cutoff: int = 0):
    """Add `k` to every variable index >= `cutoff` (free variables)."""
    t = type(e)
    if t in (IVar, VVar, CVar):
        return t(e.idx + k) if e.idx >= cutoff else e
    if t in (IConst, VConst, CConst):
        return e
    if t is IBin or t is CBin:
        return t(e.op, shift(e.a, k, cutoff), shift(e.b, k, cutoff))
    if t is CAbs:
        return CAbs(shift(e.a, k, cutoff))
    if t is CNth:
        return CNth(shift(e.vec, k, cutoff), shift(e.index, k, cutoff))
    if t is Fn:
        return Fn(e.kinds, shift(e.body, k, cutoff + e.arity), e.names)
    raise IllTyped(f"cannot shift {e!r}")


def free_vars(e, depth: int = 0) -> set:
    """Free variable indices, relative to the scope enclosing `e`."""
    t = type(e)
    if t in (IVar, VVar, CVar):
        return {e.idx - depth} if e.idx >= depth else set()
    if t in (IConst, VConst, CConst):
        return set()
    if t is IBin or t is CBin:
        return free_vars(e.a, depth) | free_vars(e.b, depth)
    if t is CAbs:
        return free_vars(e.a, depth)
    if t is CNth:
        return free_vars(e.vec, depth) | free_vars(e.index, depth)
    if t is Fn:
        return free_vars(e.body, depth + e.arity)
    raise IllTyped(f"cannot scan {e!r}")


def constants(e) -> list:
    """Every rational literal appearing in `e`."""
    t = type(e)
    if t is CConst:
        return [e.value]
    if t is VConst:
        return list(e.values)
    if t in (IBin, CBin):
        return constants(e.a) + constants(e.b)
    if t is CAbs:
        return constants(e.a)
    if t is CNth:
        return constants(e.vec) + constants(e.index)
    if t is Fn:
        return constants(e.body)
    return []


# --- printing -------------------------------------------------------------


def show(e, names) -> str:
    """Surface syntax; `names` lists binder names innermost-first."""
    t = type(e)
    if t in (IVar, VVar, CVar):
        return names[e.idx] if e.idx < len(names) else f"?{e.idx}"
    if t is IConst:
        return str(e.value)
    if t is CConst:
        q = e.value
        return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"
    if t is VConst:
        return "[" + " ".join(show(CConst(q), names) for q in e.values) + "]"
    if t is IBin or t is CBin:
        return f"({e.op} {show(e.a, names)} {show(e.b, names)})"
    if t is CAbs:
        return f"(abs {show(e.a, names)})"
    if t is CNth:
        return f"(nth {show(e.vec, names)} {show(e.index, names)})"
    if t is Fn:
        pn = e.param_names()
        inner = list(reversed(pn)) + list(names)
        ps = " ".join(pn)
        return f"(fun {ps} {show(e.body, inner)})"
    raise IllTyped(f"cannot print {e!r}")


def is_ignore_index_binop(fn: Fn, op: str) -> bool:
    return fn == ignore_index(op)


def is_named_binary(fn: Fn, op: str) -> bool:
    return fn == binary(op)
