"""Arithmetic S-expressions produced by running programs over symbolic inputs."""

from __future__ import annotations

from dataclasses import dataclass

_ARITY = {
    "SConstZero": 0,
    "SConstOne": 0,
    "SVar": 0,
    "SAbs": 1,
    "SPlus": 2,
    "SSub": 2,
    "SMult": 2,
    "SMin": 2,
    "SMax": 2,
    "SZLess": 2,
}


@dataclass(frozen=True)
class SExpr:
    op: str
    args: tuple = ()
    var: int | None = None

    def __post_init__(self):
        if self.op not in _ARITY:
            raise ValueError(f"unknown S-expression head {self.op}")
        if len(self.args) != _ARITY[self.op]:
            raise ValueError(f"{self.op} takes {_ARITY[self.op]} arguments")

    def __str__(self):
        return render(self)


ZERO = SExpr("SConstZero")
ONE = SExpr("SConstOne")


def svar(i):
    return SExpr("SVar", (), i)


def node(op, *args):
    return SExpr(op, tuple(args))


def render(e: SExpr) -> str:
    if e.op == "SVar":
        return f"SVar {e.var}"
    if not e.args:
        return e.op
    parts = []
    for a in e.args:
        s = render(a)
        parts.append(s if not a.args and a.op != "SVar" else f"({s})")
    return e.op + " " + " ".join(parts)


def parse(text: str) -> SExpr:
    """Read the parenthesised constructor syntax used by `render`."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def atom():
        nonlocal pos
        tok = tokens[pos]
        if tok == "(":
            pos += 1
            e = app()
            if tokens[pos] != ")":
                raise ValueError("expected )")
            pos += 1
            return e
        if tok in ("SConstZero", "SConstOne"):
            pos += 1
            return SExpr(tok)
        raise ValueError(f"unexpected token {tok}")

    def app():
        nonlocal pos
        head = tokens[pos]
        if head == "Some":
            pos += 1
            return atom()
        if head not in _ARITY:
            return atom()
        pos += 1
        if head == "SVar":
            v = int(tokens[pos])
            pos += 1
            return svar(v)
        args = [atom() for _ in range(_ARITY[head])]
        return SExpr(head, tuple(args))

    e = app()
    if pos != len(tokens):
        raise ValueError("trailing tokens")
    return e


def alpha_equivalent(a: SExpr, b: SExpr) -> bool:
    """Structural equality up to a bijective renaming of variables."""
    fwd, bwd = {}, {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        if x.op != y.op or len(x.args) != len(y.args):
            return False
        if x.op == "SVar":
            if fwd.setdefault(x.var, y.var) != y.var:
                return False
            if bwd.setdefault(y.var, x.var) != x.var:
                return False
        stack.extend(zip(x.args, y.args))
    return True


def variables(e: SExpr) -> set:
    out = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if x.op == "SVar":
            out.add(x.var)
        stack.extend(x.args)
    return out


def evaluate(e: SExpr, env, carrier):
    """Interpret `e` in `carrier`, reading variables from the mapping `env`."""
    memo = {}

    def go(x):
        key = id(x)
        if key in memo:
            return memo[key]
        op = x.op
        if op == "SConstZero":
            r = carrier.zero
        elif op == "SConstOne":
            r = carrier.one
        elif op == "SVar":
            r = env[x.var]
        elif op == "SAbs":
            r = carrier.abs(go(x.args[0]))
        else:
            a, b = go(x.args[0]), go(x.args[1])
            r = {
                "SPlus": carrier.plus,
                "SSub": carrier.sub,
                "SMult": carrier.mult,
                "SMin": carrier.min,
                "SMax": carrier.max,
                "SZLess": carrier.zless,
            }[op](a, b)
        memo[key] = r
        return r

    return go(e)

