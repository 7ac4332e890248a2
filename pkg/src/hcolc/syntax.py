"""Surface syntax for the four operator languages.

HCOL, Sigma-HCOL and MSHCOL use s-expressions, e.g.
``(compose (reduction plus 0 3) (binop 3 (fun i a b (mul a b))))``.
DHCOL uses constructor application, the same text `dhcol.render` prints:
``DSHLoop 3 (DSHIMap 3 (PVar 1) (PVar 2) (APlus (AVar 0) (AVar 0)))``.

Scalar lambdas are written ``(fun p1 .. pn body)`` or, where the expected
shape allows, as a bare operation name such as ``plus``. Family bodies
name their index: ``(iunion 0 plus 2 j (embed 0 2 j))``. Global vectors
are ``g0``, ``g1``, ...
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from . import dhcol as D
from . import hcol as H
from . import mshcol as M
from . import scalar as F
from . import sigma as S
from .errors import ParseError

LANGUAGES = ("hcol", "shcol", "mshcol", "dhcol")

# --- tokens ---------------------------------------------------------------

_TOKEN = re.compile(r"\(\*.*?\*\)|;[^\n]*|\s+|[()\[\]{},:]|[^\s()\[\]{},:;]+", re.S)


@dataclass(frozen=True)
class Tok:
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    out = []
    line, start = 1, 0
    for m in _TOKEN.finditer(text):
        s = m.group()
        if not (s.isspace() or s.startswith(";") or s.startswith("(*")):
            out.append(Tok(s, line, m.start() - start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            start = m.start() + s.rindex("\n") + 1
    return out


class _Stream:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.pos = 0
        lines = text.split("\n")
        self.end = (len(lines), len(lines[-1]) + 1)

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self, what="a token"):
        t = self.peek()
        if t is None:
            raise ParseError(f"unexpected end of input, expected {what}", *self.end)
        self.pos += 1
        return t

    def expect(self, s):
        t = self.next(repr(s))
        if t.text != s:
            raise ParseError(f"expected {s!r}, found {t.text!r}", t.line, t.col)
        return t


def _err(tok, msg):
    return ParseError(msg, tok.line, tok.col)


# --- s-expression reader --------------------------------------------------


@dataclass
class Node:
    items: list
    tok: Tok
    bracket: bool = False


def _read(st: _Stream):
    t = st.next("an expression")
    if t.text in ("(", "["):
        close = ")" if t.text == "(" else "]"
        items = []
        while True:
            p = st.peek()
            if p is None:
                raise ParseError(f"unclosed {t.text!r} opened at line {t.line}, column {t.col}",
                                 *st.end)
            if p.text == close:
                st.next()
                return Node(items, t, t.text == "[")
            items.append(_read(st))
    if t.text in (")", "]"):
        raise _err(t, f"unexpected {t.text!r}")
    return t


def read_sexpr(text: str):
    st = _Stream(text)
    e = _read(st)
    extra = st.peek()
    if extra is not None:
        raise _err(extra, f"trailing input {extra.text!r}")
    return e


def _tok(x):
    return x if isinstance(x, Tok) else x.tok


def _int(x, what="a natural number"):
    if isinstance(x, Tok) and re.fullmatch(r"\d+", x.text):
        return int(x.text)
    raise _err(_tok(x), f"expected {what}")


def _rat(x):
    if isinstance(x, Tok) and re.fullmatch(r"-?\d+(/\d+)?", x.text):
        return Fraction(x.text)
    raise _err(_tok(x), "expected a rational literal like 3 or -1/2")


_GLOBAL = re.compile(r"g(\d+)")


def _resolve(tok, names):
    if tok.text in names:
        return names.index(tok.text)
    m = _GLOBAL.fullmatch(tok.text)
    if m:
        return len(names) + int(m.group(1))
    raise _err(tok, f"unbound name {tok.text!r}")


def _nat(x, names):
    if isinstance(x, Tok):
        if re.fullmatch(r"\d+", x.text):
            return F.IConst(int(x.text))
        return F.IVar(_resolve(x, names))
    if len(x.items) == 3 and isinstance(x.items[0], Tok) and x.items[0].text in F.IBIN_OPS:
        return F.IBin(x.items[0].text, _nat(x.items[1], names), _nat(x.items[2], names))
    raise _err(x.tok, "expected an index expression")


def _vec(x, names):
    if isinstance(x, Node) and x.bracket:
        return F.VConst(tuple(_rat(v) for v in x.items))
    if isinstance(x, Tok):
        return F.VVar(_resolve(x, names))
    raise _err(x.tok, "expected a vector: [..] or a global name")


def _cexpr(x, names):
    if isinstance(x, Tok):
        if re.fullmatch(r"-?\d+(/\d+)?", x.text):
            return F.CConst(Fraction(x.text))
        return F.CVar(_resolve(x, names))
    if not x.items or not isinstance(x.items[0], Tok):
        raise _err(x.tok, "expected a scalar expression")
    head, args = x.items[0].text, x.items[1:]
    if head in F.CBIN_OPS and len(args) == 2:
        return F.CBin(head, _cexpr(args[0], names), _cexpr(args[1], names))
    if head == "abs" and len(args) == 1:
        return F.CAbs(_cexpr(args[0], names))
    if head == "nth" and len(args) == 2:
        return F.CNth(_vec(args[0], names), _nat(args[1], names))
    raise _err(x.tok, f"unknown scalar form {head!r} with {len(args)} arguments")


def _fn(x, kinds, names):
    """Lambda of the given parameter kinds, or a named shorthand."""
    if isinstance(x, Tok):
        op = x.text
        if op in F.CBIN_OPS and kinds == "cc":
            return F.binary(op)
        if op in F.CBIN_OPS and kinds == "ncc":
            return F.ignore_index(op)
        if op == "abs" and kinds == "c":
            return F.unary_abs()
        raise _err(x, f"{op!r} is not a function of shape {kinds}")
    items = x.items
    if not items or not isinstance(items[0], Tok) or items[0].text != "fun":
        raise _err(x.tok, "expected (fun params.. body)")
    params = items[1:-1]
    if len(params) != len(kinds) or not all(isinstance(p, Tok) for p in params):
        raise _err(x.tok, f"lambda needs {len(kinds)} parameters")
    pn = tuple(p.text for p in params)
    body = _cexpr(items[-1], list(reversed(pn)) + list(names))
    return F.Fn(kinds, body, pn)


# --- HCOL -----------------------------------------------------------------


def _hcol(x, names=()):
    if not isinstance(x, Node) or not x.items or not isinstance(x.items[0], Tok):
        raise _err(_tok(x), "expected an operator form")
    head, a = x.items[0].text, x.items[1:]

    def arity(n):
        if len(a) != n:
            raise _err(x.tok, f"{head} takes {n} arguments, got {len(a)}")

    simple = {"scalarprod": H.HScalarProd, "monomials": H.HMonomialEnumerator,
              "infnorm": H.HInfinityNorm, "chebyshev": H.HChebyshevDistance, "vminus": H.HVMinus}
    pair = {"cross": H.HCross, "stack": H.HStack, "compose": H.HCompose, "tless": H.HTLess}
    if head in simple:
        arity(1)
        return simple[head](_int(a[0]))
    if head in pair:
        arity(2)
        return pair[head](_hcol(a[0], names), _hcol(a[1], names))
    if head == "pointwise":
        arity(2)
        return H.HPointwise(_int(a[0]), _fn(a[1], "nc", names))
    if head == "atomic":
        arity(1)
        return H.HAtomic(_fn(a[0], "c", names))
    if head == "binop":
        arity(2)
        return H.HBinOp(_int(a[0]), _fn(a[1], "ncc", names))
    if head == "reduction":
        arity(3)
        return H.HReduction(_int(a[2]), _fn(a[0], "cc", names), _rat(a[1]))
    if head == "evalpoly":
        arity(2)
        return H.HEvalPolynomial(_int(a[0]), _vec(a[1], names))
    if head in ("prepend", "append"):
        arity(3)
        cls = H.HPrepend if head == "prepend" else H.HAppend
        return cls(_int(a[0]), _int(a[1]), _vec(a[2], names))
    if head in ("inductor", "induction"):
        arity(3)
        cls = H.HInductor if head == "inductor" else H.HInduction
        return cls(_int(a[0]), _fn(a[1], "cc", names), _rat(a[2]))
    raise _err(x.tok, f"unknown HCOL operator {head!r}")


# --- Sigma-HCOL -----------------------------------------------------------


def _shcol(x, names=()):
    if not isinstance(x, Node) or not x.items or not isinstance(x.items[0], Tok):
        raise _err(_tok(x), "expected an operator form")
    head, a = x.items[0].text, x.items[1:]

    def arity(n):
        if len(a) != n:
            raise _err(x.tok, f"{head} takes {n} arguments, got {len(a)}")

    if head in ("embed", "pick"):
        arity(3)
        cls = S.Embed if head == "embed" else S.Pick
        return cls(_rat(a[0]), _int(a[1]), _nat(a[2], names))
    if head in ("scatter", "gather"):
        arity(4)
        if not (isinstance(a[3], Node) and a[3].bracket):
            raise _err(_tok(a[3]), "expected an index map [..]")
        cls = S.Scatter if head == "scatter" else S.Gather
        return cls(_rat(a[0]), _int(a[1]), _int(a[2]), tuple(_int(v) for v in a[3].items))
    if head == "lift":
        arity(2)
        return S.LiftHOperator(_hcol(a[1], names), _rat(a[0]))
    if head == "pointwise":
        arity(3)
        return S.SHPointwise(_rat(a[0]), _int(a[1]), _fn(a[2], "nc", names))
    if head == "binop":
        arity(3)
        return S.SHBinOp(_rat(a[0]), _int(a[1]), _fn(a[2], "ncc", names))
    if head == "inductor":
        arity(4)
        return S.SHInductor(_rat(a[0]), _nat(a[1], names), _fn(a[2], "cc", names), _rat(a[3]))
    if head == "apply2union":
        arity(4)
        return S.Apply2Union(_rat(a[0]), _fn(a[1], "cc", names), _shcol(a[2], names),
                             _shcol(a[3], names))
    if head in ("safe", "unsafe"):
        arity(1)
        return (S.SafeCast if head == "safe" else S.UnSafeCast)(_shcol(a[0], names))
    if head == "compose":
        arity(2)
        return S.SHCompose(_shcol(a[0], names), _shcol(a[1], names))
    if head == "ireduction":
        arity(6)
        j = _binder(a[4])
        return S.IReduction(_rat(a[0]), _fn(a[1], "cc", names), _rat(a[2]), _int(a[3]),
                            _shcol(a[5], [j] + list(names)))
    if head == "iunion":
        arity(5)
        j = _binder(a[3])
        return S.IUnion(_rat(a[0]), _fn(a[1], "cc", names), _int(a[2]),
                        _shcol(a[4], [j] + list(names)))
    raise _err(x.tok, f"unknown Sigma-HCOL operator {head!r}")


def _binder(x):
    if isinstance(x, Tok) and re.fullmatch(r"[A-Za-z_]\w*", x.text):
        return x.text
    raise _err(_tok(x), "expected an index name")


# --- MSHCOL ---------------------------------------------------------------


def _mshcol(x, names=()):
    if not isinstance(x, Node) or not x.items or not isinstance(x.items[0], Tok):
        raise _err(_tok(x), "expected an operator form")
    head, a = x.items[0].text, x.items[1:]

    def arity(n):
        if len(a) != n:
            raise _err(x.tok, f"{head} takes {n} arguments, got {len(a)}")

    if head in ("embed", "pick"):
        arity(2)
        cls = M.MSHEmbed if head == "embed" else M.MSHPick
        return cls(_int(a[0]), _nat(a[1], names))
    if head == "pointwise":
        arity(2)
        return M.MSHPointwise(_int(a[0]), _fn(a[1], "nc", names))
    if head == "binop":
        arity(2)
        return M.MSHBinOp(_int(a[0]), _fn(a[1], "ncc", names))
    if head == "inductor":
        arity(3)
        return M.MSHInductor(_nat(a[0], names), _fn(a[1], "cc", names), _rat(a[2]))
    if head == "apply2union":
        arity(3)
        return M.MApply2Union(_fn(a[0], "cc", names), _mshcol(a[1], names), _mshcol(a[2], names))
    if head == "compose":
        arity(2)
        return M.MSHCompose(_mshcol(a[0], names), _mshcol(a[1], names))
    if head == "ireduction":
        arity(5)
        j = _binder(a[3])
        return M.MSHIReduction(_rat(a[0]), _fn(a[1], "cc", names), _int(a[2]),
                               _mshcol(a[4], [j] + list(names)))
    if head == "iunion":
        arity(3)
        j = _binder(a[1])
        return M.MSHIUnion(_int(a[0]), _mshcol(a[2], [j] + list(names)))
    raise _err(x.tok, f"unknown MSHCOL operator {head!r}")


# --- DHCOL ----------------------------------------------------------------

# constructor -> argument kinds: i nat literal, v carrier literal, e sub-term, t (term, term) pair
_DSH = {
    "NVar": "i", "NConst": "i", "PVar": "i", "AVar": "i", "AConst": "v",
    "MPtrDeref": "e", "MConst": "bi", "ANth": "ee", "AAbs": "e",
    "DSHNop": "", "DSHAssign": "tt", "DSHIMap": "ieee", "DSHBinOp": "ieee",
    "DSHMemMap2": "ieeee", "DSHPower": "ettev", "DSHLoop": "ie", "DSHAlloc": "ie",
    "DSHMemInit": "ev", "DSHSeq": "ee",
}
for _op in D.N_OPS + D.A_OPS:
    _DSH[_op] = "ee"

_FLOAT = re.compile(r"-?(\d+\.\d*([eE][-+]?\d+)?|\d+[eE][-+]?\d+|inf|nan)")
_RATIONAL = re.compile(r"-?\d+(/\d+)?")


def _dvalue(t):
    if _RATIONAL.fullmatch(t.text):
        return Fraction(t.text)
    if _FLOAT.fullmatch(t.text):
        return float(t.text)
    raise _err(t, f"expected a numeric literal, found {t.text!r}")


def _dterm(st):
    t = st.next("a constructor")
    if t.text == "(":
        e = _dterm(st)
        if st.peek() is not None and st.peek().text == ",":
            st.next()
            e2 = _dterm(st)
            st.expect(")")
            return (e, e2)
        st.expect(")")
        return e
    if t.text not in _DSH:
        raise _err(t, f"unknown constructor {t.text!r}")
    args = [_darg(st, k) for k in _DSH[t.text]]
    return _build(t, args)


def _darg(st, kind):
    p = st.peek()
    if p is None:
        st.next("an argument")
    if kind == "i":
        t = st.next()
        if not re.fullmatch(r"\d+", t.text):
            raise _err(t, f"expected a natural number, found {t.text!r}")
        return int(t.text)
    if kind == "v":
        return _dvalue(st.next())
    if kind == "b":
        st.expect("{")
        cells = []
        while st.peek() is not None and st.peek().text != "}":
            k = st.next()
            st.expect(":")
            cells.append((int(k.text), _dvalue(st.next())))
            if st.peek() is not None and st.peek().text == ",":
                st.next()
        st.expect("}")
        return tuple(cells)
    if p.text == "(":
        v = _dterm(st)
    elif _DSH.get(p.text) == "":
        v = _dterm(st)
    else:
        raise _err(p, f"argument must be parenthesised, found {p.text!r}")
    if kind == "t" and not isinstance(v, tuple):
        raise _err(p, "expected a (pointer, offset) pair")
    if kind == "e" and isinstance(v, tuple):
        raise _err(p, "unexpected pair")
    return v


def _build(t, args):
    c = t.text
    if c in D.N_OPS:
        return D.NBin(c, *args)
    if c in D.A_OPS:
        return D.ABin(c, *args)
    return getattr(D, c)(*args)


def parse_dhcol(text: str):
    st = _Stream(text)
    p = st.peek()
    if p is None:
        st.next("a program")
    e = _dterm(st)
    if st.peek() is not None and st.peek().text == ".":
        st.next()
    extra = st.peek()
    if extra is not None:
        raise _err(extra, f"trailing input {extra.text!r}")
    if isinstance(e, tuple):
        raise _err(p, "a program cannot be a pair")
    return e


# --- entry points ---------------------------------------------------------


def parse_program(text: str, language: str = "hcol"):
    """Parse one operator; dimensions are checked for the functional languages."""
    if language == "dhcol":
        return parse_dhcol(text)
    reader = {"hcol": _hcol, "shcol": _shcol, "mshcol": _mshcol}.get(language)
    if reader is None:
        raise ValueError(f"unknown language {language!r}; choose from {LANGUAGES}")
    e = reader(read_sexpr(text))
    dims_of(e, language)
    return e


def dims_of(e, language):
    return {"hcol": H.dims, "shcol": S.sh_dims, "mshcol": M.msh_dims}[language](e)


def _gnames(names):
    return list(names) + [f"g{k}" for k in range(64)]


def _pfn(fn, names):
    for op in F.CBIN_OPS:
        if fn.kinds == "cc" and F.is_named_binary(fn, op):
            return op
        if fn.kinds == "ncc" and F.is_ignore_index_binop(fn, op):
            return op
    if fn == F.unary_abs():
        return "abs"
    return F.show(fn, _gnames(names))


def _pq(q):
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _pn(e, names):
    return F.show(e, _gnames(names))


def print_program(e, language: str = "hcol", names=()) -> str:
    if language == "dhcol":
        return D.render(e)
    fn = {"hcol": _print_h, "shcol": _print_sh, "mshcol": _print_m}[language]
    return fn(e, list(names))


def _print_h(e, names):
    t = type(e)
    simple = {H.HScalarProd: "scalarprod", H.HMonomialEnumerator: "monomials",
              H.HInfinityNorm: "infnorm", H.HChebyshevDistance: "chebyshev", H.HVMinus: "vminus"}
    pair = {H.HCross: "cross", H.HStack: "stack", H.HCompose: "compose", H.HTLess: "tless"}
    if t in simple:
        return f"({simple[t]} {e.n})"
    if t in pair:
        return f"({pair[t]} {_print_h(e.f, names)} {_print_h(e.g, names)})"
    if t is H.HPointwise:
        return f"(pointwise {e.n} {_pfn(e.f, names)})"
    if t is H.HAtomic:
        return f"(atomic {_pfn(e.f, names)})"
    if t is H.HBinOp:
        return f"(binop {e.n} {_pfn(e.f, names)})"
    if t is H.HReduction:
        return f"(reduction {_pfn(e.f, names)} {_pq(e.z)} {e.n})"
    if t is H.HEvalPolynomial:
        return f"(evalpoly {e.m} {_pn(e.a, names)})"
    if t in (H.HPrepend, H.HAppend):
        kw = "prepend" if t is H.HPrepend else "append"
        return f"({kw} {e.m} {e.n} {_pn(e.a, names)})"
    if t in (H.HInductor, H.HInduction):
        kw = "inductor" if t is H.HInductor else "induction"
        return f"({kw} {e.n} {_pfn(e.f, names)} {_pq(e.z)})"
    raise TypeError(f"not an HCOL operator: {e!r}")


def _print_sh(e, names):
    t = type(e)
    if t in (S.Embed, S.Pick):
        kw = "embed" if t is S.Embed else "pick"
        return f"({kw} {_pq(e.s)} {e.n} {_pn(e.b, names)})"
    if t in (S.Scatter, S.Gather):
        kw = "scatter" if t is S.Scatter else "gather"
        return f"({kw} {_pq(e.s)} {e.n} {e.m} [{' '.join(map(str, e.index_map))}])"
    if t is S.LiftHOperator:
        return f"(lift {_pq(e.s)} {_print_h(e.h, names)})"
    if t is S.SHPointwise:
        return f"(pointwise {_pq(e.s)} {e.n} {_pfn(e.f, names)})"
    if t is S.SHBinOp:
        return f"(binop {_pq(e.s)} {e.n} {_pfn(e.f, names)})"
    if t is S.SHInductor:
        return f"(inductor {_pq(e.s)} {_pn(e.n, names)} {_pfn(e.f, names)} {_pq(e.z)})"
    if t is S.Apply2Union:
        return (f"(apply2union {_pq(e.s)} {_pfn(e.dot, names)} {_print_sh(e.f, names)} "
                f"{_print_sh(e.g, names)})")
    if t in (S.SafeCast, S.UnSafeCast):
        return f"({'safe' if t is S.SafeCast else 'unsafe'} {_print_sh(e.f, names)})"
    if t is S.SHCompose:
        return f"(compose {_print_sh(e.f, names)} {_print_sh(e.g, names)})"
    j = f"j{len(names)}"
    if t is S.IReduction:
        return (f"(ireduction {_pq(e.s)} {_pfn(e.dot, names)} {_pq(e.z)} {e.n} {j} "
                f"{_print_sh(e.body, [j] + names)})")
    if t is S.IUnion:
        return (f"(iunion {_pq(e.s)} {_pfn(e.dot, names)} {e.n} {j} "
                f"{_print_sh(e.body, [j] + names)})")
    raise TypeError(f"not a Sigma-HCOL operator: {e!r}")


def _print_m(e, names):
    t = type(e)
    if t in (M.MSHEmbed, M.MSHPick):
        kw = "embed" if t is M.MSHEmbed else "pick"
        return f"({kw} {e.n} {_pn(e.b, names)})"
    if t is M.MSHPointwise:
        return f"(pointwise {e.n} {_pfn(e.f, names)})"
    if t is M.MSHBinOp:
        return f"(binop {e.n} {_pfn(e.f, names)})"
    if t is M.MSHInductor:
        return f"(inductor {_pn(e.n, names)} {_pfn(e.f, names)} {_pq(e.z)})"
    if t is M.MApply2Union:
        return f"(apply2union {_pfn(e.dot, names)} {_print_m(e.f, names)} {_print_m(e.g, names)})"
    if t is M.MSHCompose:
        return f"(compose {_print_m(e.f, names)} {_print_m(e.g, names)})"
    j = f"j{len(names)}"
    if t is M.MSHIReduction:
        return (f"(ireduction {_pq(e.z)} {_pfn(e.dot, names)} {e.n} {j} "
                f"{_print_m(e.body, [j] + names)})")
    if t is M.MSHIUnion:
        return f"(iunion {e.n} {j} {_print_m(e.body, [j] + names)})"
    raise TypeError(f"not an MSHCOL operator: {e!r}")
