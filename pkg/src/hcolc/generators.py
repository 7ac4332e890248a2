"""Seeded random programs for property tests and the fuel check."""

from __future__ import annotations

import random
from fractions import Fraction

from . import dhcol as D
from . import hcol as H
from . import scalar as F

# --- HCOL -----------------------------------------------------------------


def _unary_fn(rng, constants):
    c = F.const(rng.choice(constants))
    x = F.CVar(0)
    return F.indexed_unary(rng.choice([
        F.CAbs(x),
        F.CBin("mul", x, x),
        F.CBin("plus", x, c),
        F.CBin("max", x, c),
        F.CBin("sub", c, x),
    ]))


def _binary_fn(rng):
    return F.ignore_index(rng.choice(["plus", "sub", "mul", "min", "max"]))


def random_hcol(rng: random.Random, n: int, depth: int = 3, constants=(0, 1), poly_global=3):
    """A well-typed operator with input dimension `n`; returns (expr, out_dim).

    Global 0 is a coefficient vector of size `poly_global`."""
    choices = ["pointwise", "reduction", "infnorm"]
    if n % 2 == 0:
        choices += ["binop", "vminus", "scalarprod", "chebyshev"]
    if n == 1:
        choices += ["inductor", "monomials", "evalpoly", "atomic"]
    if depth > 0:
        choices += ["compose", "compose", "stack"]
        if n >= 2:
            choices += ["cross", "cross"]
    k = rng.choice(choices)
    if k == "pointwise":
        return H.HPointwise(n, _unary_fn(rng, constants)), n
    if k == "reduction":
        op = rng.choice(["plus", "max", "min"])
        return H.HReduction(n, F.binary(op), Fraction(rng.choice(constants))), 1
    if k == "infnorm":
        return H.HInfinityNorm(n), 1
    if k == "binop":
        return H.HBinOp(n // 2, _binary_fn(rng)), n // 2
    if k == "vminus":
        return H.HVMinus(n // 2), n // 2
    if k == "scalarprod":
        return H.HScalarProd(n // 2), 1
    if k == "chebyshev":
        return H.HChebyshevDistance(n // 2), 1
    if k == "inductor":
        return H.HInductor(rng.randint(0, 3), F.binary(rng.choice(["plus", "mul"])),
                           Fraction(rng.choice(constants))), 1
    if k == "monomials":
        m = rng.randint(0, 3)
        return H.HMonomialEnumerator(m), m + 1
    if k == "evalpoly":
        return H.HEvalPolynomial(poly_global, F.VVar(0)), 1
    if k == "atomic":
        return H.HAtomic(F.unary_abs()), 1
    if k == "compose":
        g, m = random_hcol(rng, n, depth - 1, constants, poly_global)
        f, o = random_hcol(rng, m, depth - 1, constants, poly_global)
        return H.HCompose(f, g), o
    if k == "stack":
        f, o1 = random_hcol(rng, n, depth - 1, constants, poly_global)
        g, o2 = random_hcol(rng, n, depth - 1, constants, poly_global)
        return H.HStack(f, g), o1 + o2
    n1 = rng.randint(1, n - 1)
    f, o1 = random_hcol(rng, n1, depth - 1, constants, poly_global)
    g, o2 = random_hcol(rng, n - n1, depth - 1, constants, poly_global)
    return H.HCross(f, g), o1 + o2


# --- DHCOL ----------------------------------------------------------------


def random_dhcol(rng: random.Random, depth: int = 6, max_loop: int = 8, blocks: int = 2):
    """A scoped but otherwise arbitrary operator over `blocks` pointers in
    the initial context; it may well fail at run time. Used to exercise the
    fuel estimate."""
    return _rop(rng, depth, max_loop, ["p"] * blocks)


def _var_of(rng, ctx, kind):
    ks = [k for k, c in enumerate(ctx) if c == kind]
    return rng.choice(ks) if ks else None


def _rn(rng, ctx):
    k = _var_of(rng, ctx, "n")
    if k is not None and rng.random() < 0.6:
        return D.NVar(k)
    return D.NConst(rng.randint(0, 3))


def _ra(rng, ctx, depth=2):
    r = rng.random()
    k = _var_of(rng, ctx, "c")
    if depth == 0 or r < 0.3:
        if k is not None and rng.random() < 0.7:
            return D.AVar(k)
        return D.AConst(Fraction(rng.choice([0, 1])))
    if r < 0.4:
        return D.AAbs(_ra(rng, ctx, depth - 1))
    if r < 0.5:
        p = _var_of(rng, ctx, "p")
        return D.ANth(D.MPtrDeref(D.PVar(p)), _rn(rng, ctx))
    return D.ABin(rng.choice(D.A_OPS), _ra(rng, ctx, depth - 1), _ra(rng, ctx, depth - 1))


def _rop(rng, depth, max_loop, ctx):
    def ptr():
        return D.PVar(_var_of(rng, ctx, "p"))

    leaf = ["nop", "assign", "imap", "binop", "memmap2", "power", "meminit"]
    kinds = leaf + (["loop", "alloc", "seq", "seq"] if depth > 0 else [])
    k = rng.choice(kinds)
    n = rng.randint(0, 4)
    if k == "nop":
        return D.DSHNop()
    if k == "assign":
        return D.DSHAssign((ptr(), _rn(rng, ctx)), (ptr(), _rn(rng, ctx)))
    if k == "imap":
        return D.DSHIMap(n, ptr(), ptr(), _ra(rng, ["c", "n"] + ctx))
    if k == "binop":
        return D.DSHBinOp(n, ptr(), ptr(), _ra(rng, ["c", "c", "n"] + ctx))
    if k == "memmap2":
        return D.DSHMemMap2(n, ptr(), ptr(), ptr(), _ra(rng, ["c", "c"] + ctx))
    if k == "power":
        return D.DSHPower(_rn(rng, ctx), (ptr(), _rn(rng, ctx)), (ptr(), _rn(rng, ctx)),
                          _ra(rng, ["c", "c"] + ctx), Fraction(rng.choice([0, 1])))
    if k == "meminit":
        return D.DSHMemInit(ptr(), Fraction(rng.choice([0, 1])))
    if k == "loop":
        return D.DSHLoop(rng.randint(0, max_loop), _rop(rng, depth - 1, max_loop, ["n"] + ctx))
    if k == "alloc":
        return D.DSHAlloc(rng.randint(1, 4), _rop(rng, depth - 1, max_loop, ["p"] + ctx))
    return D.DSHSeq(_rop(rng, depth - 1, max_loop, ctx), _rop(rng, depth - 1, max_loop, ctx))


def random_memory(rng, sizes):
    """Context and memory with one writable block per size."""
    sigma = tuple(D.entry(D.PtrVal(a, s), False) for a, s in enumerate(sizes))
    m = {a: {k: Fraction(rng.randint(-4, 4)) for k in range(s)} for a, s in enumerate(sizes)}
    return sigma, m
