"""Bundled programs: the dynamic-window collision monitor and the small
loop program used to illustrate closure traces."""

from __future__ import annotations

import itertools
from fractions import Fraction

from . import dhcol as D
from . import hcol as H
from . import scalar as F
from .analysis import interval

# Parameter ranges: obstacle speed V, acceleration A, braking b, sample period eps.
PARAM_RANGES = {
    "V": (Fraction(0), Fraction(20)),
    "A": (Fraction(0), Fraction(5)),
    "b": (Fraction(1), Fraction(6)),
    "eps": (Fraction(1, 100), Fraction(1, 10)),
}
SPEED_RANGE = (Fraction(0), Fraction(20))
COORD_RANGE = (Fraction(-5000), Fraction(5000))

# input layout: [v, x_robot, y_robot, x_obstacle, y_obstacle]
INPUT_DIM = 5
GLOBAL_SIZES = (3,)

DYNWIN_TRACE = [("R4", []), ("R2", [1, 0]), ("R1", [1, 0, 0]), ("R3", [1, 1])]

EXPECTED_SYMBOLIC = (
    "SZLess (SPlus (SPlus (SPlus SConstZero (SMult SConstOne (SVar 0))) "
    "(SMult (SMult SConstOne (SVar 3)) (SVar 1))) "
    "(SMult (SMult (SMult SConstOne (SVar 3)) (SVar 3)) (SVar 2))) "
    "(SMax (SMax SConstZero (SAbs (SSub (SVar 4) (SVar 6)))) (SAbs (SSub (SVar 5) (SVar 7))))"
)

# bounds reported by an external prover for the two sides of the comparison
REFERENCE_LHS_ERROR = 2e-13
REFERENCE_RHS_ERROR = 9.1e-13
REFERENCE_MARGIN = 1.11e-12


def dynwin_hcol() -> H.HExpr:
    """p(v) < ||p_r - p_o||_inf with the coefficient vector as global 0."""
    return H.HTLess(H.HEvalPolynomial(3, F.VVar(0)), H.HChebyshevDistance(2))


def coefficients(V, A, b, eps):
    """a0, a1, a2 from the monitor parameters, in whatever number type is passed."""
    a0 = (A / b + 1) * (A / 2 * eps * eps + eps * V)
    a1 = V / b + eps * (A / b + 1)
    a2 = 1 / (2 * b)
    return a0, a1, a2


def coefficient_ranges():
    """Each coefficient is monotone in every parameter, so corner values
    give the exact range."""
    names = list(PARAM_RANGES)
    corners = [dict(zip(names, c)) for c in itertools.product(*PARAM_RANGES.values())]
    vals = [coefficients(c["V"], c["A"], c["b"], c["eps"]) for c in corners]
    return [(min(v[k] for v in vals), max(v[k] for v in vals)) for k in range(3)]


def symbolic_ranges():
    """Ranges keyed by symbolic variable: 0-2 coefficients, 3 speed, 4-7 coordinates."""
    env = {k: interval(lo, hi) for k, (lo, hi) in enumerate(coefficient_ranges())}
    env[3] = interval(*SPEED_RANGE)
    for k in range(4, 8):
        env[k] = interval(*COORD_RANGE)
    return env


GAPPA_NAMES = {0: "a0", 1: "a1", 2: "a2", 3: "v", 4: "x1", 5: "y1", 6: "x2", 7: "y2"}


def direct_eval(a, x):
    """The monitor written out by hand over exact rationals."""
    v, xr, yr, xo, yo = x
    poly = a[2] * v * v + a[1] * v + a[0]
    dist = max(abs(xr - xo), abs(yr - yo))
    return Fraction(1) if poly < dist else Fraction(0)


def random_params(rng):
    """Draw (V, A, b, eps) as rationals with small denominators."""
    out = []
    for lo, hi in PARAM_RANGES.values():
        out.append(lo + (hi - lo) * Fraction(rng.randint(0, 1000), 1000))
    return out


def random_input(rng):
    v = SPEED_RANGE[1] * Fraction(rng.randint(0, 4000), 4000)
    coords = [Fraction(rng.randint(-500000, 500000), 100) for _ in range(4)]
    return [v] + coords


def random_float_sample(rng):
    """Binary64 coefficients computed from sampled parameters, plus inputs."""
    V, A, b, eps = (rng.uniform(float(lo), float(hi)) for lo, hi in PARAM_RANGES.values())
    a = list(coefficients(V, A, b, eps))
    x = [rng.uniform(0, 20)] + [rng.uniform(-5000, 5000) for _ in range(4)]
    return a, x


# --- closure trace illustration -------------------------------------------


def closure_example_program() -> D.DSHOperator:
    return D.DSHLoop(3, D.DSHIMap(
        3, D.PVar(1), D.PVar(2),
        D.APlus(D.ANth(D.MPtrDeref(D.PVar(3)), D.NVar(1)),
                D.ANth(D.MPtrDeref(D.PVar(5)), D.NMult(D.NConst(3), D.NVar(2))))))


def closure_example_expected() -> list:
    out = []
    for k in (2, 1, 0):
        ctx = f"[DSHOtherVar; DSHIndex 3; DSHIndex {k}; DSHOtherVar; DSHOtherVar; DSHOtherVar]"
        out.append(f"({ctx}, NVar 1)")
        out.append(f"({ctx}, NMult (NConst 3) (NVar 2))")
    return out
