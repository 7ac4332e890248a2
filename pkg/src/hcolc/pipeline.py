"""End-to-end compilation with a validator after every stage, the
five-step codegen harness and the DynWin numerical analysis run."""

from __future__ import annotations

import json
import math
import os
import random
import shutil
import struct
import subprocess
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction

from . import analysis as A
from . import dhcol as D
from . import fixtures as X
from . import hcol as H
from . import llvmgen as G
from . import lowering as L
from . import mshcol as M
from . import sigma as S
from . import symbolic as Sy
from .errors import PipelineError, StageFailure, StructureMismatch

LLVM_ENV = "HCOLC_LLVM"

# --- external LLVM --------------------------------------------------------


def llvm_tool():
    """Path of `lli` or `clang`, or None when disabled or absent.

    The HCOLC_LLVM variable may name a tool, or be 0/off to disable."""
    v = os.environ.get(LLVM_ENV)
    if v is not None:
        if v.strip().lower() in ("", "0", "off", "no", "none"):
            return None
        return shutil.which(v) or (v if os.path.exists(v) else None)
    return shutil.which("lli") or shutil.which("clang")


def run_external(ll_text: str, tool: str, timeout=120) -> list:
    """Execute an emitted module and return the printed doubles."""
    with tempfile.TemporaryDirectory() as d:
        src = os.path.join(d, "prog.ll")
        with open(src, "w") as fh:
            fh.write(ll_text)
        if os.path.basename(tool).startswith("lli"):
            cmd = [tool, src]
        else:
            exe = os.path.join(d, "prog")
            subprocess.run([tool, "-O0", "-w", src, "-o", exe], check=True,
                           capture_output=True, timeout=timeout)
            cmd = [exe]
        out = subprocess.run(cmd, check=True, capture_output=True, text=True, timeout=timeout)
    return [float.fromhex(t) for t in out.stdout.split()]


def _bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", x))[0]


# --- harness --------------------------------------------------------------


@dataclass
class TestResult:
    name: str
    steps: list = field(default_factory=list)

    def step(self, n, status, **detail):
        self.steps.append({"step": n, "status": status, **detail})

    @property
    def ok(self):
        return all(s["status"] in ("Pass", "Skipped") for s in self.steps)

    def status_of(self, n):
        return next(s["status"] for s in self.steps if s["step"] == n)

    def to_json(self):
        return {"name": self.name, "ok": self.ok, "steps": self.steps}


def random_pool(seed, size):
    rng = random.Random(seed)
    return [rng.uniform(-8.0, 8.0) for _ in range(size)]


def run_test_harness(p: L.DProgram, seed=0, pool_size=None, llvm="auto") -> tuple:
    """Pool, compile, external run, float evaluation, bit comparison.
    Returns (TestResult, emitted text)."""
    res = TestResult(p.name)
    need = sum(g.size for g in p.globals) + p.i
    data = random_pool(seed, pool_size if pool_size is not None else max(need, 1))
    res.step(1, "Pass", pool=len(data), cells_needed=need, cyclic=len(data) < need)
    try:
        text = G.emit_text(G.compile_w_main(p, data))
        res.step(2, "Pass", lines=len(text.splitlines()))
    except PipelineError as err:
        res.step(2, "Fail", error=repr(err))
        return res, None
    tool = llvm_tool() if llvm == "auto" else llvm
    ir_out = None
    if tool is None:
        res.step(3, "Skipped", reason="no external LLVM tool")
    else:
        try:
            ir_out = run_external(text, tool)
            res.step(3, "Pass", tool=os.path.basename(tool))
        except (subprocess.SubprocessError, OSError, ValueError) as err:
            res.step(3, "Fail", error=str(err)[:300])
    gvals, xvals = G.split_pool(p, data)
    r, yaddr = L.run_program(p, gvals, xvals, D.FHCOL)
    if type(r) is not D.Ok:
        res.step(4, "Fail", result=repr(r))
        return res, text
    y = r.memory[yaddr]
    res.step(4, "Pass", written=len(y))
    if ir_out is None:
        res.step(5, "Skipped", reason="no external output")
    elif len(ir_out) != p.o:
        res.step(5, "Fail", reason=f"expected {p.o} printed values, got {len(ir_out)}")
    else:
        bad = [k for k in sorted(y) if _bits(y[k]) != _bits(ir_out[k])]
        if bad:
            res.step(5, "Fail", offsets=bad, evaluator=[y[k].hex() for k in bad],
                     llvm=[ir_out[k].hex() for k in bad])
        else:
            res.step(5, "Pass", compared=len(y))
    return res, text


def _prog(name, i, o, op, globals_=()):
    return L.DProgram(i, o, name, tuple(L.Global(f"g{k}", n) for k, n in enumerate(globals_)), op)


def harness_programs() -> list:
    """Twelve float programs: one per imperative operator, the Chebyshev
    distance and DynWin, the last two compiled through the pipeline."""
    P, N, AV = D.PVar, D.NConst, D.AVar
    progs = [
        _prog("nop", 2, 2, D.DSHNop()),
        _prog("assign", 3, 1, D.DSHAssign((P(0), N(2)), (P(1), N(0)))),
        _prog("imap", 4, 4, D.DSHIMap(4, P(1), P(2), D.APlus(
            D.AMult(AV(0), AV(0)), D.ANth(D.MPtrDeref(P(2)), D.NVar(1)))), (4,)),
        _prog("binop", 6, 3, D.DSHBinOp(3, P(0), P(1), D.AMinus(AV(1), D.AAbs(AV(0))))),
        _prog("memmap2", 3, 3, D.DSHMemMap2(3, P(1), P(0), P(2), D.AMax(AV(1), AV(0))), (3,)),
        _prog("power", 1, 1, D.DSHPower(N(5), (P(0), N(0)), (P(1), N(0)),
                                        D.AMult(AV(0), AV(1)), 1.0)),
        _prog("loop", 4, 4, D.DSHLoop(4, D.DSHAssign((P(1), D.NMinus(N(3), D.NVar(0))),
                                                     (P(2), D.NVar(0))))),
        _prog("alloc", 2, 2, D.DSHAlloc(2, D.seq(
            D.DSHIMap(2, P(1), P(0), D.AMin(AV(0), D.AConst(1.0))),
            D.DSHBinOp(1, P(0), P(2), D.AZless(AV(1), AV(0)))))),
        _prog("meminit", 1, 3, D.DSHMemInit(P(1), 1.0)),
        _prog("seq", 2, 2, D.seq(D.DSHMemInit(P(1), 0.0),
                                 D.DSHAssign((P(0), N(1)), (P(1), N(0))),
                                 D.DSHIMap(2, P(1), P(1), D.APlus(AV(0), AV(0))))),
    ]
    progs.append(compile_hcol(H.HChebyshevDistance(2), (), "chebyshev"))
    progs.append(compile_hcol(X.dynwin_hcol(), X.GLOBAL_SIZES, "dynwin", X.DYNWIN_TRACE))
    return progs


def compile_hcol(h, global_sizes=(), name="op", trace=None, fhcol=True) -> L.DProgram:
    """Pipeline without validation, for fixtures."""
    trace = H.derive_breakdown_trace(h) if trace is None else trace
    b = H.apply_breakdown_trace(h, trace)
    lift = S.lift_hcol(b)
    se = S.apply_sh_rewrites(lift, S.derive_sh_trace(lift))
    p = L.compile_program(L.shcol_to_mshcol(se), global_sizes, name)
    return L.translate_program(p) if fhcol else p


def run_harness_suite(seed=0, llvm="auto") -> dict:
    out = []
    for k, p in enumerate(harness_programs()):
        r, _ = run_test_harness(p, seed + k, llvm=llvm)
        out.append(r.to_json())
    return {"seed": seed, "ok": all(r["ok"] for r in out), "programs": out}


# --- staged pipeline ------------------------------------------------------


@dataclass
class PipelineConfig:
    hcol: object
    global_sizes: tuple = ()
    name: str = "op"
    breakdown_trace: list | None = None
    sh_trace: list | None = None
    samples: int = 200
    rf_samples: int = 200
    seed: int = 0
    out_ll: str | None = None
    run_llvm: object = "auto"
    input_sampler: object = None  # rng -> (globals, x) floats


@dataclass
class PipelineReport:
    name: str
    stages: list = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    program: object = field(default=None, repr=False)
    rhcol_program: object = field(default=None, repr=False)

    @property
    def ok(self):
        return all(s["status"] in ("Pass", "Skipped") for s in self.stages)

    def to_json(self):
        return {"name": self.name, "ok": self.ok, "stages": self.stages,
                "artifacts": self.artifacts}


def _stage(rep, name, verdicts):
    js = {k: v.to_json() for k, v in verdicts.items()}
    status = "Pass" if all(v.ok for v in verdicts.values()) else "Fail"
    rep.stages.append({"stage": name, "status": status, "validators": js})
    if status != "Pass":
        raise StageFailure(name, js)


def _default_sampler(global_sizes, i):
    def draw(rng):
        g = [[rng.uniform(-8, 8) for _ in range(n)] for n in global_sizes]
        return g, [rng.uniform(-8, 8) for _ in range(i)]
    return draw


def rf_pairs(p_r, p_f, samples, seed, sampler):
    """Paired rational/float states; rationals are the exact values of the
    sampled doubles."""
    rng = random.Random(seed)
    sig, mem = [], []
    for _ in range(samples):
        g, x = sampler(rng)
        _add_pair(p_r, p_f, g, x, sig, mem)
    return sig, mem


def _add_pair(p_r, p_f, g, x, sig, mem):
    sr, mr = L.program_state(p_r, [[Fraction(v) for v in b] for b in g], [Fraction(v) for v in x])
    sf, mf = L.program_state(p_f, g, x)
    sig.append((sr, sf))
    mem.append((mr, mf))


def run_pipeline(cfg: PipelineConfig, report: PipelineReport | None = None) -> PipelineReport:
    """Breakdown, lifting, memory blocks, imperative code over rationals,
    then floats, then LLVM IR. Raises StageFailure at the first failing
    validator; the report so far is attached to the exception."""
    rep = report or PipelineReport(cfg.name)
    try:
        _run(cfg, rep)
    except StageFailure as err:
        err.report = rep
        raise
    return rep


def _run(cfg, rep):
    gs, n, seed = tuple(cfg.global_sizes), cfg.samples, cfg.seed
    h = cfg.hcol
    try:
        trace = cfg.breakdown_trace if cfg.breakdown_trace is not None else H.derive_breakdown_trace(h)
        b = H.apply_breakdown_trace(h, trace)
    except PipelineError as err:
        rep.stages.append({"stage": "breakdown", "status": "Fail", "error": str(err)})
        raise StageFailure("breakdown", str(err)) from None
    rep.artifacts["breakdown_trace"] = [[r, list(p)] for r, p in trace]
    _stage(rep, "breakdown", {"extensional_equiv": H.check_extensional_equiv(h, b, n, seed, gs)})

    try:
        lift = S.lift_hcol(b)
        st = cfg.sh_trace if cfg.sh_trace is not None else S.derive_sh_trace(lift)
        se = S.apply_sh_rewrites(lift, st)
        left = S.residual_lifts(se)
        if left:
            raise PipelineError(f"operators left lifted: {left}")
    except PipelineError as err:
        rep.stages.append({"stage": "sigma", "status": "Fail", "error": str(err)})
        raise StageFailure("sigma", str(err)) from None
    rep.artifacts["sh_trace"] = [[r, list(p)] for r, p in st]
    _stage(rep, "sigma", {"sh_hcol_equiv": S.check_sh_hcol_equiv(h, se, n, seed, gs),
                          "facts": S.facts_check(se, n, seed, gs)})

    me = L.shcol_to_mshcol(se)
    _stage(rep, "mshcol", {"sh_msh_compat": M.check_sh_msh_compat(se, me, n, seed, gs),
                           "facts": M.msh_facts_check(me, n, seed, gs)})

    try:
        creport = L.CompileReport()
        p = L.compile_program(me, gs, cfg.name, creport)
    except PipelineError as err:
        rep.stages.append({"stage": "dhcol", "status": "Fail", "error": str(err)})
        raise StageFailure("dhcol", str(err)) from None
    sg, m = L.compat_fixture(p)
    rep.artifacts["fuel"] = D.estimate_fuel(p.op)
    _stage(rep, "dhcol", {
        "msh_dsh_compat": L.check_msh_dsh_compat(me, p.op, sg, m, n, seed, p.x_p, p.y_p, p.globals),
        "dsh_pure": L.check_dsh_pure(p.op, p.y_p, sg, m, n, seed)})

    try:
        fp = L.translate_program(p)
    except PipelineError as err:
        rep.stages.append({"stage": "rf-translate", "status": "Fail", "error": repr(err)})
        raise StageFailure("rf-translate", repr(err)) from None
    sampler = cfg.input_sampler or _default_sampler(gs, p.i)
    sig, mem = rf_pairs(p, fp, cfg.rf_samples, seed, sampler)
    yaddr = len(gs) + 1
    try:
        v = D.check_rf_equiv(p.op, fp.op, sig, mem, Fraction(1, 10**6),
                             [(yaddr, k) for k in range(p.o)])
    except StructureMismatch as err:
        rep.stages.append({"stage": "rf-translate", "status": "Fail", "error": str(err)})
        raise StageFailure("rf-translate", str(err)) from None
    _stage(rep, "rf-translate", {"rf_equiv": v})

    res, text = run_test_harness(fp, seed, llvm=cfg.run_llvm)
    rep.stages.append({"stage": "llvm", "status": "Pass" if res.ok else "Fail",
                       "harness": res.to_json()})
    if text is not None:
        rep.artifacts["ll_lines"] = len(text.splitlines())
        if cfg.out_ll:
            with open(cfg.out_ll, "w") as fh:
                fh.write(text)
            rep.artifacts["ll_path"] = cfg.out_ll
    if not res.ok:
        raise StageFailure("llvm", res.to_json())
    rep.program = fp
    rep.rhcol_program = p


# --- DynWin ---------------------------------------------------------------


def dynwin_sampler(rng):
    a, x = X.random_float_sample(rng)
    return [a], x


def dynwin_config(seed=0, samples=200, out_ll=None, run_llvm="auto") -> PipelineConfig:
    return PipelineConfig(X.dynwin_hcol(), X.GLOBAL_SIZES, "dynwin", X.DYNWIN_TRACE, None,
                          samples, samples, seed, out_ll, run_llvm, dynwin_sampler)


def dynwin_analysis(fp: L.DProgram, samples=10**6, seed=0) -> dict:
    """Symbolic form, per-side error bounds checked by sampling, and the margin."""
    trace = []
    s = A.symbolic_exec(fp, trace=trace)
    if s.op != "SZLess":
        raise PipelineError(f"expected a comparison at the output, got {s.op}")
    env = X.symbolic_ranges()
    lhs = A.interval_error_bound(s.args[0], env)
    rhs = A.interval_error_bound(s.args[1], env)
    eps = A.safety_margin(lhs.abs_error, rhs.abs_error)
    out = {
        "symbolic": Sy.render(s),
        "matches_reference": Sy.alpha_equivalent(s, Sy.parse(X.EXPECTED_SYMBOLIC)),
        "ranges": {X.GAPPA_NAMES[k]: v.to_json() for k, v in sorted(env.items())},
        "lhs": lhs.to_json(), "rhs": rhs.to_json(),
        "epsilon": float(eps),
        "reference": {"lhs": X.REFERENCE_LHS_ERROR, "rhs": X.REFERENCE_RHS_ERROR,
                      "epsilon": X.REFERENCE_MARGIN},
        "operator_path_length": len(A.operator_path(trace)),
    }
    if samples:
        out["lhs_sampling"] = A.check_bound_by_sampling(s.args[0], env, lhs.abs_error,
                                                        samples, seed).to_json()
        out["rhs_sampling"] = A.check_bound_by_sampling(s.args[1], env, rhs.abs_error,
                                                        samples, seed + 1).to_json()
    return out


def dynwin_rf_check(p, fp, eps, samples=10**4, seed=0) -> dict:
    """Float and rational runs of the whole monitor on in-range inputs.
    Outputs may only differ where the exact gap is within `eps`."""
    rng = random.Random(seed)
    sig, mem, near = [], [], 0
    for _ in range(samples):
        a, x = X.random_float_sample(rng)
        exact_a = [Fraction(v) for v in a]
        exact_x = [Fraction(v) for v in x]
        poly = exact_a[2] * exact_x[0] ** 2 + exact_a[1] * exact_x[0] + exact_a[0]
        dist = max(abs(exact_x[1] - exact_x[3]), abs(exact_x[2] - exact_x[4]))
        if abs(dist - poly) <= eps:
            near += 1
            continue
        _add_pair(p, fp, [a], x, sig, mem)
    v = D.check_rf_equiv(p.op, fp.op, sig, mem, 0, [(2, 0)])
    return {"verdict": v.to_json(), "excluded_within_margin": near}


def side_programs():
    """The two sides of the monitor compiled on their own."""
    lhs = compile_hcol(H.HEvalPolynomial(3, X.dynwin_hcol().f.a), X.GLOBAL_SIZES, "lhs",
                       [("R2", []), ("R1", [0])], fhcol=False)
    rhs = compile_hcol(H.HChebyshevDistance(2), (), "rhs", [("R3", [])], fhcol=False)
    return lhs, rhs


def side_rf_check(bounds, samples=10**4, seed=0) -> dict:
    """Deviation of each compiled side against its interval bound."""
    lhs, rhs = side_programs()
    rng = random.Random(seed)

    def lhs_in(rng):
        a, x = X.random_float_sample(rng)
        return [a], x[:1]

    def rhs_in(rng):
        _, x = X.random_float_sample(rng)
        return [], x[1:]

    out = {}
    for nm, p, draw, bound in (("lhs", lhs, lhs_in, bounds[0]), ("rhs", rhs, rhs_in, bounds[1])):
        fp = L.translate_program(p)
        sig, mem = rf_pairs(p, fp, samples, rng.randrange(1 << 30), draw)
        v = D.check_rf_equiv(p.op, fp.op, sig, mem, bound, [(len(p.globals) + 1, 0)])
        out[nm] = v.to_json()
    return out


def dumps(obj) -> str:
    """Canonical JSON for reports."""
    return json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"


def _plain(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return str(v)
