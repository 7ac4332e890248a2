"""Command-line driver.

Every verb prints (or writes with --report) canonical JSON and exits 0 only
when all validators Pass or are Skipped. Input errors exit with status 2."""

from __future__ import annotations

import json
import sys
from fractions import Fraction

import click

from . import analysis as A
from . import dhcol as D
from . import fixtures as X
from . import hcol as H
from . import llvmgen as G
from . import lowering as L
from . import mshcol as M
from . import pipeline as P
from . import sigma as S
from . import syntax as Sx
from .carrier import RATIONAL
from .errors import PipelineError, StageFailure

_GOOD = ("Pass", "Equal", "Skipped")


class InputError(click.ClickException):
    exit_code = 2


def _emit(obj, report):
    text = P.dumps(obj)
    if report:
        with open(report, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _finish(obj, report, ok):
    obj = {"ok": ok, **obj}
    _emit(obj, report)
    sys.exit(0 if ok else 1)


def _read(path):
    with open(path) if path != "-" else sys.stdin as fh:
        return fh.read()


def _load(path, language):
    try:
        return Sx.parse_program(_read(path), language)
    except PipelineError as err:
        raise InputError(f"{path}: {err}") from None


def _nums(text):
    if not text:
        return []
    return [Fraction(t) for t in text.replace(",", " ").split()]


def _trace(path):
    if path is None:
        return None
    with open(path) as fh:
        return [(r, list(p)) for r, p in json.load(fh)]


def _dhcol_program(op, dims, gsizes, name):
    if dims is None:
        raise click.UsageError("--dims I O is required for imperative programs")
    p = L.DProgram(dims[0], dims[1], name,
                   tuple(L.Global(f"g{k}", n) for k, n in enumerate(gsizes)), op)
    try:
        L.check_scope(op, len(gsizes) + 2)
    except PipelineError as err:
        raise InputError(str(err)) from None
    return p


class _Errors(click.Group):
    """Report pipeline errors as plain messages instead of tracebacks."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except StageFailure as err:
            click.echo(P.dumps({"ok": False, "stage": err.stage, "detail": err.detail,
                                "stages": getattr(getattr(err, "report", None), "stages", [])}),
                       nl=False)
            sys.exit(1)
        except PipelineError as err:
            raise InputError(f"{type(err).__name__}: {err}") from None


@click.group(cls=_Errors)
def main():
    """Operator-language compiler with per-stage translation validation."""


language_opt = click.option("--language", type=click.Choice(Sx.LANGUAGES), default="hcol",
                            show_default=True)
globals_opt = click.option("--global-size", "global_sizes", type=int, multiple=True,
                           help="Size of each global vector, in order.")
seed_opt = click.option("--seed", type=int, default=0, show_default=True)
report_opt = click.option("--report", type=click.Path(dir_okay=False),
                          help="Write the JSON report here instead of stdout.")
dims_opt = click.option("--dims", type=(int, int), default=None,
                        help="Input and output sizes of an imperative program.")


@main.command()
@click.argument("path")
@language_opt
def parse(path, language):
    """Parse a program and print its normalized form and dimensions."""
    e = _load(path, language)
    out = {"language": language, "program": Sx.print_program(e, language)}
    if language != "dhcol":
        out["dims"] = list(Sx.dims_of(e, language))
    _emit(out, None)


@main.command(name="eval")
@click.argument("path")
@language_opt
@click.option("--input", "x", default="", help="Input values, comma or space separated.")
@click.option("--global", "gvals", multiple=True, help="Values of one global vector.")
@dims_opt
@click.option("--carrier", type=click.Choice(["rhcol", "fhcol"]), default="rhcol",
              show_default=True, help="Carrier for imperative programs.")
def eval_(path, language, x, gvals, dims, carrier):
    """Evaluate a program over exact rationals (or binary64 for fhcol)."""
    e = _load(path, language)
    xs = _nums(x)
    env = tuple(_nums(g) for g in gvals)
    if language == "hcol":
        y = H.eval_hcol(e, xs, RATIONAL, env)
    elif language == "shcol":
        y = S.densify(S.eval_shcol(e, S.sparsify(xs), RATIONAL, env), Fraction(0))
    elif language == "mshcol":
        b = M.eval_mshcol(e, M.svector_to_mem_block(S.sparsify(xs)), RATIONAL, env)
        y = {str(k): str(v) for k, v in sorted(b.items())}
    else:
        p = _dhcol_program(e, dims, [len(g) for g in env], "op")
        if carrier == "fhcol":
            env = tuple([float(v) for v in g] for g in env)
            xs = [float(v) for v in xs]
        r, ya = L.run_program(p, env, xs, D.FHCOL if carrier == "fhcol" else D.RHCOL)
        if type(r) is not D.Ok:
            _finish({"result": repr(r)}, None, False)
        y = {str(k): (v.hex() if isinstance(v, float) else str(v))
             for k, v in sorted(r.memory[ya].items())}
    if isinstance(y, list):
        y = [str(v) for v in y]
    _emit({"output": y}, None)


@main.command()
@click.argument("path")
@click.option("--to", "target", type=click.Choice(["hcol", "shcol", "mshcol", "dhcol", "fhcol"]),
              default="dhcol", show_default=True)
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON list of [rule, path] breakdown steps.")
@globals_opt
def lower(path, target, trace_path, global_sizes):
    """Lower an operator expression through the language stack."""
    e = _load(path, "hcol")
    tr = _trace(trace_path)
    tr = H.derive_breakdown_trace(e) if tr is None else tr
    b = H.apply_breakdown_trace(e, tr)
    if target == "hcol":
        click.echo(Sx.print_program(b, "hcol"))
        return
    lift = S.lift_hcol(b)
    se = S.apply_sh_rewrites(lift, S.derive_sh_trace(lift))
    if target == "shcol":
        click.echo(Sx.print_program(se, "shcol"))
        return
    me = L.shcol_to_mshcol(se)
    if target == "mshcol":
        click.echo(Sx.print_program(me, "mshcol"))
        return
    p = L.compile_program(me, global_sizes)
    if target == "fhcol":
        p = L.translate_program(p)
    click.echo(Sx.print_program(p.op, "dhcol"))


def _program_for_codegen(path, language, dims, gsizes, carrier, trace_path, name):
    e = _load(path, language)
    if language == "hcol":
        return P.compile_hcol(e, gsizes, name, _trace(trace_path))
    if language != "dhcol":
        raise click.UsageError("code generation starts from hcol or dhcol")
    p = _dhcol_program(e, dims, gsizes, name)
    return L.translate_program(p) if carrier == "rhcol" else p


@main.command(name="emit-llvm")
@click.argument("path")
@click.option("--language", type=click.Choice(["hcol", "dhcol"]), default="hcol",
              show_default=True)
@globals_opt
@dims_opt
@click.option("--carrier", type=click.Choice(["rhcol", "fhcol"]), default="rhcol",
              show_default=True, help="Carrier of an imperative input program.")
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--name", default="op", show_default=True)
@click.option("--linkage", type=click.Choice(["internal", "external"]), default="internal",
              show_default=True)
@seed_opt
@click.option("--out", type=click.Path(dir_okay=False), help="Write the module here.")
def emit_llvm(path, language, global_sizes, dims, carrier, trace_path, name, linkage, seed, out):
    """Compile to an LLVM module whose main prints every output cell."""
    p = _program_for_codegen(path, language, dims, global_sizes, carrier, trace_path, name)
    need = sum(global_sizes) + p.i
    text = G.emit_text(G.compile_w_main(p, P.random_pool(seed, max(need, 1)),
                                        linkage=linkage))
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


@main.command()
@click.argument("path")
@globals_opt
@click.option("--trace", "trace_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--name", default="op", show_default=True)
@click.option("--samples", type=int, default=200, show_default=True)
@seed_opt
@click.option("--out", type=click.Path(dir_okay=False), help="Write the .ll module here.")
@report_opt
def validate(path, global_sizes, trace_path, name, samples, seed, out, report):
    """Run the full validated pipeline on an operator expression."""
    e = _load(path, "hcol")
    cfg = P.PipelineConfig(e, tuple(global_sizes), name, _trace(trace_path), None,
                           samples, samples, seed, out)
    rep = _pipeline(cfg, report)
    _finish({"pipeline": rep.to_json()}, report, rep.ok)


def _pipeline(cfg, report):
    try:
        return P.run_pipeline(cfg)
    except StageFailure as err:
        stages = err.report.stages if hasattr(err, "report") else []
        _finish({"failed_stage": err.stage, "stages": stages}, report, False)


@main.command()
@click.option("--samples", type=int, default=10**6, show_default=True,
              help="Random inputs per side for the bound check.")
@seed_opt
@click.option("--gappa", type=click.Path(dir_okay=False), help="Write a Gappa problem here.")
@report_opt
def analyze(samples, seed, gappa, report):
    """Symbolic execution and rounding-error bounds for the DynWin monitor."""
    fp = P.compile_hcol(X.dynwin_hcol(), X.GLOBAL_SIZES, "dynwin", X.DYNWIN_TRACE)
    out = P.dynwin_analysis(fp, samples, seed)
    ct = A.closure_trace(X.closure_example_program(), [A.OTHER] * 3)
    facts = A.check_trace_no_overflow(ct)
    out["closure_example"] = {"trace": [c.render() for c in ct], "overflow": facts.to_json()}
    if gappa:
        s = A.symbolic_exec(fp)
        with open(gappa, "w") as fh:
            fh.write(A.gappa_problem(s.args[0], s.args[1], X.symbolic_ranges(), X.GAPPA_NAMES))
    ok = (out["matches_reference"] and facts.ok
          and all(out[k]["status"] in _GOOD for k in ("lhs_sampling", "rhs_sampling")
                  if k in out))
    _finish({"analysis": out}, report, ok)


@main.command()
@seed_opt
@report_opt
def harness(seed, report):
    """Compile twelve programs, run them externally and compare bits."""
    s = P.run_harness_suite(seed)
    tool = P.llvm_tool()
    _finish({"llvm": None if tool is None else tool.rsplit("/", 1)[-1], "harness": s},
            report, s["ok"])


@main.command()
@click.option("--samples", type=int, default=500, show_default=True,
              help="Samples per pipeline validator.")
@click.option("--bound-samples", type=int, default=10**5, show_default=True,
              help="Samples for the error-bound check.")
@click.option("--rf-samples", type=int, default=10**4, show_default=True,
              help="Samples for the rational/float comparison.")
@seed_opt
@click.option("--out", type=click.Path(dir_okay=False), help="Write the .ll module here.")
@report_opt
def dynwin(samples, bound_samples, rf_samples, seed, out, report):
    """End-to-end run on the bundled dynamic-window monitor."""
    rep = _pipeline(P.dynwin_config(seed, samples, out), report)
    an = P.dynwin_analysis(rep.program, bound_samples, seed)
    bounds = (Fraction(an["lhs"]["abs_error"]), Fraction(an["rhs"]["abs_error"]))
    whole = P.dynwin_rf_check(rep.rhcol_program, rep.program, Fraction(an["epsilon"]),
                              rf_samples, seed)
    sides = P.side_rf_check(bounds, rf_samples, seed)
    ok = (rep.ok and an["matches_reference"]
          and all(an[k]["status"] in _GOOD for k in ("lhs_sampling", "rhs_sampling") if k in an)
          and whole["verdict"]["status"] in _GOOD
          and all(v["status"] in _GOOD for v in sides.values()))
    _finish({"pipeline": rep.to_json(), "analysis": an, "rf_whole": whole, "rf_sides": sides},
            report, ok)


if __name__ == "__main__":
    main()
