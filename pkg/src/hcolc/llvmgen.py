"""Code generation from float programs to textual LLVM IR.

Code is built as a small IR tree and printed at the end. Memory blocks
are stack arrays of doubles; loop variables live in i64 stack slots, so no
phi nodes are needed. Every alloca is hoisted into the function's entry
block.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from fractions import Fraction

from . import dhcol as D
from .errors import CompileError, NameCollision

U64_LIMIT = 1 << 64

# --- IR tree --------------------------------------------------------------


@dataclass(frozen=True)
class Val:
    ty: str
    text: str


def i64(n: int) -> Val:
    return Val("i64", str(n))


def hex_double(x: float) -> str:
    """Bit-exact double literal."""
    return "0x%016X" % struct.unpack("<Q", struct.pack("<d", x))[0]


def f64(x: float) -> Val:
    return Val("double", hex_double(x))


@dataclass(frozen=True)
class Alloca:
    res: str
    ty: str

    def text(self):
        return f"{self.res} = alloca {self.ty}"


@dataclass(frozen=True)
class Load:
    res: str
    ty: str
    ptr: Val

    def text(self):
        return f"{self.res} = load {self.ty}, {self.ptr.ty} {self.ptr.text}"


@dataclass(frozen=True)
class Store:
    val: Val
    ptr: Val

    def text(self):
        return f"store {self.val.ty} {self.val.text}, {self.ptr.ty} {self.ptr.text}"


@dataclass(frozen=True)
class Gep:
    res: str
    base: str
    ptr: Val
    idx: tuple

    def text(self):
        ix = ", ".join(f"{v.ty} {v.text}" for v in self.idx)
        return f"{self.res} = getelementptr {self.base}, {self.ptr.ty} {self.ptr.text}, {ix}"


@dataclass(frozen=True)
class Arith:
    res: str
    op: str
    a: Val
    b: Val

    def text(self):
        return f"{self.res} = {self.op} {self.a.ty} {self.a.text}, {self.b.text}"


@dataclass(frozen=True)
class Cmp:
    res: str
    kind: str  # icmp / fcmp
    pred: str
    a: Val
    b: Val

    def text(self):
        return f"{self.res} = {self.kind} {self.pred} {self.a.ty} {self.a.text}, {self.b.text}"


@dataclass(frozen=True)
class Select:
    res: str
    cond: Val
    a: Val
    b: Val

    def text(self):
        return (f"{self.res} = select i1 {self.cond.text}, {self.a.ty} {self.a.text}, "
                f"{self.b.ty} {self.b.text}")


@dataclass(frozen=True)
class Call:
    res: str | None
    ret: str
    fn: str
    args: tuple
    sig: str = ""  # explicit function type for varargs callees

    def text(self):
        a = ", ".join(f"{v.ty} {v.text}" for v in self.args)
        head = f"{self.res} = " if self.res else ""
        return f"{head}call {self.ret}{self.sig} {self.fn}({a})"


@dataclass(frozen=True)
class Br:
    target: str

    def text(self):
        return f"br label %{self.target}"


@dataclass(frozen=True)
class CondBr:
    cond: Val
    t: str
    f: str

    def text(self):
        return f"br i1 {self.cond.text}, label %{self.t}, label %{self.f}"


@dataclass(frozen=True)
class Ret:
    val: Val | None = None

    def text(self):
        return f"ret {self.val.ty} {self.val.text}" if self.val else "ret void"


@dataclass
class Block:
    label: str
    instrs: list
    term: object


@dataclass
class Segment:
    entry: str
    blocks: list


@dataclass
class Function:
    name: str
    ret: str
    params: list  # [(type, name)]
    blocks: list


@dataclass
class GlobalVar:
    name: str
    ty: str
    init: str
    linkage: str = "internal"
    constant: bool = False


@dataclass
class LlvmModule:
    name: str
    globals: list
    declares: list
    functions: list


# --- codegen state --------------------------------------------------------


@dataclass
class IRState:
    """Name counters, the variable context (innermost first) and the
    allocas to hoist into the entry block."""

    block_count: int = 0
    local_count: int = 0
    void_count: int = 0
    gamma: list = field(default_factory=list)  # [(Val, size)]
    allocas: list = field(default_factory=list)
    const_blocks: list = field(default_factory=list)
    intrinsics: set = field(default_factory=set)

    def local(self, prefix) -> str:
        n = self.local_count
        self.local_count += 1
        return f"%{prefix}.{n}"

    def block(self, prefix) -> str:
        n = self.block_count
        self.block_count += 1
        return f"{prefix}.{n}"

    def void(self):
        self.void_count += 1


def _lookup(st, idx, want, what):
    if idx >= len(st.gamma):
        raise CompileError(f"{what} {idx}: no such variable (context has {len(st.gamma)})")
    v, size = st.gamma[idx]
    if v.ty not in want:
        raise CompileError(f"{what} {idx}: expected {' or '.join(want)}, found {v.ty}")
    return v, size


def _push(st, entries):
    st.gamma = list(entries) + st.gamma


def _pop(st, n):
    st.gamma = st.gamma[n:]


# --- expressions ----------------------------------------------------------

_NOPS = {"NPlus": "add", "NMinus": "sub", "NMult": "mul", "NDiv": "udiv", "NMod": "urem"}
_FOPS = {"APlus": "fadd", "AMinus": "fsub", "AMult": "fmul"}


def gen_nexpr(e, st, out) -> Val:
    t = type(e)
    if t is D.NConst:
        if not 0 <= e.value < U64_LIMIT:
            raise CompileError(f"natural constant {e.value} does not fit in 64 bits")
        return i64(e.value)
    if t is D.NVar:
        v, _ = _lookup(st, e.idx, ("i64", "i64*"), "NVar")
        if v.ty == "i64":
            return v
        r = st.local("n")
        out.append(Load(r, "i64", v))
        return Val("i64", r)
    a = gen_nexpr(e.a, st, out)
    b = gen_nexpr(e.b, st, out)
    if e.op in _NOPS:
        r = st.local("n")
        out.append(Arith(r, _NOPS[e.op], a, b))
        return Val("i64", r)
    c, r = st.local("c"), st.local("n")
    out.append(Cmp(c, "icmp", "ult", a, b))
    pick = (a, b) if e.op == "NMin" else (b, a)
    out.append(Select(r, Val("i1", c), *pick))
    return Val("i64", r)


def gen_mexpr(e, st) -> tuple:
    if type(e) is D.MPtrDeref:
        return _lookup(st, e.p.idx, ("double*",), "PVar")
    if type(e) is D.MConst:
        name = f"@cblk.{len(st.const_blocks)}"
        block = dict(e.block)
        cells = [_float_const(block.get(k, 0.0)) for k in range(e.size)]
        st.const_blocks.append(GlobalVar(name[1:], f"[{e.size} x double]",
                                         _array_init(cells), "private", True))
        r = st.local("cb")
        st.allocas.append(Gep(r, f"[{e.size} x double]", Val(f"[{e.size} x double]*", name),
                              (i64(0), i64(0))))
        return Val("double*", r), e.size
    raise CompileError(f"not a memory expression: {D.render(e)}")


def _float_const(v):
    if isinstance(v, float):
        return v
    if isinstance(v, Fraction) and float(v) == v:
        return float(v)
    raise CompileError(f"constant {v} is not a binary64 value")


def gen_aexpr(e, st, out) -> Val:
    t = type(e)
    if t is D.AVar:
        v, _ = _lookup(st, e.idx, ("double",), "AVar")
        return v
    if t is D.AConst:
        return f64(_float_const(e.value))
    if t is D.ANth:
        i = gen_nexpr(e.n, st, out)
        p, _ = gen_mexpr(e.m, st)
        g, r = st.local("p"), st.local("a")
        out.append(Gep(g, "double", p, (i,)))
        out.append(Load(r, "double", Val("double*", g)))
        return Val("double", r)
    if t is D.AAbs:
        a = gen_aexpr(e.a, st, out)
        r = st.local("a")
        st.intrinsics.add("llvm.fabs.f64")
        out.append(Call(r, "double", "@llvm.fabs.f64", (a,)))
        return Val("double", r)
    a = gen_aexpr(e.a, st, out)
    b = gen_aexpr(e.b, st, out)
    r = st.local("a")
    if e.op in _FOPS:
        out.append(Arith(r, _FOPS[e.op], a, b))
        return Val("double", r)
    c = st.local("c")
    if e.op == "AMin":
        out += [Cmp(c, "fcmp", "olt", b, a), Select(r, Val("i1", c), b, a)]
    elif e.op == "AMax":
        out += [Cmp(c, "fcmp", "ogt", b, a), Select(r, Val("i1", c), b, a)]
    else:
        out += [Cmp(c, "fcmp", "olt", a, b), Select(r, Val("i1", c), f64(1.0), f64(0.0))]
    return Val("double", r)


def _elem_ptr(st, out, p, k):
    g = st.local("p")
    out.append(Gep(g, "double", p, (k,)))
    return Val("double*", g)


# --- operators ------------------------------------------------------------


def gen_while_loop(prefix, frm: Val, to: Val, loopvar: Val, loopcont: str, body_entry: str,
                   body_blocks: list, init_code: list, nextblock: str, st: IRState):
    """Counting loop over [frm, to): the entry block runs `init_code`, then
    skips straight to `nextblock` when the range is empty; `loopcont`
    increments `loopvar` and either re-enters the body or exits."""
    entry = st.block(prefix + "entry")
    c0 = st.local("c")
    head = Block(entry, list(init_code) + [Store(frm, loopvar), Cmp(c0, "icmp", "ult", frm, to)],
                 CondBr(Val("i1", c0), body_entry, nextblock))
    st.void()
    i, n, c1 = st.local("i"), st.local("i"), st.local("c")
    cont = Block(loopcont, [Load(i, "i64", loopvar), Arith(n, "add", Val("i64", i), i64(1)),
                            Store(Val("i64", n), loopvar), Cmp(c1, "icmp", "ult", Val("i64", n), to)],
                 CondBr(Val("i1", c1), body_entry, nextblock))
    st.void()
    return st, Segment(entry, [head] + list(body_blocks) + [cont])


def _slot(st):
    s = st.local("slot")
    st.allocas.append(Alloca(s, "i64"))
    return Val("i64*", s)


def _counted(prefix, n: Val, nextblock, st, body, init_code=(), descending=True):
    """Loop whose single body block is produced by `body(st, out, k)`."""
    slot = _slot(st)
    cont = st.block(prefix + "cont")
    blk = st.block(prefix + "body")
    out = []
    i = st.local("i")
    out.append(Load(i, "i64", slot))
    k = Val("i64", i)
    if descending:
        last = st.local("i")
        out.append(Arith(last, "sub", n, i64(1)))
        r = st.local("i")
        out.append(Arith(r, "sub", Val("i64", last), k))
        k = Val("i64", r)
    body(st, out, k)
    return gen_while_loop(prefix, i64(0), n, slot, cont, blk, [Block(blk, out, Br(cont))],
                          list(init_code), nextblock, st)


def gen_ir(op, nextblock: str, st: IRState):
    """Code for `op` in destination-passing style: control leaves the
    returned segment through `nextblock`."""
    t = type(op)
    if t is D.DSHNop:
        b = st.block("nop")
        return st, Segment(b, [Block(b, [], Br(nextblock))])
    if t is D.DSHSeq:
        st, sg = gen_ir(op.g, nextblock, st)
        st, sf = gen_ir(op.f, sg.entry, st)
        return st, Segment(sf.entry, sf.blocks + sg.blocks)
    if t is D.DSHAssign:
        b, out = st.block("assign"), []
        (xp, src), (yp, dst) = op.src, op.dst
        x, _ = _lookup(st, xp.idx, ("double*",), "PVar")
        y, _ = _lookup(st, yp.idx, ("double*",), "PVar")
        s = gen_nexpr(src, st, out)
        d = gen_nexpr(dst, st, out)
        v = st.local("a")
        out.append(Load(v, "double", _elem_ptr(st, out, x, s)))
        out.append(Store(Val("double", v), _elem_ptr(st, out, y, d)))
        st.void()
        return st, Segment(b, [Block(b, out, Br(nextblock))])
    if t is D.DSHIMap:
        x, _ = _lookup(st, op.x.idx, ("double*",), "PVar")
        y, _ = _lookup(st, op.y.idx, ("double*",), "PVar")

        def body(st, out, k):
            a = st.local("a")
            out.append(Load(a, "double", _elem_ptr(st, out, x, k)))
            _push(st, [(Val("double", a), None), (k, None)])
            r = gen_aexpr(op.f, st, out)
            _pop(st, 2)
            out.append(Store(r, _elem_ptr(st, out, y, k)))
            st.void()

        return _counted("imap", _nat(op.n), nextblock, st, body)
    if t is D.DSHBinOp:
        x, _ = _lookup(st, op.x.idx, ("double*",), "PVar")
        y, _ = _lookup(st, op.y.idx, ("double*",), "PVar")

        def body(st, out, k):
            a, b, kn = st.local("a"), st.local("a"), st.local("i")
            out.append(Load(a, "double", _elem_ptr(st, out, x, k)))
            out.append(Arith(kn, "add", k, _nat(op.n)))
            out.append(Load(b, "double", _elem_ptr(st, out, x, Val("i64", kn))))
            _push(st, [(Val("double", b), None), (Val("double", a), None), (k, None)])
            r = gen_aexpr(op.f, st, out)
            _pop(st, 3)
            out.append(Store(r, _elem_ptr(st, out, y, k)))
            st.void()

        return _counted("binop", _nat(op.n), nextblock, st, body)
    if t is D.DSHMemMap2:
        x0, _ = _lookup(st, op.x0.idx, ("double*",), "PVar")
        x1, _ = _lookup(st, op.x1.idx, ("double*",), "PVar")
        y, _ = _lookup(st, op.y.idx, ("double*",), "PVar")

        def body(st, out, k):
            a, b = st.local("a"), st.local("a")
            out.append(Load(a, "double", _elem_ptr(st, out, x0, k)))
            out.append(Load(b, "double", _elem_ptr(st, out, x1, k)))
            _push(st, [(Val("double", b), None), (Val("double", a), None)])
            r = gen_aexpr(op.f, st, out)
            _pop(st, 2)
            out.append(Store(r, _elem_ptr(st, out, y, k)))
            st.void()

        return _counted("memmap2", _nat(op.n), nextblock, st, body)
    if t is D.DSHPower:
        (xp, src), (yp, dst) = op.src, op.dst
        x, _ = _lookup(st, xp.idx, ("double*",), "PVar")
        y, _ = _lookup(st, yp.idx, ("double*",), "PVar")
        init = []
        s = gen_nexpr(src, st, init)
        d = gen_nexpr(dst, st, init)
        n = gen_nexpr(op.n, st, init)
        xs = _elem_ptr(st, init, x, s)
        yd = _elem_ptr(st, init, y, d)
        init.append(Store(f64(_float_const(op.initial)), yd))
        st.void()

        def body(st, out, k):
            a, b = st.local("a"), st.local("a")
            out.append(Load(a, "double", xs))
            out.append(Load(b, "double", yd))
            _push(st, [(Val("double", b), None), (Val("double", a), None)])
            r = gen_aexpr(op.f, st, out)
            _pop(st, 2)
            out.append(Store(r, yd))
            st.void()

        return _counted("power", n, nextblock, st, body, init, descending=False)
    if t is D.DSHLoop:
        slot = _slot(st)
        cont = st.block("loopcont")
        _push(st, [(slot, None)])
        st, seg = gen_ir(op.body, cont, st)
        _pop(st, 1)
        return gen_while_loop("loop", i64(0), _nat(op.n), slot, cont, seg.entry, seg.blocks, [],
                              nextblock, st)
    if t is D.DSHAlloc:
        size = _nat(op.size).text
        a, p = st.local("blk"), st.local("blkp")
        st.allocas.append(Alloca(a, f"[{size} x double]"))
        st.allocas.append(Gep(p, f"[{size} x double]", Val(f"[{size} x double]*", a),
                              (i64(0), i64(0))))
        _push(st, [(Val("double*", p), op.size)])
        st, seg = gen_ir(op.body, nextblock, st)
        _pop(st, 1)
        return st, seg
    if t is D.DSHMemInit:
        y, size = _lookup(st, op.y.idx, ("double*",), "PVar")
        if size is None:
            raise CompileError("MemInit target has no static size")
        v = f64(_float_const(op.value))

        def body(st, out, k):
            out.append(Store(v, _elem_ptr(st, out, y, k)))
            st.void()

        return _counted("meminit", i64(size), nextblock, st, body, descending=False)
    raise CompileError(f"cannot generate code for {type(op).__name__}")


def _nat(n: int) -> Val:
    if not 0 <= n < U64_LIMIT:
        raise CompileError(f"loop bound {n} does not fit in 64 bits")
    return i64(n)


# --- whole programs -------------------------------------------------------

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
RESERVED = ("main", "printf", "X", "Y", "fmt")


def _array_init(cells):
    return "[" + ", ".join(f"double {hex_double(v)}" for v in cells) + "]"


def check_names(p) -> None:
    names = [p.name] + [g.name for g in p.globals]
    for nm in names:
        if not _IDENT.match(nm):
            raise CompileError(f"invalid identifier {nm!r}")
        if nm.startswith("llvm"):
            raise NameCollision(f"{nm!r} collides with intrinsic names")
        if nm in RESERVED:
            raise NameCollision(f"{nm!r} is reserved")
    seen = set()
    for nm in names:
        if nm in seen:
            raise NameCollision(f"duplicate global name {nm!r}")
        seen.add(nm)


def gen_function(p, st: IRState | None = None):
    """The operator as `void @name(double* X, double* Y)`; globals are
    module-level arrays."""
    st = st or IRState()
    entry = []
    gamma = []
    for g in p.globals:
        r = st.local(g.name)
        entry.append(Gep(r, f"[{g.size} x double]", Val(f"[{g.size} x double]*", "@" + g.name),
                         (i64(0), i64(0))))
        gamma.append((Val("double*", r), g.size))
    gamma.append((Val("double*", "%X"), p.i))
    gamma.append((Val("double*", "%Y"), p.o))
    st.gamma = gamma
    st, seg = gen_ir(p.op, "exit", st)
    blocks = [Block("entry", st.allocas + entry, Br(seg.entry))] + seg.blocks
    blocks.append(Block("exit", [], Ret()))
    return st, Function(p.name, "void", [("double*", "%X"), ("double*", "%Y")], blocks)


def split_pool(p, data):
    """Global contents then X contents, read cyclically from `data`."""
    if not data:
        raise CompileError("empty data pool")
    pool = [float(v) for v in data]
    cells = [pool[k % len(pool)] for k in range(sum(g.size for g in p.globals) + p.i)]
    gvals, pos = [], 0
    for g in p.globals:
        gvals.append(cells[pos:pos + g.size])
        pos += g.size
    return gvals, cells[pos:]


def compile_w_main(p, data, st: IRState | None = None, linkage="internal") -> LlvmModule:
    """Module with initialised globals, the operator and a `main` that prints
    every output cell as a hex float. `data` is reused cyclically."""
    check_names(p)
    gvals, xvals = split_pool(p, data)
    gl = [GlobalVar(g.name, f"[{g.size} x double]", _array_init(v), linkage)
          for g, v in zip(p.globals, gvals)]
    gl.append(GlobalVar("X", f"[{p.i} x double]", _array_init(xvals), linkage))
    gl.append(GlobalVar("Y", f"[{p.o} x double]", "zeroinitializer", linkage))
    gl.append(GlobalVar("fmt", "[4 x i8]", 'c"%a\\0A\\00"', "private", True))
    st, fn = gen_function(p, st)
    gl += st.const_blocks

    ms = IRState()
    body = []
    x, y = ms.local("x"), ms.local("y")
    body.append(Gep(x, f"[{p.i} x double]", Val(f"[{p.i} x double]*", "@X"), (i64(0), i64(0))))
    body.append(Gep(y, f"[{p.o} x double]", Val(f"[{p.o} x double]*", "@Y"), (i64(0), i64(0))))
    body.append(Call(None, "void", "@" + p.name, (Val("double*", x), Val("double*", y))))
    fmt = ms.local("fmt")
    body.append(Gep(fmt, "[4 x i8]", Val("[4 x i8]*", "@fmt"), (i64(0), i64(0))))
    for k in range(p.o):
        e, v, r = ms.local("e"), ms.local("v"), ms.local("r")
        body.append(Gep(e, "double", Val("double*", y), (i64(k),)))
        body.append(Load(v, "double", Val("double*", e)))
        body.append(Call(r, "i32", "@printf", (Val("i8*", fmt), Val("double", v)), " (i8*, ...)"))
    main = Function("main", "i32", [], [Block("entry", body, Ret(Val("i32", "0")))])
    decls = ["declare i32 @printf(i8*, ...)"]
    decls += [f"declare double @{n}(double)" for n in sorted(st.intrinsics)]
    return LlvmModule(p.name, gl, decls, [fn, main])


def emit_text(m: LlvmModule) -> str:
    lines = [f"; ModuleID = '{m.name}'", f'source_filename = "{m.name}"', ""]
    for g in m.globals:
        kind = "constant" if g.constant else "global"
        lines.append(f"@{g.name} = {g.linkage} {kind} {g.ty} {g.init}")
    lines.append("")
    for d in m.declares:
        lines.append(d)
    for f in m.functions:
        lines.append("")
        params = ", ".join(f"{t} {n}" for t, n in f.params)
        lines.append(f"define {f.ret} @{f.name}({params}) {{")
        for k, b in enumerate(f.blocks):
            if k:
                lines.append("")
            lines.append(f"{b.label}:")
            for ins in b.instrs:
                lines.append("  " + ins.text())
            lines.append("  " + b.term.text())
        lines.append("}")
    return "\n".join(lines) + "\n"


def branch_targets_defined(f: Function) -> bool:
    labels = {b.label for b in f.blocks}
    for b in f.blocks:
        t = b.term
        tg = [t.target] if type(t) is Br else [t.t, t.f] if type(t) is CondBr else []
        if any(x not in labels for x in tg):
            return False
    return True


def parse_hex_doubles(text: str) -> list:
    """Read back `double 0x...` literals from emitted IR."""
    return [struct.unpack("<d", struct.pack("<Q", int(h, 16)))[0]
            for h in re.findall(r"double 0x([0-9A-F]{16})", text)]

