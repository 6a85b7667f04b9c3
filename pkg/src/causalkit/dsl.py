"""The ``.proc`` language: systems, boxes with matrix literals, diagrams,
posets and networks.

Grammar::

    file     := decl*
    decl     := "system" NAME "dim" INT ["sort" ("normal" | "exotic")] ";"
              | "box"   NAME ":" types "->" types ";"
              | "stoch" NAME ":" types "->" types matrix ";"
              | "chan"  NAME ":" types "->" types "choi" matrix ";"
              | "diag"  NAME "=" expr ";"
              | "poset" NAME "{" (NAME ";" | NAME "<" NAME ";")* "}"
              | "network" NAME "on" NAME "{" (node | wire)* "}"
              | "check" NAME NAME ";"
    node     := "node" NAME "=" expr ";"
    wire     := "wire" NAME "." PORT "->" NAME "." PORT ";"     PORT is outK / inK
    types    := "(" ")" | NAME ("*" NAME)*
    expr     := term (";" term)*
    term     := atom ("*" atom)*
    atom     := NAME | "empty" | "id" "(" NAME ("," NAME)* ")"
              | "swap" "(" NAME "," NAME ")" | "discard" "(" NAME ")"
              | "perm" "(" NAME ("," NAME)* ":" INT ("," INT)* ")"
              | "(" expr ")"
    matrix   := "(" row ("|" row)* ")"      rows are outputs, columns inputs

``;`` (sequential) binds looser than ``*`` (parallel).  Complex entries are
written ``a+bi``.  A ``box`` declaration has a signature but no matrix;
such boxes are bound later (for instance with random maps).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .causal import (
    CausalProcessNetwork,
    CausalStructure,
    CausalStructureError,
    NetWire,
    NetworkError,
    validate_structure,
)
from .diagram import (
    BOUNDARY,
    DISCARD,
    EXOTIC,
    GENERATOR,
    NORMAL,
    SWAP,
    Diagram,
    DiagramError,
    Signature,
    box,
    discard,
    empty,
    identity,
    par,
    permutation,
    seq,
    swap,
)
from .semantics import FINSTOCH, QUANTUM, Interpretation, QuantumChannel, validate


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected=()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        text = f"{line}:{column}: {message}"
        if self.expected:
            text += f" (expected {', '.join(self.expected)})"
        super().__init__(text)


class SemanticError(ParseError):
    pass


# --------------------------------------------------------------------------
# lexing
# --------------------------------------------------------------------------

_REAL = r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(
    rf"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*|//[^\n]*)
  | (?P<num>[+-]?{_REAL}(?:[+-](?:{_REAL})?i|i)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>->|[;:()|*,{{}}<.=])
    """,
    re.X,
)

KEYWORDS = {"system", "box", "stoch", "chan", "diag", "poset", "network", "check"}
BODY_KEYWORDS = {"node", "wire"}


class Token(NamedTuple):
    kind: str  # name, num, sym, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, col, i = 1, 1, 0
    while i < len(text):
        m = _TOKEN.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind in ("num", "name", "sym"):
                tokens.append(Token(kind, chunk, line, col))
            col += len(chunk)
        i = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


def _number(tok: Token):
    t = tok.text
    if t.endswith("i"):
        body = t[:-1]
        if body == "" or body[-1] in "+-":
            body += "1"
        return complex(body + "j")
    return float(t)


# --------------------------------------------------------------------------
# syntax tree
# --------------------------------------------------------------------------

Pos = tuple  # (line, col)


@dataclass(frozen=True)
class Ref:
    name: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class IdExpr:
    labels: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class SwapExpr:
    a: str
    b: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class DiscardExpr:
    label: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class PermExpr:
    labels: tuple
    order: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class EmptyExpr:
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Seq:
    parts: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Par:
    parts: tuple
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class SystemDecl:
    name: str
    dim: int
    sort: str = NORMAL
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BoxDecl:
    name: str
    inputs: tuple
    outputs: tuple
    kind: str = "box"  # box | stoch | chan
    matrix: tuple | None = None
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class DiagDecl:
    name: str
    expr: object
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class PosetDecl:
    name: str
    elements: tuple
    edges: frozenset
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class NetworkDecl:
    name: str
    poset: str
    nodes: tuple  # ((node, expr), ...)
    wires: tuple  # NetWire, ...
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class CheckDecl:
    kind: str
    target: str
    pos: Pos = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class SourceFile:
    decls: tuple


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, message, expected=(), tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{message}, found {found}", tok.line, tok.col, expected)

    def at(self, text) -> bool:
        return self.tok.kind in ("sym", "name") and self.tok.text == text

    def expect(self, text) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}", (repr(text),))
        t = self.tok
        self.i += 1
        return t

    def name(self, what="name") -> Token:
        if self.tok.kind != "name":
            self.error(f"expected {what}", (what,))
        t = self.tok
        self.i += 1
        return t

    def integer(self, what="integer") -> int:
        if self.tok.kind != "num" or not self.tok.text.isdigit():
            self.error(f"expected {what}", (what,))
        t = self.tok
        self.i += 1
        return int(t.text)

    # declarations -------------------------------------------------------

    def file(self) -> SourceFile:
        decls = []
        while self.tok.kind != "eof":
            decls.append(self.decl())
        return SourceFile(tuple(decls))

    def decl(self):
        t = self.tok
        kw = t.text if t.kind == "name" else None
        pos = (t.line, t.col)
        if kw == "system":
            self.i += 1
            name = self.name("system name").text
            self.expect("dim")
            dim = self.integer("dimension")
            sort = NORMAL
            if self.at("sort"):
                self.i += 1
                s = self.name("sort")
                if s.text not in (NORMAL, EXOTIC):
                    self.error("expected sort", ("normal", "exotic"), s)
                sort = s.text
            self.expect(";")
            return SystemDecl(name, dim, sort, pos)
        if kw in ("box", "stoch", "chan"):
            self.i += 1
            name = self.name("box name").text
            self.expect(":")
            ins = self.types()
            self.expect("->")
            outs = self.types()
            matrix = None
            if kw == "stoch":
                matrix = self.matrix(complex_ok=False)
            elif kw == "chan":
                self.expect("choi")
                matrix = self.matrix(complex_ok=True)
            self.expect(";")
            return BoxDecl(name, ins, outs, kw, matrix, pos)
        if kw == "diag":
            self.i += 1
            name = self.name("diagram name").text
            self.expect("=")
            expr = self.expr(stop=KEYWORDS)
            self.expect(";")
            return DiagDecl(name, expr, pos)
        if kw == "poset":
            self.i += 1
            name = self.name("poset name").text
            self.expect("{")
            elements, edges = [], []
            while not self.at("}"):
                a = self.name("element").text
                if a not in elements:
                    elements.append(a)
                if self.at("<"):
                    self.i += 1
                    b = self.name("element").text
                    if b not in elements:
                        elements.append(b)
                    edges.append((a, b))
                self.expect(";")
            self.expect("}")
            return PosetDecl(name, tuple(elements), frozenset(edges), pos)
        if kw == "network":
            self.i += 1
            name = self.name("network name").text
            self.expect("on")
            poset = self.name("poset name").text
            self.expect("{")
            nodes, wires = [], []
            while not self.at("}"):
                if self.at("node"):
                    self.i += 1
                    n = self.name("node name").text
                    self.expect("=")
                    nodes.append((n, self.expr(stop=BODY_KEYWORDS | {"}"})))
                    self.expect(";")
                elif self.at("wire"):
                    self.i += 1
                    src, out = self.port("out")
                    self.expect("->")
                    dst, inp = self.port("in")
                    self.expect(";")
                    wires.append(NetWire(src, out, dst, inp))
                else:
                    self.error("expected network body item", ("'node'", "'wire'", "'}'"))
            self.expect("}")
            return NetworkDecl(name, poset, tuple(nodes), tuple(wires), pos)
        if kw == "check":
            self.i += 1
            kind = self.name("check kind").text
            target = self.name("check target").text
            self.expect(";")
            return CheckDecl(kind, target, pos)
        self.error("expected declaration", tuple(sorted(KEYWORDS)))

    def port(self, direction):
        node = self.name("node name").text
        self.expect(".")
        t = self.name(f"{direction}K port")
        m = re.fullmatch(rf"{direction}(\d+)", t.text)
        if not m:
            self.error(f"expected {direction}K port", (f"{direction}K",), t)
        return node, int(m.group(1))

    def types(self) -> tuple:
        if self.at("(") and self.peek().kind == "sym" and self.peek().text == ")":
            self.i += 2
            return ()
        names = [self.name("system name").text]
        while self.at("*"):
            self.i += 1
            names.append(self.name("system name").text)
        return tuple(names)

    def matrix(self, complex_ok: bool) -> tuple:
        self.expect("(")
        rows, row = [], []
        while True:
            if self.tok.kind == "num":
                v = _number(self.tok)
                if isinstance(v, complex) and not complex_ok:
                    self.error("complex entry in a stochastic matrix")
                row.append(complex(v) if complex_ok else v)
                self.i += 1
            elif self.at("|"):
                rows.append(tuple(row))
                row = []
                self.i += 1
            elif self.at(")"):
                rows.append(tuple(row))
                self.i += 1
                break
            else:
                self.error("expected matrix entry", ("number", "'|'", "')'"))
        return tuple(rows)

    # expressions ------------------------------------------------------

    def expr(self, stop):
        t = self.tok
        parts = [self.term()]
        while self.at(";") and self._starts_atom(self.peek(), stop):
            self.i += 1
            parts.append(self.term())
        flat = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, Seq) else [p])
        return flat[0] if len(flat) == 1 else Seq(tuple(flat), (t.line, t.col))

    def _starts_atom(self, tok, stop) -> bool:
        if tok.kind == "sym":
            return tok.text == "("
        return tok.kind == "name" and tok.text not in stop

    def term(self):
        t = self.tok
        parts = [self.atom()]
        while self.at("*"):
            self.i += 1
            parts.append(self.atom())
        flat = []
        for p in parts:
            flat.extend(p.parts if isinstance(p, Par) else [p])
        return flat[0] if len(flat) == 1 else Par(tuple(flat), (t.line, t.col))

    def atom(self):
        t = self.tok
        pos = (t.line, t.col)
        if self.at("("):
            self.i += 1
            e = self.expr(stop=set())
            self.expect(")")
            return e
        if t.kind != "name":
            self.error("expected diagram", ("name", "'('", "id(...)", "swap(...)", "discard(...)"))
        nxt = self.peek()
        is_call = nxt.kind == "sym" and nxt.text == "("
        if t.text == "id" and is_call:
            self.i += 2
            labels = [self.name("system name").text]
            while self.at(","):
                self.i += 1
                labels.append(self.name("system name").text)
            self.expect(")")
            return IdExpr(tuple(labels), pos)
        if t.text == "swap" and is_call:
            self.i += 2
            a = self.name("system name").text
            self.expect(",")
            b = self.name("system name").text
            self.expect(")")
            return SwapExpr(a, b, pos)
        if t.text == "discard" and is_call:
            self.i += 2
            a = self.name("system name").text
            self.expect(")")
            return DiscardExpr(a, pos)
        if t.text == "perm" and is_call:
            self.i += 2
            labels = [self.name("system name").text]
            while self.at(","):
                self.i += 1
                labels.append(self.name("system name").text)
            self.expect(":")
            order = [self.integer("wire index")]
            while self.at(","):
                self.i += 1
                order.append(self.integer("wire index"))
            self.expect(")")
            return PermExpr(tuple(labels), tuple(order), pos)
        if t.text == "empty":
            self.i += 1
            return EmptyExpr(pos)
        self.i += 1
        return Ref(t.text, pos)


def parse_source(text: str) -> SourceFile:
    """Syntax only; no name resolution."""
    return _Parser(text.replace("\r\n", "\n")).file()


# --------------------------------------------------------------------------
# semantic building
# --------------------------------------------------------------------------


@dataclass
class Program:
    source: SourceFile
    signature: Signature
    backend: str
    dims: dict
    bindings: dict
    diagrams: dict = field(default_factory=dict)
    structures: dict = field(default_factory=dict)
    networks: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def interpretation(self) -> Interpretation:
        return Interpretation(self.backend, self.dims, self.bindings)

    @property
    def unbound(self) -> list[str]:
        return [n for n in self.signature.boxes if n not in self.bindings]


def _sem(message, pos):
    line, col = pos
    return SemanticError(message, line, col)


def _fmt_list(names) -> str:
    return "[" + ", ".join(map(str, names)) + "]"


def build_diagram(expr, signature: Signature, diagrams: dict) -> Diagram:
    def label(name, pos):
        try:
            return signature.label(name)
        except DiagramError as e:
            raise _sem(str(e), pos) from None

    def go(e) -> Diagram:
        if isinstance(e, Ref):
            if e.name in signature.boxes:
                return box(signature.boxes[e.name])
            if e.name in diagrams:
                return diagrams[e.name]
            raise _sem(f"unknown box or diagram {e.name}", e.pos)
        if isinstance(e, IdExpr):
            return identity(*[label(l, e.pos) for l in e.labels])
        if isinstance(e, SwapExpr):
            return swap(label(e.a, e.pos), label(e.b, e.pos))
        if isinstance(e, DiscardExpr):
            return discard(label(e.label, e.pos))
        if isinstance(e, PermExpr):
            try:
                return permutation([label(l, e.pos) for l in e.labels], e.order)
            except DiagramError as err:
                raise _sem(str(err), e.pos) from None
        if isinstance(e, EmptyExpr):
            return empty()
        if isinstance(e, Seq):
            out = go(e.parts[0])
            for part in e.parts[1:]:
                nxt = go(part)
                try:
                    out = seq(out, nxt)
                except DiagramError as err:
                    raise _sem(str(err), part.pos) from None
            return out
        if isinstance(e, Par):
            out = go(e.parts[0])
            for part in e.parts[1:]:
                out = par(out, go(part))
            return out
        raise TypeError(f"not an expression: {e!r}")

    return go(expr)


def _declare(names: dict, name: str, pos):
    if name in names:
        raise _sem(f"{name} is already declared", pos)
    names[name] = pos


def _prod(xs):
    return int(np.prod(xs)) if xs else 1


def build(source: SourceFile) -> Program:
    sig = Signature()
    prog = Program(source, sig, FINSTOCH, {}, {})
    names: dict = {}
    kinds = set()
    for d in source.decls:
        if isinstance(d, SystemDecl):
            _declare(names, d.name, d.pos)
            if not 1 <= d.dim <= 32:
                raise _sem(f"dimension of {d.name} must lie in 1..32", d.pos)
            sig.declare_system(d.name, d.sort)
            prog.dims[d.name] = d.dim
        elif isinstance(d, BoxDecl):
            _declare(names, d.name, d.pos)
            try:
                s = sig.declare_box(d.name, d.inputs, d.outputs)
            except DiagramError as e:
                raise _sem(str(e), d.pos) from None
            if d.matrix is None:
                continue
            if d.kind in ("stoch", "chan"):
                kinds.add(d.kind)
                if len(kinds) > 1:
                    raise _sem("cannot mix stoch and chan bindings in one file", d.pos)
            widths = {len(r) for r in d.matrix}
            if len(widths) != 1:
                raise _sem(f"ragged matrix for {d.name}", d.pos)
            di = _prod([prog.dims[l.name] for l in s.inputs])
            do = _prod([prog.dims[l.name] for l in s.outputs])
            if d.kind == "stoch":
                m = np.array(d.matrix, dtype=float)
                if m.shape != (do, di):
                    raise _sem(
                        f"matrix for {d.name} has shape {m.shape}, expected {(do, di)}", d.pos
                    )
                prog.bindings[d.name] = m
                prog.diagnostics += [f"{d.name}: {p}" for p in validate(m, "stochastic")]
            else:
                m = np.array(d.matrix, dtype=complex)
                if m.shape != (do * di, do * di):
                    raise _sem(
                        f"Choi matrix for {d.name} has shape {m.shape}, expected "
                        f"{(do * di, do * di)}",
                        d.pos,
                    )
                ch = QuantumChannel(
                    m,
                    [prog.dims[l.name] for l in s.inputs],
                    [prog.dims[l.name] for l in s.outputs],
                )
                prog.bindings[d.name] = ch
                prog.diagnostics += [f"{d.name}: {p}" for p in validate(ch, "cptp")]
        elif isinstance(d, DiagDecl):
            _declare(names, d.name, d.pos)
            prog.diagrams[d.name] = build_diagram(d.expr, sig, prog.diagrams)
        elif isinstance(d, PosetDecl):
            _declare(names, d.name, d.pos)
            try:
                prog.structures[d.name] = validate_structure(
                    d.elements, sorted(d.edges, key=lambda e: (d.elements.index(e[0]), d.elements.index(e[1])))
                )
            except CausalStructureError as e:
                raise _sem(str(e), d.pos) from None
        elif isinstance(d, NetworkDecl):
            _declare(names, d.name, d.pos)
            if d.poset not in prog.structures:
                raise _sem(f"unknown poset {d.poset}", d.pos)
            assignment = {}
            for node, expr in d.nodes:
                if node in assignment:
                    raise _sem(f"node {node} assigned twice", expr.pos)
                assignment[node] = build_diagram(expr, sig, prog.diagrams)
            try:
                prog.networks[d.name] = CausalProcessNetwork(
                    prog.structures[d.poset], assignment, d.wires
                )
            except NetworkError as e:
                raise _sem(str(e), d.pos) from None
        elif isinstance(d, CheckDecl):
            prog.checks.append((d.kind, d.target))
    if "chan" in kinds:
        prog.backend = QUANTUM
    return prog


def parse(text: str) -> Program:
    """Parse and resolve a ``.proc`` file."""
    return build(parse_source(text))


def parse_diagram(text: str, context) -> Diagram:
    """Parse one diagram expression against a :class:`Program` or
    :class:`Signature`."""
    if isinstance(context, Program):
        sig, diagrams = context.signature, context.diagrams
    else:
        sig, diagrams = context, {}
    p = _Parser(text.replace("\r\n", "\n"))
    expr = p.expr(stop=set())
    if p.tok.kind != "eof":
        p.error("unexpected trailing input", ("end of input",))
    return build_diagram(expr, sig, diagrams)


# --------------------------------------------------------------------------
# printing
# --------------------------------------------------------------------------


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def format_number(v) -> str:
    """17 significant digits, so re-parsing gives the identical double."""
    if isinstance(v, complex):
        if v.imag == 0 and not np.signbit(v.imag):
            return _g17(v.real)
        sign = "-" if np.signbit(v.imag) else "+"
        return f"{_g17(v.real)}{sign}{_g17(abs(v.imag))}i"
    return _g17(v)


def format_matrix(m) -> str:
    rows = [" ".join(format_number(v) for v in row) for row in m]
    return "(" + " | ".join(rows) + ")"


def _types(names) -> str:
    return " * ".join(names) if names else "()"


def format_expr(e, inside_par=False) -> str:
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, IdExpr):
        return f"id({', '.join(e.labels)})"
    if isinstance(e, SwapExpr):
        return f"swap({e.a}, {e.b})"
    if isinstance(e, DiscardExpr):
        return f"discard({e.label})"
    if isinstance(e, PermExpr):
        return f"perm({', '.join(e.labels)} : {', '.join(map(str, e.order))})"
    if isinstance(e, EmptyExpr):
        return "empty"
    if isinstance(e, Seq):
        text = " ; ".join(format_expr(p) for p in e.parts)
        return f"({text})" if inside_par else text
    if isinstance(e, Par):
        return " * ".join(format_expr(p, inside_par=True) for p in e.parts)
    raise TypeError(f"not an expression: {e!r}")


def format_decl(d) -> str:
    if isinstance(d, SystemDecl):
        sort = " sort exotic" if d.sort == EXOTIC else ""
        return f"system {d.name} dim {d.dim}{sort};"
    if isinstance(d, BoxDecl):
        head = f"{d.kind} {d.name} : {_types(d.inputs)} -> {_types(d.outputs)}"
        if d.kind == "stoch":
            return f"{head} {format_matrix(d.matrix)};"
        if d.kind == "chan":
            return f"{head} choi {format_matrix(d.matrix)};"
        return f"{head};"
    if isinstance(d, DiagDecl):
        return f"diag {d.name} = {format_expr(d.expr)};"
    if isinstance(d, PosetDecl):
        lines = [f"poset {d.name} {{"]
        lines.append("  " + " ".join(f"{x};" for x in d.elements))
        for a, b in sorted(d.edges):
            lines.append(f"  {a} < {b};")
        lines.append("}")
        return "\n".join(lines)
    if isinstance(d, NetworkDecl):
        lines = [f"network {d.name} on {d.poset} {{"]
        for node, expr in d.nodes:
            lines.append(f"  node {node} = {format_expr(expr)};")
        for w in d.wires:
            lines.append(f"  wire {w};")
        lines.append("}")
        return "\n".join(lines)
    if isinstance(d, CheckDecl):
        return f"check {d.kind} {d.target};"
    raise TypeError(f"not a declaration: {d!r}")


def format_source(src) -> str:
    if isinstance(src, Program):
        src = src.source
    return "\n".join(format_decl(d) for d in src.decls) + "\n"


def diagram_expr(d: Diagram):
    """Expression that rebuilds ``d`` node for node: each layer permutes the
    live wires so the next node's inputs come last, then places that node
    beside identities."""
    order = d.topological_order()
    feeding = d.feeding()
    live =[((BOUNDARY, i), l) for i, l in enumerate(d.inputs)]
    parts = []

    def perm_to(target):
        keys = [k for k, _ in live]
        idx = [keys.index(k) for k in target]
        if idx != list(range(len(idx))):
            parts.append(PermExpr(tuple(l.name for _, l in live), tuple(idx)))

    for node in order:
        b = d.boxes[node]
        need = [tuple(feeding[(node, p)]) for p in range(len(b.inputs))]
        rest = [(k, l) for k, l in live if k not in set(need)]
        perm_to([k for k, _ in rest] + need)
        if b.kind == GENERATOR:
            atom = Ref(b.name)
        elif b.kind == SWAP:
            atom = SwapExpr(b.inputs[0].name, b.inputs[1].name)
        elif b.kind == DISCARD:
            atom = DiscardExpr(b.inputs[0].name)
        else:
            raise DiagramError(f"cannot print a {b.kind} node")
        parts.append(Par((IdExpr(tuple(l.name for _, l in rest)), atom)) if rest else atom)
        live = rest + [((node, q), l) for q, l in enumerate(b.outputs)]
    perm_to([tuple(feeding[(BOUNDARY, j)]) for j in range(len(d.outputs))])
    if not parts:
        return IdExpr(tuple(l.name for l in d.inputs)) if d.inputs else EmptyExpr()
    return parts[0] if len(parts) == 1 else Seq(tuple(parts))


def format_diagram(d: Diagram) -> str:
    return format_expr(diagram_expr(d))


def structure_decl(cs: CausalStructure, name: str) -> PosetDecl:
    return PosetDecl(name, tuple(cs.elements), frozenset(cs.hasse_edges))


def network_decl(net: CausalProcessNetwork, name: str, poset: str) -> NetworkDecl:
    nodes = tuple((x, diagram_expr(net.assignment[x])) for x in net.structure.elements)
    return NetworkDecl(name, poset, nodes, tuple(sorted(net.wires)))


def to_text(entity, name: str | None = None, poset: str | None = None) -> str:
    """Canonical text for a program, source file, diagram, poset or network."""
    if isinstance(entity, (Program, SourceFile)):
        return format_source(entity)
    if isinstance(entity, Diagram):
        return format_diagram(entity)
    if isinstance(entity, CausalStructure):
        return format_decl(structure_decl(entity, name or "P"))
    if isinstance(entity, CausalProcessNetwork):
        pname = poset or "P"
        return "\n".join(
            [
                format_decl(structure_decl(entity.structure, pname)),
                format_decl(network_decl(entity, name or "N", pname)),
            ]
        ) + "\n"
    return format_decl(entity)
