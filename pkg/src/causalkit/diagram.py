"""String diagrams as open graphs of typed boxes.

A :class:`Diagram` is an ordered list of boundary inputs, an ordered list of
boundary outputs, a list of box instances (nodes) and a set of wires.  Every
wire joins one *source* (a boundary input or a node output port) to one
*target* (a boundary output or a node input port).  A wire running straight
from a boundary input to a boundary output is a bare wire; identities and
permutations are built from those, so they contribute no nodes.

Node ports and boundary ports are addressed with :class:`Port`, where the
node index ``BOUNDARY`` (-1) refers to the diagram's own boundary.
"""
from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

NORMAL = "normal"
EXOTIC = "exotic"
SORTS = (NORMAL, EXOTIC)

GENERATOR = "generator"
IDENTITY = "identity"
SWAP = "swap"
DISCARD = "discard"
KINDS = (GENERATOR, IDENTITY, SWAP, DISCARD)

BOUNDARY = -1

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_']*$")


class DiagramError(ValueError):
    """Raised when a diagram cannot be built or is used outside its contract."""


@dataclass(frozen=True)
class SystemLabel:
    name: str
    sort: str = NORMAL

    def __post_init__(self):
        if not _IDENT.match(self.name):
            raise DiagramError(f"invalid system name {self.name!r}")
        if self.sort not in SORTS:
            raise DiagramError(f"unknown sort {self.sort!r} for system {self.name}")

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class BoxSignature:
    name: str
    inputs: tuple[SystemLabel, ...] = ()
    outputs: tuple[SystemLabel, ...] = ()
    kind: str = GENERATOR

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.kind not in KINDS:
            raise DiagramError(f"unknown box kind {self.kind!r}")
        if self.kind == IDENTITY and not (
            len(self.inputs) == 1 and self.inputs == self.outputs
        ):
            raise DiagramError("identity box needs one input equal to its output")
        if self.kind == SWAP and not (
            len(self.inputs) == 2 and self.outputs == self.inputs[::-1]
        ):
            raise DiagramError("swap box must map [A, B] to [B, A]")
        if self.kind == DISCARD and not (len(self.inputs) == 1 and not self.outputs):
            raise DiagramError("discard box has exactly one input and no outputs")


class Port(NamedTuple):
    node: int
    index: int


class Wire(NamedTuple):
    src: Port
    dst: Port


@dataclass(frozen=True, eq=False)
class Diagram:
    """Immutable open graph.  Equality is structural: same boundary, same
    node sequence, same set of wires."""

    inputs: tuple[SystemLabel, ...] = ()
    outputs: tuple[SystemLabel, ...] = ()
    boxes: tuple[BoxSignature, ...] = ()
    wires: tuple[Wire, ...] = ()
    _wireset: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "boxes", tuple(self.boxes))
        wires = tuple(Wire(Port(*w[0]), Port(*w[1])) for w in self.wires)
        object.__setattr__(self, "wires", wires)
        object.__setattr__(self, "_wireset", frozenset(wires))

    def __eq__(self, other):
        if not isinstance(other, Diagram):
            return NotImplemented
        return (
            self.inputs == other.inputs
            and self.outputs == other.outputs
            and self.boxes == other.boxes
            and self._wireset == other._wireset
            and len(self.wires) == len(other.wires)
        )

    def __hash__(self):
        return hash((self.inputs, self.outputs, self.boxes, self._wireset))

    def __repr__(self):
        ins = ",".join(map(str, self.inputs))
        outs = ",".join(map(str, self.outputs))
        names = ",".join(b.name for b in self.boxes)
        return f"Diagram([{ins}] -> [{outs}], nodes=[{names}])"

    @property
    def n_nodes(self) -> int:
        return len(self.boxes)

    @property
    def is_closed(self) -> bool:
        return not self.inputs and not self.outputs

    def feeding(self) -> dict[Port, Port]:
        """Map each target port to the source port wired into it."""
        return {w.dst: w.src for w in self.wires}

    def fed_by(self) -> dict[Port, Port]:
        """Map each source port to the target port it feeds."""
        return {w.src: w.dst for w in self.wires}

    def node_edges(self) -> set[tuple[int, int]]:
        return {
            (w.src.node, w.dst.node)
            for w in self.wires
            if w.src.node != BOUNDARY and w.dst.node != BOUNDARY
        }

    def topological_order(self, reverse_ties: bool = False) -> list[int]:
        """Kahn's algorithm; ties broken by smallest node index (or largest
        when ``reverse_ties``)."""
        n = len(self.boxes)
        indeg = [0] * n
        succ: list[list[int]] = [[] for _ in range(n)]
        for a, b in self.node_edges():
            succ[a].append(b)
            indeg[b] += 1
        sign = -1 if reverse_ties else 1
        heap = [sign * i for i in range(n) if indeg[i] == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            i = sign * heapq.heappop(heap)
            order.append(i)
            for j in succ[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    heapq.heappush(heap, sign * j)
        if len(order) != n:
            raise DiagramError("diagram contains a cycle")
        return order


def _labels(labels) -> tuple[SystemLabel, ...]:
    if isinstance(labels, SystemLabel):
        return (labels,)
    return tuple(labels)


def _fmt(labels: Sequence[SystemLabel]) -> str:
    return "[" + ", ".join(map(str, labels)) + "]"


def empty() -> Diagram:
    """The diagram with no inputs, no outputs and no nodes."""
    return Diagram()


def identity(*labels: SystemLabel) -> Diagram:
    labels = tuple(l for group in labels for l in _labels(group))
    wires = [Wire(Port(BOUNDARY, i), Port(BOUNDARY, i)) for i in range(len(labels))]
    return Diagram(labels, labels, (), wires)


def permutation(labels: Sequence[SystemLabel], order: Sequence[int]) -> Diagram:
    """Bare-wire diagram whose output ``j`` is input ``order[j]``."""
    labels = tuple(labels)
    order = list(order)
    if sorted(order) != list(range(len(labels))):
        raise DiagramError(f"{order} is not a permutation of {len(labels)} wires")
    outputs = tuple(labels[k] for k in order)
    wires = [Wire(Port(BOUNDARY, k), Port(BOUNDARY, j)) for j, k in enumerate(order)]
    return Diagram(labels, outputs, (), wires)


def box(sig: BoxSignature) -> Diagram:
    wires = [Wire(Port(BOUNDARY, i), Port(0, i)) for i in range(len(sig.inputs))]
    wires += [Wire(Port(0, j), Port(BOUNDARY, j)) for j in range(len(sig.outputs))]
    return Diagram(sig.inputs, sig.outputs, (sig,), wires)


def swap(a: SystemLabel, b: SystemLabel) -> Diagram:
    return box(BoxSignature("swap", (a, b), (b, a), SWAP))


def discard(label: SystemLabel) -> Diagram:
    return box(BoxSignature("discard", (label,), (), DISCARD))


def discard_all(labels: Iterable[SystemLabel]) -> Diagram:
    out = empty()
    for label in labels:
        out = par(out, discard(label))
    return out


def seq(first: Diagram, second: Diagram) -> Diagram:
    """Plug the outputs of ``first`` into the inputs of ``second``."""
    if first.outputs != second.inputs:
        k = next(
            (
                i
                for i, (a, b) in enumerate(zip(first.outputs, second.inputs))
                if a != b
            ),
            min(len(first.outputs), len(second.inputs)),
        )
        raise DiagramError(
            f"boundary type mismatch at position {k}: cannot compose output "
            f"{_fmt(first.outputs)} with input {_fmt(second.inputs)}"
        )
    n1 = len(first.boxes)
    feed: dict[int, Port] = {}
    wires = []
    for w in first.wires:
        if w.dst.node == BOUNDARY:
            feed[w.dst.index] = w.src
        else:
            wires.append(w)
    for w in second.wires:
        if w.src.node == BOUNDARY:
            try:
                src = feed[w.src.index]
            except KeyError:
                raise DiagramError(
                    f"output {w.src.index} of the first diagram is not connected"
                ) from None
        else:
            src = Port(w.src.node + n1, w.src.index)
        dst = w.dst if w.dst.node == BOUNDARY else Port(w.dst.node + n1, w.dst.index)
        wires.append(Wire(src, dst))
    return Diagram(first.inputs, second.outputs, first.boxes + second.boxes, wires)


def par(left: Diagram, right: Diagram) -> Diagram:
    """Juxtapose two diagrams; boundaries concatenate left then right."""
    n1, i1, o1 = len(left.boxes), len(left.inputs), len(left.outputs)

    def shift(p: Port, boundary_offset: int) -> Port:
        if p.node == BOUNDARY:
            return Port(BOUNDARY, p.index + boundary_offset)
        return Port(p.node + n1, p.index)

    wires = list(left.wires)
    wires += [Wire(shift(w.src, i1), shift(w.dst, o1)) for w in right.wires]
    return Diagram(
        left.inputs + right.inputs,
        left.outputs + right.outputs,
        left.boxes + right.boxes,
        wires,
    )


def seq_all(*diagrams: Diagram) -> Diagram:
    out = diagrams[0]
    for d in diagrams[1:]:
        out = seq(out, d)
    return out


def par_all(*diagrams: Diagram) -> Diagram:
    out = empty()
    for d in diagrams:
        out = par(out, d)
    return out


def boundary(d: Diagram) -> tuple[tuple[SystemLabel, ...], tuple[SystemLabel, ...]]:
    return d.inputs, d.outputs


def well_formed(d: Diagram, strict_sorts: bool = False) -> list[str]:
    """List every violated invariant of ``d``; empty iff well formed.

    With ``strict_sorts`` exotic systems may not appear on the outer boundary.
    """
    problems: list[str] = []
    n = len(d.boxes)

    def src_label(p: Port):
        if p.node == BOUNDARY:
            return d.inputs[p.index] if 0 <= p.index < len(d.inputs) else None
        if 0 <= p.node < n and 0 <= p.index < len(d.boxes[p.node].outputs):
            return d.boxes[p.node].outputs[p.index]
        return None

    def dst_label(p: Port):
        if p.node == BOUNDARY:
            return d.outputs[p.index] if 0 <= p.index < len(d.outputs) else None
        if 0 <= p.node < n and 0 <= p.index < len(d.boxes[p.node].inputs):
            return d.boxes[p.node].inputs[p.index]
        return None

    def where(p: Port, side: str) -> str:
        if p.node == BOUNDARY:
            return f"boundary {'input' if side == 'src' else 'output'} {p.index}"
        return f"node n{p.node} {'output' if side == 'src' else 'input'} {p.index}"

    src_count: dict[Port, int] = {}
    dst_count: dict[Port, int] = {}
    for k, w in enumerate(d.wires):
        a, b = src_label(w.src), dst_label(w.dst)
        if a is None:
            problems.append(f"wire w{k} starts at nonexistent {where(w.src, 'src')}")
        if b is None:
            problems.append(f"wire w{k} ends at nonexistent {where(w.dst, 'dst')}")
        if a is not None and b is not None and a != b:
            problems.append(f"type mismatch on wire w{k}: {a} -> {b}")
        src_count[w.src] = src_count.get(w.src, 0) + 1
        dst_count[w.dst] = dst_count.get(w.dst, 0) + 1

    sources = [Port(BOUNDARY, i) for i in range(len(d.inputs))]
    targets = [Port(BOUNDARY, j) for j in range(len(d.outputs))]
    for i, b in enumerate(d.boxes):
        sources += [Port(i, j) for j in range(len(b.outputs))]
        targets += [Port(i, j) for j in range(len(b.inputs))]
    for p in sources:
        c = src_count.get(p, 0)
        if c == 0:
            problems.append(f"{where(p, 'src')} is unattached")
        elif c > 1:
            problems.append(f"{where(p, 'src')} is attached to {c} wires")
    for p in targets:
        c = dst_count.get(p, 0)
        if c == 0:
            problems.append(f"{where(p, 'dst')} is unattached")
        elif c > 1:
            problems.append(f"{where(p, 'dst')} is attached to {c} wires")

    cycle = _find_cycle(n, {(a, b) for a, b in d.node_edges() if 0 <= a < n and 0 <= b < n})
    if cycle:
        problems.append(
            f"cycle at node n{cycle[0]}: " + " -> ".join(f"n{i}" for i in cycle)
        )
    if strict_sorts:
        for side, labels in (("input", d.inputs), ("output", d.outputs)):
            for i, label in enumerate(labels):
                if label.sort == EXOTIC:
                    problems.append(f"exotic system {label} on boundary {side} {i}")
    return problems


def _find_cycle(n: int, edges) -> list[int] | None:
    succ: dict[int, list[int]] = {i: [] for i in range(n)}
    for a, b in sorted(edges):
        succ[a].append(b)
    colour = [0] * n
    stack: list[int] = []

    def visit(u):
        colour[u] = 1
        stack.append(u)
        for v in succ[u]:
            if colour[v] == 1:
                return stack[stack.index(v):] + [v]
            if colour[v] == 0:
                found = visit(v)
                if found:
                    return found
        colour[u] = 2
        stack.pop()
        return None

    for u in range(n):
        if colour[u] == 0:
            found = visit(u)
            if found:
                return found
    return None


def require_well_formed(d: Diagram) -> None:
    problems = well_formed(d)
    if problems:
        raise DiagramError("ill-formed diagram: " + "; ".join(problems))


class Signature:
    """Registry of declared systems and generator boxes."""

    def __init__(self):
        self.systems: dict[str, SystemLabel] = {}
        self.boxes: dict[str, BoxSignature] = {}

    def declare_system(self, name: str, sort: str = NORMAL) -> SystemLabel:
        if name in self.systems:
            raise DiagramError(f"system {name} already declared")
        label = SystemLabel(name, sort)
        self.systems[name] = label
        return label

    def declare_box(self, name: str, inputs, outputs) -> BoxSignature:
        if name in self.boxes:
            raise DiagramError(f"box {name} already declared")
        sig = BoxSignature(
            name, tuple(self.label(x) for x in inputs), tuple(self.label(x) for x in outputs)
        )
        self.boxes[name] = sig
        return sig

    def label(self, x) -> SystemLabel:
        if isinstance(x, SystemLabel):
            if self.systems.get(x.name) != x:
                raise DiagramError(f"unknown label {x.name}")
            return x
        try:
            return self.systems[x]
        except KeyError:
            raise DiagramError(f"unknown label {x}") from None

    def box(self, x) -> BoxSignature:
        name = x.name if isinstance(x, BoxSignature) else x
        try:
            sig = self.boxes[name]
        except KeyError:
            raise DiagramError(f"unknown signature {name}") from None
        if isinstance(x, BoxSignature) and x != sig:
            raise DiagramError(f"signature {name} does not match the registered one")
        return sig


def primitive(kind: str, *args, signature: Signature | None = None) -> Diagram:
    """Single-primitive diagram: ``identity``, ``swap``, ``discard`` or ``box``.

    Labels and box names are resolved against ``signature`` when given.
    """
    resolve_label = signature.label if signature else _as_label
    if kind == "identity":
        return identity(*[resolve_label(a) for a in args])
    if kind == "swap":
        if len(args) != 2:
            raise DiagramError("swap takes two labels")
        return swap(resolve_label(args[0]), resolve_label(args[1]))
    if kind == "discard":
        if len(args) != 1:
            raise DiagramError("discard takes one label")
        return discard(resolve_label(args[0]))
    if kind == "box":
        if len(args) != 1:
            raise DiagramError("box takes one signature")
        if signature is not None:
            return box(signature.box(args[0]))
        if not isinstance(args[0], BoxSignature):
            raise DiagramError(f"unknown signature {args[0]}")
        return box(args[0])
    raise DiagramError(f"unknown primitive kind {kind!r}")


def _as_label(x) -> SystemLabel:
    if isinstance(x, SystemLabel):
        return x
    raise DiagramError(f"unknown label {x}")
