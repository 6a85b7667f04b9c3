"""Causal structures (finite posets) and causal process networks over them.

A network places one diagram on each element of a poset.  Wires between
nodes must run strictly upward in the order; every node port not mentioned
by a wire is an open port of the network.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from types import MappingProxyType
from typing import Hashable, Iterable, Mapping, Sequence

from .diagram import (
    Diagram,
    DiagramError,
    SystemLabel,
    empty,
    identity,
    par,
    permutation,
    seq,
    seq_all,
    well_formed,
)


class CausalStructureError(ValueError):
    def __init__(self, message: str, cycle: Sequence | None = None, witnesses=()):
        super().__init__(message)
        self.cycle = list(cycle) if cycle else None
        self.witnesses = list(witnesses)


class NetworkError(ValueError):
    pass


# --------------------------------------------------------------------------
# posets
# --------------------------------------------------------------------------


def _closure(elements, edges) -> set:
    succ = {x: set() for x in elements}
    for a, b in edges:
        succ[a].add(b)
    closed = set()
    for x in elements:
        stack, seen = list(succ[x]), set()
        while stack:
            y = stack.pop()
            if y in seen:
                continue
            seen.add(y)
            stack.extend(succ[y])
        closed |= {(x, y) for y in seen}
    return closed


def _cycle(elements, edges) -> list | None:
    succ = {x: [] for x in elements}
    for a, b in edges:
        succ[a].append(b)
    colour = {x: 0 for x in elements}
    stack: list = []

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

    for x in elements:
        if colour[x] == 0:
            found = visit(x)
            if found:
                return found
    return None


@dataclass(frozen=True, eq=False)
class CausalStructure:
    """Finite strict partial order given by its Hasse diagram.

    Build through :func:`validate_structure`, which canonicalises the edge
    set to the transitive reduction.  Equality ignores the order in which
    elements were declared; that order only breaks ties in
    :meth:`linear_extension`.
    """

    elements: tuple
    hasse_edges: frozenset

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "hasse_edges", frozenset(self.hasse_edges))
        object.__setattr__(self, "_less", frozenset(_closure(self.elements, self.hasse_edges)))

    def __eq__(self, other):
        if not isinstance(other, CausalStructure):
            return NotImplemented
        return set(self.elements) == set(other.elements) and self.hasse_edges == other.hasse_edges

    def __hash__(self):
        return hash((frozenset(self.elements), self.hasse_edges))

    @property
    def order(self) -> frozenset:
        """All pairs ``(x, y)`` with ``x < y``."""
        return self._less

    def less(self, x, y) -> bool:
        return (x, y) in self._less

    def comparable(self, x, y) -> bool:
        return self.less(x, y) or self.less(y, x)

    def linear_extension(self, reverse_ties: bool = False) -> list:
        """Topological order of the elements, ties broken by declaration
        order (reversed when asked)."""
        index = {x: i for i, x in enumerate(self.elements)}
        indeg = {x: 0 for x in self.elements}
        succ = {x: [] for x in self.elements}
        for a, b in self.hasse_edges:
            succ[a].append(b)
            indeg[b] += 1
        sign = -1 if reverse_ties else 1
        heap = [sign * index[x] for x in self.elements if indeg[x] == 0]
        heapq.heapify(heap)
        out = []
        while heap:
            x = self.elements[sign * heapq.heappop(heap)]
            out.append(x)
            for y in succ[x]:
                indeg[y] -= 1
                if indeg[y] == 0:
                    heapq.heappush(heap, sign * index[y])
        return out

    def restrict(self, subset: Iterable) -> "CausalStructure":
        keep = [x for x in self.elements if x in set(subset)]
        pairs = {(a, b) for (a, b) in self._less if a in keep and b in keep}
        return validate_structure(keep, pairs)


def validate_structure(elements: Iterable | None, edges: Iterable) -> CausalStructure:
    """Check acyclicity and canonicalise ``edges`` to a Hasse diagram.

    ``elements`` may be ``None``, in which case they are collected from the
    edges in order of first appearance.
    """
    edges = [tuple(e) for e in edges]
    if elements is None:
        elements = []
        for a, b in edges:
            for x in (a, b):
                if x not in elements:
                    elements.append(x)
    elements = list(dict.fromkeys(elements))
    known = set(elements)
    for a, b in edges:
        for x in (a, b):
            if x not in known:
                raise CausalStructureError(f"unknown element {x!r} in edge {a} < {b}")
    cyc = _cycle(elements, edges)
    if cyc:
        raise CausalStructureError(
            "cycle detected: " + " < ".join(map(str, cyc)), cycle=cyc
        )
    less = _closure(elements, edges)
    hasse = {
        (a, b)
        for (a, b) in less
        if not any((a, z) in less and (z, b) in less for z in elements)
    }
    return CausalStructure(tuple(elements), frozenset(hasse))


def can_signal(cs: CausalStructure, x, y) -> bool:
    for e in (x, y):
        if e not in cs.elements:
            raise CausalStructureError(f"unknown element {e!r}")
    return cs.less(x, y)


def coarse_grain(cs: CausalStructure, partition: Mapping[Hashable, Hashable]) -> CausalStructure:
    """Quotient order: cluster C1 < C2 iff some x in C1, y in C2 have x < y."""
    missing = [x for x in cs.elements if x not in partition]
    if missing:
        raise CausalStructureError(f"partition does not cover {missing}")
    clusters = list(dict.fromkeys(partition[x] for x in cs.elements))
    pairs = {}
    for a, b in sorted(cs.order, key=lambda p: (cs.elements.index(p[0]), cs.elements.index(p[1]))):
        ca, cb = partition[a], partition[b]
        if ca != cb:
            pairs.setdefault((ca, cb), (a, b))
    try:
        return validate_structure(clusters, pairs)
    except CausalStructureError as e:
        cyc = e.cycle or []
        witnesses = [pairs[(cyc[i], cyc[i + 1])] for i in range(len(cyc) - 1)]
        raise CausalStructureError(
            "clustering creates a cycle "
            + " < ".join(map(str, cyc))
            + " (witnessed by "
            + ", ".join(f"{a} < {b}" for a, b in witnesses)
            + ")",
            cycle=cyc,
            witnesses=witnesses,
        ) from None


def diamond_structure() -> CausalStructure:
    return validate_structure(
        ["bot", "a", "b", "top"], [("bot", "a"), ("bot", "b"), ("a", "top"), ("b", "top")]
    )


# --------------------------------------------------------------------------
# networks
# --------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class NetWire:
    src: Hashable
    out: int
    dst: Hashable
    inp: int

    def __str__(self):
        return f"{self.src}.out{self.out} -> {self.dst}.in{self.inp}"


@dataclass(frozen=True, eq=False)
class CausalProcessNetwork:
    structure: CausalStructure
    assignment: Mapping[Hashable, Diagram]
    wires: tuple[NetWire, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "assignment", MappingProxyType(dict(self.assignment)))
        object.__setattr__(self, "wires", tuple(NetWire(*w) if not isinstance(w, NetWire) else w
                                                 for w in self.wires))
        problems = network_violations(self)
        if problems:
            raise NetworkError("invalid network: " + "; ".join(problems))

    def __eq__(self, other):
        if not isinstance(other, CausalProcessNetwork):
            return NotImplemented
        return (
            self.structure == other.structure
            and dict(self.assignment) == dict(other.assignment)
            and set(self.wires) == set(other.wires)
        )

    __hash__ = None

    def _wired(self):
        ins = {(w.dst, w.inp): w for w in self.wires}
        outs = {(w.src, w.out): w for w in self.wires}
        return ins, outs

    def open_inputs(self, reverse_ties: bool = False) -> list[tuple]:
        ins, _ = self._wired()
        return [
            (n, p)
            for n in self.structure.linear_extension(reverse_ties)
            for p in range(len(self.assignment[n].inputs))
            if (n, p) not in ins
        ]

    def open_outputs(self, reverse_ties: bool = False) -> list[tuple]:
        _, outs = self._wired()
        return [
            (n, p)
            for n in self.structure.linear_extension(reverse_ties)
            for p in range(len(self.assignment[n].outputs))
            if (n, p) not in outs
        ]


def network_violations(net: CausalProcessNetwork) -> list[str]:
    cs = net.structure
    problems = []
    for x in cs.elements:
        if x not in net.assignment:
            problems.append(f"node {x} has no box")
    for x in net.assignment:
        if x not in cs.elements:
            problems.append(f"box assigned to unknown node {x}")
    if problems:
        return problems
    for x, d in net.assignment.items():
        for p in well_formed(d):
            problems.append(f"node {x}: {p}")
    seen_in, seen_out = set(), set()
    for w in net.wires:
        if w.src not in net.assignment or w.dst not in net.assignment:
            problems.append(f"wire {w} joins an unknown node")
            continue
        if not cs.less(w.src, w.dst):
            problems.append(f"wire {w} does not follow the order upward")
            continue
        src, dst = net.assignment[w.src], net.assignment[w.dst]
        if not 0 <= w.out < len(src.outputs):
            problems.append(f"wire {w}: node {w.src} has no output {w.out}")
            continue
        if not 0 <= w.inp < len(dst.inputs):
            problems.append(f"wire {w}: node {w.dst} has no input {w.inp}")
            continue
        if src.outputs[w.out] != dst.inputs[w.inp]:
            problems.append(
                f"type mismatch on wire {w}: {src.outputs[w.out]} -> {dst.inputs[w.inp]}"
            )
        if (w.src, w.out) in seen_out:
            problems.append(f"output {w.src}.out{w.out} used by two wires")
        if (w.dst, w.inp) in seen_in:
            problems.append(f"input {w.dst}.in{w.inp} used by two wires")
        seen_out.add((w.src, w.out))
        seen_in.add((w.dst, w.inp))
    return problems


@dataclass(frozen=True)
class Flattened:
    """A network read as one diagram, with the network port behind each
    boundary position."""

    diagram: Diagram
    inputs: tuple  # (node, port) per boundary input
    outputs: tuple  # (node, port) per boundary output


def _reorder(labels_keys: list[tuple], target: list) -> Diagram:
    keys = [k for k, _ in labels_keys]
    labels = [l for _, l in labels_keys]
    return permutation(labels, [keys.index(k) for k in target])


def flatten(net: CausalProcessNetwork, reverse_ties: bool = False) -> Flattened:
    """Compose the node diagrams in a linear extension of the order.

    The boundary lists the open ports ordered by (node position, port)."""
    order = net.structure.linear_extension(reverse_ties)
    ins, _ = net._wired()
    open_in = net.open_inputs(reverse_ties)
    open_out = net.open_outputs(reverse_ties)

    live = [(("in", n, p), net.assignment[n].inputs[p]) for n, p in open_in]
    result = identity(*[l for _, l in live])
    for n in order:
        d = net.assignment[n]
        need = []
        for p in range(len(d.inputs)):
            w = ins.get((n, p))
            need.append(("in", n, p) if w is None else ("out", w.src, w.out))
        need_set = set(need)
        rest = [(k, l) for k, l in live if k not in need_set]
        result = seq(result, _reorder(live, [k for k, _ in rest] + need))
        result = seq(result, par(identity(*[l for _, l in rest]), d))
        live = rest + [(("out", n, q), l) for q, l in enumerate(d.outputs)]
    result = seq(result, _reorder(live, [("out", n, p) for n, p in open_out]))
    return Flattened(result, tuple(open_in), tuple(open_out))


def network_to_diagram(net) -> Diagram:
    if isinstance(net, DiamondNetwork):
        net = net.network()
    return flatten(net).diagram


# --------------------------------------------------------------------------
# coarse graining
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CoarseGrained:
    network: CausalProcessNetwork
    # original (node, port) -> (cluster, port)
    input_map: Mapping
    output_map: Mapping


def coarse_grain_network(
    net: CausalProcessNetwork, partition: Mapping[Hashable, Hashable]
) -> CoarseGrained:
    """Merge each cluster of nodes into one node carrying the flattened
    sub-network."""
    quotient = coarse_grain(net.structure, partition)
    members: dict = {c: [] for c in quotient.elements}
    for x in net.structure.elements:
        members[partition[x]].append(x)
    in_map, out_map, assignment = {}, {}, {}
    for c, xs in members.items():
        inner = [w for w in net.wires if partition[w.src] == c and partition[w.dst] == c]
        sub = CausalProcessNetwork(
            net.structure.restrict(xs), {x: net.assignment[x] for x in xs}, inner
        )
        flat = flatten(sub)
        assignment[c] = flat.diagram
        for k, key in enumerate(flat.inputs):
            in_map[key] = (c, k)
        for k, key in enumerate(flat.outputs):
            out_map[key] = (c, k)
    wires = []
    for w in net.wires:
        if partition[w.src] != partition[w.dst]:
            c1, o = out_map[(w.src, w.out)]
            c2, i = in_map[(w.dst, w.inp)]
            wires.append(NetWire(c1, o, c2, i))
    outer_in = {k: v for k, v in in_map.items() if not any((w.dst, w.inp) == k for w in net.wires)}
    outer_out = {k: v for k, v in out_map.items() if not any((w.src, w.out) == k for w in net.wires)}
    return CoarseGrained(
        CausalProcessNetwork(quotient, assignment, wires),
        MappingProxyType(outer_in),
        MappingProxyType(outer_out),
    )


# --------------------------------------------------------------------------
# the diamond
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiamondNetwork:
    """Two parties ``a`` and ``b`` sharing a common past ``bot`` and future ``top``.

    ``f_bot: () -> L + R``, ``f_a: X_a + L -> Y_a + L'``,
    ``f_b: X_b + R -> Y_b + R'``, ``f_top: L' + R' -> ()``.  The counts
    ``n_xa`` etc. say how many leading ports of each party box are open.
    The ``*_ports`` fields optionally record which ports of an original
    network the open ports came from.
    """

    f_bot: Diagram
    f_a: Diagram
    f_b: Diagram
    f_top: Diagram
    n_xa: int = 1
    n_ya: int = 1
    n_xb: int = 1
    n_yb: int = 1
    xa_ports: tuple = ()
    ya_ports: tuple = ()
    xb_ports: tuple = ()
    yb_ports: tuple = ()

    def __post_init__(self):
        if self.f_bot.inputs:
            raise NetworkError("the bottom box must not have inputs")
        if self.f_top.outputs:
            raise NetworkError("the top box must not have outputs")
        if self.f_bot.outputs != self.left + self.right:
            raise NetworkError(
                f"bottom outputs {list(map(str, self.f_bot.outputs))} do not match "
                f"L + R = {list(map(str, self.left + self.right))}"
            )
        if self.f_top.inputs != self.left_up + self.right_up:
            raise NetworkError(
                f"top inputs {list(map(str, self.f_top.inputs))} do not match "
                f"L' + R' = {list(map(str, self.left_up + self.right_up))}"
            )
        for name in ("f_bot", "f_a", "f_b", "f_top"):
            problems = well_formed(getattr(self, name))
            if problems:
                raise NetworkError(f"{name}: " + "; ".join(problems))

    x_a = property(lambda self: self.f_a.inputs[: self.n_xa])
    y_a = property(lambda self: self.f_a.outputs[: self.n_ya])
    x_b = property(lambda self: self.f_b.inputs[: self.n_xb])
    y_b = property(lambda self: self.f_b.outputs[: self.n_yb])
    left = property(lambda self: self.f_a.inputs[self.n_xa:])
    right = property(lambda self: self.f_b.inputs[self.n_xb:])
    left_up = property(lambda self: self.f_a.outputs[self.n_ya:])
    right_up = property(lambda self: self.f_b.outputs[self.n_yb:])

    def boxes(self) -> list[tuple[str, Diagram]]:
        return [("f_bot", self.f_bot), ("f_a", self.f_a), ("f_b", self.f_b), ("f_top", self.f_top)]

    def network(self) -> CausalProcessNetwork:
        nl, nlu = len(self.left), len(self.left_up)
        wires = [NetWire("bot", i, "a", self.n_xa + i) for i in range(nl)]
        wires += [NetWire("bot", nl + i, "b", self.n_xb + i) for i in range(len(self.right))]
        wires += [NetWire("a", self.n_ya + i, "top", i) for i in range(nlu)]
        wires += [NetWire("b", self.n_yb + i, "top", nlu + i) for i in range(len(self.right_up))]
        return CausalProcessNetwork(
            diamond_structure(),
            {"bot": self.f_bot, "a": self.f_a, "b": self.f_b, "top": self.f_top},
            wires,
        )

    def composite(self) -> Diagram:
        """``X_a + X_b -> Y_a + Y_b`` built with seq/par directly."""
        xa, xb, ya, yb = self.x_a, self.x_b, self.y_a, self.y_b
        l, r, lu, ru = self.left, self.right, self.left_up, self.right_up
        n1, n2, n3 = len(xa), len(xb), len(l)
        first = par(identity(*xa, *xb), self.f_bot)
        order = list(range(n1)) + [n1 + n2 + k for k in range(n3)]
        order += [n1 + k for k in range(n2)] + [n1 + n2 + n3 + k for k in range(len(r))]
        to_parties = permutation(xa + xb + l + r, order)
        m1, m2 = len(ya), len(lu)
        labels = ya + lu + yb + ru
        out_order = list(range(m1)) + [m1 + m2 + k for k in range(len(yb))]
        out_order += [m1 + k for k in range(m2)] + [m1 + m2 + len(yb) + k for k in range(len(ru))]
        return seq_all(
            first,
            to_parties,
            par(self.f_a, self.f_b),
            permutation(labels, out_order),
            par(identity(*ya, *yb), self.f_top),
        )


def diamond_normal_form(net: CausalProcessNetwork, party_a, party_b) -> DiamondNetwork:
    """Cluster ``party_a`` into ``a``, ``party_b`` into ``b`` and the rest into
    ``bot`` (nodes above no party node) or ``top`` (nodes above some party
    node and below none)."""
    cs = net.structure
    pa, pb = list(dict.fromkeys(party_a)), list(dict.fromkeys(party_b))
    if not pa or not pb:
        raise NetworkError("both parties need at least one node")
    if set(pa) & set(pb):
        raise NetworkError(f"parties overlap on {sorted(set(pa) & set(pb), key=str)}")
    for x in pa + pb:
        if x not in cs.elements:
            raise NetworkError(f"unknown node {x!r}")
    for x in pa:
        for y in pb:
            if cs.comparable(x, y):
                lo, hi = (x, y) if cs.less(x, y) else (y, x)
                raise NetworkError(
                    f"parties comparable: {lo} < {hi} gives a signalling channel between the parties"
                )
    party = set(pa) | set(pb)
    partition = {}
    for x in pa:
        partition[x] = "a"
    for x in pb:
        partition[x] = "b"
    for r in cs.elements:
        if r in party:
            continue
        above = [p for p in party if cs.less(p, r)]
        below = [p for p in party if cs.less(r, p)]
        if above and below:
            raise NetworkError(
                f"node {r} lies above {sorted(above, key=str)[0]} and below "
                f"{sorted(below, key=str)[0]}; no diamond reduction"
            )
        partition[r] = "top" if above else "bot"

    cg = coarse_grain_network(net, partition)
    q = cg.network
    for c in ("bot", "top"):
        if any(n == c for n, _ in q.open_inputs()):
            raise NetworkError(f"open input at {c}; open ports are only allowed at the parties")
        if any(n == c for n, _ in q.open_outputs()):
            raise NetworkError(f"open output at {c}; open ports are only allowed at the parties")

    boxes = {c: q.assignment.get(c, empty()) for c in ("bot", "a", "b", "top")}
    wires = q.wires
    ins_wired = {(w.dst, w.inp): w for w in wires}
    outs_wired = {(w.src, w.out): w for w in wires}

    def open_in(c):
        d = boxes[c]
        return [p for p in range(len(d.inputs)) if (c, p) not in ins_wired]

    def open_out(c):
        d = boxes[c]
        return [p for p in range(len(d.outputs)) if (c, p) not in outs_wired]

    # bottom outputs: to a, passing straight to top (routed through a), to b
    bot_out = boxes["bot"].outputs
    to_a = [w for w in wires if w.src == "bot" and w.dst == "a"]
    to_b = [w for w in wires if w.src == "bot" and w.dst == "b"]
    passing = [w for w in wires if w.src == "bot" and w.dst == "top"]
    to_a.sort(key=lambda w: w.out)
    to_b.sort(key=lambda w: w.out)
    passing.sort(key=lambda w: w.out)
    left_src = [w.out for w in to_a] + [w.out for w in passing]
    right_src = [w.out for w in to_b]
    f_bot = seq(boxes["bot"], permutation(bot_out, left_src + right_src))

    from_a = sorted([w for w in wires if w.src == "a" and w.dst == "top"], key=lambda w: w.inp)
    from_b = sorted([w for w in wires if w.src == "b" and w.dst == "top"], key=lambda w: w.inp)
    # top inputs in order: L' (a outputs, then passing wires), R'
    lu_keys = [("a", w.out) for w in from_a] + [("pass", w.out) for w in passing]
    top_in_order = [w.inp for w in from_a] + [w.inp for w in passing] + [w.inp for w in from_b]
    top = boxes["top"]
    inv = [top_in_order.index(k) for k in range(len(top.inputs))]
    f_top = seq(permutation([top.inputs[k] for k in top_in_order], inv), top)

    def party_box(c, feeders, ups, extra):
        d = boxes[c]
        xs, ys = open_in(c), open_out(c)
        n_d_in = len(d.inputs)
        # inputs of the new box: X (open), then feeders, then pass-throughs
        new_in = xs + [w.inp for w in feeders] + [n_d_in + k for k in range(len(extra))]
        labels_in = list(d.inputs) + [bot_out[w.out] for w in extra]
        core = par(d, identity(*[bot_out[w.out] for w in extra]))
        inv_in = [new_in.index(k) for k in range(len(labels_in))]
        pre = permutation([labels_in[k] for k in new_in], inv_in)
        n_d_out = len(d.outputs)
        new_out = ys + [w.out for w in ups] + [n_d_out + k for k in range(len(extra))]
        labels_out = list(d.outputs) + [bot_out[w.out] for w in extra]
        post = permutation(labels_out, new_out)
        return seq_all(pre, core, post), len(xs), len(ys), xs, ys

    f_a, nxa, nya, xa_idx, ya_idx = party_box("a", to_a, from_a, passing)
    f_b, nxb, nyb, xb_idx, yb_idx = party_box("b", to_b, from_b, [])

    inv_in = {v: k for k, v in cg.input_map.items()}
    inv_out = {v: k for k, v in cg.output_map.items()}
    return DiamondNetwork(
        f_bot,
        f_a,
        f_b,
        f_top,
        nxa,
        nya,
        nxb,
        nyb,
        xa_ports=tuple(inv_in[("a", p)] for p in xa_idx),
        ya_ports=tuple(inv_out[("a", p)] for p in ya_idx),
        xb_ports=tuple(inv_in[("b", p)] for p in xb_idx),
        yb_ports=tuple(inv_out[("b", p)] for p in yb_idx),
    )
