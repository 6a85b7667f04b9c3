"""Seeded random diamonds, networks and theories."""
from __future__ import annotations

import numpy as np

from .causal import CausalProcessNetwork, DiamondNetwork, NetWire, validate_structure
from .diagram import BoxSignature, SystemLabel, box
from .semantics import FINSTOCH, QUANTUM, Interpretation, random_generator


def _label_pool(rng, names, dim_choices):
    return {n: int(rng.choice(dim_choices)) for n in names}


def random_diamond(
    seed: int,
    backend: str = FINSTOCH,
    dim_choices=(1, 2, 3),
    cls: str | None = None,
    fixed_dim: int | None = None,
):
    """Diamond with one system per wire ``X_a, Y_a, X_b, Y_b, L, R, L', R'``
    and random boxes of class ``cls`` (stochastic/cptp by default).

    Returns ``(DiamondNetwork, Interpretation)``.
    """
    rng = np.random.default_rng(seed)
    names = ["Xa", "Ya", "Xb", "Yb", "L", "R", "Lu", "Ru"]
    if fixed_dim is not None:
        dims = {n: fixed_dim for n in names}
    else:
        dims = _label_pool(rng, names, dim_choices)
    lab = {n: SystemLabel(n) for n in names}
    sigs = {
        "f_bot": BoxSignature("f_bot", (), (lab["L"], lab["R"])),
        "f_a": BoxSignature("f_a", (lab["Xa"], lab["L"]), (lab["Ya"], lab["Lu"])),
        "f_b": BoxSignature("f_b", (lab["Xb"], lab["R"]), (lab["Yb"], lab["Ru"])),
        "f_top": BoxSignature("f_top", (lab["Lu"], lab["Ru"]), ()),
    }
    cls = cls or ("stochastic" if backend == FINSTOCH else "cptp")
    bindings = {}
    for k, (name, sig) in enumerate(sigs.items()):
        ins = [dims[l.name] for l in sig.inputs]
        outs = [dims[l.name] for l in sig.outputs]
        bindings[name] = random_generator(backend, ins, outs, cls, seed=[seed, k])
    dn = DiamondNetwork(*(box(sigs[n]) for n in ("f_bot", "f_a", "f_b", "f_top")))
    return dn, Interpretation(backend, dims, bindings)


def random_network(seed: int, max_nodes: int = 5, dims=None):
    """Small random causal process network with finstoch bindings.

    Returns ``(network, interpretation)``; about half of the comparable
    port pairs get wired, the rest stay open.
    """
    rng = np.random.default_rng(seed)
    dims = dims or {"A": 2, "B": 3}
    labels = [SystemLabel(n) for n in dims]
    n = int(rng.integers(1, max_nodes + 1))
    elements = [f"n{i}" for i in range(n)]
    edges = [
        (elements[i], elements[j])
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < 0.4
    ]
    cs = validate_structure(elements, edges)
    assignment, bindings = {}, {}
    for x in elements:
        ins = tuple(labels[int(k)] for k in rng.integers(0, len(labels), rng.integers(0, 3)))
        outs = tuple(labels[int(k)] for k in rng.integers(0, len(labels), rng.integers(0, 3)))
        sig = BoxSignature(f"g_{x}", ins, outs)
        assignment[x] = box(sig)
        bindings[sig.name] = random_generator(
            FINSTOCH, [dims[l.name] for l in ins], [dims[l.name] for l in outs],
            "stochastic", seed=[seed, len(bindings)],
        )
    wires, used_in = [], set()
    for x in elements:
        for q, label in enumerate(assignment[x].outputs):
            cands = [
                (y, p)
                for y in elements
                if cs.less(x, y)
                for p, l2 in enumerate(assignment[y].inputs)
                if l2 == label and (y, p) not in used_in
            ]
            if cands and rng.random() < 0.6:
                y, p = cands[int(rng.integers(len(cands)))]
                used_in.add((y, p))
                wires.append(NetWire(x, q, y, p))
    net = CausalProcessNetwork(cs, assignment, wires)
    return net, Interpretation(FINSTOCH, dims, bindings)


def random_partition(net: CausalProcessNetwork, seed: int) -> dict:
    """Consecutive blocks of a linear extension; the quotient is always a poset."""
    rng = np.random.default_rng(seed)
    order = net.structure.linear_extension()
    partition, block = {}, 0
    for i, x in enumerate(order):
        if i and rng.random() < 0.5:
            block += 1
        partition[x] = f"c{block}"
    return partition


def random_theory(seed: int, substochastic: bool, n_maps: int = 3, uniform_scale=None):
    """A state per system plus ``n_maps`` random maps.

    With ``substochastic`` one map is sub-stochastic: scaled columnwise by
    ``uniform_scale`` when given, otherwise by independent factors.
    Returns ``(generators, interpretation, offender_name)``.
    """
    rng = np.random.default_rng(seed)
    dims = {"A": int(rng.integers(1, 4)), "B": int(rng.integers(1, 4))}
    labels = [SystemLabel(n) for n in dims]
    gens, bindings = [], {}
    for l in labels:
        sig = BoxSignature(f"s_{l.name}", (), (l,))
        gens.append(sig)
        bindings[sig.name] = random_generator(FINSTOCH, [], [dims[l.name]], "stochastic", [seed, 99, len(gens)])
    bad = int(rng.integers(n_maps)) if substochastic else -1
    offender = None
    for k in range(n_maps):
        ins = tuple(labels[int(i)] for i in rng.integers(0, 2, rng.integers(1, 3)))
        outs = tuple(labels[int(i)] for i in rng.integers(0, 2, rng.integers(1, 3)))
        sig = BoxSignature(f"g{k}", ins, outs)
        di = [dims[l.name] for l in ins]
        do = [dims[l.name] for l in outs]
        if k == bad:
            offender = sig.name
            if uniform_scale is not None:
                m = uniform_scale * random_generator(FINSTOCH, di, do, "stochastic", [seed, k])
            else:
                m = random_generator(FINSTOCH, di, do, "substochastic", [seed, k])
        else:
            m = random_generator(FINSTOCH, di, do, "stochastic", [seed, k])
        gens.append(sig)
        bindings[sig.name] = m
    return gens, Interpretation(FINSTOCH, dims, bindings), offender


__all__ = ["random_diamond", "random_network", "random_partition", "random_theory", "QUANTUM"]
