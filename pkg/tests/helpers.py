"""Independent oracles and random builders shared by the test modules."""
import itertools
from pathlib import Path

import numpy as np

from causalkit.diagram import (
    BOUNDARY,
    BoxSignature,
    SystemLabel,
    box,
    discard,
    identity,
    par,
    permutation,
    seq,
    swap,
)
from scipy.optimize import linprog

from causalkit.causal import CausalProcessNetwork, coarse_grain_network, flatten
from causalkit.semantics import FINSTOCH, Interpretation, evaluate, permute_ports, random_generator

FIXTURES = Path(__file__).parent / "fixtures"


def einsum_oracle(d, interp):
    """Evaluate a finstoch diagram by one global einsum, one index per wire.

    Shares nothing with the sequential contraction in ``evaluate`` beyond
    the bound matrices themselves."""
    operands = []
    wire_id = {w.dst: k for k, w in enumerate(d.wires)}
    src_id = {w.src: k for k, w in enumerate(d.wires)}
    dim = {k: interp.dim(_label_of(d, w)) for k, w in enumerate(d.wires)}
    fresh = len(d.wires)
    for n, sig in enumerate(d.boxes):
        ins = [interp.dim(l) for l in sig.inputs]
        outs = [interp.dim(l) for l in sig.outputs]
        if sig.kind == "generator":
            mat = np.asarray(interp.bindings[sig.name], dtype=float)
        elif sig.kind == "swap":
            a, b = ins
            mat = np.zeros((b * a, a * b))
            for i in range(a):
                for j in range(b):
                    mat[j * a + i, i * b + j] = 1.0
        elif sig.kind == "discard":
            mat = np.ones((1, ins[0]))
        else:
            mat = np.eye(ins[0])
        t = mat.reshape(tuple(outs) + tuple(ins))
        idx = [src_id[(n, q)] for q in range(len(outs))] + [wire_id[(n, p)] for p in range(len(ins))]
        operands += [t, idx]
    out_idx = [wire_id[(BOUNDARY, j)] for j in range(len(d.outputs))]
    in_idx = []
    for i in range(len(d.inputs)):
        k = src_id[(BOUNDARY, i)]
        if k in out_idx:
            # bare wire from input to output: split it with a Kronecker delta
            operands += [np.eye(dim[k]), [fresh, k]]
            in_idx.append(fresh)
            fresh += 1
        else:
            in_idx.append(k)
    n_out = int(np.prod([interp.dim(l) for l in d.outputs]))
    n_in = int(np.prod([interp.dim(l) for l in d.inputs]))
    if not operands:
        return np.ones((1, 1))
    value = np.einsum(*operands, out_idx + in_idx)
    return np.asarray(value).reshape(n_out, n_in)


def _label_of(d, w):
    if w.src.node == BOUNDARY:
        return d.inputs[w.src.index]
    return d.boxes[w.src.node].outputs[w.src.index]


def random_layered(seed, n_layers=4, dims=None, n_inputs=None, start=None, prefix="g"):
    """Random well-formed diagram built from permutations and single boxes.

    ``start`` fixes the input labels.  Returns ``(diagram, interpretation)``
    with stochastic bindings named ``{prefix}{layer}``."""
    rng = np.random.default_rng(seed)
    dims = dims or {"A": 2, "B": 3}
    labels = [SystemLabel(n) for n in dims]
    bindings = {}
    k = int(rng.integers(0, 3)) if n_inputs is None else n_inputs
    current = [labels[int(i)] for i in rng.integers(0, len(labels), k)]
    if start is not None:
        current = list(start)
    d = identity(*current)
    for layer in range(n_layers):
        kind = rng.choice(["gen", "gen", "swap", "discard", "perm"])
        if kind == "perm" and len(current) > 1:
            order = [int(i) for i in rng.permutation(len(current))]
            d = seq(d, permutation(current, order))
            current = [current[i] for i in order]
            continue
        if kind == "swap" and len(current) >= 2:
            part = swap(current[-2], current[-1])
            used = 2
        elif kind == "discard" and current:
            part = discard(current[-1])
            used = 1
        else:
            used = int(rng.integers(0, min(2, len(current)) + 1))
            ins = tuple(current[len(current) - used:])
            outs = tuple(labels[int(i)] for i in rng.integers(0, len(labels), rng.integers(0, 3)))
            sig = BoxSignature(f"{prefix}{layer}", ins, outs)
            bindings[sig.name] = random_generator(
                FINSTOCH, [dims[l.name] for l in ins], [dims[l.name] for l in outs],
                "stochastic", seed=[seed, layer],
            )
            part = box(sig)
        rest = current[: len(current) - used]
        d = seq(d, par(identity(*rest), part))
        current = rest + list(part.outputs)
    return d, Interpretation(FINSTOCH, dims, bindings)


def marginal_oracle(F, xa, xb, ya, yb, tol=1e-9):
    """Non-signalling read off the marginals directly."""
    t = F.reshape(ya, yb, xa, xb)
    pb = t.sum(axis=0)  # [yb, xa, xb]
    pa = t.sum(axis=1)  # [ya, xa, xb]
    ab = np.abs(pb - pb[:, :1, :]).max() <= tol
    ba = np.abs(pa - pa[:, :, :1]).max() <= tol
    return ab, ba, pb[:, 0, :], pa[:, :, 0]


def vertex_oracle(table):
    """LHV feasibility with scipy over the explicitly listed vertices."""
    na, nb, nx, ny = table.shape
    cols = []
    for lam in itertools.product(range(na), repeat=nx):
        for mu in itertools.product(range(nb), repeat=ny):
            v = np.zeros(table.shape)
            for x in range(nx):
                for y in range(ny):
                    v[lam[x], mu[y], x, y] = 1
            cols.append(v.reshape(-1))
    A = np.vstack([np.array(cols).T, np.ones(len(cols))])
    b = np.append(table.reshape(-1), 1)
    res = linprog(np.zeros(len(cols)), A_eq=A, b_eq=b, bounds=(0, None), method="highs")
    return res.status == 0, len(cols)


def coarse_grain_gap(net, interp, partition):
    """Max entry gap between a network and its coarse-graining, ports aligned.

    Each cluster is pre-composed into one opaque box bound to its evaluated
    matrix, so the coarse side never sees the fine boxes."""
    fine = flatten(net)
    cg = coarse_grain_network(net, partition)
    opaque, bindings = {}, dict(interp.bindings)
    for c, d in cg.network.assignment.items():
        sig = BoxSignature(f"cluster_{c}", d.inputs, d.outputs)
        bindings[sig.name] = evaluate(d, interp)
        opaque[c] = box(sig)
    coarse_net = CausalProcessNetwork(cg.network.structure, opaque, cg.network.wires)
    coarse = flatten(coarse_net)
    coarse_interp = Interpretation(interp.backend, interp.dims, bindings)
    m1 = evaluate(fine.diagram, interp)
    m2 = evaluate(coarse.diagram, coarse_interp)
    in_order = [coarse.inputs.index(cg.input_map[p]) for p in fine.inputs]
    out_order = [coarse.outputs.index(cg.output_map[p]) for p in fine.outputs]
    dims_in = [interp.dim(l) for l in coarse.diagram.inputs]
    dims_out = [interp.dim(l) for l in coarse.diagram.outputs]
    m2 = permute_ports(m2, dims_in, dims_out, in_order, out_order)
    return np.abs(m1 - m2).max()
