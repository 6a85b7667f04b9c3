"""Matrix semantics for diagrams.

Two backends are supported:

``finstoch``
    Systems are finite sets, boxes are nonnegative matrices.  Discarding is
    the all-ones row (marginalisation).
``quantum``
    Systems are Hilbert spaces of dimension ``d``; boxes are channels stored
    as Choi matrices and composed through their transfer matrices.  A wire
    of dimension ``d`` carries a ``d*d`` dimensional vector space and
    discarding is the trace functional ``vec(I)``.

Conventions used throughout: columns index inputs, rows index outputs, the
later map multiplies on the left, and the leftmost port is the most
significant tensor factor (so ``par`` is ``np.kron``).

Choi matrices live on ``output (x) input`` and are
``J = sum_{i,i'} E(|i><i'|) (x) |i><i'|``, so ``Tr_out J = I`` for
trace-preserving maps.  Transfer matrices act on row-major vectorised
density matrices with the two indices of each wire kept adjacent:
``S[(o1 o1', o2 o2', ...), (i1 i1', ...)]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, reduce
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np

from .diagram import (
    BOUNDARY,
    DISCARD,
    GENERATOR,
    IDENTITY,
    SWAP,
    BoxSignature,
    Diagram,
    DiagramError,
    SystemLabel,
    well_formed,
)

FINSTOCH = "finstoch"
QUANTUM = "quantum"
BACKENDS = (FINSTOCH, QUANTUM)

TOL_EQ = 1e-9
TOL_PSD = 1e-9
MAX_WIRE_DIM = 32


class EvaluationError(ValueError):
    pass


def _prod(dims: Sequence[int]) -> int:
    return int(np.prod(dims, dtype=np.int64)) if len(dims) else 1


def kron_all(mats) -> np.ndarray:
    return reduce(np.kron, mats, np.ones((1, 1)))


# --------------------------------------------------------------------------
# quantum representations
# --------------------------------------------------------------------------


def choi_to_transfer(choi, in_dims: Sequence[int], out_dims: Sequence[int]) -> np.ndarray:
    in_dims, out_dims = tuple(in_dims), tuple(out_dims)
    m, n = len(out_dims), len(in_dims)
    t = np.asarray(choi, dtype=complex).reshape(out_dims + in_dims + out_dims + in_dims)
    axes = []
    for k in range(m):
        axes += [k, m + n + k]
    for k in range(n):
        axes += [m + k, 2 * m + n + k]
    t = t.transpose(axes)
    return t.reshape(_prod([d * d for d in out_dims]), _prod([d * d for d in in_dims]))


def transfer_to_choi(transfer, in_dims: Sequence[int], out_dims: Sequence[int]) -> np.ndarray:
    in_dims, out_dims = tuple(in_dims), tuple(out_dims)
    m, n = len(out_dims), len(in_dims)
    shape = []
    for d in out_dims + in_dims:
        shape += [d, d]
    t = np.asarray(transfer, dtype=complex).reshape(shape)
    # axes of t: o1 o1' ... om om' i1 i1' ... ; target o.. i.. o'.. i'..
    unprimed = [2 * k for k in range(m + n)]
    primed = [2 * k + 1 for k in range(m + n)]
    t = t.transpose(unprimed + primed)
    size = _prod(out_dims) * _prod(in_dims)
    return t.reshape(size, size)


def kraus_to_choi(kraus: Sequence[np.ndarray]) -> np.ndarray:
    vecs = [np.asarray(k, dtype=complex).reshape(-1) for k in kraus]
    return sum(np.outer(v, v.conj()) for v in vecs)


def partial_trace_output(choi, in_dims: Sequence[int], out_dims: Sequence[int]) -> np.ndarray:
    """``Tr_out`` of a Choi matrix, an operator on the input space."""
    do, di = _prod(out_dims), _prod(in_dims)
    return np.einsum("oioj->ij", np.asarray(choi).reshape(do, di, do, di))


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    choi: np.ndarray
    in_dims: tuple[int, ...] = ()
    out_dims: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "in_dims", tuple(int(d) for d in self.in_dims))
        object.__setattr__(self, "out_dims", tuple(int(d) for d in self.out_dims))
        choi = np.array(self.choi, dtype=complex)
        size = _prod(self.in_dims) * _prod(self.out_dims)
        if choi.shape != (size, size):
            raise EvaluationError(
                f"Choi matrix has shape {choi.shape}, expected {(size, size)}"
            )
        choi.setflags(write=False)
        object.__setattr__(self, "choi", choi)

    @cached_property
    def transfer(self) -> np.ndarray:
        t = choi_to_transfer(self.choi, self.in_dims, self.out_dims)
        t.setflags(write=False)
        return t

    @classmethod
    def from_kraus(cls, kraus, in_dims, out_dims) -> "QuantumChannel":
        return cls(kraus_to_choi(kraus), in_dims, out_dims)

    @classmethod
    def from_transfer(cls, transfer, in_dims, out_dims) -> "QuantumChannel":
        return cls(transfer_to_choi(transfer, in_dims, out_dims), in_dims, out_dims)

    @classmethod
    def identity(cls, d: int) -> "QuantumChannel":
        return cls.from_kraus([np.eye(d)], (d,), (d,))


def embed_stochastic(matrix, in_dims: Sequence[int], out_dims: Sequence[int]) -> QuantumChannel:
    """Quantum channel that dephases, applies the stochastic map, and
    prepares the resulting diagonal state."""
    p = np.asarray(matrix, dtype=float)
    do, di = p.shape
    choi = np.zeros((do * di, do * di), dtype=complex)
    for o in range(do):
        for i in range(di):
            k = o * di + i
            choi[k, k] = p[o, i]
    return QuantumChannel(choi, in_dims, out_dims)


# --------------------------------------------------------------------------
# interpretation
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Interpretation:
    """Dimensions for system labels and concrete maps for box names.

    Finstoch bindings are real matrices; quantum bindings are
    :class:`QuantumChannel` objects (or raw Choi matrices, which are wrapped
    once the box signature is known).
    """

    backend: str
    dims: Mapping[str, int]
    bindings: Mapping[str, Any] = field(default_factory=dict)
    terminal_intended: bool = False

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise EvaluationError(f"unknown backend {self.backend!r}")
        dims = {}
        for k, v in dict(self.dims).items():
            name = k.name if isinstance(k, SystemLabel) else k
            if int(v) < 1 or int(v) > MAX_WIRE_DIM:
                raise EvaluationError(f"dimension of {name} must lie in 1..{MAX_WIRE_DIM}")
            dims[name] = int(v)
        object.__setattr__(self, "dims", MappingProxyType(dims))
        bindings = {}
        for k, v in dict(self.bindings).items():
            name = k.name if isinstance(k, BoxSignature) else k
            if self.backend == FINSTOCH:
                v = np.array(v, dtype=float)
                v.setflags(write=False)
            bindings[name] = v
        object.__setattr__(self, "bindings", MappingProxyType(bindings))

    @property
    def default_tol(self) -> float:
        return 1e-9 if self.backend == FINSTOCH else 1e-7

    def bind(self, **maps) -> "Interpretation":
        return Interpretation(
            self.backend, self.dims, {**self.bindings, **maps}, self.terminal_intended
        )

    def dim(self, label: SystemLabel) -> int:
        try:
            return self.dims[label.name]
        except KeyError:
            raise EvaluationError(f"no dimension bound for system {label}") from None

    def wire_dim(self, label: SystemLabel) -> int:
        d = self.dim(label)
        return d if self.backend == FINSTOCH else d * d

    def phys_dims(self, labels: Sequence[SystemLabel]) -> tuple[int, ...]:
        return tuple(self.dim(l) for l in labels)

    def discard_vector(self, labels: Sequence[SystemLabel]) -> np.ndarray:
        return discard_vector(self.phys_dims(labels), self.backend)

    def generator_matrix(self, sig: BoxSignature) -> np.ndarray:
        """Matrix (finstoch) or transfer matrix (quantum) bound to ``sig``."""
        try:
            bound = self.bindings[sig.name]
        except KeyError:
            raise EvaluationError(f"unbound box {sig.name}") from None
        if self.backend == FINSTOCH:
            mat = bound
        else:
            if not isinstance(bound, QuantumChannel):
                bound = QuantumChannel(bound, self.phys_dims(sig.inputs), self.phys_dims(sig.outputs))
            if bound.in_dims != self.phys_dims(sig.inputs) or bound.out_dims != self.phys_dims(
                sig.outputs
            ):
                raise EvaluationError(
                    f"dimension mismatch for box {sig.name}: channel dims "
                    f"{bound.in_dims}->{bound.out_dims}, signature dims "
                    f"{self.phys_dims(sig.inputs)}->{self.phys_dims(sig.outputs)}"
                )
            mat = bound.transfer
        expected = (
            _prod([self.wire_dim(l) for l in sig.outputs]),
            _prod([self.wire_dim(l) for l in sig.inputs]),
        )
        if mat.shape != expected:
            raise EvaluationError(
                f"dimension mismatch for box {sig.name}: bound matrix has shape "
                f"{mat.shape}, signature needs {expected}"
            )
        return mat


def discard_vector(phys_dims: Sequence[int], backend: str) -> np.ndarray:
    """Row vector implementing discarding on a composite system."""
    if backend == FINSTOCH:
        return np.ones(_prod(phys_dims))
    return kron_all([np.eye(d).reshape(1, d * d) for d in phys_dims]).reshape(-1)


def wire_dims(phys_dims: Sequence[int], backend: str) -> tuple[int, ...]:
    return tuple(d if backend == FINSTOCH else d * d for d in phys_dims)


def swap_matrix(da: int, db: int) -> np.ndarray:
    """Permutation taking ``a (x) b`` to ``b (x) a``."""
    return np.eye(da * db).reshape(da, db, da * db).transpose(1, 0, 2).reshape(db * da, da * db)


def _node_tensor(sig: BoxSignature, interp: Interpretation, node: int) -> np.ndarray:
    ins = [interp.wire_dim(l) for l in sig.inputs]
    outs = [interp.wire_dim(l) for l in sig.outputs]
    if sig.kind == GENERATOR:
        try:
            mat = interp.generator_matrix(sig)
        except EvaluationError as e:
            raise EvaluationError(f"node n{node}: {e}") from None
    elif sig.kind == IDENTITY:
        mat = np.eye(ins[0])
    elif sig.kind == SWAP:
        mat = swap_matrix(ins[0], ins[1])
    elif sig.kind == DISCARD:
        mat = interp.discard_vector(sig.inputs).reshape(1, -1)
    else:  # pragma: no cover - guarded by BoxSignature
        raise EvaluationError(f"unknown box kind {sig.kind}")
    return np.asarray(mat).reshape(tuple(outs) + tuple(ins))


def evaluate(d: Diagram, interp: Interpretation, reverse_ties: bool = False) -> np.ndarray:
    """Contract ``d`` to a single matrix of shape ``(prod out, prod in)``.

    Nodes are absorbed one at a time in topological order; ``reverse_ties``
    flips the tie-breaking between independent nodes.
    """
    problems = well_formed(d)
    if problems:
        raise EvaluationError("ill-formed diagram: " + "; ".join(problems))
    dtype = float if interp.backend == FINSTOCH else complex
    in_dims = [interp.wire_dim(l) for l in d.inputs]
    out_dims = [interp.wire_dim(l) for l in d.outputs]

    wire_from = {w.src: k for k, w in enumerate(d.wires)}
    wire_into = {w.dst: k for k, w in enumerate(d.wires)}

    n_in = len(d.inputs)
    size_in = _prod(in_dims)
    tensor = np.eye(size_in, dtype=dtype).reshape(tuple(in_dims) * 2)
    axes: list[tuple[str, int]] = [("w", wire_from[(BOUNDARY, i)]) for i in range(n_in)]
    axes += [("in", i) for i in range(n_in)]

    for node in d.topological_order(reverse_ties):
        sig = d.boxes[node]
        b = _node_tensor(sig, interp, node).astype(dtype, copy=False)
        n_out, n_arg = len(sig.outputs), len(sig.inputs)
        pos = [axes.index(("w", wire_into[(node, p)])) for p in range(n_arg)]
        tensor = np.tensordot(b, tensor, axes=(list(range(n_out, n_out + n_arg)), pos))
        kept = [a for i, a in enumerate(axes) if i not in set(pos)]
        axes = [("w", wire_from[(node, q)]) for q in range(n_out)] + kept

    order = [axes.index(("w", wire_into[(BOUNDARY, j)])) for j in range(len(d.outputs))]
    order += [axes.index(("in", i)) for i in range(n_in)]
    tensor = np.transpose(tensor, order) if order else tensor
    return np.asarray(tensor).reshape(_prod(out_dims), size_in)


def permute_ports(
    matrix,
    in_dims: Sequence[int],
    out_dims: Sequence[int],
    in_order: Sequence[int],
    out_order: Sequence[int],
) -> np.ndarray:
    """Reorder tensor factors: new input ``k`` is old input ``in_order[k]``,
    new output ``k`` is old output ``out_order[k]``.  Dims are per-wire
    vector-space dimensions."""
    m = len(out_dims)
    t = np.asarray(matrix).reshape(tuple(out_dims) + tuple(in_dims))
    t = t.transpose(list(out_order) + [m + k for k in in_order])
    return t.reshape(_prod(out_dims), _prod(in_dims))


# --------------------------------------------------------------------------
# random maps and validation
# --------------------------------------------------------------------------


def random_generator(
    backend: str,
    in_dims: Sequence[int],
    out_dims: Sequence[int],
    cls: str = "stochastic",
    seed: int | None = None,
):
    """Seeded random map of the requested class.

    finstoch ``stochastic``: uniform entries with normalised columns;
    ``substochastic``: the same with each column scaled by a factor drawn
    from [0.2, 0.9].  quantum ``cptp``: Stinespring dilation of a random
    isometry, environment traced out.
    """
    rng = np.random.default_rng(seed)
    di, do = _prod(in_dims), _prod(out_dims)
    if backend == FINSTOCH:
        if cls not in ("stochastic", "substochastic"):
            raise EvaluationError(f"class {cls!r} not available for finstoch")
        m = rng.random((do, di)) + 1e-3
        m /= m.sum(axis=0, keepdims=True)
        if cls == "substochastic":
            m *= rng.uniform(0.2, 0.9, size=di)
        return m
    if backend == QUANTUM:
        if cls != "cptp":
            raise EvaluationError(f"class {cls!r} not available for quantum")
        de = di * do
        g = rng.normal(size=(do * de, di)) + 1j * rng.normal(size=(do * de, di))
        q, _ = np.linalg.qr(g)
        v = q[:, :di].reshape(do, de, di)
        kraus = [v[:, e, :] for e in range(de)]
        return QuantumChannel.from_kraus(kraus, in_dims, out_dims)
    raise EvaluationError(f"unknown backend {backend!r}")


def validate(map_, cls: str, in_dims=None, out_dims=None, tol: float = TOL_EQ) -> list[str]:
    """Check ``map_`` against class ``stochastic``, ``substochastic``, ``cp`` or ``cptp``.

    Quantum maps may be passed as :class:`QuantumChannel` or as a raw Choi
    matrix together with ``in_dims``/``out_dims``.
    """
    problems: list[str] = []
    if cls in ("stochastic", "substochastic"):
        m = np.asarray(map_)
        if m.ndim != 2:
            return [f"expected a matrix, got shape {m.shape}"]
        if np.iscomplexobj(m):
            if np.abs(m.imag).max(initial=0) > tol:
                problems.append("entries are not real")
            m = m.real
        for (r, c) in zip(*np.nonzero(m < -tol)):
            problems.append(f"entry ({r}, {c}) is negative: {m[r, c]:.12g}")
        sums = np.clip(m, 0, None).sum(axis=0)
        for j, s in enumerate(sums):
            if cls == "stochastic" and abs(s - 1) > tol:
                problems.append(f"column {j} sums to {s:.12g}")
            if cls == "substochastic" and s > 1 + tol:
                problems.append(f"column {j} sums to {s:.12g} > 1")
        return problems
    if cls in ("cp", "cptp"):
        if isinstance(map_, QuantumChannel):
            choi, in_dims, out_dims = map_.choi, map_.in_dims, map_.out_dims
        else:
            choi = np.asarray(map_, dtype=complex)
            if in_dims is None or out_dims is None:
                return ["raw Choi matrix needs in_dims and out_dims"]
        size = _prod(in_dims) * _prod(out_dims)
        if choi.shape != (size, size):
            return [f"Choi matrix has shape {choi.shape}, expected {(size, size)}"]
        herm = np.abs(choi - choi.conj().T).max(initial=0)
        if herm > tol:
            problems.append(f"Choi matrix is not Hermitian (deviation {herm:.3e})")
        lam = np.linalg.eigvalsh((choi + choi.conj().T) / 2).min(initial=0) if size else 0.0
        if lam < -TOL_PSD:
            problems.append(f"Choi matrix is not positive semidefinite (min eigenvalue {lam:.3e})")
        if cls == "cptp":
            dev = np.abs(partial_trace_output(choi, in_dims, out_dims) - np.eye(_prod(in_dims)))
            if dev.max(initial=0) > tol:
                problems.append(
                    f"not trace preserving: Tr_out deviates from identity by {dev.max():.3e}"
                )
        return problems
    raise EvaluationError(f"unknown map class {cls!r}")
