"""Terminality, non-signalling and the certainty condition.

All checks work on evaluated matrices, so they apply to both backends.
Non-signalling is decided by least squares against the known right factor
``R = discard (x) id``: since ``R R^T`` is a positive multiple of the
identity, the best witness has the closed form ``h = L R^T / c``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .causal import DiamondNetwork, network_to_diagram
from .diagram import (
    BoxSignature,
    Diagram,
    DiagramError,
    SystemLabel,
    box,
    discard_all,
    identity,
    par,
    par_all,
    seq,
    seq_all,
)
from .semantics import (
    FINSTOCH,
    QUANTUM,
    Interpretation,
    _prod,
    discard_vector,
    evaluate,
    wire_dims,
)


class CheckError(ValueError):
    pass


class NotTerminalError(CheckError):
    pass


def _maxabs(m) -> float:
    m = np.asarray(m)
    return float(np.abs(m).max()) if m.size else 0.0


def _tol(tol, backend) -> float:
    if tol is not None:
        return float(tol)
    return 1e-9 if backend == FINSTOCH else 1e-7


# --------------------------------------------------------------------------
# terminality
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TerminalityReport:
    is_terminal: bool
    worst_box: str | None
    residual: float
    tol: float


def _as_diagram(f) -> Diagram:
    return box(f) if isinstance(f, BoxSignature) else f


def _name(d: Diagram) -> str:
    if len(d.boxes) == 1:
        return d.boxes[0].name
    return "<diagram>"


def check_terminal_process(f, interp: Interpretation, tol: float | None = None, name=None):
    """Compare ``discard o f`` with discarding ``f``'s inputs directly."""
    tol = _tol(tol, interp.backend)
    d = _as_diagram(f)
    lhs = evaluate(seq(d, discard_all(d.outputs)), interp)
    rhs = evaluate(discard_all(d.inputs), interp)
    residual = _maxabs(lhs - rhs)
    return TerminalityReport(residual <= tol, name or _name(d), residual, tol)


def check_terminal_theory(interp: Interpretation, generators: Iterable, tol: float | None = None):
    """Terminal iff every generator is; the worst offender is named."""
    tol = _tol(tol, interp.backend)
    worst = TerminalityReport(True, None, 0.0, tol)
    for g in generators:
        rep = check_terminal_process(g, interp, tol)
        if worst.worst_box is None or rep.residual > worst.residual:
            worst = rep
    return TerminalityReport(worst.residual <= tol, worst.worst_box, worst.residual, tol)


def unique_effect_check(interp: Interpretation, candidates: Sequence, tol: float | None = None):
    """Return ``(True, None)`` when every candidate effect is the discard,
    otherwise ``(False, offender)``."""
    tol = _tol(tol, interp.backend)
    for c in candidates:
        d = _as_diagram(c)
        if d.outputs:
            raise CheckError(
                f"candidate {_name(d)} has outputs {[str(l) for l in d.outputs]}; effects have none"
            )
        value = evaluate(d, interp)
        if _maxabs(value - interp.discard_vector(d.inputs).reshape(1, -1)) > tol:
            return False, c
    return True, None


# --------------------------------------------------------------------------
# non-signalling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Split:
    """Physical dimensions of the four parties' ports of a bipartite map
    ``X_a + X_b -> Y_a + Y_b``."""

    xa: tuple[int, ...] = ()
    xb: tuple[int, ...] = ()
    ya: tuple[int, ...] = ()
    yb: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("xa", "xb", "ya", "yb"):
            object.__setattr__(self, name, tuple(int(d) for d in getattr(self, name)))

    @classmethod
    def of(cls, d: Diagram, interp: Interpretation, n_xa: int, n_ya: int) -> "Split":
        dims_in = interp.phys_dims(d.inputs)
        dims_out = interp.phys_dims(d.outputs)
        return cls(dims_in[:n_xa], dims_in[n_xa:], dims_out[:n_ya], dims_out[n_ya:])


@dataclass(frozen=True)
class NonSigReport:
    """``a_to_b_blocked``: Bob's view ``(discard_{Y_a} (x) id) F`` factors as
    ``h (discard_{X_a} (x) id)``; ``b_to_a_blocked`` is the mirror with ``h'``."""

    a_to_b_blocked: bool
    b_to_a_blocked: bool
    residual_ab: float
    residual_ba: float
    witness_h: np.ndarray | None
    witness_h_prime: np.ndarray | None
    tol: float
    effect_a: np.ndarray | None = None
    effect_b: np.ndarray | None = None

    @property
    def nonsignalling(self) -> bool:
        return self.a_to_b_blocked and self.b_to_a_blocked

    @property
    def residual(self) -> float:
        return max(self.residual_ab, self.residual_ba)


def _views(f, split: Split, backend: str):
    F = np.asarray(f)
    wxa, wxb = _prod(wire_dims(split.xa, backend)), _prod(wire_dims(split.xb, backend))
    wya, wyb = _prod(wire_dims(split.ya, backend)), _prod(wire_dims(split.yb, backend))
    if F.shape != (wya * wyb, wxa * wxb):
        raise CheckError(
            f"map of shape {F.shape} does not factor as ({wya}*{wyb}, {wxa}*{wxb})"
        )
    return F, (wxa, wxb, wya, wyb)


def _least_squares(L, R):
    c = float(np.real(R[0] @ R[0].conj())) if R.shape[0] else 1.0
    # R R^T = c * I for R = discard (x) id
    h = (L @ R.conj().T) / c
    return h, _maxabs(h @ R - L)


def _direction_ab(F, split, backend, dims, effect=None):
    wxa, wxb, wya, wyb = dims
    e = discard_vector(split.ya, backend) if effect is None else np.asarray(effect).reshape(-1)
    L = np.kron(e.reshape(1, -1), np.eye(wyb)) @ F
    R = np.kron(discard_vector(split.xa, backend).reshape(1, -1), np.eye(wxb))
    return _least_squares(L, R)


def _direction_ba(F, split, backend, dims, effect=None):
    wxa, wxb, wya, wyb = dims
    e = discard_vector(split.yb, backend) if effect is None else np.asarray(effect).reshape(-1)
    L = np.kron(np.eye(wya), e.reshape(1, -1)) @ F
    R = np.kron(np.eye(wxa), discard_vector(split.xb, backend).reshape(1, -1))
    return _least_squares(L, R)


def check_nonsignalling(f, split: Split, backend: str = FINSTOCH, tol: float | None = None):
    """Decide whether the bipartite map ``f`` admits witnesses ``h`` and ``h'``."""
    tol = _tol(tol, backend)
    F, dims = _views(f, split, backend)
    h, r_ab = _direction_ab(F, split, backend, dims)
    hp, r_ba = _direction_ba(F, split, backend, dims)
    ab, ba = r_ab <= tol, r_ba <= tol
    return NonSigReport(ab, ba, r_ab, r_ba, h if ab else None, hp if ba else None, tol)


def check_weak_nonsignalling(
    f,
    split: Split,
    effect_pool: Sequence,
    backend: str = FINSTOCH,
    tol: float | None = None,
    effect_pool_b: Sequence | None = None,
):
    """Like :func:`check_nonsignalling` but the effect applied to the other
    party's output may be any member of the pool.  The best-residual choice
    (first on ties) is reported."""
    tol = _tol(tol, backend)
    if not len(effect_pool):
        raise CheckError("effect pool is empty")
    F, dims = _views(f, split, backend)
    pool_a = list(effect_pool)
    pool_b = list(effect_pool if effect_pool_b is None else effect_pool_b)
    for e in pool_a:
        if np.asarray(e).size != dims[2]:
            raise CheckError(f"effect of size {np.asarray(e).size} does not fit Y_a (size {dims[2]})")
    for e in pool_b:
        if np.asarray(e).size != dims[3]:
            raise CheckError(f"effect of size {np.asarray(e).size} does not fit Y_b (size {dims[3]})")

    def best(direction, pool):
        choice = None
        for e in pool:
            h, r = direction(F, split, backend, dims, e)
            if choice is None or r < choice[1]:
                choice = (h, r, np.asarray(e))
        return choice

    h, r_ab, ea = best(_direction_ab, pool_a)
    hp, r_ba, eb = best(_direction_ba, pool_b)
    ab, ba = r_ab <= tol, r_ba <= tol
    return NonSigReport(
        ab, ba, r_ab, r_ba, h if ab else None, hp if ba else None, tol, ea, eb
    )


# --------------------------------------------------------------------------
# the constructive direction: terminal diamonds are non-signalling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Theorem1Result:
    report: NonSigReport
    h: np.ndarray
    h_prime: np.ndarray
    h_diagram: Diagram
    h_prime_diagram: Diagram
    least_squares: NonSigReport
    agreement: float  # max-norm gap between constructed and least-squares witnesses


def witness_diagrams(dn: DiamondNetwork) -> tuple[Diagram, Diagram]:
    """Diagrams for ``h: X_b -> Y_b`` and ``h': X_a -> Y_a`` obtained by
    discarding the top box and then the other party's box."""
    xa, xb, ya, yb = dn.x_a, dn.x_b, dn.y_a, dn.y_b
    l, r, lu, ru = dn.left, dn.right, dn.left_up, dn.right_up
    right_marginal = seq(dn.f_bot, par(discard_all(l), identity(*r)))
    h = seq_all(
        par(identity(*xb), right_marginal),
        dn.f_b,
        par(identity(*yb), discard_all(ru)),
    )
    left_marginal = seq(dn.f_bot, par(identity(*l), discard_all(r)))
    hp = seq_all(
        par(identity(*xa), left_marginal),
        dn.f_a,
        par(identity(*ya), discard_all(lu)),
    )
    return h, hp


def _residuals_against(F, split, backend, h, hp):
    dims = _views(F, split, backend)[1]
    wxa, wxb, wya, wyb = dims
    L = np.kron(discard_vector(split.ya, backend).reshape(1, -1), np.eye(wyb)) @ F
    R = np.kron(discard_vector(split.xa, backend).reshape(1, -1), np.eye(wxb))
    Lp = np.kron(np.eye(wya), discard_vector(split.yb, backend).reshape(1, -1)) @ F
    Rp = np.kron(np.eye(wxa), discard_vector(split.xb, backend).reshape(1, -1))
    return _maxabs(h @ R - L), _maxabs(hp @ Rp - Lp)


def theorem1_witness(dn: DiamondNetwork, interp: Interpretation, tol: float | None = None):
    """Build ``h`` and ``h'`` by the terminality rewrites and verify both
    non-signalling equations on the flattened network."""
    tol = _tol(tol, interp.backend)
    for name, d in dn.boxes():
        rep = check_terminal_process(d, interp, tol, name=name)
        if not rep.is_terminal:
            raise NotTerminalError(
                f"theory not terminal at box {name} (residual {rep.residual:.3e})"
            )
    h_d, hp_d = witness_diagrams(dn)
    h, hp = evaluate(h_d, interp), evaluate(hp_d, interp)
    composite = network_to_diagram(dn.network())
    F = evaluate(composite, interp)
    split = Split.of(composite, interp, dn.n_xa, dn.n_ya)
    r_ab, r_ba = _residuals_against(F, split, interp.backend, h, hp)
    ab, ba = r_ab <= tol, r_ba <= tol
    report = NonSigReport(ab, ba, r_ab, r_ba, h if ab else None, hp if ba else None, tol)
    ls = check_nonsignalling(F, split, interp.backend, tol)
    h_ls, _ = _direction_ab(F, split, interp.backend, _views(F, split, interp.backend)[1])
    hp_ls, _ = _direction_ba(F, split, interp.backend, _views(F, split, interp.backend)[1])
    agreement = max(_maxabs(h - h_ls), _maxabs(hp - hp_ls))
    return Theorem1Result(report, h, hp, h_d, hp_d, ls, agreement)


# --------------------------------------------------------------------------
# certainty: the only closed diagram is the empty one
# --------------------------------------------------------------------------

NORMALIZATION = "normalization_and_terminality"
ENUMERATION = "closed_diagram_enumeration"


@dataclass(frozen=True)
class BangReport:
    holds: bool
    method: str
    counterexample: Diagram | None = None
    scalar: complex | float | None = None
    diagrams_checked: int = 0


def _probe_bindings(label: SystemLabel, interp: Interpretation) -> list:
    """Normalised auxiliary states on ``label`` whose span covers every
    state: point masses (finstoch), or basis and superposition projectors
    (quantum)."""
    d = interp.dim(label)
    if interp.backend == FINSTOCH:
        return [np.eye(d)[:, [i]] for i in range(d)]
    from .semantics import QuantumChannel

    vecs = [np.eye(d)[i] for i in range(d)]
    for i, j in itertools.combinations(range(d), 2):
        vecs.append((np.eye(d)[i] + np.eye(d)[j]) / np.sqrt(2))
        vecs.append((np.eye(d)[i] + 1j * np.eye(d)[j]) / np.sqrt(2))
    return [QuantumChannel(np.outer(v, v.conj()), (), (d,)) for v in vecs]


def _scalar(d: Diagram, interp: Interpretation):
    v = evaluate(d, interp)[0, 0]
    return float(np.real(v))


def _feeds(labels, states, interp, limit=256):
    """Candidate state diagrams for ``labels`` with the interpretation that
    binds them: generator states first, then probe states."""
    by_label = {}
    for s in states:
        if len(s.outputs) == 1:
            by_label.setdefault(s.outputs[0], s)
    if all(l in by_label for l in labels):
        yield par_all(*[box(by_label[l]) for l in labels]), interp
    options = []
    for k, label in enumerate(labels):
        opts = [
            (BoxSignature(f"probe_{label.name}_{k}_{i}", (), (label,)), m)
            for i, m in enumerate(_probe_bindings(label, interp))
        ]
        options.append(opts)
    for count, combo in enumerate(itertools.product(*options)):
        if count >= limit:
            return
        extra = {sig.name: m for sig, m in combo}
        yield par_all(*[box(sig) for sig, _ in combo]), interp.bind(**extra)


def check_bang(
    interp: Interpretation,
    generators: Sequence[BoxSignature],
    max_size: int = 3,
    tol: float | None = None,
    method: str = NORMALIZATION,
    max_diagrams: int = 20000,
):
    """Check that every closed diagram equals the empty one (scalar 1).

    ``normalization_and_terminality`` certifies the condition through
    normalised generator states plus terminality.  On failure it returns a
    closed counterexample: an unnormalised state followed by discarding, or
    a non-terminal generator fed by normalised states and discarded.
    ``closed_diagram_enumeration`` wires up every closed diagram with at
    most ``max_size`` generator nodes (dangling outputs discarded) and
    checks each scalar.
    """
    tol = _tol(tol, interp.backend)
    generators = list(generators)
    if method == NORMALIZATION:
        states = [g for g in generators if not g.inputs]
        for s in states:
            closed = seq(box(s), discard_all(s.outputs))
            value = _scalar(closed, interp)
            if abs(value - 1) > tol:
                return BangReport(False, method, closed, value, 1)
        reports = [(check_terminal_process(g, interp, tol), g) for g in generators]
        if all(r.is_terminal for r, _ in reports):
            return BangReport(True, method, None, None, len(states))
        checked = 0
        for _, g in sorted(reports, key=lambda t: -t[0].residual):
            for feed, extended in _feeds(g.inputs, states, interp):
                closed = seq_all(feed, box(g), discard_all(g.outputs))
                value = _scalar(closed, extended)
                checked += 1
                if abs(value - 1) > tol:
                    return BangReport(False, method, closed, value, checked)
        raise CheckError("theory is not terminal but no closed counterexample was found")
    if method == ENUMERATION:
        count = 0
        for closed in enumerate_closed_diagrams(generators, max_size):
            count += 1
            if count > max_diagrams:
                break
            value = _scalar(closed, interp)
            if abs(value - 1) > tol:
                return BangReport(False, method, closed, value, count)
        return BangReport(True, method, None, None, count)
    raise CheckError(f"unknown method {method!r}")


def enumerate_closed_diagrams(generators: Sequence[BoxSignature], max_size: int):
    """Yield every closed diagram built from 1..max_size generator nodes in
    which each node input is fed by another node's output (acyclically) and
    every unused output is discarded."""
    from .diagram import BOUNDARY, Port, Wire, discard as discard_diagram

    gens = [g for g in generators]
    seen = set()
    for size in range(1, max_size + 1):
        for combo in itertools.combinations_with_replacement(range(len(gens)), size):
            nodes = [gens[i] for i in combo]
            targets = [(n, p) for n, g in enumerate(nodes) for p in range(len(g.inputs))]
            sources = [(n, q) for n, g in enumerate(nodes) for q in range(len(g.outputs))]
            options = []
            for n, p in targets:
                label = nodes[n].inputs[p]
                options.append(
                    [s for s in sources if s[0] != n and nodes[s[0]].outputs[s[1]] == label]
                )
            for choice in itertools.product(*options):
                if len(set(choice)) != len(choice):
                    continue
                edges = {(s[0], t[0]) for s, t in zip(choice, targets)}
                if _has_cycle(size, edges):
                    continue
                used = set(choice)
                boxes = list(nodes)
                wires = [Wire(Port(*s), Port(*t)) for s, t in zip(choice, targets)]
                for s in sources:
                    if s not in used:
                        label = nodes[s[0]].outputs[s[1]]
                        boxes.append(discard_diagram(label).boxes[0])
                        wires.append(Wire(Port(*s), Port(len(boxes) - 1, 0)))
                d = Diagram((), (), boxes, wires)
                key = (tuple(b.name for b in boxes), frozenset(wires))
                if key in seen:
                    continue
                seen.add(key)
                yield d


def _has_cycle(n, edges) -> bool:
    from .diagram import _find_cycle

    return _find_cycle(n, edges) is not None


# --------------------------------------------------------------------------
# the converse direction, audited
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Embedding:
    """A generator placed as party B with party A trivial."""

    generator: str
    report: NonSigReport
    scalar: complex | float | None  # the witness h' (a scalar) when it exists
    terminal: bool


@dataclass(frozen=True)
class Theorem2Audit:
    consistent: bool
    bang: BangReport
    terminality: TerminalityReport
    embeddings: tuple[Embedding, ...]
    notes: tuple[str, ...] = field(default_factory=tuple)


def trivial_party_embedding(g: BoxSignature, interp: Interpretation, tol: float | None = None):
    tol = _tol(tol, interp.backend)
    d = box(g)
    F = evaluate(d, interp)
    split = Split((), interp.phys_dims(g.inputs), (), interp.phys_dims(g.outputs))
    report = check_nonsignalling(F, split, interp.backend, tol)
    scalar = None
    if report.witness_h_prime is not None:
        s = report.witness_h_prime[0, 0]
        scalar = float(np.real(s)) if abs(np.imag(s)) <= tol else complex(s)
    term = check_terminal_process(d, interp, tol)
    return Embedding(g.name, report, scalar, term.is_terminal)


def theorem2_audit(interp: Interpretation, generators: Sequence[BoxSignature], tol=None):
    """Audit "non-signalling + certainty implies terminal" on a theory.

    Each generator is embedded with a trivial party A; its non-signalling
    witness ``h'`` is then a scalar.  A non-signalling but non-terminal
    generator is only possible when that scalar differs from 1, i.e. when
    certainty fails; such generators are reported in ``notes``.  The audit
    is inconsistent only if certainty holds, every embedding is
    non-signalling, and yet the theory is not terminal.
    """
    tol = _tol(tol, interp.backend)
    generators = list(generators)
    bang = check_bang(interp, generators, tol=tol)
    term = check_terminal_theory(interp, generators, tol)
    embeddings = tuple(trivial_party_embedding(g, interp, tol) for g in generators)
    notes = []
    for e in embeddings:
        if e.report.nonsignalling and not e.terminal:
            notes.append(f"(!) violated, scalar {e.scalar:.12g} at {e.generator}")
    all_ns = all(e.report.nonsignalling for e in embeddings)
    consistent = not (bang.holds and all_ns and not term.is_terminal)
    return Theorem2Audit(consistent, bang, term, embeddings, tuple(notes))
