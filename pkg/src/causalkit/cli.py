"""Command-line front end: ``python -m causalkit <command> ...``.

Every command produces a :class:`CommandResult`.  Exit codes: 0 when the
verdict holds, 1 when it fails, 2 for usage, file and parse errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .behaviors import (
    BehaviorError,
    behavior_nonsignalling,
    lhv_feasible,
    named_behavior,
    read_behavior,
)
from .causal import CausalProcessNetwork, NetworkError, diamond_normal_form, network_to_diagram
from .checkers import (
    ENUMERATION,
    NORMALIZATION,
    CheckError,
    NotTerminalError,
    Split,
    check_bang,
    check_nonsignalling,
    check_terminal_theory,
    theorem1_witness,
    theorem2_audit,
)
from .diagram import Diagram, DiagramError, box
from .dsl import ParseError, Program, format_diagram, parse, to_text
from .semantics import (
    FINSTOCH,
    QUANTUM,
    EvaluationError,
    Interpretation,
    evaluate,
    random_generator,
    transfer_to_choi,
    validate,
)

COMMANDS = (
    "parse",
    "eval",
    "check-terminal",
    "check-nonsig",
    "diamond-witness",
    "bang",
    "audit-theorem2",
    "lhv",
    "behavior-ns",
)
TOL_ENV = "CAUSALKIT_TOL"


class UsageError(Exception):
    pass


@dataclass
class CommandResult:
    command: str
    verdict: object
    residual: float = 0.0
    witness: dict | None = None
    diagnostics: list = field(default_factory=list)
    exit_code: int = 0
    details: dict = field(default_factory=dict)
    format: str = field(default="text", compare=False)

    def render(self) -> str:
        return self.to_json() + "\n" if self.format == "json" else self.to_text()

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "verdict": self.verdict,
            "residual": float(self.residual),
            "witness": self.witness,
            "diagnostics": list(self.diagnostics),
            "exit_code": self.exit_code,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_text(self) -> str:
        verdict = self.verdict
        if isinstance(verdict, bool):
            verdict = str(verdict).lower()
        lines = [
            f"command: {self.command}",
            f"verdict: {verdict}",
            f"residual: {self.residual:.2e}",
        ]
        for key in sorted(self.details):
            value = self.details[key]
            if isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, float):
                value = f"{value:.2e}"
            elif isinstance(value, (list, dict)):
                value = json.dumps(value, sort_keys=True)
            elif isinstance(value, str) and "\n" in value:
                value = "\n  " + value.rstrip("\n").replace("\n", "\n  ")
            lines.append(f"{key}: {value}")
        if self.witness is not None:
            w = self.witness
            lines.append(f"witness ({w['repr']}, {w['rows']}x{w['cols']}):")
            lines.append(_matrix_text(w))
        for d in self.diagnostics:
            lines.append(f"diagnostic: {d}")
        lines.append(f"exit: {self.exit_code}")
        return "\n".join(lines) + "\n"


def _matrix_text(w) -> str:
    rows, cols = w["rows"], w["cols"]
    re_ = np.array(w["data"], dtype=float).reshape(rows, cols)
    im = np.array(w.get("imag", [0.0] * (rows * cols)), dtype=float).reshape(rows, cols)
    out = []
    for i in range(rows):
        cells = []
        for j in range(cols):
            if w.get("imag") is not None:
                cells.append(f"{re_[i, j]:.6g}{im[i, j]:+.6g}i")
            else:
                cells.append(f"{re_[i, j]:.6g}")
        out.append("  [" + ", ".join(cells) + "]")
    return "\n".join(out)


def matrix_payload(m, repr_: str, in_dims=(), out_dims=()) -> dict:
    """Row-major matrix with explicit shape; imaginary parts only if present."""
    m = np.asarray(m)
    rows, cols = m.shape
    payload = {
        "rows": int(rows),
        "cols": int(cols),
        "repr": repr_,
        "in_dims": [int(d) for d in in_dims],
        "out_dims": [int(d) for d in out_dims],
        "data": [float(v) for v in np.real(m).reshape(-1)],
    }
    if np.iscomplexobj(m) and np.any(np.imag(m) != 0):
        payload["imag"] = [float(v) for v in np.imag(m).reshape(-1)]
    return payload


def _quantum_payload(transfer, in_dims, out_dims, repr_: str) -> dict:
    if repr_ == "choi":
        return matrix_payload(transfer_to_choi(transfer, in_dims, out_dims), "choi", in_dims, out_dims)
    return matrix_payload(transfer, "transfer", in_dims, out_dims)


def _witness(m, interp: Interpretation, in_dims, out_dims, repr_: str) -> dict:
    if interp.backend == QUANTUM:
        return _quantum_payload(m, in_dims, out_dims, repr_)
    return matrix_payload(m, "matrix", in_dims, out_dims)


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed {v} outside 0..2^64-1")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0 or not np.isfinite(v):
        raise argparse.ArgumentTypeError(f"tolerance must be a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--file", help="input .proc or behaviour file")
    common.add_argument("--tol", type=_positive_float, help=f"tolerance (default per backend, or ${TOL_ENV})")
    common.add_argument("--seed", type=_seed, default=0, help="seed for binding declared-only boxes")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--backend", choices=(FINSTOCH, QUANTUM), help="backend for declared-only boxes")
    common.add_argument("--repr", choices=("transfer", "choi"), default="transfer",
                        help="quantum witness representation")

    parser = _Parser(prog="causalkit", description="Process-theory causality checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", parents=[common], help="parse a .proc file and validate its bindings")
    p.add_argument("--print", dest="print_", action="store_true", help="include canonical text")

    p = sub.add_parser("eval", parents=[common], help="evaluate a diagram or network")
    p.add_argument("name")

    p = sub.add_parser("check-terminal", parents=[common], help="terminality of boxes or diagrams")
    p.add_argument("names", nargs="*")

    p = sub.add_parser("check-nonsig", parents=[common], help="non-signalling of a bipartite diagram")
    p.add_argument("name")
    p.add_argument("--a-in", type=int, help="number of leading inputs owned by party A")
    p.add_argument("--a-out", type=int, help="number of leading outputs owned by party A")

    p = sub.add_parser("diamond-witness", parents=[common], help="construct h, h' for a diamond network")
    p.add_argument("name")
    p.add_argument("--party-a", default="a", help="comma-separated nodes of party A")
    p.add_argument("--party-b", default="b", help="comma-separated nodes of party B")

    p = sub.add_parser("bang", parents=[common], help="certainty condition on the declared boxes")
    p.add_argument("--method", choices=(NORMALIZATION, ENUMERATION), default=NORMALIZATION)
    p.add_argument("--max-size", type=int, default=3)

    sub.add_parser("audit-theorem2", parents=[common], help="audit certainty + non-signalling vs terminality")

    for name, help_ in (("lhv", "local hidden variable feasibility"), ("behavior-ns", "behaviour non-signalling")):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("behavior", nargs="?", help="pr_box, uniform or isotropic(v) instead of --file")
    return parser


# --------------------------------------------------------------------------
# loading
# --------------------------------------------------------------------------


def _read(path) -> str:
    if path is None:
        raise UsageError("--file is required")
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def load_program(args) -> tuple[Program, Interpretation, list[str]]:
    """Parse ``--file`` and bind declared-only boxes with seeded random maps."""
    prog = parse(_read(args.file))
    backend = prog.backend
    if prog.bindings and args.backend and args.backend != backend:
        raise UsageError(f"--backend {args.backend} conflicts with the {backend} bindings in {args.file}")
    if not prog.bindings and args.backend:
        backend = args.backend
    cls = "stochastic" if backend == FINSTOCH else "cptp"
    bindings = dict(prog.bindings)
    notes = []
    for k, name in enumerate(prog.signature.boxes):
        if name in bindings:
            continue
        sig = prog.signature.boxes[name]
        bindings[name] = random_generator(
            backend,
            [prog.dims[l.name] for l in sig.inputs],
            [prog.dims[l.name] for l in sig.outputs],
            cls,
            seed=[args.seed, k],
        )
        notes.append(name)
    return prog, Interpretation(backend, prog.dims, bindings), notes


def _tol(args, interp: Interpretation | None = None) -> float:
    if args.tol is not None:
        return args.tol
    env = os.environ.get(TOL_ENV)
    if env:
        try:
            return _positive_float(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"{TOL_ENV}={env!r} is not a positive number") from None
    return interp.default_tol if interp is not None else 1e-9


def _entity(prog: Program, name: str) -> Diagram:
    if name in prog.diagrams:
        return prog.diagrams[name]
    if name in prog.networks:
        return network_to_diagram(prog.networks[name])
    if name in prog.signature.boxes:
        return box(prog.signature.boxes[name])
    raise UsageError(f"no diagram, network or box named {name!r}")


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def _result(command, ok: bool, residual=0.0, **kw) -> CommandResult:
    return CommandResult(command, bool(ok), float(residual), exit_code=0 if ok else 1, **kw)


def cmd_parse(args) -> CommandResult:
    prog = parse(_read(args.file))
    details = {
        "backend": prog.backend,
        "systems": sorted(prog.dims),
        "boxes": list(prog.signature.boxes),
        "unbound": prog.unbound,
        "diagrams": list(prog.diagrams),
        "posets": list(prog.structures),
        "networks": list(prog.networks),
    }
    if args.print_:
        details["text"] = to_text(prog)
    return _result("parse", not prog.diagnostics, diagnostics=list(prog.diagnostics), details=details)


def cmd_eval(args) -> CommandResult:
    prog, interp, seeded = load_program(args)
    d = _entity(prog, args.name)
    m = evaluate(d, interp)
    in_dims, out_dims = interp.phys_dims(d.inputs), interp.phys_dims(d.outputs)
    cls = "stochastic" if interp.backend == FINSTOCH else "cptp"
    if interp.backend == QUANTUM:
        from .semantics import QuantumChannel

        problems = validate(QuantumChannel.from_transfer(m, in_dims, out_dims), cls, tol=_tol(args, interp))
    else:
        problems = validate(m, cls, tol=_tol(args, interp))
    witness = _witness(m, interp, in_dims, out_dims, args.repr)
    details = {
        "backend": interp.backend,
        "inputs": [str(l) for l in d.inputs],
        "outputs": [str(l) for l in d.outputs],
        "class": cls,
        "seeded": seeded,
    }
    return _result("eval", not problems, witness=witness, diagnostics=problems, details=details)


def cmd_check_terminal(args) -> CommandResult:
    prog, interp, seeded = load_program(args)
    names = args.names or list(prog.signature.boxes)
    targets = [_entity(prog, n) for n in names]
    tol = _tol(args, interp)
    from .checkers import check_terminal_process

    reports = [check_terminal_process(d, interp, tol, name=n) for n, d in zip(names, targets)]
    worst = max(reports, key=lambda r: r.residual, default=None)
    ok = all(r.is_terminal for r in reports)
    details = {
        "backend": interp.backend,
        "tol": tol,
        "checked": names,
        "worst_box": worst.worst_box if worst else None,
        "seeded": seeded,
    }
    diags = [f"{r.worst_box} not terminal (residual {r.residual:.2e})" for r in reports if not r.is_terminal]
    return _result("check-terminal", ok, worst.residual if worst else 0.0, diagnostics=diags, details=details)


def cmd_check_nonsig(args) -> CommandResult:
    prog, interp, seeded = load_program(args)
    d = _entity(prog, args.name)
    n_xa = (len(d.inputs) + 1) // 2 if args.a_in is None else args.a_in
    n_ya = (len(d.outputs) + 1) // 2 if args.a_out is None else args.a_out
    if not 0 <= n_xa <= len(d.inputs) or not 0 <= n_ya <= len(d.outputs):
        raise UsageError(f"split ({n_xa}, {n_ya}) does not fit {len(d.inputs)} inputs and {len(d.outputs)} outputs")
    tol = _tol(args, interp)
    split = Split.of(d, interp, n_xa, n_ya)
    rep = check_nonsignalling(evaluate(d, interp), split, interp.backend, tol)
    witness = None
    details = {
        "backend": interp.backend,
        "tol": tol,
        "split": {"a_in": n_xa, "a_out": n_ya},
        "a_to_b_blocked": rep.a_to_b_blocked,
        "b_to_a_blocked": rep.b_to_a_blocked,
        "residual_ab": rep.residual_ab,
        "residual_ba": rep.residual_ba,
        "seeded": seeded,
    }
    if rep.witness_h is not None:
        witness = _witness(rep.witness_h, interp, split.xb, split.yb, args.repr)
    if rep.witness_h_prime is not None:
        details["witness_h_prime"] = _witness(rep.witness_h_prime, interp, split.xa, split.ya, args.repr)
    return _result("check-nonsig", rep.nonsignalling, rep.residual, witness=witness, details=details)


def cmd_diamond_witness(args) -> CommandResult:
    prog, interp, seeded = load_program(args)
    if args.name not in prog.networks:
        raise UsageError(f"no network named {args.name!r}")
    net: CausalProcessNetwork = prog.networks[args.name]
    party_a = [x for x in args.party_a.split(",") if x]
    party_b = [x for x in args.party_b.split(",") if x]
    dn = diamond_normal_form(net, party_a, party_b)
    tol = _tol(args, interp)
    details = {"backend": interp.backend, "tol": tol, "seeded": seeded}
    try:
        res = theorem1_witness(dn, interp, tol)
    except NotTerminalError as e:
        return _result("diamond-witness", False, diagnostics=[str(e)], details=details)
    rep = res.report
    split_xb, split_yb = interp.phys_dims(dn.x_b), interp.phys_dims(dn.y_b)
    split_xa, split_ya = interp.phys_dims(dn.x_a), interp.phys_dims(dn.y_a)
    details.update(
        {
            "residual_ab": rep.residual_ab,
            "residual_ba": rep.residual_ba,
            "agreement": res.agreement,
            "h_diagram": format_diagram(res.h_diagram),
            "h_prime_diagram": format_diagram(res.h_prime_diagram),
            "witness_h_prime": _witness(res.h_prime, interp, split_xa, split_ya, args.repr),
        }
    )
    witness = _witness(res.h, interp, split_xb, split_yb, args.repr)
    return _result("diamond-witness", rep.nonsignalling, rep.residual, witness=witness, details=details)


def cmd_bang(args) -> CommandResult:
    prog, interp, seeded = load_program(args)
    gens = list(prog.signature.boxes.values())
    tol = _tol(args, interp)
    rep = check_bang(interp, gens, max_size=args.max_size, tol=tol, method=args.method)
    details = {
        "backend": interp.backend,
        "tol": tol,
        "method": rep.method,
        "diagrams_checked": rep.diagrams_checked,
        "seeded": seeded,
    }
    residual = 0.0
    if not rep.holds:
        details["scalar"] = rep.scalar
        details["counterexample"] = format_diagram(rep.counterexample)
        residual = abs(rep.scalar - 1)
    return _result("bang", rep.holds, residual, details=details)


def cmd_audit(args) -> CommandResult:
    prog, interp, seeded = load_program(args)
    gens = list(prog.signature.boxes.values())
    tol = _tol(args, interp)
    audit = theorem2_audit(interp, gens, tol)
    details = {
        "backend": interp.backend,
        "tol": tol,
        "bang_holds": audit.bang.holds,
        "terminal": audit.terminality.is_terminal,
        "worst_box": audit.terminality.worst_box,
        "embeddings": [
            {"generator": e.generator, "nonsignalling": e.report.nonsignalling, "terminal": e.terminal}
            for e in audit.embeddings
        ],
        "seeded": seeded,
    }
    return _result(
        "audit-theorem2",
        audit.consistent,
        audit.terminality.residual,
        diagnostics=list(audit.notes),
        details=details,
    )


def _behavior(args):
    if args.behavior and args.file:
        raise UsageError("give either --file or a named behaviour, not both")
    if args.behavior:
        return named_behavior(args.behavior)
    try:
        if not args.file:
            raise UsageError("give --file or a named behaviour")
        return read_behavior(args.file)
    except OSError as e:
        raise UsageError(f"cannot read {args.file}: {e.strerror}") from None


def cmd_lhv(args) -> CommandResult:
    beh = _behavior(args)
    tol = _tol(args)
    cert = lhv_feasible(beh, tol)
    details = {"tol": tol, "sizes": list(beh.sizes), "strategies": len(cert.strategies)}
    witness = None
    if cert.feasible:
        support = [
            {"alice": list(s[0]), "bob": list(s[1]), "weight": float(w)}
            for s, w in zip(cert.strategies, cert.weights)
            if w > tol
        ]
        details["support"] = support
        witness = matrix_payload(cert.weights.reshape(1, -1), "weights")
    else:
        details["margin"] = cert.margin
        witness = matrix_payload(cert.farkas.reshape(1, -1), "farkas")
    return _result("lhv", cert.feasible, cert.residual, witness=witness, details=details)


def cmd_behavior_ns(args) -> CommandResult:
    beh = _behavior(args)
    tol = _tol(args)
    ok, residual = behavior_nonsignalling(beh, tol)
    return _result("behavior-ns", ok, residual, details={"tol": tol, "sizes": list(beh.sizes)})


HANDLERS = {
    "parse": cmd_parse,
    "eval": cmd_eval,
    "check-terminal": cmd_check_terminal,
    "check-nonsig": cmd_check_nonsig,
    "diamond-witness": cmd_diamond_witness,
    "bang": cmd_bang,
    "audit-theorem2": cmd_audit,
    "lhv": cmd_lhv,
    "behavior-ns": cmd_behavior_ns,
}


def _error(command, message, usage=False) -> CommandResult:
    details = {"usage": True} if usage else {}
    return CommandResult(command, False, 0.0, diagnostics=[message], exit_code=2, details=details)


def _requested_format(argv) -> str:
    argv = list(argv)
    for k, a in enumerate(argv):
        if a == "--format=json" or (a == "--format" and argv[k + 1 : k + 2] == ["json"]):
            return "json"
    return "text"


def run(argv) -> CommandResult:
    """Run one command without touching the process state."""
    try:
        args = build_parser().parse_args(list(argv))
    except UsageError as e:
        result = _error("usage", str(e), usage=True)
        result.format = _requested_format(argv)
        return result
    try:
        result = HANDLERS[args.command](args)
    except UsageError as e:
        result = _error(args.command, str(e), usage=True)
    except ParseError as e:
        result = _error(args.command, f"{args.file}:{e}")
    except (BehaviorError, DiagramError, NetworkError, EvaluationError, CheckError) as e:
        result = _error(args.command, str(e))
    result.format = args.format
    return result


def main(argv=None) -> int:
    result = run(sys.argv[1:] if argv is None else argv)
    if result.details.get("usage"):
        print(result.diagnostics[0], file=sys.stderr)
        return result.exit_code
    sys.stdout.write(result.render())
    if result.exit_code == 2:
        print(result.diagnostics[0], file=sys.stderr)
    return result.exit_code
