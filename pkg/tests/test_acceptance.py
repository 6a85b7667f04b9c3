"""End-to-end acceptance criteria, one test each.

Every test records a PASS/FAIL line before asserting, so the summary at the
end of the run lists all ten even when one of them fails.
"""
import json
import time

import numpy as np

from causalkit.behaviors import (
    behavior_from_v_shape,
    behavior_nonsignalling,
    isotropic,
    lhv_feasible,
    lhv_threshold,
    pr_box,
    uniform,
)
from causalkit.causal import coarse_grain, diamond_structure, network_to_diagram
from causalkit.checkers import (
    Split,
    check_bang,
    check_nonsignalling,
    check_terminal_theory,
    theorem1_witness,
    theorem2_audit,
    unique_effect_check,
)
from causalkit.cli import run
from causalkit.diagram import BoxSignature, SystemLabel, box, par, seq, swap
from causalkit.dsl import parse, to_text
from causalkit.random_models import random_diamond, random_network, random_partition, random_theory
from causalkit.semantics import FINSTOCH, QUANTUM, Interpretation, evaluate, random_generator
from conftest import record
from helpers import FIXTURES, coarse_grain_gap, einsum_oracle, marginal_oracle, random_layered, vertex_oracle


def _merge(*interps):
    dims, bindings = {}, {}
    for i in interps:
        dims.update(i.dims)
        bindings.update(i.bindings)
    return Interpretation(interps[0].backend, dims, bindings)


def test_1_terminal_diamonds_finstoch():
    t0 = time.perf_counter()
    worst_res = worst_agree = worst_oracle = 0.0
    all_ns = True
    for seed in range(500):
        dn, interp = random_diamond(seed, dim_choices=(1, 2, 3))
        F = evaluate(network_to_diagram(dn), interp)
        sp = Split.of(dn.composite(), interp, dn.n_xa, dn.n_ya)
        rep = check_nonsignalling(F, sp, tol=1e-9)
        res = theorem1_witness(dn, interp, tol=1e-9)
        ab, ba, h, hp = marginal_oracle(F, *(int(np.prod(x)) for x in (sp.xa, sp.xb, sp.ya, sp.yb)))
        all_ns &= rep.nonsignalling and res.report.nonsignalling and ab and ba
        worst_res = max(worst_res, rep.residual, res.report.residual)
        worst_agree = max(worst_agree, res.agreement)
        worst_oracle = max(worst_oracle, np.abs(res.h - h).max(), np.abs(res.h_prime - hp).max())
    elapsed = time.perf_counter() - t0
    ok = all_ns and worst_res <= 1e-9 and worst_agree <= 1e-9 and worst_oracle <= 1e-9 and elapsed < 30
    record(1, "terminal finstoch diamonds are non-signalling", ok,
           f"500 cases, residual {worst_res:.1e}, agreement {worst_agree:.1e}, {elapsed:.1f}s")
    assert all_ns
    assert worst_res <= 1e-9 and worst_agree <= 1e-9 and worst_oracle <= 1e-9
    assert elapsed < 30


def test_2_terminal_diamonds_quantum():
    t0 = time.perf_counter()
    worst = worst_agree = 0.0
    all_ns = True
    for seed in range(100):
        dn, interp = random_diamond(seed, backend=QUANTUM, fixed_dim=2)
        res = theorem1_witness(dn, interp, tol=1e-7)
        all_ns &= res.report.nonsignalling
        worst = max(worst, res.report.residual)
        worst_agree = max(worst_agree, res.agreement)
    elapsed = time.perf_counter() - t0
    ok = all_ns and worst <= 1e-7 and worst_agree <= 1e-7 and elapsed < 60
    record(2, "terminal quantum diamonds are non-signalling", ok,
           f"100 cases at d=2, residual {worst:.1e}, {elapsed:.1f}s")
    assert all_ns and worst <= 1e-7 and worst_agree <= 1e-7
    assert elapsed < 60


def test_3_converse_round_trip():
    failures = []
    half_scalars = []
    for seed in range(200):
        sub = seed % 2 == 1
        scale = 0.5 if seed % 4 == 1 else None
        gens, interp, offender = random_theory(seed, substochastic=sub, uniform_scale=scale)
        audit = theorem2_audit(interp, gens)
        bang = check_bang(interp, gens)
        terminal = check_terminal_theory(interp, gens).is_terminal
        if bang.holds and all(e.report.nonsignalling for e in audit.embeddings) and not terminal:
            failures.append((seed, "implication"))
        if not audit.consistent:
            failures.append((seed, "audit"))
        if sub:
            if bang.holds or abs(bang.scalar - 1) <= 1e-9:
                failures.append((seed, "not flagged"))
            if scale is not None:
                half_scalars.append(bang.scalar)
                if abs(bang.scalar - 0.5) > 1e-12:
                    failures.append((seed, f"scalar {bang.scalar!r}"))
        elif not (bang.holds and terminal):
            failures.append((seed, "stochastic theory rejected"))
    ok = not failures and len(half_scalars) == 50
    record(3, "certainty plus non-signalling implies terminal", ok,
           f"200 theories, 100 substochastic flagged, {len(half_scalars)} scalars at 0.5"
           if ok else f"failures {failures[:5]}")
    assert not failures
    assert len(half_scalars) == 50


def test_4_swap_signals():
    worst = []
    for d in (2, 3, 4):
        A, B = SystemLabel("A"), SystemLabel("B")
        interp = Interpretation(FINSTOCH, {"A": d, "B": d})
        sw = swap(A, B)
        rep = check_nonsignalling(evaluate(sw, interp), Split.of(sw, interp, 1, 1))
        worst.append((d, not rep.a_to_b_blocked and not rep.b_to_a_blocked
                      and min(rep.residual_ab, rep.residual_ba) > rep.tol))
    ok = all(v for _, v in worst)
    record(4, "swap signals both ways", ok, "d = 2, 3, 4")
    assert ok


def test_5_unique_effect():
    results = []
    X = SystemLabel("X")
    e = BoxSignature("e", (X,), ())
    for n in range(1, 9):
        m = random_generator(FINSTOCH, [n], [], "stochastic", seed=n)
        exact = np.array_equal(m, np.ones((1, n)))
        interp = Interpretation(FINSTOCH, {"X": n}, {"e": m})
        holds = unique_effect_check(interp, [e]) == (True, None)
        ok_half, offender = unique_effect_check(interp.bind(e=0.5 * m), [e])
        results.append(exact and holds and not ok_half and offender == e)
    ok = all(results)
    record(5, "the discard is the unique effect", ok, "n = 1..8 plus a 0.5-scaled effect")
    assert ok


def test_6_lhv():
    t0 = time.perf_counter()
    pr = pr_box()
    pr_ok = behavior_nonsignalling(pr)[0] and not lhv_feasible(pr).feasible
    uni_ok = lhv_feasible(uniform()).feasible
    threshold = lhv_threshold(isotropic)
    elapsed = time.perf_counter() - t0
    oracle = [vertex_oracle(isotropic(v).table) for v in (0.0, 0.5 - 1e-3, 0.5 + 1e-3, 1.0)]
    oracle_ok = [f for f, _ in oracle] == [True, True, False, False] and oracle[0][1] == 16
    agree = all(lhv_feasible(isotropic(v)).feasible == vertex_oracle(isotropic(v).table)[0]
                for v in np.linspace(0, 1, 21))
    ok = pr_ok and uni_ok and abs(threshold - 0.5) <= 1e-6 and oracle_ok and agree and elapsed < 5
    record(6, "local hidden variable checks", ok, f"threshold {threshold:.7f}, {elapsed:.2f}s")
    assert pr_ok and uni_ok and oracle_ok and agree
    assert abs(threshold - 0.5) <= 1e-6
    assert elapsed < 5


def test_7_v_shape_behaviours():
    worst = 0.0
    all_ok = True
    for seed in range(200):
        rng = np.random.default_rng(seed)
        na, nb, nx, ny, nl = (int(v) for v in rng.integers(1, 5, 5))
        h_bot = rng.dirichlet(np.ones(nl))
        h_a = rng.dirichlet(np.ones(na), size=(nx, nl)).transpose(2, 0, 1)
        h_b = rng.dirichlet(np.ones(nb), size=(ny, nl)).transpose(2, 0, 1)
        ok, residual = behavior_nonsignalling(behavior_from_v_shape(h_bot, h_a, h_b), 1e-9)
        all_ok &= ok
        worst = max(worst, residual)
    record(7, "V-shape behaviours are non-signalling", all_ok, f"200 cases, residual {worst:.1e}")
    assert all_ok


def test_8_functoriality_and_order():
    worst = 0.0
    for seed in range(150):
        x, ix = random_layered(seed, prefix="x")
        y, iy = random_layered(seed + 10_000, start=x.outputs, prefix="y")
        z, iz = random_layered(seed + 20_000, prefix="z")
        w, iw = random_layered(seed + 30_000, start=z.outputs, prefix="w")
        interp = _merge(ix, iy, iz, iw)
        ex, ey, ez, ew = (evaluate(d, interp) for d in (x, y, z, w))
        worst = max(
            worst,
            np.abs(evaluate(seq(x, y), interp) - ey @ ex).max(),
            np.abs(evaluate(par(x, z), interp) - np.kron(ex, ez)).max(),
            np.abs(evaluate(seq(par(x, z), par(y, w)), interp)
                   - evaluate(par(seq(x, y), seq(z, w)), interp)).max(),
        )
        d, di = random_layered(seed, n_layers=7)
        fwd = evaluate(d, di)
        worst = max(worst, np.abs(fwd - evaluate(d, di, reverse_ties=True)).max(),
                    np.abs(fwd - einsum_oracle(d, di)).max())
    A, B = SystemLabel("A"), SystemLabel("B")
    f, g = BoxSignature("f", (A,), (B,)), BoxSignature("g", (B,), (A,))
    for seed in range(20):
        qi = Interpretation(QUANTUM, {"A": 2, "B": 3}, {
            "f": random_generator(QUANTUM, [2], [3], "cptp", seed),
            "g": random_generator(QUANTUM, [3], [2], "cptp", seed + 100)})
        ef, eg = evaluate(box(f), qi), evaluate(box(g), qi)
        worst = max(worst, np.abs(evaluate(seq(box(f), box(g)), qi) - eg @ ef).max(),
                    np.abs(evaluate(par(box(f), box(g)), qi) - np.kron(ef, eg)).max())
    ok = worst <= 1e-12
    record(8, "functoriality and evaluation order", ok, f"max gap {worst:.1e}")
    assert ok


def test_9_coarse_graining():
    worst = max(coarse_grain_gap(*random_network(s), random_partition(random_network(s)[0], s))
                for s in range(100))
    cs = parse((FIXTURES / "two_chain.proc").read_text()).structures["T"]
    q = coarse_grain(cs, {"b1": "bot", "b2": "bot", "a": "a", "b": "b", "t1": "top", "t2": "top"})
    exact = q == diamond_structure() and set(q.hasse_edges) == set(diamond_structure().hasse_edges)
    ok = worst <= 1e-12 and exact
    record(9, "coarse-graining preserves semantics", ok, f"100 networks, max gap {worst:.1e}")
    assert worst <= 1e-12 and exact


def test_10_dsl_and_cli(monkeypatch):
    problems = []
    corpus = sorted(FIXTURES.glob("*.proc"))
    for path in corpus:
        prog = parse(path.read_bytes().decode("utf-8"))
        text = to_text(prog)
        again = parse(text)
        if again.source != prog.source or to_text(again) != text:
            problems.append(f"round trip {path.name}")
        for name, m in prog.bindings.items():
            a = m.choi if prog.backend == QUANTUM else m
            b = again.bindings[name].choi if prog.backend == QUANTUM else again.bindings[name]
            if not np.array_equal(a, b):
                problems.append(f"binding {path.name}:{name}")
    monkeypatch.chdir(FIXTURES)
    monkeypatch.delenv("CAUSALKIT_TOL", raising=False)
    matrix = json.loads((FIXTURES / "exit_matrix.json").read_text())
    for row in matrix:
        first = run(row["args"] + ["--format", "json"])
        second = run(row["args"] + ["--format", "json"])
        if first.exit_code != row["exit"]:
            problems.append(f"exit {' '.join(row['args'])}: {first.exit_code} != {row['exit']}")
        if first.render() != second.render():
            problems.append(f"nondeterministic {' '.join(row['args'])}")
    ok = not problems and len(corpus) == 20
    record(10, "DSL round trip and CLI determinism", ok,
           f"{len(corpus)} files, {len(matrix)} exit cases" if ok else "; ".join(problems[:5]))
    assert not problems
