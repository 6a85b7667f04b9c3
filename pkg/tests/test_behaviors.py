import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalkit.behaviors import (
    Behavior,
    BehaviorError,
    behavior_from_map,
    behavior_from_v_shape,
    behavior_nonsignalling,
    deterministic_behavior,
    format_behavior,
    isotropic,
    lhv_feasible,
    lhv_threshold,
    named_behavior,
    parse_behavior,
    pr_box,
    read_behavior,
    uniform,
)
from causalkit.semantics import FINSTOCH, random_generator
from helpers import FIXTURES, vertex_oracle


def test_pr_box():
    pr = pr_box()
    assert behavior_nonsignalling(pr)[0]
    cert = lhv_feasible(pr)
    assert not cert.feasible
    assert len(cert.strategies) == 16
    assert vertex_oracle(pr.table) == (False, 16)
    # the certificate separates the PR box from every deterministic vertex
    for lam, mu in cert.strategies:
        assert np.sum(cert.farkas * deterministic_behavior(lam, mu, pr.sizes)) <= 1e-9
    assert np.sum(cert.farkas * pr.table) > 1e-9


def test_uniform_feasible():
    cert = lhv_feasible(uniform())
    assert cert.feasible
    assert abs(cert.weights.sum() - 1) <= 1e-9
    mix = sum(w * deterministic_behavior(l, m, (2, 2, 2, 2)) for w, (l, m) in zip(cert.weights, cert.strategies))
    assert np.abs(mix - uniform().table).max() <= 1e-9


@pytest.mark.parametrize("v", [0.0, 0.2, 0.45, 0.5, 0.55, 0.8, 1.0])
def test_isotropic_matches_oracle(v):
    assert lhv_feasible(isotropic(v)).feasible == vertex_oracle(isotropic(v).table)[0]


def test_isotropic_threshold():
    t = lhv_threshold(isotropic)
    assert abs(t - 0.5) <= 1e-6


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_behaviours_match_oracle(seed):
    rng = np.random.default_rng(seed)
    # mix a PR box with local noise at a random visibility
    v = rng.random()
    local = behavior_from_v_shape(
        rng.dirichlet(np.ones(3)),
        rng.dirichlet(np.ones(2), size=(2, 3)).transpose(2, 0, 1),
        rng.dirichlet(np.ones(2), size=(2, 3)).transpose(2, 0, 1),
    )
    t = v * pr_box().table + (1 - v) * local.table
    beh = Behavior(t)
    assert lhv_feasible(beh).feasible == vertex_oracle(beh.table)[0]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_v_shape_is_nonsignalling_and_local(seed):
    rng = np.random.default_rng(seed)
    na, nb, nx, ny, nl = (int(v) for v in rng.integers(1, 4, 5))
    h_bot = rng.dirichlet(np.ones(nl))
    h_a = rng.dirichlet(np.ones(na), size=(nx, nl)).transpose(2, 0, 1)
    h_b = rng.dirichlet(np.ones(nb), size=(ny, nl)).transpose(2, 0, 1)
    beh = behavior_from_v_shape(h_bot, h_a, h_b)
    assert behavior_nonsignalling(beh, 1e-9)[0]
    assert lhv_feasible(beh).feasible


def test_signalling_detected():
    beh = read_behavior(FIXTURES / "signalling.behavior")
    ok, residual = behavior_nonsignalling(beh)
    assert not ok and residual == pytest.approx(1.0)


def test_behavior_from_map():
    m = random_generator(FINSTOCH, [2, 2], [2, 2], seed=3)
    beh = behavior_from_map(m, (2, 2, 2, 2))
    assert np.allclose(beh.table.sum(axis=(0, 1)), 1)


def test_named():
    assert np.array_equal(named_behavior("isotropic(0.3)").table, isotropic(0.3).table)
    assert np.array_equal(named_behavior("isotropic:0.3").table, isotropic(0.3).table)
    assert np.array_equal(named_behavior("isotropic", 0.3).table, isotropic(0.3).table)
    with pytest.raises(BehaviorError):
        named_behavior("isotropic")
    with pytest.raises(BehaviorError):
        named_behavior("tsirelson")


def test_file_roundtrip():
    for beh in (pr_box(), uniform(), isotropic(0.37)):
        again = parse_behavior(format_behavior(beh))
        assert np.array_equal(again.table, beh.table)
    assert np.array_equal(read_behavior(FIXTURES / "pr.behavior").table, pr_box().table)


@pytest.mark.parametrize(
    "text, message",
    [
        ("behaviour 2 2 2 2\n", "header"),
        ("behavior 2 2 2\n", "header"),
        ("behavior 2 2 1 1\n0 0 0 0 1\n0 0 0 0 0\n", "duplicate"),
        ("behavior 2 2 1 1\n0 0 5 0 1\n", "out of range"),
        ("behavior 2 2 1 1\n0 0 0 0 0.5\n", "sums to"),
        ("behavior 9 2 1 1\n", "outside"),
    ],
)
def test_file_errors(text, message):
    with pytest.raises(BehaviorError, match=message):
        parse_behavior(text)


def test_vertex_cap():
    with pytest.raises(BehaviorError, match="exceed"):
        lhv_feasible(uniform((2, 2, 8, 8)), vertex_cap=1000)
