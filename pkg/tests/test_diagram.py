import pytest
from hypothesis import given, settings, strategies as st

from causalkit.diagram import (
    BOUNDARY,
    EXOTIC,
    BoxSignature,
    Diagram,
    DiagramError,
    Port,
    Signature,
    SystemLabel,
    Wire,
    boundary,
    box,
    discard,
    discard_all,
    empty,
    identity,
    par,
    par_all,
    permutation,
    primitive,
    seq,
    seq_all,
    swap,
    well_formed,
)
from helpers import random_layered

A, B, C = SystemLabel("A"), SystemLabel("B"), SystemLabel("C")
f = BoxSignature("f", (A,), (B,))
g = BoxSignature("g", (B,), (C,))
h = BoxSignature("h", (A, B), (C,))


def test_box_boundary():
    d = box(h)
    assert boundary(d) == ((A, B), (C,))
    assert well_formed(d) == []


def test_seq_connects_in_order():
    d = seq(box(f), box(g))
    assert boundary(d) == ((A,), (C,))
    assert Wire(Port(0, 0), Port(1, 0)) in d.wires
    assert d.n_nodes == 2


def test_seq_mismatch_message_lists_both_boundaries():
    with pytest.raises(DiagramError) as e:
        seq(discard(A), box(f))
    assert "cannot compose output [] with input [A]" in str(e.value)
    with pytest.raises(DiagramError, match="position 0"):
        seq(box(f), box(f))


def test_par_concatenates_boundaries():
    d = par(box(f), box(g))
    assert boundary(d) == ((A, B), (B, C))


def test_empty_is_unit():
    assert par(empty(), box(f)) == box(f)
    assert par(box(f), empty()) == box(f)
    assert seq(empty(), empty()) == empty()


def test_identity_is_unit_for_seq():
    assert seq(identity(A), box(f)) == box(f)
    assert seq(box(f), identity(B)) == box(f)


def test_swap_twice_keeps_two_nodes():
    # equal to the identity only after evaluation; syntax keeps both nodes
    d = seq(swap(A, B), swap(B, A))
    assert boundary(d) == ((A, B), (A, B))
    assert d.n_nodes == 2
    assert d != identity(A, B)


def test_permutation_convention():
    # output j is input order[j]
    p = permutation([A, B, C], [2, 0, 1])
    assert p.outputs == (C, A, B)
    inverse = permutation([C, A, B], [1, 2, 0])
    assert seq(p, inverse) == identity(A, B, C)
    with pytest.raises(DiagramError):
        permutation([A, B], [0, 0])


def test_discard_all():
    d = discard_all([A, B])
    assert boundary(d) == ((A, B), ())
    assert [b.kind for b in d.boxes] == ["discard", "discard"]


def test_well_formed_detects_type_mismatch():
    d = Diagram((A,), (), (BoxSignature("k", (B,), ()),), (Wire(Port(BOUNDARY, 0), Port(0, 0)),))
    assert any("type mismatch on wire w0: A -> B" in p for p in well_formed(d))


def test_well_formed_detects_cycle():
    loop = BoxSignature("l", (A,), (A,))
    d = Diagram((), (), (loop,), (Wire(Port(0, 0), Port(0, 0)),))
    assert any("cycle at node n0" in p for p in well_formed(d))


def test_well_formed_detects_dangling_port():
    d = Diagram((A,), (), (), ())
    assert well_formed(d)


def test_strict_sorts():
    E = SystemLabel("E", EXOTIC)
    k = BoxSignature("k", (E,), (A,))
    assert well_formed(box(k)) == []
    e2 = SystemLabel("E")  # same name, other sort
    d = Diagram((e2,), (A,), (k,), (Wire(Port(BOUNDARY, 0), Port(0, 0)), Wire(Port(0, 0), Port(BOUNDARY, 0))))
    assert well_formed(d)


def test_box_kind_invariants():
    with pytest.raises(DiagramError):
        BoxSignature("s", (A, B), (A, B), kind="swap")
    with pytest.raises(DiagramError):
        BoxSignature("d", (A,), (A,), kind="discard")


def test_signature_registry():
    sig = Signature()
    sig.declare_system("A")
    sig.declare_system("B")
    sig.declare_box("f", ["A"], ["B"])
    assert sig.box("f") == BoxSignature("f", (A,), (B,))
    with pytest.raises(DiagramError, match="unknown label C"):
        sig.label("C")
    with pytest.raises(DiagramError, match="unknown signature q"):
        sig.box("q")


def test_primitive():
    assert primitive("identity", A) == identity(A)
    assert primitive("swap", A, B) == swap(A, B)
    assert primitive("discard", A) == discard(A)


def test_seq_all_par_all():
    d = seq_all(box(f), box(g))
    assert boundary(d) == ((A,), (C,))
    assert boundary(par_all(box(f), box(g), box(h))) == ((A, B, A, B), (B, C, C))


def test_topological_order_reverse_ties():
    d = par(box(f), box(g))
    assert d.topological_order() == [0, 1]
    assert d.topological_order(reverse_ties=True) == [1, 0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_seq_associative(s1, s2, s3):
    x, _ = random_layered(s1)
    y, _ = random_layered(s2, start=x.outputs, prefix="y")
    z, _ = random_layered(s3, start=y.outputs, prefix="z")
    left = seq(seq(x, y), z)
    right = seq(x, seq(y, z))
    assert left == right
    assert well_formed(left) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_par_associative(s1, s2, s3):
    x, _ = random_layered(s1)
    y, _ = random_layered(s2)
    z, _ = random_layered(s3)
    assert par(par(x, y), z) == par(x, par(y, z))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_random_diagrams_are_acyclic_and_well_formed(seed):
    d, _ = random_layered(seed, n_layers=6)
    assert well_formed(d) == []
    order = d.topological_order()
    pos = {n: i for i, n in enumerate(order)}
    assert all(pos[a] < pos[b] for a, b in d.node_edges())
