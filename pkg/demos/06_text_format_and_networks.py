"""Write a process network as text, coarse-grain it to a diamond and check it."""
from pathlib import Path

from causalkit import Interpretation, check_nonsignalling, coarse_grain, diamond_normal_form, evaluate, parse, to_text
from causalkit.checkers import Split
from causalkit.causal import diamond_structure
from causalkit.semantics import FINSTOCH, random_generator

source = """
system A dim 2;
stoch f : A -> A (.5 .3 | .5 .7);
diag d = f ; discard(A);
poset P { lo < a; lo < b; a < hi; b < hi; }
"""
prog = parse(source)
print(to_text(prog))
print("d evaluates to", evaluate(prog.diagrams["d"], prog.interpretation))

# a six-node network whose clusters form a diamond
chain = parse((Path(__file__).parents[1] / "tests" / "fixtures" / "two_chain.proc").read_text())
cs = chain.structures["T"]
q = coarse_grain(cs, {"b1": "bot", "b2": "bot", "a": "a", "b": "b", "t1": "top", "t2": "top"})
print("quotient is the diamond:", q == diamond_structure())

dims = chain.dims
bindings = {
    name: random_generator(FINSTOCH, [dims[l.name] for l in sig.inputs], [dims[l.name] for l in sig.outputs], seed=k)
    for k, (name, sig) in enumerate(chain.signature.boxes.items())
}
interp = Interpretation(FINSTOCH, dims, bindings)
dn = diamond_normal_form(chain.networks["C"], ["a"], ["b"])
F = evaluate(dn.composite(), interp)
rep = check_nonsignalling(F, Split.of(dn.composite(), interp, dn.n_xa, dn.n_ya))
print("coarse-grained network non-signalling:", rep.nonsignalling)
