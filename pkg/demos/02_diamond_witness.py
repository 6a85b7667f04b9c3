"""A terminal diamond cannot signal, and the local marginal is itself a diagram."""
import numpy as np

from causalkit import QUANTUM, Split, check_nonsignalling, evaluate, format_diagram, theorem1_witness
from causalkit.random_models import random_diamond

dn, interp = random_diamond(seed=7, dim_choices=(2, 3))
F = evaluate(dn.composite(), interp)
split = Split.of(dn.composite(), interp, dn.n_xa, dn.n_ya)
print("diamond on", dict(interp.dims))
print("composite map shape", F.shape)

rep = check_nonsignalling(F, split)
print("non-signalling:", rep.nonsignalling, "residuals", rep.residual_ab, rep.residual_ba)

# the witness h is built from the diamond's own boxes by discarding a's side
res = theorem1_witness(dn, interp)
print("h as a diagram:", format_diagram(res.h_diagram))
print("h matches the least-squares marginal to", res.agreement)
print("h =\n", np.round(res.h, 4))

# the same holds for quantum channels at qubit dimension
qdn, qinterp = random_diamond(seed=7, backend=QUANTUM, fixed_dim=2)
qres = theorem1_witness(qdn, qinterp)
print("quantum diamond residual", qres.report.residual)
