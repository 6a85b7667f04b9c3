"""Two-party behaviours: non-signalling is not the same as local."""
import numpy as np

from causalkit import behavior_nonsignalling, isotropic, lhv_feasible, lhv_threshold, pr_box, uniform
from causalkit.behaviors import behavior_from_v_shape

pr = pr_box()
cert = lhv_feasible(pr)
print("PR box non-signalling:", behavior_nonsignalling(pr)[0], "local:", cert.feasible)
print("separating inequality value on the PR box:", np.sum(cert.farkas * pr.table))

print("uniform noise local:", lhv_feasible(uniform()).feasible)
print("PR box mixed with noise stops being local at v =", round(lhv_threshold(isotropic), 6))

# a shared source feeding two local boxes always gives a local, non-signalling table
rng = np.random.default_rng(0)
h_bot = rng.dirichlet(np.ones(3))
h_a = rng.dirichlet(np.ones(2), size=(2, 3)).transpose(2, 0, 1)
h_b = rng.dirichlet(np.ones(2), size=(2, 3)).transpose(2, 0, 1)
v = behavior_from_v_shape(h_bot, h_a, h_b)
print("V-shape: non-signalling", behavior_nonsignalling(v)[0], "local", lhv_feasible(v).feasible)
