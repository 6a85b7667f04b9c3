"""Closed diagrams that should be certain events, and what breaks when they are not."""
from causalkit import check_bang, check_terminal_theory, format_diagram, theorem2_audit
from causalkit.random_models import random_theory

# an ordinary stochastic theory: every closed diagram evaluates to 1
gens, interp, _ = random_theory(seed=4, substochastic=False)
print("stochastic theory, certainty holds:", check_bang(interp, gens).holds)

# scale one map by 0.5 and a closed diagram now evaluates to 0.5
gens, interp, offender = random_theory(seed=5, substochastic=True, uniform_scale=0.5)
bang = check_bang(interp, gens)
print("scaled map", offender, "-> certainty holds:", bang.holds, "scalar", bang.scalar)
print("counterexample:", format_diagram(bang.counterexample))
print("terminal:", check_terminal_theory(interp, gens).is_terminal)

audit = theorem2_audit(interp, gens)
print("audit consistent:", audit.consistent)
for note in audit.notes:
    print("  note:", note)
