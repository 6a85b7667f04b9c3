"""The swap is not a diamond: each party's output is the other's input."""
from causalkit import FINSTOCH, Interpretation, Split, SystemLabel, check_nonsignalling, evaluate, swap

A, B = SystemLabel("A"), SystemLabel("B")
for d in (2, 3, 4):
    interp = Interpretation(FINSTOCH, {"A": d, "B": d})
    sw = swap(A, B)
    rep = check_nonsignalling(evaluate(sw, interp), Split.of(sw, interp, 1, 1))
    print(f"d={d}: a->b blocked {rep.a_to_b_blocked}, b->a blocked {rep.b_to_a_blocked}, "
          f"residuals {rep.residual_ab:.3f} {rep.residual_ba:.3f}")
