"""Build string diagrams by composition and read them as stochastic maps."""
import numpy as np

from causalkit import (
    FINSTOCH,
    BoxSignature,
    Interpretation,
    SystemLabel,
    box,
    discard,
    evaluate,
    par,
    seq,
    swap,
    validate,
)

A, B = SystemLabel("A"), SystemLabel("B")
flip = BoxSignature("flip", (A,), (A,))  # a noisy bit flip
coin = BoxSignature("coin", (), (B,))  # a biased coin on B

interp = Interpretation(
    FINSTOCH,
    {"A": 2, "B": 2},
    {"flip": [[0.9, 0.2], [0.1, 0.8]], "coin": [[0.3], [0.7]]},
)

# sequential composition is the matrix product (columns are inputs)
twice = seq(box(flip), box(flip))
print("flip ; flip =\n", evaluate(twice, interp))

# parallel composition is the Kronecker product, left factor most significant
side = par(box(flip), box(coin))
print("flip * coin has shape", evaluate(side, interp).shape)

# swapping twice is the identity as a map, though the diagram keeps both swaps
round_trip = seq(swap(A, B), swap(B, A))
print("swap ; swap has", round_trip.n_nodes, "nodes and evaluates to the identity:",
      np.array_equal(evaluate(round_trip, interp), np.eye(4)))

# discarding an output of a stochastic map leaves the discard on its input
print("flip ; discard =", evaluate(seq(box(flip), discard(A)), interp))
print("problems with the bound matrices:", validate(evaluate(side, interp), "stochastic"))
