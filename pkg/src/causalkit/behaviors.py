"""Bipartite behaviours ``p(a, b | x, y)`` and local hidden variable models.

Tables are stored as dense arrays indexed ``[a, b, x, y]``.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lp import phase_one

MAX_ALPHABET = 8
VERTEX_CAP = 10**6


class BehaviorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Behavior:
    table: np.ndarray
    tol: float = 1e-9

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim != 4:
            raise BehaviorError(f"behaviour table must be 4-dimensional, got shape {t.shape}")
        if min(t.shape) < 1 or max(t.shape) > MAX_ALPHABET:
            raise BehaviorError(f"alphabet sizes {t.shape} outside 1..{MAX_ALPHABET}")
        if (t < -self.tol).any() or (t > 1 + self.tol).any():
            raise BehaviorError("probabilities must lie in [0, 1]")
        sums = t.sum(axis=(0, 1))
        bad = np.argwhere(np.abs(sums - 1) > self.tol)
        if len(bad):
            x, y = bad[0]
            raise BehaviorError(f"p(.,.|x={x},y={y}) sums to {sums[x, y]:.12g}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def sizes(self) -> tuple[int, int, int, int]:
        return self.table.shape

    def __repr__(self):
        return "Behavior(|A|={}, |B|={}, |X|={}, |Y|={})".format(*self.sizes)


def behavior_nonsignalling(beh: Behavior, tol: float = 1e-9) -> tuple[bool, float]:
    """Bob's marginal must not depend on x and Alice's not on y."""
    t = beh.table
    pb = t.sum(axis=0)  # [b, x, y]
    pa = t.sum(axis=1)  # [a, x, y]
    r_b = float((pb.max(axis=1) - pb.min(axis=1)).max())
    r_a = float((pa.max(axis=2) - pa.min(axis=2)).max())
    residual = max(r_a, r_b)
    return residual <= tol, residual


def deterministic_strategies(sizes):
    """All pairs ``(lam, mu)`` with ``lam[x]`` Alice's and ``mu[y]`` Bob's answer."""
    na, nb, nx, ny = sizes
    for lam in itertools.product(range(na), repeat=nx):
        for mu in itertools.product(range(nb), repeat=ny):
            yield lam, mu


def deterministic_behavior(lam, mu, sizes) -> np.ndarray:
    na, nb, nx, ny = sizes
    t = np.zeros(sizes)
    for x in range(nx):
        for y in range(ny):
            t[lam[x], mu[y], x, y] = 1.0
    return t


@dataclass(frozen=True)
class LhvCertificate:
    feasible: bool
    weights: np.ndarray  # over ``strategies``; best approximation if infeasible
    strategies: tuple
    residual: float
    farkas: np.ndarray | None = None  # Bell-inequality-like separating vector
    margin: float = 0.0


def lhv_feasible(beh: Behavior, tol: float = 1e-9, vertex_cap: int = VERTEX_CAP) -> LhvCertificate:
    """Decide whether ``beh`` is a mixture of deterministic local strategies."""
    na, nb, nx, ny = beh.sizes
    count = na**nx * nb**ny
    if count > vertex_cap:
        raise BehaviorError(f"{count} deterministic strategies exceed the cap of {vertex_cap}")
    strategies = tuple(deterministic_strategies(beh.sizes))
    A = np.empty((beh.table.size + 1, count))
    for k, (lam, mu) in enumerate(strategies):
        A[:-1, k] = deterministic_behavior(lam, mu, beh.sizes).reshape(-1)
    A[-1] = 1.0
    b = np.append(beh.table.reshape(-1), 1.0)
    sol = phase_one(A, b, tol=tol)
    farkas = None if sol.farkas is None else sol.farkas[:-1].reshape(beh.sizes)
    return LhvCertificate(sol.feasible, sol.x, strategies, sol.residual, farkas, sol.margin)


def behavior_from_v_shape(h_bot, h_a, h_b, tol: float = 1e-9) -> Behavior:
    """``p(a,b|x,y) = sum_l h_bot[l] h_a[a,x,l] h_b[b,y,l]``.

    ``h_a`` and ``h_b`` are conditional distributions indexed
    ``[outcome, setting, hidden]``.
    """
    h_bot = np.asarray(h_bot, dtype=float).reshape(-1)
    h_a = np.asarray(h_a, dtype=float)
    h_b = np.asarray(h_b, dtype=float)
    if (h_bot < -tol).any() or abs(h_bot.sum() - 1) > tol:
        raise BehaviorError("shared state is not a probability vector")
    for name, h in (("h_a", h_a), ("h_b", h_b)):
        if h.ndim != 3 or h.shape[2] != h_bot.size:
            raise BehaviorError(f"{name} must be indexed [outcome, setting, hidden]")
        if (h < -tol).any() or np.abs(h.sum(axis=0) - 1).max() > tol:
            raise BehaviorError(f"{name} is not stochastic")
    return Behavior(np.einsum("l,axl,byl->abxy", h_bot, h_a, h_b), tol=max(tol, 1e-12))


def behavior_from_map(matrix, sizes) -> Behavior:
    """Behaviour of a finstoch map ``X (x) Y -> A (x) B``."""
    na, nb, nx, ny = sizes
    m = np.asarray(matrix, dtype=float).reshape(na, nb, nx, ny)
    return Behavior(m)


def pr_box() -> Behavior:
    t = np.zeros((2, 2, 2, 2))
    for a, b, x, y in itertools.product(range(2), repeat=4):
        if a ^ b == x * y:
            t[a, b, x, y] = 0.5
    return Behavior(t)


def uniform(sizes=(2, 2, 2, 2)) -> Behavior:
    na, nb = sizes[:2]
    return Behavior(np.full(sizes, 1.0 / (na * nb)))


def isotropic(v: float) -> Behavior:
    if not 0 <= v <= 1:
        raise BehaviorError(f"visibility {v} outside [0, 1]")
    return Behavior(v * pr_box().table + (1 - v) * uniform().table)


def named_behavior(name: str, v: float | None = None) -> Behavior:
    """``pr_box``, ``uniform`` or ``isotropic`` (also written ``isotropic(0.3)``)."""
    m = re.fullmatch(r"\s*isotropic\s*[(:]\s*([^)]+?)\s*\)?\s*", name)
    if m:
        return isotropic(float(m.group(1)))
    if name == "pr_box":
        return pr_box()
    if name == "uniform":
        return uniform()
    if name == "isotropic":
        if v is None:
            raise BehaviorError("isotropic needs a visibility v")
        return isotropic(v)
    raise BehaviorError(f"unknown behaviour {name!r}")


def lhv_threshold(family, lo: float = 0.0, hi: float = 1.0, precision: float = 1e-6, tol=1e-9):
    """Bisect the largest parameter for which ``family(v)`` is LHV-feasible.

    ``family(lo)`` must be feasible and ``family(hi)`` infeasible."""
    if not lhv_feasible(family(lo), tol).feasible:
        raise BehaviorError(f"family is not local at {lo}")
    if lhv_feasible(family(hi), tol).feasible:
        raise BehaviorError(f"family is still local at {hi}")
    while hi - lo > precision:
        mid = (lo + hi) / 2
        if lhv_feasible(family(mid), tol).feasible:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# --------------------------------------------------------------------------
# behaviour files
# --------------------------------------------------------------------------


def parse_behavior(text: str) -> Behavior:
    """Parse ``behavior |A| |B| |X| |Y|`` followed by ``x y a b p`` lines.

    Missing cells are zero.  ``#`` starts a comment.
    """
    lines = []
    for k, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append((k, line.split()))
    if not lines or lines[0][1][0] != "behavior" or len(lines[0][1]) != 5:
        raise BehaviorError("line 1: expected header 'behavior |A| |B| |X| |Y|'")
    try:
        na, nb, nx, ny = (int(v) for v in lines[0][1][1:])
    except ValueError:
        raise BehaviorError(f"line {lines[0][0]}: alphabet sizes must be integers") from None
    if min(na, nb, nx, ny) < 1 or max(na, nb, nx, ny) > MAX_ALPHABET:
        raise BehaviorError(f"line {lines[0][0]}: alphabet sizes outside 1..{MAX_ALPHABET}")
    t = np.zeros((na, nb, nx, ny))
    seen = set()
    for k, fields in lines[1:]:
        if len(fields) != 5:
            raise BehaviorError(f"line {k}: expected 'x y a b p'")
        try:
            x, y, a, b = (int(v) for v in fields[:4])
            p = float(fields[4])
        except ValueError:
            raise BehaviorError(f"line {k}: malformed entry") from None
        if not (0 <= a < na and 0 <= b < nb and 0 <= x < nx and 0 <= y < ny):
            raise BehaviorError(f"line {k}: index out of range")
        if (a, b, x, y) in seen:
            raise BehaviorError(f"line {k}: duplicate cell x={x} y={y} a={a} b={b}")
        seen.add((a, b, x, y))
        t[a, b, x, y] = p
    return Behavior(t)


def format_behavior(beh: Behavior) -> str:
    na, nb, nx, ny = beh.sizes
    out = [f"behavior {na} {nb} {nx} {ny}"]
    for x, y, a, b in itertools.product(range(nx), range(ny), range(na), range(nb)):
        p = beh.table[a, b, x, y]
        if p != 0:
            out.append(f"{x} {y} {a} {b} {float(p):.17g}")
    return "\n".join(out) + "\n"


def read_behavior(path) -> Behavior:
    return parse_behavior(Path(path).read_text(encoding="utf-8"))
