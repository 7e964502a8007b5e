"""Symmetric-rate quantities of a two-input MAC.

``compute_rstar`` estimates the largest R with (R, R) in the no-feedback
capacity region: the convex hull of the union over product input laws of the
pentagons {r1 <= I(X1;X3|X2), r2 <= I(X2;X3|X1), r1 + r2 <= I(X1,X2;X3)}.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .info import FiniteDist, JointDist, MacChannel, mutual_information

ALPHABET_LIMIT = 8
PAIR_BUDGET = 250_000


class AlphabetLimitExceeded(ValueError):
    pass


@dataclass(frozen=True)
class PentagonRates:
    i1: float
    i2: float
    isum: float

    @property
    def symmetric(self) -> float:
        return min(self.i1, self.i2, self.isum / 2)

    def corners(self) -> list[tuple[float, float]]:
        return [(self.i1, self.isum - self.i1), (self.isum - self.i2, self.i2)]


@dataclass(frozen=True)
class RatePoint:
    r1: float
    r2: float

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0:
            raise ValueError("rates are nonnegative")


def _pentagon_batch(w: np.ndarray, p1: np.ndarray, p2: np.ndarray):
    """Pentagon terms for every pair (rows of p1) x (rows of p2); returns three (G1, G2) arrays."""
    a = p1[:, None, :, None, None]
    b = p2[None, :, None, :, None]
    joint = a * b * w[None, None]  # (G1, G2, x1, x2, x3)
    q2 = (a * w[None, None]).sum(axis=2, keepdims=True)  # P(x3 | x2)
    q1 = (b * w[None, None]).sum(axis=3, keepdims=True)  # P(x3 | x1)
    q = joint.sum(axis=(2, 3), keepdims=True)  # P(x3)
    ww = np.broadcast_to(w[None, None], joint.shape)
    pos = joint > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lw = np.where(pos, np.log2(np.where(pos, ww, 1.0)), 0.0)

        def term(den):
            den = np.broadcast_to(den, joint.shape)
            return np.where(pos, joint * (lw - np.log2(np.where(pos, den, 1.0))), 0.0).sum(axis=(2, 3, 4))

        i1 = term(q2)
        i2 = term(q1)
        isum = term(q)
    clean = lambda v: np.where(np.abs(v) < 1e-12, 0.0, np.maximum(v, 0.0))
    return clean(i1), clean(i2), clean(isum)


def pentagon(ch: MacChannel, p1: FiniteDist, p2: FiniteDist) -> PentagonRates:
    if p1.alphabet_size != ch.in1_size or p2.alphabet_size != ch.in2_size:
        raise ValueError("input distributions do not match channel alphabets")
    i1, i2, isum = _pentagon_batch(ch.w, p1.probs[None], p2.probs[None])
    return PentagonRates(float(i1[0, 0]), float(i2[0, 0]), float(isum[0, 0]))


def simplex_grid(size: int, steps: int) -> np.ndarray:
    """All distributions on ``size`` symbols with masses in multiples of 1/steps."""
    pts = []
    for cut in itertools.combinations(range(steps + size - 1), size - 1):
        parts = np.diff((-1,) + cut + (steps + size - 1,)) - 1
        pts.append(parts / steps)
    return np.array(pts, dtype=float)


def _grid_size(size: int, steps: int) -> int:
    return math.comb(steps + size - 1, size - 1)


def symmetric_point(points: np.ndarray) -> float:
    """Largest t with (t, t) in the convex hull of the downward closure of ``points``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    pts = np.clip(pts, 0.0, None)
    if pts.size == 0:
        return 0.0
    mx, my = pts[:, 0].max(), pts[:, 1].max()
    pts = np.vstack([pts, [[0.0, 0.0], [mx, 0.0], [0.0, my]]])
    hull = _convex_hull(pts)
    best = 0.0
    for u, v in zip(hull, np.roll(hull, -1, axis=0)):
        du, dv = u[0] - u[1], v[0] - v[1]
        if du == dv:
            if du == 0:
                best = max(best, u[0], v[0])
            continue
        s = du / (du - dv)
        if -1e-12 <= s <= 1 + 1e-12:
            best = max(best, u[0] + s * (v[0] - u[0]))
    return float(best)


def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; vertices counter-clockwise."""
    p = np.unique(np.round(pts, 15), axis=0)
    if len(p) <= 2:
        return p
    order = np.lexsort((p[:, 1], p[:, 0]))
    p = p[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for q in p:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    for q in p[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    return np.array(lower[:-1] + upper[:-1])


@dataclass
class RstarResult:
    rate: float
    uncertainty: float
    grid_rate: float
    best_inputs: tuple[np.ndarray, np.ndarray]
    grid_steps: tuple[int, int]
    points: np.ndarray = field(repr=False)

    def report(self) -> dict:
        return {"rate": self.rate, "uncertainty": self.uncertainty, "grid_rate": self.grid_rate,
                "grid_steps": list(self.grid_steps),
                "best_inputs": [self.best_inputs[0].tolist(), self.best_inputs[1].tolist()]}


def _corner_points(i1, i2, isum) -> np.ndarray:
    i1, i2, isum = (np.ravel(v) for v in (i1, i2, isum))
    return np.concatenate([np.stack([i1, isum - i1], 1), np.stack([isum - i2, i2], 1)])


def compute_rstar(ch: MacChannel, grid: int = 33, refine: int = 40,
                  alphabet_limit: int = ALPHABET_LIMIT, pair_budget: int = PAIR_BUDGET) -> RstarResult:
    """Grid search over product input laws, hull of pentagon corners, then local refinement.

    ``grid`` is the number of points per simplex dimension (so masses move in
    steps of 1/(grid-1)); it is lowered for large alphabets to keep the
    number of input pairs within ``pair_budget``. ``refine`` bounds the
    pattern-search iterations. ``uncertainty`` is the gain achieved by the
    refinement over the grid value, a proxy for the grid's resolution error.
    """
    a, b = ch.in1_size, ch.in2_size
    if max(a, b, ch.out_size) > alphabet_limit:
        raise AlphabetLimitExceeded(f"alphabet sizes {(a, b, ch.out_size)} exceed {alphabet_limit}")
    s1 = s2 = max(1, grid - 1)
    while _grid_size(a, s1) * _grid_size(b, s2) > pair_budget and max(s1, s2) > 1:
        if _grid_size(a, s1) >= _grid_size(b, s2):
            s1 = max(1, s1 // 2)
        else:
            s2 = max(1, s2 // 2)
    g1, g2 = simplex_grid(a, s1), simplex_grid(b, s2)
    chunk = max(1, 2_000_000 // max(1, len(g2) * a * b * ch.out_size))
    terms = [np.concatenate(parts, axis=0) for parts in zip(
        *(_pentagon_batch(ch.w, g1[i:i + chunk], g2) for i in range(0, len(g1), chunk)))]
    i1, i2, isum = terms
    pts = _corner_points(i1, i2, isum)
    grid_rate = symmetric_point(pts)

    # sources of the corner points, for refinement seeds
    n_pairs = i1.size
    pair_of = np.concatenate([np.arange(n_pairs), np.arange(n_pairs)])
    score = np.minimum(pts[:, 0], pts[:, 1])
    seeds = []
    for idx in np.argsort(-score):
        pi = int(pair_of[idx])
        if pi not in seeds:
            seeds.append(pi)
        if len(seeds) == 2:
            break
    # also the pair maximizing each coordinate near the diagonal crossing
    for col in (0, 1):
        pi = int(pair_of[np.argmax(pts[:, col] + 1e-9 * pts[:, 1 - col])])
        if pi not in seeds:
            seeds.append(pi)

    best_val = grid_rate
    best_inputs = None
    extra = [_convex_hull(np.vstack([pts, [[0.0, 0.0]]]))]
    for pi in seeds:
        u, v = divmod(pi, len(g2))
        p1, p2 = g1[u].copy(), g2[v].copy()
        step = 1.0 / max(s1, s2)
        it = 0
        while it < refine and step > 1e-6:
            improved = False
            for which, (p, size) in enumerate(((p1, a), (p2, b))):
                for i, j in itertools.permutations(range(size), 2):
                    mv = min(step, p[i])
                    if mv <= 0:
                        continue
                    cand = p.copy()
                    cand[i] -= mv
                    cand[j] += mv
                    q1, q2 = (cand, p2) if which == 0 else (p1, cand)
                    c = _corner_points(*_pentagon_batch(ch.w, q1[None], q2[None]))
                    val = symmetric_point(np.vstack(extra + [c]))
                    if val > best_val + 1e-12:
                        best_val = val
                        extra = [_convex_hull(np.vstack(extra + [c]))]
                        p[:] = cand
                        best_inputs = (p1.copy(), p2.copy())
                        improved = True
            it += 1
            if not improved:
                step /= 2
    if best_inputs is None:
        u, v = divmod(seeds[0], len(g2))
        best_inputs = (g1[u], g2[v])
    rate = best_val if best_val > 1e-12 else 0.0
    return RstarResult(rate, max(0.0, rate - grid_rate), grid_rate, best_inputs, (s1 + 1, s2 + 1),
                       np.vstack(extra))


def grid_bounds(ch: MacChannel, steps: int = 32) -> tuple[float, float]:
    """(best single-pentagon symmetric value, max isum/2) over the grid."""
    g1, g2 = simplex_grid(ch.in1_size, steps), simplex_grid(ch.in2_size, steps)
    i1, i2, isum = _pentagon_batch(ch.w, g1, g2)
    return float(np.max(np.minimum(np.minimum(i1, i2), isum / 2))), float(np.max(isum) / 2)


def _names(law: JointDist, default: tuple[str, ...]) -> list[int]:
    if law.names is not None and all(n in law.names for n in default):
        return [law.index(n) for n in default]
    if law.nvars != len(default):
        raise ValueError(f"expected variables {default}, got arity {law.arity}")
    return list(range(len(default)))


def n_letter_rate_nic(trace_law: JointDist, n: int) -> float:
    """min{ I(U1; X3,U3 | U2)/n, I(U2; X3,U3 | U1)/n, I(U1,U2; X3,U3)/(2n) }.

    Variables are taken by name (U1, U2, U3, X3) when present, else in that order.
    """
    u1, u2, u3, x3 = _names(trace_law, ("U1", "U2", "U3", "X3"))
    out = [x3, u3]
    return min(mutual_information(trace_law, [u1], out, [u2]) / n,
               mutual_information(trace_law, [u2], out, [u1]) / n,
               mutual_information(trace_law, [u1, u2], out) / (2 * n))


def n_letter_rate_se(trace_law: JointDist, n: int) -> float:
    """Source-emulation analogue with Y_i = (X_i^n, U_i), Y_3 = (X_3^n, U_3).

    Variables by name (X1, U1, X2, U2, X3, U3) when present, else in that order.
    """
    x1, u1, x2, u2, x3, u3 = _names(trace_law, ("X1", "U1", "X2", "U2", "X3", "U3"))
    y1, y2, y3 = [x1, u1], [x2, u2], [x3, u3]
    return min(mutual_information(trace_law, y1, y3, y2) / n,
               mutual_information(trace_law, y2, y3, y1) / n,
               mutual_information(trace_law, y1 + y2, y3) / (2 * n))
