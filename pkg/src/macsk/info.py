"""Exact probability tables and Shannon information measures (bits)."""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-9
DEFAULT_BUDGET = 2**26


class BudgetExceeded(MemoryError):
    """A dense table would exceed the configured entry budget."""


def memory_budget() -> int:
    """Maximum number of dense table entries (override with MACSK_MEMORY_BUDGET)."""
    env = os.environ.get("MACSK_MEMORY_BUDGET")
    return int(env) if env else DEFAULT_BUDGET


def check_budget(entries: int, what: str = "table") -> None:
    limit = memory_budget()
    if entries > limit:
        raise BudgetExceeded(f"{what} needs {entries} entries, budget is {limit}")


def _plogp(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _normalized(probs: np.ndarray, what: str) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -NORM_TOL):
        raise ValueError(f"{what} has negative entries")
    total = probs.sum()
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"{what} sums to {total!r}, not 1")
    probs = np.clip(probs, 0.0, None) / probs.clip(0.0, None).sum()
    probs.setflags(write=False)
    return probs


@dataclass(frozen=True)
class FiniteDist:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise ValueError("empty distribution")
        object.__setattr__(self, "probs", _normalized(p, "distribution"))

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, size: int) -> "FiniteDist":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def point(cls, size: int, symbol: int) -> "FiniteDist":
        p = np.zeros(size)
        p[symbol] = 1.0
        return cls(p)

    @classmethod
    def bernoulli(cls, p1: float) -> "FiniteDist":
        return cls(np.array([1.0 - p1, p1]))

    def entropy(self) -> float:
        return _plogp(self.probs)


@dataclass(frozen=True)
class JointDist:
    """Dense joint pmf; axis ``i`` is variable ``i``.

    Variables may be referred to by position or, when ``names`` is given, by
    name. The table is read-only after construction.
    """

    table: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim == 0:
            raise ValueError("joint distribution needs at least one variable")
        check_budget(t.size, "joint distribution")
        object.__setattr__(self, "table", _normalized(t, "joint table"))
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != t.ndim or len(set(names)) != len(names):
                raise ValueError("names must be unique, one per variable")
            object.__setattr__(self, "names", names)

    @property
    def arity(self) -> tuple[int, ...]:
        return self.table.shape

    @property
    def nvars(self) -> int:
        return self.table.ndim

    def index(self, var: int | str) -> int:
        if isinstance(var, str):
            if self.names is None or var not in self.names:
                raise ValueError(f"unknown variable {var!r}")
            return self.names.index(var)
        if not 0 <= var < self.nvars:
            raise ValueError(f"variable index {var} out of range")
        return int(var)

    def indices(self, vars: Iterable[int | str]) -> tuple[int, ...]:
        if isinstance(vars, (int, str)):
            vars = [vars]
        out = tuple(self.index(v) for v in vars)
        if len(set(out)) != len(out):
            raise ValueError("repeated variable in subset")
        return out

    def marginal(self, vars: Sequence[int | str]) -> "JointDist":
        idx = self.indices(vars)
        if not idx:
            raise ValueError("empty variable subset")
        drop = tuple(i for i in range(self.nvars) if i not in idx)
        t = self.table.sum(axis=drop) if drop else self.table
        # sum() keeps remaining axes in ascending order; reorder to request
        kept = sorted(idx)
        t = np.transpose(t, [kept.index(i) for i in idx])
        names = tuple(self.names[i] for i in idx) if self.names else None
        return JointDist(t, names)

    def _marginal_probs(self, idx: tuple[int, ...]) -> np.ndarray:
        drop = tuple(i for i in range(self.nvars) if i not in idx)
        return self.table.sum(axis=drop) if drop else self.table

    @classmethod
    def from_outcomes(
        cls,
        outcomes: Iterable[tuple[Sequence[object], float]],
        names: Sequence[str] | None = None,
    ) -> "JointDist":
        """Build a table from ``(values, prob)`` pairs with compact relabeling.

        Each coordinate's distinct values are numbered in order of first
        appearance; the labels are available via :func:`outcome_labels`.
        """
        labels: list[dict] = []
        rows: list[list[int]] = []
        probs: list[float] = []
        for values, p in outcomes:
            if not labels:
                labels = [dict() for _ in values]
            row = []
            for lab, v in zip(labels, values):
                row.append(lab.setdefault(v, len(lab)))
            rows.append(row)
            probs.append(p)
        if not rows:
            raise ValueError("no outcomes")
        shape = tuple(max(1, len(lab)) for lab in labels)
        check_budget(int(np.prod(shape, dtype=np.int64)), "joint distribution")
        t = np.zeros(shape)
        np.add.at(t, tuple(np.array(rows).T), np.array(probs))
        jd = cls(t, tuple(names) if names else None)
        object.__setattr__(jd, "_labels", [list(lab) for lab in labels])
        return jd

    def labels(self, var: int | str) -> list:
        """Original values for a table built by :meth:`from_outcomes`."""
        return getattr(self, "_labels")[self.index(var)]


def entropy(j: JointDist, vars) -> float:
    idx = j.indices(vars)
    if not idx:
        raise ValueError("entropy of an empty variable subset")
    return _plogp(j._marginal_probs(idx).ravel())


def conditional_entropy(j: JointDist, a, b=()) -> float:
    ia, ib = j.indices(a), j.indices(b)
    if not ia:
        raise ValueError("empty target subset")
    if set(ia) & set(ib):
        raise ValueError("overlapping subsets")
    if not ib:
        return entropy(j, ia)
    return entropy(j, ia + ib) - entropy(j, ib)


def mutual_information(j: JointDist, a, b, given=()) -> float:
    ia, ib, ig = j.indices(a), j.indices(b), j.indices(given)
    if not ia or not ib:
        raise ValueError("empty subset")
    if set(ia) & set(ib) or set(ia) & set(ig) or set(ib) & set(ig):
        raise ValueError("overlapping subsets")
    return conditional_entropy(j, ia, ig) - conditional_entropy(j, ia, ib + ig)


def kl_divergence(p: JointDist | np.ndarray, q: JointDist | np.ndarray) -> float:
    """D(p || q) in bits; ``math.inf`` when p is not absolutely continuous."""
    pt = p.table if isinstance(p, JointDist) else _normalized(np.asarray(p), "p")
    qt = q.table if isinstance(q, JointDist) else _normalized(np.asarray(q), "q")
    if pt.shape != qt.shape:
        raise ValueError(f"shape mismatch {pt.shape} vs {qt.shape}")
    mask = pt > 0
    if np.any(qt[mask] <= 0):
        return math.inf
    return float((pt[mask] * np.log2(pt[mask] / qt[mask])).sum())


def product_of_marginals(j: JointDist, groups: Sequence[Sequence[int | str]]) -> np.ndarray:
    """Table of prod_i P_{group_i} laid out on j's axes; groups must partition j's variables."""
    idx_groups = [j.indices(g) for g in groups]
    flat = sorted(i for g in idx_groups for i in g)
    if flat != list(range(j.nvars)):
        raise ValueError("groups must partition the variables")
    out = np.ones(j.arity)
    for g in idx_groups:
        m = j._marginal_probs(g)
        shape = [1] * j.nvars
        # _marginal_probs keeps ascending axis order
        for ax in sorted(g):
            shape[ax] = j.arity[ax]
        out = out * m.reshape(shape)
    return out


def security_index(j: JointDist, key=0, transcript=None) -> float:
    """log|K| - H(K|F), with |K| the declared arity of the key axis."""
    k = j.index(key)
    if transcript is None:
        rest = tuple(i for i in range(j.nvars) if i != k)
    else:
        rest = j.indices(transcript)
    hk = conditional_entropy(j, (k,), rest) if rest else entropy(j, (k,))
    return math.log2(j.arity[k]) - hk


@dataclass(frozen=True, eq=False)
class MacChannel:
    """Two-input memoryless channel; ``w[x1, x2, x3] = W(x3 | x1, x2)``."""

    w: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 3 or min(w.shape) < 1:
            raise ValueError("channel table must have shape (in1, in2, out)")
        if np.any(w < -NORM_TOL):
            raise ValueError("channel has negative entries")
        sums = w.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > NORM_TOL):
            raise ValueError("channel rows must sum to 1")
        w = np.clip(w, 0.0, None)
        w = w / w.sum(axis=2, keepdims=True)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    def __eq__(self, other) -> bool:
        return isinstance(other, MacChannel) and self.w.shape == other.w.shape and bool(
            np.array_equal(self.w, other.w))

    def __hash__(self) -> int:
        return hash((self.w.shape, self.w.tobytes()))

    @property
    def in1_size(self) -> int:
        return self.w.shape[0]

    @property
    def in2_size(self) -> int:
        return self.w.shape[1]

    @property
    def out_size(self) -> int:
        return self.w.shape[2]

    def is_deterministic(self) -> bool:
        return bool(np.all((self.w == 0) | (self.w == 1)))

    def is_symmetric(self, tol: float = NORM_TOL) -> bool:
        if self.in1_size != self.in2_size:
            return False
        return bool(np.all(np.abs(self.w - self.w.transpose(1, 0, 2)) <= tol))

    def sample(self, x1: np.ndarray, x2: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        x1 = np.asarray(x1)
        x2 = np.asarray(x2)
        if self.is_deterministic():
            return self.w[x1, x2].argmax(axis=-1)
        cdf = np.cumsum(self.w[x1, x2], axis=-1)
        u = rng.random(np.broadcast(x1, x2).shape)[..., None]
        return np.minimum((u >= cdf).sum(axis=-1), self.out_size - 1)

    def to_json(self) -> dict:
        return {"in1": self.in1_size, "in2": self.in2_size, "out": self.out_size,
                "w": self.w.tolist()}

    @classmethod
    def from_json(cls, obj: dict, name: str = "") -> "MacChannel":
        for key in ("in1", "in2", "out", "w"):
            if key not in obj:
                raise ValueError(f"channel file missing field {key!r}")
        w = np.asarray(obj["w"], dtype=float)
        if w.shape != (obj["in1"], obj["in2"], obj["out"]):
            raise ValueError(f"w has shape {w.shape}, header says "
                             f"{(obj['in1'], obj['in2'], obj['out'])}")
        return cls(w, name)

    @classmethod
    def load(cls, path) -> "MacChannel":
        with open(path) as fh:
            return cls.from_json(json.load(fh), name=os.path.basename(str(path)))


def adder_mac() -> MacChannel:
    w = np.zeros((2, 2, 3))
    for a, b in itertools.product(range(2), repeat=2):
        w[a, b, a + b] = 1.0
    return MacChannel(w, "adder")


def xor_mac() -> MacChannel:
    w = np.zeros((2, 2, 2))
    for a, b in itertools.product(range(2), repeat=2):
        w[a, b, a ^ b] = 1.0
    return MacChannel(w, "xor")


def noisy_adder_mac(flip: float = 0.05) -> MacChannel:
    """Adder MAC whose output is replaced by a uniformly chosen other symbol w.p. ``flip``."""
    w = np.zeros((2, 2, 3))
    for a, b in itertools.product(range(2), repeat=2):
        w[a, b, :] = flip / 2
        w[a, b, a + b] = 1.0 - flip
    return MacChannel(w, "noisy-adder")


def useless_mac(in1: int = 2, in2: int = 2, out: int = 2) -> MacChannel:
    return MacChannel(np.full((in1, in2, out), 1.0 / out), "useless")


def load_distribution(path) -> FiniteDist:
    with open(path) as fh:
        obj = json.load(fh)
    if "probs" not in obj:
        raise ValueError("distribution file missing field 'probs'")
    return FiniteDist(np.asarray(obj["probs"], dtype=float))


def channel_pushforward(ch: MacChannel, p1: FiniteDist, p2: FiniteDist, n: int = 1) -> JointDist:
    """Law of (X1^n, X2^n, X3^n) for i.i.d. inputs through the memoryless channel.

    Each block variable is indexed in base-|X| with the first letter most
    significant.
    """
    if p1.alphabet_size != ch.in1_size or p2.alphabet_size != ch.in2_size:
        raise ValueError("input distributions do not match channel alphabets")
    if n < 1:
        raise ValueError("block length must be positive")
    a, b, c = ch.in1_size, ch.in2_size, ch.out_size
    check_budget((a * b * c) ** n, "block pushforward")
    letter = p1.probs[:, None, None] * p2.probs[None, :, None] * ch.w
    t = letter
    for _ in range(n - 1):
        t = np.multiply.outer(t, letter)
    # axes are (x1_1,x2_1,x3_1, x1_2,...); regroup to (x1^n, x2^n, x3^n)
    order = [3 * i for i in range(n)] + [3 * i + 1 for i in range(n)] + [3 * i + 2 for i in range(n)]
    t = np.transpose(t, order).reshape(a**n, b**n, c**n)
    return JointDist(t, ("X1", "X2", "X3"))
