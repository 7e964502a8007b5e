"""Fractional partitions, the one-shot converse bound and interactive-communication checks.

Terminals are numbered from 0. A subset of terminals is a ``frozenset``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from . import lp
from .randfn import random_function
from .info import (
    JointDist,
    binary_entropy,
    check_budget,
    conditional_entropy,
    entropy,
    kl_divergence,
    product_of_marginals,
    security_index,
)

COVER_TOL = 1e-8
ENUM_LIMIT = 2**20


def proper_subsets(m: int) -> list[frozenset]:
    """Nonempty proper subsets of range(m), ordered by bitmask."""
    return [frozenset(i for i in range(m) if mask >> i & 1) for mask in range(1, 2**m - 1)]


@dataclass(frozen=True)
class Partition:
    blocks: tuple[frozenset, ...]

    def __post_init__(self):
        blocks = tuple(frozenset(b) for b in self.blocks)
        if len(blocks) < 2:
            raise ValueError("a partition needs at least two blocks")
        if any(not b for b in blocks):
            raise ValueError("empty block")
        union = frozenset().union(*blocks)
        if sum(len(b) for b in blocks) != len(union):
            raise ValueError("blocks overlap")
        if union != frozenset(range(len(union))):
            raise ValueError("blocks must cover 0..m-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def m(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)


def all_partitions(m: int) -> Iterator[Partition]:
    """Every set partition of range(m) with at least two blocks."""

    def rec(i, blocks):
        if i == m:
            if len(blocks) >= 2:
                yield Partition(tuple(frozenset(b) for b in blocks))
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    yield from rec(0, [])


@dataclass(frozen=True)
class FractionalPartition:
    m: int
    weights: Mapping[frozenset, float]
    source: Partition | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("need at least two terminals")
        full = {b: 0.0 for b in proper_subsets(self.m)}
        for b, w in self.weights.items():
            b = frozenset(b)
            if b not in full:
                raise ValueError(f"{set(b)} is not a proper nonempty subset")
            if w < -COVER_TOL or w > 1 + COVER_TOL:
                raise ValueError(f"weight {w} outside [0, 1]")
            full[b] = min(max(float(w), 0.0), 1.0)
        for i in range(self.m):
            cover = sum(w for b, w in full.items() if i in b)
            if abs(cover - 1.0) > COVER_TOL:
                raise ValueError(f"terminal {i} covered with weight {cover}")
        object.__setattr__(self, "weights", full)

    def support(self) -> dict[frozenset, float]:
        return {b: w for b, w in self.weights.items() if w > 0}

    def vector(self) -> np.ndarray:
        return np.array([self.weights[b] for b in proper_subsets(self.m)])


def partition_to_fractional(p: Partition) -> FractionalPartition:
    if p.k < 2:
        raise ValueError("partition must have at least two blocks")
    full = frozenset(range(p.m))
    w = {full - b: 1.0 / (p.k - 1) for b in p.blocks}
    return FractionalPartition(p.m, w, source=p)


def covering_matrix(m: int) -> np.ndarray:
    subsets = proper_subsets(m)
    return np.array([[1.0 if i in b else 0.0 for b in subsets] for i in range(m)])


def random_fractional_partition(m: int, rng: np.random.Generator) -> FractionalPartition:
    """A random vertex-free point: convex mix of a random LP vertex and partition-induced weights."""
    subsets = proper_subsets(m)
    c = rng.normal(size=len(subsets))
    a = covering_matrix(m)
    x, _ = lp.maximize(c, a_eq=a, b_eq=np.ones(m))
    parts = list(all_partitions(m))
    mix = partition_to_fractional(parts[rng.integers(len(parts))]).vector()
    theta = rng.random()
    v = theta * x + (1 - theta) * mix
    return FractionalPartition(m, dict(zip(subsets, v)))


# ----------------------------------------------------------------------------
# interactive communication


@dataclass(frozen=True)
class Message:
    """One public message: ``fn(own observation, previous messages) -> symbol``."""

    sender: int
    alphabet: int
    fn: Callable[[int, tuple], int]
    round: int = 0


@dataclass(frozen=True)
class InteractiveProtocol:
    """Messages in schedule order; each reads only its sender's observation and earlier messages."""

    alphabets: tuple[int, ...]
    messages: tuple[Message, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphabets", tuple(int(a) for a in self.alphabets))
        object.__setattr__(self, "messages", tuple(self.messages))
        last = (-1, -1)
        for msg in self.messages:
            if not 0 <= msg.sender < self.m:
                raise ValueError(f"sender {msg.sender} out of range")
            if msg.alphabet < 1:
                raise ValueError("message alphabet must be positive")
            key = (msg.round, msg.sender)
            if key < last:
                raise ValueError("messages must be listed round by round, senders ascending")
            last = key

    @property
    def m(self) -> int:
        return len(self.alphabets)

    @property
    def rounds(self) -> int:
        return 1 + max((msg.round for msg in self.messages), default=0)

    def transcript(self, obs: Sequence[int]) -> tuple:
        sent: tuple = ()
        for msg in self.messages:
            sym = int(msg.fn(int(obs[msg.sender]), sent))
            if not 0 <= sym < msg.alphabet:
                raise ValueError(f"message symbol {sym} outside alphabet {msg.alphabet}")
            sent = sent + (sym,)
        return sent

    def transcript_law(self, law: JointDist) -> JointDist:
        return _transcript_law(self.alphabets, self.transcript, law)


@dataclass(frozen=True)
class GenieTranscript:
    """A public variable computed from all observations jointly. Not an interactive protocol."""

    alphabets: tuple[int, ...]
    fn: Callable[[tuple], int]

    @property
    def m(self) -> int:
        return len(self.alphabets)

    def transcript(self, obs: Sequence[int]) -> tuple:
        return (int(self.fn(tuple(int(o) for o in obs))),)

    def transcript_law(self, law: JointDist) -> JointDist:
        return _transcript_law(self.alphabets, self.transcript, law)


def xor_genie(m: int = 2) -> GenieTranscript:
    return GenieTranscript((2,) * m, lambda obs: int(np.bitwise_xor.reduce(obs)))


def random_interactive_protocol(rng: np.random.Generator, m: int = 3, max_alpha: int = 4,
                                max_rounds: int = 3, alphabets: Sequence[int] | None = None
                                ) -> InteractiveProtocol:
    """Random schedule-valid protocol: each round, each terminal speaks with probability 1/2.

    Messages are seeded pseudo-random functions of (own observation, earlier
    messages) with alphabets in 2..max_alpha.
    """
    if alphabets is None:
        alphabets = tuple(int(a) for a in rng.integers(2, max_alpha + 1, size=m))
    rounds = int(rng.integers(1, max_rounds + 1))
    msgs = []
    for r in range(rounds):
        for s in range(m):
            if rng.random() < 0.5:
                a = int(rng.integers(2, max_alpha + 1))
                g = random_function(int(rng.integers(1 << 62)), a)
                msgs.append(Message(s, a, lambda y, f, g=g: g(y, f), r))
    return InteractiveProtocol(tuple(alphabets), tuple(msgs))


def random_law(rng: np.random.Generator, alphabets: Sequence[int], product: bool = False,
               sparsity: float = 0.3) -> JointDist:
    """Random joint pmf on the given alphabets (a product of random marginals if ``product``)."""
    if product:
        t = np.ones(())
        for a in alphabets:
            t = np.multiply.outer(t, rng.dirichlet(np.ones(a)))
        return JointDist(t)
    t = rng.random(tuple(alphabets)) * (rng.random(tuple(alphabets)) >= sparsity)
    if t.sum() <= 0:
        t.flat[0] = 1.0
    return JointDist(t / t.sum())


def _transcript_law(alphabets, transcript, law: JointDist) -> JointDist:
    if tuple(law.arity) != tuple(alphabets):
        raise ValueError(f"law arity {law.arity} does not match observation alphabets {alphabets}")
    n_obs = int(np.prod(alphabets))
    if n_obs > ENUM_LIMIT:
        raise ValueError(f"{n_obs} observation tuples exceed the enumeration limit")
    ids: dict[tuple, int] = {}
    cells = []
    for obs in itertools.product(*(range(a) for a in alphabets)):
        p = law.table[obs]
        if p <= 0:
            continue
        f = transcript(obs)
        cells.append((obs, ids.setdefault(f, len(ids)), p))
    check_budget(n_obs * len(ids), "transcript law")
    t = np.zeros(tuple(alphabets) + (len(ids),))
    for obs, fid, p in cells:
        t[obs + (fid,)] += p
    names = tuple(f"Y{i}" for i in range(len(alphabets))) + ("F",)
    out = JointDist(t, names)
    object.__setattr__(out, "_labels", [list(range(a)) for a in alphabets] + [list(ids)])
    return out


def check_interactive_inequality(proto, law: JointDist, lam: FractionalPartition) -> dict:
    """Compare H(F) with sum_B lam_B H(F | Y_{B^c})."""
    if lam.m != proto.m:
        raise ValueError("fractional partition size does not match protocol")
    tl = proto.transcript_law(law)
    f = proto.m
    lhs = entropy(tl, [f])
    full = frozenset(range(proto.m))
    rhs = 0.0
    for b, w in lam.support().items():
        rhs += w * conditional_entropy(tl, [f], sorted(full - b))
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs >= rhs - 1e-9)}


def is_product_law(law: JointDist, tol: float = 1e-9) -> bool:
    prod = product_of_marginals(law, [[i] for i in range(law.nvars)])
    return bool(np.max(np.abs(prod - law.table)) <= tol)


def check_factorization(proto, law: JointDist) -> float:
    """Largest D(P_{Y|f} || prod_i P_{Y_i|f}) over transcript values f."""
    if not is_product_law(law):
        raise ValueError("observations are not mutually independent")
    tl = proto.transcript_law(law)
    m = proto.m
    gap = 0.0
    for fid in range(tl.arity[m]):
        cond = tl.table[..., fid]
        pf = cond.sum()
        if pf <= 0:
            continue
        cj = JointDist(cond / pf)
        prod = product_of_marginals(cj, [[i] for i in range(m)])
        gap = max(gap, kl_divergence(cj.table, prod))
    return gap


# ----------------------------------------------------------------------------
# one-shot converse


@dataclass(frozen=True)
class ConverseBoundResult:
    bound_bits: float
    h_total: float
    penalty: float
    s_in: float
    nu: float
    key_bits: float
    corollary_bits: float | None = None

    def terms(self) -> dict:
        return {"h_total": self.h_total, "penalty": self.penalty, "s_in": self.s_in, "nu": self.nu}


def penalty_terms(law: JointDist, ys: Sequence[int]) -> dict[frozenset, float]:
    """H(Y_B | Y_{B^c}) for every proper nonempty subset B of the terminals."""
    m = len(ys)
    out = {}
    for b in proper_subsets(m):
        yb = [ys[i] for i in sorted(b)]
        yc = [ys[i] for i in range(m) if i not in b]
        out[b] = conditional_entropy(law, yb, yc)
    return out


def nu_term(m: int, eps: float, key_size: int) -> float:
    return (m + 2) * (eps * math.log2(key_size) + binary_entropy(eps))


def one_shot_bound(law: JointDist, lam: FractionalPartition, eps: float,
                   ys: Sequence[int] | None = None, key: int | str | None = None,
                   transcript: int | str | None = None) -> ConverseBoundResult:
    """Right side of the one-shot converse for a key K and interactive communication F.

    By default the first ``lam.m`` variables are the observations, followed by
    the key and the transcript.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    m = lam.m
    ys = list(range(m)) if ys is None else list(law.indices(ys))
    if len(ys) != m:
        raise ValueError("number of observation variables does not match the partition")
    k = law.index(m if key is None else key)
    f = law.index(m + 1 if transcript is None else transcript)
    h_total = entropy(law, ys)
    terms = penalty_terms(law, ys)
    penalty = sum(w * terms[b] for b, w in lam.support().items())
    s_in = security_index(law, k, [f])
    key_size = law.arity[k]
    nu = nu_term(m, eps, key_size)
    corollary = None
    if lam.source is not None:
        ymarg = law.marginal(ys)
        groups = [sorted(b) for b in lam.source.blocks]
        d = kl_divergence(ymarg.table, product_of_marginals(ymarg, groups))
        corollary = d / (lam.source.k - 1) + s_in + nu
    return ConverseBoundResult(h_total - penalty + s_in + nu, h_total, penalty, s_in, nu,
                               math.log2(key_size), corollary)


def best_bound_lp(law: JointDist, ys: Sequence[int] | None = None) -> tuple[FractionalPartition, float]:
    """Fractional partition maximizing sum_B lam_B H(Y_B | Y_{B^c})."""
    ys = list(range(law.nvars)) if ys is None else list(law.indices(ys))
    m = len(ys)
    if not 2 <= m <= 6:
        raise ValueError("best_bound_lp supports 2 <= m <= 6 terminals")
    subsets = proper_subsets(m)
    terms = penalty_terms(law, ys)
    c = np.array([terms[b] for b in subsets])
    try:
        x, value = lp.maximize(c, a_eq=covering_matrix(m), b_eq=np.ones(m))
    except lp.InfeasibleError as exc:  # pragma: no cover - partitions are always feasible
        raise RuntimeError("covering LP reported infeasible") from exc
    return FractionalPartition(m, dict(zip(subsets, x))), value


# ----------------------------------------------------------------------------
# first-round reduction

F1_ROLES = ("U1", "U2", "U3", "F1", "K", "K1", "K2", "K3", "F")


def f1_constant_reduction(law: JointDist, eps: float):
    """Pick a first-round value f1 under which the key stays a 2*eps secret key.

    ``law`` must carry the named variables ``U1 U2 U3 F1 K K1 K2 K3 F`` (``F``
    is the full transcript). Returns ``(f1_index, law conditioned on F1=f1)``
    with the ``F1`` axis removed. Values are scanned in index order.
    """
    for name in F1_ROLES:
        law.index(name)
    ax = law.index("F1")
    keep = [n for n in law.names if n != "F1"]
    for f1 in range(law.arity[ax]):
        slab = np.take(law.table, f1, axis=ax)
        pf = slab.sum()
        if pf <= 0:
            continue
        cond = JointDist(slab / pf, tuple(keep))
        kt = cond.marginal(["K", "K1", "K2", "K3"]).table
        agree = sum(kt[v, v, v, v] for v in range(min(kt.shape)))
        s = security_index(cond, "K", ["F"])
        if agree >= 1 - 2 * eps - 1e-12 and s <= 2 * eps + 1e-12:
            return f1, cond
    raise ValueError("no first-round value satisfies the recoverability and secrecy premises")
