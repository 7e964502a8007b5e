"""Communication-transmission protocols over a two-input MAC with public discussion.

A protocol has n transmission slots and n + 1 public rounds. Round t (for
t < n) happens before slot t, and round n happens after the last slot. In
each round the listed messages are sent in order. Each message reads its
sender's local view plus the transcript so far:

* terminal 0 sees ``(u1,)``
* terminal 1 sees ``(u2,)``
* terminal 2 sees ``(u3, x3_past)``, the outputs of the slots already run

Channel inputs ``x_i = inputs[i](t, transcript, u_i)`` read only the
transcript up to round t and the terminal's own randomness.

The restriction flags follow the SE / NIC classes:

* ``"se"``: rounds 1..n-1 carry no information, so every message in them
  has alphabet 1.
* ``"nic"``: every message in rounds 1..n-1 comes from terminal 2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .converse import best_bound_lp, nu_term, one_shot_bound
from .info import JointDist, MacChannel, check_budget, security_index
from .randfn import random_function
from .stats import wilson_interval

RESTRICTIONS = ("general", "nic", "se")
PATH_LIMIT = 2**20
EPS_FLOOR = 1e-12


class RestrictionError(ValueError):
    pass


@dataclass(frozen=True)
class CtMessage:
    sender: int
    alphabet: int
    fn: Callable[[tuple, tuple], int]


@dataclass(frozen=True)
class CtProtocol:
    n: int
    u_sizes: tuple[int, int, int]
    rounds: tuple[tuple[CtMessage, ...], ...]
    inputs: tuple[Callable[[int, tuple, int], int], Callable[[int, tuple, int], int]]
    key_size: int
    key_maps: tuple[Callable, Callable, Callable]
    key: Callable | None = None
    restriction: str = "general"
    u_probs: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "u_sizes", tuple(int(s) for s in self.u_sizes))
        object.__setattr__(self, "rounds", tuple(tuple(r) for r in self.rounds))
        if self.n < 1:
            raise ValueError("a protocol needs at least one slot")
        if len(self.u_sizes) != 3 or min(self.u_sizes) < 1:
            raise ValueError("need three positive randomization alphabet sizes")
        if len(self.rounds) != self.n + 1:
            raise ValueError(f"expected {self.n + 1} public rounds, got {len(self.rounds)}")
        if self.key_size < 1:
            raise ValueError("key alphabet must be nonempty")
        if self.restriction not in RESTRICTIONS:
            raise ValueError(f"restriction must be one of {RESTRICTIONS}")
        for t, rnd in enumerate(self.rounds):
            for msg in rnd:
                if msg.sender not in (0, 1, 2):
                    raise ValueError(f"sender {msg.sender} out of range")
                if msg.alphabet < 1:
                    raise ValueError("message alphabet must be positive")
                if 1 <= t < self.n:
                    if self.restriction == "se" and msg.alphabet != 1:
                        raise RestrictionError(f"SE protocol sends a nonconstant message in round {t + 1}")
                    if self.restriction == "nic" and msg.sender != 2:
                        raise RestrictionError(
                            f"NIC protocol has terminal {msg.sender + 1} speaking in round {t + 1}")
        if self.u_probs is not None:
            probs = tuple(np.asarray(p, dtype=float) for p in self.u_probs)
            for p, s in zip(probs, self.u_sizes):
                if p.shape != (s,) or abs(p.sum() - 1) > 1e-9 or (p < 0).any():
                    raise ValueError("u_probs must be pmfs matching u_sizes")
            object.__setattr__(self, "u_probs", probs)

    def u_pmf(self, i: int) -> np.ndarray:
        if self.u_probs is None:
            return np.full(self.u_sizes[i], 1.0 / self.u_sizes[i])
        return self.u_probs[i]

    def key_value(self, u, x3, f) -> int:
        if self.key is None:
            return int(self.key_maps[0](u[0], f))
        return int(self.key(u[0], u[1], u[2], x3, f))


@dataclass(frozen=True)
class SkTrace:
    u: tuple[int, int, int]
    x1: tuple
    x2: tuple
    x3: tuple
    f: tuple
    k: int
    k1: int
    k2: int
    k3: int
    key_size: int

    @property
    def agree(self) -> bool:
        return self.k == self.k1 == self.k2 == self.k3


def _run_round(p: CtProtocol, t: int, u, x3, f: tuple) -> tuple:
    for msg in p.rounds[t]:
        view = (u[2], x3) if msg.sender == 2 else (u[msg.sender],)
        sym = int(msg.fn(view, f))
        if not 0 <= sym < msg.alphabet:
            raise ValueError(f"round {t}: symbol {sym} outside alphabet {msg.alphabet}")
        f = f + (sym,)
    return f


def _inputs(p: CtProtocol, ch: MacChannel, t: int, u, f: tuple) -> tuple[int, int]:
    x1 = int(p.inputs[0](t, f, u[0]))
    x2 = int(p.inputs[1](t, f, u[1]))
    if not (0 <= x1 < ch.in1_size and 0 <= x2 < ch.in2_size):
        raise ValueError(f"slot {t}: inputs ({x1}, {x2}) outside the channel alphabets")
    return x1, x2


def _finish(p: CtProtocol, u, x1, x2, x3, f) -> SkTrace:
    f = _run_round(p, p.n, u, x3, f)
    k1 = int(p.key_maps[0](u[0], f))
    k2 = int(p.key_maps[1](u[1], f))
    k3 = int(p.key_maps[2](u[2], x3, f))
    k = p.key_value(u, x3, f)
    for v in (k, k1, k2, k3):
        if not 0 <= v < p.key_size:
            raise ValueError(f"key value {v} outside declared alphabet {p.key_size}")
    return SkTrace(tuple(u), x1, x2, x3, f, k, k1, k2, k3, p.key_size)


def run_protocol(p: CtProtocol, ch: MacChannel, seed) -> SkTrace:
    """One realization, slot by slot; deterministic given ``seed``."""
    rng = np.random.default_rng(seed)
    u = tuple(int(rng.choice(p.u_sizes[i], p=p.u_pmf(i))) for i in range(3))
    f: tuple = ()
    x1, x2, x3 = (), (), ()
    for t in range(p.n):
        f = _run_round(p, t, u, x3, f)
        a, b = _inputs(p, ch, t, u, f)
        y = int(rng.choice(ch.out_size, p=ch.w[a, b]))
        x1, x2, x3 = x1 + (a,), x2 + (b,), x3 + (y,)
    return _finish(p, u, x1, x2, x3, f)


def run_trials(p: CtProtocol, ch: MacChannel, trials: int, seed: int) -> list[SkTrace]:
    """Independent realizations; trial i uses the i-th child of ``seed``."""
    return [run_protocol(p, ch, np.random.SeedSequence(seed, spawn_key=(i,))) for i in range(trials)]


# ----------------------------------------------------------------------------
# exact enumeration

FIELDS = ("U1", "U2", "U3", "X1", "X2", "X3", "F", "K", "K1", "K2", "K3")
KEY_FIELDS = ("K", "K1", "K2", "K3")


@dataclass
class ProtocolLaw:
    """Every (u, channel path) outcome with its probability."""

    protocol: CtProtocol
    traces: list[SkTrace]
    probs: np.ndarray

    @property
    def agreement(self) -> float:
        ok = np.array([t.agree for t in self.traces])
        return float(self.probs[ok].sum())

    def value(self, trace: SkTrace, name: str):
        return {"U1": trace.u[0], "U2": trace.u[1], "U3": trace.u[2], "X1": trace.x1,
                "X2": trace.x2, "X3": trace.x3, "F": trace.f, "K": trace.k, "K1": trace.k1,
                "K2": trace.k2, "K3": trace.k3}[name]

    def law(self, names: Sequence[str | tuple[str, ...]]) -> JointDist:
        """Joint law of the named fields; a tuple of names is one combined variable.

        Key fields keep the declared alphabet ``range(key_size)``; other
        variables are relabeled compactly in order of first appearance.
        """
        labels = []
        cols = []
        for name in names:
            parts = (name,) if isinstance(name, str) else tuple(name)
            if len(parts) == 1 and parts[0] in KEY_FIELDS:
                lab = {v: v for v in range(self.protocol.key_size)}
                col = [self.value(t, parts[0]) for t in self.traces]
            else:
                lab = {}
                col = []
                for t in self.traces:
                    v = tuple(self.value(t, q) for q in parts)
                    col.append(lab.setdefault(v, len(lab)))
            labels.append(lab)
            cols.append(col)
        shape = tuple(max(1, len(lab)) for lab in labels)
        check_budget(int(np.prod(shape, dtype=np.int64)), "protocol law")
        table = np.zeros(shape)
        np.add.at(table, tuple(np.array(c, dtype=np.int64) for c in cols), self.probs)
        out_names = tuple(n if isinstance(n, str) else "".join(n) for n in names)
        return JointDist(table, out_names)


def enumerate_protocol(p: CtProtocol, ch: MacChannel, limit: int = PATH_LIMIT) -> ProtocolLaw:
    """Exhaustive enumeration of randomness and channel outputs."""
    traces: list[SkTrace] = []
    probs: list[float] = []
    pm = [p.u_pmf(i) for i in range(3)]
    for u in itertools.product(*(range(s) for s in p.u_sizes)):
        pu = pm[0][u[0]] * pm[1][u[1]] * pm[2][u[2]]
        if pu <= 0:
            continue
        stack = [((), (), (), (), pu)]
        for t in range(p.n):
            nxt = []
            for x1, x2, x3, f, pr in stack:
                f = _run_round(p, t, u, x3, f)
                a, b = _inputs(p, ch, t, u, f)
                for y in np.nonzero(ch.w[a, b])[0]:
                    nxt.append((x1 + (a,), x2 + (b,), x3 + (int(y),), f, pr * ch.w[a, b, y]))
            stack = nxt
            if len(traces) + len(stack) > limit:
                raise ValueError(f"more than {limit} protocol paths; use Monte Carlo mode")
        for x1, x2, x3, f, pr in stack:
            traces.append(_finish(p, u, x1, x2, x3, f))
            probs.append(pr)
    return ProtocolLaw(p, traces, np.array(probs))


# ----------------------------------------------------------------------------
# key metrics


def key_metrics(source, maps: tuple | None = None) -> dict:
    """Agreement probability, security index and weak rate of a protocol's key.

    ``source`` is a :class:`ProtocolLaw` (exact metrics) or a list of
    :class:`SkTrace` (plug-in estimates, flagged with the sample count).
    ``maps`` optionally replaces the stored keys: ``(K, K1, K2, K3)`` with
    K(trace), K1(u1, f), K2(u2, f), K3(u3, x3, f).
    """
    traces = source.traces if isinstance(source, ProtocolLaw) else list(source)
    if not traces:
        raise ValueError("no traces")
    key_size = traces[0].key_size
    if maps is not None:
        kf, k1, k2, k3 = maps
        traces = [replace(t, k=int(kf(t)), k1=int(k1(t.u[0], t.f)), k2=int(k2(t.u[1], t.f)),
                          k3=int(k3(t.u[2], t.x3, t.f))) for t in traces]
    n = len(traces[0].x3)
    if isinstance(source, ProtocolLaw):
        law = ProtocolLaw(source.protocol, traces, source.probs)
        agreement = law.agreement
        s_in = security_index(law.law(["K", "F"]), "K", ["F"])
        out = {"agreement_prob": agreement, "s_in": s_in, "mode": "exact"}
    else:
        w = np.full(len(traces), 1.0 / len(traces))
        ok = sum(t.agree for t in traces)
        fake = ProtocolLaw(_stub_protocol(key_size), traces, w)
        s_in = security_index(fake.law(["K", "F"]), "K", ["F"])
        out = {"agreement_prob": ok / len(traces), "s_in": s_in, "mode": "estimate",
               "samples": len(traces), "agreement_ci": list(wilson_interval(ok, len(traces)))}
    s_in = max(0.0, out["s_in"])
    out["s_in"] = s_in
    out["weak_rate"] = (math.log2(key_size) - s_in) / n if n else 0.0
    return out


def _stub_protocol(key_size: int) -> CtProtocol:
    return CtProtocol(1, (1, 1, 1), ((), ()), (lambda t, f, u: 0, lambda t, f, u: 0), key_size,
                      (lambda u, f: 0, lambda u, f: 0, lambda u, x, f: 0))


def disagreement(plaw: ProtocolLaw) -> float:
    """Error probability used as eps in the converse, kept inside (0, 1)."""
    return min(max(1.0 - plaw.agreement, EPS_FLOOR), 1 - EPS_FLOOR)


def converse_check(plaw: ProtocolLaw) -> dict:
    """Compare log|K| with the one-shot bound at the LP-optimal fractional partition.

    Observations are Y1 = U1, Y2 = U2, Y3 = (U3, X3^n); every public message
    is a function of its sender's observation and earlier messages, so the
    transcript is interactive communication over (Y1, Y2, Y3).
    """
    law = plaw.law(["U1", "U2", ("U3", "X3"), "K", "F"])
    lam, _ = best_bound_lp(law, [0, 1, 2])
    eps = disagreement(plaw)
    res = one_shot_bound(law, lam, eps, ys=[0, 1, 2], key="K", transcript="F")
    return {"log_k": math.log2(plaw.protocol.key_size), "bound": res.bound_bits, "eps": eps,
            "s_in": res.s_in, "nu": res.nu, "holds": math.log2(plaw.protocol.key_size) <= res.bound_bits + 1e-6}


def n_letter_check(plaw: ProtocolLaw) -> dict:
    """(1/n)(log|K| - s_in - nu) against the SE or NIC n-letter rate of the trace law."""
    from .rates import n_letter_rate_nic, n_letter_rate_se

    p = plaw.protocol
    eps = disagreement(plaw)
    s_in = security_index(plaw.law(["K", "F"]), "K", ["F"])
    nu = nu_term(3, eps, p.key_size)
    content = (math.log2(p.key_size) - s_in - nu) / p.n
    if p.restriction == "se":
        rate = n_letter_rate_se(plaw.law(["X1", "U1", "X2", "U2", "X3", "U3"]), p.n)
    elif p.restriction == "nic":
        rate = n_letter_rate_nic(plaw.law(["U1", "U2", "U3", "X3"]), p.n)
    else:
        raise ValueError("n-letter rates apply to SE and NIC protocols")
    return {"content": content, "rate": rate, "s_in": s_in, "nu": nu, "eps": eps,
            "holds": content <= rate + 1e-6}


# ----------------------------------------------------------------------------
# random protocols for property checks

def _msgs(rng, senders: Sequence[int], max_alpha: int) -> tuple[CtMessage, ...]:
    out = []
    for s in senders:
        a = int(rng.integers(2, max_alpha + 1))
        out.append(CtMessage(int(s), a, random_function(int(rng.integers(1 << 62)), a)))
    return tuple(out)


def random_ct_protocol(rng: np.random.Generator, ch: MacChannel, restriction: str = "general",
                       n: int | None = None, max_u: int = 2, max_msgs: int = 2,
                       max_alpha: int = 2, key_size: int | None = None,
                       template: str = "random") -> CtProtocol:
    """Random protocol of the given class with K = K1 = f(U1, F).

    ``template="relay"`` draws from a structured family that often yields
    real keys: U1, U2 are n-bit strings sent uncoded (binary inputs),
    terminal 3 publishes a random function of X3^n after the last slot,
    and K is a random function of U1 and that message.

    Terminals 2 and 3 use maximum a posteriori estimates of K from their
    local views; call :func:`with_map_estimators` to install them (the
    placeholders here return 0). SE protocols have a constant first round.
    """
    n = int(rng.integers(1, 4)) if n is None else n
    key_size = int(rng.integers(2, 4)) if key_size is None else key_size
    if template == "relay":
        return _relay_protocol(rng, ch, restriction, n, key_size, max_alpha)
    if template != "random":
        raise ValueError("template must be 'random' or 'relay'")
    u_sizes = tuple(int(rng.integers(1, max_u + 1)) for _ in range(2)) + (int(rng.integers(1, max_u + 1)),)
    u_sizes = (max(2, u_sizes[0]),) + u_sizes[1:]
    rounds = []
    for t in range(n + 1):
        count = int(rng.integers(0, max_msgs + 1))
        if 1 <= t < n and restriction == "se":
            senders = []
        elif 1 <= t < n and restriction == "nic":
            senders = [2] * count
        elif t == 0 and restriction == "se":
            senders = []
        else:
            senders = list(rng.integers(0, 3, size=count))
        rounds.append(_msgs(rng, senders, max_alpha))
    fx1 = random_function(int(rng.integers(1 << 62)), ch.in1_size)
    fx2 = random_function(int(rng.integers(1 << 62)), ch.in2_size)
    fk = random_function(int(rng.integers(1 << 62)), key_size)
    zero2 = lambda u, f: 0
    zero3 = lambda u, x, f: 0
    return CtProtocol(n, u_sizes, tuple(rounds), (fx1, fx2), key_size, (fk, zero2, zero3),
                      restriction=restriction)


def _relay_protocol(rng, ch, restriction, n, key_size, max_alpha) -> CtProtocol:
    if ch.in1_size != 2 or ch.in2_size != 2:
        raise ValueError("relay template needs binary inputs")
    bit = lambda t, f, u, n=n: (u >> (n - 1 - t)) & 1
    rounds: list[tuple] = [()] * n
    if restriction == "nic" and n > 1 and rng.random() < 0.5:
        t = int(rng.integers(1, n))
        rounds[t] = _msgs(rng, [2], 2)
    pub = int(rng.integers(2, max(3, max_alpha + 2)))
    final = [CtMessage(2, pub, random_function(int(rng.integers(1 << 62)), pub))]
    if rng.random() < 0.3:
        final.append(CtMessage(0, 2, random_function(int(rng.integers(1 << 62)), 2)))
    rounds.append(tuple(final))
    fk = random_function(int(rng.integers(1 << 62)), key_size)
    return CtProtocol(n, (2**n, 2**n, 1), tuple(rounds), (bit, bit), key_size,
                      (fk, lambda u, f: 0, lambda u, x, f: 0), restriction=restriction)


def with_map_estimators(p: CtProtocol, ch: MacChannel) -> tuple[CtProtocol, ProtocolLaw]:
    """Replace K2 and K3 by MAP estimates of K from (U2, F) and (U3, X3, F); ties to the lowest key."""
    plaw = enumerate_protocol(p, ch)
    tabs: list[dict] = [{}, {}]
    for t, pr in zip(plaw.traces, plaw.probs):
        for i, view in enumerate(((t.u[1], t.f), (t.u[2], t.x3, t.f))):
            row = tabs[i].setdefault(view, np.zeros(p.key_size))
            row[t.k] += pr
    est = [{v: int(np.argmax(row)) for v, row in tab.items()} for tab in tabs]
    k2 = lambda u, f, e=est[0]: e.get((u, f), 0)
    k3 = lambda u, x, f, e=est[1]: e.get((u, x, f), 0)
    key = p.key or (lambda u1, u2, u3, x3, f, k=p.key_maps[0]: k(u1, f))
    q = replace(p, key_maps=(p.key_maps[0], k2, k3), key=key)
    return q, enumerate_protocol(q, ch)


# ----------------------------------------------------------------------------
# source emulation


@dataclass
class MacBlockCode:
    """Block code without feedback: ``enc1[m1]``, ``enc2[m2]`` are length-n input words."""

    n: int
    enc1: np.ndarray
    enc2: np.ndarray
    channel: MacChannel
    decoder: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.enc1 = np.asarray(self.enc1, dtype=np.int64)
        self.enc2 = np.asarray(self.enc2, dtype=np.int64)
        if self.enc1.shape[1] != self.n or self.enc2.shape[1] != self.n:
            raise ValueError("codewords must have length n")
        if not self.decoder:
            self.decoder = self._ml_table()

    @property
    def sizes(self) -> tuple[int, int]:
        return len(self.enc1), len(self.enc2)

    def _ml_table(self) -> dict:
        """Joint ML decoding over every output word; ties to the lowest (m1, m2)."""
        w = self.channel.w
        m1s, m2s = self.sizes
        outs = self.channel.out_size
        check_budget(m1s * m2s * self.n + outs**self.n, "block-code decoder")
        pairs = np.array([(a, b) for a in range(m1s) for b in range(m2s)])
        if self.channel.is_deterministic():
            table: dict = {}
            ys = np.argmax(w[self.enc1[pairs[:, 0]], self.enc2[pairs[:, 1]]], axis=-1)
            for (a, b), y in zip(pairs, map(tuple, ys)):
                table.setdefault(y, (int(a), int(b)))
            return table
        ys = np.array(list(itertools.product(range(outs), repeat=self.n)))
        best = np.full(len(ys), -1.0)
        arg = np.zeros(len(ys), dtype=np.int64)
        for idx, (a, b) in enumerate(pairs):
            lik = np.prod(w[self.enc1[a], self.enc2[b]][np.arange(self.n), ys], axis=1)
            better = lik > best + 1e-15
            best[better] = lik[better]
            arg[better] = idx
        return {tuple(y): (int(pairs[i][0]), int(pairs[i][1])) for y, i in zip(map(tuple, ys), arg)}

    def decode(self, y: tuple) -> tuple[int, int]:
        return self.decoder.get(tuple(y), (0, 0))


def _bits(v: int, width: int) -> list[int]:
    return [(v >> (width - 1 - i)) & 1 for i in range(width)]


def builtin_se_code(ch: MacChannel, n: int, rate: float, seed: int = 0) -> MacBlockCode:
    """Built-in block code for binary-input MACs at per-user rate ``rate``.

    Each user sends uncoded bits during its own half of the block. At rates
    above 1/2 on the adder MAC the remaining bits go out in the other half
    through a seeded random linear code, superimposed on the other user's
    uncoded bits (the pentagon-corner schedule: the coded user sees an
    erasure channel).
    """
    if ch.in1_size != 2 or ch.in2_size != 2:
        raise ValueError("the built-in code needs binary inputs")
    if n % 2:
        raise ValueError("block length must be even")
    h = n // 2
    b = int(math.floor(rate * n + 1e-9))
    if b > h and not _is_adder(ch):
        raise ValueError("rates above 1/2 are built in only for the adder MAC")
    if b > n:
        raise ValueError("rate above 1 bit per use")
    extra = max(0, b - h)
    g = np.random.default_rng(seed).integers(0, 2, size=(h, extra))
    e1 = np.zeros((2**b, n), dtype=np.int64)
    e2 = np.zeros((2**b, n), dtype=np.int64)
    for m in range(2**b):
        bits = _bits(m, b)
        plain, coded = bits[:min(b, h)], np.array(bits[h:], dtype=np.int64)
        word = (g @ coded) % 2 if extra else np.zeros(h, dtype=np.int64)
        e1[m, :len(plain)] = plain
        e1[m, h:] = word
        e2[m, h:h + len(plain)] = plain
        e2[m, :h] = word
    return MacBlockCode(n, e1, e2, ch)


def _is_adder(ch: MacChannel) -> bool:
    from .info import adder_mac

    ref = adder_mac().w
    return ch.w.shape == ref.shape and bool(np.allclose(ch.w, ref))


def source_emulation_protocol(code: MacBlockCode) -> CtProtocol:
    """SE protocol: U_i = M_i, inputs are the codewords, terminal 3 publishes M1^ xor M2^; K = M1."""
    m1s, m2s = code.sizes
    width = max(m1s, m2s) - 1
    alpha = 1 << max(1, width.bit_length())

    def publish(view, f):
        d1, d2 = code.decode(view[1])
        return d1 ^ d2

    final = (CtMessage(2, alpha, publish),)
    rounds = ((),) * code.n + (final,)
    x1 = lambda t, f, u: int(code.enc1[u, t])
    x2 = lambda t, f, u: int(code.enc2[u, t])
    key_size = m1s
    k1 = lambda u, f: u
    k2 = lambda u, f: (u ^ f[-1]) if (u ^ f[-1]) < key_size else 0
    k3 = lambda u, x3, f: code.decode(x3)[0]
    return CtProtocol(code.n, (m1s, m2s, 1), rounds, (x1, x2), key_size, (k1, k2, k3),
                      restriction="se")


@dataclass
class SeRun:
    protocol: CtProtocol
    code: MacBlockCode
    metrics: dict
    traces: list[SkTrace]

    def report(self) -> dict:
        n = self.protocol.n
        m = self.metrics
        return {"key_rate": math.log2(self.protocol.key_size) / n,
                "agreement": m["agreement_prob"], "s_in": m["s_in"],
                "s_in_mode": m["mode"], "comm_rate": math.log2(self.protocol.rounds[-1][0].alphabet) / n,
                "stage_errors": {"mac_decoding": 1 - m["agreement_prob"]},
                **({"samples": m["samples"], "agreement_ci": m["agreement_ci"]} if "samples" in m else {})}


def source_emulation_sk(ch: MacChannel, n: int, rate_pair: tuple[float, float] | float, seed: int = 0,
                        trials: int | None = None, code: MacBlockCode | None = None) -> SeRun:
    """Key M1 shared through a MAC code and the public modulo sum M1 xor M2.

    With ``trials=None`` the metrics are exact (full enumeration); otherwise
    they are Monte Carlo estimates from ``trials`` seeded runs.
    """
    rates = (rate_pair, rate_pair) if isinstance(rate_pair, (int, float)) else tuple(rate_pair)
    if code is None:
        if abs(rates[0] - rates[1]) > 1e-12:
            raise ValueError("the built-in code is symmetric; pass a code for unequal rates")
        code = builtin_se_code(ch, n, rates[0], seed)
    p = source_emulation_protocol(code)
    if trials is None:
        plaw = enumerate_protocol(p, ch)
        return SeRun(p, code, key_metrics(plaw), plaw.traces)
    traces = run_trials(p, ch, trials, seed)
    return SeRun(p, code, key_metrics(traces), traces)


def protocol_population(rng: np.random.Generator, restriction: str, count: int):
    """Yield ``(protocol with MAP estimators, channel, exact law)`` for property checks.

    The mix is half fully random protocols, three tenths relay protocols and
    one fifth source-emulation protocols with perfect keys (rate 1/2 on the
    adder or XOR MAC), relabeled to ``restriction``.
    """
    from .info import adder_mac, xor_mac

    for i in range(count):
        r = rng.random()
        kind = i % 3
        if kind == 0:
            ch = adder_mac()
        elif kind == 1:
            ch = MacChannel(rng.dirichlet(np.ones(2), size=(2, 2)), "random")
        else:
            ch = xor_mac()
        if r < 0.2:
            ch = adder_mac() if kind != 2 else xor_mac()
            n = int(rng.choice([2, 4]))
            p = replace(source_emulation_protocol(builtin_se_code(ch, n, 0.5)), restriction=restriction)
            yield p, ch, enumerate_protocol(p, ch)
            continue
        template = "relay" if r < 0.5 else "random"
        p = random_ct_protocol(rng, ch, restriction, template=template,
                               max_u=int(rng.integers(2, 5)), max_alpha=int(rng.integers(2, 4)))
        q, plaw = with_map_estimators(p, ch)
        yield q, ch, plaw
