"""Feedback codes for two-input MACs, the two-phase adder code and Monte Carlo evaluation.

A code has per-slot encoders ``encode(role, t, msg, past)`` for role 0 (input
1) and role 1 (input 2), both reading only their own message and the strictly
past channel outputs, and a decoder from the full output block. Batch
encoders run many independent blocks at once; they are what the simulators
use.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .info import JointDist, MacChannel, adder_mac, check_budget
from .stats import wilson_interval

LOG3 = math.log2(3)
CHUNK = 1000


class FeedbackCode:
    """Base class; subclasses define ``n``, ``message_count`` and the scalar maps."""

    n: int
    message_count: int
    in_sizes: tuple[int, int]
    out_size: int

    @property
    def rate_per_user(self) -> float:
        return math.log2(self.message_count) / self.n

    def encode(self, role: int, t: int, msg: int, past: tuple) -> int:
        raise NotImplementedError

    def decode(self, y: tuple) -> tuple[int, int]:
        raise NotImplementedError

    # batch interface: messages are opaque arrays with one row per block
    def random_messages(self, rng: np.random.Generator, count: int):
        return rng.integers(0, self.message_count, size=count)

    def batch_encoder(self, role: int, msgs) -> Callable[[int, np.ndarray], np.ndarray]:
        msgs = np.asarray(msgs)

        def step(t, past):
            return np.array([self.encode(role, t, int(m), tuple(int(v) for v in row[:t]))
                             for m, row in zip(msgs, past)], dtype=np.int64)

        return step

    def batch_decode(self, ys: np.ndarray):
        out = [self.decode(tuple(int(v) for v in row)) for row in ys]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out])

    def messages_equal(self, a, b) -> np.ndarray:
        a, b = np.asarray(a), np.asarray(b)
        return a == b if a.ndim == 1 else np.all(a == b, axis=tuple(range(1, a.ndim)))

    def message_index(self, msgs) -> list[int]:
        return [int(m) for m in np.asarray(msgs)]

    def batch_size(self, msgs) -> int:
        return len(msgs)


@dataclass
class TableFeedbackCode(FeedbackCode):
    """Small code given by callables; ``decoder`` defaults to ML decoding on ``channel``."""

    n: int
    message_count: int
    enc: tuple[Callable[[int, int, tuple], int], Callable[[int, int, tuple], int]]
    decoder: Callable[[tuple], tuple[int, int]] | None = None
    in_sizes: tuple[int, int] = (2, 2)
    out_size: int = 2
    channel: MacChannel | None = None

    def __post_init__(self):
        if self.decoder is None:
            if self.channel is None:
                raise ValueError("need a decoder or a channel for ML decoding")
            table = ml_decode_table(self, self.channel)
            self.decoder = lambda y: table[tuple(y)]

    def encode(self, role, t, msg, past):
        return int(self.enc[role](t, msg, tuple(past)))

    def decode(self, y):
        return self.decoder(tuple(y))


def output_likelihoods(code: FeedbackCode, ch: MacChannel, m1: int, m2: int) -> dict[tuple, float]:
    """P(y^n | m1, m2) for every reachable output block."""
    paths = {(): 1.0}
    for t in range(code.n):
        nxt: dict[tuple, float] = {}
        for past, p in paths.items():
            x1 = code.encode(0, t, m1, past)
            x2 = code.encode(1, t, m2, past)
            for y in np.nonzero(ch.w[x1, x2])[0]:
                key = past + (int(y),)
                nxt[key] = nxt.get(key, 0.0) + p * ch.w[x1, x2, y]
        paths = nxt
    return paths


def ml_decode_table(code: FeedbackCode, ch: MacChannel) -> dict[tuple, tuple[int, int]]:
    """ML decoder over all output blocks; ties go to the lowest (m1, m2)."""
    check_budget(code.message_count**2 * ch.out_size**code.n, "ML decoding table")
    best: dict[tuple, tuple[float, tuple[int, int]]] = {}
    for m1, m2 in itertools.product(range(code.message_count), repeat=2):
        for y, p in output_likelihoods(code, ch, m1, m2).items():
            if y not in best or p > best[y][0] + 1e-15:
                best[y] = (p, (m1, m2))
    table = {y: v[1] for y, v in best.items()}
    for y in itertools.product(range(ch.out_size), repeat=code.n):
        table.setdefault(y, (0, 0))
    return table


def identity_code(ch: MacChannel, messages: int = 2) -> TableFeedbackCode:
    """One channel use, each sender puts its message on the wire; ML decoding."""
    return TableFeedbackCode(1, messages, (lambda t, m, p: m, lambda t, m, p: m),
                             in_sizes=(ch.in1_size, ch.in2_size), out_size=ch.out_size, channel=ch)


def timeshare_code() -> TableFeedbackCode:
    """Uncoded time sharing of one bit per user over two uses (sender 1 first)."""
    enc1 = lambda t, m, p: m if t == 0 else 0
    enc2 = lambda t, m, p: m if t == 1 else 0
    return TableFeedbackCode(2, 2, (enc1, enc2), decoder=lambda y: (y[0], y[1]),
                             in_sizes=(2, 2), out_size=2)


# ----------------------------------------------------------------------------
# two-phase adder code

_T3 = 3**20


def bits_to_int(bits: np.ndarray) -> int:
    bits = np.asarray(bits, dtype=np.uint8)
    if len(bits) == 0:
        return 0
    return int.from_bytes(np.packbits(bits).tobytes(), "big") >> (-len(bits) % 8)


def int_to_bits(v: int, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    v &= (1 << width) - 1
    raw = np.frombuffer(v.to_bytes((width + 7) // 8, "big"), dtype=np.uint8)
    return np.unpackbits(raw)[-width:]


def int_to_ternary(v: int, length: int) -> np.ndarray:
    """Base-3 digits, most significant first."""
    digits = []
    while v:
        v, chunk = divmod(v, _T3)
        for _ in range(20):
            chunk, d = divmod(chunk, 3)
            digits.append(d)
    digits = digits[:length] + [0] * max(0, length - len(digits))
    return np.array(digits[::-1], dtype=np.int64)


def ternary_to_int(digits: np.ndarray) -> int:
    v = 0
    ds = [int(d) for d in digits]
    for i in range(0, len(ds), 20):
        part = ds[i:i + 20]
        chunk = 0
        for d in part:
            chunk = chunk * 3 + d
        v = v * 3 ** len(part) + chunk
    return v


@dataclass
class AdderFeedbackCode(FeedbackCode):
    """Two-phase code for the binary adder MAC.

    Phase 1 (k uses): each sender transmits its k message bits uncoded; an
    output 1 is ambiguous. With feedback both senders learn the ambiguity
    pattern and sender 1's bits at the ambiguous slots. Phase 2 (L uses):
    the senders jointly send that string, padded to ``budget`` bits, as L
    base-3 digits using input pairs (0,0), (0,1), (1,1) for digits 0, 1, 2.
    More than ``budget`` ambiguous slots is a decoding failure.
    """

    k: int
    slack_c: float = 2.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("phase-1 length must be at least 1")
        self.budget = math.ceil(self.k / 2 + self.slack_c * math.sqrt(self.k))
        self.phase2 = math.ceil(self.budget / LOG3) if self.budget > 0 else 0
        while 3**self.phase2 < 2**self.budget:  # guard against float rounding
            self.phase2 += 1
        self.n = self.k + self.phase2
        self.message_count = 2**self.k
        self.in_sizes = (2, 2)
        self.out_size = 3

    @property
    def rate_per_user(self) -> float:
        return self.k / self.n

    # scalar maps, messages as integers with big-endian bits
    def _string(self, role: int, bits: np.ndarray, phase1_out: np.ndarray) -> np.ndarray:
        amb = phase1_out == 1
        s = bits[amb] if role == 0 else 1 - bits[amb]
        out = np.zeros(self.budget, dtype=np.uint8)
        m = min(len(s), self.budget)
        out[:m] = s[:m]
        return out

    def _digits(self, role, bits, phase1_out):
        return int_to_ternary(bits_to_int(self._string(role, bits, phase1_out)), self.phase2)

    @staticmethod
    def _digit_input(role: int, d):
        return (d == 2).astype(np.int64) if role == 0 else (d >= 1).astype(np.int64)

    def encode(self, role, t, msg, past):
        bits = int_to_bits(msg, self.k)
        if t < self.k:
            return int(bits[t])
        d = self._digits(role, bits, np.asarray(past[:self.k]))[t - self.k]
        return int(self._digit_input(role, np.array(d)))

    def decode(self, y):
        m1, m2, _ = self._decode_bits(np.asarray(y, dtype=np.int64))
        return bits_to_int(m1), bits_to_int(m2)

    def _decode_bits(self, y: np.ndarray):
        p1 = np.clip(y[:self.k], 0, 2)
        m1 = (p1 == 2).astype(np.uint8)
        m2 = m1.copy()
        amb = np.nonzero(p1 == 1)[0]
        overflow = len(amb) > self.budget
        digits = np.clip(y[self.k:], 0, 2)
        val = ternary_to_int(digits) if self.phase2 else 0
        if val >= 2**self.budget:
            overflow = True
            val %= 2**self.budget
        s = int_to_bits(val, self.budget)
        use = min(len(amb), self.budget)
        m1[amb[:use]] = s[:use]
        m2[amb[:use]] = 1 - s[:use]
        return m1, m2, overflow

    # batch interface: messages are (blocks, k) bit arrays
    def random_messages(self, rng, count):
        return rng.integers(0, 2, size=(count, self.k), dtype=np.uint8)

    def batch_encoder(self, role, msgs):
        msgs = np.asarray(msgs, dtype=np.uint8)
        cache: dict = {}

        def step(t, past):
            if t < self.k:
                return msgs[:, t].astype(np.int64)
            # phase-1 outputs are final once t reaches k; steps run in order
            if t == self.k or "digits" not in cache:
                cache["digits"] = np.stack([self._digits(role, b, row[:self.k])
                                            for b, row in zip(msgs, past)]) \
                    if len(msgs) else np.zeros((0, self.phase2), dtype=np.int64)
            return self._digit_input(role, cache["digits"][:, t - self.k])

        return step

    def batch_decode(self, ys):
        out1, out2, over = [], [], []
        for row in np.asarray(ys, dtype=np.int64):
            a, b, o = self._decode_bits(row)
            out1.append(a)
            out2.append(b)
            over.append(o)
        self.last_overflow = np.array(over, dtype=bool)
        return np.array(out1), np.array(out2)

    def message_index(self, msgs):
        return [bits_to_int(m) for m in np.asarray(msgs)]

    def expected_overflow_bits(self) -> float:
        """E[(A - budget)^+] for A ~ Binomial(k, 1/2), the ambiguous-slot count."""
        ks = np.arange(self.budget + 1, self.k + 1)
        if ks.size == 0:
            return 0.0
        logp = np.array([_log2_binom(self.k, a) for a in ks]) - self.k
        return float(np.sum((ks - self.budget) * np.exp2(logp)))

    def overflow_probability(self) -> float:
        ks = np.arange(self.budget + 1, self.k + 1)
        if ks.size == 0:
            return 0.0
        return float(np.sum(np.exp2(np.array([_log2_binom(self.k, a) for a in ks]) - self.k)))


def _log2_binom(n: int, r: int) -> float:
    return (math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)) / math.log(2)


def adder_feedback_code(k: int, slack_c: float = 2.0) -> AdderFeedbackCode:
    return AdderFeedbackCode(k, slack_c)


ADDER_ASYMPTOTIC_RATE = 1.0 / (1.0 + 1.0 / (2.0 * LOG3))


def adder_code_rate(k: int, slack_c: float = 2.0) -> float:
    """Per-user rate k / (k + L) of the two-phase code, without building it."""
    budget = math.ceil(k / 2 + slack_c * math.sqrt(k))
    return k / (k + math.ceil(budget / LOG3))


def adder_rate_threshold(slack_c: float = 2.0, target: float = 0.75) -> int:
    """Smallest k0 with per-user rate > target for every k >= k0.

    Beyond an explicit bound the inequality L < k (1/target - 1) follows from
    L <= (k/2 + c sqrt(k) + 1)/log2(3) + 1, a quadratic in sqrt(k); below it
    every k is checked.
    """
    gap = 1.0 / target - 1.0 - 1.0 / (2 * LOG3)
    if gap <= 0:
        raise ValueError("target is not below the asymptotic rate")
    b = slack_c / LOG3
    d = 1.0 + 1.0 / LOG3
    s = (b + math.sqrt(b * b + 4 * gap * d)) / (2 * gap)
    bound = math.ceil(s * s) + 1
    last_bad = 0
    for k in range(1, bound + 1):
        if not adder_code_rate(k, slack_c) > target:
            last_bad = k
    return last_bad + 1


# ----------------------------------------------------------------------------
# simulation


def run_blocks(code: FeedbackCode, ch: MacChannel, m1, m2, rng: np.random.Generator) -> np.ndarray:
    """Transmit one block per message row with perfect output feedback; returns outputs."""
    blocks = code.batch_size(m1)
    ys = np.zeros((blocks, code.n), dtype=np.int64)
    e1, e2 = code.batch_encoder(0, m1), code.batch_encoder(1, m2)
    for t in range(code.n):
        x1, x2 = e1(t, ys), e2(t, ys)
        ys[:, t] = ch.sample(x1, x2, rng)
    return ys


def _chunk_errors(code, ch, seed, index, size):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    m1, m2 = code.random_messages(rng, size), code.random_messages(rng, size)
    ys = run_blocks(code, ch, m1, m2, rng)
    d1, d2 = code.batch_decode(ys)
    ok = code.messages_equal(d1, m1) & code.messages_equal(d2, m2)
    return int(np.sum(~ok))


def simulate_code(ch: MacChannel, code: FeedbackCode, trials: int, seed: int,
                  threads: int = 1) -> dict:
    """Monte Carlo block error probability with a Wilson 95% interval.

    Trials run in fixed-size chunks, each seeded from ``seed`` and its chunk
    index, so the result does not depend on ``threads``.
    """
    if code.in_sizes != (ch.in1_size, ch.in2_size) or code.out_size != ch.out_size:
        raise ValueError("code alphabets do not match the channel")
    sizes = [min(CHUNK, trials - i) for i in range(0, trials, CHUNK)]
    jobs = [(code, ch, seed, i, s) for i, s in enumerate(sizes)]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            errors = sum(pool.map(lambda a: _chunk_errors(*a), jobs))
    else:
        errors = sum(_chunk_errors(*a) for a in jobs)
    lo, hi = wilson_interval(errors, trials)
    return {"error_prob": errors / trials if trials else 0.0, "errors": errors,
            "trials": trials, "ci": [lo, hi], "estimate": True}


# ----------------------------------------------------------------------------
# symmetrization


class SymmetrizedCode(FeedbackCode):
    """Length-2n code: odd uses run the base code on (M1^, M2^), even uses swap roles on (M1~, M2~).

    Slot indices here are 0-based, so base slot t occupies uses 2t and 2t+1.
    A message is the pair (hat, tilde); as an index it is hat * M + tilde.
    """

    def __init__(self, base: FeedbackCode):
        self.base = base
        self.n = 2 * base.n
        self.message_count = base.message_count**2
        self.in_sizes = base.in_sizes
        self.out_size = base.out_size

    @property
    def rate_per_user(self) -> float:
        return self.base.rate_per_user

    def _split(self, msg):
        return divmod(int(msg), self.base.message_count)

    def encode(self, role, t, msg, past):
        hat, tilde = self._split(msg)
        s, odd = divmod(t, 2)
        if odd:
            return self.base.encode(1 - role, s, tilde, tuple(past[1:t:2]))
        return self.base.encode(role, s, hat, tuple(past[0:t:2]))

    def decode(self, y):
        y = tuple(y)
        h1, h2 = self.base.decode(y[0::2])
        t2, t1 = self.base.decode(y[1::2])
        mc = self.base.message_count
        return h1 * mc + t1, h2 * mc + t2

    def random_messages(self, rng, count):
        return (self.base.random_messages(rng, count), self.base.random_messages(rng, count))

    def batch_encoder(self, role, msgs):
        hat, tilde = msgs
        e_odd = self.base.batch_encoder(role, hat)
        e_even = self.base.batch_encoder(1 - role, tilde)

        def step(t, past):
            s, odd = divmod(t, 2)
            if odd:
                return e_even(s, past[:, 1::2])
            return e_odd(s, past[:, 0::2])

        return step

    def batch_decode(self, ys):
        ys = np.asarray(ys)
        h1, h2 = self.base.batch_decode(ys[:, 0::2])
        t2, t1 = self.base.batch_decode(ys[:, 1::2])
        return (h1, t1), (h2, t2)

    def batch_size(self, msgs):
        return self.base.batch_size(msgs[0])

    def messages_equal(self, a, b):
        return self.base.messages_equal(a[0], b[0]) & self.base.messages_equal(a[1], b[1])

    def message_index(self, msgs):
        mc = self.base.message_count
        return [h * mc + t for h, t in zip(self.base.message_index(msgs[0]),
                                            self.base.message_index(msgs[1]))]


def symmetrize_code(code: FeedbackCode, ch: MacChannel) -> SymmetrizedCode:
    if not ch.is_symmetric():
        raise ValueError("symmetrization needs W(x3|x1,x2) = W(x3|x2,x1)")
    return SymmetrizedCode(code)


def code_block_law(code: FeedbackCode, ch: MacChannel) -> JointDist:
    """Exact law of (M1, M2, X3_1, ..., X3_n) for uniform messages."""
    mc = code.message_count
    check_budget(mc * mc * ch.out_size**code.n, "code block law")
    t = np.zeros((mc, mc) + (ch.out_size,) * code.n)
    for m1, m2 in itertools.product(range(mc), repeat=2):
        for y, p in output_likelihoods(code, ch, m1, m2).items():
            t[(m1, m2) + y] += p / (mc * mc)
    names = ("M1", "M2") + tuple(f"X{t + 1}" for t in range(code.n))
    return JointDist(t, names)


def paired_entropies(law: JointDist, sender: str = "M1") -> list[float]:
    """H(Y_t | M, Y^{t-1}) for the paired outputs Y_t = (X_{2t+1}, X_{2t+2}) of a symmetrized law."""
    from .info import conditional_entropy

    n = (law.nvars - 2) // 2
    out = []
    for t in range(n):
        cur = [2 + 2 * t, 3 + 2 * t]
        prev = list(range(2, 2 + 2 * t))
        out.append(conditional_entropy(law, cur, [law.index(sender)] + prev))
    return out


__all__ = [
    "AdderFeedbackCode", "FeedbackCode", "SymmetrizedCode", "TableFeedbackCode",
    "adder_feedback_code", "adder_code_rate", "adder_rate_threshold", "code_block_law",
    "identity_code", "ml_decode_table", "paired_entropies", "run_blocks", "simulate_code",
    "symmetrize_code", "timeshare_code", "adder_mac",
]
