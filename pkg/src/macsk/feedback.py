"""Feedback secret-key pipeline: symmetrized code, Slepian-Wolf feedback, privacy amplification.

N independent blocks of a symmetrized feedback code run in parallel. After
each paired slot t (uses 2t and 2t+1 of every block), terminal 3 publishes
a random binning F_t of the N paired outputs (Y_t1, ..., Y_tN) at rate
H(Y_t | M_1, Y^{t-1}) + delta_sw bits per block. Terminals 1 and 2 decode
the bin with their own messages and earlier reconstructions as side
information, and pick their next inputs from those reconstructions. At the
end every terminal hashes its copy of all outputs with a seeded Toeplitz
matrix, which gives a key of floor(n N (I(Y^n; M_1)/n - delta_pa)) bits.

Paired-slot values are encoded as integers ``(y_odd << bw) | y_even``, with
``bw`` bits per output symbol.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gf2
from .fbcode import AdderFeedbackCode, FeedbackCode, SymmetrizedCode, symmetrize_code
from .info import MacChannel, adder_mac, binary_entropy, check_budget, memory_budget
from .stats import wilson_interval

KERNEL_CAP = 12
Z_SMOOTH = 6.0


def symbol_bits(out_size: int) -> int:
    return max(1, (out_size - 1).bit_length())


def _to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """(..., m) integers -> (..., m * width) bits, most significant first."""
    v = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    return ((v[..., None] >> shifts) & 1).astype(np.uint8).reshape(*v.shape[:-1], -1)


# ----------------------------------------------------------------------------
# hashing


@dataclass(frozen=True)
class HashExtractor:
    """Seeded Toeplitz hash from ``in_bits`` to ``out_bits``; a 2-universal family."""

    seed: int
    in_bits: int
    out_bits: int

    def diagonals(self) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(0x7A,)))
        return rng.integers(0, 2, size=max(0, self.in_bits + self.out_bits - 1), dtype=np.uint8)

    def matrix(self) -> np.ndarray:
        """Dense (out_bits, in_bits) matrix with entry (i, j) = r[i - j + in_bits - 1]."""
        r = self.diagonals()
        i = np.arange(self.out_bits)[:, None]
        j = np.arange(self.in_bits)[None, :]
        return r[i - j + self.in_bits - 1] if self.out_bits else np.zeros((0, self.in_bits), np.uint8)

    def __call__(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8).ravel()
        if bits.size != self.in_bits:
            raise ValueError(f"expected {self.in_bits} input bits, got {bits.size}")
        if self.out_bits == 0:
            return np.zeros(0, dtype=np.uint8)
        r = self.diagonals().astype(np.float64)
        size = 1 << int(math.ceil(math.log2(r.size + bits.size)))
        conv = np.fft.irfft(np.fft.rfft(r, size) * np.fft.rfft(bits.astype(np.float64), size), size)
        seg = conv[self.in_bits - 1:self.in_bits - 1 + self.out_bits]
        return (np.rint(seg).astype(np.int64) & 1).astype(np.uint8)


def privacy_amplify(y_bits: np.ndarray, ext: HashExtractor) -> np.ndarray:
    """Key bits from a terminal's copy of all outputs."""
    return ext(y_bits)


# ----------------------------------------------------------------------------
# Slepian-Wolf binning


@dataclass(frozen=True)
class SwCode:
    """Seeded random binary binning of N symbols of ``width`` bits into ``rows`` bits."""

    seed: tuple
    rows: int
    blocks: int
    width: int

    def matrix(self) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed[0], spawn_key=tuple(self.seed[1:])))
        size = self.rows * self.blocks * self.width
        bits = np.unpackbits(np.frombuffer(rng.bytes((size + 7) // 8), dtype=np.uint8), count=size)
        return bits.reshape(self.rows, self.blocks * self.width)

    def encode(self, values: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
        h = self.matrix() if h is None else h
        return gf2.matvec(h, _to_bits(np.asarray(values)[None, :], self.width)[0])


def sw_rows(entropy: float, blocks: int, delta_sw: float) -> int:
    """Bin size in bits; slots with no conditional uncertainty send nothing."""
    if entropy <= 1e-12:
        return 0
    return int(math.ceil(blocks * (entropy + delta_sw) - 1e-9))


def sw_compress(values: np.ndarray, entropy: float, delta_sw: float, seed: tuple,
                width: int) -> tuple[SwCode, np.ndarray]:
    """Public message F_t for the N slot values ``values``."""
    values = np.asarray(values, dtype=np.int64)
    code = SwCode(tuple(seed), sw_rows(entropy, len(values), delta_sw), len(values), width)
    return code, code.encode(values)


def _affine_basis(points: Sequence[int]) -> list[int]:
    """Basis of the span of {p ^ points[0]} over GF(2), as integers."""
    basis: list[int] = []
    for p in points[1:]:
        v = p ^ points[0]
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return basis


def sw_decode(code: SwCode, f: np.ndarray, cands: np.ndarray, probs: np.ndarray,
              kernel_cap: int = KERNEL_CAP, h: np.ndarray | None = None) -> np.ndarray | None:
    """Most probable candidate sequence in the bin, or None on failure.

    ``cands`` is (N, C) with -1 padding and ``probs`` the matching
    conditional probabilities. Each block's candidates are parametrized by
    their affine hull, the bin equations are solved over GF(2), and the
    solution set is searched for the highest-probability valid assignment
    (ties to the first solution found). More than 2**kernel_cap solutions is
    a failure.
    """
    n, width = code.blocks, code.width
    cands = np.asarray(cands, dtype=np.int64)
    valid = cands >= 0
    base = cands[:, 0]
    if code.rows == 0:
        return base.copy() if (valid.sum(axis=1) == 1).all() else _best_single(cands, probs)
    uniq, inv = np.unique(cands, axis=0, return_inverse=True)
    inv = np.asarray(inv).ravel()
    ubases = [_affine_basis([int(c) for c in r if c >= 0]) for r in uniq]
    udims = np.array([len(bs) for bs in ubases], dtype=np.int64)
    dims = udims[inv]
    rmax = int(dims.max(initial=0))
    h = code.matrix() if h is None else h
    rhs = f ^ gf2.matvec(h, _to_bits(base[None, :], width)[0])
    if rmax == 0:
        return base.copy() if not rhs.any() else None
    udvec = np.zeros((len(uniq), rmax), dtype=np.int64)
    for u, bs in enumerate(ubases):
        udvec[u, :len(bs)] = bs
    dvec = udvec[inv]
    cols = (np.arange(rmax)[None, :] < dims[:, None]).ravel()
    owner = np.repeat(np.arange(n), rmax)[cols]
    dflat = dvec.ravel()[cols]
    dbits = _to_bits(dflat, width).reshape(len(dflat), width)
    a = np.zeros((code.rows, len(dflat)), dtype=np.uint8)
    for w in range(width):
        a ^= h[:, owner * width + w] & dbits[None, :, w]
    if a.shape[1] - code.rows > kernel_cap:
        return None  # the solution set alone exceeds the cap
    x0, null = gf2.solve(a, rhs)
    if x0 is None or len(null) > kernel_cap:
        return None
    logp = np.where(valid & (probs > 0), np.log2(np.where(probs > 0, probs, 1.0)), -np.inf)
    best, best_score = None, -np.inf
    for combo in itertools.product((0, 1), repeat=len(null)):
        z = x0.copy()
        for c, row in zip(combo, null):
            if c:
                z ^= row
        pts = base.copy()
        np.bitwise_xor.at(pts, owner[z.astype(bool)], dflat[z.astype(bool)])
        match = (cands == pts[:, None]) & valid
        if not match.any(axis=1).all():
            continue
        score = float(np.sum(np.max(np.where(match, logp, -np.inf), axis=1)))
        if score > best_score:
            best, best_score = pts, score
    return best


def _best_single(cands, probs):
    idx = np.argmax(np.where(cands >= 0, probs, -1.0), axis=1)
    return cands[np.arange(len(cands)), idx]


# ----------------------------------------------------------------------------
# per-slot conditional laws


class SlotModel:
    """Law of the paired outputs of a symmetrized code, seen from one sender.

    ``candidates(user, t, msgs, past)`` gives, per block, the possible paired
    values of slot t and their probabilities given that user's messages and
    reconstructed earlier pairs.
    """

    code: SymmetrizedCode
    bw: int

    @property
    def n(self) -> int:
        return self.code.base.n

    def entropy(self, t: int) -> float:
        raise NotImplementedError

    def block_entropy(self) -> float:
        raise NotImplementedError

    def mutual_information(self) -> float:
        raise NotImplementedError

    def candidates(self, user: int, t: int, msgs, past: np.ndarray):
        raise NotImplementedError

    def block_surprisal(self, ys: np.ndarray) -> np.ndarray:
        """-log2 P(Y^n) of each realized block (use layout)."""
        raise NotImplementedError


class AdderSlotModel(SlotModel):
    """Closed-form law for the symmetrized two-phase code on the noiseless adder MAC."""

    def __init__(self, code: SymmetrizedCode):
        base = code.base
        if not isinstance(base, AdderFeedbackCode):
            raise TypeError("AdderSlotModel needs the two-phase adder code")
        self.code = code
        self.bw = 2
        self._digits: dict = {}

    def entropy(self, t):
        return 2.0 if t < self.code.base.k else 0.0

    def block_entropy(self):
        base = self.code.base
        return 4 * base.k - 2 * base.expected_overflow_bits()

    def mutual_information(self):
        return self.block_entropy() - 2 * self.code.base.k

    def candidates(self, user, t, msgs, past):
        base = self.code.base
        hat, tilde = msgs
        if t < base.k:
            yo = hat[:, t].astype(np.int64)[:, None] + np.array([0, 0, 1, 1])
            ye = tilde[:, t].astype(np.int64)[:, None] + np.array([0, 1, 0, 1])
            return (yo << 2) | ye, np.full(yo.shape, 0.25)
        key = (user, id(msgs))
        if t == base.k or key not in self._digits:
            odd_role, even_role = (0, 1) if user == 0 else (1, 0)
            po, pe = past[:, :base.k] >> 2, past[:, :base.k] & 3
            do = np.stack([base._digits(odd_role, m, p) for m, p in zip(hat, po)])
            de = np.stack([base._digits(even_role, m, p) for m, p in zip(tilde, pe)])
            self._digits = {k: v for k, v in self._digits.items() if k[0] != user}
            self._digits[key] = (do, de)
        do, de = self._digits[key]
        s = t - base.k
        return ((do[:, s] << 2) | de[:, s])[:, None], np.ones((len(hat), 1))

    def block_surprisal(self, ys):
        base = self.code.base
        out = np.zeros(len(ys))
        for copy in (ys[:, 0::2], ys[:, 1::2]):
            p1 = copy[:, :base.k]
            a = (p1 == 1).sum(axis=1)
            out += (2 * base.k - a) + np.minimum(a, base.budget)
        return out


class LawSlotModel(SlotModel):
    """Slot law read off a full enumeration of a small symmetrized code."""

    def __init__(self, code: SymmetrizedCode, ch: MacChannel):
        self.code = code
        self.bw = symbol_bits(ch.out_size)
        mc = code.message_count
        check_budget(mc * mc * code.n, "symmetrized code enumeration")
        self.records = _enumerate_code(code, ch)
        n = self.n
        self._cond: list[list[dict]] = [[{} for _ in range(n)] for _ in range(2)]
        self._block: dict[tuple, float] = {}
        for m1, m2, y, p in self.records:
            pairs = self._pairs(y)
            self._block[y] = self._block.get(y, 0.0) + p
            for user, own in ((0, m1), (1, m2)):
                for t in range(n):
                    d = self._cond[user][t].setdefault((own, pairs[:t]), {})
                    d[pairs[t]] = d.get(pairs[t], 0.0) + p
        for user in range(2):
            for t in range(n):
                for k, d in self._cond[user][t].items():
                    z = sum(d.values())
                    self._cond[user][t][k] = {v: q / z for v, q in sorted(d.items())}

    def _pairs(self, y: tuple) -> tuple:
        return tuple((y[2 * t] << self.bw) | y[2 * t + 1] for t in range(self.n))

    def _cond_entropy(self, user: int, t: int) -> float:
        mass: dict = {}
        for m1, m2, y, p in self.records:
            own = m1 if user == 0 else m2
            key = (own, self._pairs(y)[:t])
            mass[key] = mass.get(key, 0.0) + p
        h = 0.0
        for key, pk in mass.items():
            for q in self._cond[user][t][key].values():
                if q > 0:
                    h -= pk * q * math.log2(q)
        return h

    def entropy(self, t):
        return self._cond_entropy(0, t)

    def entropy_user2(self, t):
        return self._cond_entropy(1, t)

    def block_entropy(self):
        return -sum(p * math.log2(p) for p in self._block.values() if p > 0)

    def mutual_information(self):
        return self.block_entropy() - sum(self.entropy(t) for t in range(self.n))

    def block_distribution(self) -> dict[tuple, float]:
        return dict(self._block)

    def candidates(self, user, t, msgs, past):
        own = self.code.message_index(msgs)
        rows = []
        for b, m in enumerate(own):
            d = self._cond[user][t].get((m, tuple(int(v) for v in past[b, :t])))
            rows.append(list(d.items()) if d else [(0, 1.0)])
        width = max(len(r) for r in rows)
        cands = np.full((len(rows), width), -1, dtype=np.int64)
        probs = np.zeros((len(rows), width))
        for b, r in enumerate(rows):
            for j, (v, q) in enumerate(r):
                cands[b, j], probs[b, j] = v, q
        return cands, probs

    def block_surprisal(self, ys):
        return np.array([-math.log2(self._block[tuple(int(v) for v in row)]) for row in ys])


def _enumerate_code(code: SymmetrizedCode, ch: MacChannel) -> list[tuple[int, int, tuple, float]]:
    """(m1, m2, output block, probability) for uniform messages."""
    from .fbcode import output_likelihoods

    mc = code.message_count
    base_mc = code.base.message_count
    out = []
    if ch.is_deterministic() and hasattr(code.base, "k"):
        pairs = np.array(list(itertools.product(range(mc), repeat=2)))
        msgs = [_index_messages(code.base, pairs[:, i], base_mc) for i in range(2)]
        from .fbcode import run_blocks

        ys = run_blocks(code, ch, msgs[0], msgs[1], np.random.default_rng(0))
        for (a, b), y in zip(pairs, ys):
            out.append((int(a), int(b), tuple(int(v) for v in y), 1.0 / (mc * mc)))
        return out
    for a, b in itertools.product(range(mc), repeat=2):
        for y, p in output_likelihoods(code, ch, a, b).items():
            out.append((a, b, y, p / (mc * mc)))
    return out


def _index_messages(base: FeedbackCode, idx: np.ndarray, base_mc: int):
    hat, tilde = np.divmod(idx, base_mc)
    if isinstance(base, AdderFeedbackCode):
        from .fbcode import int_to_bits

        return (np.array([int_to_bits(int(v), base.k) for v in hat]),
                np.array([int_to_bits(int(v), base.k) for v in tilde]))
    return hat, tilde


def slot_model(code: SymmetrizedCode, ch: MacChannel) -> SlotModel:
    """Closed form for the adder code on the adder MAC, enumeration for small codes."""
    base = code.base
    is_adder = ch.w.shape == adder_mac().w.shape and np.allclose(ch.w, adder_mac().w)
    if isinstance(base, AdderFeedbackCode) and is_adder and code.message_count**2 * code.n > 2**20:
        return AdderSlotModel(code)
    if code.message_count**2 * code.n <= memory_budget():
        return LawSlotModel(code, ch)
    raise ValueError("no slot law for this code and channel beyond enumerable size")


# ----------------------------------------------------------------------------
# pipeline


@dataclass
class FeedbackParams:
    blocks: int
    delta_sw: float = 0.1
    delta_pa: float = 0.1
    seed: int = 0
    runs: int = 1
    kernel_cap: int = KERNEL_CAP
    threads: int = 1


@dataclass
class FeedbackRun:
    """One pipeline execution: outputs, reconstructions, keys and stage diagnostics."""

    keys: list[np.ndarray]
    f_bits: int
    y_true: np.ndarray
    recon: list[np.ndarray]
    sw_failures: list[int]
    sw_wrong: list[int]
    overflow_blocks: int

    @property
    def agree(self) -> bool:
        return all(np.array_equal(self.keys[0], k) for k in self.keys[1:])


@dataclass
class FeedbackPlan:
    """Everything public and fixed before the run: slot rates, bin sizes, key length."""

    model: SlotModel
    params: FeedbackParams
    entropies: list[float]
    rows: list[int]
    key_bits: int
    target: float

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def uses(self) -> int:
        return 2 * self.model.n

    @property
    def f_bits(self) -> int:
        return sum(self.rows)

    @property
    def y_bits(self) -> int:
        return self.params.blocks * self.uses * self.model.bw

    def extractor(self, run: int) -> HashExtractor:
        seed = int(np.random.SeedSequence(self.params.seed, spawn_key=(run, 1 << 20)).generate_state(1)[0])
        return HashExtractor(seed, self.y_bits, self.key_bits)

    def sw_code(self, run: int, t: int) -> SwCode:
        return SwCode((self.params.seed, run, t), self.rows[t], self.params.blocks, self.model.bw * 2)


def plan_feedback(model: SlotModel, params: FeedbackParams) -> FeedbackPlan:
    n, blocks = model.n, params.blocks
    ent = [model.entropy(t) for t in range(n)]
    rows = [sw_rows(h, blocks, params.delta_sw) for h in ent]
    target = model.mutual_information() / n
    key_bits = max(0, int(math.floor(n * blocks * (target - params.delta_pa) + 1e-9)))
    return FeedbackPlan(model, params, ent, rows, key_bits, target)


def _y_bits(ys: np.ndarray, bw: int) -> np.ndarray:
    return _to_bits(ys, bw).ravel()


def run_feedback_once(plan: FeedbackPlan, ch: MacChannel, run: int = 0) -> FeedbackRun:
    model, params = plan.model, plan.params
    code = model.code
    nb = params.blocks
    rng = np.random.default_rng(np.random.SeedSequence(params.seed, spawn_key=(run,)))
    m1 = code.random_messages(rng, nb)
    m2 = code.random_messages(rng, nb)
    enc = [code.batch_encoder(0, m1), code.batch_encoder(1, m2)]
    y = np.zeros((nb, plan.uses), dtype=np.int64)
    recon = [np.zeros((nb, plan.uses), dtype=np.int64) for _ in range(2)]
    pairs = [np.zeros((nb, plan.n), dtype=np.int64) for _ in range(2)]
    fails, wrong = [0, 0], [0, 0]
    bw = model.bw
    for t in range(plan.n):
        for use in (2 * t, 2 * t + 1):
            x1 = enc[0](use, recon[0])
            x2 = enc[1](use, recon[1])
            y[:, use] = ch.sample(x1, x2, rng)
        truth = (y[:, 2 * t] << bw) | y[:, 2 * t + 1]
        sw = plan.sw_code(run, t)
        h = sw.matrix() if sw.rows else None
        f = sw.encode(truth, h) if sw.rows else np.zeros(0, dtype=np.uint8)
        for user, msgs in ((0, m1), (1, m2)):
            cands, probs = model.candidates(user, t, msgs, pairs[user])
            est = sw_decode(sw, f, cands, probs, params.kernel_cap, h)
            if est is None:
                fails[user] += 1
                est = cands[:, 0]
            if not np.array_equal(est, truth):
                wrong[user] += 1
            pairs[user][:, t] = est
            recon[user][:, 2 * t] = est >> bw
            recon[user][:, 2 * t + 1] = est & ((1 << bw) - 1)
    ext = plan.extractor(run)
    keys = []
    cache: dict[bytes, np.ndarray] = {}
    for copy in (y, recon[0], recon[1]):
        tag = copy.tobytes()
        if tag not in cache:
            cache[tag] = privacy_amplify(_y_bits(copy, bw), ext)
        keys.append(cache[tag])
    overflow = 0
    if isinstance(code.base, AdderFeedbackCode):
        k = code.base.k
        for cp in (y[:, 0::2], y[:, 1::2]):
            overflow += int(((cp[:, :k] == 1).sum(axis=1) > code.base.budget).sum())
    return FeedbackRun(keys, plan.f_bits, y, recon, fails, wrong, overflow)


def leftover_hash_estimate(plan: FeedbackPlan, surprisal: np.ndarray, z: float = Z_SMOOTH) -> dict:
    """Security index estimate from the entropy left after the public bins.

    The smooth min-entropy of the N blocks is approximated by
    N H(Y^n) - z sigma sqrt(N), with sigma the sample standard deviation of
    the per-block surprisal. Public bins remove at most |F| bits. The
    leftover-hash lemma then bounds the distance d from an ideal key by
    Q(z) + 2^(-gap/2) / 2, with gap = H_min - |F| - l, and continuity of
    conditional entropy gives s_in <= d l + h(d).
    """
    nb = plan.params.blocks
    sigma = float(np.std(surprisal, ddof=1)) if len(surprisal) > 1 else 0.0
    hmin = nb * plan.model.block_entropy() - z * sigma * math.sqrt(nb)
    gap = hmin - plan.f_bits - plan.key_bits
    tail = 0.5 * math.erfc(z / math.sqrt(2))
    d = min(1.0, tail + 0.5 * 2.0 ** (-gap / 2) if gap > -2000 else 1.0)
    ell = plan.key_bits
    s_in = min(float(ell), d * ell + (binary_entropy(d) if d < 1 else 0.0)) if ell else 0.0
    return {"s_in": s_in, "distance": d, "gap_bits": gap, "hmin_estimate": hmin,
            "surprisal_std": sigma}


def joint_linear_map(plan: FeedbackPlan, run: int = 0) -> np.ndarray:
    """GF(2) matrix mapping the output bits of all N blocks to (key bits, bin bits).

    Rows: the ``key_bits`` hash rows, then every slot's bins in slot order.
    Columns follow the layout of the hashed string (block, use, bit).
    """
    nb, bw = plan.params.blocks, plan.model.bw
    per_block = plan.uses * bw
    mat = np.zeros((plan.f_bits + plan.key_bits, nb * per_block), dtype=np.uint8)
    mat[:plan.key_bits] = plan.extractor(run).matrix()
    r0 = plan.key_bits
    for t in range(plan.n):
        sw = plan.sw_code(run, t)
        if not sw.rows:
            continue
        h = sw.matrix().reshape(sw.rows, nb, 2 * bw)
        for b in range(nb):
            cols = b * per_block + t * 2 * bw
            mat[r0:r0 + sw.rows, cols:cols + 2 * bw] = h[:, b, :]
        r0 += sw.rows
    return mat


def exact_key_security(plan: FeedbackPlan, run: int = 0) -> dict:
    """Exact s_in(K; F) for the linear bins and hash, by XOR convolution over blocks.

    F and K are linear in the bits of the N i.i.d. output blocks, so their
    joint law is the XOR convolution of the per-block laws of each block's
    contribution. Needs a :class:`LawSlotModel` and 2**(|F| + l) within the
    memory budget. The key is terminal 3's (the hash of the true outputs).
    """
    model = plan.model
    if not isinstance(model, LawSlotModel):
        raise ValueError("exact security needs an enumerated slot law")
    d = plan.f_bits + plan.key_bits
    if d > math.log2(memory_budget()):
        check_budget(2**d, "(K, F) law")
    nb, bw = plan.params.blocks, model.bw
    per_block = plan.uses * bw
    mat = joint_linear_map(plan, run)
    dist = model.block_distribution()
    ys = np.array(list(dist.keys()), dtype=np.int64)
    ps = np.array(list(dist.values()))
    ybits = _to_bits(ys, bw)
    weights = 1 << np.arange(d - 1, -1, -1, dtype=np.int64)
    spec = np.ones(2**d)
    for b in range(nb):
        sub = mat[:, b * per_block:(b + 1) * per_block].astype(np.int64)
        vec = (ybits.astype(np.int64) @ sub.T) & 1
        idx = vec @ weights
        pb = np.zeros(2**d)
        np.add.at(pb, idx, ps)
        spec *= _wht(pb)
    joint = np.clip(_wht(spec) / 2**d, 0.0, None)
    joint /= joint.sum()
    kf = joint.reshape(2**plan.key_bits, 2**plan.f_bits)
    pf = kf.sum(axis=0)
    h_kf = -float(np.sum(kf[kf > 0] * np.log2(kf[kf > 0])))
    h_f = -float(np.sum(pf[pf > 0] * np.log2(pf[pf > 0])))
    s_in = plan.key_bits - (h_kf - h_f)
    return {"s_in": max(0.0, s_in), "h_k_given_f": h_kf - h_f, "f_bits": plan.f_bits,
            "key_bits": plan.key_bits}


def _wht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform of a length-2^d vector."""
    a = a.astype(np.float64).copy()
    n = a.size
    h = 1
    while h < n:
        v = a.reshape(-1, 2, h)
        x, y = v[:, 0, :].copy(), v[:, 1, :]
        v[:, 0, :] += y
        v[:, 1, :] = x - y
        h *= 2
    return a


def feedback_rate_report(code: FeedbackCode, ch: MacChannel | None = None) -> dict:
    """Analytic rates of the symmetrized code, without simulation."""
    ch = adder_mac() if ch is None else ch
    model = slot_model(symmetrize_code(code, ch), ch)
    n = model.n
    info = model.mutual_information()
    return {"code_rate": code.rate_per_user, "key_rate_target": info / (2 * n),
            "info_per_pair_slot": info / n, "block_entropy": model.block_entropy(),
            "slot_entropies": [model.entropy(t) for t in range(n)], "uses": 2 * n}


def feedback_sk_scheme(ch: MacChannel, code: FeedbackCode, params: FeedbackParams,
                       exact: bool | None = None) -> dict:
    """Run the pipeline ``params.runs`` times and report rates, agreement and security.

    ``exact=None`` picks exact security analysis when the (K, F) law fits
    the memory budget.
    """
    sym = symmetrize_code(code, ch)
    model = slot_model(sym, ch)
    plan = plan_feedback(model, params)
    runs = range(params.runs)
    if params.threads > 1 and params.runs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(params.threads) as pool:
            results = list(pool.map(lambda r: run_feedback_once(plan, ch, r), runs))
    else:
        results = [run_feedback_once(plan, ch, r) for r in runs]
    agree = sum(r.agree for r in results)
    uses = params.blocks * plan.uses
    fits = (plan.f_bits + plan.key_bits <= math.log2(memory_budget())
            and isinstance(model, LawSlotModel))
    if exact is None:
        exact = fits
    if exact:
        sec = exact_key_security(plan, 0)
        s_in, mode = sec["s_in"], "exact"
    else:
        surpr = np.concatenate([model.block_surprisal(r.y_true) for r in results])
        sec = leftover_hash_estimate(plan, surpr)
        s_in, mode = sec["s_in"], "estimate"
    lo, hi = wilson_interval(agree, len(results))
    return {
        "key_rate": plan.key_bits / uses,
        "key_bits": plan.key_bits,
        "agreement": agree / len(results),
        "agreement_ci": [lo, hi],
        "runs": len(results),
        "s_in": s_in,
        "s_in_mode": mode,
        "s_in_per_symbol": s_in / uses,
        "comm_rate": plan.f_bits / uses,
        "target_key_rate": plan.target / 2,
        "code_rate": code.rate_per_user,
        "uses_per_block": plan.uses,
        "blocks": params.blocks,
        "stage_errors": {
            "sw_decode_failures": [sum(r.sw_failures[u] for r in results) for u in range(2)],
            "sw_wrong_slots": [sum(r.sw_wrong[u] for r in results) for u in range(2)],
            "overflow_blocks": sum(r.overflow_blocks for r in results),
            "key_mismatch_runs": len(results) - agree,
        },
        "security": sec,
    }
