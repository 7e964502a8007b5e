import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macsk.fbcode import (ADDER_ASYMPTOTIC_RATE, LOG3, AdderFeedbackCode, adder_code_rate,
                          adder_feedback_code, adder_rate_threshold, bits_to_int, code_block_law,
                          identity_code, int_to_bits, int_to_ternary, output_likelihoods,
                          paired_entropies, run_blocks, simulate_code, symmetrize_code, ternary_to_int,
                          timeshare_code)
from macsk.info import adder_mac, conditional_entropy, noisy_adder_mac, xor_mac
from macsk.stats import wilson_interval


@given(st.integers(0, 2**200 - 1))
def test_bit_and_ternary_roundtrip(v):
    assert bits_to_int(int_to_bits(v, 200)) == v
    assert ternary_to_int(int_to_ternary(v, 127)) == v


def test_asymptotic_rate_constant():
    assert ADDER_ASYMPTOTIC_RATE == pytest.approx(2 / (2 + 1 / LOG3))
    assert ADDER_ASYMPTOTIC_RATE == pytest.approx(0.7601, abs=1e-4)


def test_rate_formula_matches_code():
    for k, c in [(1, 0.0), (10, 2.0), (1000, 4.0)]:
        code = adder_feedback_code(k, c)
        assert code.rate_per_user == pytest.approx(adder_code_rate(k, c))
        assert 3**code.phase2 >= 2**code.budget


def test_threshold_is_exact():
    k0 = adder_rate_threshold(2.0)
    assert not adder_code_rate(k0 - 1, 2.0) > 0.75
    assert all(adder_code_rate(k, 2.0) > 0.75 for k in range(k0, k0 + 20000, 7))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_adder_code_exhaustive_decoding(k):
    """Every message pair is decoded correctly on the noiseless adder (slack keeps overflow out)."""
    code = AdderFeedbackCode(k, 10.0)
    ch = adder_mac()
    for m1, m2 in itertools.product(range(2**k), repeat=2):
        lik = output_likelihoods(code, ch, m1, m2)
        (y, p), = lik.items()
        assert p == 1.0 and code.decode(y) == (m1, m2)


def test_batch_matches_scalar(rng):
    code = AdderFeedbackCode(6, 0.5)
    ch = adder_mac()
    m1, m2 = code.random_messages(rng, 50), code.random_messages(rng, 50)
    ys = run_blocks(code, ch, m1, m2, rng)
    d1, d2 = code.batch_decode(ys)
    for a, b, y, x1, x2 in zip(d1, d2, ys, m1, m2):
        assert (bits_to_int(a), bits_to_int(b)) == code.decode(tuple(y))
        # scalar encoder reproduces the outputs
        past = ()
        for t in range(code.n):
            u = code.encode(0, t, bits_to_int(x1), past)
            v = code.encode(1, t, bits_to_int(x2), past)
            past = past + (u + v,)
        assert past == tuple(int(v) for v in y)


def test_overflow_accounting(rng):
    code = AdderFeedbackCode(40, 0.0)
    assert 0 < code.overflow_probability() < 1
    assert code.expected_overflow_bits() > 0
    res = simulate_code(adder_mac(), code, 3000, seed=5)
    # every error is an overflow in the noiseless channel
    assert res["error_prob"] <= code.overflow_probability() + 0.03


def test_simulation_deterministic_and_threads():
    code = adder_feedback_code(60, 1.0)
    a = simulate_code(adder_mac(), code, 2500, seed=9)
    b = simulate_code(adder_mac(), code, 2500, seed=9, threads=3)
    assert a == b
    assert a["ci"][0] <= a["error_prob"] <= a["ci"][1]


def test_simulation_alphabet_check():
    with pytest.raises(ValueError):
        simulate_code(xor_mac(), adder_feedback_code(4), 10, 0)


def test_identity_and_timeshare_codes():
    ch = xor_mac()
    res = simulate_code(ch, identity_code(ch), 4000, seed=1)
    assert res["error_prob"] == pytest.approx(0.5, abs=0.03)
    assert simulate_code(ch, timeshare_code(), 500, seed=1)["error_prob"] == 0.0


def test_symmetrized_code_paired_entropies():
    ch = adder_mac()
    code = AdderFeedbackCode(2, 1.0)
    sym = symmetrize_code(code, ch)
    law = code_block_law(sym, ch)
    assert sym.rate_per_user == code.rate_per_user
    h1, h2 = paired_entropies(law, "M1"), paired_entropies(law, "M2")
    assert h1 == pytest.approx(h2)
    assert h1 == pytest.approx([2.0, 2.0, 0.0, 0.0])
    # joint decoding is perfect, so H(M1, M2 | Y) = 0
    assert conditional_entropy(law, ["M1", "M2"], [f"X{t + 1}" for t in range(sym.n)]) < 1e-9


def test_symmetrize_requires_symmetric_channel():
    from macsk.info import MacChannel

    w = np.zeros((2, 2, 2))
    w[:, :, 0] = [[1, 1], [0, 0]]
    w[:, :, 1] = 1 - w[:, :, 0]
    with pytest.raises(ValueError):
        symmetrize_code(timeshare_code(), MacChannel(w))


def test_wilson_interval():
    assert wilson_interval(0, 100)[0] == 0.0
    assert wilson_interval(100, 100)[1] == 1.0
    lo, hi = wilson_interval(10, 100)
    assert lo < 0.1 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_noisy_channel_runs(rng):
    code = adder_feedback_code(20, 2.0)
    res = simulate_code(noisy_adder_mac(0.05), code, 400, seed=2)
    assert 0 < res["error_prob"] <= 1
