import itertools
import math

import numpy as np
import pytest

from macsk import gf2
from macsk.fbcode import AdderFeedbackCode, symmetrize_code, timeshare_code
from macsk.feedback import (AdderSlotModel, FeedbackParams, HashExtractor, LawSlotModel, SwCode,
                            _to_bits, _wht, _y_bits, exact_key_security, feedback_rate_report,
                            feedback_sk_scheme, joint_linear_map, plan_feedback, run_feedback_once,
                            slot_model, sw_decode, sw_rows)
from macsk.info import adder_mac, xor_mac


@pytest.mark.parametrize("n_in,n_out", [(1, 1), (7, 3), (100, 60), (257, 255)])
def test_toeplitz_fft_matches_matrix(n_in, n_out, rng):
    ext = HashExtractor(17, n_in, n_out)
    for _ in range(5):
        x = rng.integers(0, 2, n_in).astype(np.uint8)
        assert np.array_equal(ext(x), gf2.matvec(ext.matrix(), x))


def test_toeplitz_structure():
    m = HashExtractor(3, 6, 4).matrix()
    assert all(m[i, j] == m[i + 1, j + 1] for i in range(3) for j in range(5))


def test_wht_involution(rng):
    a = rng.random(16)
    assert np.allclose(_wht(_wht(a)) / 16, a)


def test_sw_rows_zero_for_deterministic_slots():
    assert sw_rows(0.0, 100, 0.1) == 0
    assert sw_rows(2.0, 100, 0.05) == 205


def test_sw_decode_recovers_truth(rng):
    n, width = 200, 4
    cands = np.stack([rng.choice(16, size=2, replace=False) for _ in range(n)])
    truth = cands[np.arange(n), rng.integers(0, 2, n)]
    code = SwCode((1, 2, 3), sw_rows(1.0, n, 0.1), n, width)
    f = code.encode(truth)
    est = sw_decode(code, f, cands, np.full(cands.shape, 0.5))
    assert np.array_equal(est, truth)


def test_sw_decode_fails_when_kernel_too_large(rng):
    n = 100
    cands = np.tile(np.arange(16), (n, 1))
    code = SwCode((0,), 50, n, 4)
    f = code.encode(rng.integers(0, 16, n))
    assert sw_decode(code, f, cands, np.full(cands.shape, 1 / 16)) is None


def test_slot_models_agree_on_small_adder_code():
    ch = adder_mac()
    sym = symmetrize_code(AdderFeedbackCode(3, 0.5), ch)
    a, b = AdderSlotModel(sym), LawSlotModel(sym, ch)
    for t in range(sym.base.n):
        assert a.entropy(t) == pytest.approx(b.entropy(t), abs=1e-9)
    assert a.block_entropy() == pytest.approx(b.block_entropy(), abs=1e-9)
    assert a.mutual_information() == pytest.approx(b.mutual_information(), abs=1e-9)


def test_rate_report_adder():
    r = feedback_rate_report(AdderFeedbackCode(2, 1.0), adder_mac())
    assert r["uses"] == 2 * AdderFeedbackCode(2, 1.0).n
    assert r["key_rate_target"] <= r["code_rate"] + 1e-9 + 0.5


def _brute_force_s_in(plan, run=0):
    """s_in(K; F) by enumerating every combination of block outcomes."""
    model = plan.model
    dist = model.block_distribution()
    ys, ps = list(dist.keys()), list(dist.values())
    mat = joint_linear_map(plan, run)
    cells, fmarg = {}, {}
    for combo in itertools.product(range(len(ys)), repeat=plan.params.blocks):
        v = gf2.matvec(mat, _y_bits(np.array([ys[i] for i in combo]), model.bw))
        p = math.prod(ps[i] for i in combo)
        k, f = v[:plan.key_bits].tobytes(), v[plan.key_bits:].tobytes()
        cells[k, f] = cells.get((k, f), 0.0) + p
        fmarg[f] = fmarg.get(f, 0.0) + p
    h_kf = -sum(p * math.log2(p) for p in cells.values() if p > 0)
    h_f = -sum(p * math.log2(p) for p in fmarg.values() if p > 0)
    return plan.key_bits - (h_kf - h_f)


def test_exact_security_matches_brute_force():
    ch = adder_mac()
    model = slot_model(symmetrize_code(AdderFeedbackCode(1, 0.0), ch), ch)
    assert isinstance(model, LawSlotModel)
    plan = plan_feedback(model, FeedbackParams(blocks=2, delta_sw=0.1, delta_pa=0.3, seed=4))
    assert exact_key_security(plan)["s_in"] == pytest.approx(_brute_force_s_in(plan), abs=1e-9)


def test_linear_map_matches_pipeline():
    ch = adder_mac()
    model = slot_model(symmetrize_code(AdderFeedbackCode(2, 1.0), ch), ch)
    plan = plan_feedback(model, FeedbackParams(blocks=20, delta_sw=0.2, delta_pa=0.2, seed=1))
    run = run_feedback_once(plan, ch, 0)
    mat = joint_linear_map(plan, 0)
    v = gf2.matvec(mat, _y_bits(run.y_true, model.bw))
    assert np.array_equal(v[:plan.key_bits], run.keys[0])


def test_tiny_pipeline_exact():
    r = feedback_sk_scheme(adder_mac(), AdderFeedbackCode(1, 0.0),
                           FeedbackParams(blocks=6, delta_sw=0.1, delta_pa=0.4, seed=0, runs=5))
    assert r["s_in_mode"] == "exact" and r["s_in"] <= 0.1
    assert r["uses_per_block"] == 4


def test_pipeline_deterministic_and_agrees():
    p = FeedbackParams(blocks=200, delta_sw=0.1, delta_pa=0.1, seed=7, runs=2)
    a = feedback_sk_scheme(adder_mac(), AdderFeedbackCode(40, 1.0), p)
    b = feedback_sk_scheme(adder_mac(), AdderFeedbackCode(40, 1.0), p)
    assert a == b
    assert a["agreement"] == 1.0 and a["s_in_mode"] == "estimate"
    assert a["key_rate"] > 0.6


def test_xor_timeshare_pipeline():
    r = feedback_sk_scheme(xor_mac(), timeshare_code(),
                           FeedbackParams(blocks=400, delta_sw=0.1, delta_pa=0.2, seed=0, runs=2))
    assert r["agreement"] == 1.0 and r["key_rate"] == pytest.approx(0.4)
    assert r["s_in_per_symbol"] < 1e-6
