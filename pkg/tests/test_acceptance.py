"""Acceptance criteria 1-9. Each test prints one ``[criterion n] PASS/FAIL`` line with its measurements."""

import json
import subprocess
import sys
import time

import pytest

from macsk.fbcode import AdderFeedbackCode, adder_code_rate, adder_feedback_code, adder_rate_threshold, simulate_code
from macsk.feedback import FeedbackParams, feedback_sk_scheme
from macsk.info import adder_mac, useless_mac, xor_mac
from macsk.protocols import source_emulation_sk
from macsk.rates import compute_rstar
from macsk.verify import converse_dominance, lemma1, lemma4, lp_dominance, n_letter

SEED = 2024


@pytest.fixture
def report(capsys):
    def emit(criterion, ok, **fields):
        body = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in fields.items())
        with capsys.disabled():
            print(f"\n[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {body}")
        assert ok, body
    return emit


def test_c1_rstar(report):
    out, ok = {}, True
    for name, ch, want, tol in (("adder", adder_mac(), 0.75, 1e-3), ("xor", xor_mac(), 0.5, 1e-3),
                                ("useless", useless_mac(), 0.0, 0.0)):
        t = time.perf_counter()
        r = compute_rstar(ch).rate
        dt = time.perf_counter() - t
        out[name], out[name + "_s"] = r, dt
        ok &= abs(r - want) <= tol and dt <= 10
    report(1, ok, **out)


def test_c2_feedback_code(report):
    t = time.perf_counter()
    rate = adder_code_rate(100_000, 2.0)
    k0 = adder_rate_threshold(2.0, 0.75)
    monotone = all(adder_code_rate(k, 2.0) > 0.75 for k in range(k0, k0 + 2000, 37))
    sim = simulate_code(adder_mac(), adder_feedback_code(1000, 4.0), 10_000, SEED)
    dt = time.perf_counter() - t
    ok = abs(rate - 0.7601) <= 0.003 and monotone and sim["error_prob"] <= 0.01 and dt <= 120
    report(2, ok, rate_k1e5=rate, k0=k0, sim_error=sim["error_prob"], sim_ci_hi=sim["ci"][1], seconds=dt)


def test_c3_pipeline(report):
    t = time.perf_counter()
    r = feedback_sk_scheme(adder_mac(), adder_feedback_code(1000, 1.0),
                           FeedbackParams(blocks=400, delta_sw=0.05, delta_pa=0.05, seed=SEED, runs=10))
    dt = time.perf_counter() - t
    ok = (r["agreement"] >= 0.99 and r["key_rate"] >= 0.70 and r["s_in_per_symbol"] <= 0.05
          and dt <= 600)
    report(3, ok, agreement=r["agreement"], key_rate=r["key_rate"], s_in_total=r["s_in"],
           s_in_per_symbol=r["s_in_per_symbol"], s_in_mode=r["s_in_mode"], runs=r["runs"], seconds=dt)


def test_c4_exact_tiny(report):
    t = time.perf_counter()
    r = feedback_sk_scheme(adder_mac(), AdderFeedbackCode(1, 0.0),
                           FeedbackParams(blocks=6, delta_sw=0.1, delta_pa=0.4, seed=SEED, runs=20),
                           exact=True)
    se = source_emulation_sk(adder_mac(), 4, 0.5).report()
    dt = time.perf_counter() - t
    ok = (r["s_in_mode"] == "exact" and r["uses_per_block"] == 4 and r["s_in"] <= 0.1
          and se["s_in"] == 0.0 and se["s_in_mode"] == "exact" and dt <= 300)
    report(4, ok, n=r["uses_per_block"], N=6, s_in_exact=r["s_in"], key_bits=r["key_bits"],
           se_s_in=se["s_in"], se_agreement=se["agreement"], seconds=dt)


def test_c5_lemma1(report):
    b = lemma1(SEED, 1000, 50)
    c = b.detail["xor_control"]
    ok = b.passed and b.cases == 50_000 and c["lhs"] == pytest.approx(1) and c["rhs"] == pytest.approx(2)
    report(5, ok, checks=b.cases, failures=len(b.failures), xor_lhs=c["lhs"], xor_rhs=c["rhs"])


def test_c6_lemma4(report):
    b = lemma4(SEED, 1000)
    ok = b.passed and b.cases == 1000 and b.detail["max_gap"] <= 1e-9 and b.detail["xor_genie_gap"] == pytest.approx(1.0)
    report(6, ok, protocols=b.cases, max_gap=b.detail["max_gap"], xor_genie_gap=b.detail["xor_genie_gap"])


def test_c7_converse_dominance(report):
    c = converse_dominance(SEED, 200)
    l = lp_dominance(SEED, 200)
    ok = c.passed and l.passed and c.cases >= 200
    report(7, ok, protocols=c.cases, min_margin=c.detail["min_margin"],
           good_keys=c.detail["protocols_with_good_keys"], lp_laws=l.cases, lp_failures=len(l.failures))


def test_c8_n_letter(report):
    b = n_letter(SEED, 100)
    ok = b.passed and b.cases >= 200
    report(8, ok, protocols=b.cases, failures=len(b.failures))


def test_c9_verify_quick(report):
    cmd = [sys.executable, "-m", "macsk.cli", "verify-suite", "quick", "--seed", str(SEED)]
    outs, times = [], []
    for _ in range(2):
        t = time.perf_counter()
        p = subprocess.run(cmd, capture_output=True)
        times.append(time.perf_counter() - t)
        outs.append(p.stdout)
    ok = (p.returncode == 0 and outs[0] == outs[1] and max(times) <= 60
          and json.loads(outs[0])["results"]["passed"])
    report(9, ok, seconds=max(times), identical=outs[0] == outs[1], exit_code=p.returncode)
