import math
from dataclasses import replace

import numpy as np
import pytest

from macsk.info import adder_mac, noisy_adder_mac, xor_mac
from macsk.protocols import (CtMessage, CtProtocol, RestrictionError, builtin_se_code, converse_check,
                             enumerate_protocol, key_metrics, n_letter_check, protocol_population,
                             random_ct_protocol, run_protocol, run_trials, source_emulation_protocol,
                             source_emulation_sk, with_map_estimators)

ZERO2 = lambda u, f: 0
ZERO3 = lambda u, x, f: 0


def _proto(rounds, restriction, n=2):
    return CtProtocol(n, (2, 2, 1), rounds, (lambda t, f, u: u, lambda t, f, u: u), 2,
                      (lambda u, f: u, ZERO2, ZERO3), restriction=restriction)


def test_restriction_enforcement():
    talk1 = (CtMessage(0, 2, lambda v, f: v[0]),)
    talk3 = (CtMessage(2, 2, lambda v, f: v[1][-1]),)
    _proto(((), talk1, ()), "general")
    with pytest.raises(RestrictionError):
        _proto(((), talk1, ()), "se")
    with pytest.raises(RestrictionError):
        _proto(((), talk1, ()), "nic")
    _proto(((), talk3, ()), "nic")
    with pytest.raises(RestrictionError):
        _proto(((), talk3, ()), "se")
    with pytest.raises(ValueError):
        _proto(((), ()), "general")


def test_enumeration_sums_to_one_and_matches_sampling():
    ch = noisy_adder_mac(0.1)
    p = source_emulation_protocol(builtin_se_code(ch, 2, 0.5))
    plaw = enumerate_protocol(p, ch)
    assert plaw.probs.sum() == pytest.approx(1.0)
    mc = key_metrics(run_trials(p, ch, 3000, seed=3))
    assert mc["mode"] == "estimate" and mc["samples"] == 3000
    assert abs(mc["agreement_prob"] - plaw.agreement) < 0.03
    lo, hi = mc["agreement_ci"]
    assert lo <= mc["agreement_prob"] <= hi


def test_run_protocol_deterministic():
    ch = adder_mac()
    p = source_emulation_protocol(builtin_se_code(ch, 4, 0.5))
    assert run_protocol(p, ch, 5) == run_protocol(p, ch, 5)


@pytest.mark.parametrize("ch", [adder_mac(), xor_mac()])
def test_source_emulation_perfect_key(ch):
    r = source_emulation_sk(ch, 4, 0.5).report()
    assert r["s_in"] == 0.0 and r["agreement"] == 1.0 and r["s_in_mode"] == "exact"
    assert r["key_rate"] == 0.5


def test_source_emulation_above_half_rate_adder():
    run = source_emulation_sk(adder_mac(), 4, 0.75)
    assert run.protocol.key_size == 8
    assert 0 <= run.metrics["s_in"] <= 3


def test_se_code_rejects_xor_above_half():
    with pytest.raises(ValueError):
        builtin_se_code(xor_mac(), 4, 0.75)


def test_key_metrics_weak_rate():
    ch = adder_mac()
    m = key_metrics(enumerate_protocol(source_emulation_protocol(builtin_se_code(ch, 2, 0.5)), ch))
    assert m["weak_rate"] == pytest.approx(0.5)


def test_map_estimators_never_hurt_agreement(rng):
    ch = adder_mac()
    for _ in range(20):
        p = random_ct_protocol(rng, ch, "general")
        q, plaw = with_map_estimators(p, ch)
        assert plaw.agreement >= enumerate_protocol(p, ch).agreement - 1e-12


@pytest.mark.parametrize("restriction", ["se", "nic", "general"])
def test_population_converse_and_n_letter(restriction, rng):
    for p, ch, plaw in protocol_population(rng, restriction, 30):
        assert p.restriction == restriction
        assert converse_check(plaw)["holds"]
        if restriction != "general":
            assert n_letter_check(plaw)["holds"]


def test_n_letter_requires_restriction():
    ch = adder_mac()
    p = replace(source_emulation_protocol(builtin_se_code(ch, 2, 0.5)), restriction="general")
    with pytest.raises(ValueError):
        n_letter_check(enumerate_protocol(p, ch))


def test_path_limit():
    ch = noisy_adder_mac()
    p = source_emulation_protocol(builtin_se_code(ch, 4, 0.5))
    with pytest.raises(ValueError):
        enumerate_protocol(p, ch, limit=100)
