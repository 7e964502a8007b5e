import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macsk.info import (BudgetExceeded, FiniteDist, JointDist, MacChannel, adder_mac, binary_entropy,
                        channel_pushforward, check_budget, conditional_entropy, entropy, kl_divergence,
                        mutual_information, noisy_adder_mac, product_of_marginals, security_index,
                        useless_mac, xor_mac)


@st.composite
def joint_laws(draw, max_vars=4, max_alpha=3):
    m = draw(st.integers(2, max_vars))
    shape = tuple(draw(st.integers(1, max_alpha)) for _ in range(m))
    size = int(np.prod(shape))
    w = draw(st.lists(st.floats(0, 1), min_size=size, max_size=size))
    t = np.array(w).reshape(shape)
    if t.sum() <= 0:
        t.flat[0] = 1.0
    return JointDist(t / t.sum())


@given(joint_laws())
def test_chain_rule(law):
    a, b = [0], list(range(1, law.nvars))
    assert abs(entropy(law, a + b) - entropy(law, b) - conditional_entropy(law, a, b)) <= 1e-9


@given(joint_laws())
def test_mutual_information_is_kl_to_product(law):
    a, b = [0], list(range(1, law.nvars))
    mi = mutual_information(law, a, b)
    kl = kl_divergence(law.table, product_of_marginals(law, [a, b]))
    assert abs(mi - kl) <= 1e-9
    assert mi >= -1e-12


@given(joint_laws(max_vars=2, max_alpha=4), st.data())
def test_data_processing(law, data):
    f = [data.draw(st.integers(0, 2)) for _ in range(law.arity[1])]
    t = np.zeros((law.arity[0], 3))
    for y, fy in enumerate(f):
        t[:, fy] += law.table[:, y]
    assert mutual_information(JointDist(t), [0], [1]) <= mutual_information(law, [0], [1]) + 1e-9


@given(joint_laws(max_vars=2, max_alpha=4))
def test_security_index_kl_form(law):
    # s_in(K; F) = D(P_KF || U_K x P_F)
    k = law.arity[0]
    pf = law.table.sum(axis=0)
    ref = np.outer(np.full(k, 1 / k), pf)
    assert abs(security_index(law, 0, [1]) - kl_divergence(law.table, ref)) <= 1e-9


def test_normalization_tolerance():
    JointDist(np.array([0.5, 0.5 + 5e-10]))  # within tolerance: renormalized
    with pytest.raises(ValueError):
        JointDist(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        FiniteDist(np.array([1.5, -0.5]))


def test_zero_log_zero_and_named_access():
    law = JointDist(np.array([[0.5, 0.0], [0.0, 0.5]]), ("A", "B"))
    assert entropy(law, ["A"]) == pytest.approx(1.0)
    assert conditional_entropy(law, ["A"], ["B"]) == pytest.approx(0.0)
    assert mutual_information(law, "A", "B") == pytest.approx(1.0)
    assert law.marginal(["B", "A"]).table.shape == (2, 2)


def test_kl_infinite_when_not_absolutely_continuous():
    assert kl_divergence(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == math.inf


def test_binary_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0 == binary_entropy(1.0)


def test_budget(monkeypatch):
    monkeypatch.setenv("MACSK_MEMORY_BUDGET", "10")
    with pytest.raises(BudgetExceeded):
        check_budget(11)
    with pytest.raises(BudgetExceeded):
        JointDist(np.full((4, 4), 1 / 16))


def test_channels_and_json_roundtrip(tmp_path):
    for ch in (adder_mac(), xor_mac(), noisy_adder_mac(0.05), useless_mac()):
        path = tmp_path / "ch.json"
        path.write_text(json.dumps(ch.to_json()))
        assert MacChannel.load(path) == ch
    assert adder_mac().is_deterministic() and adder_mac().is_symmetric()
    assert not noisy_adder_mac().is_deterministic()
    with pytest.raises(ValueError):
        MacChannel(np.ones((2, 2, 2)))
    with pytest.raises(ValueError):
        MacChannel.from_json({"in1": 2, "in2": 2, "out": 3, "w": [[1]]})


def test_channel_sampling_matches_law(rng):
    ch = noisy_adder_mac(0.2)
    x = np.ones(20000, dtype=int)
    y = ch.sample(x, x, rng)
    freq = np.bincount(y, minlength=3) / len(y)
    assert np.allclose(freq, ch.w[1, 1], atol=0.02)


def test_pushforward_uniform_adder():
    law = channel_pushforward(adder_mac(), FiniteDist.uniform(2), FiniteDist.uniform(2))
    assert mutual_information(law, [0, 1], [2]) == pytest.approx(1.5)
