import itertools
import math

import numpy as np
import pytest

from macsk.converse import (FractionalPartition, InteractiveProtocol, Message, Partition, all_partitions,
                            best_bound_lp, check_factorization, check_interactive_inequality,
                            covering_matrix, f1_constant_reduction, is_product_law, nu_term,
                            one_shot_bound, partition_to_fractional, penalty_terms, proper_subsets,
                            random_fractional_partition, random_interactive_protocol, random_law,
                            xor_genie)
from macsk.info import JointDist

BELL = {2: 1, 3: 4, 4: 14, 5: 51}  # partitions with >= 2 blocks = Bell(m) - 1


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_partition_enumeration(m):
    parts = list(all_partitions(m))
    assert len(parts) == BELL[m]
    for p in parts:
        lam = partition_to_fractional(p)
        assert np.allclose(covering_matrix(m) @ lam.vector(), 1, atol=1e-8)


def test_fractional_validation():
    with pytest.raises(ValueError):
        FractionalPartition(3, {frozenset({0, 1}): 1.0})
    with pytest.raises(ValueError):
        Partition((frozenset({0, 1}), frozenset({1, 2})))


@pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
def test_random_fractional_partitions_cover(m, rng):
    for _ in range(10):
        lam = random_fractional_partition(m, rng)
        assert np.allclose(covering_matrix(m) @ lam.vector(), 1, atol=1e-8)


def test_lp_dominates_partitions(rng):
    for _ in range(60):
        m = int(rng.integers(2, 5))
        law = random_law(rng, tuple(int(a) for a in rng.integers(2, 4, size=m)))
        lam, val = best_bound_lp(law)
        terms = penalty_terms(law, list(range(m)))
        assert val == pytest.approx(sum(w * terms[b] for b, w in lam.support().items()), abs=1e-9)
        for p in all_partitions(m):
            pen = sum(w * terms[b] for b, w in partition_to_fractional(p).support().items())
            assert pen <= val + 1e-8


def test_lp_against_scipy(rng):
    from scipy.optimize import linprog

    for _ in range(20):
        m = int(rng.integers(2, 6))
        law = random_law(rng, (2,) * m)
        _, val = best_bound_lp(law)
        terms = penalty_terms(law, list(range(m)))
        c = np.array([terms[b] for b in proper_subsets(m)])
        ref = linprog(-c, A_eq=covering_matrix(m), b_eq=np.ones(m), bounds=(0, None), method="highs")
        assert val == pytest.approx(-ref.fun, abs=1e-8)


def test_lemma1_random(rng):
    for _ in range(100):
        p = random_interactive_protocol(rng)
        law = random_law(rng, p.alphabets)
        for _ in range(5):
            r = check_interactive_inequality(p, law, random_fractional_partition(3, rng))
            assert r["lhs"] >= r["rhs"] - 1e-9


def test_xor_negative_control():
    unif = JointDist(np.full((2, 2), 0.25))
    lam = partition_to_fractional(Partition((frozenset({0}), frozenset({1}))))
    r = check_interactive_inequality(xor_genie(2), unif, lam)
    assert r["lhs"] == pytest.approx(1.0, abs=1e-12) and r["rhs"] == pytest.approx(2.0, abs=1e-12)
    assert not r["holds"]
    assert check_factorization(xor_genie(2), unif) == pytest.approx(1.0, abs=1e-9)


def test_lemma4_random(rng):
    for _ in range(100):
        p = random_interactive_protocol(rng)
        assert check_factorization(p, random_law(rng, p.alphabets, product=True)) <= 1e-9


def test_factorization_requires_product_law(rng):
    law = JointDist(np.array([[0.5, 0], [0, 0.5]]))
    assert not is_product_law(law)
    with pytest.raises(ValueError):
        check_factorization(xor_genie(2), law)


def test_schedule_validation():
    with pytest.raises(ValueError):
        InteractiveProtocol((2, 2), (Message(1, 2, lambda y, f: y, 1), Message(0, 2, lambda y, f: y, 0)))
    with pytest.raises(ValueError):
        InteractiveProtocol((2, 2), (Message(5, 2, lambda y, f: y),))


def _secret_key_law():
    """Y1 = Y2 = Y3 = uniform bit, K = that bit, F constant."""
    t = np.zeros((2, 2, 2, 2, 1))
    for b in range(2):
        t[b, b, b, b, 0] = 0.5
    return JointDist(t)


def test_one_shot_bound_on_shared_bit():
    law = _secret_key_law()
    lam, _ = best_bound_lp(law, [0, 1, 2])
    r = one_shot_bound(law, lam, 1e-6)
    assert r.s_in == pytest.approx(0.0, abs=1e-12)
    assert r.key_bits == 1.0
    assert r.bound_bits >= 1.0 - 1e-9
    # the partition {0},{1},{2} gives H(Y) - (1/2) sum H(Y_B|Y_B^c) = 1 exactly, plus nu
    part = partition_to_fractional(Partition((frozenset({0}), frozenset({1}), frozenset({2}))))
    r2 = one_shot_bound(law, part, 1e-6)
    assert r2.bound_bits == pytest.approx(1.0 + r2.nu, abs=1e-9)
    assert r2.corollary_bits == pytest.approx(r2.bound_bits, abs=1e-9)


def test_nu_term():
    assert nu_term(3, 0.1, 4) == pytest.approx(5 * (0.1 * 2 + 0.4689955935892812))
    with pytest.raises(ValueError):
        one_shot_bound(_secret_key_law(), partition_to_fractional(next(all_partitions(3))), 0.0)


def test_f1_reduction():
    # U1 = U2 = U3 = K = uniform bit, F1 constant, F = F1
    t = np.zeros((2, 2, 2, 1, 2, 2, 2, 2, 1))
    for b in range(2):
        t[b, b, b, 0, b, b, b, b, 0] = 0.5
    law = JointDist(t, ("U1", "U2", "U3", "F1", "K", "K1", "K2", "K3", "F"))
    f1, cond = f1_constant_reduction(law, 0.01)
    assert f1 == 0 and "F1" not in cond.names
