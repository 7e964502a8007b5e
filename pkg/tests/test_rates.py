import time

import numpy as np
import pytest

from macsk.info import FiniteDist, MacChannel, adder_mac, noisy_adder_mac, useless_mac, xor_mac
from macsk.protocols import builtin_se_code, enumerate_protocol, source_emulation_protocol
from macsk.rates import (AlphabetLimitExceeded, compute_rstar, grid_bounds, n_letter_rate_nic,
                         n_letter_rate_se, pentagon, simplex_grid, symmetric_point)


def test_pentagon_invariants(rng):
    for _ in range(50):
        ch = MacChannel(rng.dirichlet(np.ones(3), size=(2, 3)))
        p1 = FiniteDist(rng.dirichlet(np.ones(2)))
        p2 = FiniteDist(rng.dirichlet(np.ones(3)))
        r = pentagon(ch, p1, p2)
        assert 0 <= r.i1 and 0 <= r.i2
        assert max(r.i1, r.i2) <= r.isum + 1e-9 <= r.i1 + r.i2 + 2e-9


def test_pentagon_adder_uniform():
    r = pentagon(adder_mac(), FiniteDist.uniform(2), FiniteDist.uniform(2))
    assert (r.i1, r.i2, r.isum) == pytest.approx((1.0, 1.0, 1.5))
    assert r.symmetric == pytest.approx(0.75)


def test_symmetric_point_of_corners():
    assert symmetric_point(np.array([[1.0, 0.5], [0.5, 1.0]])) == pytest.approx(0.75)
    assert symmetric_point(np.array([[1.0, 0.0], [0.0, 1.0]])) == pytest.approx(0.5)


def test_simplex_grid():
    g = simplex_grid(3, 4)
    assert len(g) == 15 and np.allclose(g.sum(axis=1), 1)


@pytest.mark.parametrize("ch,expected", [(adder_mac(), 0.75), (xor_mac(), 0.5), (useless_mac(), 0.0)])
def test_rstar_oracles(ch, expected):
    t = time.perf_counter()
    r = compute_rstar(ch)
    assert time.perf_counter() - t <= 10
    assert r.rate == pytest.approx(expected, abs=1e-3)
    assert r.rate - r.uncertainty <= r.grid_rate + 1e-12
    if expected == 0:
        assert r.rate == 0.0


def test_rstar_noisy_between_bounds():
    ch = noisy_adder_mac(0.05)
    r = compute_rstar(ch)
    lo, hi = grid_bounds(ch)
    assert lo - 1e-9 <= r.rate <= 0.75


def test_alphabet_limit():
    with pytest.raises(AlphabetLimitExceeded):
        compute_rstar(useless_mac(9, 2, 2))


def test_n_letter_rates_on_se_code():
    ch = adder_mac()
    p = source_emulation_protocol(builtin_se_code(ch, 2, 0.5))
    plaw = enumerate_protocol(p, ch)
    se = n_letter_rate_se(plaw.law(["X1", "U1", "X2", "U2", "X3", "U3"]), p.n)
    nic = n_letter_rate_nic(plaw.law(["U1", "U2", "U3", "X3"]), p.n)
    # uncoded time sharing: each user gets one clean bit in two uses
    assert se == pytest.approx(0.5) and nic == pytest.approx(0.5)
