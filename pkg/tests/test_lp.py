import numpy as np
import pytest
from scipy.optimize import linprog

from macsk import lp


@pytest.mark.parametrize("seed", range(40))
def test_matches_scipy(seed):
    rng = np.random.default_rng(seed)
    n, m_ub, m_eq = rng.integers(2, 8), rng.integers(1, 5), rng.integers(0, 3)
    c = rng.normal(size=n)
    a_ub = rng.random((m_ub, n))
    b_ub = rng.random(m_ub) + 0.5
    a_eq = rng.random((m_eq, n)) if m_eq else None
    b_eq = a_eq @ (rng.random(n) * 0.1) if m_eq else None
    ref = linprog(-c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if ref.status == 3:
        with pytest.raises(lp.UnboundedError):
            lp.maximize(c, a_eq, b_eq, a_ub, b_ub)
        return
    if ref.status == 2:
        with pytest.raises(lp.InfeasibleError):
            lp.maximize(c, a_eq, b_eq, a_ub, b_ub)
        return
    x, val = lp.maximize(c, a_eq, b_eq, a_ub, b_ub)
    assert val == pytest.approx(-ref.fun, abs=1e-7)
    assert np.all(a_ub @ x <= b_ub + 1e-8) and np.all(x >= -1e-12)


def test_infeasible_and_unbounded():
    with pytest.raises(lp.InfeasibleError):
        lp.maximize([1.0], a_eq=[[1.0]], b_eq=[-1.0])
    with pytest.raises(lp.UnboundedError):
        lp.maximize([1.0, 0.0], a_ub=[[0.0, 1.0]], b_ub=[1.0])


def test_degenerate_cycling_example():
    # Beale's classic cycling LP; Bland's rule must terminate at value 1/20
    c = np.array([0.75, -150, 0.02, -6])
    a = np.array([[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]])
    b = np.array([0, 0, 1.0])
    x, val = lp.maximize(c, a_ub=a, b_ub=b)
    assert val == pytest.approx(0.05)
