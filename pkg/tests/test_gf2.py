import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from macsk import gf2
from macsk._ext import gf2_py

try:
    from macsk._ext import gf2 as gf2_c
except ImportError:  # pragma: no cover
    gf2_c = None

IMPLS = [gf2_py] + ([gf2_c] if gf2_c is not None else [])


@st.composite
def systems(draw):
    r = draw(st.integers(1, 30))
    c = draw(st.integers(1, 130))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    a = (rng.random((r, c)) < rng.random()).astype(np.uint8)
    if rng.random() < 0.7:
        b = gf2.matvec(a, rng.integers(0, 2, c))
    else:
        b = rng.integers(0, 2, r).astype(np.uint8)
    return a, b


def _rank_float(a):
    # oracle: rank over GF(2) via explicit elimination on a copy
    m = a.copy().astype(np.uint8)
    r = 0
    for c in range(m.shape[1]):
        piv = np.nonzero(m[r:, c])[0]
        if piv.size == 0:
            continue
        p = r + piv[0]
        m[[r, p]] = m[[p, r]]
        for i in range(m.shape[0]):
            if i != r and m[i, c]:
                m[i] ^= m[r]
        r += 1
        if r == m.shape[0]:
            break
    return r


@given(systems())
def test_solve_all_backends(sys_):
    a, b = sys_
    rk = _rank_float(a)
    for impl in IMPLS:
        x0, null = gf2.solve(a, b, impl)
        consistent = _rank_float(np.column_stack([a, b])) == rk
        assert (x0 is not None) == consistent
        if x0 is None:
            continue
        assert np.array_equal(gf2.matvec(a, x0), b & 1)
        assert len(null) == a.shape[1] - rk
        for v in null:
            assert not gf2.matvec(a, v).any()
        if len(null):
            assert _rank_float(null) == len(null)


@given(systems())
def test_rref_backends_agree(sys_):
    a, _ = sys_
    outs = [gf2.rref(a, impl=impl) for impl in IMPLS]
    for rows, rank, piv in outs:
        assert rank == _rank_float(a)
    assert all(np.array_equal(outs[0][0], o[0]) and outs[0][2] == o[2] for o in outs)


def test_pack_roundtrip(rng):
    bits = rng.integers(0, 2, (5, 200)).astype(np.uint8)
    assert np.array_equal(gf2.unpack(gf2.pack(bits), 200), bits)


def test_backend_reported():
    assert gf2.BACKEND in ("compiled", "python")


def test_pure_python_env(monkeypatch):
    import importlib

    monkeypatch.setenv("MACSK_PURE_PYTHON", "1")
    mod = importlib.reload(gf2)
    try:
        assert mod.BACKEND == "python"
    finally:
        monkeypatch.delenv("MACSK_PURE_PYTHON")
        importlib.reload(gf2)
