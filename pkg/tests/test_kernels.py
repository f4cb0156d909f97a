"""Backend equivalence: compiled kernels must match the NumPy reference."""

import numpy as np
import pytest

import trunklm.kernels as K
from trunklm.kernels import reference as R

pytestmark = pytest.mark.skipif(
    "compiled" not in K.available_backends(),
    reason="compiled kernel extension not built",
)


def _fused():
    from trunklm.kernels import _fused

    return _fused


def test_gelu_pair_matches():
    rng = np.random.default_rng(0)
    x = np.ascontiguousarray(rng.normal(size=257) * 3)
    d = np.ascontiguousarray(rng.normal(size=257))
    F = _fused()
    np.testing.assert_allclose(F.gelu_forward(x), R.gelu_forward(x), rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(F.gelu_backward(x, d), R.gelu_backward(x, d), rtol=1e-13, atol=1e-15)


def test_softmax_rows_matches_including_neginf():
    rng = np.random.default_rng(1)
    x = np.ascontiguousarray(rng.normal(size=(6, 9)))
    x[0, 3:] = -np.inf
    x[5, :] = -np.inf
    F = _fused()
    np.testing.assert_allclose(F.softmax_rows(x), R.softmax_rows(x), rtol=1e-13, atol=1e-15)
    assert F.softmax_rows(x)[5].sum() == 0.0


def test_layernorm_pair_matches():
    rng = np.random.default_rng(2)
    x = np.ascontiguousarray(rng.normal(size=(11, 16)))
    g = np.ascontiguousarray(rng.normal(size=16) + 1.0)
    b = np.ascontiguousarray(rng.normal(size=16))
    d = np.ascontiguousarray(rng.normal(size=(11, 16)))
    F = _fused()
    yf, mf, rf = F.layernorm_forward(x, g, b, 1e-5)
    yr, mr, rr = R.layernorm_forward(x, g, b, 1e-5)
    np.testing.assert_allclose(yf, yr, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(mf, mr, rtol=1e-12, atol=1e-13)
    np.testing.assert_allclose(rf, rr, rtol=1e-12, atol=1e-13)
    outs_f = F.layernorm_backward(d, x, g, np.asarray(mf), np.asarray(rf))
    outs_r = R.layernorm_backward(d, x, g, mr, rr)
    for a, b_ in zip(outs_f, outs_r):
        np.testing.assert_allclose(a, b_, rtol=1e-11, atol=1e-12)


def test_adam_update_matches():
    rng = np.random.default_rng(3)
    p1 = np.ascontiguousarray(rng.normal(size=64))
    g = np.ascontiguousarray(rng.normal(size=64))
    m1 = np.ascontiguousarray(rng.normal(size=64) * 0.01)
    v1 = np.ascontiguousarray(abs(rng.normal(size=64)) * 0.01)
    p2, m2, v2 = p1.copy(), m1.copy(), v1.copy()
    _fused().adam_update(p1, g, m1, v1, 1e-3, 0.9, 0.999, 1e-8, 0.01, 5)
    R.adam_update(p2, g, m2, v2, 1e-3, 0.9, 0.999, 1e-8, 0.01, 5)
    np.testing.assert_allclose(p1, p2, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(m1, m2, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(v1, v2, rtol=1e-13, atol=1e-15)
