"""Autodiff op tests: frozen closed-form oracles plus finite differences."""

import math

import numpy as np
import pytest

from trunklm import autodiff as ad
from trunklm.gradcheck import check_gradients


def test_gelu_zero():
    assert ad.gelu(ad.constant(0.0)).item() == 0.0


def test_gelu_saturates_high():
    assert ad.gelu(ad.constant(10.0)).item() == pytest.approx(10.0, abs=1e-6)


def test_gelu_closed_form_oracle():
    # x * Phi(x) at x = -0.5, Phi from the stdlib erf (independent of both
    # kernel backends).
    x = -0.5
    expected = x * 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
    assert ad.gelu(ad.constant(x)).item() == pytest.approx(expected, rel=1e-12)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    t = ad.constant(rng.normal(size=(5, 7)))
    y = ad.softmax(t).data
    np.testing.assert_allclose(y.sum(axis=1), 1.0, atol=1e-6)


def test_cross_entropy_uniform_logits():
    logits = ad.constant(np.zeros((3, 4)))
    loss = ad.softmax_cross_entropy(logits, np.array([0, 1, 3]))
    assert loss.item() == pytest.approx(math.log(4.0), rel=1e-12)


def test_cross_entropy_saturated():
    logits = np.zeros((1, 5))
    logits[0, 2] = 1000.0
    loss = ad.softmax_cross_entropy(ad.constant(logits), np.array([2]))
    assert loss.item() == pytest.approx(0.0, abs=1e-9)


def test_cross_entropy_hand_computed():
    # logits [1,2,3], target 2: loss = log(e^1 + e^2 + e^3) - 3
    expected = math.log(math.exp(1) + math.exp(2) + math.exp(3)) - 3.0
    loss = ad.softmax_cross_entropy(ad.constant([[1.0, 2.0, 3.0]]), np.array([2]))
    assert loss.item() == pytest.approx(expected, rel=1e-12)


def test_cross_entropy_rejects_bad_target():
    with pytest.raises(ValueError):
        ad.softmax_cross_entropy(ad.constant(np.zeros((2, 3))), np.array([0, 3]))


def test_backward_square_sum():
    x = ad.parameter([1.0, 2.0])
    loss = ad.tsum(ad.mul(x, x))
    ad.backward(loss)
    np.testing.assert_allclose(x.grad, [2.0, 4.0])


def test_backward_unreachable_param_zero_grad():
    x = ad.parameter([1.0, 2.0])
    p = ad.parameter([5.0])
    loss = ad.tsum(ad.mul(x, x))
    ad.backward(loss, params=[x, p])
    np.testing.assert_allclose(p.grad, [0.0])


def test_backward_rejects_non_scalar():
    x = ad.parameter([1.0, 2.0])
    with pytest.raises(ValueError):
        ad.backward(ad.mul(x, x))


def _composite(params):
    a, b, g, be = params["a"], params["b"], params["gamma"], params["beta"]
    h = ad.gelu(ad.matmul(a, b))
    h = ad.layernorm(h, g, be)
    h = ad.softmax(h)
    tgt = np.array([1, 0, 2])
    return ad.softmax_cross_entropy(ad.reshape(ad.matmul(h, b), (3, 4)), tgt)


def test_composite_graph_matches_finite_differences():
    rng = np.random.default_rng(42)
    params = {
        "a": ad.parameter(rng.normal(size=(3, 4))),
        "b": ad.parameter(rng.normal(size=(4, 4))),
        "gamma": ad.parameter(np.ones(4)),
        "beta": ad.parameter(np.zeros(4)),
    }
    check_gradients(lambda: _composite(params), params, rel_tol=1e-4)


@pytest.mark.parametrize("opname", [
    "add", "sub", "mul", "matmul", "concat", "embedding", "gather",
    "rel_gather", "softmax", "layernorm", "gelu", "mean", "where_mask",
])
def test_each_op_matches_finite_differences(opname):
    rng = np.random.default_rng(7)
    x = ad.parameter(rng.normal(size=(2, 3, 4)))
    y = ad.parameter(rng.normal(size=(2, 3, 4)))
    w = ad.parameter(rng.normal(size=(4, 5)))
    params = {"x": x}

    if opname == "add":
        f = lambda: ad.tsum(ad.mul(ad.add(x, y), ad.add(x, y)))
        params["y"] = y
    elif opname == "sub":
        f = lambda: ad.tsum(ad.mul(ad.sub(x, y), ad.sub(x, y)))
        params["y"] = y
    elif opname == "mul":
        f = lambda: ad.tsum(ad.mul(x, y))
        params["y"] = y
    elif opname == "matmul":
        f = lambda: ad.tsum(ad.gelu(ad.matmul(x, w)))
        params["w"] = w
    elif opname == "concat":
        f = lambda: ad.tsum(ad.mul(ad.concat([x, y], axis=1), ad.concat([y, x], axis=1)))
        params["y"] = y
    elif opname == "embedding":
        table = ad.parameter(rng.normal(size=(6, 4)))
        ids = rng.integers(0, 6, size=(2, 3))
        f = lambda: ad.tsum(ad.mul(ad.embedding(table, ids), ad.embedding(table, ids)))
        params = {"table": table}
    elif opname == "gather":
        bi = np.array([0, 1, 1])
        ti = np.array([2, 0, 1])
        f = lambda: ad.tsum(ad.gelu(ad.gather_positions(x, bi, ti)))
    elif opname == "rel_gather":
        t = ad.parameter(rng.normal(size=(2, 2, 3, 5)))
        idx = rng.integers(0, 5, size=(3, 4))
        f = lambda: ad.tsum(ad.mul(ad.rel_gather(t, idx), ad.rel_gather(t, idx)))
        params = {"t": t}
    elif opname == "softmax":
        f = lambda: ad.tsum(ad.mul(ad.softmax(x), y))
        params["y"] = y
    elif opname == "layernorm":
        g = ad.parameter(rng.normal(size=4) + 1.0)
        b = ad.parameter(rng.normal(size=4))
        f = lambda: ad.tsum(ad.gelu(ad.layernorm(x, g, b)))
        params.update({"g": g, "b": b})
    elif opname == "gelu":
        f = lambda: ad.tsum(ad.gelu(x))
    elif opname == "mean":
        f = lambda: ad.tmean(ad.mul(x, x))
    elif opname == "where_mask":
        mask = rng.random((2, 3, 4)) > 0.3
        # Finite fill: -inf fills are exercised through softmax elsewhere.
        f = lambda: ad.tsum(ad.softmax(ad.where_mask(x, mask, -30.0)))
    check_gradients(f, params, rel_tol=1e-4)


def test_masked_softmax_gives_exact_zero_weights():
    scores = ad.constant(np.array([[1.0, 2.0, 3.0]]))
    mask = np.array([[True, False, True]])
    y = ad.softmax(ad.where_mask(scores, mask)).data
    assert y[0, 1] == 0.0
    assert y.sum() == pytest.approx(1.0, abs=1e-12)


def test_dropout_zero_prob_is_identity_node():
    x = ad.parameter(np.ones((2, 2)))
    assert ad.dropout(x, 0.0, None) is x


def test_dropout_scales_and_masks():
    rng = np.random.default_rng(3)
    x = ad.parameter(np.ones((1000,)))
    y = ad.dropout(x, 0.25, rng)
    vals = np.unique(y.data)
    assert set(np.round(vals, 9)) <= {0.0, round(1 / 0.75, 9)}
    assert abs((y.data == 0).mean() - 0.25) < 0.05


def test_stop_gradient_blocks_flow():
    x = ad.parameter([3.0])
    y = ad.stop_gradient(x)
    loss = ad.tsum(ad.mul(y, y))
    ad.backward(loss, params=[x])
    np.testing.assert_allclose(x.grad, [0.0])
