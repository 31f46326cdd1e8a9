import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import dense_forward, fd_relative_error, random_fd_case

from ctxtune.errors import InvalidArgument, NumericError, ParseError
from ctxtune.nn import (
    AdamState, GradBundle, Mlp, adam_step, arrays_to_blob, backward, blob_to_arrays, clip_global_norm, forward,
)


def test_default_hidden_stack():
    net = Mlp([3, 64, 64, 1])
    assert [p.shape for p in net.params] == [(3, 64), (64,), (64, 64), (64,), (64, 1), (1,)]


def test_identity_network():
    net = Mlp([3, 3])
    net.set_params([np.eye(3), np.zeros(3)])
    np.testing.assert_array_equal(forward(net, [1.0, -2.0, 3.0]), [1.0, -2.0, 3.0])


@pytest.mark.parametrize("output", ["identity", "tanh"])
def test_zero_weights_give_activation_of_bias(output):
    net = Mlp([2, 3], output=output)
    b = np.array([0.5, -1.0, 2.0])
    net.set_params([np.zeros((2, 3)), b])
    expected = b if output == "identity" else np.tanh(b)
    np.testing.assert_array_equal(forward(net, [4.0, 5.0]), expected)


def test_forward_matches_matrix_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        net, x, *_ = random_fd_case(rng)
        np.testing.assert_allclose(net.forward(x), dense_forward(net, x), rtol=1e-13, atol=1e-13)


def test_forward_rejects_wrong_width():
    with pytest.raises(InvalidArgument):
        Mlp([3, 2]).forward(np.zeros(4))


def test_backward_rejects_wrong_upstream():
    net = Mlp([3, 2])
    with pytest.raises(InvalidArgument):
        backward(net, np.zeros(3), np.zeros(3))


def test_zero_upstream_gives_zero_gradients():
    net = Mlp([4, 8, 2], rng=np.random.default_rng(1))
    grads = backward(net, np.ones(4), np.zeros(2))
    assert all(np.all(g == 0) for g in grads.grads)
    assert grads.norm == 0.0


def test_linear_squared_loss_closed_form():
    rng = np.random.default_rng(2)
    net = Mlp([3, 2], rng=rng)
    x, y = rng.normal(size=3), rng.normal(size=2)
    w, b = net.params
    resid = x @ w + b - y
    grads = backward(net, x, 2 * resid)
    # stored as (in, out), i.e. the transpose of 2 (Wx + b - y) x^T
    np.testing.assert_allclose(grads.grads[0], 2 * np.outer(x, resid), rtol=1e-14)
    np.testing.assert_allclose(grads.grads[1], 2 * resid, rtol=1e-14)


def test_three_layer_finite_differences():
    rng = np.random.default_rng(3)
    net = Mlp([4, 6, 5, 2], rng=rng)
    x = rng.normal(size=(3, 4))
    target = rng.normal(size=(3, 2))
    err = fd_relative_error(net, x, lambda y: float(np.sum((y - target) ** 2)), lambda y: 2 * (y - target))
    assert err <= 1e-4


def test_input_gradient_finite_differences():
    rng = np.random.default_rng(4)
    net = Mlp([3, 5, 1], rng=rng)
    x = rng.normal(size=3)
    _, cache = net.forward_cached(x)
    dx = net.backward(cache, np.ones(1), input_grad=True, param_grads=False).input_grad
    h = 1e-5
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = (net.forward(x + e)[0] - net.forward(x - e)[0]) / (2 * h)
        assert dx[i] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_forward_backward_are_pure():
    net = Mlp([3, 4, 2], rng=np.random.default_rng(5))
    x = np.ones(3)
    before = [p.copy() for p in net.params]
    a = backward(net, x, np.ones(2))
    b = backward(net, x, np.ones(2))
    assert all(np.array_equal(u, v) for u, v in zip(a.grads, b.grads))
    assert all(np.array_equal(u, v) for u, v in zip(before, net.params))


# -------------------------------------------------------------------- adam

def test_adam_zero_grads_leave_params():
    p = [np.array([1.0, -2.0])]
    state = AdamState.create(p)
    adam_step(state, p, [np.zeros(2)], lr=0.1)
    np.testing.assert_array_equal(p[0], [1.0, -2.0])
    assert state.t == 1


@pytest.mark.parametrize("g", [3.0, -0.01, 250.0])
def test_adam_first_step_is_lr_sign(g):
    p = [np.array([0.0])]
    adam_step(AdamState.create(p), p, [np.array([g])], lr=1e-3)
    assert p[0][0] == pytest.approx(-1e-3 * np.sign(g), rel=1e-5)


def test_adam_two_steps_scalar_oracle():
    lr, b1, b2, eps, g = 0.01, 0.9, 0.999, 1e-8, 0.7
    theta, m, v = 1.5, 0.0, 0.0
    for t in (1, 2):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1**t)) / ((v / (1 - b2**t)) ** 0.5 + eps)
    p = [np.array([1.5])]
    state = AdamState.create(p)
    for _ in range(2):
        adam_step(state, p, GradBundle([np.array([g])]), lr)
    assert p[0][0] == pytest.approx(theta, abs=1e-15)


def test_adam_rejects_bad_inputs():
    p = [np.zeros(2)]
    with pytest.raises(InvalidArgument):
        adam_step(AdamState.create(p), p, [np.ones(2)], lr=0.0)
    with pytest.raises(NumericError):
        adam_step(AdamState.create(p), p, [np.array([1.0, np.inf])], lr=0.1)


# -------------------------------------------------------------------- clip

def test_clip_halves_when_norm_two():
    g = GradBundle([np.array([2.0, 0.0]), np.array([0.0])])
    out = clip_global_norm(g, 1.0)
    np.testing.assert_array_equal(out.grads[0], [1.0, 0.0])


def test_clip_leaves_small_bundles():
    g = GradBundle([np.array([0.3, 0.4])])
    assert clip_global_norm(g, 1.0).grads[0] is g.grads[0]


@given(seed=st.integers(0, 10_000), max_norm=st.floats(0.0, 10.0))
@settings(max_examples=60, deadline=None)
def test_clip_norm_is_min_and_idempotent(seed, max_norm):
    rng = np.random.default_rng(seed)
    g = GradBundle([rng.normal(size=(3, 2)) * rng.uniform(0, 5), rng.normal(size=4)])
    once = clip_global_norm(g, max_norm)
    assert once.norm == pytest.approx(min(g.norm, max_norm), abs=1e-12)
    twice = clip_global_norm(once, max_norm)
    assert twice.norm == pytest.approx(once.norm, abs=1e-12)
    assert once.norm <= g.norm + 1e-12


# -------------------------------------------------------------------- blob

def test_blob_roundtrip():
    rng = np.random.default_rng(6)
    arrays = [rng.normal(size=(3, 4)), rng.normal(size=7), np.array([1.0]), np.zeros((0,))]
    back = blob_to_arrays(arrays_to_blob(arrays))
    assert all(np.array_equal(a, b) and a.shape == b.shape for a, b in zip(arrays, back))
    assert arrays_to_blob(back) == arrays_to_blob(arrays)


def test_blob_rejects_garbage():
    with pytest.raises(ParseError):
        blob_to_arrays(b"nope")
    with pytest.raises(ParseError):
        blob_to_arrays(arrays_to_blob([np.ones(2)]) + b"x")
