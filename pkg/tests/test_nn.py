"""Dense-net engine: shapes, exact values, finite-difference gradient checks."""

import numpy as np
import pytest

from fedassoc.nn import (
    DenseNet,
    GradientSet,
    LrSchedule,
    backward,
    clip_global_norm,
    clone,
    copy_into_target,
    forward,
    init_net,
    load_net,
    lr_at,
    net_fingerprint,
    save_net,
    sgd_apply,
)


def finite_difference_grads(loss_fn, net, h=1e-5):
    """Central differences over every parameter of `net`."""
    d_weights = [np.zeros_like(w) for w in net.weights]
    d_biases = [np.zeros_like(b) for b in net.biases]
    for arrs, outs in ((net.weights, d_weights), (net.biases, d_biases)):
        for arr, out in zip(arrs, outs):
            flat = arr.ravel()
            grad = out.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                up = loss_fn()
                flat[i] = orig - h
                down = loss_fn()
                flat[i] = orig
                grad[i] = (up - down) / (2.0 * h)
    return GradientSet(d_weights, d_biases)


def assert_grads_close(analytic, numeric, tol=1e-4):
    for ga, gn in zip(
        analytic.d_weights + analytic.d_biases, numeric.d_weights + numeric.d_biases
    ):
        denom = np.maximum(np.abs(ga) + np.abs(gn), 1.0)
        assert np.max(np.abs(ga - gn) / denom) < tol


# -- construction -----------------------------------------------------------

def test_init_shapes_and_param_count():
    net = init_net((14, 80, 80, 80, 16), seed_or_rng=0)
    assert net.dims == (14, 80, 80, 80, 16)
    assert len(net.weights) == 4
    assert net.num_params() == 14 * 80 + 80 + 80 * 80 + 80 + 80 * 80 + 80 + 80 * 16 + 16
    assert net.num_params() == 15456


def test_init_deterministic_and_zero_bias():
    a = init_net((5, 7, 3), 123)
    b = init_net((5, 7, 3), 123)
    assert net_fingerprint(a) == net_fingerprint(b)
    for bias in a.biases:
        assert np.all(bias == 0.0)
    bound = np.sqrt(6.0 / (5 + 7))
    assert np.abs(a.weights[0]).max() <= bound


def test_init_rejects_bad_dims():
    with pytest.raises(ValueError):
        init_net((4,), 0)
    with pytest.raises(ValueError):
        init_net((4, 0, 2), 0)
    with pytest.raises(ValueError):
        init_net((4, 2), 0, activation="sigmoid")


# -- forward ------------------------------------------------------------------

def test_forward_zero_net_outputs_zero():
    net = init_net((3, 4, 2), 0)
    for w in net.weights:
        w[...] = 0.0
    out, _ = forward(net, np.ones(3))
    assert np.all(out == 0.0)


def test_forward_identity_single_layer():
    net = DenseNet(weights=[np.eye(4)], biases=[np.zeros(4)])
    x = np.array([0.5, -1.0, 2.0, 0.0])
    out, _ = forward(net, x)
    assert np.array_equal(out, x)


def test_forward_hand_computed():
    # 2-2-1 net evaluated with pencil and paper.
    net = DenseNet(
        weights=[np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[1.0, -1.0]])],
        biases=[np.array([0.5, -0.5]), np.array([0.25])],
        activation="relu",
    )
    x = np.array([1.0, 0.5])
    # z1 = (1*1 + 2*0.5 + 0.5, 3*1 + 4*0.5 - 0.5) = (2.5, 4.5); relu keeps both
    # y = 2.5 - 4.5 + 0.25 = -1.75
    out, _ = forward(net, x)
    assert out[0] == pytest.approx(-1.75, abs=1e-12)


def test_forward_is_pure_and_batched():
    net = init_net((6, 9, 4), 5)
    x = np.random.default_rng(1).random(6)
    o1, _ = forward(net, x)
    o2, _ = forward(net, x)
    assert np.array_equal(o1, o2)
    batch = np.tile(x, (3, 1))
    ob, _ = forward(net, batch)
    assert ob.shape == (3, 4)
    assert np.allclose(ob[1], o1)


def test_forward_rejects_dim_mismatch():
    net = init_net((6, 4), 0)
    with pytest.raises(ValueError):
        forward(net, np.zeros(5))


# -- backward -------------------------------------------------------------------

def test_backward_zero_gradient_gives_zero():
    net = init_net((4, 5, 3), 2)
    out, cache = forward(net, np.ones(4))
    grads, d_in = backward(net, cache, np.zeros(3))
    assert all(np.all(g == 0.0) for g in grads.d_weights + grads.d_biases)
    assert np.all(d_in == 0.0)


def test_backward_input_gradient_identity_layer():
    net = DenseNet(weights=[np.eye(3)], biases=[np.zeros(3)])
    _, cache = forward(net, np.array([1.0, 2.0, 3.0]))
    dy = np.array([0.3, -0.1, 0.7])
    _, d_in = backward(net, cache, dy)
    assert np.array_equal(d_in, dy)


@pytest.mark.parametrize("activation", ["relu", "tanh", "linear"])
def test_backward_matches_finite_differences(activation):
    rng = np.random.default_rng({"relu": 101, "tanh": 202, "linear": 303}[activation])
    for trial in range(7):
        dims = [int(rng.integers(2, 7)) for _ in range(int(rng.integers(2, 5)))]
        net = init_net(dims, rng, activation=activation)
        x = rng.standard_normal((3, dims[0]))
        target = rng.standard_normal((3, dims[-1]))

        def loss_fn():
            out, _ = forward(net, x)
            return float(np.mean((out - target) ** 2))

        out, cache = forward(net, x)
        d_out = 2.0 * (out - target) / out.size
        analytic, _ = backward(net, cache, d_out)
        numeric = finite_difference_grads(loss_fn, net)
        assert_grads_close(analytic, numeric)


def test_backward_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(99)
    net = init_net((5, 8, 3), rng, activation="tanh")
    x = rng.standard_normal(5)

    def loss_of(xv):
        out, _ = forward(net, xv)
        return float(np.sum(out**2))

    out, cache = forward(net, x)
    _, d_in = backward(net, cache, 2.0 * out)
    h = 1e-6
    for i in range(5):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        fd = (loss_of(xp) - loss_of(xm)) / (2 * h)
        assert d_in[i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


# -- updates -----------------------------------------------------------------------

def test_sgd_scalar_case():
    net = DenseNet(weights=[np.array([[1.0]])], biases=[np.array([0.0])])
    grads = GradientSet([np.array([[2.0]])], [np.array([0.0])])
    sgd_apply(net, grads, 0.1)
    assert net.weights[0][0, 0] == pytest.approx(0.8, abs=1e-15)


def test_sgd_zero_lr_keeps_net():
    net = init_net((3, 3), 0)
    before = net_fingerprint(net)
    grads = GradientSet([np.ones((3, 3))], [np.ones(3)])
    sgd_apply(net, grads, 0.0)
    assert net_fingerprint(net) == before


def test_sgd_rejects_non_finite():
    net = init_net((2, 2), 0)
    grads = GradientSet([np.array([[np.nan, 0.0], [0.0, 0.0]])], [np.zeros(2)])
    with pytest.raises(ValueError):
        sgd_apply(net, grads, 0.1)


def test_two_steps_equal_one_summed_step_for_linear_net():
    # Pure SGD is additive in the gradients for a fixed parameter vector.
    g1 = GradientSet([np.array([[2.0]])], [np.array([1.0])])
    g2 = GradientSet([np.array([[-0.5]])], [np.array([3.0])])
    net_a = DenseNet(weights=[np.array([[1.0]])], biases=[np.array([0.5])])
    net_b = clone(net_a)
    sgd_apply(net_a, g1, 0.2)
    sgd_apply(net_a, g2, 0.2)
    summed = GradientSet(
        [g1.d_weights[0] + g2.d_weights[0]], [g1.d_biases[0] + g2.d_biases[0]]
    )
    sgd_apply(net_b, summed, 0.2)
    assert net_a.weights[0][0, 0] == pytest.approx(net_b.weights[0][0, 0], rel=1e-12)
    assert net_a.biases[0][0] == pytest.approx(net_b.biases[0][0], rel=1e-12)


def test_clip_global_norm():
    g = GradientSet([np.array([[3.0, 4.0]])], [np.zeros(1)])
    norm = clip_global_norm([g], 1.0)
    assert norm == pytest.approx(5.0)
    assert g.global_norm() == pytest.approx(1.0)
    g2 = GradientSet([np.array([[0.3, 0.4]])], [np.zeros(1)])
    clip_global_norm([g2], np.inf)
    assert g2.global_norm() == pytest.approx(0.5)


# -- target copies --------------------------------------------------------------------

def test_copy_into_target_bit_equal_and_frozen():
    main = init_net((4, 6, 2), 11)
    target = init_net((4, 6, 2), 12)
    copy_into_target(main, target)
    assert net_fingerprint(main) == net_fingerprint(target)
    rng = np.random.default_rng(3)
    for _ in range(100):
        x = rng.random(4)
        om, _ = forward(main, x)
        ot, _ = forward(target, x)
        assert np.array_equal(om, ot)
    # Later main updates leave the target untouched.
    before = net_fingerprint(target)
    grads = GradientSet([np.ones_like(w) for w in main.weights],
                        [np.ones_like(b) for b in main.biases])
    sgd_apply(main, grads, 0.1)
    assert net_fingerprint(target) == before
    assert net_fingerprint(main) != before


def test_copy_is_idempotent():
    main = init_net((3, 3), 1)
    t1 = clone(main)
    copy_into_target(main, t1)
    t2 = clone(t1)
    copy_into_target(t1, t2)
    assert net_fingerprint(t2) == net_fingerprint(main)


def test_copy_rejects_mismatch():
    with pytest.raises(ValueError):
        copy_into_target(init_net((3, 3), 0), init_net((3, 4), 0))


# -- learning-rate schedule --------------------------------------------------------------

def test_lr_schedule_endpoints_and_midpoint():
    sched = LrSchedule(0.01, 0.001, 250)
    assert lr_at(sched, 1) == 0.01
    assert lr_at(sched, 250) == pytest.approx(0.001)
    assert lr_at(sched, 10_000) == pytest.approx(0.001)
    odd = LrSchedule(0.01, 0.001, 11)
    assert lr_at(odd, 6) == pytest.approx(0.0055)


def test_lr_schedule_validation():
    with pytest.raises(ValueError):
        LrSchedule(0.001, 0.01, 10)
    with pytest.raises(ValueError):
        lr_at(LrSchedule(), 0)


# -- checkpoint format ---------------------------------------------------------------------

def test_save_load_round_trip(tmp_path):
    net = init_net((7, 5, 9), 77, activation="tanh")
    path = tmp_path / "net.bin"
    save_net(path, net)
    loaded = load_net(path)
    assert loaded.dims == net.dims
    assert loaded.activation == "tanh"
    assert net_fingerprint(loaded) == net_fingerprint(net)


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOPEnope")
    with pytest.raises(ValueError):
        load_net(path)
