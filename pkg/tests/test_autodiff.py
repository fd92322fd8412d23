import numpy as np
import pytest

from sdda.autodiff import kernels as K
from sdda.autodiff.params import ParamStore
from sdda.autodiff.tensor import Tape, Tensor, backward, current_tape, forward_op
from sdda.exceptions import NonFiniteError, ShapeError, TapeError


def _reference_conv(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    out = np.zeros((n, cout, h - kh + 1, wd - kw + 1))
    for a in range(n):
        for o in range(cout):
            for i in range(out.shape[2]):
                for j in range(out.shape[3]):
                    out[a, o, i, j] = (x[a, :, i:i + kh, j:j + kw] * w[o]).sum()
    return out


def test_tensor_data_is_read_only():
    t = Tensor(np.zeros(3))
    with pytest.raises(ValueError):
        t.data[0] = 1.0


def test_tape_is_scoped_to_context():
    assert current_tape() is None
    with Tape() as tape:
        assert current_tape() is tape
    assert current_tape() is None


def test_backward_rejects_loss_recorded_elsewhere():
    x = Tensor(np.ones(3), requires_grad=True)
    loss = K.project_sum(K.square(x))
    with Tape() as tape:
        pass
    with pytest.raises(TapeError):
        backward(tape, loss)


def test_backward_needs_scalar_loss():
    with Tape() as tape:
        y = K.square(Tensor(np.ones(3), requires_grad=True))
    with pytest.raises(TapeError):
        backward(tape, y)


def test_gradients_accumulate_over_shared_inputs():
    x_data = np.array([1.0, -2.0, 0.5])
    with Tape() as tape:
        x = Tensor(x_data, requires_grad=True)
        loss = K.weighted_sum([K.project_sum(K.square(x)), K.project_sum(x)], [1.0, 3.0])
    grads = backward(tape, loss)
    np.testing.assert_allclose(grads[x], 2.0 * x_data + 3.0)


def test_untracked_input_has_no_gradient_entry():
    with Tape() as tape:
        x = Tensor(np.ones((2, 3)), requires_grad=True)
        c = Tensor(np.ones((2, 3)))
        loss = K.project_sum(x, weights=c.data)
    grads = backward(tape, loss)
    assert c not in grads
    np.testing.assert_array_equal(grads[c], np.zeros((2, 3)))


def test_parameter_gradients_land_in_the_store(rng):
    store = ParamStore()
    store.add("w", rng.standard_normal((4, 3)), "classifier")
    x = rng.standard_normal((5, 3))
    with Tape() as tape:
        loss = K.project_sum(K.linear(Tensor(x), store.param("w")))
    backward(tape, loss)
    np.testing.assert_allclose(store.grads["w"], np.tile(x.sum(axis=0), (4, 1)))


def test_two_branches_over_one_store_sum_their_gradients(rng):
    store = ParamStore()
    store.add("w", rng.standard_normal((2, 3)), "feature")
    xs, xt = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
    with Tape() as tape:
        a = K.project_sum(K.linear(Tensor(xs), store.param("w")))
        b = K.project_sum(K.linear(Tensor(xt), store.param("w")))
        loss = K.weighted_sum([a, b], [1.0, 1.0])
    backward(tape, loss)
    np.testing.assert_allclose(store.grads["w"], np.tile(xs.sum(axis=0) + xt.sum(axis=0), (2, 1)))

    store.zero_grad()
    assert not store.grads["w"].any()


def test_store_rejects_mismatched_gradient():
    store = ParamStore()
    store.add("b", np.zeros(3), "classifier")
    with pytest.raises(ShapeError):
        store.accumulate("b", np.zeros(4))


def test_store_snapshot_restore_keeps_array_identity(rng):
    store = ParamStore()
    store.add("w", rng.standard_normal(5), "feature")
    store.add_buffer("running_mean", np.zeros(2))
    values, buffer = store.values["w"], store.buffers["running_mean"]
    saved = store.snapshot()
    values += 1.0
    buffer += 2.0
    store.restore(saved)
    assert store.values["w"] is values and store.buffers["running_mean"] is buffer
    np.testing.assert_array_equal(values, saved["values"]["w"])
    np.testing.assert_array_equal(buffer, np.zeros(2))


def test_store_counts_by_group():
    store = ParamStore(np.float32)
    store.add("a", np.zeros((2, 3)), "feature")
    store.add("b", np.zeros(4), "classifier")
    assert store.count() == 10
    assert store.count("feature") == 6
    assert store.names("classifier") == ["b"]
    assert store.values["a"].dtype == np.float32
    with pytest.raises(ValueError):
        store.add("a", np.zeros(1), "feature")


def test_overflow_raises_non_finite():
    with pytest.raises(NonFiniteError):
        K.square(Tensor(np.array([1e200])))


def test_log_clamps_and_counts():
    x = np.array([[-1.0, 0.0, 2.0]])
    with Tape() as tape:
        t = Tensor(x, requires_grad=True)
        out = K.log(t)
        loss = K.project_sum(out)
    np.testing.assert_allclose(out.data, [[np.log(K.LOG_FLOOR), np.log(K.LOG_FLOOR), np.log(2.0)]])
    assert tape.counters["log_clamp"] == 2
    grads = backward(tape, loss)
    np.testing.assert_allclose(grads[t], [[0.0, 0.0, 0.5]])


def test_log_clamps_are_counted_without_a_tape():
    K.reset_clamp_events()
    assert current_tape() is None
    K.log(Tensor(np.array([[0.0, -3.0, 1e-9, 4.0]])))
    assert K.clamp_events() == 3
    with Tape():
        K.log(Tensor(np.array([0.0])))
    assert K.clamp_events() == 4
    K.reset_clamp_events()
    assert K.clamp_events() == 0


def test_dropout_is_deterministic_per_generator(rng):
    x = Tensor(rng.standard_normal((4, 10)))
    a = K.dropout(x, 0.5, np.random.default_rng(5))
    b = K.dropout(x, 0.5, np.random.default_rng(5))
    np.testing.assert_array_equal(a.data, b.data)
    kept = a.data != 0
    np.testing.assert_allclose(a.data[kept], 2.0 * x.data[kept])


def test_dropout_off_outside_training(rng):
    x = Tensor(rng.standard_normal((3, 3)))
    np.testing.assert_array_equal(K.dropout(x, 0.5, None, train=False).data, x.data)
    with pytest.raises(ValueError):
        K.dropout(x, 1.0, np.random.default_rng(0))


def test_conv2d_matches_direct_sum(rng):
    x = rng.standard_normal((2, 3, 4, 9))
    w = rng.standard_normal((5, 3, 2, 4))
    out = K.conv2d(Tensor(x), Tensor(w))
    assert out.shape == (2, 5, 3, 6)
    np.testing.assert_allclose(out.data, _reference_conv(x, w), atol=1e-12)


def test_same_padding_keeps_width(rng):
    x = Tensor(rng.standard_normal((1, 1, 1, 20)))
    for k in (3, 4, 64):
        if k > 20:
            x = Tensor(rng.standard_normal((1, 1, 1, 80)))
        out = K.conv2d(x, Tensor(rng.standard_normal((2, 1, 1, k))), padding="same")
        assert out.shape[-1] == x.shape[-1]


def test_depthwise_conv_filters_each_map_separately(rng):
    x = rng.standard_normal((2, 3, 4, 5))
    w = rng.standard_normal((3, 1, 4, 1))
    out = K.depthwise_conv2d(Tensor(x), Tensor(w)).data
    for c in range(3):
        np.testing.assert_allclose(out[:, c:c + 1], _reference_conv(x[:, c:c + 1], w[c:c + 1]), atol=1e-12)


def test_conv_shape_errors_name_the_dimension(rng):
    with pytest.raises(ShapeError, match="dimension 1"):
        K.conv2d(Tensor(rng.standard_normal((1, 2, 3, 8))), Tensor(rng.standard_normal((1, 3, 1, 2))))
    with pytest.raises(ShapeError, match="dimension 3"):
        K.avg_pool(Tensor(rng.standard_normal((1, 1, 1, 3))), (1, 4))


def test_batch_norm_updates_running_stats_only_in_training(rng):
    x = Tensor(rng.standard_normal((4, 2, 1, 8)) * 3.0 + 1.0)
    gamma, beta = Tensor(np.ones(2)), Tensor(np.zeros(2))
    mean, var = np.zeros(2), np.ones(2)
    K.batch_norm(x, gamma, beta, running_mean=mean, running_var=var, train=False)
    np.testing.assert_array_equal(mean, np.zeros(2))
    out = K.batch_norm(x, gamma, beta, running_mean=mean, running_var=var, train=True)
    np.testing.assert_allclose(out.data.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
    np.testing.assert_allclose(mean, 0.1 * x.data.mean(axis=(0, 2, 3)))
    unbiased = x.data.var(axis=(0, 2, 3), ddof=1)
    np.testing.assert_allclose(var, 0.9 + 0.1 * unbiased)


def test_avg_pool_stride(rng):
    x = rng.standard_normal((1, 1, 1, 10))
    out = K.avg_pool(Tensor(x), (1, 4), (1, 3)).data
    np.testing.assert_allclose(out[0, 0, 0], [x[0, 0, 0, 0:4].mean(), x[0, 0, 0, 3:7].mean(), x[0, 0, 0, 6:10].mean()])


def test_forward_op_dispatches_by_name(rng):
    x = Tensor(rng.standard_normal((2, 3)))
    np.testing.assert_array_equal(forward_op("square", [x]).data, x.data ** 2)
    with pytest.raises(KeyError):
        forward_op("no_such_kernel", [x])


def test_kernel_registry_lists_network_operations():
    names = set(K.kernel_names())
    assert {"conv2d", "depthwise_conv2d", "batch_norm", "square", "log", "elu", "avg_pool", "dropout",
            "linear", "log_softmax", "reshape"} <= names


def test_flatten_keeps_batch():
    x = Tensor(np.arange(24.0).reshape(2, 3, 1, 4))
    assert K.flatten(x).shape == (2, 12)
