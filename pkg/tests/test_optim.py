import numpy as np
import pytest

from sdda.autodiff.params import ParamStore
from sdda.exceptions import ConfigError
from sdda.train.optim import AdamState, AdamW, adamw_step


def _store(values) -> ParamStore:
    store = ParamStore()
    store.add("theta", np.asarray(values, dtype=float), "feature")
    return store


def test_zero_gradient_without_decay_is_a_fixed_point():
    store = _store([1.0, -2.0, 3.0])
    optimizer = AdamW(store, lr=0.1, weight_decay=0.0)
    for _ in range(5):
        optimizer.step()
    np.testing.assert_array_equal(store.values["theta"], [1.0, -2.0, 3.0])


def test_zero_gradient_with_decay_shrinks_geometrically():
    store = _store([2.0, -4.0])
    AdamW(store, lr=0.1, weight_decay=0.5).step()
    np.testing.assert_allclose(store.values["theta"], np.array([2.0, -4.0]) * (1.0 - 0.05))


@pytest.mark.parametrize("grad", [1e-3, 1.0, 250.0, -7.0])
def test_first_step_has_size_lr(grad):
    store = _store([0.5])
    store.grads["theta"][:] = grad
    AdamW(store, lr=0.01, weight_decay=0.0).step()
    assert abs(store.values["theta"][0] - 0.5) == pytest.approx(0.01, rel=1e-4)
    assert np.sign(0.5 - store.values["theta"][0]) == np.sign(grad)


def test_minimizes_quadratic_bowl():
    store = _store([1.0, -2.0, 0.5])
    optimizer = AdamW(store, lr=0.01, weight_decay=0.0)
    for _ in range(2000):
        store.zero_grad()
        store.grads["theta"] += store.values["theta"]
        optimizer.step()
    assert np.linalg.norm(store.values["theta"]) < 1e-3


def test_functional_step_matches_formula():
    theta = {"p": np.array([1.0, 2.0])}
    grad = {"p": np.array([0.5, -1.0])}
    state = AdamState()
    adamw_step(theta, grad, state, lr=0.1, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01)
    decayed = np.array([1.0, 2.0]) * (1 - 0.1 * 0.01)
    m_hat, v_hat = grad["p"], grad["p"] ** 2
    np.testing.assert_allclose(theta["p"], decayed - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8))
    assert state.step == 1


def test_state_dict_is_a_copy():
    store = _store([1.0])
    optimizer = AdamW(store, lr=0.1)
    store.grads["theta"][:] = 1.0
    optimizer.step()
    saved = optimizer.state_dict()
    optimizer.step()
    assert saved.step == 1 and optimizer.state.step == 2
    optimizer.load_state_dict(saved)
    assert optimizer.state.step == 1
    assert optimizer.state.exp_avg["theta"] is not saved.exp_avg["theta"]


def test_rejects_non_positive_learning_rate():
    with pytest.raises(ConfigError):
        AdamW(_store([1.0]), lr=0.0)


def test_rejects_mismatched_moment_buffer():
    state = AdamState(exp_avg={"p": np.zeros(3)}, exp_avg_sq={"p": np.zeros(3)})
    with pytest.raises(ConfigError):
        adamw_step({"p": np.zeros(2)}, {"p": np.zeros(2)}, state, lr=0.1)
