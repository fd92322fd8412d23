import math

import numpy as np
import pytest

from sdda.autodiff import kernels as K
from sdda.autodiff.tensor import Tape, Tensor, backward
from sdda.exceptions import LabelError, NonFiniteError, ShapeError
from sdda.losses.center import CenterBank, center_loss, cosine_center_loss, update_centers
from sdda.losses.mmd import median_bandwidths, mmd2, mmd_loss
from sdda.losses.softmax import softmax_loss
from sdda.losses.total import LossWeights, total_loss


def _bank(centers, rate=0.5, metric="cosine"):
    return CenterBank(centers=np.asarray(centers, dtype=float), rate=rate, metric=metric)


# softmax


def test_uniform_logits_give_log_c():
    loss = softmax_loss(Tensor(np.zeros((5, 4))), np.array([0, 1, 2, 3, 0]))
    assert loss.item() == pytest.approx(math.log(4), abs=1e-12)


def test_saturated_logits_give_near_zero():
    logits = np.full((2, 3), -50.0)
    logits[[0, 1], [2, 0]] = 50.0
    assert softmax_loss(Tensor(logits), np.array([2, 0])).item() < 1e-12


def test_softmax_matches_direct_formula(rng):
    logits = rng.standard_normal((6, 3)) * 4.0
    labels = rng.integers(0, 3, 6)
    expected = np.mean([-np.log(np.exp(z[y]) / np.exp(z).sum()) for z, y in zip(logits, labels)])
    assert softmax_loss(Tensor(logits), labels).item() == pytest.approx(expected, rel=1e-12)


def test_softmax_is_stable_for_huge_logits():
    assert np.isfinite(softmax_loss(Tensor(np.array([[1e4, -1e4]])), np.array([1])).item())


def test_softmax_label_out_of_range():
    with pytest.raises(LabelError):
        softmax_loss(Tensor(np.zeros((2, 3))), np.array([0, 3]))


# center loss


@pytest.mark.parametrize("h,expected", [([[2.0, 0.0]], 0.0), ([[0.0, 3.0]], 1.0), ([[-1.0, 0.0]], 2.0)])
def test_cosine_center_endpoints(h, expected):
    bank = _bank([[1.0, 0.0], [0.0, 1.0]])
    assert cosine_center_loss(Tensor(np.array(h)), np.array([0]), bank).item() == pytest.approx(expected, abs=1e-12)


def test_cosine_center_stays_in_range_and_matches_definition():
    rng = np.random.default_rng(99)
    for _ in range(10_000):
        b, width = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        h = rng.standard_normal((b, width))
        centers = rng.standard_normal((3, width))
        labels = rng.integers(0, 3, b)
        value = cosine_center_loss(Tensor(h), labels, _bank(centers)).item()
        assert 0.0 <= value <= 2.0
        target = centers[labels]
        cos = (h * target).sum(axis=1) / (np.linalg.norm(h, axis=1) * np.linalg.norm(target, axis=1))
        assert value == pytest.approx(1.0 - cos.mean(), abs=1e-12)


def test_cosine_center_is_scale_invariant(rng):
    h, centers, labels = rng.standard_normal((4, 3)), rng.standard_normal((2, 3)), np.array([0, 1, 1, 0])
    base = cosine_center_loss(Tensor(h), labels, _bank(centers)).item()
    assert cosine_center_loss(Tensor(3.7 * h), labels, _bank(centers)).item() == pytest.approx(base, abs=1e-12)
    assert cosine_center_loss(Tensor(h), labels, _bank(0.2 * centers)).item() == pytest.approx(base, abs=1e-12)


def test_center_loss_sends_no_gradient_to_centers(rng):
    bank = _bank(rng.standard_normal((2, 3)))
    before = bank.centers.copy()
    with Tape() as tape:
        h = Tensor(rng.standard_normal((4, 3)), requires_grad=True)
        loss = cosine_center_loss(h, np.array([0, 1, 0, 1]), bank)
    backward(tape, loss)
    np.testing.assert_array_equal(bank.centers, before)


def test_euclidean_center_loss_value():
    bank = _bank([[0.0, 0.0], [1.0, 1.0]], metric="euclidean")
    value = center_loss(Tensor(np.array([[1.0, 0.0], [1.0, 3.0]])), np.array([0, 1]), bank).item()
    assert value == pytest.approx((1.0 + 4.0) / 4.0)


def test_update_leaves_absent_class_unchanged(rng):
    bank = _bank(rng.standard_normal((3, 4)))
    untouched = bank.centers[2].copy()
    update_centers(bank, rng.standard_normal((5, 4)), np.array([0, 1, 0, 1, 1]))
    np.testing.assert_array_equal(bank.centers[2], untouched)


def test_update_is_fixed_point_at_the_mean():
    center = np.array([0.6, 0.8])
    bank = _bank([center, [1.0, 0.0]])
    update_centers(bank, np.array([[0.6, 0.8], [1.2, 1.6]]), np.array([0, 0]))
    np.testing.assert_allclose(bank.centers[0], center, atol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 5])
def test_update_step_with_identical_members(m):
    rate = 0.5
    c = np.array([2.0, 0.0, 0.0])
    h = np.array([0.0, 1.0, 0.0])
    bank = _bank([c, [1.0, 1.0, 1.0]], rate=rate)
    update_centers(bank, np.tile(h, (m, 1)), np.zeros(m, dtype=int))
    np.testing.assert_allclose(bank.centers[0], c + rate * m / (1 + m) * (h - c))
    assert bank.counts[0] == 1


def test_update_normalizes_embeddings_for_cosine_bank():
    bank = _bank([[1.0, 0.0], [0.0, 1.0]], rate=1.0)
    update_centers(bank, np.array([[0.0, 10.0]]), np.array([0]))
    np.testing.assert_allclose(bank.centers[0], [0.5, 0.5])


def test_zero_center_is_reinitialized():
    bank = _bank([[1.0, 0.0], [0.0, 1.0]], rate=1.0)
    # a single antipodal member at rate 1 moves the center to the origin
    update_centers(bank, np.array([[-1.0, 0.0]]), np.array([0]))
    assert np.linalg.norm(bank.centers[0]) == pytest.approx(1.0)


def test_update_rejects_width_mismatch():
    with pytest.raises(ShapeError):
        update_centers(_bank(np.ones((2, 3))), np.ones((2, 4)), np.array([0, 1]))


def test_initialized_bank_is_unit_norm():
    bank = CenterBank.initialize(4, 6, np.random.default_rng(0))
    np.testing.assert_allclose(np.linalg.norm(bank.centers, axis=1), 1.0)
    assert bank.n_classes == 4 and bank.width == 6


# mmd


def _brute_force_mmd(hs: np.ndarray, ht: np.ndarray, sigma2: tuple[float, ...]) -> float:
    def k(a, b):
        d = float(np.dot(a - b, a - b))
        return sum(math.exp(-d / (2.0 * s)) for s in sigma2) / len(sigma2)

    def block(x, y):
        return sum(k(a, b) for a in x for b in y) / (len(x) * len(y))

    return block(hs, hs) + block(ht, ht) - 2.0 * block(hs, ht)


def test_mmd_of_identical_sets_is_zero(rng):
    h = rng.standard_normal((8, 4))
    assert abs(mmd_loss(Tensor(h), Tensor(h.copy())).item()) < 1e-12


def test_mmd_single_pair_closed_form():
    x, y = np.array([[0.0, 1.0]]), np.array([[2.0, 1.0]])
    value = mmd_loss(Tensor(x), Tensor(y), bandwidth=1.5).item()
    assert value == pytest.approx(2.0 - 2.0 * math.exp(-4.0 / 3.0), abs=1e-14)


def test_mmd_matches_double_loop():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        hs, ht = rng.standard_normal((16, 8)), rng.standard_normal((16, 8)) + rng.uniform(0, 1)
        sigma2 = median_bandwidths(np.concatenate([hs, ht]))
        value = mmd_loss(Tensor(hs), Tensor(ht)).item()
        assert value == pytest.approx(_brute_force_mmd(hs, ht, sigma2), abs=1e-10)


def test_mmd_is_symmetric_and_permutation_invariant(rng):
    hs, ht = rng.standard_normal((6, 3)), rng.standard_normal((9, 3)) + 1.0
    forward = mmd_loss(Tensor(hs), Tensor(ht)).item()
    assert mmd_loss(Tensor(ht), Tensor(hs)).item() == pytest.approx(forward, abs=1e-12)
    shuffled = mmd_loss(Tensor(hs[rng.permutation(6)]), Tensor(ht[rng.permutation(9)])).item()
    assert shuffled == pytest.approx(forward, abs=1e-12)
    assert forward >= 0.0


def test_mmd_vanishes_with_huge_bandwidth(rng):
    hs, ht = rng.standard_normal((5, 3)), rng.standard_normal((5, 3)) + 2.0
    assert mmd_loss(Tensor(hs), Tensor(ht), bandwidth=1e12).item() < 1e-10


def test_plain_array_mmd_agrees_with_loss(rng):
    hs, ht = rng.standard_normal((5, 3)), rng.standard_normal((7, 3))
    sigma2 = median_bandwidths(np.concatenate([hs, ht]))
    assert mmd2(hs, ht, sigma2) == pytest.approx(mmd_loss(Tensor(hs), Tensor(ht)).item(), abs=1e-12)


def test_median_bandwidths_fall_back_on_identical_points():
    assert median_bandwidths(np.ones((4, 2)), factors=(1.0, 2.0)) == (1.0, 2.0)


def test_mmd_needs_both_domains(rng):
    with pytest.raises(ShapeError):
        mmd_loss(Tensor(np.zeros((0, 3))), Tensor(rng.standard_normal((2, 3))))


# total


def test_total_loss_weighting():
    weights = LossWeights(lambda1=2.0, lambda2=10.0)
    total = total_loss(Tensor(np.array(1.0)), Tensor(np.array(0.5)), Tensor(np.array(0.2)), weights)
    assert total.item() == pytest.approx(4.0, abs=1e-12)


def test_zero_weights_return_softmax_exactly(rng):
    ls = Tensor(np.array(rng.uniform(0.1, 3.0)))
    total = total_loss(ls, Tensor(np.array(0.37)), Tensor(np.array(0.91)), LossWeights(0.0, 0.0))
    assert total.item() == ls.item()


def test_non_finite_component_is_named():
    with pytest.raises(NonFiniteError) as info:
        total_loss(Tensor(np.array(1.0)), Tensor(np.array(np.nan)), None, LossWeights(1.0, 1.0))
    assert info.value.details["component"] == "center"


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        LossWeights(-1.0, 0.0)


def test_total_gradient_is_weighted_sum_of_parts(rng):
    h_data = rng.standard_normal((4, 3))
    labels = np.array([0, 1, 0, 1])
    w = Tensor(rng.standard_normal((2, 3)))
    bank = _bank(rng.standard_normal((2, 3)))
    ht = Tensor(rng.standard_normal((4, 3)) + 0.5)

    def parts(h):
        return (softmax_loss(K.linear(h, w), labels), cosine_center_loss(h, labels, bank),
                mmd_loss(h, ht, bandwidth=2.0))

    def grad_of(select):
        with Tape() as tape:
            h = Tensor(h_data, requires_grad=True)
            loss = select(parts(h))
        return backward(tape, loss)[h]

    combined = grad_of(lambda p: total_loss(*p, LossWeights(2.0, 0.5)))
    separate = [grad_of(lambda p, i=i: p[i]) for i in range(3)]
    np.testing.assert_allclose(combined, separate[0] + 2.0 * separate[1] + 0.5 * separate[2], atol=1e-12)
