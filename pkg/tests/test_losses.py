import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import finite_difference_check
from ucdgan import losses
from ucdgan.errors import ContractError, DomainError
from ucdgan.nets import select_logit
from ucdgan.tensor import Tensor, backward

LN2 = np.log(2.0)


def test_vanilla_g_non_saturating_at_zero():
    assert losses.vanilla_g_loss(Tensor([0.0])).item() == pytest.approx(LN2, abs=1e-12)


def test_vanilla_g_least_squares_target_hit():
    assert losses.vanilla_g_loss(Tensor([1.0]), "least_squares").item() == 0.0


def test_vanilla_g_gradient_always_negative():
    for logit in (-5.0, -0.3, 0.0, 2.0, 9.0):
        t = Tensor([logit], requires_grad=True)
        backward(losses.vanilla_g_loss(t))
        assert t.grad[0] < 0.0
        # finite-difference sign agreement
        h = 1e-5
        up = losses.vanilla_g_loss(Tensor([logit + h])).item()
        down = losses.vanilla_g_loss(Tensor([logit - h])).item()
        assert (up - down) / (2 * h) < 0.0


def test_vanilla_d_at_zero_logits():
    val = losses.vanilla_d_loss(Tensor([0.0]), Tensor([0.0])).item()
    assert val == pytest.approx(2 * LN2, abs=1e-12)


def test_vanilla_d_least_squares_targets_hit():
    val = losses.vanilla_d_loss(Tensor([1.0]), Tensor([0.0]), "least_squares").item()
    assert val == 0.0


def test_empty_batch_is_contract_error():
    with pytest.raises(ContractError):
        losses.vanilla_g_loss(Tensor(np.empty(0)))
    with pytest.raises(ContractError):
        losses.vanilla_d_loss(Tensor(np.empty(0)), Tensor([0.0]))


def test_class_loss_uniform_two_classes():
    val = losses.class_loss(Tensor([[0.0, 0.0]]), [0]).item()
    assert val == pytest.approx(LN2, abs=1e-12)


def test_class_loss_confident_correct():
    # hand oracle: log(1 + e^-20)
    val = losses.class_loss(Tensor([[10.0, -10.0]]), [0]).item()
    assert val == pytest.approx(np.log1p(np.exp(-20.0)), rel=1e-9)
    assert val == pytest.approx(2.061e-9, rel=1e-3)


def test_class_loss_hinge_margin_satisfied():
    assert losses.class_loss(Tensor([[2.0, 0.0]]), [0], "multiclass_hinge", margin=1.0).item() == 0.0


def test_class_loss_hinge_value():
    # violations: max(0, 1 + d_i - d_c) summed over i != c
    val = losses.class_loss(Tensor([[0.5, 0.0, 1.0]]), [1], "multiclass_hinge", margin=1.0).item()
    assert val == pytest.approx((1 + 0.5 - 0.0) + (1 + 1.0 - 0.0), abs=1e-12)


def test_class_loss_label_range():
    with pytest.raises(DomainError):
        losses.class_loss(Tensor([[0.0, 0.0]]), [2])


def test_ucd_g_equals_vanilla_on_selected():
    rng = np.random.default_rng(0)
    logits = Tensor(rng.normal(size=(16, 5)))
    labels = rng.integers(0, 5, size=16)
    for kind in ("non_saturating", "least_squares"):
        a = losses.ucd_g_loss(logits, labels, kind).item()
        b = losses.vanilla_g_loss(select_logit(logits, labels), kind).item()
        assert a == b


def test_ucd_g_gradient_zero_on_non_selected():
    logits = Tensor(np.array([[0.3, -0.7, 1.2]]), requires_grad=True)
    backward(losses.ucd_g_loss(logits, [1], "non_saturating"))
    assert logits.grad[0, 0] == 0.0 and logits.grad[0, 2] == 0.0
    assert logits.grad[0, 1] != 0.0


@settings(deadline=None, max_examples=30)
@given(st.integers(0, 2 ** 31 - 1))
def test_reduction_chain_is_exact(seed):
    rng = np.random.default_rng(seed)
    b, k = 8, 4
    real = Tensor(rng.normal(size=(b, k)) * 3.0)
    fake = Tensor(rng.normal(size=(b, k)) * 3.0)
    labels = rng.integers(0, k, size=b)
    kind = ("non_saturating", "least_squares")[seed % 2]

    vanilla = losses.vanilla_d_loss(select_logit(real, labels), select_logit(fake, labels), kind).item()
    b_zero = losses.ucd_d_loss(real, fake, labels, 0.0, kind).item()
    c_zero = losses.config_c_d_loss(real, fake, labels, 0.0, 0.0, Tensor(123.0), kind).item()

    assert abs(b_zero - vanilla) < 1e-12
    assert abs(c_zero - b_zero) < 1e-12

    b_weighted = losses.ucd_d_loss(real, fake, labels, 0.02, kind).item()
    c_match = losses.config_c_d_loss(real, fake, labels, 0.02, 0.0, Tensor(123.0), kind).item()
    assert abs(c_match - b_weighted) < 1e-12


def test_config_c_loss_linear_in_dino_term():
    rng = np.random.default_rng(1)
    real = Tensor(rng.normal(size=(4, 3)))
    fake = Tensor(rng.normal(size=(4, 3)))
    labels = np.array([0, 1, 2, 0])
    lo = losses.config_c_d_loss(real, fake, labels, 0.01, 0.1, Tensor(1.0)).item()
    hi = losses.config_c_d_loss(real, fake, labels, 0.01, 0.1, Tensor(2.0)).item()
    assert hi - lo == pytest.approx(0.1, abs=1e-12)


def test_all_losses_finite_and_fd_clean_on_logits():
    rng = np.random.default_rng(2)
    b, k = 6, 4
    real = Tensor(rng.normal(size=(b, k)), requires_grad=True)
    fake = Tensor(rng.normal(size=(b, k)), requires_grad=True)
    labels = rng.integers(0, k, size=b)

    cases = [
        lambda: losses.ucd_g_loss(fake, labels, "non_saturating"),
        lambda: losses.ucd_g_loss(fake, labels, "least_squares"),
        lambda: losses.ucd_d_loss(real, fake, labels, 0.02, "non_saturating"),
        lambda: losses.ucd_d_loss(real, fake, labels, 0.02, "least_squares"),
        lambda: losses.config_c_d_loss(real, fake, labels, 0.01, 0.1,
                                       (fake.softmax(axis=1) * fake).sum()),
    ]
    for fn in cases:
        assert np.isfinite(fn().item())
        finite_difference_check(fn, [real, fake], n_points=10, rng=rng)


def test_hinge_fd_away_from_kinks():
    rng = np.random.default_rng(3)
    logits = Tensor(np.array([[2.0, 0.2, -1.0], [0.5, 3.0, 0.9]]), requires_grad=True)
    labels = np.array([0, 1])
    finite_difference_check(
        lambda: losses.class_loss(logits, labels, "multiclass_hinge", margin=1.0),
        [logits], n_points=12, rng=rng)
