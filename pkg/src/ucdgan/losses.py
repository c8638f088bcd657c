"""Adversarial and classification losses for configs A, B, and C.

Config A uses the conditional scalar logit directly. Configs B/C read the
label-indexed component of the unconditional per-class logits and add a
classification term (weight lambda1); config C further adds the
self-distillation term (weight lambda2). With both weights at zero the
chain reduces exactly to the vanilla loss on selected logits.
"""

import numpy as np

from .errors import ContractError, DomainError
from .nets import select_logit
from .tensor import Tensor

GAN_NON_SATURATING = "non_saturating"
GAN_LEAST_SQUARES = "least_squares"
CLASS_CROSS_ENTROPY = "cross_entropy"
CLASS_HINGE = "multiclass_hinge"


def _check_batch(t, who):
    if t.data.size == 0:
        raise ContractError(f"{who}: empty batch")


def _check_gan_kind(kind):
    if kind not in (GAN_NON_SATURATING, GAN_LEAST_SQUARES):
        raise ContractError(f"unknown GAN loss kind {kind!r}")


def vanilla_g_loss(fake_logit, kind=GAN_NON_SATURATING):
    """Generator loss on scalar logits: -log sigmoid, or LSGAN (d-1)^2/2."""
    _check_batch(fake_logit, "vanilla_g_loss")
    _check_gan_kind(kind)
    if kind == GAN_NON_SATURATING:
        return (-fake_logit).softplus().mean()
    diff = fake_logit - 1.0
    return (diff * diff).mean() * 0.5


def vanilla_d_loss(real_logit, fake_logit, kind=GAN_NON_SATURATING):
    """Discriminator loss on scalar logits for real and generated batches."""
    _check_batch(real_logit, "vanilla_d_loss")
    _check_batch(fake_logit, "vanilla_d_loss")
    _check_gan_kind(kind)
    if kind == GAN_NON_SATURATING:
        return (-real_logit).softplus().mean() + fake_logit.softplus().mean()
    rdiff = real_logit - 1.0
    return (rdiff * rdiff).mean() * 0.5 + (fake_logit * fake_logit).mean() * 0.5


def class_loss(logits, labels, kind=CLASS_CROSS_ENTROPY, margin=1.0):
    """Classification loss of per-class logits against integer labels."""
    _check_batch(logits, "class_loss")
    labels = np.asarray(labels)
    k = logits.data.shape[1]
    if labels.min() < 0 or labels.max() >= k:
        raise DomainError(f"label out of range [0, {k}): {labels.min()}..{labels.max()}")
    selected = select_logit(logits, labels)
    if kind == CLASS_CROSS_ENTROPY:
        return (logits.log_sum_exp(axis=1) - selected).mean()
    if kind == CLASS_HINGE:
        if margin <= 0:
            raise ContractError(f"hinge margin must be positive, got {margin}")
        off = np.ones_like(logits.data)
        off[np.arange(labels.shape[0]), labels] = 0.0
        slack = (logits - selected[:, None] + margin).relu()
        return (slack * Tensor(off)).sum(axis=1).mean()
    raise ContractError(f"unknown class loss kind {kind!r}")


def ucd_g_loss(fake_logits, labels, kind=GAN_NON_SATURATING):
    """Generator loss read off the label-indexed component of d(G(z, c))."""
    return vanilla_g_loss(select_logit(fake_logits, labels), kind)


def ucd_d_loss(real_logits, fake_logits, labels, lambda1,
               gan_kind=GAN_NON_SATURATING, class_kind=CLASS_CROSS_ENTROPY, margin=1.0):
    """Config B discriminator loss: adversarial on selected logits plus
    lambda1 times the classification loss averaged over real and fake."""
    adv = vanilla_d_loss(select_logit(real_logits, labels), select_logit(fake_logits, labels), gan_kind)
    if lambda1 == 0.0:
        return adv
    cls = (class_loss(real_logits, labels, class_kind, margin)
           + class_loss(fake_logits, labels, class_kind, margin)) * 0.5
    return adv + cls * lambda1


def config_c_d_loss(real_logits, fake_logits, labels, lambda1, lambda2, dino_term,
                    gan_kind=GAN_NON_SATURATING, class_kind=CLASS_CROSS_ENTROPY, margin=1.0):
    """Config C discriminator loss: config B plus lambda2 times the
    self-distillation term (computed by the dino module)."""
    if lambda2 < 0:
        raise ContractError(f"lambda2 must be non-negative, got {lambda2}")
    base = ucd_d_loss(real_logits, fake_logits, labels, lambda1, gan_kind, class_kind, margin)
    if lambda2 == 0.0:
        return base
    return base + dino_term * lambda2
