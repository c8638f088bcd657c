"""Equilibrium measurement: use the discriminator as a classifier.

A conditional net is scored by evaluating D(x, c') for every candidate
condition and ranking; a logits-head net needs a single forward. Higher
top-k accuracy on held-out labeled data indicates training closer to
equilibrium. The linear probe instead trains a fresh head on frozen
backbone features to score representation quality.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .losses import class_loss
from .nets import HEAD_CONDITIONAL, HEAD_LOGITS, Linear
from .optim import Adam
from .tensor import Tensor, backward, no_grad


@dataclass
class ProbeReport:
    step: int
    top_k_accuracy: dict
    n_samples: int
    probe_kind: str  # conditional | ucd | linear


def tie_break_ranking(scores):
    """Classes ranked by descending score; ties broken by ascending index."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    return np.argsort(-scores, axis=1, kind="stable")


def topk_accuracy(scores, labels, ks):
    labels = np.asarray(labels)
    ranked = tie_break_ranking(scores)
    out = {}
    for k in ks:
        if not 1 <= k <= scores.shape[1]:
            raise ContractError(f"k={k} outside [1, {scores.shape[1]}]")
        out[int(k)] = float((ranked[:, :k] == labels[:, None]).any(axis=1).mean())
    return out


def probe_conditional(net, samples, labels, ks=(1, 3), step=0):
    """Score a conditional-scalar net: one forward per candidate condition."""
    if net.head_kind != HEAD_CONDITIONAL:
        raise ContractError(f"conditional probe needs a {HEAD_CONDITIONAL} head")
    samples = np.asarray(samples, dtype=np.float64)
    n, k = samples.shape[0], net.cond.cardinality
    scores = np.empty((n, k))
    with no_grad():
        x = Tensor(samples)
        for c in range(k):
            onehot = np.zeros((n, k))
            onehot[:, c] = 1.0
            scores[:, c] = net.conditional(x, Tensor(onehot)).data
    return ProbeReport(step, topk_accuracy(scores, labels, ks), n, "conditional")


def probe_ucd(net, samples, labels, ks=(1, 3), step=0):
    """Score a logits-head net: a single unconditional forward."""
    if net.head_kind != HEAD_LOGITS:
        raise ContractError(f"ucd probe needs a {HEAD_LOGITS} head")
    samples = np.asarray(samples, dtype=np.float64)
    with no_grad():
        scores = net.logits(Tensor(samples)).data
    return ProbeReport(step, topk_accuracy(scores, labels, ks), samples.shape[0], "ucd")


def linear_probe(net, train_set, val_set, epochs=100, lr=1e-2, ks=(1,), step=0, rng=None):
    """Train a fresh linear head on frozen backbone features, full batch.

    Returns the validation top-k report; the backbone is never touched
    (features are computed once with no graph attached).
    """
    train_x, train_y = train_set
    val_x, val_y = val_set
    if len(train_y) == 0:
        raise ContractError("linear probe: empty training set")
    rng = np.random.default_rng(0) if rng is None else rng
    with no_grad():
        feats_train = net.features(Tensor(np.asarray(train_x, dtype=np.float64))).data
        feats_val = net.features(Tensor(np.asarray(val_x, dtype=np.float64))).data
    head = Linear(feats_train.shape[1], net.cond.cardinality, rng)
    opt = Adam(head.parameters(), lr=lr, beta1=0.9, beta2=0.999)
    x = Tensor(feats_train)
    train_y = np.asarray(train_y)
    for _ in range(epochs):
        loss = class_loss(head(x), train_y)
        backward(loss)
        opt.step()
    with no_grad():
        val_scores = head(Tensor(feats_val)).data
    return ProbeReport(step, topk_accuracy(val_scores, np.asarray(val_y), ks), len(val_y), "linear")
