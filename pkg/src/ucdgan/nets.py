"""Generator and discriminator MLPs for all three training configs.

The discriminator owns a shared backbone and one of two heads: a
conditional scalar head (projection of a label embedding onto the
features, config A) or an unconditional head emitting one logit per
class (configs B/C). The unconditional path never sees the condition.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError, ShapeError
from .tensor import Tensor, concat

HEAD_CONDITIONAL = "conditional_scalar"
HEAD_LOGITS = "unconditional_logits"


@dataclass(frozen=True)
class CondSpec:
    """Label-space description: number of classes and embedding width."""

    cardinality: int
    embedding_dim: int = 16

    def __post_init__(self):
        if self.cardinality < 2:
            raise DomainError(f"cardinality must be >= 2, got {self.cardinality}")
        if self.embedding_dim < 1:
            raise DomainError(f"embedding_dim must be >= 1, got {self.embedding_dim}")


def _he_uniform(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Linear:
    def __init__(self, fan_in, fan_out, rng):
        self.w = Tensor(_he_uniform(rng, fan_in, fan_out), requires_grad=True)
        self.b = Tensor(np.zeros(fan_out), requires_grad=True)

    def __call__(self, x):
        return x.matmul(self.w) + self.b

    def parameters(self):
        return [self.w, self.b]


def _check_onehot(c, cardinality, who):
    if c.data.ndim != 2 or c.data.shape[1] != cardinality:
        raise DomainError(
            f"{who}: labels must be one-hot over {cardinality} classes, got shape {c.data.shape}"
        )


class GeneratorNet:
    """MLP mapping [z ++ embed(c)] to sample space, leaky-ReLU hidden layers."""

    def __init__(self, latent_dim, cond, sample_dim, hidden=256, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.latent_dim = latent_dim
        self.cond = cond
        self.sample_dim = sample_dim
        self.hidden = hidden
        self.embed = Tensor(_he_uniform(rng, cond.cardinality, cond.embedding_dim), requires_grad=True)
        self.l0 = Linear(latent_dim + cond.embedding_dim, hidden, rng)
        self.l1 = Linear(hidden, hidden, rng)
        self.l2 = Linear(hidden, sample_dim, rng)

    def forward(self, z, c):
        if z.data.ndim != 2 or z.data.shape[1] != self.latent_dim:
            raise ShapeError(f"generator: z must be (B, {self.latent_dim}), got {z.data.shape}")
        _check_onehot(c, self.cond.cardinality, "generator")
        emb = c.matmul(self.embed)
        h = concat([z, emb], axis=1)
        h = self.l0(h).leaky_relu(0.2)
        h = self.l1(h).leaky_relu(0.2)
        return self.l2(h)

    __call__ = forward

    def parameters(self):
        return [self.embed] + self.l0.parameters() + self.l1.parameters() + self.l2.parameters()

    def set_trainable(self, flag):
        for p in self.parameters():
            p.requires_grad = bool(flag)


class DiscriminatorNet:
    """Shared MLP backbone with either a conditional-scalar or a logits head.

    ``forward_rows`` counts sample rows pushed through the backbone, which
    the probes use to assert their relative cost.
    """

    def __init__(self, sample_dim, cond, head_kind, hidden=256, feature_dim=128, rng=None):
        if head_kind not in (HEAD_CONDITIONAL, HEAD_LOGITS):
            raise ContractError(f"unknown head kind {head_kind!r}")
        rng = np.random.default_rng(0) if rng is None else rng
        self.sample_dim = sample_dim
        self.cond = cond
        self.head_kind = head_kind
        self.hidden = hidden
        self.feature_dim = feature_dim
        self.l0 = Linear(sample_dim, hidden, rng)
        self.l1 = Linear(hidden, hidden, rng)
        self.l2 = Linear(hidden, feature_dim, rng)
        if head_kind == HEAD_CONDITIONAL:
            self.head = Linear(feature_dim, 1, rng)
            self.embed = Tensor(_he_uniform(rng, cond.cardinality, feature_dim), requires_grad=True)
        else:
            self.head = Linear(feature_dim, cond.cardinality, rng)
            self.embed = None
        self.forward_rows = 0

    def features(self, x):
        if x.data.ndim != 2 or x.data.shape[1] != self.sample_dim:
            raise ShapeError(f"discriminator: x must be (B, {self.sample_dim}), got {x.data.shape}")
        self.forward_rows += x.data.shape[0]
        h = self.l0(x).leaky_relu(0.2)
        h = self.l1(h).leaky_relu(0.2)
        return self.l2(h)

    def logits(self, x):
        """Per-class logits d(x); the condition is never consumed."""
        if self.head_kind != HEAD_LOGITS:
            raise ContractError(f"logits head required, net has {self.head_kind}")
        return self.head(self.features(x))

    def conditional(self, x, c):
        """Scalar logit D(x, c): head(f) plus projection <embed(c), f>."""
        if self.head_kind != HEAD_CONDITIONAL:
            raise ContractError(f"conditional head required, net has {self.head_kind}")
        _check_onehot(c, self.cond.cardinality, "discriminator")
        f = self.features(x)
        proj = (f * c.matmul(self.embed)).sum(axis=1)
        return self.head(f)[:, 0] + proj

    def parameters(self):
        params = self.l0.parameters() + self.l1.parameters() + self.l2.parameters() + self.head.parameters()
        if self.embed is not None:
            params.append(self.embed)
        return params

    def set_trainable(self, flag):
        for p in self.parameters():
            p.requires_grad = bool(flag)


def select_logit(logits, labels):
    """Pick component ``labels[i]`` from each row, in-graph (one-hot mask sum)."""
    labels = np.asarray(labels)
    k = logits.data.shape[1]
    if labels.min() < 0 or labels.max() >= k:
        raise DomainError(f"label index out of range [0, {k}): {labels.min()}..{labels.max()}")
    mask = np.zeros_like(logits.data)
    mask[np.arange(labels.shape[0]), labels] = 1.0
    return (logits * Tensor(mask)).sum(axis=1)


def parameter_count(net):
    return sum(p.data.size for p in net.parameters())
