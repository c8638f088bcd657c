"""Training loops for configs A, B, and C with structured JSONL logging.

Each step runs the generator phase first (discriminator frozen), then the
discriminator phase on the same batch (generator frozen, the fake batch
reused detached). Probe and metric reports are emitted on their cadences
from dedicated random streams so measurement never perturbs training.
"""

import json
import os
import time

import numpy as np

from . import losses
from .checkpoint import save_checkpoint
from .data import augment as augment_views
from .data import one_hot, sample_labeled
from .dino import DinoState, dino_term_for_step
from .errors import ContractError, TrainingAborted
from .metrics import GaussianSummary, frechet_distance, knn_precision_recall, mode_coverage
from .nets import HEAD_CONDITIONAL, HEAD_LOGITS, CondSpec, DiscriminatorNet, GeneratorNet
from .optim import Adam
from .probe import probe_conditional, probe_ucd
from .tensor import Tensor, backward, no_grad
from .config import format_config

# per-run random streams, spawned from the seed in this order
_STREAMS = ("init_g", "init_d", "data", "latent", "augment", "probe", "eval")


def make_rngs(seed):
    children = np.random.SeedSequence(seed).spawn(len(_STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(_STREAMS, children)}


def build_nets(cfg, rngs):
    cond = CondSpec(cfg.dataset.n_classes, cfg.embedding_dim)
    gen = GeneratorNet(cfg.latent_dim, cond, cfg.dataset.sample_dim, hidden=cfg.g_hidden,
                       rng=rngs["init_g"])
    disc = DiscriminatorNet(cfg.dataset.sample_dim, cond, cfg.head_kind, hidden=cfg.d_hidden,
                            feature_dim=cfg.feature_dim, rng=rngs["init_d"])
    return gen, disc


def _check_variant(cfg, disc, want_head, variant):
    if cfg.variant != variant:
        raise ContractError(f"config variant {cfg.variant} passed to a config-{variant} step")
    if disc.head_kind != want_head:
        raise ContractError(f"config {variant} needs a {want_head} head, got {disc.head_kind}")


def train_step_config_a(gen, disc, opt_g, opt_d, x, labels, z, cfg):
    """One alternating step of the conditional-scalar baseline."""
    _check_variant(cfg, disc, HEAD_CONDITIONAL, "A")
    onehot = Tensor(one_hot(labels, cfg.dataset.n_classes))
    kind = cfg.gan_loss

    gen.set_trainable(True)
    disc.set_trainable(False)
    fake = gen(Tensor(z), onehot)
    g_loss = losses.vanilla_g_loss(disc.conditional(fake, onehot), kind)
    backward(g_loss)
    opt_g.step()

    gen.set_trainable(False)
    disc.set_trainable(True)
    real_logit = disc.conditional(Tensor(x), onehot)
    fake_logit = disc.conditional(Tensor(fake.data), onehot)
    d_loss = losses.vanilla_d_loss(real_logit, fake_logit, kind)
    backward(d_loss)
    opt_d.step()
    return {"g_loss": g_loss.item(), "d_loss": d_loss.item(),
            "class_loss": 0.0, "dino_loss": 0.0}


def _ucd_phases(gen, disc, opt_g, opt_d, x, labels, z, cfg, dino_state=None, aug_rng=None):
    onehot = Tensor(one_hot(labels, cfg.dataset.n_classes))

    gen.set_trainable(True)
    disc.set_trainable(False)
    fake = gen(Tensor(z), onehot)
    g_loss = losses.ucd_g_loss(disc.logits(fake), labels, cfg.gan_loss)
    backward(g_loss)
    opt_g.step()

    gen.set_trainable(False)
    disc.set_trainable(True)
    real_logits = disc.logits(Tensor(x))
    fake_logits = disc.logits(Tensor(fake.data))
    dino_term = None
    if cfg.variant == "C":
        real_views = (augment_views(x, cfg.augment, aug_rng),
                      augment_views(x, cfg.augment, aug_rng))
        fake_views = (augment_views(fake.data, cfg.augment, aug_rng),
                      augment_views(fake.data, cfg.augment, aug_rng))
        dino_term = dino_term_for_step(real_views, fake_views, disc, dino_state)
        d_loss = losses.config_c_d_loss(real_logits, fake_logits, labels, cfg.lambda1,
                                        cfg.lambda2, dino_term, cfg.gan_loss,
                                        cfg.class_loss, cfg.hinge_margin)
    else:
        d_loss = losses.ucd_d_loss(real_logits, fake_logits, labels, cfg.lambda1,
                                   cfg.gan_loss, cfg.class_loss, cfg.hinge_margin)
    backward(d_loss)
    opt_d.step()

    with no_grad():
        cls = 0.0
        if cfg.lambda1 > 0.0:
            cls = 0.5 * (losses.class_loss(Tensor(real_logits.data), labels, cfg.class_loss, cfg.hinge_margin).item()
                         + losses.class_loss(Tensor(fake_logits.data), labels, cfg.class_loss, cfg.hinge_margin).item())
    return {"g_loss": g_loss.item(), "d_loss": d_loss.item(), "class_loss": cls,
            "dino_loss": dino_term.item() if dino_term is not None else 0.0}


def train_step_config_b(gen, disc, opt_g, opt_d, x, labels, z, cfg):
    """One alternating step with the unconditional discriminator."""
    _check_variant(cfg, disc, HEAD_LOGITS, "B")
    return _ucd_phases(gen, disc, opt_g, opt_d, x, labels, z, cfg)


def train_step_config_c(gen, disc, opt_g, opt_d, x, labels, z, cfg, dino_state, aug_rng):
    """Config B step plus the two-view self-distillation term; the teacher
    center advances twice (real views first, fake views second)."""
    _check_variant(cfg, disc, HEAD_LOGITS, "C")
    return _ucd_phases(gen, disc, opt_g, opt_d, x, labels, z, cfg,
                       dino_state=dino_state, aug_rng=aug_rng)


def generate_samples(gen, n, n_classes, rng, batch=8192):
    """Draw n labeled fakes from the generator, label-uniform."""
    xs, labels = [], []
    with no_grad():
        for lo in range(0, n, batch):
            m = min(batch, n - lo)
            lab = rng.integers(0, n_classes, size=m)
            z = rng.standard_normal((m, gen.latent_dim))
            xs.append(gen(Tensor(z), Tensor(one_hot(lab, n_classes))).data)
            labels.append(lab)
    return np.concatenate(xs), np.concatenate(labels)


def _per_class_frechet(real_x, real_labels, fake_x, fake_labels, n_classes):
    out = []
    for c in range(n_classes):
        r = real_x[real_labels == c]
        f = fake_x[fake_labels == c]
        if r.shape[0] < 2 or f.shape[0] < 2:
            out.append(None)
            continue
        out.append(frechet_distance(GaussianSummary.from_samples(r), GaussianSummary.from_samples(f)))
    return out


def compute_metrics(gen, cfg, rng, real_x, real_labels, n_samples=None):
    """Metric record body on fresh fakes against a fixed real reference."""
    n = n_samples or cfg.metric_samples
    fake_x, fake_labels = generate_samples(gen, n, cfg.dataset.n_classes, rng)
    pooled = frechet_distance(GaussianSummary.from_samples(real_x),
                              GaussianSummary.from_samples(fake_x))
    pr = knn_precision_recall(real_x, fake_x, k=cfg.knn_k)
    covered, _ = mode_coverage(fake_x, cfg.dataset)
    return {
        "frechet_pooled": pooled,
        "frechet_per_class": _per_class_frechet(real_x, real_labels, fake_x, fake_labels,
                                                cfg.dataset.n_classes),
        "precision": pr.precision,
        "recall": pr.recall,
        "modes_covered": covered,
    }


class JsonlLogger:
    def __init__(self, path):
        self.path = path
        self._f = open(path, "w")

    def write(self, record):
        self._f.write(json.dumps(record) + "\n")
        self._f.flush()

    def close(self):
        self._f.close()


def run_training(cfg, outdir):
    """Execute a full run; returns a summary dict with final measurements.

    Writes log.jsonl, final.ckpt, and resolved-config.txt into outdir.
    Aborts (after logging a diagnostic record) on any non-finite loss.
    """
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "resolved-config.txt"), "w") as f:
        f.write(format_config(cfg))

    rngs = make_rngs(cfg.seed)
    gen, disc = build_nets(cfg, rngs)
    opt_g = Adam(gen.parameters(), cfg.g_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    opt_d = Adam(disc.parameters(), cfg.d_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    dino_state = None
    if cfg.variant == "C":
        dino_state = DinoState.fresh(cfg.dataset.n_classes, cfg.dino_tau, cfg.dino_momentum)

    probe_x, probe_onehot = sample_labeled(cfg.dataset, cfg.probe_samples, rngs["probe"])
    probe_labels = probe_onehot.argmax(axis=1)
    real_ref_x, real_ref_onehot = sample_labeled(cfg.dataset, cfg.metric_samples, rngs["eval"])
    real_ref_labels = real_ref_onehot.argmax(axis=1)

    log = JsonlLogger(os.path.join(outdir, "log.jsonl"))
    summary = {"steps": cfg.steps, "aborted": False}
    try:
        for step in range(1, cfg.steps + 1):
            t_start = time.perf_counter()
            x, onehot = sample_labeled(cfg.dataset, cfg.batch_size, rngs["data"])
            labels = onehot.argmax(axis=1)
            z = rngs["latent"].standard_normal((cfg.batch_size, cfg.latent_dim))
            if cfg.variant == "A":
                step_losses = train_step_config_a(gen, disc, opt_g, opt_d, x, labels, z, cfg)
            elif cfg.variant == "B":
                step_losses = train_step_config_b(gen, disc, opt_g, opt_d, x, labels, z, cfg)
            else:
                step_losses = train_step_config_c(gen, disc, opt_g, opt_d, x, labels, z, cfg,
                                                  dino_state, rngs["augment"])
            if not all(np.isfinite(v) for v in step_losses.values()):
                record = {"step": step, "event": "abort", **step_losses}
                log.write(record)
                summary["aborted"] = True
                raise TrainingAborted(step, step_losses)

            if step % cfg.loss_log_cadence == 0 or step == cfg.steps:
                record = {"step": step, **step_losses}
                if cfg.log_timing:
                    record["iter_ms"] = (time.perf_counter() - t_start) * 1e3
                log.write(record)
            if step % cfg.probe_cadence == 0 or step == cfg.steps:
                if disc.head_kind == HEAD_LOGITS:
                    report = probe_ucd(disc, probe_x, probe_labels, cfg.probe_ks, step)
                else:
                    report = probe_conditional(disc, probe_x, probe_labels, cfg.probe_ks, step)
                record = {"step": step}
                record.update({f"probe_top{k}": v for k, v in report.top_k_accuracy.items()})
                log.write(record)
                summary["probe"] = report.top_k_accuracy
            if step % cfg.metric_cadence == 0 or step == cfg.steps:
                body = compute_metrics(gen, cfg, rngs["eval"], real_ref_x, real_ref_labels)
                log.write({"step": step, **body})
                summary["metrics"] = body
    finally:
        log.close()

    ckpt_path = os.path.join(outdir, "final.ckpt")
    save_checkpoint(ckpt_path, gen, disc, dino_state)
    summary["checkpoint"] = ckpt_path
    summary["log"] = log.path
    return summary
