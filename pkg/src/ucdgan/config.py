"""Run configuration: a flat key = value text format with dotted keys.

Unknown keys, bad values, and variant-inconsistent loss weights are all
errors. Formatting a config and parsing it back yields the same
configuration, so resolved-config.txt re-runs a job exactly.
"""

from dataclasses import dataclass, replace

from .data import AugmentSpec, DatasetSpec
from .errors import ConfigError

VARIANTS = ("A", "B", "C")

# table-driven λ defaults per variant (best ablation cells)
VARIANT_LAMBDAS = {"A": (0.0, 0.0), "B": (0.02, 0.0), "C": (0.01, 0.1)}

_BOOL = "bool"
_INT = "int"
_FLOAT = "float"
_STR = "str"
_INTS = "int_tuple"

# key -> (type, default); None default means resolved from the variant
_SCHEMA = [
    ("variant", _STR, "C"),
    ("seed", _INT, 1),
    ("steps", _INT, 20000),
    ("batch_size", _INT, 256),
    ("lambda1", _FLOAT, None),
    ("lambda2", _FLOAT, None),
    ("gan_loss", _STR, "least_squares"),
    ("class_loss", _STR, "cross_entropy"),
    ("hinge_margin", _FLOAT, 1.0),
    ("latent_dim", _INT, 16),
    ("embedding_dim", _INT, 16),
    ("g_hidden", _INT, 256),
    ("d_hidden", _INT, 256),
    ("feature_dim", _INT, 128),
    ("g_lr", _FLOAT, 2e-4),
    ("d_lr", _FLOAT, 2e-4),
    ("adam_beta1", _FLOAT, 0.0),
    ("adam_beta2", _FLOAT, 0.99),
    ("adam_eps", _FLOAT, 1e-8),
    ("dino_tau", _FLOAT, 0.1),
    ("dino_momentum", _FLOAT, 0.9),
    ("probe_cadence", _INT, 500),
    ("probe_samples", _INT, 2048),
    ("probe_ks", _INTS, (1, 3)),
    ("metric_cadence", _INT, 1000),
    ("metric_samples", _INT, 2048),
    ("knn_k", _INT, 3),
    ("loss_log_cadence", _INT, 50),
    ("log_timing", _BOOL, False),
    ("dataset.kind", _STR, "ring_mixture"),
    ("dataset.n_classes", _INT, 8),
    ("dataset.radius", _FLOAT, 2.0),
    ("dataset.sigma", _FLOAT, 0.05),
    ("dataset.sample_dim", _INT, 2),
    ("dataset.seed", _INT, 0),
    ("dataset.path", _STR, ""),
    ("augment.jitter_std", _FLOAT, 0.02),
    ("augment.rotation_max", _FLOAT, 0.2),
    ("augment.scale_lo", _FLOAT, 0.9),
    ("augment.scale_hi", _FLOAT, 1.1),
]

_TYPES = {key: t for key, t, _ in _SCHEMA}
_DEFAULTS = {key: d for key, _, d in _SCHEMA}
KEYS = [key for key, _, _ in _SCHEMA]


@dataclass(frozen=True)
class TrainConfig:
    variant: str
    seed: int
    steps: int
    batch_size: int
    lambda1: float
    lambda2: float
    gan_loss: str
    class_loss: str
    hinge_margin: float
    latent_dim: int
    embedding_dim: int
    g_hidden: int
    d_hidden: int
    feature_dim: int
    g_lr: float
    d_lr: float
    adam_beta1: float
    adam_beta2: float
    adam_eps: float
    dino_tau: float
    dino_momentum: float
    probe_cadence: int
    probe_samples: int
    probe_ks: tuple
    metric_cadence: int
    metric_samples: int
    knn_k: int
    loss_log_cadence: int
    log_timing: bool
    dataset: DatasetSpec
    augment: AugmentSpec

    @property
    def head_kind(self):
        return "conditional_scalar" if self.variant == "A" else "unconditional_logits"


def _parse_value(key, raw):
    t = _TYPES[key]
    try:
        if t == _INT:
            return int(raw)
        if t == _FLOAT:
            return float(raw)
        if t == _BOOL:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a bool: {raw!r}")
        if t == _INTS:
            return tuple(int(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {e}")


def _format_value(key, value):
    t = _TYPES[key]
    if t == _BOOL:
        return "true" if value else "false"
    if t == _INTS:
        return ",".join(str(v) for v in value)
    if t == _FLOAT:
        return repr(float(value))
    return str(value)


def parse_config_text(text, source="config"):
    """Parse ``key = value`` lines into a raw string map, line-precise errors."""
    values = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{ln}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _TYPES:
            raise ConfigError(f"{source}:{ln}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{ln}: duplicate key {key!r}")
        values[key] = raw
    return values


def apply_overrides(values, overrides):
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be KEY=VALUE, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in _TYPES:
            raise ConfigError(f"override references unknown key {key!r}")
        values[key] = raw.strip()
    return values


def build_config(raw_values):
    """Typed TrainConfig from raw strings; variant-dependent λ defaults."""
    typed = {}
    for key, raw in raw_values.items():
        typed[key] = _parse_value(key, raw)
    for key in KEYS:
        if key not in typed and _DEFAULTS[key] is not None:
            typed[key] = _DEFAULTS[key]
    variant = typed["variant"]
    if variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {variant!r}")
    lam1_default, lam2_default = VARIANT_LAMBDAS[variant]
    lam1 = typed.get("lambda1", lam1_default)
    lam2 = typed.get("lambda2", lam2_default)
    if variant == "A" and (lam1 != 0.0 or lam2 != 0.0):
        raise ConfigError(f"variant A requires lambda1 = lambda2 = 0, got {lam1}, {lam2}")
    if variant == "B" and lam2 != 0.0:
        raise ConfigError(f"variant B requires lambda2 = 0, got {lam2}")
    if lam1 < 0 or lam2 < 0:
        raise ConfigError("loss weights must be non-negative")
    if typed["gan_loss"] not in ("non_saturating", "least_squares"):
        raise ConfigError(f"unknown gan_loss {typed['gan_loss']!r}")
    if typed["class_loss"] not in ("cross_entropy", "multiclass_hinge"):
        raise ConfigError(f"unknown class_loss {typed['class_loss']!r}")
    for key in ("steps", "batch_size", "probe_cadence", "probe_samples",
                "metric_cadence", "metric_samples", "loss_log_cadence"):
        if typed[key] < 1:
            raise ConfigError(f"{key} must be >= 1, got {typed[key]}")
    dataset = DatasetSpec(
        kind=typed["dataset.kind"],
        n_classes=typed["dataset.n_classes"],
        radius=typed["dataset.radius"],
        sigma=typed["dataset.sigma"],
        sample_dim=typed["dataset.sample_dim"],
        seed=typed["dataset.seed"],
        path=typed["dataset.path"],
    )
    augment = AugmentSpec(
        jitter_std=typed["augment.jitter_std"],
        rotation_max=typed["augment.rotation_max"],
        scale_range=(typed["augment.scale_lo"], typed["augment.scale_hi"]),
    )
    return TrainConfig(
        variant=variant,
        seed=typed["seed"],
        steps=typed["steps"],
        batch_size=typed["batch_size"],
        lambda1=lam1,
        lambda2=lam2,
        gan_loss=typed["gan_loss"],
        class_loss=typed["class_loss"],
        hinge_margin=typed["hinge_margin"],
        latent_dim=typed["latent_dim"],
        embedding_dim=typed["embedding_dim"],
        g_hidden=typed["g_hidden"],
        d_hidden=typed["d_hidden"],
        feature_dim=typed["feature_dim"],
        g_lr=typed["g_lr"],
        d_lr=typed["d_lr"],
        adam_beta1=typed["adam_beta1"],
        adam_beta2=typed["adam_beta2"],
        adam_eps=typed["adam_eps"],
        dino_tau=typed["dino_tau"],
        dino_momentum=typed["dino_momentum"],
        probe_cadence=typed["probe_cadence"],
        probe_samples=typed["probe_samples"],
        probe_ks=typed["probe_ks"],
        metric_cadence=typed["metric_cadence"],
        metric_samples=typed["metric_samples"],
        knn_k=typed["knn_k"],
        loss_log_cadence=typed["loss_log_cadence"],
        log_timing=typed["log_timing"],
        dataset=dataset,
        augment=augment,
    )


def load_config(path, overrides=()):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    values = parse_config_text(text, source=str(path))
    apply_overrides(values, overrides)
    return build_config(values)


def config_from_overrides(overrides=()):
    """Config built from defaults plus overrides only (no file)."""
    return build_config(apply_overrides({}, list(overrides)))


def format_config(cfg):
    """Every effective setting, one per line, parseable by load_config."""
    flat = {
        "dataset.kind": cfg.dataset.kind,
        "dataset.n_classes": cfg.dataset.n_classes,
        "dataset.radius": cfg.dataset.radius,
        "dataset.sigma": cfg.dataset.sigma,
        "dataset.sample_dim": cfg.dataset.sample_dim,
        "dataset.seed": cfg.dataset.seed,
        "dataset.path": cfg.dataset.path,
        "augment.jitter_std": cfg.augment.jitter_std,
        "augment.rotation_max": cfg.augment.rotation_max,
        "augment.scale_lo": cfg.augment.scale_range[0],
        "augment.scale_hi": cfg.augment.scale_range[1],
    }
    lines = []
    for key in KEYS:
        value = flat[key] if key in flat else getattr(cfg, key.replace(".", "_"))
        lines.append(f"{key} = {_format_value(key, value)}")
    return "\n".join(lines) + "\n"
