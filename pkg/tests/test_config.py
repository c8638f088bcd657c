import pytest

from ucdgan.config import (build_config, config_from_overrides, format_config,
                           load_config, parse_config_text)
from ucdgan.errors import ConfigError


def test_defaults_resolve_per_variant():
    a = config_from_overrides(["variant=A"])
    b = config_from_overrides(["variant=B"])
    c = config_from_overrides(["variant=C"])
    assert (a.lambda1, a.lambda2) == (0.0, 0.0)
    assert (b.lambda1, b.lambda2) == (0.02, 0.0)
    assert (c.lambda1, c.lambda2) == (0.01, 0.1)
    assert a.head_kind == "conditional_scalar"
    assert b.head_kind == "unconditional_logits"


def test_variant_invariants_enforced():
    with pytest.raises(ConfigError, match="variant A"):
        config_from_overrides(["variant=A", "lambda1=0.01"])
    with pytest.raises(ConfigError, match="variant B"):
        config_from_overrides(["variant=B", "lambda2=0.1"])
    with pytest.raises(ConfigError):
        config_from_overrides(["variant=C", "lambda1=-0.5"])


def test_unknown_key_is_line_precise():
    with pytest.raises(ConfigError, match="cfg:3.*bogus"):
        parse_config_text("variant = C\nseed = 1\nbogus = 2\n", source="cfg")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config_text("seed = 1\nseed = 2\n")


def test_bad_value_names_key():
    with pytest.raises(ConfigError, match="seed"):
        build_config({"seed": "one"})


def test_override_unknown_key():
    with pytest.raises(ConfigError, match="nope"):
        config_from_overrides(["nope=3"])


def test_format_parse_round_trip():
    cfg = config_from_overrides(["variant=C", "seed=9", "dino_tau=0.07",
                                 "dataset.n_classes=4", "dataset.sigma=0.1",
                                 "augment.scale_lo=0.8", "probe_ks=1,2,3",
                                 "log_timing=true"])
    text = format_config(cfg)
    cfg2 = build_config(parse_config_text(text))
    assert cfg2 == cfg


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nvariant = B\nseed = 4\ndataset.n_classes = 4\n")
    cfg = load_config(path, overrides=["seed=5"])
    assert cfg.variant == "B"
    assert cfg.seed == 5
    assert cfg.dataset.n_classes == 4


def test_load_config_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/path.cfg")


def test_comments_and_blanks_ignored():
    values = parse_config_text("\n# note\nvariant = A\n\n")
    assert values == {"variant": "A"}
