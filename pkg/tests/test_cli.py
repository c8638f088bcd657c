import csv
import json

import numpy as np
import pytest

from helpers import run_cli
from ucdgan.tabular import random_game, save_game

TINY = ["--set", "steps=12", "--set", "batch_size=32", "--set", "latent_dim=4",
        "--set", "embedding_dim=4", "--set", "g_hidden=16", "--set", "d_hidden=16",
        "--set", "feature_dim=8", "--set", "probe_cadence=6", "--set", "probe_samples=64",
        "--set", "metric_cadence=12", "--set", "metric_samples=64",
        "--set", "dataset.n_classes=4"]


def test_train_writes_artifacts(tmp_path):
    out = tmp_path / "run"
    cfg = tmp_path / "c.cfg"
    cfg.write_text("variant = B\n")
    res = run_cli(["train", "--config", cfg, "--seed", 7, "--out", out, *TINY])
    assert res.returncode == 0, res.stderr
    assert (out / "log.jsonl").exists()
    assert (out / "final.ckpt").exists()
    assert (out / "resolved-config.txt").exists()
    assert "seed = 7" in (out / "resolved-config.txt").read_text()


def test_train_is_idempotent(tmp_path):
    out = tmp_path / "run"
    args = ["train", "--set", "variant=B", "--seed", 3, "--out", out, *TINY]
    assert run_cli(args).returncode == 0
    first = (out / "log.jsonl").read_bytes(), (out / "final.ckpt").read_bytes()
    assert run_cli(args).returncode == 0
    second = (out / "log.jsonl").read_bytes(), (out / "final.ckpt").read_bytes()
    assert first == second


def test_train_missing_config_exits_2(tmp_path):
    res = run_cli(["train", "--config", tmp_path / "nope.cfg"])
    assert res.returncode == 2
    assert "cannot read" in res.stderr


def test_train_unknown_override_exits_2_naming_key(tmp_path):
    res = run_cli(["train", "--set", "bogus_key=1", "--out", tmp_path / "x"])
    assert res.returncode == 2
    assert "bogus_key" in res.stderr


def test_oracle_builtin_suite_passes(tmp_path):
    res = run_cli(["oracle", "--out", tmp_path / "oracle", "--seed", 11])
    assert res.returncode == 0, res.stderr
    assert "PASS" in res.stdout
    report = (tmp_path / "oracle" / "report.jsonl").read_text().splitlines()
    assert len(report) > 50
    assert all("passed" in r or "classifier_accuracy" in r for r in report)


def test_oracle_corrupted_game_exits_2(tmp_path):
    games = tmp_path / "games"
    games.mkdir()
    game = random_game(np.random.default_rng(0))
    save_game(games / "ok.game", game)
    # violate disjointness by hand
    lines = (games / "ok.game").read_text().splitlines()
    head = lines[0]
    parts = lines[1].split()
    k = int(head.split()[1])
    label = int(parts[0])
    wrong = (label + 1) % k
    parts[1 + wrong] = "0.5"
    lines[1] = " ".join(parts)
    (games / "ok.game").write_text("\n".join(lines) + "\n")
    res = run_cli(["oracle", "--games", games, "--out", tmp_path / "rep"])
    assert res.returncode == 2
    assert "disjointness" in res.stderr or "sums to" in res.stderr


def test_oracle_report_written_even_on_failure(tmp_path):
    # an impossible tolerance forces FAIL while the report still lands
    res = run_cli(["oracle", "--out", tmp_path / "r", "--tol", "1e-12",
                   "--lambda1", "0.02"])
    assert res.returncode == 1
    assert (tmp_path / "r" / "report.jsonl").exists()


def _train_tiny(tmp_path, variant="B", seed=5):
    out = tmp_path / f"run_{variant}_{seed}"
    res = run_cli(["train", "--set", f"variant={variant}", "--seed", seed,
                   "--out", out, *TINY])
    assert res.returncode == 0, res.stderr
    return out


def test_probe_checkpoint_near_chance_when_untrained(tmp_path):
    out = _train_tiny(tmp_path)
    res = run_cli(["probe", "--ckpt", out / "final.ckpt", "--samples", 2000,
                   "--set", "dataset.n_classes=4", "--ks", "1,3"])
    assert res.returncode == 0, res.stderr
    assert "top-1 accuracy" in res.stdout
    assert "top-3 accuracy" in res.stdout


def test_probe_head_dataset_mismatch_exits_2(tmp_path):
    out = _train_tiny(tmp_path)
    res = run_cli(["probe", "--ckpt", out / "final.ckpt", "--samples", 100])
    assert res.returncode == 2  # default dataset has 8 classes, ckpt has 4


def test_probe_linear_flag(tmp_path):
    out = _train_tiny(tmp_path)
    res = run_cli(["probe", "--ckpt", out / "final.ckpt", "--samples", 400,
                   "--set", "dataset.n_classes=4", "--ks", "1", "--linear"])
    assert res.returncode == 0, res.stderr


def test_eval_checkpoint(tmp_path):
    out = _train_tiny(tmp_path)
    res = run_cli(["eval", "--ckpt", out / "final.ckpt", "--samples", 256,
                   "--set", "dataset.n_classes=4", "--out", tmp_path / "ev"])
    assert res.returncode == 0, res.stderr
    assert "frechet_pooled" in res.stdout
    rec = json.loads((tmp_path / "ev" / "eval.jsonl").read_text())
    assert "precision" in rec and "modes_covered" in rec


def test_export_plot(tmp_path):
    out = _train_tiny(tmp_path)
    dest = tmp_path / "plot.csv"
    res = run_cli(["export-plot", "--log", out / "log.jsonl",
                   "--fields", "probe_top1,probe_top3", "--out", dest])
    assert res.returncode == 0, res.stderr
    with open(dest) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["step", "probe_top1", "probe_top3"]
    assert len(rows) == 3  # cadence 6 over 12 steps -> 2 probe records


def test_export_plot_unknown_field_exits_2(tmp_path):
    out = _train_tiny(tmp_path)
    res = run_cli(["export-plot", "--log", out / "log.jsonl",
                   "--fields", "nonsense", "--out", tmp_path / "x.csv"])
    assert res.returncode == 2
    assert "g_loss" in res.stderr  # lists valid fields


def test_export_plot_empty_log(tmp_path):
    log = tmp_path / "empty.jsonl"
    log.write_text("")
    dest = tmp_path / "out.csv"
    res = run_cli(["export-plot", "--log", log, "--fields", "g_loss", "--out", dest])
    assert res.returncode == 0
    assert dest.read_text().strip() == "step,g_loss"


def test_export_plot_partial_fields(tmp_path):
    log = tmp_path / "mixed.jsonl"
    log.write_text('{"step": 1, "g_loss": 0.5}\n{"step": 2, "probe_top1": 0.9}\n')
    dest = tmp_path / "out.csv"
    res = run_cli(["export-plot", "--log", log, "--fields", "g_loss", "--out", dest])
    assert res.returncode == 0
    with open(dest) as f:
        rows = list(csv.reader(f))
    assert len(rows) == 2  # header + the single row carrying g_loss


def test_ablate_empty_grid_exits_2(tmp_path):
    res = run_cli(["ablate", "--out", tmp_path / "ab"])
    assert res.returncode == 2
    assert "empty" in res.stderr.lower()


def test_ablate_tiny_grid(tmp_path):
    out = tmp_path / "ab"
    res = run_cli(["ablate", "--set", "variant=B", *TINY,
                   "--grid", "lambda1=0.01,0.02", "--seeds", "1,2",
                   "--out", out, "--workers", 2], timeout=600)
    assert res.returncode == 0, res.stderr
    with open(out / "ablation.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["lambda1", "lambda2", "frechet_pooled", "probe_top1", "seed"]
    assert len(rows) == 5  # 2 cells x 2 seeds
    lambdas = {r[0] for r in rows[1:]}
    assert lambdas == {"0.01", "0.02"}
