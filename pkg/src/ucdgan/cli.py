"""Command-line surface: train, ablate, oracle, probe, eval, export-plot.

Exit codes: 0 success, 1 assertion or training failure, 2 usage/config
error. Every subcommand overwrites its outputs deterministically.
"""

import argparse
import csv
import json
import os
import subprocess
import sys

from . import tabular
from .checkpoint import load_checkpoint
from .config import config_from_overrides, load_config, format_config
from .data import sample_labeled
from .errors import ConfigError, TrainingAborted, UcdganError, ValidationError
from .nets import HEAD_LOGITS
from .probe import linear_probe, probe_conditional, probe_ucd
from .trainer import compute_metrics, make_rngs, run_training

LOG_FIELDS = ("step", "g_loss", "d_loss", "class_loss", "dino_loss",
              "probe_top1", "probe_top3", "frechet_pooled", "frechet_per_class",
              "precision", "recall", "modes_covered", "iter_ms")


def _load_cfg(args):
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if args.config:
        return load_config(args.config, overrides)
    return config_from_overrides(overrides)


def cmd_train(args):
    cfg = _load_cfg(args)
    outdir = args.out or "run"
    try:
        summary = run_training(cfg, outdir)
    except TrainingAborted as e:
        print(f"training aborted: {e}", file=sys.stderr)
        return 1
    print(f"done: {summary['steps']} steps -> {outdir}")
    if "probe" in summary:
        accs = " ".join(f"top{k}={v:.4f}" for k, v in summary["probe"].items())
        print(f"final probe: {accs}")
    if "metrics" in summary:
        m = summary["metrics"]
        print(f"final metrics: frechet={m['frechet_pooled']:.4f} "
              f"precision={m['precision']:.3f} recall={m['recall']:.3f} modes={m['modes_covered']}")
    return 0


def _final_values(log_path):
    probe_top1 = frechet = None
    with open(log_path) as f:
        for line in f:
            rec = json.loads(line)
            if "probe_top1" in rec:
                probe_top1 = rec["probe_top1"]
            if "frechet_pooled" in rec:
                frechet = rec["frechet_pooled"]
    return probe_top1, frechet


def cmd_ablate(args):
    grids = {}
    for item in args.grid or []:
        if "=" not in item:
            print(f"bad grid spec {item!r}, expected KEY=v1,v2,...", file=sys.stderr)
            return 2
        key, _, raw = item.partition("=")
        if key not in ("lambda1", "lambda2"):
            print(f"ablation grid supports lambda1/lambda2, got {key!r}", file=sys.stderr)
            return 2
        try:
            grids[key] = [float(v) for v in raw.split(",") if v.strip()]
        except ValueError as e:
            print(f"bad grid values for {key}: {e}", file=sys.stderr)
            return 2
    if not grids or not all(grids.values()):
        print("empty ablation grid", file=sys.stderr)
        return 2
    seeds = [int(s) for s in (args.seeds or "1").split(",")]
    cells = [{}]
    for key, values in grids.items():
        cells = [dict(cell, **{key: v}) for v in values for cell in cells]

    outdir = args.out or "ablation"
    os.makedirs(outdir, exist_ok=True)
    jobs = []
    for cell in cells:
        for seed in seeds:
            tag = "_".join(f"{k}{v:g}" for k, v in sorted(cell.items())) + f"_s{seed}"
            cell_dir = os.path.join(outdir, tag)
            cmd = [sys.executable, "-m", "ucdgan.cli", "train", "--out", cell_dir,
                   "--seed", str(seed)]
            if args.config:
                cmd += ["--config", args.config]
            for item in args.set or []:
                cmd += ["--set", item]
            for k, v in cell.items():
                cmd += ["--set", f"{k}={v!r}"]
            jobs.append((cell, seed, cell_dir, cmd))

    env = dict(os.environ, OMP_NUM_THREADS="1")
    workers = max(1, args.workers)
    running, results = [], {}
    queue = list(jobs)
    while queue or running:
        while queue and len(running) < workers:
            job = queue.pop(0)
            proc = subprocess.Popen(job[3], env=env, stdout=subprocess.DEVNULL,
                                    stderr=subprocess.PIPE)
            running.append((job, proc))
        job, proc = running.pop(0)
        _, err = proc.communicate()
        if proc.returncode != 0:
            print(f"cell {job[2]} failed:\n{err.decode()}", file=sys.stderr)
            return 1
        results[(tuple(sorted(job[0].items())), job[1])] = job[2]

    csv_path = os.path.join(outdir, "ablation.csv")
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["lambda1", "lambda2", "frechet_pooled", "probe_top1", "seed"])
        for cell in cells:
            for seed in seeds:
                cell_dir = results[(tuple(sorted(cell.items())), seed)]
                top1, fd = _final_values(os.path.join(cell_dir, "log.jsonl"))
                writer.writerow([cell.get("lambda1", ""), cell.get("lambda2", ""),
                                 repr(fd), repr(top1), seed])
    print(f"ablation summary -> {csv_path}")
    with open(csv_path) as f:
        print(f.read().rstrip())
    return 0


def cmd_oracle(args):
    if args.games:
        names = sorted(os.listdir(args.games))
        games = [tabular.load_game(os.path.join(args.games, n)) for n in names
                 if not n.startswith(".")]
        if not games:
            print(f"no game files in {args.games}", file=sys.stderr)
            return 2
    else:
        games = tabular.builtin_suite(seed=args.seed)
    grid = tuple(float(v) for v in args.lambda1.split(","))
    report = tabular.verify_theorem1(games, lambda1_grid=grid, tol=args.tol)

    outdir = args.out or "oracle"
    os.makedirs(outdir, exist_ok=True)
    report_path = os.path.join(outdir, "report.jsonl")
    with open(report_path, "w") as f:
        for cell in report.cells:
            f.write(json.dumps({
                "game": cell.game_index, "lambda1": cell.lambda1,
                "max_selected_deviation": cell.max_selected_deviation,
                "iterations": cell.iterations, "grad_norm": cell.grad_norm,
                "passed": cell.passed, "offending": cell.offending,
            }) + "\n")
        for gi, (spread, game) in enumerate(zip(report.lambda_spread, games)):
            f.write(json.dumps({
                "game": gi, "lambda_spread": spread,
                "classifier_accuracy": tabular.classifier_property_check(game),
            }) + "\n")
    status = "PASS" if report.passed else "FAIL"
    print(f"{status}: {len(games)} games x {len(grid)} lambda values, "
          f"max selected deviation {report.max_deviation():.3e} (tol {args.tol:g})")
    print(f"report -> {report_path}")
    if not report.passed:
        for cell in report.cells:
            if not cell.passed:
                print(f"  game {cell.game_index} lambda1={cell.lambda1}: "
                      f"offending cells {cell.offending}", file=sys.stderr)
        return 1
    return 0


def cmd_probe(args):
    gen, disc, _ = load_checkpoint(args.ckpt)
    cfg = _load_cfg(args)
    if cfg.dataset.n_classes != disc.cond.cardinality:
        print(f"dataset has {cfg.dataset.n_classes} classes but checkpoint expects "
              f"{disc.cond.cardinality}", file=sys.stderr)
        return 2
    ks = tuple(int(v) for v in args.ks.split(","))
    rngs = make_rngs(cfg.seed)
    x, onehot = sample_labeled(cfg.dataset, args.samples, rngs["probe"])
    labels = onehot.argmax(axis=1)
    if args.linear:
        n_train = args.samples // 2
        report = linear_probe(disc, (x[:n_train], labels[:n_train]),
                              (x[n_train:], labels[n_train:]), ks=ks)
    elif disc.head_kind == HEAD_LOGITS:
        report = probe_ucd(disc, x, labels, ks)
    else:
        report = probe_conditional(disc, x, labels, ks)
    for k, acc in report.top_k_accuracy.items():
        print(f"top-{k} accuracy: {acc:.4f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "probe.jsonl"), "w") as f:
            record = {"probe_kind": report.probe_kind, "n_samples": report.n_samples}
            record.update({f"probe_top{k}": v for k, v in report.top_k_accuracy.items()})
            f.write(json.dumps(record) + "\n")
    return 0


def cmd_eval(args):
    gen, disc, _ = load_checkpoint(args.ckpt)
    cfg = _load_cfg(args)
    rngs = make_rngs(cfg.seed)
    n = args.samples
    real_x, real_onehot = sample_labeled(cfg.dataset, n, rngs["eval"])
    body = compute_metrics(gen, cfg, rngs["eval"], real_x, real_onehot.argmax(axis=1),
                           n_samples=n)
    per_class = ["None" if v is None else f"{v:.4f}" for v in body["frechet_per_class"]]
    print(f"frechet_pooled: {body['frechet_pooled']:.6f}")
    print(f"frechet_per_class: {' '.join(per_class)}")
    print(f"precision: {body['precision']:.4f}  recall: {body['recall']:.4f}")
    print(f"modes_covered: {body['modes_covered']}/{cfg.dataset.n_classes}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "eval.jsonl"), "w") as f:
            f.write(json.dumps({"n_samples": n, **body}) + "\n")
    return 0


def cmd_export_plot(args):
    fields = [f.strip() for f in args.fields.split(",") if f.strip()]
    unknown = [f for f in fields if f not in LOG_FIELDS or f == "step"]
    if not fields or unknown:
        print(f"unknown fields {unknown}; valid fields: {', '.join(LOG_FIELDS[1:])}",
              file=sys.stderr)
        return 2
    rows = []
    with open(args.log) as f:
        for line in f:
            rec = json.loads(line)
            if all(name in rec for name in fields):
                rows.append([rec["step"]] + [rec[name] for name in fields])
    with open(args.out, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step"] + fields)
        writer.writerows(rows)
    print(f"{len(rows)} rows -> {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ucdgan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p, with_out=True):
        p.add_argument("--config", help="config file (key = value lines)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="shorthand for --set seed=N")
        if with_out:
            p.add_argument("--out", help="output directory")

    p = sub.add_parser("train", help="run one training job")
    add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="run a lambda1/lambda2 grid of training jobs")
    add_config_args(p)
    p.add_argument("--grid", action="append", metavar="KEY=v1,v2,...",
                   help="grid over lambda1 or lambda2 (repeatable)")
    p.add_argument("--seeds", default="1", help="comma-separated seeds per cell")
    p.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1),
                   help="parallel worker processes")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("oracle", help="verify discriminator optimality on tabular games")
    p.add_argument("--games", help="directory of game files (default: builtin suite)")
    p.add_argument("--out", help="report directory")
    p.add_argument("--seed", type=int, default=2024, help="builtin suite seed")
    p.add_argument("--lambda1", default="0.005,0.01,0.02,0.05",
                   help="comma-separated classification weights")
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("probe", help="classification-accuracy probe of a checkpoint")
    p.add_argument("--ckpt", required=True)
    add_config_args(p)
    p.add_argument("--ks", default="1,3")
    p.add_argument("--samples", type=int, default=2048)
    p.add_argument("--linear", action="store_true",
                   help="train a linear head on the frozen backbone instead")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("eval", help="sample-quality metrics of a checkpoint")
    p.add_argument("--ckpt", required=True)
    add_config_args(p)
    p.add_argument("--samples", type=int, default=50000)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-plot", help="export log fields as CSV plot data")
    p.add_argument("--log", required=True)
    p.add_argument("--fields", required=True, help="comma-separated field names")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError) as e:
        # bad inputs are usage errors, distinct from method failures
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return 2
    except UcdganError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
