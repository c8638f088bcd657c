"""Shared test utilities: finite-difference gradient oracle, CLI runner."""

import os
import subprocess
import sys

import numpy as np

from ucdgan.tensor import backward


def finite_difference_check(loss_fn, params, n_points=20, h=1e-4,
                            rel_tol=1e-3, abs_tol=1e-6, rng=None):
    """Compare autodiff grads of a recomputable scalar loss against central
    differences at randomly chosen parameter coordinates.

    Returns the worst relative error seen; raises AssertionError with the
    offending coordinate on failure. Near-zero gradient pairs are compared
    absolutely instead.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    for p in params:
        p.grad = None
        p.requires_grad = True
    loss = loss_fn()
    backward(loss)
    grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    sizes = np.array([p.data.size for p in params])
    offsets = np.cumsum(sizes)
    worst = 0.0
    for _ in range(n_points):
        flat = int(rng.integers(0, int(sizes.sum())))
        pi = int(np.searchsorted(offsets, flat, side="right"))
        local = flat - (offsets[pi - 1] if pi else 0)
        idx = np.unravel_index(local, params[pi].data.shape)
        p = params[pi]
        orig = p.data[idx]
        p.data[idx] = orig + h
        up = loss_fn().item()
        p.data[idx] = orig - h
        down = loss_fn().item()
        p.data[idx] = orig
        fd = (up - down) / (2.0 * h)
        ad = float(grads[pi][idx])
        scale = max(abs(fd), abs(ad))
        if scale < 10 * abs_tol:
            assert abs(fd - ad) < abs_tol, (
                f"param {pi}{idx}: autodiff {ad!r} vs finite-diff {fd!r} (near zero)")
            continue
        rel = abs(fd - ad) / scale
        worst = max(worst, rel)
        assert rel < rel_tol, (
            f"param {pi}{idx}: autodiff {ad!r} vs finite-diff {fd!r}, rel err {rel:.2e}")
    return worst


def run_cli(args, timeout=2400):
    env = dict(os.environ, OMP_NUM_THREADS="1")
    return subprocess.run([sys.executable, "-m", "ucdgan.cli", *[str(a) for a in args]],
                          capture_output=True, text=True, env=env, timeout=timeout)


def run_cli_batch(jobs, workers=2, timeout=2400):
    """Run CLI argument lists in parallel subprocesses; returns CompletedProcess list."""
    env = dict(os.environ, OMP_NUM_THREADS="1")
    procs = {}
    results = [None] * len(jobs)
    queue = list(enumerate(jobs))
    active = []
    while queue or active:
        while queue and len(active) < workers:
            i, args = queue.pop(0)
            p = subprocess.Popen([sys.executable, "-m", "ucdgan.cli", *[str(a) for a in args]],
                                 stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                                 text=True, env=env)
            procs[p.pid] = i
            active.append(p)
        p = active.pop(0)
        out, err = p.communicate(timeout=timeout)
        results[procs[p.pid]] = subprocess.CompletedProcess(p.args, p.returncode, out, err)
    return results
