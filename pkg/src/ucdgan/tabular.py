"""Finite-support verification bed for discriminator optimality.

A TabularGame holds explicit conditional mass matrices q(x|c) and
p_g(x|c) over N support points, with every support point owned by exactly
one class. On such games the optimal discriminator is known in closed
form, q / (q + p_g), and the population discriminator loss can be
minimized numerically by an optimizer that shares nothing with the
training stack. Agreement of the two routes, across classification-loss
weights, is the package's core correctness check.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ValidationError
from .probe import tie_break_ranking

COL_SUM_TOL = 1e-9
CLAMP_LO = 1e-9
CLAMP_HI = 1.0 - 1e-9


@dataclass(frozen=True)
class TabularGame:
    q: np.ndarray  # (N, K) data conditionals, column c sums to 1
    p_g: np.ndarray  # (N, K) generator conditionals, column c sums to 1
    labels: np.ndarray  # (N,) owning class per support point

    def __post_init__(self):
        object.__setattr__(self, "q", np.asarray(self.q, dtype=np.float64))
        object.__setattr__(self, "p_g", np.asarray(self.p_g, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        q, p, labels = self.q, self.p_g, self.labels
        if q.ndim != 2 or q.shape != p.shape or labels.shape != (q.shape[0],):
            raise ValidationError(f"inconsistent shapes: q {q.shape}, p_g {p.shape}, labels {labels.shape}")
        n, k = q.shape
        if k < 1 or n < 1:
            raise ValidationError("game needs at least one support point and one class")
        if labels.min() < 0 or labels.max() >= k:
            raise ValidationError(f"labels outside [0, {k})")
        if (q < 0).any() or (p < 0).any():
            raise ValidationError("negative mass")
        for name, m in (("q", q), ("p_g", p)):
            sums = m.sum(axis=0)
            bad = np.where(np.abs(sums - 1.0) > COL_SUM_TOL)[0]
            if bad.size:
                raise ValidationError(f"{name} column {bad[0]} sums to {sums[bad[0]]!r}, expected 1")
        mask = np.ones((n, k), dtype=bool)
        mask[np.arange(n), labels] = False
        offending = np.argwhere((q > 0) & mask)
        if offending.size:
            x, c = offending[0]
            raise ValidationError(
                f"disjointness violated: q[{x}, {c}] = {q[x, c]!r} > 0 but point {x} belongs to class {labels[x]}"
            )

    @property
    def n_points(self):
        return self.q.shape[0]

    @property
    def n_classes(self):
        return self.q.shape[1]


@dataclass
class TabularD:
    """Per-(point, class) discriminator values in probability form.

    ``logits`` holds the optimizer's raw parameterization when the values
    came from numerical minimization (None for the closed form).
    """

    values: np.ndarray
    logits: np.ndarray = None
    iterations: int = 0
    grad_norm: float = 0.0


def closed_form_dstar(game):
    """q / (q + p_g) elementwise; cells with no mass on either side are 0."""
    total = game.q + game.p_g
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(total > 0, game.q / np.where(total > 0, total, 1.0), 0.0)
    return TabularD(values=d)


def _sigmoid(t):
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(t):
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def _softmax_rows(t):
    e = np.exp(t - t.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _objective(game, form, lambda1, class_kind, margin):
    """Population loss, gradient, and diagonal curvature as a function of
    the logit matrix t. Uniform class prior; its scale cannot move the
    minimizer because the loss decouples over (point, class) cells."""
    q, p = game.q, game.p_g
    k = game.n_classes
    w = q + p
    row_mass = w.sum(axis=1, keepdims=True)

    def fun(t):
        sig = _sigmoid(t)
        loss = (q * _softplus(-t) + p * _softplus(t)).sum() / k
        grad = (w * sig - q) / k
        curv = (w * sig * (1.0 - sig)) / k
        if form == "ucd" and lambda1 > 0.0:
            scale = lambda1 / (2.0 * k)
            if class_kind == "cross_entropy":
                m = t.max(axis=1, keepdims=True)
                lse = m + np.log(np.exp(t - m).sum(axis=1, keepdims=True))
                soft = _softmax_rows(t)
                loss += scale * (row_mass * lse - (w * t).sum(axis=1, keepdims=True)).sum()
                grad += scale * (row_mass * soft - w)
                curv += scale * row_mass * soft * (1.0 - soft)
            elif class_kind == "multiclass_hinge":
                slack = margin + t[:, :, None] - t[:, None, :]  # [x, i, c]
                np.einsum("xii->xi", slack)[:] = 0.0
                active = slack > 0
                loss += scale * (w[:, None, :] * np.where(active, slack, 0.0)).sum()
                g_hinge = (w[:, None, :] * active).sum(axis=2) - w * active.sum(axis=1)
                grad += scale * g_hinge
            else:
                raise ValidationError(f"unknown class loss kind {class_kind!r}")
        return loss, grad, curv

    return fun


def _minimize(fun, t0, tol=1e-8, max_iter=100_000, max_dir=10.0):
    """Diagonally preconditioned descent with backtracking line search.

    The objective is convex in the logits; curvature-scaled steps walk the
    coordinates whose infimum sits at -inf linearly instead of stalling.
    """
    t = np.array(t0, dtype=np.float64)
    loss, grad, curv = fun(t)
    scale = 1.0
    it = 0
    gnorm = float(np.sqrt((grad * grad).sum()))
    while it < max_iter and gnorm >= tol:
        it += 1
        direction = np.clip(grad / np.maximum(curv, 1e-12), -max_dir, max_dir)
        slope = float((grad * direction).sum())
        if slope <= 0.0:
            direction = grad
            slope = float((grad * grad).sum())
        accepted = False
        for _ in range(60):
            trial = t - scale * direction
            t_loss, t_grad, t_curv = fun(trial)
            if t_loss <= loss - 1e-4 * scale * slope:
                t, loss, grad, curv = trial, t_loss, t_grad, t_curv
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
        # never exceed the full preconditioned step: scale > 1 lets flat
        # coordinates subsidize an Armijo pass while a curved coordinate
        # oscillates around its optimum without converging
        scale = min(scale * 2.0, 1.0)
        gnorm = float(np.sqrt((grad * grad).sum()))
    return t, it, gnorm


def optimize_tabular_d(game, form="vanilla", lambda1=0.0, class_kind="cross_entropy",
                       margin=1.0, tol=1e-8, max_iter=100_000, fail_above=1e-4):
    """Minimize the population discriminator loss over per-cell logits.

    ``form`` selects the plain adversarial loss ("vanilla") or the
    unconditional-discriminator loss with classification weight lambda1
    ("ucd"). Returns probabilities clamped inside (0, 1), with cells
    carrying no mass at all zeroed by the same convention as the closed
    form.
    """
    if form not in ("vanilla", "ucd"):
        raise ValidationError(f"unknown loss form {form!r}")
    if lambda1 < 0:
        raise ValidationError(f"lambda1 must be non-negative, got {lambda1}")
    fun = _objective(game, form, lambda1, class_kind, margin)
    t0 = np.zeros_like(game.q)
    t, iterations, gnorm = _minimize(fun, t0, tol=tol, max_iter=max_iter)
    if gnorm > fail_above:
        raise ConvergenceError(
            f"tabular optimization stalled: final gradient norm {gnorm:.3e} after {iterations} iterations"
        )
    values = np.clip(_sigmoid(t), CLAMP_LO, CLAMP_HI)
    values[(game.q + game.p_g) == 0.0] = 0.0
    return TabularD(values=values, logits=t, iterations=iterations, grad_norm=gnorm)


@dataclass
class TheoremCell:
    game_index: int
    lambda1: float
    max_selected_deviation: float
    iterations: int
    grad_norm: float
    passed: bool
    offending: list = field(default_factory=list)  # (point, deviation) pairs


@dataclass
class TheoremReport:
    cells: list
    lambda_spread: list  # per game: max spread of selected components across lambda1
    tol: float

    @property
    def passed(self):
        return all(c.passed for c in self.cells)

    def max_deviation(self):
        return max(c.max_selected_deviation for c in self.cells)


def verify_theorem1(games, lambda1_grid=(0.005, 0.01, 0.02, 0.05), tol=1e-3,
                    class_kind="cross_entropy"):
    """Check that the label-indexed component of the numerically optimal d
    matches q/(q+p_g) for every game and classification weight."""
    cells = []
    spreads = []
    for gi, game in enumerate(games):
        rows = np.arange(game.n_points)
        reference = closed_form_dstar(game).values[rows, game.labels]
        selected_by_lambda = []
        for lam in lambda1_grid:
            solved = optimize_tabular_d(game, form="ucd", lambda1=lam, class_kind=class_kind)
            selected = solved.values[rows, game.labels]
            selected_by_lambda.append(selected)
            dev = np.abs(selected - reference)
            worst = float(dev.max())
            offending = [(int(i), float(dev[i])) for i in np.where(dev >= tol)[0]]
            cells.append(TheoremCell(gi, lam, worst, solved.iterations, solved.grad_norm,
                                     worst < tol, offending))
        stacked = np.stack(selected_by_lambda)
        spreads.append(float((stacked.max(axis=0) - stacked.min(axis=0)).max()))
    return TheoremReport(cells=cells, lambda_spread=spreads, tol=tol)


def classifier_property_check(game):
    """Accuracy of argmax_c of the closed-form optimal discriminator
    against the owning class of each support point."""
    d = closed_form_dstar(game).values
    predicted = tie_break_ranking(d)[:, 0]
    return float((predicted == game.labels).mean())


# -- game construction and I/O ------------------------------------------


def random_game(rng, n_points=None, n_classes=None, cross_mass=False, equilibrium=False):
    """Random valid game. By default p_g respects the class structure
    (mass only on points of the conditioning class), the regime in which
    the classification term provably decouples from the adversarial one;
    ``cross_mass`` lets p_g leak onto other classes' support points."""
    if n_classes is None:
        n_classes = int(rng.integers(2, 5))
    if n_points is None:
        n_points = int(rng.integers(n_classes, 11))
    if n_points < n_classes:
        raise ValidationError(f"need >= {n_classes} points to cover every class")
    labels = np.concatenate([np.arange(n_classes), rng.integers(0, n_classes, size=n_points - n_classes)])
    rng.shuffle(labels)
    q = np.zeros((n_points, n_classes))
    for c in range(n_classes):
        own = np.where(labels == c)[0]
        weights = rng.uniform(0.2, 1.0, size=own.size)
        q[own, c] = weights / weights.sum()
    if equilibrium:
        return TabularGame(q=q, p_g=q.copy(), labels=labels)
    p = np.zeros((n_points, n_classes))
    for c in range(n_classes):
        own = np.where(labels == c)[0] if not cross_mass else np.arange(n_points)
        weights = rng.uniform(0.0, 1.0, size=own.size)
        if own.size > 1 and rng.random() < 0.3:
            weights[rng.integers(0, own.size)] = 0.0  # exercise p_g(x|c) = 0 cells
        if weights.sum() == 0.0:
            weights[:] = 1.0
        p[own, c] = weights / weights.sum()
    return TabularGame(q=q, p_g=p, labels=labels)


def builtin_suite(seed=2024, n_random=50, n_equilibrium=6):
    """Random class-respecting games of mixed size plus equilibrium games."""
    rng = np.random.default_rng(seed)
    games = [random_game(rng) for _ in range(n_random)]
    games += [random_game(rng, equilibrium=True) for _ in range(n_equilibrium)]
    return games


def save_game(path, game):
    with open(path, "w") as f:
        f.write(f"{game.n_points} {game.n_classes}\n")
        for x in range(game.n_points):
            row = [str(game.labels[x])]
            row += [repr(float(v)) for v in game.q[x]]
            row += [repr(float(v)) for v in game.p_g[x]]
            f.write(" ".join(row) + "\n")


def load_game(path):
    with open(path) as f:
        lines = [ln for ln in f.read().splitlines() if ln.strip()]
    if not lines:
        raise ValidationError(f"{path}: empty game file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValidationError(f"{path}:1: header must be 'N card(C)', got {lines[0]!r}")
    try:
        n, k = int(head[0]), int(head[1])
    except ValueError:
        raise ValidationError(f"{path}:1: non-integer header {lines[0]!r}")
    if len(lines) - 1 != n:
        raise ValidationError(f"{path}: header says {n} points, file has {len(lines) - 1} rows")
    labels = np.empty(n, dtype=np.int64)
    q = np.empty((n, k))
    p = np.empty((n, k))
    for i, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != 1 + 2 * k:
            raise ValidationError(f"{path}:{i + 2}: expected {1 + 2 * k} fields, got {len(parts)}")
        try:
            labels[i] = int(parts[0])
            q[i] = [float(v) for v in parts[1:1 + k]]
            p[i] = [float(v) for v in parts[1 + k:]]
        except ValueError as e:
            raise ValidationError(f"{path}:{i + 2}: {e}")
    return TabularGame(q=q, p_g=p, labels=labels)
