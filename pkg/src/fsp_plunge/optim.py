"""Full-batch Adam and L-BFGS minimizers that never return a worse point than they saw.

Objectives are callables ``x -> (value, gradient)``.  An objective may raise
:class:`~fsp_plunge.errors.IntegrationDiverged` (or return a non-finite
value); such points are treated as +inf and rejected.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationDiverged


def safe_eval(fun, x):
    try:
        value, grad = fun(x)
    except IntegrationDiverged:
        return math.inf, None
    if not math.isfinite(value) or not np.all(np.isfinite(grad)):
        return math.inf, None
    return float(value), np.asarray(grad, dtype=float)


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    history: list = field(default_factory=list)
    n_iter: int = 0
    n_eval: int = 0
    message: str = ""


def adam(fun, x0, iters, lr=0.01, betas=(0.9, 0.999), eps=1e-8, max_retries=20):
    """Plain Adam with bias correction.

    A step that lands on a divergent point is retried from the same iterate
    with half the step size, up to ``max_retries`` times.
    """
    b1, b2 = betas
    x = np.array(x0, dtype=float)
    f, g = safe_eval(fun, x)
    n_eval = 1
    if g is None:
        return OptimResult(x, math.inf, None, [], 0, n_eval, "initial point diverged")
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    best = (f, x.copy(), g.copy())
    history = [f]
    for k in range(1, iters + 1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        step = lr * (m / (1 - b1 ** k)) / (np.sqrt(v / (1 - b2 ** k)) + eps)
        scale = 1.0
        for _ in range(max_retries):
            f_new, g_new = safe_eval(fun, x - scale * step)
            n_eval += 1
            if g_new is not None:
                break
            scale *= 0.5
        else:
            return OptimResult(best[1], best[0], best[2], history, k, n_eval, "adam: divergent step")
        x = x - scale * step
        f, g = f_new, g_new
        history.append(f)
        if f < best[0]:
            best = (f, x.copy(), g.copy())
    return OptimResult(best[1], best[0], best[2], history, iters, n_eval, "adam: completed")


def lbfgs(fun, x0, memory=10, gtol=1e-6, max_iters=500, c1=1e-4, shrink=0.5,
          max_backtracks=40, f0=None, g0=None):
    """L-BFGS with backtracking Armijo line search.

    Stops when ||grad||_inf <= gtol, after ``max_iters`` iterations, or when
    no step along the search direction (nor steepest descent) decreases the
    objective, which is reported as a detected local minimum.
    """
    x = np.array(x0, dtype=float)
    n_eval = 0
    if f0 is None:
        f, g = safe_eval(fun, x)
        n_eval += 1
    else:
        f, g = float(f0), np.asarray(g0, dtype=float)
    if g is None:
        return OptimResult(x, math.inf, None, [], 0, n_eval, "initial point diverged")
    pairs = deque(maxlen=memory)
    history = []
    message = "lbfgs: max iterations"
    it = 0
    while it < max_iters:
        if np.max(np.abs(g)) <= gtol:
            message = "lbfgs: gradient tolerance reached"
            break
        d = _direction(g, pairs)
        if not np.dot(d, g) < 0:
            pairs.clear()
            d = _direction(g, pairs)
        accepted = _armijo(fun, x, f, g, d, c1, shrink, max_backtracks)
        n_eval += accepted[3]
        if accepted[0] is None and pairs:
            # quasi-Newton direction failed; retry from scratch along -g
            pairs.clear()
            d = _direction(g, pairs)
            accepted = _armijo(fun, x, f, g, d, c1, shrink, max_backtracks)
            n_eval += accepted[3]
        x_new, f_new, g_new, _ = accepted
        if x_new is None:
            message = "lbfgs: local minimum detected (no decrease along descent direction)"
            break
        s = x_new - x
        y = g_new - g
        sy = float(np.dot(s, y))
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        it += 1
        history.append(f)
    return OptimResult(x, f, g, history, it, n_eval, message)


def _direction(g, pairs):
    if not pairs:
        return -g / max(1.0, float(np.linalg.norm(g)))
    q = -g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        alphas.append(a)
        q -= a * y
    s, y, rho = pairs[-1]
    q *= 1.0 / (rho * np.dot(y, y))
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def _armijo(fun, x, f, g, d, c1, shrink, max_backtracks):
    slope = float(np.dot(g, d))
    t = 1.0
    n = 0
    for _ in range(max_backtracks):
        x_new = x + t * d
        f_new, g_new = safe_eval(fun, x_new)
        n += 1
        if g_new is not None and f_new <= f + c1 * t * slope and f_new < f:
            return x_new, f_new, g_new, n
        t *= shrink
    return None, None, None, n
