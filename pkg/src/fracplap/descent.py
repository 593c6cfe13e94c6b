"""Gradient descent with Armijo backtracking shared by the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg


ROUNDING_ULPS = 16


@dataclass
class DescentConfig:
    max_iter: int = 5000
    tol: float = 1e-9
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60

    def __post_init__(self):
        if not (self.tol > 0 and self.max_iter > 0):
            raise ValueError("tolerance and iteration cap must be positive")
        if not (0 < self.armijo_c < 1 and 0 < self.backtrack < 1):
            raise ValueError("Armijo parameters must lie in (0,1)")


@dataclass
class DescentTrace:
    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


class Preconditioner:
    """Cholesky solve with a fixed symmetric positive definite matrix."""

    def __init__(self, matrix: np.ndarray):
        self._factor = scipy.linalg.cho_factor(matrix, lower=True)

    def __call__(self, g: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(self._factor, g)


def armijo_descent(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    cfg: DescentConfig,
    *,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    precond_at: Callable[[np.ndarray], Callable] | None = None,
    retract: Callable[[np.ndarray], np.ndarray] | None = None,
    measure: Callable[[np.ndarray, np.ndarray], float] | None = None,
    keep_history: bool = False,
) -> DescentTrace:
    """Minimise ``fun`` from ``x0``.

    Steps follow ``-precond(grad)`` with a Barzilai-Borwein trial length,
    shortened until the Armijo condition holds, so ``fun`` never increases.
    ``retract`` maps every accepted iterate back onto a constraint set on
    which ``fun`` is invariant (e.g. a scaling normalisation).
    ``measure(x, g)`` is the stopping quantity, the sup-norm of ``g`` by
    default. ``precond_at(x)`` rebuilds the preconditioner at every iterate
    and takes precedence over a fixed ``precond``.

    Once the decrease predicted by Armijo falls below the rounding level of
    ``fun``, a step is also accepted when ``fun`` rises by at most a few
    ulps and the stopping measure improves.
    """
    apply_p = precond if precond is not None else (lambda g: g)
    if precond_at is not None:
        apply_p = precond_at(np.asarray(x0, dtype=float))
    stop = measure if measure is not None else (lambda x, g: float(np.max(np.abs(g))))
    x = np.array(x0, dtype=float)
    if retract is not None:
        x = retract(x)
    f = fun(x)
    g = grad(x)
    history = [f] if keep_history else []
    d = -apply_p(g)
    dmax = float(np.max(np.abs(d)))
    xmax = float(np.max(np.abs(x)))
    step = (0.1 * max(xmax, 1e-3) / dmax) if dmax > 0 else 1.0
    it = 0
    res = stop(x, g)
    while res > cfg.tol and it < cfg.max_iter:
        slope = float(np.dot(g, d))
        if slope >= 0:
            # not a descent direction (preconditioner mismatch); fall back
            d = -g
            slope = -float(np.dot(g, g))
        alpha = step
        g_new = None
        noise = ROUNDING_ULPS * np.finfo(float).eps * max(abs(f), np.finfo(float).tiny)
        for _ in range(cfg.max_backtracks):
            x_new = x + alpha * d
            if retract is not None:
                x_new = retract(x_new)
            f_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + cfg.armijo_c * alpha * slope:
                break
            if np.isfinite(f_new) and f_new <= f + noise and -alpha * slope < noise:
                g_try = grad(x_new)
                if stop(x_new, g_try) < res:
                    g_new = g_try
                    break
            alpha *= cfg.backtrack
        else:
            break
        if g_new is None:
            g_new = grad(x_new)
        sx = x_new - x
        sy = g_new - g
        x, f, g = x_new, f_new, g_new
        if precond_at is not None:
            apply_p = precond_at(x)
        d = -apply_p(g)
        curv = float(np.dot(sx, sy))
        if curv > 0:
            # BB1 length measured in the preconditioned metric
            step = curv / float(np.dot(sy, apply_p(sy)))
        else:
            step = 2.0 * alpha
        it += 1
        res = stop(x, g)
        if keep_history:
            history.append(f)
    return DescentTrace(x, f, res, it, res <= cfg.tol, history)
