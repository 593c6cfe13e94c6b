"""First eigenpair and minimax upper bounds for the weighted eigenproblem.

The eigenvalue is the minimum of the Rayleigh quotient

    R(u) = energy(u) / int h |u|^p

and eigenfunctions are normalised on the set ``energy(u)/p = 1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.stats

from .descent import DescentConfig, armijo_descent
from .errors import ConfigurationError, PreconditionError
from .grid import DiscreteFunction, as_values, weight_mass
from .operator import EnergyAssembly, _signed_power, assemble
from .weights import WeightSpec

MAX_MINIMAX_K = 8


@dataclass
class RayleighConfig:
    max_iter: int = 5000
    tol: float = 1e-9
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    init: str = "positive-bump"
    seed: int = 0
    precondition: bool = True

    def __post_init__(self):
        if self.init not in ("positive-bump", "random"):
            raise ConfigurationError(f"unknown initial guess policy {self.init!r}")
        DescentConfig(self.max_iter, self.tol, self.armijo_c, self.backtrack)

    def descent(self) -> DescentConfig:
        return DescentConfig(self.max_iter, self.tol, self.armijo_c, self.backtrack)


@dataclass
class EigenResult:
    lam: float
    u: DiscreteFunction
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "values": self.u.values.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def positive_bump(grid) -> np.ndarray:
    """``sin`` arch vanishing at both end points."""
    return np.sin(np.pi * (grid.nodes - grid.A) / grid.length)


class _Quotient:
    """Rayleigh quotient and its gradient for fixed assembly and weight mass."""

    def __init__(self, E: EnergyAssembly, mass: np.ndarray):
        self.E = E
        self.mass = mass
        self.p = E.p

    def denominator(self, u):
        return float(np.dot(self.mass, np.abs(u) ** self.p))

    def value(self, u):
        den = self.denominator(u)
        return self.E.energy(u) / den if den > 0 else np.inf

    def gradient(self, u):
        p = self.p
        den = self.denominator(u)
        R = self.E.energy(u) / den
        dden = self.mass * _signed_power(u, p - 2.0)
        return p * (self.E.gradient_values(u) - R * dden) / den

    def normalise(self, u):
        en = self.E.energy(u)
        return u * (self.p / en) ** (1.0 / self.p) if en > 0 else u


def _sign_fix(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return -u if np.dot(u, w) < 0 else u


def eigen_defect(E: EnergyAssembly, mass: np.ndarray, lam: float, u) -> np.ndarray:
    """Nodal defect ``p * (A(u) - lam * m |u|^{p-2} u)``."""
    uu = as_values(u, E.grid)
    return E.p * (E.gradient_values(uu) - lam * mass * _signed_power(uu, E.p - 2.0))


def residual(E: EnergyAssembly, h: WeightSpec, lam: float, u, probes=None) -> float:
    """Sup-norm of the eigen-equation defect.

    With ``probes`` the defect is tested against those directions,
    ``max |<defect, v>|``; the default battery of coordinate bumps gives
    the nodal sup-norm.
    """
    d = eigen_defect(E, weight_mass(E.grid, h), lam, u)
    if probes is None:
        return float(np.max(np.abs(d)))
    return float(max(abs(np.dot(d, as_values(v, E.grid))) for v in probes))


def first_eigenpair(E: EnergyAssembly, h: WeightSpec, cfg: RayleighConfig | None = None,
                    *, keep_history: bool = False) -> EigenResult:
    cfg = cfg or RayleighConfig()
    grid = E.grid
    hv = h.at_nodes(grid)
    if not np.any(hv > 0):
        raise PreconditionError("the weight must be positive somewhere")
    mass = weight_mass(grid, h)
    Q = _Quotient(E, mass)
    if cfg.init == "random":
        x0 = np.random.default_rng(cfg.seed).standard_normal(grid.n)
    else:
        x0 = positive_bump(grid)
    precond_at = E.preconditioner_at if cfg.precondition else None
    trace = armijo_descent(Q.value, Q.gradient, x0, cfg.descent(), precond_at=precond_at,
                           retract=Q.normalise, keep_history=keep_history)
    u = _sign_fix(Q.normalise(trace.x), grid.weights)
    lam = Q.value(u)
    res = float(np.max(np.abs(eigen_defect(E, mass, lam, u))))
    return EigenResult(lam, DiscreteFunction(grid, u), res, trace.iterations,
                       trace.converged, trace.history)


def simplicity_check(r1: EigenResult, r2: EigenResult) -> tuple[float, float]:
    """``(score, relative gap)`` between two computed first eigenpairs.

    ``score = 1 - |<u1,u2>| / (|u1| |u2|)`` in the grid-weighted inner
    product; zero exactly when the eigenfunctions are proportional.
    """
    w = r1.u.grid.weights
    a, b = r1.u.values, as_values(r2.u, r1.u.grid)
    cos = abs(np.dot(w * a, b)) / np.sqrt(np.dot(w * a, a) * np.dot(w * b, b))
    score = max(0.0, 1.0 - float(cos))
    gap = abs(r1.lam - r2.lam) / abs(r1.lam)
    return score, gap


def dense_pencil(E: EnergyAssembly, h: WeightSpec):
    """Eigenvalues and mass-orthonormal eigenvectors of the ``p = 2`` pencil.

    Uses the same grid and ``s`` as ``E``; the weight mass must be positive.
    """
    E2 = E if E.p == 2.0 else assemble(E.grid, E.s, 2.0)
    mass = weight_mass(E.grid, h)
    if np.any(mass <= 0):
        raise PreconditionError("the p = 2 pencil needs a positive weight")
    vals, vecs = scipy.linalg.eigh(E2.quadratic_matrix(), np.diag(mass))
    return vals, vecs


def _sphere_samples(j: int, rng, count: int) -> np.ndarray:
    if j == 1:
        return np.ones((1, 1))
    if j == 2:
        th = np.linspace(0.0, np.pi, 721)
        return np.column_stack([np.cos(th), np.sin(th)])
    c = rng.standard_normal((count, j))
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def _sup_on_span(Q: _Quotient, basis: np.ndarray, rng, samples: int) -> float:
    """Supremum of the quotient on the unit sphere of ``span(basis)``."""
    j = basis.shape[1]
    C = _sphere_samples(j, rng, samples)
    U = C @ basis.T
    den = np.abs(U) ** Q.p @ Q.mass
    vals = Q.E.energy_batch(U) / den
    best = int(np.argmax(vals))
    if j == 1:
        return float(vals[0])

    def neg(c):
        u = basis @ c
        return -Q.value(u)

    def neg_grad(c):
        u = basis @ c
        return -(basis.T @ Q.gradient(u))

    opt = scipy.optimize.minimize(neg, C[best], jac=neg_grad, method="BFGS",
                                  options={"gtol": 1e-12, "maxiter": 500})
    return float(max(vals[best], -opt.fun))


def minimax_upper_bounds(E: EnergyAssembly, h: WeightSpec, k: int, p: float | None = None,
                         *, reshuffles: int = 50, samples: int = 2000, seed: int = 0,
                         first: EigenResult | None = None) -> list[float]:
    """Upper bounds for the first ``k`` minimax eigenvalues.

    The ``j``-th bound is the largest quotient on the unit sphere of a
    ``j``-dimensional subspace spanned by mixtures of the first ``k``
    eigenvectors of the ``p = 2`` pencil (minimised over random orthogonal
    mixings, the unmixed basis included). The first entry is the computed
    first eigenvalue itself.
    """
    if p is not None and p != E.p:
        raise ConfigurationError("p must match the assembly")
    if not 1 <= k <= MAX_MINIMAX_K:
        raise ConfigurationError(f"k must lie in 1..{MAX_MINIMAX_K}, got {k}")
    mass = weight_mass(E.grid, h)
    Q = _Quotient(E, mass)
    first = first or first_eigenpair(E, h)
    bounds = [first.lam]
    if k == 1:
        return bounds
    _, vecs = dense_pencil(E, h)
    V = vecs[:, :k]
    rng = np.random.default_rng(seed)
    mixes = [np.eye(k)]
    for _ in range(reshuffles - 1):
        mixes.append(scipy.stats.ortho_group.rvs(k, random_state=rng))
    for j in range(2, k + 1):
        best = np.inf
        for M in mixes:
            best = min(best, _sup_on_span(Q, (V @ M)[:, :j], rng, samples))
        # a larger number is still an upper bound, so enforce monotonicity
        bounds.append(max(best, bounds[-1]))
    return bounds
