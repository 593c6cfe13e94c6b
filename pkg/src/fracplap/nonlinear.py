"""Nontrivial critical points of the weighted energy functional

    Phi(u) = energy(u)/p - (lam/p) int h|u|^p - (1/q) int K|u|^q
             - sum_i (sign_i/q_i) int K_i |u|^{q_i}

Sublinear problems (``q < p``) are solved by descent to a negative-energy
minimiser, superlinear ones (``q > p``) by the path-deformation mountain-pass
algorithm. Every converged answer carries the sup-norm of its nodal defect.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .descent import DescentConfig, armijo_descent
from .errors import ConfigurationError, PreconditionError, Refusal
from .grid import DiscreteFunction, as_values, weight_mass
from .operator import EnergyAssembly, _signed_power
from .weights import ClassQuery, WeightSpec, check_class, critical_exponent

PATH_POINTS = 41
MAX_RESTARTS = 8
MAX_SEEDS = 4


@dataclass(frozen=True)
class PowerTerm:
    """One perturbation ``sign * K_i |u|^{q_i - 2} u``."""

    weight: WeightSpec
    q: float
    sign: float = 1.0


@dataclass
class ProblemSpec:
    s: float
    p: float
    q: float
    K: WeightSpec = field(default_factory=WeightSpec.constant)
    lam: float = 0.0
    h: WeightSpec = field(default_factory=WeightSpec.constant)
    perturbations: tuple = ()
    odd: bool = True
    lambda1: float | None = None
    certificates: dict = field(default_factory=dict, init=False, repr=False)
    flags: list = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ConfigurationError(f"s must lie in (0,1), got {self.s}")
        if not self.p > 1:
            raise ConfigurationError(f"p must exceed 1, got {self.p}")
        if self.lam < 0:
            raise ConfigurationError(f"lambda must be nonnegative, got {self.lam}")
        ps = critical_exponent(1, self.s, self.p)
        if self.q == self.p or not 1 <= self.q < ps:
            raise ConfigurationError(f"q must lie in [1, {ps}) and differ from p, got {self.q}")
        self.perturbations = tuple(self.perturbations)
        self._certify()

    @property
    def superlinear(self) -> bool:
        return self.q > self.p

    def _certify(self):
        s, p, q = self.s, self.p, self.q
        if not self.K.is_zero:
            self.certificates["K"] = self._require(self.K, ClassQuery("B_q", 1, s, p, q), "K")
        if self.lam > 0:
            query = ClassQuery("B_t^q", 1, s, p, q, p) if self.superlinear else ClassQuery("B_q", 1, s, p, p)
            self.certificates["h"] = self._require(self.h, query, "h")
        for i, term in enumerate(self.perturbations):
            if self.superlinear:
                if not p < term.q < q:
                    raise ConfigurationError(f"perturbation exponent must lie in (p, q), got {term.q}")
                query = ClassQuery("B_t^q", 1, s, p, q, term.q)
            else:
                query = ClassQuery("B_q", 1, s, p, term.q)
            self.certificates[f"K{i}"] = self._require(term.weight, query, f"K{i}")
        if self.lambda1 is not None and self.lam >= self.lambda1:
            self.flags.append("possibly resonant: lambda is not below the first eigenvalue")

    @staticmethod
    def _require(w, query, name):
        cert = check_class(w, query)
        if not cert:
            raise ConfigurationError(f"weight {name} is not in {query.tag}: {cert.reason}")
        return cert

    def check_infimum(self, grid) -> None:
        if self.superlinear and not self.K.infimum(grid) > 0:
            raise PreconditionError("the superlinear term needs inf K > 0")

    def terms(self):
        """``(weight, exponent, coefficient)`` of every lower-order term of Phi."""
        out = []
        if self.lam != 0:
            out.append((self.h, self.p, self.lam))
        if not self.K.is_zero:
            out.append((self.K, self.q, 1.0))
        for term in self.perturbations:
            out.append((term.weight, term.q, term.sign))
        return out

    def symmetric(self, grid) -> bool:
        return self.odd and all(w.is_symmetric(grid) for w, _, _ in self.terms())


@dataclass
class SolverConfig:
    max_iter: int = 5000
    tol: float = 1e-9
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    path_points: int = PATH_POINTS
    mp_max_iter: int = 4000
    mp_tol: float = 1e-4
    stall_window: int = 50
    polish: bool = True
    polish_max_iter: int = 50

    def descent(self, tol=None, max_iter=None) -> DescentConfig:
        return DescentConfig(max_iter or self.max_iter, tol or self.tol,
                             self.armijo_c, self.backtrack)


@dataclass
class SolveResult:
    u: DiscreteFunction
    phi: float
    residual: float
    method: str
    converged: bool
    iterations: int = 0
    path_history: list = field(default_factory=list, repr=False)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"phi": self.phi, "residual": self.residual, "method": self.method,
                "values": self.u.values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


class _Functional:
    def __init__(self, spec: ProblemSpec, E: EnergyAssembly):
        if E.p != spec.p or E.s != spec.s:
            raise ConfigurationError("problem and assembly disagree on s or p")
        self.E = E
        self.p = spec.p
        self.terms = [(weight_mass(E.grid, w), t, c) for w, t, c in spec.terms()]

    def value(self, u):
        out = self.E.energy(u) / self.p
        for m, t, c in self.terms:
            out -= c / t * float(np.dot(m, np.abs(u) ** t))
        return out

    def gradient(self, u):
        g = self.E.gradient_values(u)
        for m, t, c in self.terms:
            g = g - c * m * _signed_power(u, t - 2.0)
        return g

    def hessian(self, u, eps):
        H = self.E.hessian(u, eps)
        for m, t, c in self.terms:
            H[np.diag_indices_from(H)] -= c * (t - 1.0) * m * (u * u + eps * eps) ** (0.5 * (t - 2.0))
        return H

    def residual(self, u):
        return float(np.max(np.abs(self.gradient(u))))


def phi(spec: ProblemSpec, u, E: EnergyAssembly) -> float:
    return _Functional(spec, E).value(as_values(u, E.grid))


def phi_gradient(spec: ProblemSpec, u, E: EnergyAssembly) -> DiscreteFunction:
    return DiscreteFunction(E.grid, _Functional(spec, E).gradient(as_values(u, E.grid)))


def sign_change_seed(grid, changes: int) -> np.ndarray:
    """``sin((changes+1) pi y)`` on the unit-rescaled interval."""
    y = (grid.nodes - grid.A) / grid.length
    return np.sin((changes + 1) * np.pi * y)


def _parity_projector(grid, parity):
    if parity is None:
        return None
    return lambda x: 0.5 * (x + parity * x[::-1])


def _newton_polish(F: _Functional, u, cfg: SolverConfig, project=None):
    """Newton iterations on the defect; kept only while they reduce it."""
    res = F.residual(u)
    for _ in range(cfg.polish_max_iter):
        if res <= cfg.tol:
            break
        eps = 1e-12 * max(float(np.max(np.abs(u))), 1e-300)
        H = F.hessian(u, eps)
        try:
            step = np.linalg.solve(H, -F.gradient(u))
        except np.linalg.LinAlgError:
            break
        alpha = 1.0
        improved = False
        for _ in range(30):
            trial = u + alpha * step
            if project is not None:
                trial = project(trial)
            r = F.residual(trial)
            if np.isfinite(r) and r < res:
                u, res, improved = trial, r, True
                break
            alpha *= 0.5
        if not improved:
            break
    return u, res


def _descend(F: _Functional, x0, cfg: DescentConfig, project=None):
    precond_at = F.E.preconditioner_at
    if project is not None:
        grad = lambda x: project(F.gradient(x))
    else:
        grad = F.gradient
    return armijo_descent(F.value, grad, x0, cfg, precond_at=precond_at, retract=project)


def minimize(spec: ProblemSpec, E: EnergyAssembly, cfg: SolverConfig | None = None,
             *, seed: np.ndarray | None = None):
    """Negative-energy minimiser of the sublinear problem."""
    cfg = cfg or SolverConfig()
    if spec.superlinear:
        raise PreconditionError("minimize handles q < p only")
    if not spec.terms():
        return Refusal("no forcing term: zero is the only solution", binding="forcing")
    F = _Functional(spec, E)
    base = sign_change_seed(E.grid, 0) if seed is None else as_values(seed, E.grid)
    trace = None
    for j in range(MAX_RESTARTS + 1):
        trace = _descend(F, (2.0 ** j) * base, cfg.descent())
        if trace.value < 0:
            break
    u = trace.x
    converged = trace.converged
    if cfg.polish and not converged and trace.value < 0:
        u, _ = _newton_polish(F, u, cfg)
    res = F.residual(u)
    val = F.value(u)
    converged = res <= cfg.tol and val < 0
    return SolveResult(DiscreteFunction(E.grid, u), val, res, "minimize", converged,
                       trace.iterations)


def _ray_endpoint(F: _Functional, direction, max_doublings=60):
    t = 1.0
    for _ in range(max_doublings):
        if F.value(t * direction) < 0:
            return t * direction
        t *= 2.0
    raise PreconditionError("no point with negative energy along the seed ray")


def _reparametrise(path, w):
    """Redistribute path points to equal weighted-L2 arclength, endpoints fixed."""
    seg = np.sqrt(((np.diff(path, axis=0) ** 2) * w).sum(axis=1))
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    if arc[-1] == 0:
        return path
    target = np.linspace(0.0, arc[-1], len(path))
    idx = np.clip(np.searchsorted(arc, target, side="right") - 1, 0, len(path) - 2)
    span = np.where(seg[idx] > 0, seg[idx], 1.0)
    frac = np.clip((target - arc[idx]) / span, 0.0, 1.0)
    out = path[idx] + frac[:, None] * (path[idx + 1] - path[idx])
    out[0], out[-1] = path[0], path[-1]
    return out


def _capped_step(F: _Functional, x, d, g, cap, cfg: SolverConfig, project):
    """Armijo step along ``d`` whose weighted length never exceeds ``cap``."""
    w = F.E.grid.weights
    dn = math.sqrt(float(np.dot(w, d * d)))
    slope = float(np.dot(g, d))
    if dn == 0 or slope >= 0:
        return x, F.value(x)
    alpha = min(1.0, cap / dn)
    f0 = F.value(x)
    for _ in range(40):
        trial = x + alpha * d
        if project is not None:
            trial = project(trial)
        f1 = F.value(trial)
        if f1 <= f0 + cfg.armijo_c * alpha * slope:
            return trial, f1
        alpha *= cfg.backtrack
    return x, f0


def mountain_pass(spec: ProblemSpec, E: EnergyAssembly, cfg: SolverConfig | None = None,
                  *, seed: np.ndarray | None = None, parity: int | None = None,
                  seed_index: int = 0) -> SolveResult:
    """Mountain-pass critical point between 0 and a negative-energy point.

    A path of ``cfg.path_points`` points from 0 to the endpoint is deformed
    by repeatedly moving its highest point downhill. Each move is capped at
    half the spacing of the path points and the path is then redistributed
    to equal arclength, so that it keeps resolving the ridge it crosses.
    ``parity`` (+1 or -1) restricts every iterate to even or odd functions
    under reflection, which is legitimate when the functional is reflection
    invariant.
    """
    cfg = cfg or SolverConfig()
    if not spec.superlinear:
        raise PreconditionError("mountain_pass handles q > p only")
    spec.check_infimum(E.grid)
    F = _Functional(spec, E)
    w = E.grid.weights
    project = _parity_projector(E.grid, parity)
    direction = sign_change_seed(E.grid, 0) if seed is None else as_values(seed, E.grid)
    if project is not None:
        direction = project(direction)
    endpoint = _ray_endpoint(F, direction)
    history = []
    iterations = 0
    path = values = None
    for _attempt in range(MAX_RESTARTS):
        ts = np.linspace(0.0, 1.0, cfg.path_points)
        path = ts[:, None] * endpoint[None, :]
        values = np.array([F.value(x) for x in path])
        collapsed = False
        while iterations < cfg.mp_max_iter:
            k = int(np.argmax(values))
            if k == 0 or k == len(path) - 1:
                collapsed = True
                break
            history.append(float(values[k]))
            x = path[k]
            g = F.gradient(x)
            if project is not None:
                g = project(g)
            if float(np.max(np.abs(g))) < cfg.mp_tol:
                break
            window = cfg.stall_window
            if len(history) > window and history[-window - 1] - history[-1] <= 1e-12 * abs(history[-1]):
                # the path can no longer lower its maximum at this resolution
                break
            d = -F.E.preconditioner_at(x)(g)
            if project is not None:
                d = project(d)
            spacing = min(math.sqrt(float(np.dot(w, (path[k] - path[k - 1]) ** 2))),
                          math.sqrt(float(np.dot(w, (path[k + 1] - path[k]) ** 2))))
            path[k], values[k] = _capped_step(F, x, d, g, 0.5 * spacing, cfg, project)
            path = _reparametrise(path, w)
            values = np.array([F.value(p) for p in path])
            iterations += 1
        if not collapsed:
            break
        endpoint = 2.0 * endpoint
    u = path[int(np.argmax(values))]
    if cfg.polish:
        u, _ = _newton_polish(F, u, cfg, project)
    res = F.residual(u)
    val = F.value(u)
    converged = bool(res <= cfg.tol and val > 0)
    return SolveResult(DiscreteFunction(E.grid, u), val, res, "mountain-pass", converged,
                       iterations, history, seed_index)


@dataclass
class MultiSolveResult:
    solutions: list
    shortfall: bool
    requested: int

    def __iter__(self):
        return iter(self.solutions)

    def __len__(self):
        return len(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]

    def to_list(self) -> list:
        return [r.to_dict() for r in self.solutions]


def _distinct(u, others, delta, w):
    for v in others:
        d = min(np.sqrt(np.dot(w, (u - v) ** 2)), np.sqrt(np.dot(w, (u + v) ** 2)))
        if d <= delta:
            return False
    return True


def multi_solution_search(spec: ProblemSpec, E: EnergyAssembly,
                          cfg: SolverConfig | None = None, count: int = 2) -> MultiSolveResult:
    """Mountain-pass solutions started from seeds with 0, 1, 2, ... sign changes.

    Solutions equal up to sign count once; results are sorted by energy.
    """
    cfg = cfg or SolverConfig()
    if not spec.odd:
        raise PreconditionError("the multiplicity search needs an odd nonlinearity")
    if not 1 <= count <= MAX_SEEDS:
        raise ConfigurationError(f"count must lie in 1..{MAX_SEEDS}, got {count}")
    grid = E.grid
    symmetric = spec.symmetric(grid)
    found = []
    for k in range(2 * count + 1):
        parity = (1 if k % 2 == 0 else -1) if symmetric else None
        r = mountain_pass(spec, E, cfg, seed=sign_change_seed(grid, k), parity=parity,
                          seed_index=k)
        if not r.converged:
            continue
        found.append(r)
        vals = [f.u.values for f in found]
        delta = 1e-3 * max(math.sqrt(np.dot(grid.weights, v * v)) for v in vals)
        distinct = []
        for f in found:
            if _distinct(f.u.values, [d.u.values for d in distinct], delta, grid.weights):
                distinct.append(f)
        found = distinct
        if len(found) >= count:
            break
    found.sort(key=lambda r: (r.phi, r.seed))
    return MultiSolveResult(found[:count], len(found) < count, count)
