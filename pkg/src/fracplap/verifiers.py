"""Empirical checks of Hardy inequalities, the De Giorgi L-infinity bound and
the homogeneity of the solution map on discrete data."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .descent import DescentConfig, armijo_descent
from .errors import ConfigurationError, PreconditionError, Refusal, UsageError
from .grid import DiscreteFunction, as_values, weight_mass
from .operator import EnergyAssembly
from .weights import AdmissibilityCertificate, WeightSpec, critical_exponent

log = logging.getLogger(__name__)

MOSER_MAX_K = 60
MOSER_FLOOR = 1e-14
MOSER_TARGET = 1e-10
FORCING_TOL = 1e-11


@dataclass
class HardyReport:
    regime: str
    constant: float
    size: int
    ratios: list

    def to_dict(self) -> dict:
        return {"regime": self.regime, "constant": self.constant, "size": self.size,
                "ratios": list(self.ratios)}

    def to_csv(self) -> str:
        lines = ["index,ratio"] + [f"{i},{r!r}" for i, r in enumerate(self.ratios)]
        return "\n".join(lines) + "\n"


def hardy_regime(sp: float) -> str:
    if sp > 1:
        return "sp>1"
    if sp < 1:
        return "sp<1"
    return "sp=1"


def bump(grid, center: float, width: float) -> np.ndarray:
    """Smooth compactly supported bump ``exp(1 - 1/(1 - z^2))``, ``z = (x-c)/width``."""
    z = (grid.nodes - center) / width
    out = np.zeros(grid.n)
    inside = np.abs(z) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


def default_family(grid, size: int = 50, seed: int = 0) -> list:
    """Bumps of varying widths and offsets, each supported inside the interval."""
    rng = np.random.default_rng(seed)
    L = grid.length
    fam = []
    for _ in range(size):
        width = L * rng.uniform(0.15, 0.5)
        margin = 0.5 * L - width
        center = grid.A + 0.5 * L + rng.uniform(-margin, margin)
        fam.append(DiscreteFunction(grid, bump(grid, center, width)))
    return fam


def hardy_constant(E: EnergyAssembly, family=None) -> HardyReport:
    """Largest ratio of ``int |u|^p rho^{-sp}`` to the regime's right-hand side.

    For ``sp > 1`` the right side is the double sum over the interval alone,
    for ``sp < 1`` that sum plus ``|u|_p^p``, for ``sp = 1`` the full energy.
    """
    grid = E.grid
    family = default_family(grid) if family is None else list(family)
    if not family:
        raise ConfigurationError("the test family is empty")
    regime = hardy_regime(E.sp)
    mass = weight_mass(grid, WeightSpec.power(E.sp))
    ratios = []
    for f in family:
        u = as_values(f, grid)
        if not np.any(u):
            log.warning("skipping a zero function in the Hardy family")
            continue
        lhs = float(np.dot(mass, np.abs(u) ** E.p))
        if regime == "sp>1":
            rhs = E.interior_energy(u)
        elif regime == "sp<1":
            rhs = E.interior_energy(u) + float(np.dot(grid.weights, np.abs(u) ** E.p))
        else:
            rhs = E.energy(u)
        ratios.append(lhs / rhs)
    if not ratios:
        raise ConfigurationError("the test family holds only zero functions")
    return HardyReport(regime, max(ratios), len(ratios), ratios)


# -- De Giorgi iteration -------------------------------------------------------


@dataclass
class MoserConfig:
    scaling: float | None = None
    delta_factor: float = 1.0
    max_k: int = MOSER_MAX_K
    floor: float = MOSER_FLOOR
    target: float = MOSER_TARGET
    rtol: float = 1e-9


@dataclass
class MoserCertificate:
    scaling: float
    delta: float
    U: list
    C0: float
    b: float
    alpha: float
    q: float
    q_bar: float
    terminal_k: int
    bound: float
    direct_max: float
    issued: bool
    violation: int | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "scaling": self.scaling, "delta": self.delta, "U": list(self.U),
            "C0": self.C0, "b": self.b, "alpha": self.alpha, "q": self.q,
            "q_bar": self.q_bar, "terminal_k": self.terminal_k, "bound": self.bound,
            "direct_max": self.direct_max, "issued": self.issued,
            "violation": self.violation, "reason": self.reason,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def level_masses(u: np.ndarray, w: np.ndarray, q: float, p: float, kmax: int) -> np.ndarray:
    """``U_k = |(u - (1 - 2^-k))_+|_q^p`` for ``k = 0..kmax``."""
    out = np.empty(kmax + 1)
    for k in range(kmax + 1):
        wk = np.maximum(u - (1.0 - 2.0 ** -k), 0.0)
        out[k] = float(np.dot(w, wk ** q)) ** (p / q)
    return out


def _fit_constants(U, alpha, p):
    """``C0`` and ``b`` from the first three nonzero level masses.

    ``b`` is never taken below ``2^(p-1+p*alpha)``, the growth factor the
    truncation argument produces on its own.
    """
    b_floor = 2.0 ** (p - 1.0 + p * alpha)
    if len(U) < 3 or U[0] <= 0 or U[1] <= 0 or U[2] <= 0:
        return None, b_floor
    C0 = U[1] / U[0] ** (1.0 + alpha)
    b = U[2] / (C0 * U[1] ** (1.0 + alpha))
    return C0, max(b, b_floor)


def moser_certify(u, lam: float, h: WeightSpec, cert: AdmissibilityCertificate,
                  cfg: MoserConfig | None = None, *, N: int = 1, s: float | None = None,
                  p: float | None = None) -> MoserCertificate:
    """Run the truncation iteration ``w_k = (u - (1 - 2^-k))_+`` on nodal data.

    ``q = p r / (r - 1)`` comes from the weight certificate's ``r``. Unless a
    scaling is given, ``C0`` and ``b`` are fitted on the ``|u_+|_q = 1``
    normalisation (doubled until three level masses are nonzero), the
    threshold ``delta = C0^(-1/(p alpha)) b^(-1/(p alpha^2))`` is formed and
    ``u`` is rescaled to ``|u_+|_q = delta``. The certificate is issued when
    the recursion ``U_{k+1} <= C0 b^k U_k^(1+alpha)`` holds at every audited
    ``k`` and ``U_k`` drops below the target within the iteration cap.
    """
    cfg = cfg or MoserConfig()
    query = cert.query
    if query is not None:
        N, s, p = query.N, query.s, query.p
    if s is None or p is None:
        raise UsageError("s and p are needed when the certificate carries no query")
    grid = u.grid
    w = grid.weights
    vals = as_values(u, grid)
    r = cert.r
    q = p * r / (r - 1.0)
    ps = critical_exponent(N, s, p)
    q_bar = q + p if math.isinf(ps) else min(0.5 * (q + ps), q + p)
    alpha = (q_bar - q) / q_bar
    plus = np.maximum(vals, 0.0)
    norm_plus = float(np.dot(w, plus ** q)) ** (1.0 / q)
    if norm_plus == 0:
        return MoserCertificate(0.0, 0.0, [0.0], 0.0, 0.0, alpha, q, q_bar, 0, 0.0, 0.0,
                                False, None, "u has no positive part")

    if cfg.scaling is not None:
        scaling = float(cfg.scaling)
        U = level_masses(scaling * vals, w, q, p, cfg.max_k)
        C0, b = _fit_constants(U, alpha, p)
        delta = scaling * norm_plus
    else:
        probe = 1.0 / norm_plus
        U = level_masses(probe * vals, w, q, p, 2)
        while not np.all(U > 0):
            probe *= 2.0
            U = level_masses(probe * vals, w, q, p, 2)
        C0, b = _fit_constants(U, alpha, p)
        delta = C0 ** (-1.0 / (p * alpha)) * b ** (-1.0 / (p * alpha * alpha))
        delta *= cfg.delta_factor
        scaling = delta / norm_plus
        U = level_masses(scaling * vals, w, q, p, cfg.max_k)
    if C0 is None:
        C0 = 0.0

    violation = None
    for k in range(cfg.max_k):
        if U[k] <= cfg.floor:
            continue
        bound = C0 * b ** k * U[k] ** (1.0 + alpha)
        if U[k + 1] > bound * (1.0 + cfg.rtol):
            violation = k
            break
    below = np.nonzero(U <= cfg.target)[0]
    terminal = int(below[0]) if below.size else cfg.max_k
    direct = float(np.max(np.abs(vals)))
    certified = 1.0 / scaling
    issued = violation is None and below.size > 0
    if violation is not None:
        reason = f"recursion violated at k={violation}"
    elif not below.size:
        reason = f"U_k did not fall below {cfg.target} within {cfg.max_k} steps"
    else:
        reason = ""
    return MoserCertificate(scaling, delta, U.tolist(), float(C0), float(b), alpha, q, q_bar,
                            terminal, certified, direct, issued, violation, reason)


# -- homogeneity of the solution map ----------------------------------------------


def solve_forcing(E: EnergyAssembly, f, cfg: DescentConfig | None = None, x0=None,
                  polish_iter: int = 50):
    """Solve ``(-Delta)_p^s u = f`` by minimising ``energy/p - int f u``.

    The stopping measure is the nodal defect relative to ``max |f_i w_i|``.
    A forcing symmetric under reflection keeps the iterates even, so mirror
    pairs stay exactly equal (for ``p < 2`` their Hessian entries are
    singular). Descent is followed by Newton steps on the defect.
    """
    cfg = cfg or DescentConfig(max_iter=5000, tol=FORCING_TOL)
    grid = E.grid
    fv = as_values(f, grid)
    fw = fv * grid.weights
    scale = max(float(np.max(np.abs(fw))), 1e-300)
    project = (lambda x: 0.5 * (x + x[::-1])) if np.array_equal(fv, fv[::-1]) else None
    ident = project if project is not None else (lambda x: x)

    def defect(u):
        return ident(E.gradient_values(u) - fw)

    def measure(u, g):
        return float(np.max(np.abs(g))) / scale

    start = np.full(grid.n, 1e-3) if x0 is None else as_values(x0, grid)
    trace = armijo_descent(
        lambda u: E.energy(u) / E.p - float(np.dot(fw, u)), defect, ident(start), cfg,
        precond_at=E.preconditioner_at, retract=project, measure=measure,
    )
    u = trace.x
    res = measure(u, defect(u))
    for _ in range(polish_iter):
        if res <= cfg.tol:
            break
        H = E.hessian(u, 1e-12 * max(float(np.max(np.abs(u))), 1e-300))
        try:
            step = ident(np.linalg.solve(H, -defect(u)))
        except np.linalg.LinAlgError:
            break
        alpha, improved = 1.0, False
        for _ in range(30):
            trial = ident(u + alpha * step)
            r = measure(trial, defect(trial))
            if np.isfinite(r) and r < res:
                u, res, improved = trial, r, True
                break
            alpha *= 0.5
        if not improved:
            break
    trace.x, trace.grad_norm, trace.converged = u, res, res <= cfg.tol
    return DiscreteFunction(grid, u), trace


def summability_exponent(N: int, s: float, p: float, q: float) -> float | None:
    """Integrability exponent of the solution for an ``L^q`` right-hand side.

    Returns ``None`` at the excluded borderline ``q = N/(sp)``.
    """
    if not q > 1:
        raise ConfigurationError(f"q must exceed 1, got {q}")
    threshold = N / (s * p)
    if q < threshold:
        return N * (p - 1.0) * q / (N - s * p * q)
    if q > threshold:
        return math.inf
    return None


@dataclass
class ScalingReport:
    p: float
    t_values: list
    errors: list
    max_error: float
    passed: bool
    exponent_map: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"p": self.p, "t_values": list(self.t_values), "errors": list(self.errors),
                "max_error": self.max_error, "passed": self.passed,
                "exponent_map": {str(k): v for k, v in self.exponent_map.items()}}


def scaling_check(E: EnergyAssembly, f, t_values, *, tol: float = 1e-6, N: int = 1,
                  q_values=(1.5, 2.0, 3.0, math.inf)) -> ScalingReport:
    """Compare ``u(t f)`` with ``t^(1/(p-1)) u(f)`` for every ``t``."""
    t_values = [float(t) for t in t_values]
    if any(t <= 0 for t in t_values):
        raise ConfigurationError("scaling factors must be positive")
    base, trace = solve_forcing(E, f)
    if not trace.converged:
        raise PreconditionError("the reference solve did not converge")
    ref = base.values
    errors = []
    fv = as_values(f, E.grid)
    for t in t_values:
        ut, tr = solve_forcing(E, t * fv)
        if not tr.converged:
            raise PreconditionError(f"the solve for t={t} did not converge")
        pred = t ** (1.0 / (E.p - 1.0)) * ref
        errors.append(float(np.max(np.abs(ut.values - pred)) / np.max(np.abs(pred))))
    emap = {q: summability_exponent(N, E.s, E.p, q) for q in q_values}
    worst = max(errors) if errors else 0.0
    return ScalingReport(E.p, t_values, errors, worst, worst <= tol, emap)
