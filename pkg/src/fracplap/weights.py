"""Singular weights and membership in the admissible weight classes.

A weight ``h`` is admissible for a class when ``h * rho^(s a)`` lies in
``L^r`` for an exponent pair ``(a, r)`` satisfying that class's balance
inequality. For a power weight ``rho^-beta`` on an interval the integrability
requirement is ``(beta - s a) r < 1``, so for a fixed ``a`` the admissible
``r`` form an interval that can be written down directly. The checker scans
``a`` and returns the pair whose ``r``-interval is widest on a log scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, NumericalDomainError, Refusal, UsageError
from .grid import DiscreteFunction, Grid, as_values, weight_mass
from .operator import EnergyAssembly

A_GRID_POINTS = 2001
BISECTION_TOL = 1e-6
FEASIBILITY_RTOL = 1e-9
CLASSES = ("A_q", "B_q", "Btilde_q", "B_t^q")
_CLASS_ALIASES = {
    "a_q": "A_q", "aq": "A_q", "a": "A_q",
    "b_q": "B_q", "bq": "B_q", "b": "B_q",
    "btilde_q": "Btilde_q", "btildeq": "Btilde_q", "btilde": "Btilde_q",
    "b_t^q": "B_t^q", "btq": "B_t^q", "b_tq": "B_t^q", "bt": "B_t^q",
}


@dataclass(frozen=True)
class WeightSpec:
    """A weight ``x -> c * rho(x)^-beta`` or a table of nodal values."""

    kind: str = "constant"
    c: float = 1.0
    beta: float = 0.0
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "power", "scaled-power", "tabulated"):
            raise ConfigurationError(f"unknown weight kind {self.kind!r}")
        if self.kind == "tabulated" and self.values is None:
            raise ConfigurationError("tabulated weight needs nodal values")

    @classmethod
    def constant(cls, c: float = 1.0) -> "WeightSpec":
        return cls("constant", float(c), 0.0)

    @classmethod
    def power(cls, beta: float) -> "WeightSpec":
        return cls("power", 1.0, float(beta))

    @classmethod
    def scaled_power(cls, c: float, beta: float) -> "WeightSpec":
        return cls("scaled-power", float(c), float(beta))

    @classmethod
    def tabulated(cls, values) -> "WeightSpec":
        return cls("tabulated", 1.0, 0.0, tuple(float(v) for v in values))

    @classmethod
    def parse(cls, text: str) -> "WeightSpec":
        """Read ``const:c``, ``power:beta``, ``spower:c:beta`` or ``zero``."""
        parts = text.strip().split(":")
        head = parts[0].lower()
        try:
            if head in ("const", "constant") and len(parts) == 2:
                return cls.constant(float(parts[1]))
            if head == "zero" and len(parts) == 1:
                return cls.constant(0.0)
            if head == "power" and len(parts) == 2:
                return cls.power(float(parts[1]))
            if head in ("spower", "scaled-power") and len(parts) == 3:
                return cls.scaled_power(float(parts[1]), float(parts[2]))
        except ValueError:
            pass
        raise ConfigurationError(f"cannot read weight {text!r}")

    @property
    def is_power_like(self) -> bool:
        return self.kind != "tabulated"

    @property
    def singularity(self) -> float:
        """Exponent of blow-up at the boundary (0 for bounded weights)."""
        return max(self.beta, 0.0) if self.is_power_like and self.c != 0 else 0.0

    @property
    def graded_ok(self) -> bool:
        return self.is_power_like

    @property
    def is_zero(self) -> bool:
        if self.kind == "tabulated":
            return not any(self.values)
        return self.c == 0.0

    def at_distance(self, rho) -> np.ndarray:
        if not self.is_power_like:
            raise UsageError("tabulated weights are only known at grid nodes")
        rho = np.asarray(rho, dtype=float)
        if self.beta == 0.0:
            return np.full_like(rho, self.c)
        return self.c * rho ** (-self.beta)

    def at_nodes(self, grid: Grid) -> np.ndarray:
        if self.kind == "tabulated":
            vals = np.asarray(self.values, dtype=float)
            if vals.shape != (grid.n,):
                raise UsageError("tabulated weight does not match the grid")
            return vals
        return self.at_distance(grid.rho)

    def cell_integrals(self, grid: Grid) -> np.ndarray | None:
        """Exact integral of the weight over every grid cell.

        Available for integrable power singularities ``0 < beta < 1``;
        ``None`` otherwise.
        """
        if not self.is_power_like or not 0.0 < self.beta < 1.0:
            return None
        e = 1.0 - self.beta
        edges = grid.A + grid.h * np.arange(grid.n + 1)
        edges[-1] = grid.B
        mid = 0.5 * (grid.A + grid.B)
        lo, hi = edges[:-1], edges[1:]
        # rho is x - A left of the midpoint and B - x right of it
        left = (np.minimum(hi, mid) - grid.A) ** e - (np.minimum(lo, mid) - grid.A) ** e
        right = (grid.B - np.maximum(lo, mid)) ** e - (grid.B - np.maximum(hi, mid)) ** e
        return self.c * (left + right) / e

    def abs_power(self, tau: float) -> "WeightSpec":
        """The weight ``|h|^tau``."""
        if self.kind == "tabulated":
            return WeightSpec.tabulated(np.abs(self.values) ** tau)
        return WeightSpec.scaled_power(abs(self.c) ** tau, self.beta * tau)

    def abs(self) -> "WeightSpec":
        return self.abs_power(1.0)

    def times_rho(self, gamma: float, grid: Grid | None = None) -> "WeightSpec":
        """The weight ``h * rho^gamma``."""
        if self.kind == "tabulated":
            if grid is None:
                raise UsageError("tabulated weights need the grid to rescale")
            return WeightSpec.tabulated(np.asarray(self.values) * grid.rho ** gamma)
        return WeightSpec.scaled_power(self.c, self.beta - gamma)

    def scaled(self, factor: float) -> "WeightSpec":
        if self.kind == "tabulated":
            return WeightSpec.tabulated(np.asarray(self.values) * factor)
        kind = "constant" if self.beta == 0.0 else "scaled-power"
        return WeightSpec(kind, self.c * factor, self.beta)

    def infimum(self, grid: Grid) -> float:
        """Infimum over the interval (nodal minimum for tables)."""
        if self.kind == "tabulated":
            return float(np.min(self.values))
        if self.beta == 0.0:
            return self.c
        if self.beta > 0:
            # rho^-beta is smallest at the centre
            return self.c * (0.5 * grid.length) ** (-self.beta) if self.c >= 0 else -math.inf
        return 0.0 if self.c >= 0 else self.c * (0.5 * grid.length) ** (-self.beta)

    def is_symmetric(self, grid: Grid) -> bool:
        if self.is_power_like:
            return True
        vals = np.asarray(self.values)
        return bool(np.allclose(vals, vals[::-1], rtol=1e-13, atol=0.0))

    def describe(self) -> str:
        if self.kind == "constant":
            return f"const:{self.c!r}"
        if self.kind == "power":
            return f"power:{self.beta!r}"
        if self.kind == "scaled-power":
            return f"spower:{self.c!r}:{self.beta!r}"
        return f"tabulated[{len(self.values)}]"


def critical_exponent(N: int, s: float, p: float) -> float:
    """Fractional Sobolev exponent ``Np/(N-sp)``, infinite when ``N <= sp``."""
    if N <= s * p:
        return math.inf
    return N * p / (N - s * p)


def _over(x: float, y: float) -> float:
    """``x / y`` with ``x / inf = 0``."""
    return 0.0 if math.isinf(y) else x / y


@dataclass(frozen=True)
class ClassQuery:
    tag: str
    N: int
    s: float
    p: float
    q: float
    t: float | None = None

    def __post_init__(self):
        tag = _CLASS_ALIASES.get(self.tag.lower(), self.tag)
        if tag not in CLASSES:
            raise ConfigurationError(f"unknown weight class {self.tag!r}")
        object.__setattr__(self, "tag", tag)
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"N must be a positive integer, got {self.N}")
        if not 0 < self.s < 1:
            raise ConfigurationError(f"s must lie in (0,1), got {self.s}")
        if not self.p > 1:
            raise ConfigurationError(f"p must exceed 1, got {self.p}")
        ps = self.p_star
        if tag == "B_t^q":
            if self.t is None:
                raise ConfigurationError("class B_t^q needs the exponent t")
            if not 1 < self.q < ps:
                raise NumericalDomainError(f"q must lie in (1, {ps}), got {self.q}")
            if not 1 <= self.t < self.q:
                raise NumericalDomainError(f"t must lie in [1, q), got {self.t}")
        elif not 1 <= self.q < ps:
            raise NumericalDomainError(f"q must lie in [1, {ps}), got {self.q}")

    @property
    def p_star(self) -> float:
        return critical_exponent(self.N, self.s, self.p)

    @property
    def a_max(self) -> float:
        if self.tag == "A_q":
            return 0.0
        if self.tag == "B_t^q":
            return self.t - 1.0
        return self.q - 1.0

    @property
    def strict(self) -> bool:
        return self.tag != "B_t^q"

    def budget(self, a):
        """Upper bound that ``1/r`` must stay below for a given ``a``."""
        a = np.asarray(a, dtype=float)
        N, s, p, q, ps = self.N, self.s, self.p, self.q, self.p_star
        inv_ps = 0.0 if math.isinf(ps) else 1.0 / ps
        if self.tag == "A_q":
            return 1.0 - q * inv_ps + 0.0 * a
        if self.tag == "B_q":
            return 1.0 - a / p - (q - a) * inv_ps
        if self.tag == "Btilde_q":
            return s * p / N - a / p - (q - 1.0 - a) * inv_ps
        return 1.0 - a / p - (self.t - a) / q

    def to_dict(self) -> dict:
        d = {"class": self.tag, "N": self.N, "s": self.s, "p": self.p, "q": self.q}
        if self.t is not None:
            d["t"] = self.t
        return d


@dataclass(frozen=True)
class AdmissibilityCertificate:
    cls: str
    a: float
    r: float
    slack: float
    integrability_slack: float
    b_or_tau: float | None
    query: ClassQuery | None = field(default=None, compare=False)
    beta_eff: float = 0.0
    empirical: bool = False

    def to_dict(self) -> dict:
        return {
            "class": self.cls,
            "a": self.a,
            "r": self.r,
            "slack": self.slack,
            "integrability_slack": self.integrability_slack,
            "b_or_tau": self.b_or_tau,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def __bool__(self):
        return True


def effective_singularity(weight: WeightSpec, grid: Grid | None = None,
                          tail_nodes: int = 8) -> float:
    """Blow-up exponent of ``weight`` at the boundary.

    Exact for power weights; for tables it is fitted from the nodes nearest
    to each end point, which is only as good as the grid.
    """
    if weight.is_power_like:
        return weight.singularity
    if grid is None:
        raise UsageError("tabulated weights need the grid they were sampled on")
    vals = np.abs(np.asarray(weight.values, dtype=float))
    rho = grid.rho
    k = min(tail_nodes, grid.n // 2)
    slopes = []
    for idx in (np.arange(k), np.arange(grid.n - k, grid.n)):
        v = vals[idx]
        if np.any(v <= 0):
            continue
        slope = np.polyfit(np.log(rho[idx]), np.log(v), 1)[0]
        slopes.append(-slope)
    return max([0.0] + slopes)


def _r_bounds(query: ClassQuery, beta_eff: float, a):
    """Admissible open interval ``(r_lo, r_hi)`` for each ``a``."""
    a = np.asarray(a, dtype=float)
    budget = query.budget(a)
    with np.errstate(divide="ignore", over="ignore"):
        r_lo = np.where(budget > 0, np.maximum(1.0, 1.0 / np.where(budget > 0, budget, 1.0)), np.inf)
    gamma = beta_eff - query.s * a if query.tag != "A_q" else beta_eff + 0.0 * a
    with np.errstate(divide="ignore", over="ignore"):
        r_hi = np.where(gamma > 0, 1.0 / np.where(gamma > 0, gamma, 1.0), np.inf)
    return budget, r_lo, r_hi


def _interval_feasible(query: ClassQuery, r_lo, r_hi):
    # the class bound on 1/r is closed only for B_t^q, but r > 1 is always strict
    # intervals narrower than rounding are boundary cases, not witnesses
    return np.isfinite(r_lo) & (r_lo * (1.0 + FEASIBILITY_RTOL) < r_hi)


def _holder_companion(query: ClassQuery, a: float, r: float, slack: float) -> float | None:
    """Exponent ``b`` of the Hölder splitting, or ``tau`` for the strengthened class."""
    p, q = query.p, query.q
    if query.tag in ("A_q", "B_q"):
        return (q - a) / (1.0 - 1.0 / r - a / p)
    if query.tag == "B_t^q":
        return (query.t - a) / (1.0 - 1.0 / r - a / p)
    sp_N = query.s * p / query.N
    if q - 1.0 - a > 0:
        return 1.0 / (sp_N - 0.5 * slack)
    # equals 1/(sp/N - slack), written without the cancellation
    return 1.0 / (1.0 / r + a / p)


def _certificate(query, a, r, beta_eff, empirical) -> AdmissibilityCertificate:
    slack = float(query.budget(a)) - 1.0 / r
    gamma = beta_eff - (query.s * a if query.tag != "A_q" else 0.0)
    integ = 1.0 - gamma * r
    return AdmissibilityCertificate(
        cls=query.tag, a=float(a), r=float(r), slack=float(slack),
        integrability_slack=float(integ),
        b_or_tau=_holder_companion(query, a, r, slack),
        query=query, beta_eff=beta_eff, empirical=empirical,
    )


def _search(query: ClassQuery, beta_eff: float):
    a_grid = np.linspace(0.0, query.a_max, A_GRID_POINTS) if query.a_max > 0 else np.zeros(1)
    budget, r_lo, r_hi = _r_bounds(query, beta_eff, a_grid)
    ok = _interval_feasible(query, r_lo, r_hi)
    return a_grid, budget, r_lo, r_hi, ok


def _feasible(query: ClassQuery, beta: float) -> bool:
    return bool(np.any(_search(query, beta)[-1]))


def supremal_beta(query: ClassQuery, tol: float = BISECTION_TOL) -> float | None:
    """Largest power exponent ``beta`` for which ``rho^-beta`` is admissible.

    Found by bisection on the checker itself; ``None`` when even bounded
    weights are excluded.
    """
    lo = 0.0
    if not _feasible(query, lo):
        return None
    hi = query.s * query.a_max + 2.0
    while _feasible(query, hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _feasible(query, mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def check_class(w: WeightSpec, cq: ClassQuery, grid: Grid | None = None):
    """Exhibit an ``(a, r)`` witness placing ``w`` in the queried class.

    Returns an :class:`AdmissibilityCertificate`, or a :class:`Refusal`
    naming the constraint that cannot be met.
    """
    empirical = not w.is_power_like
    beta_eff = effective_singularity(w, grid)
    a_grid, budget, r_lo, r_hi, ok = _search(cq, beta_eff)
    if not np.any(ok):
        binding = "class inequality" if not np.any(budget > 0) else "integrability"
        details = {"beta": beta_eff}
        if w.is_power_like:
            details["beta_sup"] = supremal_beta(cq)
        return Refusal(
            reason=f"no admissible (a, r) for {cq.tag}", binding=binding, details=details
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        width = np.where(ok, np.log(r_hi) - np.log(r_lo), -np.inf)
    k = int(np.argmax(width))  # first maximum: smallest a on ties
    a = float(a_grid[k])
    lo, hi = float(r_lo[k]), float(r_hi[k])
    r = 2.0 * lo if math.isinf(hi) else 0.5 * (lo + hi)
    cert = _certificate(cq, a, r, beta_eff, empirical)
    if not validate_certificate(cert):
        raise NumericalDomainError("internal error: certificate failed re-validation")
    return cert


def validate_witness(w: WeightSpec, cq: ClassQuery, a: float, r: float,
                     grid: Grid | None = None) -> bool:
    """Check a given ``(a, r)`` pair directly against the class conditions."""
    if not (0.0 <= a <= cq.a_max + 1e-15) or not r > 1.0:
        return False
    beta_eff = effective_singularity(w, grid)
    cert = _certificate(cq, a, r, beta_eff, not w.is_power_like)
    return validate_certificate(cert)


def validate_certificate(cert: AdmissibilityCertificate) -> bool:
    q = cert.query
    if q is None:
        raise UsageError("certificate carries no query to validate against")
    if not (0.0 <= cert.a <= q.a_max + 1e-15 and cert.r > 1.0):
        return False
    lhs_slack = float(q.budget(cert.a)) - 1.0 / cert.r
    class_ok = lhs_slack > 0 if q.strict else lhs_slack >= 0
    return bool(class_ok and cert.integrability_slack > 0)


def to_bq(cert: AdmissibilityCertificate):
    """Reuse a witness for a weaker class as a ``B_q`` witness.

    ``A_q`` witnesses carry over with ``a = 0``; strengthened-class witnesses
    carry over unchanged when ``sp <= N``.
    """
    q = cert.query
    if q is None:
        raise UsageError("certificate carries no query")
    if q.tag == "B_q":
        return cert
    if q.tag not in ("A_q", "Btilde_q"):
        raise UsageError(f"no inclusion from {q.tag} into B_q")
    if q.tag == "Btilde_q" and q.s * q.p > q.N:
        return Refusal("inclusion into B_q needs sp <= N", binding="sp <= N")
    target = ClassQuery("B_q", q.N, q.s, q.p, q.q)
    out = _certificate(target, cert.a if q.tag == "Btilde_q" else 0.0, cert.r,
                       cert.beta_eff, cert.empirical)
    if not validate_certificate(out):
        return Refusal("witness does not transfer", binding="class inequality")
    return out


def lattice_supremal_beta(cq: ClassQuery, size: int = 200) -> float:
    """Brute-force boundary: max of ``s a + 1/r`` over an ``(a, 1/r)`` lattice."""
    a = np.linspace(0.0, cq.a_max, size) if cq.a_max > 0 else np.zeros(1)
    inv_r = np.arange(1, size) / size
    AA, RR = np.meshgrid(a, inv_r, indexing="ij")
    budget = cq.budget(AA)
    ok = RR < budget if cq.strict else RR <= budget
    vals = np.where(ok, (cq.s * AA if cq.tag != "A_q" else 0.0) + RR, -np.inf)
    return float(vals.max())


# -- Hölder-type estimates ---------------------------------------------------


@dataclass(frozen=True)
class EstimateReport:
    lhs: float
    factors: dict
    rhs: float
    ratio: float
    warning: str = ""

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "factors": dict(self.factors), "rhs": self.rhs,
                "ratio": self.ratio, "warning": self.warning}


def _mass(grid, weight):
    # one graded midpoint rule for every factor keeps discrete Hölder exact
    graded = weight.graded_ok and weight.singularity > 0
    return weight_mass(grid, weight, graded=graded, exact=False)


def _norm(grid, weight, vals, t):
    return float(np.dot(_mass(grid, weight), np.abs(vals) ** t)) ** (1.0 / t)


def holder_estimate(w: WeightSpec, cert: AdmissibilityCertificate,
                    u: DiscreteFunction, v: DiscreteFunction,
                    E: EnergyAssembly | None = None) -> EstimateReport:
    """Both sides of the four-factor Hölder chain behind the ``B_q`` bound.

    ``int |h||u|^{q-1}|v| <= |h rho^{sa}|_r |u/rho^s|_p^a |u|_b^{q-1-a} |v|_b``
    """
    q = cert.query
    if q is None or q.tag not in ("A_q", "B_q"):
        raise UsageError("holder_estimate needs an A_q or B_q certificate")
    grid = u.grid
    uu, vv = as_values(u, grid), as_values(v, grid)
    s, p, qq, a, r, b = q.s, q.p, q.q, cert.a, cert.r, cert.b_or_tau
    habs = w.abs()
    lhs = float(np.dot(_mass(grid, habs), np.abs(uu) ** (qq - 1.0) * np.abs(vv)))
    f1 = _norm(grid, habs.abs_power(r).times_rho(s * a * r, grid), np.ones(grid.n), r)
    hardy = WeightSpec.power(s * p)
    one = WeightSpec.constant(1.0)
    f2 = _norm(grid, hardy, uu, p) ** a if a > 0 else 1.0
    f3 = _norm(grid, one, uu, b) ** (qq - 1.0 - a)
    f4 = _norm(grid, one, vv, b)
    rhs = f1 * f2 * f3 * f4
    ratio = 0.0 if lhs == 0 else lhs / rhs
    warning = "quadrature resolution: ratio exceeds 1.01" if ratio > 1.01 else ""
    return EstimateReport(lhs, {"weight": f1, "hardy": f2, "lebesgue_u": f3,
                                "lebesgue_v": f4, "b": b}, rhs, ratio, warning)


@dataclass(frozen=True)
class ConstantReport:
    exponent: float
    constant: float
    ratios: tuple
    ok: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "constant": self.constant,
                "ratios": list(self.ratios), "ok": self.ok, **self.extra}


def _family(u):
    if isinstance(u, DiscreteFunction):
        return [u]
    return list(u)


def tau_estimate(w: WeightSpec, cert: AdmissibilityCertificate, u,
                 E: EnergyAssembly):
    """Empirical constant in ``|K |u|^{q-1}|_tau <= C ||u||^{q-1}``.

    ``u`` is one function or a family of nonzero functions.
    """
    q = cert.query
    if q is None or q.tag != "Btilde_q":
        return Refusal("tau_estimate needs a Btilde_q certificate", binding="class")
    tau = cert.b_or_tau
    threshold = q.N / (q.s * q.p)
    Kt = w.abs_power(tau)
    ratios = []
    for f in _family(u):
        vals = as_values(f, E.grid)
        norm = E.energy(vals) ** (1.0 / E.p)
        if norm == 0:
            raise UsageError("the family must not contain the zero function")
        num = float(np.dot(_mass(E.grid, Kt), np.abs(vals) ** ((q.q - 1.0) * tau))) ** (1.0 / tau)
        ratios.append(num / norm ** (q.q - 1.0))
    return ConstantReport(tau, max(ratios), tuple(ratios), tau > threshold,
                          {"threshold": threshold})


def young_exponent(a: float, t: float, q: float) -> float:
    """``m`` with ``a/m + (t-a)/q = 1``, and 0 when ``a = 0``."""
    if a == 0:
        return 0.0
    return a * q / (q - t + a)


def young_split(w: WeightSpec, cert: AdmissibilityCertificate, u,
                E: EnergyAssembly, eps: float):
    """Fit ``C(eps)`` in ``int |K||u|^t <= C(eps) ||u||^m + eps |u|_q^q``."""
    q = cert.query
    if q is None or q.tag != "B_t^q":
        return Refusal("young_split needs a B_t^q certificate", binding="class")
    if not eps > 0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    m = young_exponent(cert.a, q.t, q.q)
    Kabs = w.abs()
    ratios = []
    for f in _family(u):
        vals = as_values(f, E.grid)
        lhs = float(np.dot(_mass(E.grid, Kabs), np.abs(vals) ** q.t))
        lq = float(np.dot(E.grid.weights, np.abs(vals) ** q.q))
        norm = E.energy(vals) ** (1.0 / E.p)
        if norm == 0:
            ratios.append(0.0)
            continue
        ratios.append(max(0.0, (lhs - eps * lq) / norm ** m))
    return ConstantReport(m, max(ratios), tuple(ratios), m < q.p, {"eps": eps})
