"""Command-line front end.

Every subcommand writes ``result.json`` (and, for function outputs,
``result.csv``) into the output directory and prints a one-line summary.
Exit status: 0 converged or certified, 2 unconverged or refused, 1 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .eigen import RayleighConfig, first_eigenpair
from .errors import FracplapError, Refusal, UsageError
from .grid import build_grid
from .nonlinear import ProblemSpec, SolverConfig, minimize, mountain_pass, multi_solution_search
from .operator import assemble
from .verifiers import MoserConfig, hardy_constant, moser_certify, scaling_check
from .weights import _CLASS_ALIASES, ClassQuery, WeightSpec, check_class, critical_exponent

COMMANDS = ("eig", "solve", "multi", "check-weight", "hardy", "moser", "scaling")
SEED_ENV = "FRACP_SEED"
DEFAULT_SCALING_T = 8.0


@dataclass
class RunConfig:
    command: str = ""
    s: float = 0.5
    p: float = 2.0
    q: float | None = None
    lam: float = 0.0
    n: int = 128
    A: float = -1.0
    B: float = 1.0
    h: str = "const:1"
    K: str = "const:1"
    f: str = "const:1"
    cls: str = "Bq"
    beta: float = 0.0
    N: int = 1
    t: float | None = None
    count: int = 2
    tol: float = 1e-9
    max_iter: int = 5000
    init: str = "positive-bump"
    out: str = "."
    seed: int = 0
    extra: dict = field(default_factory=dict, repr=False)

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if not 0 < self.s < 1:
            raise UsageError(f"s must lie in (0,1), got {self.s}")
        if not self.p > 1:
            raise UsageError(f"p must exceed 1, got {self.p}")
        if self.n < 3:
            raise UsageError(f"n must be at least 3, got {self.n}")
        if not self.A < self.B:
            raise UsageError(f"need A < B, got A={self.A}, B={self.B}")
        if self.q is not None:
            ps = critical_exponent(self.N, self.s, self.p)
            if not 1 <= self.q < ps:
                raise UsageError(f"q must lie in [1, {ps}), got {self.q}")
        if self.count < 1:
            raise UsageError(f"count must be positive, got {self.count}")
        if self.t is not None and not self.t > 0:
            raise UsageError(f"t must be positive, got {self.t}")


# config-file key -> RunConfig attribute
_KEYS = {f.name: f.name for f in fields(RunConfig) if f.name not in ("command", "extra", "cls")}
_KEYS["class"] = "cls"
_KEYS["max-iter"] = "max_iter"
_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(attr: str, text: str):
    kind = _TYPES[attr]
    try:
        if kind == "int":
            return int(text)
        if kind in ("float", "float | None"):
            return float(text)
    except ValueError:
        raise UsageError(f"bad value for {attr}: {text!r}") from None
    return text


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in _KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        attr = _KEYS[key]
        out[attr] = _coerce(attr, value)
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracplap", description="Fractional p-Laplacian laboratory")
    parser.add_argument("command", choices=COMMANDS)
    add = parser.add_argument
    add("--config", help="key=value file; flags override its entries")
    add("--s", type=float)
    add("--p", type=float)
    add("--q", type=float)
    add("--lam", type=float)
    add("--n", type=int)
    add("--A", type=float)
    add("--B", type=float)
    add("--h", help="weight: const:c, power:beta, spower:c:beta or zero")
    add("--K", help="weight of the q-power term")
    add("--f", help="forcing for the scaling check")
    add("--class", dest="cls", help="weight class: Aq, Bq, Btilde, Btq")
    add("--beta", type=float)
    add("--N", type=int)
    add("--t", type=float)
    add("--count", type=int)
    add("--tol", type=float)
    add("--max-iter", dest="max_iter", type=int)
    add("--init", choices=("positive-bump", "random"))
    add("--out")
    add("--seed", type=int)
    return parser


def parse_config(argv=None) -> RunConfig:
    """Defaults, then the config file, then flags, then ``FRACP_SEED``."""
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    for attr, v in vars(ns).items():
        if attr not in ("command", "config") and v is not None:
            values[attr] = v
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            values["seed"] = int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    cfg = RunConfig(command=ns.command, **values)
    cfg.validate()
    return cfg


# -- output -----------------------------------------------------------------------


def _json_safe(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return _json_safe(obj.item())
    return obj


def write_json(path: Path, payload) -> None:
    text = json.dumps(_json_safe(payload), indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def write_csv(path: Path, header, columns) -> None:
    rows = [",".join(header)]
    for row in zip(*columns):
        rows.append(",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in row))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8", newline="\n")


# -- commands ---------------------------------------------------------------------


def _grid_and_assembly(cfg: RunConfig):
    grid = build_grid(cfg.A, cfg.B, cfg.n)
    return grid, assemble(grid, cfg.s, cfg.p)


def _problem(cfg: RunConfig) -> ProblemSpec:
    if cfg.q is None:
        raise UsageError("this command needs --q")
    return ProblemSpec(cfg.s, cfg.p, cfg.q, K=WeightSpec.parse(cfg.K), lam=cfg.lam,
                       h=WeightSpec.parse(cfg.h))


def _solver_cfg(cfg: RunConfig) -> SolverConfig:
    return SolverConfig(max_iter=cfg.max_iter, tol=cfg.tol)


def _class_query(cfg: RunConfig, q: float) -> ClassQuery:
    tag = _CLASS_ALIASES.get(cfg.cls.lower(), cfg.cls)
    if tag == "B_t^q" and cfg.t is None:
        raise UsageError("class B_t^q needs --t")
    return ClassQuery(tag, cfg.N, cfg.s, cfg.p, q, cfg.t if tag == "B_t^q" else None)


def cmd_eig(cfg, out):
    grid, E = _grid_and_assembly(cfg)
    rc = RayleighConfig(max_iter=cfg.max_iter, tol=cfg.tol, init=cfg.init, seed=cfg.seed)
    r = first_eigenpair(E, WeightSpec.parse(cfg.h), rc)
    write_json(out / "result.json", r.to_dict())
    write_csv(out / "result.csv", ["x", "u"], [grid.nodes, r.u.values])
    return r.converged, f"lambda={r.lam:.12g} residual={r.residual:.3e} converged={r.converged}"


def cmd_solve(cfg, out):
    grid, E = _grid_and_assembly(cfg)
    spec = _problem(cfg)
    runner = mountain_pass if spec.superlinear else minimize
    r = runner(spec, E, _solver_cfg(cfg))
    if isinstance(r, Refusal):
        write_json(out / "result.json", r.to_dict())
        return False, f"refused: {r.reason}"
    write_json(out / "result.json", r.to_dict())
    write_csv(out / "result.csv", ["x", "u"], [grid.nodes, r.u.values])
    return r.converged, f"phi={r.phi:.12g} residual={r.residual:.3e} converged={r.converged}"


def cmd_multi(cfg, out):
    grid, E = _grid_and_assembly(cfg)
    res = multi_solution_search(_problem(cfg), E, _solver_cfg(cfg), count=cfg.count)
    write_json(out / "result.json", res.to_list())
    header = ["x"] + [f"u{i + 1}" for i in range(len(res))]
    write_csv(out / "result.csv", header, [grid.nodes] + [r.u.values for r in res])
    phis = " ".join(f"{r.phi:.12g}" for r in res)
    ok = not res.shortfall and all(r.converged for r in res)
    return ok, f"found={len(res)}/{res.requested} phi=[{phis}] converged={ok}"


def cmd_check_weight(cfg, out):
    q = cfg.q if cfg.q is not None else cfg.p
    w = WeightSpec.power(cfg.beta) if cfg.beta else WeightSpec.parse(cfg.h)
    query = _class_query(cfg, q)
    grid = build_grid(cfg.A, cfg.B, cfg.n) if w.kind == "tabulated" else None
    cert = check_class(w, query, grid)
    write_json(out / "result.json", cert.to_dict())
    if isinstance(cert, Refusal):
        return False, f"refused: {cert.reason}"
    return True, f"class={cert.cls} a={cert.a:.6g} r={cert.r:.6g} slack={cert.slack:.6g}"


def cmd_hardy(cfg, out):
    _, E = _grid_and_assembly(cfg)
    rep = hardy_constant(E)
    write_json(out / "result.json", rep.to_dict())
    (out / "result.csv").write_text(rep.to_csv(), encoding="utf-8", newline="\n")
    ok = math.isfinite(rep.constant)
    return ok, f"regime={rep.regime} constant={rep.constant:.12g} size={rep.size}"


def cmd_moser(cfg, out):
    grid, E = _grid_and_assembly(cfg)
    h = WeightSpec.parse(cfg.h)
    q = cfg.q if cfg.q is not None else cfg.p
    cert = check_class(h, _class_query(cfg, q), grid)
    if isinstance(cert, Refusal):
        write_json(out / "result.json", cert.to_dict())
        return False, f"refused: {cert.reason}"
    eig = first_eigenpair(E, h, RayleighConfig(max_iter=cfg.max_iter, tol=cfg.tol))
    mc = moser_certify(eig.u, eig.lam, h, cert, MoserConfig())
    write_json(out / "result.json", mc.to_dict())
    write_csv(out / "result.csv", ["x", "u"], [grid.nodes, eig.u.values])
    ok = mc.issued and eig.converged
    return ok, (f"issued={mc.issued} bound={mc.bound:.12g} direct_max={mc.direct_max:.12g} "
                f"terminal_k={mc.terminal_k}")


def cmd_scaling(cfg, out):
    grid, E = _grid_and_assembly(cfg)
    f = WeightSpec.parse(cfg.f).at_nodes(grid)
    rep = scaling_check(E, f, [cfg.t if cfg.t is not None else DEFAULT_SCALING_T], N=cfg.N)
    write_json(out / "result.json", rep.to_dict())
    return rep.passed, f"max_error={rep.max_error:.3e} passed={rep.passed}"


_DISPATCH = {
    "eig": cmd_eig, "solve": cmd_solve, "multi": cmd_multi,
    "check-weight": cmd_check_weight, "hardy": cmd_hardy, "moser": cmd_moser,
    "scaling": cmd_scaling,
}


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ok, summary = _DISPATCH[cfg.command](cfg, out)
    print(f"{cfg.command}: {summary}")
    return 0 if ok else 2


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except (FracplapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
