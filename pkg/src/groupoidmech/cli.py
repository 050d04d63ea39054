"""Config-driven scenario runner.

    groupoidmech run CONFIG.json [--out DIR]
    groupoidmech compare A.json B.json --projection {identity,phi_l} [--out DIR]

Exit codes: 0 success, 2 bad config or arguments (nothing written),
3 solver failure (failing step on stderr, partial outputs written),
4 I/O error while writing outputs. Set GROUPOIDMECH_LOG_LEVEL (e.g. DEBUG)
for log output on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import jsonschema
import numpy as np

from .diagnostics import (
    ConservationReport,
    DecompositionError,
    NoetherSymmetry,
    noether_constant,
    symplectic_residual,
)
from .geom import exp_so3
from .groupoid import DiscreteLagrangian, del_residual
from .models import (
    BeanieLagrangian,
    BeanieParams,
    CosinePotential,
    HarmonicOscillatorLagrangian,
    HeavyTopParams,
    ModelError,
    PairGroupoid,
    RigidBodyLagrangian,
    RigidBodyPairLagrangian,
    beanie_step,
    harmonic_oscillator_step,
    heavy_top_step,
    moser_veselov_pi,
    rigid_body_step,
)
from .solver import NewtonConfig, SolverError, evolve_step

log = logging.getLogger("groupoidmech")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
LOG_ENV = "GROUPOIDMECH_LOG_LEVEL"
MODELS = ("pair", "lie_group_so3", "heavy_top", "beanie", "rigid_body_pair")
PROJECTIONS = ("identity", "phi_l")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_vec = {"type": "array", "items": _num, "minItems": 1}
_inertia = {"oneOf": [
    {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3},
    {"type": "array", "items": _vec3, "minItems": 3, "maxItems": 3},
]}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["model", "steps"],
    "additionalProperties": False,
    "properties": {
        "model": {"enum": list(MODELS)},
        "steps": {"type": "integer", "minimum": 0},
        "params": {"type": "object"},
        "initial": {"type": "object"},
        "integrator": {"enum": ["closed_form", "newton"]},
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_iters": {"type": "integer", "minimum": 1},
                "residual_tol": _pos,
                "fd_step": _pos,
                "jacobian_mode": {"enum": ["finite-difference", "model-analytic"]},
            },
        },
        "diagnostics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "noether": {"type": "boolean"},
                "casimir": {"type": "boolean"},
                "symplectic_every_k": {"type": "integer", "minimum": 0},
                "reduction": {"type": "boolean"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}

MODEL_SCHEMAS = {
    "pair": (
        {"mass": _pos, "omega": {"type": "number", "minimum": 0}, "h": _pos},
        {"x0": _vec, "x1": _vec}, ["x0", "x1"],
    ),
    "lie_group_so3": (
        {"inertia": _inertia, "h": _pos},
        {"W0_rotvec": _vec3}, ["W0_rotvec"],
    ),
    "heavy_top": (
        {"inertia": _inertia, "h": _pos, "m": _num, "g": _num, "l": _num, "e": _vec3},
        {"Gamma0": _vec3, "W0_rotvec": _vec3}, ["Gamma0", "W0_rotvec"],
    ),
    "beanie": (
        {"m": _pos, "I1": _pos, "I2": _pos, "h": _pos,
         "potential": {"type": "object", "additionalProperties": False,
                       "properties": {"type": {"enum": ["cosine"]}, "a": _num}}},
        {"psi0": _num, "psi1": _num, "Omega": _vec3}, ["psi0", "psi1", "Omega"],
    ),
    "rigid_body_pair": (
        {"inertia": _inertia, "h": _pos},
        {"g0_rotvec": _vec3, "W0_rotvec": _vec3}, ["W0_rotvec"],
    ),
}


class ConfigError(ValueError):
    pass


def _obj(props, required=()):
    return {"type": "object", "additionalProperties": False, "properties": props,
            "required": list(required)}


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        params, initial, required = MODEL_SCHEMAS[cfg["model"]]
        jsonschema.validate(cfg.get("params", {}), _obj(params))
        jsonschema.validate(cfg.get("initial", {}), _obj(initial, required))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    if cfg["model"] == "pair" and len(cfg["initial"]["x0"]) != len(cfg["initial"]["x1"]):
        raise ConfigError("initial: x0 and x1 must have the same length")


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    validate_config(cfg)
    return cfg


# ------------------------------------------------------------ scenarios


@dataclass
class Scenario:
    model: str
    L: DiscreteLagrangian
    g0: object
    steps: int
    integrator: str
    newton: NewtonConfig
    closed_form: Callable[[int], object]  # generator of g_1, g_2, ...
    quantities: Callable[[object], dict]
    diagnostics: dict = field(default_factory=dict)
    reduced_reference: Callable[[], list] | None = None
    project_phi_l: Callable | None = None


def _inertia_arg(value, default=(2.0, 3.0, 4.0)):
    if value is None:
        return default
    arr = np.asarray(value, dtype=float)
    return tuple(arr) if arr.ndim == 1 else arr


def _rb_quantities(W_of, II):
    def q(g):
        return {"pi_norm": float(np.linalg.norm(moser_veselov_pi(W_of(g), II)))}
    return q


def build_scenario(cfg: dict) -> Scenario:
    model = cfg["model"]
    p = cfg.get("params", {})
    ini = cfg["initial"]
    diag = {"noether": True, "casimir": True, "symplectic_every_k": 0, "reduction": False}
    diag.update(cfg.get("diagnostics", {}))
    try:
        newton = NewtonConfig(**cfg.get("solver", {}))
    except ValueError as exc:
        raise ConfigError(f"solver: {exc}") from None
    steps = cfg["steps"]
    integrator = cfg.get("integrator", "closed_form")

    try:
        if model == "pair":
            x0 = np.asarray(ini["x0"], dtype=float)
            x1 = np.asarray(ini["x1"], dtype=float)
            mass, omega, h = p.get("mass", 1.0), p.get("omega", 1.0), p.get("h", 0.1)
            L = HarmonicOscillatorLagrangian(PairGroupoid(x0.size), mass, omega, h)

            def closed_form(N):
                x, y = x0, x1
                for _ in range(N):
                    x, y = y, harmonic_oscillator_step(x, y, mass, omega, h)
                    yield (x, y)

            def quantities(g):
                x, y = g
                v, q = (y - x) / h, 0.5 * (x + y)
                out = {"energy": float(0.5 * mass * v @ v + 0.5 * mass * omega**2 * q @ q)}
                if diag["noether"] and x.size >= 2:
                    J = np.zeros((x.size, x.size))
                    J[0, 1], J[1, 0] = -1.0, 1.0
                    out["angular_momentum_01"] = noether_constant(
                        L, NoetherSymmetry(lambda a: J @ a), g, newton.fd_step, newton.exact)
                return out

            return Scenario(model, L, (x0, x1), steps, integrator, newton, closed_form, quantities, diag)

        if model in ("lie_group_so3", "rigid_body_pair"):
            L_red = RigidBodyLagrangian(_inertia_arg(p.get("inertia")), p.get("h", 0.1))
            II = L_red.II
            W0 = exp_so3(ini["W0_rotvec"])

            def mv(N):
                W, Pi = W0, moser_veselov_pi(W0, II)
                for _ in range(N):
                    W, Pi = rigid_body_step(W, Pi, II)
                    yield W

            if model == "lie_group_so3":
                q = _rb_quantities(lambda g: g, II) if diag["casimir"] else (lambda g: {})
                return Scenario(model, L_red, W0, steps, integrator, newton, mv, q, diag)

            g0 = exp_so3(ini.get("g0_rotvec", [0.0, 0.0, 0.0]))
            L = RigidBodyPairLagrangian(L_red)

            def closed_form(N):
                a = g0
                b = g0 @ W0
                for W in mv(N):
                    a, b = b, b @ W
                    yield (a, b)

            q = _rb_quantities(lambda g: g[0].T @ g[1], II) if diag["casimir"] else (lambda g: {})
            sc = Scenario(model, L, (g0, g0 @ W0), steps, integrator, newton, closed_form, q, diag)
            sc.reduced_reference = lambda: [W0] + list(mv(steps))
            sc.project_phi_l = lambda g: g[0].T @ g[1]
            return sc

        if model == "heavy_top":
            m, grav, ell = p.get("m", 1.0), p.get("g", 1.0), p.get("l", 1.0)
            params = HeavyTopParams(_inertia_arg(p.get("inertia")), p.get("h", 0.1), m * grav * ell,
                                    tuple(p.get("e", (0.0, 0.0, 1.0))))
            L = params.lagrangian()
            gamma0 = np.asarray(ini["Gamma0"], dtype=float)
            nrm = np.linalg.norm(gamma0)
            if nrm == 0:
                raise ConfigError("initial/Gamma0 must be non-zero")
            gamma0 = gamma0 / nrm
            W0 = exp_so3(ini["W0_rotvec"])

            def closed_form(N):
                state = (gamma0, W0, moser_veselov_pi(W0, params.II))
                for _ in range(N):
                    state = heavy_top_step(state, params)
                    yield (state[0], state[1])

            sym = NoetherSymmetry(lambda gam: gam)

            def quantities(g):
                out = {}
                if diag["noether"]:
                    out["pi_dot_gamma"] = float(moser_veselov_pi(g[1], params.II) @ g[0])
                    out["noether_constant"] = noether_constant(L, sym, g, newton.fd_step, newton.exact)
                if diag["casimir"]:
                    out["gamma_norm"] = float(np.linalg.norm(g[0]))
                return out

            return Scenario(model, L, (gamma0, W0), steps, integrator, newton, closed_form, quantities, diag)

        if model == "beanie":
            pot = p.get("potential", {})
            params = BeanieParams(p.get("m", 1.0), p.get("I1", 1.0), p.get("I2", 0.5), p.get("h", 0.1),
                                  CosinePotential(pot.get("a", 1.0)))
            L = BeanieLagrangian(params)
            q0 = np.array([ini["psi0"], ini["psi1"], *ini["Omega"]], dtype=float)

            def closed_form(N):
                q = q0
                for _ in range(N):
                    q = beanie_step(q, params)
                    yield q

            def quantities(g):
                if not (diag["noether"] or diag["casimir"]):
                    return {}
                return {"omega3": float(g[4]), "omega12_sq": float(g[2] ** 2 + g[3] ** 2)}

            return Scenario(model, L, q0, steps, integrator, newton, closed_form, quantities, diag)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None
    raise ConfigError(f"unknown model {model!r}")  # pragma: no cover - schema rejects this


@dataclass
class RunResult:
    elements: list
    residuals: list
    iterations: list
    error: str | None = None
    failed_step: int | None = None


def simulate(sc: Scenario) -> RunResult:
    """Integrate the scenario; stops at the first failing step."""
    res = RunResult([sc.g0], [float("nan")], [0])
    G = sc.L.groupoid
    g = sc.g0
    source = sc.closed_form(sc.steps) if sc.integrator == "closed_form" else None
    for k in range(1, sc.steps + 1):
        try:
            if source is not None:
                h = next(source)
                r = float(np.max(np.abs(del_residual(sc.L, g, h, sc.newton.fd_step, sc.newton.exact).coords)))
                its = 0
            else:
                h, report = evolve_step(sc.L, g, G.continue_guess(g), sc.newton)
                r, its = report.residual_norm, report.iterations
        except (SolverError, ModelError) as exc:
            res.error, res.failed_step = str(exc), k
            log.error("solver failure at step %d: %s", k, exc)
            break
        res.elements.append(h)
        res.residuals.append(r)
        res.iterations.append(its)
        g = h
    return res


# -------------------------------------------------------------- output


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    return format(x, ".17g")


def _json_num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def run_scenario_outputs(sc: Scenario, res: RunResult, out: Path) -> dict:
    G = sc.L.groupoid
    charts = [G.to_chart(g) for g in res.elements]
    ncol = charts[0].size
    rows = [[k, *map(_fmt, c), _fmt(r), its]
            for k, (c, r, its) in enumerate(zip(charts, res.residuals, res.iterations))]
    header = ["step", *[f"c{i}" for i in range(ncol)], "del_residual", "newton_iterations"]

    series: dict[str, list] = {}
    for g in res.elements:
        for name, val in sc.quantities(g).items():
            series.setdefault(name, []).append(val)
    report = ConservationReport.from_series(series)

    every = sc.diagnostics["symplectic_every_k"]
    sym_vals: list = [None] * len(res.elements)
    if every > 0:
        for k in range(0, len(res.elements) - 1, every):
            try:
                sym_vals[k] = symplectic_residual(sc.L, res.elements[k], res.elements[k + 1], sc.newton)
            except (SolverError, DecompositionError) as exc:
                log.warning("symplectic residual unavailable at step %d: %s", k, exc)
                sym_vals[k] = float("nan")
    names = list(series)
    diag_header = ["step", *names] + (["symplectic_residual"] if every > 0 else [])
    diag_rows = []
    for k in range(len(res.elements)):
        row = [k, *(_fmt(series[n][k]) for n in names)]
        if every > 0:
            row.append(_fmt(sym_vals[k]))
        diag_rows.append(row)

    reduction = None
    if sc.diagnostics["reduction"] and sc.reduced_reference is not None:
        ref = sc.reduced_reference()[: len(res.elements)]
        reduction = max(float(np.max(np.abs(sc.project_phi_l(g) - W))) for g, W in zip(res.elements, ref))

    finite_sym = [v for v in sym_vals if v is not None and math.isfinite(v)]
    finite_res = [r for r in res.residuals if math.isfinite(r)]
    summary = {
        "model": sc.model,
        "integrator": sc.integrator,
        "steps_requested": sc.steps,
        "steps_completed": len(res.elements) - 1,
        "status": "ok" if res.error is None else "solver_failure",
        "failed_step": res.failed_step,
        "error": res.error,
        "max_del_residual": _json_num(max(finite_res)) if finite_res else None,
        "max_newton_iterations": int(max(res.iterations)),
        "conserved": {
            n: {
                "initial": _json_num(report.values[n][0]),
                "max_abs_drift": _json_num(report.max_abs_drift[n]),
                "max_rel_drift": _json_num(report.max_rel_drift[n]),
            }
            for n in names
        },
        "max_symplectic_residual": _json_num(max(finite_sym)) if finite_sym else None,
        "reduction_discrepancy": _json_num(reduction),
    }
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "trajectory.csv", header, rows)
    _write_csv(out / "diagnostics.csv", diag_header, diag_rows)
    _write_json(out / "summary.json", summary)
    return summary


def _out_dir(arg: str | None, cfg: dict) -> Path:
    if arg is not None:
        return Path(arg)
    return Path(cfg.get("output", {}).get("dir", "."))


def cmd_run(config_path, out=None) -> int:
    try:
        cfg = load_config(config_path)
        sc = build_scenario(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    res = simulate(sc)
    try:
        run_scenario_outputs(sc, res, _out_dir(out, cfg))
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if res.error is not None:
        print(f"solver failure at step {res.failed_step}: {res.error}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _project(projection: str, sa: Scenario, sb: Scenario) -> Callable:
    if projection == "identity":
        if sa.model != sb.model:
            raise ConfigError(f"identity projection needs equal models, got {sa.model} and {sb.model}")
        return sa.L.groupoid.to_chart
    if projection == "phi_l":
        if sa.model != "rigid_body_pair" or sb.model != "lie_group_so3":
            raise ConfigError("phi_l maps rigid_body_pair states to lie_group_so3 states")
        return lambda g: sb.L.groupoid.to_chart(sa.project_phi_l(g))
    raise ConfigError(f"unknown projection {projection!r}")


def cmd_compare(path_a, path_b, projection, out=None) -> int:
    try:
        cfg_a, cfg_b = load_config(path_a), load_config(path_b)
        sa, sb = build_scenario(cfg_a), build_scenario(cfg_b)
        if sa.steps != sb.steps:
            raise ConfigError(f"step counts differ ({sa.steps} vs {sb.steps})")
        proj = _project(projection, sa, sb)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ra, rb = simulate(sa), simulate(sb)
    n = min(len(ra.elements), len(rb.elements))
    chart_b = sb.L.groupoid.to_chart
    disc = [float(np.max(np.abs(proj(a) - chart_b(b)), initial=0.0))
            for a, b in zip(ra.elements[:n], rb.elements[:n])]
    failed = ra.error or rb.error
    summary = {
        "projection": projection,
        "steps_requested": sa.steps,
        "steps_compared": n - 1,
        "max_discrepancy": _json_num(max(disc)),
        "status": "ok" if not failed else "solver_failure",
        "error": failed,
    }
    try:
        d = _out_dir(out, cfg_a)
        d.mkdir(parents=True, exist_ok=True)
        _write_csv(d / "discrepancy.csv", ["step", "discrepancy"],
                   [[k, _fmt(v)] for k, v in enumerate(disc)])
        _write_json(d / "compare_summary.json", summary)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if failed:
        step = ra.failed_step if ra.error else rb.failed_step
        print(f"solver failure at step {step}: {failed}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="groupoidmech", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="integrate one scenario")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    c = sub.add_parser("compare", help="compare two scenarios step by step")
    c.add_argument("config_a")
    c.add_argument("config_b")
    c.add_argument("--projection", required=True, help=f"one of {', '.join(PROJECTIONS)}")
    c.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "run":
        return cmd_run(args.config, args.out)
    return cmd_compare(args.config_a, args.config_b, args.projection, args.out)


if __name__ == "__main__":
    sys.exit(main())
