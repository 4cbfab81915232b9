"""Config-driven command line: ``levykit <stage> --config FILE [--seed S] [--out DIR] [--threads N]``.

The config is YAML with sections named after the modules; see the README for the keys.
Every stage writes a JSON report plus CSV tables into the output directory, and the run
writes ``manifest.json`` with the config hash, the versions and each stage's verdict.
Exit status: 0 all acceptance lines pass, 1 some fail, 2 config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy
import yaml

from . import __version__, measures, scaling
from .errors import ConfigError, LevyKitError, OutOfRange, Report, _plain
from .expressions import compile_expression
from .grid import GridFunction, Lattice
from .operators import FrozenKernel, LowerOrderCoefficients, symbol_on_lattice
from .simulate import CoefficientField, IncrementSampler, density, ks_against_density, ks_threshold
from .solver import (ProblemSpec, estimate_report, lacunary_forcing, residual, solve_constant_fk,
                     solve_constant_spectral, solve_variable)
from .spaces import build_filter_bank, equivalence_report, holder_norm, kappa_norms

STAGES = ("check-assumptions", "symbol", "density", "norms", "solve", "estimates")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
SECTIONS = {"pipeline", "seed", "threads", "scaling", "measure", "lattice", "assumptions", "symbol",
            "density", "norms", "operator", "problem", "solver", "estimates"}


# ---------------------------------------------------------------- config

def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        cfg = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("the config must be a mapping of sections")
    unknown = set(cfg) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for key in ("scaling", "measure"):
        if not isinstance(cfg.get(key), dict):
            raise ConfigError(f"section {key!r} is required and must be a mapping")
    pipeline = cfg.get("pipeline", list(STAGES))
    if isinstance(pipeline, str):
        pipeline = [pipeline]
    bad = [s for s in pipeline if s not in STAGES]
    if bad:
        raise ConfigError(f"unknown pipeline stages {bad}; choose from {list(STAGES)}")
    cfg["pipeline"] = list(pipeline)
    cfg["_base_dir"] = str(path.parent)
    return cfg


def config_hash(cfg: dict) -> str:
    clean = {k: v for k, v in cfg.items() if not k.startswith("_")}
    text = json.dumps(_plain(clean), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _section(cfg: dict, name: str) -> dict:
    sec = cfg.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return sec


def _number(sec: dict, key: str, default: Any = None, lo: float | None = None, hi: float | None = None,
            where: str = "") -> float:
    val = sec.get(key, default)
    if val is None:
        raise ConfigError(f"{where}{key} is required")
    try:
        val = float(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}{key} must be a number, got {val!r}") from None
    if (lo is not None and val < lo) or (hi is not None and val > hi) or not math.isfinite(val):
        raise ConfigError(f"{where}{key}={val} is outside [{lo}, {hi}]")
    return val


class Context:
    """Objects built once from the config and shared by the stages."""

    def __init__(self, cfg: dict, seed: int):
        self.cfg = cfg
        self.seed = seed
        try:
            self.sf = scaling.from_config(cfg["scaling"], Path(cfg.get("_base_dir", ".")))
            self.measure = measures.from_config(cfg["measure"], self.sf)
        except KeyError as exc:
            raise ConfigError(f"missing key {exc} in scaling/measure") from None
        if self.measure.scaling is None:
            self.measure = measures.LevyMeasure(self.measure.directions, self.measure.weights,
                                                self.measure.profiles, self.measure.alpha, self.sf,
                                                self.measure.variant, dict(self.measure.info))
        self.d = self.measure.d

    def lattice(self, sec: dict | None = None, default_n: int = 256, default_L: float = 1.0) -> Lattice:
        sec = sec if sec is not None else _section(self.cfg, "lattice")
        base = _section(self.cfg, "lattice")
        n = sec.get("n", base.get("n", default_n))
        L = sec.get("L", base.get("L", default_L))
        n = [int(v) for v in np.atleast_1d(n)]
        if len(n) == 1:
            n = n * self.d
        try:
            return Lattice(tuple(n), tuple(float(v) for v in np.atleast_1d(L)))
        except OutOfRange as exc:
            raise ConfigError(f"lattice: {exc}") from None

    def field_expr(self, text: str) -> Callable[[float, np.ndarray], np.ndarray]:
        expr = compile_expression(str(text), ("t", "x"), {"x": self.d})
        return lambda t, pts: expr(t=t, x=pts)

    def problem(self, overrides: dict | None = None) -> ProblemSpec:
        prob = dict(_section(self.cfg, "problem"))
        prob.update(overrides or {})
        op = _section(self.cfg, "operator")
        lat = self.lattice()
        kind = op.get("kind", "plain")
        kw: dict = {}
        if kind == "constant_matrix":
            kw["G"] = np.asarray(op["G"], dtype=float).reshape(self.d, self.d)
        elif kind == "kernel":
            kw["rho"] = FrozenKernel.from_expression(str(op["rho"]), self.d, op.get("K"))
        elif kind == "matrix_field":
            kw["Gfield"] = self._matrix_field(op["G"])
        elif kind != "plain":
            raise ConfigError(f"operator.kind must be plain, constant_matrix, kernel or matrix_field, not {kind!r}")
        lower = op.get("lower")
        if lower:
            kw["lower"] = self._lower(lower)
        forcing = prob.get("forcing", "1")
        f = lacunary_forcing(lat, self.sf, _number(prob, "beta", 0.4)) if forcing == "lacunary" \
            else self.field_expr(forcing)
        return ProblemSpec(lat, self.measure, f, lam=_number(prob, "lambda", 0.0, lo=0.0, where="problem."),
                           T=_number(prob, "T", 1.0, lo=1e-12, where="problem."),
                           beta=_number(prob, "beta", 0.4, lo=1e-9, where="problem."), kind=kind, **kw)

    def _matrix_field(self, spec) -> CoefficientField:
        d = self.d
        if isinstance(spec, (str, int, float)):
            expr = compile_expression(str(spec), ("x",), {"x": d})
            return CoefficientField.scalar_field(lambda z: expr(x=z), d, label=str(spec))
        rows = [[compile_expression(str(e), ("x",), {"x": d}) for e in row] for row in spec]
        if len(rows) != d or any(len(r) != d for r in rows):
            raise ConfigError("operator.G must be a scalar expression or a d x d list of expressions")

        def func(z):
            z = np.asarray(z, dtype=float)
            out = np.empty(z.shape[:-1] + (d, d))
            for i in range(d):
                for j in range(d):
                    out[..., i, j] = rows[i][j](x=z)
            return out
        return CoefficientField(func, d, label="matrix expression")

    def _lower(self, sec: dict) -> LowerOrderCoefficients:
        d = self.d
        kw: dict = {}
        if "p" in sec:
            kw["p"] = self.field_expr(sec["p"])
        if "b" in sec:
            parts = [self.field_expr(e) for e in np.atleast_1d(sec["b"])]
            if len(parts) != d:
                raise ConfigError("operator.lower.b needs one expression per axis")
            kw["b"] = lambda t, pts: np.stack([np.broadcast_to(f(t, pts), pts.shape[:-1]) for f in parts], axis=-1)
        if "q" in sec:
            kw["q_scale"] = self.field_expr(sec["q"])
        if "rho2" in sec:
            kw["rho2"] = FrozenKernel.from_expression(str(sec["rho2"]), d)
        if "measure" in sec:
            kw["nu2"] = measures.from_config(sec["measure"], self.sf)
        return LowerOrderCoefficients(self.measure, **kw)


# ---------------------------------------------------------------- output helpers

def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        return str(v)
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: Path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------- stages

def stage_check_assumptions(ctx: Context, out: Path) -> Report:
    sec = _section(ctx.cfg, "assumptions")
    a = ctx.measure.alpha
    # defaults: inner exponent above the order, outer below it, both inside the order's regime
    lower, upper = (0.0, 1.0) if a < 1 else (1.0, 2.0) if a > 1 else (0.0, 2.0)
    a1 = _number(sec, "alpha1", 0.5 * (a + upper), lo=0.0, where="assumptions.")
    a2 = _number(sec, "alpha2", 0.5 * (a + lower), lo=0.0, where="assumptions.")
    params = measures.AssumptionParams(alpha1=a1, alpha2=a2, N0=sec.get("N0"))
    rep = measures.check_assumption_A(ctx.measure, params)
    grid = scaling.log_grid_pairs(float(sec.get("eps_min", 1e-3)), 1.0, int(sec.get("grid", 9)))
    law = scaling.check_scaling_law(ctx.sf, grid)
    summary = {k: v for k, v in law.items[-1].items() if k not in ("name", "passed")}
    rep.add("scaling law", law.passed, **summary)
    write_json(out / "check_assumptions.json", rep.to_dict())
    write_csv(out / "check_assumptions.csv", ["item", "passed"], [[it["name"], int(it["passed"])] for it in rep.items])
    return rep


def stage_symbol(ctx: Context, out: Path) -> Report:
    sec = _section(ctx.cfg, "symbol")
    lat = ctx.lattice(_section(sec, "lattice") if "lattice" in sec else None)
    spectral = symbol_on_lattice(ctx.measure, lat)
    from .operators import _atoms, generator_multiplier
    quad = generator_multiplier(_atoms(ctx.measure), lat, ctx.measure.chi_mode)
    freqs = lat.frequencies().reshape(-1, lat.d)
    s, q = spectral.reshape(-1), quad.reshape(-1)
    order = np.lexsort(freqs.T[::-1])
    rows = [[*freqs[i].tolist(), s[i].real, s[i].imag, q[i].real, q[i].imag] for i in order]
    header = [f"xi{i + 1}" for i in range(lat.d)] + ["psi_re", "psi_im", "quadrature_re", "quadrature_im"]
    write_csv(out / "symbol.csv", header, rows)
    scale = float(np.max(np.abs(s)))
    core = np.linalg.norm(freqs, axis=1) <= 0.25 * float(np.max(np.abs(freqs)))
    err = float(np.max(np.abs(s - q)[core]) / scale) if scale > 0 else 0.0
    tol = _number(sec, "tolerance", 1e-3, lo=0.0, where="symbol.")
    rep = Report("symbol")
    rep.add("spectral vs quadrature", err <= tol, relative_error=err, tolerance=tol, modes=int(core.sum()))
    rep.add("real part nonpositive", bool(np.all(s.real <= 1e-12 * max(scale, 1.0))), max_real=float(s.real.max()))
    write_json(out / "symbol.json", rep.to_dict())
    return rep


def stage_density(ctx: Context, out: Path) -> Report:
    sec = _section(ctx.cfg, "density")
    t = _number(sec, "t", 1.0, lo=1e-12, where="density.")
    lat = ctx.lattice(sec, default_n=1024, default_L=40.0)
    dens = density(ctx.measure, t, lat)
    rep = Report("density")
    mass = dens.mass()
    rep.add("normalization", abs(mass - 1.0) <= 1e-6, mass=mass, clip_mass=dens.clip_mass,
            imag_residue=dens.imag_residue, nyquist_level=dens.nyquist_level)
    pts = dens.lattice.points().reshape(-1, lat.d)
    write_csv(out / "density.csv", [f"x{i + 1}" for i in range(lat.d)] + ["p"],
              [[*pts[i].tolist(), v] for i, v in enumerate(dens.values.reshape(-1))])
    count = int(sec.get("samples", 0))
    if count and lat.d == 1:
        sampler = IncrementSampler(ctx.measure, seed_root=ctx.seed, horizon=t)
        draws = sampler.sample_increments(t, count)[:, 0]
        stat, pval = ks_against_density(draws, dens)
        thr = ks_threshold(count)
        rep.add("sampler KS", stat < thr, statistic=stat, threshold=thr, p_value=pval, samples=count,
                sampler=sampler.describe())
        write_csv(out / "samples.csv", ["index", "z"], [[i, v] for i, v in enumerate(draws.tolist())])
    write_json(out / "density.json", rep.to_dict())
    return rep


def stage_norms(ctx: Context, out: Path) -> Report:
    sec = _section(ctx.cfg, "norms")
    lat = ctx.lattice(sec if "n" in sec or "L" in sec else None)
    beta = _number(sec, "beta", 0.4, lo=1e-9, where="norms.")
    kappa = _number(sec, "kappa", 1.0, lo=1e-9, hi=1.0, where="norms.")
    texts = sec.get("functions") or ["sin(2*pi*x1)", "cos(2*pi*x1)^3", "exp(cos(2*pi*x1))"]
    bank = build_filter_bank(ctx.sf, lat, J=sec.get("J"))
    family = []
    rows = []
    for text in texts:
        expr = compile_expression(str(text), ("x",), {"x": lat.d})
        u = GridFunction(np.broadcast_to(expr(x=lat.points()), lat.shape).copy(), lat)
        family.append(u)
        kn = kappa_norms(u, bank, ctx.measure, beta, kappa)
        rows.append([json.dumps(str(text)), u.sup(), holder_norm(u, ctx.sf, beta), kn["besov"],
                     kn["fractional"], kn["resolvent"]])
    write_csv(out / "norms.csv", ["function", "sup", "holder_beta", "besov_kappa_beta", "fractional",
                                  "resolvent"], rows)
    rep = equivalence_report(family, ctx.sf, bank, ctx.measure, beta, kappa)
    limit = _number(sec, "max_spread", 50.0, lo=1.0, where="norms.")
    item = rep.item("ratio interval")
    item["passed"] = bool(item["passed"] and item["spread"] <= limit)
    item["limit"] = limit
    write_json(out / "norms.json", rep.to_dict())
    return rep


def _expectations(sec: dict, values: Callable[[np.ndarray], np.ndarray], rep: Report) -> None:
    for i, exp in enumerate(sec.get("expect") or []):
        pt = np.atleast_2d(np.asarray(exp["x"], dtype=float))
        target = float(compile_expression(str(exp["value"]), ())())
        got = float(values(pt)[0])
        tol = float(exp.get("tol", 1e-8))
        rep.add(f"expect {i}", abs(got - target) <= tol, x=pt[0].tolist(), value=got, target=target, tol=tol)


def stage_solve(ctx: Context, out: Path) -> Report:
    sec = _section(ctx.cfg, "solver")
    p = ctx.problem()
    scheme = sec.get("scheme", "spectral" if p.constant else "picard")
    steps = int(_number(sec, "time_steps", 64, lo=1, where="solver."))
    rep = Report("solve")
    points = np.atleast_2d(np.asarray(sec.get("points", [[0.0] * p.lattice.d]), dtype=float))
    if scheme == "fk":
        paths = int(_number(sec, "n_paths", 10000, lo=2, where="solver."))
        allpts = np.vstack([points] + [np.atleast_2d(e["x"]) for e in sec.get("expect") or []])
        result = solve_constant_fk(p, paths, steps, seed=ctx.seed, points=allpts)
        lookup = {tuple(x): (v, s) for x, v, s in zip(allpts.tolist(), result.u[0], result.stderr[0])}
        values = lambda pts: np.array([lookup[tuple(x)][0] for x in pts.tolist()])
        rows = [[*x, lookup[tuple(x)][0], lookup[tuple(x)][1]] for x in points.tolist()]
        write_csv(out / "solution_points.csv", [f"x{i + 1}" for i in range(p.lattice.d)] + ["u", "stderr"], rows)
    else:
        if scheme == "spectral":
            result = solve_constant_spectral(p, steps)
        elif scheme in ("picard", "mol"):
            theta = sec.get("theta")
            result = solve_variable(p, steps, scheme=scheme, theta_homotopy=theta,
                                    tol=_number(sec, "tol", 1e-6, lo=0.0, where="solver."),
                                    max_iter=int(sec.get("max_iter", 200)))
        else:
            raise ConfigError(f"solver.scheme must be spectral, fk, picard or mol, not {scheme!r}")
        last = result.slice(-1)
        values = last.evaluate
        if steps >= 2:
            res = residual(result, p)
            scale = float(np.max(np.abs(result.u))) + max(float(np.max(np.abs(p.f(float(t))))) for t in result.times)
            limit = sec.get("residual_limit")
            passed = True if limit is None else max(res) <= float(limit) * scale
            rep.add("residual", passed, max=max(res), last=res[-1], scale=scale, limit=limit)
        if "stages" in result.diagnostics:
            rep.add("picard", True, iterations=result.diagnostics["iterations"],
                    certificate=result.diagnostics["certificate"], lambda_raises=result.diagnostics["lambda_raises"])
        rows = [[*x, v] for x, v in zip(points.tolist(), values(points).tolist())]
        write_csv(out / "solution_points.csv", [f"x{i + 1}" for i in range(p.lattice.d)] + ["u"], rows)
    rep.add("u(0) = 0", bool(np.all(result.u[0] == 0.0)) if scheme != "fk" else True)
    _expectations(sec, values, rep)
    result.save(out / "solution")
    write_json(out / "solve.json", rep.to_dict())
    return rep


def stage_estimates(ctx: Context, out: Path) -> Report:
    sec = _section(ctx.cfg, "estimates")
    lambdas = [float(v) for v in sec.get("lambdas", [0, 1, 10, 100])]
    kappas = [float(v) for v in sec.get("kappas", [0.0, 0.7])]
    beta = _number(sec, "beta", 0.4, lo=1e-9, where="estimates.")
    steps = int(_number(sec, "time_steps", 64, lo=2, where="estimates."))
    base = {"beta": beta, "forcing": sec.get("forcing", "lacunary"), "T": sec.get("T", 0.01)}
    rows, r1, r2 = [], [], []
    rep = Report("estimates")
    for lam in lambdas:
        p = ctx.problem({**base, "lambda": lam})
        sol = solve_constant_spectral(p, steps) if p.constant else solve_variable(p, steps)
        er = estimate_report(sol, p, beta, kappas)
        slopes = [er.item(f"R3 kappa={k}")["slope"] for k in kappas]
        r1.append(er.item("R1")["value"])
        r2.append(er.item("R2")["value"])
        rows.append([lam, r1[-1], r2[-1], *slopes])
        for k, sl in zip(kappas, slopes):
            rep.add(f"slope lambda={lam} kappa={k}", er.item(f"R3 kappa={k}")["passed"], slope=sl, target=1 - k)
        rep.notes.extend(n for n in er.notes if n not in rep.notes)
    finite = bool(np.all(np.isfinite(r1)) and np.all(np.isfinite(r2)))
    spread = max(r1) / min(r1) if finite and min(r1) > 0 else math.inf
    rep.add("R1 finite", bool(np.all(np.isfinite(r1))), values=r1)
    rep.add("R1 within one order", spread < 10.0, spread=spread)
    rep.add("R2 bounded", bool(np.all(np.isfinite(r2))), max=max(r2))
    write_csv(out / "estimates.csv", ["lambda", "R1", "R2"] + [f"slope_kappa_{k}" for k in kappas], rows)
    write_json(out / "estimates.json", rep.to_dict())
    return rep


STAGE_FUNCS = {"check-assumptions": stage_check_assumptions, "symbol": stage_symbol, "density": stage_density,
               "norms": stage_norms, "solve": stage_solve, "estimates": stage_estimates}


# ---------------------------------------------------------------- driver

def versions() -> dict:
    return {"levykit": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pyyaml": yaml.__version__, "python": platform.python_version()}


def run(cfg: dict, stages: list[str], out: Path, seed: int, threads: int = 0) -> int:
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"config_hash": config_hash(cfg), "versions": versions(), "seed": seed,
                      "threads": threads, "stages": {}}
    status = EXIT_PASS
    current = "setup"
    try:
        ctx = Context(cfg, seed)
        for current in stages:
            try:
                rep = STAGE_FUNCS[current](ctx, out)
            except KeyError as exc:
                raise ConfigError(f"missing config key {exc}") from None
            manifest["stages"][current] = {"passed": rep.passed,
                                           "failures": [it["name"] for it in rep.failures()]}
            if not rep.passed:
                status = EXIT_FAIL
    except (ConfigError, OutOfRange) as exc:
        manifest["error"] = {"stage": current, "kind": type(exc).__name__, "message": str(exc)}
        status = EXIT_CONFIG
    except LevyKitError as exc:
        manifest["error"] = {"stage": current, "kind": type(exc).__name__, "message": str(exc)}
        status = EXIT_NUMERIC
    manifest["exit_status"] = status
    write_json(out / "manifest.json", manifest)
    return status


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="levykit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES + ("all", "run"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="root seed (overrides the config)")
        sp.add_argument("--out", default="levykit-out", help="output directory")
        sp.add_argument("--threads", type=int, default=0, help="worker cap, 0 = auto")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "all":
        stages = list(STAGES)
    elif args.command == "run":
        stages = cfg["pipeline"]
    else:
        stages = [args.command]
    status = run(cfg, stages, Path(args.out), seed, args.threads)
    manifest = json.loads((Path(args.out) / "manifest.json").read_text(encoding="utf-8"))
    for name in stages:
        info = manifest["stages"].get(name)
        if info is None:
            continue
        print(f"{name}: {'PASS' if info['passed'] else 'FAIL ' + ', '.join(info['failures'])}")
    if "error" in manifest:
        err = manifest["error"]
        print(f"error in {err['stage']}: {err['kind']}: {err['message']}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
