"""Solvers for du/dt = Lu - lambda u + f on the torus with u(0, .) = 0."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import _plain, AliasingWarning, NoConvergence, OutOfRange, Report, StabilityViolation
from .expressions import compile_expression
from .grid import GridFunction, Lattice
from .measures import LevyMeasure
from .operators import (FrozenKernel, LowerOrderCoefficients, apply_A, apply_G, apply_Q, apply_generator,
                        generator_multiplier, symbol_on_lattice, _atoms, _apply_spec)
from .scaling import ScalingFunction
from .simulate import CoefficientField, IncrementSampler
from .spaces import build_filter_bank, besov_norm, holder_norm

PICARD_TOL = 1e-6
PICARD_MAX_ITER = 200
FK_CHUNK = 4096
SLOPE_TOL = 0.15


# ---------------------------------------------------------------- problem description

@dataclass
class ProblemSpec:
    """Operator, forcing and horizon of du/dt = Lu - lam u + f.

    ``kind`` is 'plain' (the generator of ``nu``), 'constant_matrix' (jumps G y with
    constant G), 'kernel' (kernel ``rho`` frozen at the evaluation point) or
    'matrix_field' (jumps G(x) y). ``lower`` adds the lower-order part.
    ``forcing`` maps (t, points of shape (*n, d)) to values on the lattice.
    """

    lattice: Lattice
    nu: LevyMeasure
    forcing: Callable[[float, np.ndarray], np.ndarray]
    lam: float = 0.0
    T: float = 1.0
    beta: float = 0.4
    kind: str = "plain"
    G: np.ndarray | None = None
    rho: FrozenKernel | None = None
    Gfield: CoefficientField | None = None
    lower: LowerOrderCoefficients | None = None
    scaling: ScalingFunction | None = None
    label: str = "problem"
    _refq: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("plain", "constant_matrix", "kernel", "matrix_field"):
            raise OutOfRange(f"unknown operator kind {self.kind!r}")
        if self.lam < 0:
            raise OutOfRange("lambda must be >= 0")
        if not self.T > 0:
            raise OutOfRange("T must be > 0")
        if self.kind == "constant_matrix" and self.G is None:
            raise OutOfRange("constant_matrix needs G")
        if self.kind == "kernel" and self.rho is None:
            raise OutOfRange("kernel needs rho")
        if self.kind == "matrix_field" and self.Gfield is None:
            raise OutOfRange("matrix_field needs Gfield")
        if self.scaling is None:
            self.scaling = self.nu.scaling

    @classmethod
    def forcing_from_expression(cls, text: str, d: int) -> Callable[[float, np.ndarray], np.ndarray]:
        expr = compile_expression(text, ("t", "x"), {"x": d})
        return lambda t, pts: expr(t=t, x=pts)

    @property
    def constant(self) -> bool:
        return self.kind in ("plain", "constant_matrix") and self.lower is None

    def f(self, t: float) -> np.ndarray:
        vals = np.asarray(self.forcing(t, self.lattice.points()), dtype=float)
        return np.broadcast_to(vals, self.lattice.shape).copy()

    def reference_symbol(self) -> np.ndarray:
        G = self.G if self.kind == "constant_matrix" else None
        return symbol_on_lattice(self.nu, self.lattice, G)

    def apply(self, u: GridFunction, t: float) -> GridFunction:
        """The full operator, every part by x-space quadrature."""
        if self.kind == "plain":
            out = apply_generator(u, self.nu)
        elif self.kind == "constant_matrix":
            out = apply_G(u, CoefficientField.constant_matrix(self.G), self.nu)
        elif self.kind == "kernel":
            out = apply_A(u, self.rho, self.nu, t)
        else:
            out = apply_G(u, self.Gfield, self.nu)
        if self.lower is not None:
            out = out + apply_Q(u, self.lower, t)
        return out

    def perturbation(self, u: GridFunction, t: float) -> GridFunction:
        """Full operator minus the reference generator, both by quadrature."""
        ref = _apply_spec(u, self._ref_quadrature())
        return self.apply(u, t) - ref

    def _ref_quadrature(self) -> np.ndarray:
        if self._refq is None:
            self._refq = generator_multiplier(_atoms(self.nu), self.lattice, self.nu.chi_mode)
        return self._refq

    def describe(self) -> dict:
        return {"label": self.label, "kind": self.kind, "lambda": self.lam, "T": self.T, "beta": self.beta,
                "lattice": self.lattice.describe(), "measure": self.nu.describe(),
                "lower_order": self.lower is not None}


@dataclass
class SolveReport:
    """Solution on the space-time lattice plus diagnostics."""

    times: np.ndarray
    u: np.ndarray
    lattice: Lattice
    scheme: str
    meta: dict = field(default_factory=dict)
    stderr: np.ndarray | None = None
    residuals: list | None = None
    diagnostics: dict = field(default_factory=dict)

    def slice(self, k: int) -> GridFunction:
        return GridFunction(self.u[k], self.lattice)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def manifest(self) -> dict:
        return {"scheme": self.scheme, "times": {"start": float(self.times[0]), "stop": float(self.times[-1]),
                                                  "count": int(self.times.size)},
                "lattice": self.lattice.describe(), "meta": self.meta, "diagnostics": self.diagnostics,
                "residuals": self.residuals, "shape": list(self.u.shape), "dtype": "float64"}

    def save(self, directory: str | Path) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.ascontiguousarray(self.u, dtype="<f8").tofile(directory / "u.bin")
        if self.stderr is not None:
            np.ascontiguousarray(self.stderr, dtype="<f8").tofile(directory / "stderr.bin")
        text = json.dumps(_plain(self.manifest()), indent=2, sort_keys=True)
        (directory / "manifest.json").write_text(text + "\n", encoding="utf-8")
        if self.residuals is not None:
            lines = ["t,residual"] + [f"{t!r},{r!r}" for t, r in zip(self.times[1:-1].tolist(), self.residuals)]
            (directory / "residuals.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        return directory


# ---------------------------------------------------------------- exponential integrator

def _phi1(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    zs = np.where(small, 0.0, z)
    direct = np.expm1(zs) / np.where(small, 1.0, zs)
    series = sum(z ** k / math.factorial(k + 1) for k in range(18))
    return np.where(small, series, direct)


def _phi2(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    zs = np.where(small, 1.0, z)
    direct = (np.expm1(zs) - zs) / zs ** 2
    series = sum(z ** k / math.factorial(k + 2) for k in range(18))
    return np.where(small, series, direct)


def _duhamel(A: np.ndarray, fhat: np.ndarray, dt: float) -> np.ndarray:
    """u_hat on all slices for du/dt = A u + f with f linear between slices; fhat shape (K+1, *n)."""
    E = np.exp(dt * A)
    p1, p2 = _phi1(dt * A), _phi2(dt * A)
    a, b = dt * (p1 - p2), dt * p2
    out = np.zeros_like(fhat, dtype=complex)
    for k in range(fhat.shape[0] - 1):
        out[k + 1] = E * out[k] + a * fhat[k] + b * fhat[k + 1]
    return out


def _time_grid(T: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise OutOfRange("time_steps must be >= 1")
    return np.linspace(0.0, T, steps + 1)


def _forcing_slices(p: ProblemSpec, times: np.ndarray) -> np.ndarray:
    return np.stack([p.f(float(t)) for t in times])


def _check_band_limited(fs: np.ndarray, lattice: Lattice) -> None:
    spec = np.fft.fftn(fs, axes=tuple(range(1, fs.ndim)))
    nyq = lattice.nyquist_mask()
    level = float(np.max(np.abs(spec[:, nyq]))) if nyq.any() else 0.0
    scale = float(np.max(np.abs(spec))) or 1.0
    if level > 1e-8 * scale:
        warnings.warn(f"forcing reaches the Nyquist shell (relative {level / scale:.3g})", AliasingWarning,
                      stacklevel=3)


def _solve_spectral(A: np.ndarray, fs: np.ndarray, dt: float) -> np.ndarray:
    axes = tuple(range(1, fs.ndim))
    fhat = np.fft.fftn(fs, axes=axes)
    uhat = _duhamel(A, fhat, dt)
    u = np.fft.ifftn(uhat, axes=axes).real
    u[0] = 0.0
    return u


def solve_constant_spectral(p: ProblemSpec, time_steps: int, forcing: np.ndarray | None = None) -> SolveReport:
    """Per-mode exact exponential integration with the forcing linear in time between slices."""
    if not p.constant:
        raise OutOfRange("the spectral solver needs constant coefficients")
    times = _time_grid(p.T, time_steps)
    fs = _forcing_slices(p, times) if forcing is None else forcing
    _check_band_limited(fs, p.lattice)
    A = p.reference_symbol() - p.lam
    u = _solve_spectral(A, fs, float(times[1] - times[0]))
    return SolveReport(times, u, p.lattice, "spectral",
                       meta={"problem": p.describe(), "time_steps": time_steps})


# ---------------------------------------------------------------- Feynman-Kac

def solve_constant_fk(p: ProblemSpec, n_paths: int, time_steps: int, seed: int = 0,
                      points: np.ndarray | None = None, t: float | None = None,
                      sampler: IncrementSampler | None = None, max_jumps: float = 1e3) -> SolveReport:
    """u(t, x) = int_0^t e^{-lam (t-s)} E f(s, x + G Z_{t-s}) ds by Monte Carlo.

    Time quadrature: midpoint rule in s on ``time_steps`` cells whose lags t - s are
    graded quadratically toward zero, where e^{(t-s) psi} varies fastest; the factor
    e^{-lam (t-s)} is integrated exactly over each cell. One path per sample supplies Z
    at every lag. Returns values at ``points`` (default: every lattice point) for time t.
    ``max_jumps`` bounds the expected large-jump count per path of the default sampler.
    """
    if not p.constant:
        raise OutOfRange("the Feynman-Kac solver needs constant coefficients")
    t = p.T if t is None else float(t)
    d = p.lattice.d
    pts = p.lattice.points().reshape(-1, d) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    G = np.eye(d) if p.G is None else np.atleast_2d(np.asarray(p.G, dtype=float))
    edges = t * (np.arange(time_steps + 1) / time_steps) ** 2
    lags = 0.5 * (edges[1:] + edges[:-1])
    s_mid = t - lags
    lam = p.lam
    if lam > 0:
        wts = (np.exp(-lam * edges[:-1]) - np.exp(-lam * edges[1:])) / lam
    else:
        wts = np.diff(edges)
    grid = np.concatenate([[0.0], lags])
    if sampler is None:
        sampler = IncrementSampler(p.nu, seed_root=seed, horizon=t, max_jumps=max_jumps)
    total = np.zeros(pts.shape[0])
    total_sq = np.zeros(pts.shape[0])
    for start in range(0, n_paths, FK_CHUNK):
        count = min(FK_CHUNK, n_paths - start)
        inc = sampler.path_increments(grid, count, start)
        Z = np.cumsum(inc, axis=1) @ G.T
        est = np.zeros((count, pts.shape[0]))
        for j in range(time_steps):
            xs = pts[None, :, :] + Z[:, j, None, :]
            est += wts[j] * np.asarray(p.forcing(float(s_mid[j]), xs), dtype=float)
        total += est.sum(axis=0)
        total_sq += (est ** 2).sum(axis=0)
    mean = total / n_paths
    var = np.maximum(total_sq / n_paths - mean ** 2, 0.0) * n_paths / max(n_paths - 1, 1)
    se = np.sqrt(var / n_paths)
    shape = p.lattice.shape if points is None else (pts.shape[0],)
    return SolveReport(np.array([t]), mean.reshape((1,) + shape), p.lattice, "feynman-kac",
                       meta={"problem": p.describe(), "n_paths": n_paths, "time_steps": time_steps,
                             "seed": seed, "sampler": sampler.describe(), "points": pts.tolist()},
                       stderr=se.reshape((1,) + shape))


# ---------------------------------------------------------------- variable coefficients

def _besov_sup(diff: np.ndarray, bank, beta: float, lattice: Lattice) -> float:
    return max(besov_norm(GridFunction(sl, lattice), bank, beta) for sl in diff)


def coefficient_range(p: ProblemSpec, t: float = 0.0, samples: int = 33) -> tuple[float, float]:
    """Bounds on the factor by which the local operator rescales the reference generator.

    For a kernel this is the range of rho; for a matrix field G it is the range of the
    singular values of G raised to the order alpha (exact for power-law profiles).
    """
    lat = p.lattice
    pts = lat.points().reshape(-1, lat.d)
    a = p.nu.alpha
    if p.kind == "plain":
        return 1.0, 1.0
    if p.kind == "kernel":
        radii = np.geomspace(1e-4, max(lat.L), samples)
        lo, hi = math.inf, -math.inf
        for th in np.unique(np.vstack([p.nu.directions, -p.nu.directions]), axis=0):
            ys = radii[:, None] * th[None, :]
            vals = p.rho(t, pts[:, None, :], ys[None, :, :])
            lo, hi = min(lo, float(vals.min())), max(hi, float(vals.max()))
        return lo, hi
    G = (np.atleast_2d(p.G)[None] if p.kind == "constant_matrix" else p.Gfield(pts))
    sv = np.linalg.svd(G, compute_uv=False)
    return float(sv.min()) ** a, float(sv.max()) ** a


def _reference_scale(bounds: tuple[float, float], theta: float) -> float:
    lo, hi = bounds
    return 0.5 * ((theta * lo + 1 - theta) + (theta * hi + 1 - theta))


def _stage_perturbation(p: ProblemSpec, u: np.ndarray, times: np.ndarray, theta: float, scale: float) -> np.ndarray:
    # (theta L + (1 - theta) L_ref) - scale L_ref, all by quadrature
    ref = p._ref_quadrature()
    out = np.empty_like(u)
    for k, t in enumerate(times):
        v = GridFunction(u[k], p.lattice)
        out[k] = (1.0 - scale) * _apply_spec(v, ref)
        if theta != 0.0:
            out[k] += theta * p.perturbation(v, float(t)).values
    return out


def _picard(p: ProblemSpec, times: np.ndarray, fs: np.ndarray, lam: float, theta: float, scale: float,
            u0: np.ndarray, tol: float, max_iter: int, bank) -> tuple[np.ndarray, list]:
    dt = float(times[1] - times[0])
    A = scale * symbol_on_lattice(p.nu, p.lattice) - lam
    u = u0.copy()
    trace: list[float] = []
    rising = 0
    for _ in range(max_iter):
        new = _solve_spectral(A, fs + _stage_perturbation(p, u, times, theta, scale), dt)
        change = _besov_sup(new - u, bank, p.beta, p.lattice)
        rising = rising + 1 if trace and change > trace[-1] else 0
        trace.append(change)
        u = new
        if change < tol:
            return u, trace
        if not math.isfinite(change) or rising >= 5 or change > 1e3 * min(trace):
            raise NoConvergence("Picard iteration is not contracting", trace)
    raise NoConvergence(f"no convergence in {max_iter} iterations", trace)


def solve_variable(p: ProblemSpec, time_steps: int, scheme: str = "picard",
                   theta_homotopy: Sequence[float] | None = None, tol: float = PICARD_TOL,
                   max_iter: int = PICARD_MAX_ITER, max_raises: int = 6) -> SolveReport:
    """Variable-coefficient solve around a rescaled reference generator c L_ref.

    'picard': each stage theta of the homotopy iterates
        du/dt = c L_ref u - lam u + f + [L_theta - c L_ref] u_prev,   L_theta = theta L + (1 - theta) L_ref,
    where c is the midpoint of the range of the coefficient factor of L_theta, until the
    change is below ``tol`` in the (beta, inf) Besov norm. When a stage does not contract,
    lambda is raised, the forcing multiplied by e^{-(lam' - lam) t}, the theta sweep
    engaged, and the result multiplied back by e^{(lam' - lam) t}.
    'mol': exponential Runge-Kutta (second order) with the perturbation explicit.
    """
    times = _time_grid(p.T, time_steps)
    fs = _forcing_slices(p, times)
    if scheme == "mol":
        return _solve_mol(p, times, fs)
    if scheme != "picard":
        raise OutOfRange("scheme must be 'picard' or 'mol'")
    bank = build_filter_bank(p.scaling, p.lattice)
    bounds = coefficient_range(p)
    thetas = [float(th) for th in theta_homotopy] if theta_homotopy is not None else [1.0]
    lam, raises, failures = p.lam, 0, []
    while True:
        damp = np.exp(-(lam - p.lam) * times).reshape((-1,) + (1,) * p.lattice.d)
        u = np.zeros_like(fs)
        stages = []
        try:
            for th in thetas:
                c = _reference_scale(bounds, th)
                u, trace = _picard(p, times, fs * damp, lam, th, c, u, tol, max_iter, bank)
                stages.append({"theta": th, "reference_scale": c, "iterations": len(trace), "trace": trace})
            break
        except NoConvergence as exc:
            failures.append({"lambda": lam, "theta": thetas, "trace": exc.trace})
            if raises >= max_raises:
                raise NoConvergence(f"no convergence after {raises} lambda raises", exc.trace) from None
            raises += 1
            lam = 2.0 * lam + 1.0
            if theta_homotopy is None:
                thetas = [0.25, 0.5, 0.75, 1.0]
    # contraction certificate: a further iteration, in the frame the iteration ran in, moves
    # u by less than tol; keep iterating while it does not
    c = _reference_scale(bounds, thetas[-1])
    A = c * symbol_on_lattice(p.nu, p.lattice) - lam
    dt = float(times[1] - times[0])
    extra = 0
    while True:
        again = _solve_spectral(A, fs * damp + _stage_perturbation(p, u, times, thetas[-1], c), dt)
        certificate = _besov_sup(again - u, bank, p.beta, p.lattice)
        if certificate < tol or extra >= max_iter:
            break
        u, extra = again, extra + 1
    stages[-1]["iterations"] += extra
    u = u / damp
    return SolveReport(times, u, p.lattice, "picard",
                       meta={"problem": p.describe(), "time_steps": time_steps, "tol": tol,
                             "lambda_used": lam, "theta": thetas, "coefficient_range": list(bounds)},
                       diagnostics={"stages": stages, "failed_attempts": failures, "lambda_raises": raises,
                                    "certificate": certificate,
                                    "iterations": sum(st["iterations"] for st in stages)})


def _stability_ratio(p: ProblemSpec, scale: float, samples: int = 6) -> float:
    """Largest |(L - c L_ref) v|_0 / |c L_ref v|_0 over random lattice functions."""
    rng = np.random.default_rng(2024)
    worst = 0.0
    ref = p._ref_quadrature()
    for _ in range(samples):
        spec = rng.normal(size=p.lattice.shape) + 1j * rng.normal(size=p.lattice.shape)
        v = GridFunction(np.fft.ifftn(spec).real, p.lattice)
        pert = _stage_perturbation(p, v.values[None], np.zeros(1), 1.0, scale)[0]
        worst = max(worst, float(np.max(np.abs(pert)) / (scale * np.max(np.abs(_apply_spec(v, ref))))))
    return worst


def _solve_mol(p: ProblemSpec, times: np.ndarray, fs: np.ndarray) -> SolveReport:
    dt = float(times[1] - times[0])
    c = _reference_scale(coefficient_range(p), 1.0)
    psi = c * symbol_on_lattice(p.nu, p.lattice)
    A = psi - p.lam
    ratio = _stability_ratio(p, c)
    # an explicit term of relative size q < 1 next to the exactly integrated part keeps every
    # mode's amplification below e^-x + q (1 - e^-x) < 1; otherwise its rate must be resolved
    bound = math.inf if ratio < 1.0 else 1.0 / (ratio * float(np.max(np.abs(psi))))
    if dt > bound:
        raise StabilityViolation(f"time step {dt:.3g} exceeds the stability bound {bound:.3g}", dt)
    E = np.exp(dt * A)
    p1, p2 = _phi1(dt * A), _phi2(dt * A)
    u = np.zeros_like(fs)

    def N(v, k):
        return fs[k] + _stage_perturbation(p, v[None], times[k:k + 1], 1.0, c)[0]

    for k in range(times.size - 1):
        n0 = np.fft.fftn(N(u[k], k))
        uh = np.fft.fftn(u[k])
        a = np.fft.ifftn(E * uh + dt * p1 * n0).real
        n1 = np.fft.fftn(N(a, k + 1))
        u[k + 1] = np.fft.ifftn(E * uh + dt * p1 * n0 + dt * p2 * (n1 - n0)).real
    return SolveReport(times, u, p.lattice, "method-of-lines",
                       meta={"problem": p.describe(), "time_steps": times.size - 1, "reference_scale": c},
                       diagnostics={"stability_ratio": ratio, "stability_bound": bound})


# ---------------------------------------------------------------- residuals and estimates

def residual(report: SolveReport, p: ProblemSpec) -> list[float]:
    """sup |du/dt - Lu + lam u - f| on interior slices, centred differences in time."""
    if report.u.shape[0] < 3:
        raise OutOfRange("need at least three time slices")
    dt = report.dt
    out = []
    for k in range(1, report.u.shape[0] - 1):
        t = float(report.times[k])
        du = (report.u[k + 1] - report.u[k - 1]) / (2 * dt)
        Lu = p.apply(report.slice(k), t).values
        out.append(float(np.max(np.abs(du - Lu + p.lam * report.u[k] - p.f(t)))))
    report.residuals = out
    return out


def _space_time_sup(values: np.ndarray, func) -> float:
    return max(func(sl) for sl in values)


def estimate_report(report: SolveReport, p: ProblemSpec, beta: float, kappa_list: Sequence[float],
                    forcing: np.ndarray | None = None, levels: int = 7) -> Report:
    """Ratios R1 = |u|_b / ((1/lam ^ T)|f|_b), R2 = |u|_{1+b} / |f|_b and the time-Hoelder slopes.

    The slope for each kappa is the least-squares exponent of |u(t) - u(0)|_{kappa+b, inf}
    against t over t = T, T/2, ..., T/2^(levels-1).
    """
    lat = p.lattice
    sf = p.scaling
    fs = _forcing_slices(p, report.times) if forcing is None else forcing
    f_beta = _space_time_sup(fs, lambda v: holder_norm(GridFunction(v, lat), sf, beta))
    u_beta = _space_time_sup(report.u, lambda v: holder_norm(GridFunction(v, lat), sf, beta))
    u_one = _space_time_sup(report.u, lambda v: holder_norm(GridFunction(v, lat), sf, beta, "oneplus", p.nu))
    horizon = min(1.0 / p.lam, p.T) if p.lam > 0 else p.T
    rep = Report("estimates")
    R1 = u_beta / (horizon * f_beta) if f_beta > 0 else math.nan
    R2 = u_one / f_beta if f_beta > 0 else math.nan
    rep.add("R1", bool(np.isfinite(R1)), value=R1, lam=p.lam, u_beta=u_beta, f_beta=f_beta)
    rep.add("R2", bool(np.isfinite(R2)), value=R2, u_one_plus=u_one)
    bank = build_filter_bank(sf, lat)
    # pairs (0, T 2^-k) on the slice grid; u(0) = 0 so the difference is the slice itself
    K = report.u.shape[0] - 1
    idx = [K >> k for k in range(levels) if K >> k >= 1 and (K >> k) << k == K]
    for kappa in kappa_list:
        if kappa > 0 and kappa + beta <= 1.0:
            rep.notes.append(f"kappa={kappa}: kappa+beta <= 1, slope not covered by the estimate")
        dts, norms = [], []
        for k in idx:
            val = besov_norm(GridFunction(report.u[k] - report.u[0], lat), bank, kappa + beta)
            if val > 0:
                dts.append(float(report.times[k] - report.times[0]))
                norms.append(val)
        slope = float(np.polyfit(np.log(dts), np.log(norms), 1)[0]) if len(dts) >= 2 else math.nan
        rep.add(f"R3 kappa={kappa}", abs(slope - (1 - kappa)) <= SLOPE_TOL, slope=slope, target=1 - kappa,
                gaps=dts, norms=norms)
    return rep


def lacunary_forcing(lattice: Lattice, sf: ScalingFunction, beta: float, ratio: int = 2,
                     axis: int = 0) -> Callable[[float, np.ndarray], np.ndarray]:
    """sum_j w(L / ratio^j)^beta cos(2 pi ratio^j x / L): exactly C^beta in the w-modulus.

    Smooth forcing makes every slice smoother than the estimates are built for; this one
    saturates them, so the observed time exponents are the sharp ones.
    """
    L = float(lattice.L[axis])
    top = lattice.n[axis] // 4
    freqs = [ratio ** j for j in range(64) if ratio ** j <= top]
    amps = [float(sf.w(L / k)) ** beta / float(sf.w(L)) ** beta for k in freqs]

    def f(t, x):
        x = np.asarray(x, dtype=float)[..., axis]
        return sum(a * np.cos(2 * np.pi * k * x / L) for a, k in zip(amps, freqs))
    return f
