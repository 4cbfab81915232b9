"""Scaling functions w, their scaling factors l and the generalized inverse gamma.

A scaling function is a continuous increasing w: (0, inf) -> (0, inf) with
w(0+) = 0, w(inf) = inf and a scaling factor l satisfying w(eps*r) <= l(eps)*w(r).
Every kind is normalized at construction so that w(1) = 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import NonPositiveArgument, OutOfRange, Report

SCALING_LAW_RTOL = 1e-10
GAMMA_RTOL = 1e-10
DIVERGENCE_SLOPE = 1e-3
_N_SEARCH_MAX = 10_000


def _positive(x, what: str = "argument") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise NonPositiveArgument(f"{what} must be > 0, got {x!r}")
    return arr


def _out(arr: np.ndarray):
    return float(arr) if arr.ndim == 0 else arr


class ScalingFunction:
    """Common interface; subclasses supply ``_w_raw`` and ``_l``."""

    kind: str = "abstract"
    #: (lo, hi) search bracket for gamma
    bracket: tuple[float, float] = (1e-30, 1e30)

    def _w_raw(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _l(self, eps: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @cached_property
    def normalization(self) -> float:
        return 1.0 / float(self._w_raw(np.asarray(1.0)))

    def w(self, r):
        arr = _positive(r, "r")
        out = self._w_raw(arr) * self.normalization
        out = np.where(arr == 1.0, 1.0, out)
        return _out(np.asarray(out, dtype=float))

    def l(self, eps):
        return _out(np.asarray(self._l(_positive(eps, "eps")), dtype=float))

    @cached_property
    def N(self) -> int:
        """Smallest integer N >= 2 with l(1/N) < 1 < l(N)."""
        for n in range(2, _N_SEARCH_MAX):
            try:
                lo, hi = self.l(1.0 / n), self.l(float(n))
            except OutOfRange:
                break
            if lo < 1.0 < hi:
                return n
        raise OutOfRange("no integer base N with l(1/N) < 1 < l(N)")

    def gamma(self, t, bracket: tuple[float, float] | None = None):
        return gamma(self, t, bracket)

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True, eq=False)
class PowerLaw(ScalingFunction):
    """w(r) = r^alpha with the exact scaling factor l(eps) = eps^alpha."""

    alpha: float
    kind: str = field(default="power", init=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0:
            raise OutOfRange(f"alpha must lie in (0, 2), got {self.alpha}")

    def _w_raw(self, r):
        return r ** self.alpha

    def _l(self, eps):
        return eps ** self.alpha

    def describe(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha}


def stable_subordinator_density(sigma: float) -> Callable[[np.ndarray], np.ndarray]:
    """Levy density of the subordinator with Bernstein function r^sigma."""
    c = sigma / special.gamma(1.0 - sigma)
    return lambda t: c * t ** (-1.0 - sigma)


@dataclass(frozen=True, eq=False)
class BernsteinDerived(ScalingFunction):
    """Scaling function of a subordinated Brownian motion.

    The Bernstein function is phi(r) = sum_i c_i r^{sigma_i}; its subordinator
    has Levy density sum_i c_i sigma_i/Gamma(1-sigma_i) t^{-1-sigma_i} and the
    jump kernel of the subordinated process is

        j(r) = int (4 pi t)^{-d/2} exp(-r^2 / (4t)) Lambda(dt),

    evaluated here by quadrature. Then w(r) = 1/(j(r) r^d) and the scaling
    factor is piecewise C*r^{2 sigma_min} for r <= 1 and C*r^{2 sigma_max}
    for r > 1, with C fixed at construction as the supremum of the scaling
    ratio on a wide log grid.
    """

    sigmas: tuple[float, ...]
    weights: tuple[float, ...] | None = None
    d: int = 1
    kind: str = field(default="bernstein", init=False)

    def __post_init__(self):
        sig = tuple(float(s) for s in self.sigmas)
        if not sig or any(not 0.0 < s < 1.0 for s in sig):
            raise OutOfRange(f"Bernstein exponents must lie in (0, 1), got {sig}")
        wts = tuple(float(c) for c in (self.weights or (1.0,) * len(sig)))
        if len(wts) != len(sig) or any(c <= 0 for c in wts):
            raise OutOfRange("weights must be positive, one per exponent")
        object.__setattr__(self, "sigmas", sig)
        object.__setattr__(self, "weights", wts)
        if self.d < 1:
            raise OutOfRange("dimension must be >= 1")

    @classmethod
    def from_range(cls, sigma1: float, sigma2: float, d: int = 1) -> "BernsteinDerived":
        if sigma1 == sigma2:
            return cls((sigma1,), d=d)
        return cls((sigma1, sigma2), d=d)

    @property
    def sigma1(self) -> float:
        return min(self.sigmas)

    @property
    def sigma2(self) -> float:
        return max(self.sigmas)

    def bernstein(self, r):
        r = np.asarray(r, dtype=float)
        return sum(c * r ** s for c, s in zip(self.weights, self.sigmas))

    def levy_density(self, t):
        t = np.asarray(t, dtype=float)
        return sum(c * stable_subordinator_density(s)(t) for c, s in zip(self.weights, self.sigmas))

    def _j_scalar(self, r: float) -> float:
        # substitute t = r^2 e^u / 4 so the Gaussian factor peaks near u = 0
        d = self.d

        def integrand(u):
            t = 0.25 * r * r * math.exp(u)
            return (4 * math.pi * t) ** (-0.5 * d) * math.exp(-0.25 * r * r / t) * float(self.levy_density(t)) * t

        total = 0.0
        for a, b in ((-60.0, -10.0), (-10.0, 0.0), (0.0, 10.0), (10.0, 80.0)):
            val, _ = integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
            total += val
        return total

    def jump_kernel(self, r):
        arr = _positive(r, "r")
        flat = np.array([self._j_scalar(float(x)) for x in arr.ravel()])
        return _out(flat.reshape(arr.shape))

    def _w_raw(self, r):
        r = np.asarray(r, dtype=float)
        flat = np.array([1.0 / (self._j_scalar(float(x)) * float(x) ** self.d) for x in r.ravel()])
        return flat.reshape(r.shape)

    @cached_property
    def constant(self) -> float:
        """Smallest C making the piecewise power law a scaling factor on a wide grid."""
        grid = np.logspace(-6, 6, 49)
        wv = self.w(grid)
        logw = np.log(wv)
        eps = grid[:, None] / grid[None, :]  # eps = r_i / r_k, pairs (eps*r_k, r_k) all on grid
        ratio = np.exp(logw[:, None] - logw[None, :])
        base = np.where(eps <= 1.0, eps ** (2 * self.sigma1), eps ** (2 * self.sigma2))
        return float(max(1.0, np.max(ratio / base)) * (1.0 + 1e-9))

    def _l(self, eps):
        c = self.constant
        return np.where(eps <= 1.0, c * eps ** (2 * self.sigma1), c * eps ** (2 * self.sigma2))

    def describe(self) -> dict:
        return {"kind": self.kind, "sigmas": list(self.sigmas), "weights": list(self.weights),
                "d": self.d, "C": self.constant}


@dataclass(frozen=True, eq=False)
class Tabulated(ScalingFunction):
    """w and l given by sample tables, interpolated linearly in log-log coordinates.

    Evaluation outside either table raises OutOfRange: the table cannot
    certify asymptotic behaviour.
    """

    r: tuple[float, ...]
    w_values: tuple[float, ...]
    eps: tuple[float, ...] | None = None
    l_values: tuple[float, ...] | None = None
    kind: str = field(default="tabulated", init=False)

    def __post_init__(self):
        r = np.asarray(self.r, float)
        wv = np.asarray(self.w_values, float)
        _check_table(r, wv, "w")
        if not r[0] <= 1.0 <= r[-1]:
            raise OutOfRange("w table must contain r = 1 for the normalization")
        object.__setattr__(self, "r", tuple(r))
        object.__setattr__(self, "w_values", tuple(wv))
        if self.eps is None:
            # fall back to the empirical scaling factor of the table itself
            e, lv = _empirical_factor(r, wv)
        else:
            e, lv = np.asarray(self.eps, float), np.asarray(self.l_values, float)
        _check_table(e, lv, "l", strict_values=False)
        object.__setattr__(self, "eps", tuple(e))
        object.__setattr__(self, "l_values", tuple(lv))
        object.__setattr__(self, "bracket", (float(e[0]), float(e[-1])))

    @classmethod
    def from_csv(cls, w_path: str | Path, l_path: str | Path | None = None) -> "Tabulated":
        r, wv = read_two_column_csv(w_path)
        if l_path is None:
            return cls(tuple(r), tuple(wv))
        e, lv = read_two_column_csv(l_path)
        return cls(tuple(r), tuple(wv), tuple(e), tuple(lv))

    @staticmethod
    def _interp(x, xs, ys):
        x = np.asarray(x, float)
        xs, ys = np.asarray(xs), np.asarray(ys)
        if np.any(x < xs[0] * (1 - 1e-14)) or np.any(x > xs[-1] * (1 + 1e-14)):
            raise OutOfRange(f"argument outside table range [{xs[0]}, {xs[-1]}]")
        lx = np.log(np.clip(x, xs[0], xs[-1]))
        with np.errstate(divide="ignore"):
            ly = np.log(ys)
        return np.exp(np.interp(lx, np.log(xs), ly))

    def _w_raw(self, r):
        return self._interp(r, self.r, self.w_values)

    def _l(self, eps):
        return self._interp(eps, self.eps, self.l_values)

    def describe(self) -> dict:
        return {"kind": self.kind, "points": len(self.r)}


def _check_table(xs: np.ndarray, ys: np.ndarray, what: str, strict_values: bool = True):
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise OutOfRange(f"{what} table needs two equal-length columns with >= 2 rows")
    if np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
        raise OutOfRange(f"{what} table abscissae must be positive and strictly increasing")
    if np.any(ys <= 0):
        raise OutOfRange(f"{what} table values must be positive")
    if strict_values and np.any(np.diff(ys) <= 0):
        raise OutOfRange(f"{what} table values must be strictly increasing")
    if not strict_values and np.any(np.diff(ys) < 0):
        raise OutOfRange(f"{what} table values must be nondecreasing")


def _empirical_factor(r: np.ndarray, wv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    logr = np.log(r)
    span = logr[-1] - logr[0]
    e = np.exp(np.linspace(-span, span, 4 * r.size + 1))
    lv = np.empty_like(e)
    for i, ee in enumerate(e):
        x = np.exp(np.clip(logr + np.log(ee), logr[0], logr[-1]))
        mask = (r * ee >= r[0] * (1 - 1e-12)) & (r * ee <= r[-1] * (1 + 1e-12))
        num = np.exp(np.interp(np.log(x[mask]), logr, np.log(wv)))
        lv[i] = np.max(num / wv[mask])
    return e, np.maximum.accumulate(lv)


def read_two_column_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise OutOfRange(f"{path}: need a header row and at least two samples")
    data = np.array([[float(v) for v in row[:2]] for row in rows[1:] if row], dtype=float)
    return data[:, 0], data[:, 1]


def eval_w(sf: ScalingFunction, r):
    return sf.w(r)


def eval_l(sf: ScalingFunction, eps):
    return sf.l(eps)


def gamma(sf: ScalingFunction, t, bracket: tuple[float, float] | None = None):
    """gamma(t) = inf{s > 0 : l(s) >= t} by bisection in log s."""
    lo0, hi0 = bracket or sf.bracket
    t_arr = _positive(t, "t")
    l_hi = float(sf.l(hi0))
    l_lo = float(sf.l(lo0))
    out = np.empty(t_arr.size)
    for i, tv in enumerate(t_arr.ravel()):
        if tv > l_hi:
            raise OutOfRange(f"t={tv} exceeds sup l = {l_hi} on the bracket")
        if tv <= l_lo:
            out[i] = lo0
            continue
        a, b = math.log(lo0), math.log(hi0)
        # invariant: l(e^a) < t <= l(e^b)
        while b - a > GAMMA_RTOL * 0.5:
            mid = 0.5 * (a + b)
            if float(sf.l(math.exp(mid))) >= tv:
                b = mid
            else:
                a = mid
        out[i] = math.exp(b)
    return _out(out.reshape(t_arr.shape))


def check_scaling_law(sf: ScalingFunction, grid: Sequence[tuple[float, float]],
                      rtol: float = SCALING_LAW_RTOL) -> Report:
    report = Report("scaling_law")
    pairs = np.asarray(grid, dtype=float).reshape(-1, 2)
    _positive(pairs, "grid")
    lhs = np.asarray(sf.w(pairs[:, 0] * pairs[:, 1]))
    rhs = np.asarray(sf.l(pairs[:, 0])) * np.asarray(sf.w(pairs[:, 1]))
    slack = rhs - lhs
    bad = lhs > rhs * (1.0 + rtol)
    for (e, r), s in zip(pairs[bad], slack[bad]):
        report.add(f"eps={e:.6g},r={r:.6g}", False, eps=e, r=r, slack=s)
    report.add("all_pairs", not bad.any(), checked=len(pairs), violations=int(bad.sum()),
               min_relative_slack=float(np.min(slack / rhs)) if len(pairs) else 0.0)
    return report


def log_grid_pairs(lo: float, hi: float, n: int) -> list[tuple[float, float]]:
    g = np.logspace(math.log10(lo), math.log10(hi), n)
    return [(float(e), float(r)) for e in g for r in g]


# ---------------------------------------------------------------- integrability

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _decade_integrals(f: Callable[[np.ndarray], np.ndarray], start: float, step: float,
                      count: int) -> np.ndarray:
    """Integrals of f over consecutive log-intervals [e^{u_k}, e^{u_k+step}] (step may be negative)."""
    out = np.empty(count)
    for k in range(count):
        a = start + k * step
        b = a + step
        lo, hi = min(a, b), max(a, b)
        u = 0.5 * (hi - lo) * _GL_NODES + 0.5 * (hi + lo)
        t = np.exp(u)
        out[k] = 0.5 * (hi - lo) * np.sum(_GL_WEIGHTS * f(t) * t)
    return out


def improper_integral(f: Callable[[np.ndarray], np.ndarray], endpoint: str,
                      decades: int = 24, threshold: float = DIVERGENCE_SLOPE) -> dict:
    """Integrate f over (0, 1] (endpoint='zero') or [1, inf) (endpoint='infinity').

    Partial sums are built over successive decades of the cutoff. The slope of
    the partial sums against log(cutoff) is extrapolated to the endpoint with
    Aitken's delta-squared; the integral is declared divergent when that limit
    exceeds ``threshold``.
    """
    step = math.log(10.0) * (-1.0 if endpoint == "zero" else 1.0)
    pieces = _decade_integrals(f, 0.0, step, decades)
    if not np.all(np.isfinite(pieces)):
        return {"value": float("inf"), "slope": float("inf"), "convergent": False}
    slopes = np.abs(pieces) / math.log(10.0)
    s0, s1, s2 = slopes[-3:]
    den = (s2 - s1) - (s1 - s0)
    if s2 == 0.0:
        limit = 0.0
    elif abs(den) < 1e-300 or s2 > s1 or (s1 - s2) <= 0:
        limit = s2
    else:
        limit = max(0.0, s2 - (s2 - s1) ** 2 / den)
    # geometric tail estimate for the remainder beyond the last cutoff
    q = pieces[-1] / pieces[-2] if pieces[-2] != 0 else 0.0
    tail = pieces[-1] * q / (1 - q) if 0 <= q < 1 else 0.0
    convergent = bool(limit <= threshold)
    value = float(np.sum(pieces) + tail) if convergent else float("inf")
    return {"value": value, "slope": float(limit), "convergent": convergent}


def check_integrability(sf: ScalingFunction, alpha: float, beta: float, eps: float,
                        delta: float, delta_p: float, beta_samples: int = 4) -> Report:
    """Numeric classification of the l- and gamma-integrals required of a scaling pair.

    The l-integrals are checked at ``beta_samples`` exponents spread over
    (0, beta + eps), including one just below the upper end.
    """
    if not (0 < alpha < 2):
        raise OutOfRange("alpha must lie in (0, 2)")
    if not beta > 0:
        raise OutOfRange("beta must be > 0")
    if not 0 < eps < 1:
        raise OutOfRange("eps must lie in (0, 1)")
    if not 0 < delta < min(0.5, beta):
        raise OutOfRange("delta must lie in (0, min(1/2, beta))")
    if not 0 < delta_p < min(0.5, eps):
        raise OutOfRange("delta_p must lie in (0, min(1/2, eps))")
    l_small = float(sf.l(1e-12))
    l_one = float(sf.l(1.0))
    if not l_small < 1e-3 * l_one:
        raise OutOfRange("l does not tend to 0 at the origin: not a scaling factor")

    report = Report("integrability")
    upper = beta + eps
    for bp in upper * np.linspace(1.0, beta_samples, beta_samples) / (beta_samples + 0.5):
        bp = float(bp)
        res = improper_integral(lambda t: sf.l(t) ** bp / t, "zero")
        report.add(f"l^b'/t on (0,1], b'={bp:.4g}", res["convergent"], beta_p=bp, **res)
        res = improper_integral(lambda t: sf.l(t) ** bp / t ** 2, "infinity")
        report.add(f"l^b'/t^2 on [1,inf), b'={bp:.4g}", res["convergent"], beta_p=bp, **res)
        if 1.0 <= alpha < 2.0:
            res = improper_integral(lambda t: sf.l(t) ** (1 + bp) / t ** 2, "zero")
            report.add(f"l^(1+b')/t^2 on (0,1], b'={bp:.4g}", res["convergent"], beta_p=bp, **res)

    g = lambda t: np.asarray(sf.gamma(t))
    if alpha < 1.0:
        terms = [("t^d/gamma on [1,inf)", lambda t: t ** delta / g(t), "infinity")]
    elif alpha == 1.0:
        terms = [("t^d/gamma on (0,1]", lambda t: t ** delta / g(t), "zero"),
                 ("t^-d'/gamma on [1,inf)", lambda t: t ** -delta_p / g(t), "infinity"),
                 ("t^d/gamma^2 on [1,inf)", lambda t: t ** delta / g(t) ** 2, "infinity")]
    else:
        terms = [("t^-d/gamma on (0,1]", lambda t: t ** -delta / g(t), "zero"),
                 ("t^d/gamma^2 on [1,inf)", lambda t: t ** delta / g(t) ** 2, "infinity"),
                 ("t^(d-1/2)/gamma on [1,inf)", lambda t: t ** (delta - 0.5) / g(t), "infinity")]
    lo, hi = sf.bracket
    for name, f, end in terms:
        try:
            res = improper_integral(f, end, decades=_gamma_decades(sf, end))
        except OutOfRange as exc:
            report.add(name, False, error=str(exc))
            continue
        report.add(name, res["convergent"], **res)
    return report


def _gamma_decades(sf: ScalingFunction, endpoint: str) -> int:
    lo, hi = sf.bracket
    # gamma is only defined for t within the range of l on the bracket
    lim = float(sf.l(lo)) if endpoint == "zero" else float(sf.l(hi))
    span = abs(math.log10(lim)) if lim > 0 else 24
    return int(max(3, min(24, math.floor(span) - 1)))


def from_config(cfg: dict, base_dir: Path | None = None) -> ScalingFunction:
    kind = cfg.get("kind", "power")
    if kind == "power":
        return PowerLaw(float(cfg["alpha"]))
    if kind == "bernstein":
        if "sigmas" in cfg:
            return BernsteinDerived(tuple(cfg["sigmas"]), tuple(cfg["weights"]) if "weights" in cfg else None,
                                    d=int(cfg.get("d", 1)))
        return BernsteinDerived.from_range(float(cfg["sigma1"]), float(cfg.get("sigma2", cfg["sigma1"])),
                                           d=int(cfg.get("d", 1)))
    if kind == "tabulated":
        root = base_dir or Path(".")
        lp = cfg.get("l_csv")
        return Tabulated.from_csv(root / cfg["csv"], root / lp if lp else None)
    raise OutOfRange(f"unknown scaling kind {kind!r}")
