"""Levy measures built from radial profiles along finitely many directions.

A measure is stored as atoms (theta_k, weight_k, m_k): for a Borel set B,

    nu(B) = sum_k weight_k * int_0^inf 1_B(r * theta_k) m_k(r) dr.

In one dimension the directions are +1 and -1, so the symmetric measure
|y|^{-1-alpha} dy is two atoms of weight one carrying m(r) = r^{-1-alpha}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, interpolate, special

from .errors import DegenerateTail, DivergentIntegral, OutOfRange, QuadratureFailure, Report
from .scaling import BernsteinDerived, PowerLaw, ScalingFunction, improper_integral

R_MIN = 1e-8
QUAD_RTOL = 1e-10
EULER_GAMMA = 0.5772156649015329


def chi_mode(alpha: float) -> str:
    """Compensation regime: 'none' for alpha<1, 'ball' for alpha=1, 'full' for alpha in (1,2)."""
    if alpha < 1.0:
        return "none"
    if alpha == 1.0:
        return "ball"
    return "full"


def chi(alpha: float, r):
    """The compensation indicator as a function of |y|."""
    r = np.asarray(r, dtype=float)
    mode = chi_mode(alpha)
    if mode == "none":
        return np.zeros_like(r)
    if mode == "full":
        return np.ones_like(r)
    return (r <= 1.0).astype(float)


def _cos_minus_one(x):
    return -2.0 * np.sin(0.5 * x) ** 2


def _sin_minus_x(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    xs = np.where(small, x, 0.0)
    series = -xs ** 3 / 6.0 + xs ** 5 / 120.0 - xs ** 7 / 5040.0
    return np.where(small, series, np.sin(x) - x)


# ---------------------------------------------------------------- quadrature

_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def log_quad(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
             per_decade: int = 2) -> float:
    """int_a^b f(r) dr for 0 < a < b < inf, Gauss-Legendre on sub-intervals of log r."""
    if b <= a:
        return 0.0
    la, lb = math.log(a), math.log(b)
    pieces = max(1, int(math.ceil((lb - la) / math.log(10.0) * per_decade)))
    edges = np.linspace(la, lb, pieces + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    v = mid[:, None] + half[:, None] * _GL_X[None, :]
    r = np.exp(v)
    vals = f(r) * r
    return float(np.sum(half[:, None] * _GL_W[None, :] * vals))


def radial_integral(f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> float:
    """int_a^b f(r) dr allowing a = 0 or b = inf; divergence raises DivergentIntegral."""
    total = 0.0
    lo, hi = a, b
    if a == 0.0:
        res = improper_integral(lambda t: f(t * min(b, 1.0)) * min(b, 1.0), "zero", decades=30)
        if not res["convergent"]:
            raise DivergentIntegral(f"integral diverges at 0 (endpoint slope {res['slope']:.3g})")
        total += res["value"]
        lo = min(b, 1.0)
    if b == math.inf:
        start = max(lo, 1.0)
        res = improper_integral(lambda t: f(t * start) * start, "infinity", decades=30)
        if not res["convergent"]:
            raise DivergentIntegral(f"integral diverges at infinity (endpoint slope {res['slope']:.3g})")
        total += res["value"]
        hi = start
    if hi > lo:
        total += log_quad(f, lo, hi)
    return total


# ---------------------------------------------------------------- radial profiles

class RadialProfile:
    """A radial jump density m(r) on (0, inf) with declared small-jump order."""

    order: float
    support_max: float = math.inf

    def __call__(self, r):
        raise NotImplementedError

    def tail(self, r: float) -> float:
        """int_r^inf m."""
        return radial_integral(self, r, self.support_max) if r < self.support_max else 0.0

    def moment(self, p: float, a: float, b: float) -> float:
        """int_a^b r^p m(r) dr."""
        b = min(b, self.support_max)
        if b <= a:
            return 0.0
        return radial_integral(lambda r: r ** p * self(r), a, b)

    def dilate(self, R: float, factor: float) -> "RadialProfile":
        """Profile of the push-forward under y -> y/R, multiplied by ``factor``."""
        return DilatedProfile(self, R, factor)

    def truncate(self, r_max: float) -> "RadialProfile":
        return TruncatedProfile(self, r_max)

    def transform(self, u: float, mode: str) -> complex:
        return _numeric_transform(self, u, mode)


@dataclass(frozen=True)
class PowerProfile(RadialProfile):
    """m(r) = c * r^{-1-alpha}; every integral is closed form."""

    c: float
    alpha: float

    @property
    def order(self) -> float:
        return self.alpha

    def __call__(self, r):
        return self.c * np.asarray(r, dtype=float) ** (-1.0 - self.alpha)

    def tail(self, r: float) -> float:
        return self.c * r ** (-self.alpha) / self.alpha

    def moment(self, p: float, a: float, b: float) -> float:
        q = p - self.alpha
        if a == 0.0 and q <= 0:
            raise DivergentIntegral(f"int_0 r^{p} m diverges for order {self.alpha}")
        if b == math.inf and q >= 0:
            raise DivergentIntegral(f"int^inf r^{p} m diverges for order {self.alpha}")
        if q == 0:
            return self.c * math.log(b / a)
        hi = 0.0 if b == math.inf else b ** q
        lo = 0.0 if a == 0.0 else a ** q
        return self.c * (hi - lo) / q

    def dilate(self, R: float, factor: float) -> "PowerProfile":
        return PowerProfile(self.c * factor * R ** (-self.alpha), self.alpha)

    def transform(self, u: float, mode: str) -> complex:
        if u == 0.0:
            return 0j
        a = self.alpha
        au = abs(u)
        if a == 1.0:
            if mode != "ball":
                raise OutOfRange("order one requires unit-ball compensation")
            return self.c * complex(-0.5 * math.pi * au, u * (1.0 - EULER_GAMMA - math.log(au)))
        if (a < 1.0 and mode != "none") or (a > 1.0 and mode != "full"):
            return _numeric_transform(self, u, mode)
        g = special.gamma(-a) * au ** a
        return self.c * g * complex(math.cos(0.5 * math.pi * a), -math.copysign(1.0, u) * math.sin(0.5 * math.pi * a))


class CallableProfile(RadialProfile):
    def __init__(self, func: Callable[[np.ndarray], np.ndarray], order: float, label: str = "callable"):
        self.func = func
        self.order = float(order)
        self.label = label

    def __call__(self, r):
        return np.asarray(self.func(np.asarray(r, dtype=float)), dtype=float)

    def __repr__(self) -> str:
        return f"CallableProfile({self.label}, order={self.order})"


class DilatedProfile(RadialProfile):
    def __init__(self, base: RadialProfile, R: float, factor: float):
        if isinstance(base, DilatedProfile):
            R, factor, base = base.R * R, base.factor * factor, base.base
        self.base, self.R, self.factor = base, float(R), float(factor)
        self.order = base.order
        self.support_max = base.support_max / self.R

    def __call__(self, r):
        return self.factor * self.R * self.base(self.R * np.asarray(r, dtype=float))

    def tail(self, r: float) -> float:
        return self.factor * self.base.tail(self.R * r)

    def moment(self, p: float, a: float, b: float) -> float:
        return self.factor * self.R ** (-p) * self.base.moment(p, self.R * a, self.R * b)


class TruncatedProfile(RadialProfile):
    def __init__(self, base: RadialProfile, r_max: float):
        self.base, self.support_max = base, float(r_max)
        self.order = base.order

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.support_max, self.base(np.minimum(r, self.support_max)), 0.0)

    def tail(self, r: float) -> float:
        if r >= self.support_max:
            return 0.0
        return self.base.tail(r) - self.base.tail(self.support_max)

    def moment(self, p: float, a: float, b: float) -> float:
        return self.base.moment(p, a, min(b, self.support_max)) if a < self.support_max else 0.0


class TabulatedProfile(RadialProfile):
    """Log-log cubic interpolation of a positive density, power-law continued past the table."""

    def __init__(self, r: np.ndarray, m: np.ndarray, order: float, label: str = "tabulated"):
        self.order = float(order)
        self.label = label
        lr, lm = np.log(r), np.log(m)
        self._spline = interpolate.CubicSpline(lr, lm)
        self._lo, self._hi = lr[0], lr[-1]
        self._slope_lo = float((lm[1] - lm[0]) / (lr[1] - lr[0]))
        self._slope_hi = float((lm[-1] - lm[-2]) / (lr[-1] - lr[-2]))
        self._m_lo, self._m_hi = lm[0], lm[-1]

    def __call__(self, r):
        lr = np.log(np.asarray(r, dtype=float))
        inner = self._spline(np.clip(lr, self._lo, self._hi))
        out = np.where(lr < self._lo, self._m_lo + self._slope_lo * (lr - self._lo), inner)
        out = np.where(lr > self._hi, self._m_hi + self._slope_hi * (lr - self._hi), out)
        return np.exp(out)


def _numeric_transform(profile: RadialProfile, u: float, mode: str) -> complex:
    """int_0^inf [e^{iur} - 1 - i u r chi(r)] m(r) dr by split quadrature.

    The inner region [0, r_c] with r_c = min(1, 1/|u|) uses the cancellation-free
    forms of cos-1 and sin-x in the log variable, with the leading Taylor term
    below R_MIN; the outer region uses the Fourier-weighted QUADPACK rules.
    """
    if u == 0.0:
        return 0j
    au = abs(u)
    sign = 1.0 if u > 0 else -1.0
    top = profile.support_max
    r_c = min(1.0, 1.0 / au, top)
    comp_inner = mode in ("ball", "full")

    def re_in(r):
        return _cos_minus_one(au * r) * profile(r)

    def im_in(r):
        x = au * r
        return (_sin_minus_x(x) if comp_inner else np.sin(x)) * profile(r)

    lo = min(R_MIN, 0.5 * r_c)
    re = log_quad(re_in, lo, r_c, per_decade=2)
    im = log_quad(im_in, lo, r_c, per_decade=2)
    # leading Taylor terms on (0, lo) with m(r) ~ m(lo) (r/lo)^{-1-order}
    a = profile.order
    m_lo = float(profile(lo))
    re += -0.5 * au * au * m_lo * lo ** 3 / (2.0 - a)
    if not comp_inner:
        im += au * m_lo * lo ** 2 / (1.0 - a)

    if r_c < top:
        kw = dict(epsabs=1e-13, epsrel=QUAD_RTOL, limit=400)
        f = lambda r: float(profile(r))
        if math.isinf(top):
            c_out, err_c = integrate.quad(f, r_c, math.inf, weight="cos", wvar=au, limlst=200)
            s_out, err_s = integrate.quad(f, r_c, math.inf, weight="sin", wvar=au, limlst=200)
        else:
            c_out, err_c = integrate.quad(f, r_c, top, weight="cos", wvar=au, **kw)
            s_out, err_s = integrate.quad(f, r_c, top, weight="sin", wvar=au, **kw)
        if not (np.isfinite(c_out) and np.isfinite(s_out)):
            raise QuadratureFailure(f"outer symbol quadrature failed at u={u}")
        re += c_out - profile.tail(r_c)
        im += s_out
        if mode == "full":
            im -= au * profile.moment(1.0, r_c, math.inf)
        elif mode == "ball" and r_c < 1.0:
            im -= au * profile.moment(1.0, r_c, 1.0)
    return complex(re, sign * im)


# ---------------------------------------------------------------- the measure

def _unit_rows(directions) -> np.ndarray:
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    norms = np.linalg.norm(d, axis=1)
    if np.any(norms == 0):
        raise OutOfRange("directions must be nonzero")
    return d / norms[:, None]


@dataclass(frozen=True, eq=False)
class LevyMeasure:
    """Levy measure as weighted radial profiles along unit directions."""

    directions: np.ndarray
    weights: np.ndarray
    profiles: tuple
    alpha: float
    scaling: ScalingFunction | None = None
    variant: str = "radial_density"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        dirs = _unit_rows(self.directions)
        wts = np.asarray(self.weights, dtype=float).ravel()
        profs = tuple(self.profiles)
        if len(profs) == 1 and len(wts) > 1:
            profs = profs * len(wts)
        if not (len(dirs) == len(wts) == len(profs)):
            raise OutOfRange("directions, weights and profiles must have equal length")
        if np.any(wts < 0):
            raise OutOfRange("spherical weights must be nonnegative")
        if not 0.0 < self.alpha < 2.0:
            raise OutOfRange(f"order must lie in (0, 2), got {self.alpha}")
        dirs.setflags(write=False)
        wts.setflags(write=False)
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "weights", wts)
        object.__setattr__(self, "profiles", profs)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "_cache", {})

    @property
    def d(self) -> int:
        return self.directions.shape[1]

    @property
    def chi_mode(self) -> str:
        return chi_mode(self.alpha)

    def _atoms(self):
        return zip(self.directions, self.weights, self.profiles)

    def total_small_second_moment(self) -> float:
        return sum(w * p.moment(2.0, 0.0, 1.0) for _, w, p in self._atoms())

    def levy_integral(self) -> float:
        """int min(|y|^2, 1) nu(dy)."""
        return self.total_small_second_moment() + self.tail(1.0)

    def is_symmetric(self, atol: float = 1e-12) -> bool:
        return self.symmetry_defect() <= atol

    def symmetry_defect(self) -> float:
        """Largest weight mismatch between an atom and its mirror image (profiles compared by identity)."""
        worst = 0.0
        for th, w, p in self._atoms():
            mirror = 0.0
            for th2, w2, p2 in self._atoms():
                if p2 is p or p2 == p:
                    if np.allclose(th2, -th, atol=1e-12):
                        mirror += w2
            same = sum(w2 for th2, w2, p2 in self._atoms()
                       if (p2 is p or p2 == p) and np.allclose(th2, th, atol=1e-12))
            worst = max(worst, abs(same - mirror))
        return worst

    # ---- measure-theoretic operations

    def tail(self, r: float) -> float:
        if not r > 0:
            raise OutOfRange("tail radius must be > 0")
        return float(sum(w * p.tail(r) for _, w, p in self._atoms()))

    def rescale(self, R: float, weighted: bool = False) -> "LevyMeasure":
        """nu_R(B) = nu({y : y/R in B}), times w(R) when ``weighted``."""
        if not R > 0:
            raise OutOfRange("R must be > 0")
        factor = 1.0
        if weighted:
            if self.scaling is None:
                raise OutOfRange("weighted rescaling needs a scaling function")
            factor = float(self.scaling.w(R))
        profs = tuple(p.dilate(R, factor) for p in self.profiles)
        info = {"base": self.info.get("base", self.variant), "R": R * self.info.get("R", 1.0),
                "weighted": weighted}
        return LevyMeasure(self.directions, self.weights, profs, self.alpha, self.scaling,
                           "rescaled", info)

    def symmetrize(self) -> "LevyMeasure":
        atoms: list[list] = []
        for th, w, p in self._atoms():
            for direction in (th, -th):
                for atom in atoms:
                    if (atom[2] is p or atom[2] == p) and np.allclose(atom[0], direction, atol=1e-12):
                        atom[1] += 0.5 * w
                        break
                else:
                    atoms.append([direction, 0.5 * w, p])
        return LevyMeasure(np.array([a[0] for a in atoms]), np.array([a[1] for a in atoms]),
                           tuple(a[2] for a in atoms), self.alpha, self.scaling, self.variant,
                           {**self.info, "symmetrized": True})

    def restrict(self, r_max: float) -> "LevyMeasure":
        """The restriction to the closed ball of radius r_max."""
        profs = tuple(p.truncate(r_max) for p in self.profiles)
        return LevyMeasure(self.directions, self.weights, profs, self.alpha, self.scaling,
                           self.variant, {**self.info, "restricted_to": r_max})

    def scaled(self, factor: float) -> "LevyMeasure":
        return LevyMeasure(self.directions, self.weights * factor, self.profiles, self.alpha,
                           self.scaling, self.variant, dict(self.info))

    def truncated_moment(self, p: float, region: str = "inside") -> float:
        """int |y|^p nu(dy) over |y| <= 1 ('inside') or |y| > 1 ('outside')."""
        a, b = (0.0, 1.0) if region == "inside" else (1.0, math.inf)
        if region not in ("inside", "outside"):
            raise OutOfRange("region must be 'inside' or 'outside'")
        return float(sum(w * prof.moment(p, a, b) for _, w, prof in self._atoms() if w > 0))

    def annulus_first_moment(self, r: float, R: float) -> np.ndarray:
        """int_{r<|y|<R} y nu(dy) as a d-vector."""
        out = np.zeros(self.d)
        for th, w, p in self._atoms():
            out += w * th * p.moment(1.0, r, R)
        return out

    def tail_ratio_integral(self, r: float) -> float:
        """int_0^1 s * tail(r s) / tail(r) ds."""
        base = self.tail(r)
        if base <= 0:
            raise DegenerateTail(f"tail vanishes at r={r}")
        f = lambda s: s * self.tail(r * s) / base
        val, err = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
        if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
            raise QuadratureFailure(f"tail ratio quadrature failed at r={r} (err {err:.3g})")
        return float(val)

    def w_moment(self, power: float, r_lo: float, r_hi: float) -> float:
        """int_{r_lo<|y|<=r_hi} w(|y|)^power nu(dy)."""
        sf = self.scaling
        return float(sum(w * log_quad(lambda r: np.asarray(sf.w(r)) ** power * p(r), r_lo, min(r_hi, p.support_max))
                         for _, w, p in self._atoms()))

    # ---- symbol

    def symbol(self, xi) -> complex | np.ndarray:
        """psi(xi) = int [e^{i 2 pi xi.y} - 1 - i 2 pi chi(y) xi.y] nu(dy).

        ``xi`` may be a d-vector or an array of shape (..., d); in one dimension a
        plain scalar or 1-D array of frequencies is accepted too.
        """
        x = np.asarray(xi, dtype=float)
        scalar = False
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.ndim == 1:
            x, scalar = x[None, :], True
        flat = x.reshape(-1, self.d)
        out = np.zeros(flat.shape[0], dtype=complex)
        mode = self.chi_mode
        for th, w, p in self._atoms():
            if w == 0:
                continue
            s = 2.0 * math.pi * (flat @ th)
            out += w * self._transform_many(p, s, mode)
        out = out.reshape(x.shape[:-1])
        return complex(out[0]) if scalar else out

    def _transform_many(self, profile: RadialProfile, s: np.ndarray, mode: str) -> np.ndarray:
        # the transform is Hermitian in s: compute on unique |s| only
        au = np.abs(s)
        uniq, inv = np.unique(np.round(au, 12), return_inverse=True)
        key_cache = self._cache.setdefault(("T", id(profile), mode), {})
        vals = np.empty(uniq.size, dtype=complex)
        for i, uv in enumerate(uniq):
            v = key_cache.get(uv)
            if v is None:
                v = profile.transform(float(uv), mode)
                key_cache[uv] = v
            vals[i] = v
        res = vals[inv]
        return np.where(s < 0, np.conj(res), res)

    def describe(self) -> dict:
        return {"variant": self.variant, "alpha": self.alpha, "d": self.d,
                "directions": self.directions.tolist(), "weights": self.weights.tolist(),
                "scaling": self.scaling.describe() if self.scaling else None,
                **{k: v for k, v in self.info.items() if isinstance(v, (int, float, str, bool))}}

    # ---- assumption checks

    def check_assumption_A(self, params: "AssumptionParams") -> Report:
        return check_assumption_A(self, params)

    def tail_scaling_constants(self, r_grid: Sequence[float]) -> tuple[float, float]:
        return tail_scaling_constants(self, r_grid)


# ---------------------------------------------------------------- constructors

def _default_directions(d: int) -> tuple[np.ndarray, np.ndarray]:
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        k = 64
        ang = 2 * math.pi * np.arange(k) / k
        return np.stack([np.cos(ang), np.sin(ang)], axis=1), np.full(k, 2 * math.pi / k)
    eye = np.eye(d)
    dirs = np.concatenate([eye, -eye])
    area = 2 * math.pi ** (d / 2) / special.gamma(d / 2)
    return dirs, np.full(2 * d, area / (2 * d))


def stable(alpha: float, d: int = 1, directions=None, weights=None, c: float = 1.0) -> LevyMeasure:
    """Radial alpha-stable measure c * r^{-1-alpha} dr Sigma(dtheta), with w = l = r^alpha."""
    if directions is None:
        directions, default_w = _default_directions(d)
        weights = default_w if weights is None else weights
    profile = PowerProfile(float(c), float(alpha))
    n = len(np.atleast_2d(directions))
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    return LevyMeasure(np.atleast_2d(directions), w, (profile,) * n, alpha, PowerLaw(alpha),
                       "stable_confined", {"confinement": [1.0, 1.0]})


def stable_confined(alpha: float, density: Callable[[np.ndarray, int], np.ndarray],
                    bounds: tuple[float, float], d: int = 1, directions=None,
                    weights=None) -> LevyMeasure:
    """Measure a(r, k) r^{-1-alpha} dr Sigma(dtheta) with lo <= a <= hi.

    It is therefore confined between the stable measures with spherical parts
    lo*Sigma and hi*Sigma; w = l = r^alpha.
    """
    lo, hi = bounds
    if not 0 < lo <= hi:
        raise OutOfRange("confinement bounds must satisfy 0 < lo <= hi")
    if directions is None:
        directions, default_w = _default_directions(d)
        weights = default_w if weights is None else weights
    dirs = np.atleast_2d(directions)
    w = np.ones(len(dirs)) if weights is None else np.asarray(weights, dtype=float)
    probe = np.logspace(-6, 6, 121)
    profs = []
    for k in range(len(dirs)):
        a_vals = np.asarray(density(probe, k), dtype=float)
        if np.any(a_vals < lo * (1 - 1e-12)) or np.any(a_vals > hi * (1 + 1e-12)):
            raise OutOfRange(f"density factor leaves [{lo}, {hi}] along direction {k}")
        profs.append(CallableProfile(lambda r, k=k: density(r, k) * r ** (-1.0 - alpha), alpha,
                                     label=f"confined[{k}]"))
    return LevyMeasure(dirs, w, tuple(profs), alpha, PowerLaw(alpha), "stable_confined",
                       {"confinement": [lo, hi]})


def subordinated(sf: BernsteinDerived, directions=None, weights=None,
                 kernel: Callable[[np.ndarray, int], np.ndarray] | None = None,
                 kernel_bounds: tuple[float, float] = (1.0, 1.0), table_points: int = 801) -> LevyMeasure:
    """Measure a(r, k) j(r) r^{d-1} dr Sigma(dtheta) with j the subordinated Gaussian kernel of ``sf``."""
    d = sf.d
    if directions is None:
        directions, default_w = _default_directions(d)
        weights = default_w if weights is None else weights
    dirs = np.atleast_2d(directions)
    w = np.ones(len(dirs)) if weights is None else np.asarray(weights, dtype=float)
    r = np.logspace(-9, 9, table_points)
    jr = np.asarray(sf.jump_kernel(r))
    order = 2.0 * sf.sigma2
    base = TabulatedProfile(r, jr * r ** (d - 1), order, label="subordinated")
    if kernel is None:
        profs = (base,) * len(dirs)
    else:
        lo, hi = kernel_bounds
        profs = tuple(CallableProfile(lambda x, k=k: kernel(x, k) * base(x), order, label=f"sub[{k}]")
                      for k in range(len(dirs)))
    return LevyMeasure(dirs, w, profs, order, sf, "subordinated",
                       {"sigmas": list(sf.sigmas), "kernel_bounds": list(kernel_bounds)})


def radial_density(func: Callable[[np.ndarray], np.ndarray], alpha: float, scaling: ScalingFunction,
                   d: int = 1, directions=None, weights=None) -> LevyMeasure:
    if directions is None:
        directions, default_w = _default_directions(d)
        weights = default_w if weights is None else weights
    dirs = np.atleast_2d(directions)
    w = np.ones(len(dirs)) if weights is None else np.asarray(weights, dtype=float)
    prof = CallableProfile(func, alpha, label="radial")
    return LevyMeasure(dirs, w, (prof,) * len(dirs), alpha, scaling, "radial_density", {})


# ---------------------------------------------------------------- assumption checks

@dataclass
class AssumptionParams:
    alpha1: float
    alpha2: float
    R_grid: Sequence[float] = tuple(np.logspace(-3, 3, 13))
    r_grid: Sequence[float] = tuple(np.logspace(-3, 3, 13))
    annuli: Sequence[tuple[float, float]] = ((1e-3, 1.0), (0.1, 1.0), (0.5, 2.0), (1e-2, 1e2))
    N0: float | None = None
    minorant: LevyMeasure | None = None
    n_directions: int = 64
    symmetry_atol: float = 1e-10


def _admissible_exponents(alpha: float, a1: float, a2: float) -> bool:
    if a1 < a2:
        return False
    if alpha < 1:
        return 0 < a1 < 1 and 0 < a2 < 1
    if alpha == 1:
        return 1 < a1 <= 2 and 0 <= a2 < 1
    return 1 < a1 <= 2 and 1 < a2 <= 2


def sphere_directions(d: int, count: int) -> np.ndarray:
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2 * math.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    i = np.arange(count) + 0.5
    phi = np.arccos(1 - 2 * i / count)
    th = math.pi * (1 + 5 ** 0.5) * i
    base = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
    if d == 3:
        return base
    raise OutOfRange("direction grids are provided for d <= 3")


def check_assumption_A(m: LevyMeasure, params: AssumptionParams) -> Report:
    report = Report("assumption_A")

    # (iii) uniform moments of the weighted rescalings
    ok_exp = _admissible_exponents(m.alpha, params.alpha1, params.alpha2)
    sup_val, worst_R, err = 0.0, None, None
    if m.scaling is None:
        err = "no scaling function attached"
    else:
        for R in params.R_grid:
            mr = m.rescale(float(R), weighted=True)
            try:
                val = mr.truncated_moment(params.alpha1, "inside") + mr.truncated_moment(params.alpha2, "outside")
            except DivergentIntegral as exc:
                err = f"R={R}: {exc}"
                break
            if val > sup_val:
                sup_val, worst_R = val, float(R)
    passed = ok_exp and err is None and np.isfinite(sup_val)
    if params.N0 is not None:
        passed = passed and sup_val <= params.N0
    report.add("(iii) moments", passed, alpha1=params.alpha1, alpha2=params.alpha2,
               admissible_exponents=ok_exp, sup_moment=sup_val, argmax_R=worst_R,
               N0=params.N0 if params.N0 is not None else sup_val, error=err)

    # (iv) tail continuity and the tail-ratio integral
    try:
        ratios = [m.tail_ratio_integral(float(r)) for r in params.r_grid]
        jumps = [abs(m.tail(float(r) * (1 + 1e-7)) / m.tail(float(r)) - 1.0) for r in params.r_grid]
        report.add("(iv) tail", bool(np.all(np.isfinite(ratios))) and max(jumps) < 1e-4,
                   C0=float(max(ratios)), min_ratio=float(min(ratios)), max_local_jump=float(max(jumps)))
    except (QuadratureFailure, DegenerateTail, DivergentIntegral) as exc:
        report.add("(iv) tail", False, error=str(exc))

    # (ii) annulus symmetry for order one
    if m.alpha == 1.0:
        worst = 0.0
        worst_pair = None
        for r, R in params.annuli:
            v = float(np.linalg.norm(m.annulus_first_moment(r, R)))
            if v > worst:
                worst, worst_pair = v, (r, R)
        report.add("(ii) symmetry", worst <= params.symmetry_atol, max_annulus_moment=worst,
                   annulus=worst_pair)
    else:
        report.add("(ii) symmetry", True, applicable=False)

    # (i) non-degeneracy of a minorant
    if params.minorant is not None:
        report.items.extend(_nondegeneracy(m, params).items)
    else:
        report.add("(i) nondegeneracy", True, applicable=False, note="no minorant supplied")
    return report


def _nondegeneracy(m: LevyMeasure, params: AssumptionParams) -> Report:
    mu0 = params.minorant
    rep = Report("nondegeneracy")
    d = mu0.d
    try:
        second = sum(w * p.moment(2.0, 0.0, math.inf) for _, w, p in mu0._atoms())
    except DivergentIntegral:
        second = math.inf
    dirs = sphere_directions(d, params.n_directions)
    # directional lower bound int_{|y|<=1} |e.y|^2 mu0(dy) over unit e
    proj = dirs @ mu0.directions.T
    inner = np.array([p.moment(2.0, 0.0, 1.0) for p in mu0.profiles])
    c_dir = (proj ** 2 * (mu0.weights * inner)[None, :]).sum(axis=1)
    rep.add("(i) directional lower bound", bool(np.min(c_dir) > 0), c=float(np.min(c_dir)),
            directions=len(dirs))

    mode = mu0.chi_mode
    alpha = mu0.alpha

    def upsilon(rad: float) -> float:
        if mode == "none":
            return 0.0
        tot = 0.0
        for _, w, p in mu0._atoms():
            cut = 1.0 / rad
            hi_r = 1.0 if mode == "ball" else math.inf
            part = rad * p.moment(2.0, 0.0, min(cut, hi_r))
            if cut < hi_r:
                part += p.moment(1.0, cut, hi_r)
            tot += w * part
        return tot

    def integrand(rad_arr):
        rad_arr = np.asarray(rad_arr, dtype=float)
        out = []
        for rad in rad_arr.ravel():
            rad = float(rad)
            xi = dirs * rad
            zeta = -np.real(mu0.symbol(xi))
            val = rad ** 4 * (1 + upsilon(rad)) ** (d + 3) * np.exp(-zeta)
            # spherical average times surface measure times rad^{d-1}
            area = 2 * math.pi ** (d / 2) / special.gamma(d / 2)
            out.append(area * rad ** (d - 1) * float(np.mean(val)))
        return np.array(out).reshape(rad_arr.shape)

    near = log_quad(integrand, 1e-6, 1.0, per_decade=1)
    far = improper_integral(integrand, "infinity", decades=8)
    finite = bool(np.isfinite(second) and far["convergent"])
    rep.add("(i) integrability", finite, second_moment=second,
            xi_integral=near + far["value"], endpoint_slope=far["slope"])
    return rep


def tail_scaling_constants(m: LevyMeasure, r_grid: Sequence[float]) -> tuple[float, float]:
    """(min, max) over the grid of w(r)^{-1} / tail(r)."""
    r = np.asarray(r_grid, dtype=float)
    if r.size < 8 or math.log10(r.max() / r.min()) < 4 - 1e-9:
        raise OutOfRange("r_grid needs >= 8 points spanning >= 4 decades")
    if m.scaling is None:
        raise OutOfRange("measure has no scaling function")
    tails = np.array([m.tail(float(x)) for x in r])
    if np.any(tails <= 0):
        raise DegenerateTail("tail vanishes on the grid")
    ratio = 1.0 / (np.asarray(m.scaling.w(r)) * tails)
    return float(ratio.min()), float(ratio.max())


def from_config(cfg: dict, sf: ScalingFunction | None = None) -> LevyMeasure:
    variant = cfg.get("variant", "stable")
    d = int(cfg.get("d", 1))
    dirs = cfg.get("directions")
    wts = cfg.get("weights")
    if variant == "stable":
        return stable(float(cfg["alpha"]), d=d, directions=dirs, weights=wts, c=float(cfg.get("c", 1.0)))
    if variant == "stable_confined":
        from .expressions import compile_expression
        expr = compile_expression(cfg["density"], ("r", "k"))
        lo, hi = cfg["bounds"]
        return stable_confined(float(cfg["alpha"]), lambda r, k: expr(r=r, k=k), (float(lo), float(hi)),
                               d=d, directions=dirs, weights=wts)
    if variant == "subordinated":
        if not isinstance(sf, BernsteinDerived):
            raise OutOfRange("subordinated measures need a bernstein scaling declaration")
        return subordinated(sf, directions=dirs, weights=wts)
    if variant == "radial_density":
        from .expressions import compile_expression
        expr = compile_expression(cfg["density"], ("r",))
        return radial_density(lambda r: expr(r=r), float(cfg["alpha"]), sf, d=d, directions=dirs, weights=wts)
    raise OutOfRange(f"unknown measure variant {variant!r}")
