"""Nonlocal operators on periodic grid functions.

Two independent evaluation routes are provided. The spectral route multiplies
Fourier coefficients by the Levy symbol. The quadrature route integrates the
compensated differences along each direction of the measure in x-space:
a Taylor expansion inside one lattice cell, cubic product integration of the
trigonometric interpolant on a refined grid out to a few periods, and an
integration-by-parts expansion for the remaining far field. Both routes act
diagonally on lattice modes, so the quadrature route is stored as a discrete
multiplier too, but it never evaluates the symbol.

Quadrature-route directions must be lattice axes (+-e_i).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .errors import (DivergentIntegral, OutOfRange, QuadratureFailure, Report, SingularCoefficient,
                     TimeQuadratureTruncation)
from .expressions import Expression, compile_expression
from .grid import GridFunction, Lattice, band_limited_resample
from .measures import CallableProfile, LevyMeasure, PowerProfile, RadialProfile, chi, chi_mode
from .scaling import ScalingFunction
from .simulate import CoefficientField, density

__all__ = [
    "compile_expression", "FrozenKernel", "LowerOrderCoefficients", "CoefficientField", "RayRule",
    "symbol_on_lattice", "fractional_symbol", "generator_multiplier", "second_difference",
    "apply_generator", "apply_multiplier", "apply_fractional_subordination", "fractional_resolvent",
    "resolvent_multiplier", "apply_frozen", "apply_A", "apply_G", "apply_Q", "commutator",
    "coefficient_modulus", "check_kernel",
]

TAYLOR_ORDER = 20
REFINE = 8
FAR_PERIODS = 4
# start of the subordination time window relative to the fastest mode (see _head_integral)
HEAD_REL = 1e-5
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_T = 0.5 * (_GL_X + 1.0)
# cubic Lagrange basis on nodes -1, 0, 1, 2 evaluated at the Gauss points of [0, 1]
_CUBIC = np.stack([
    -_GL_T * (_GL_T - 1) * (_GL_T - 2) / 6.0,
    (_GL_T + 1) * (_GL_T - 1) * (_GL_T - 2) / 2.0,
    -(_GL_T + 1) * _GL_T * (_GL_T - 2) / 2.0,
    (_GL_T + 1) * _GL_T * (_GL_T - 1) / 6.0,
])


# ---------------------------------------------------------------- ray quadrature

def _profile_derivatives(profile: RadialProfile, r: float) -> np.ndarray:
    """m(r), m'(r), m''(r), m'''(r)."""
    if r >= profile.support_max:
        return np.zeros(4)
    if isinstance(profile, PowerProfile):
        a = profile.alpha
        v = profile.c * r ** (-1.0 - a)
        return np.array([v, -(1 + a) * v / r, (1 + a) * (2 + a) * v / r ** 2,
                         -(1 + a) * (2 + a) * (3 + a) * v / r ** 3])
    h = 0.02 * r
    x = r + h * np.arange(-3, 4)
    f = np.asarray(profile(x), dtype=float)
    d1 = (-f[0] + 9 * f[1] - 45 * f[2] + 45 * f[4] - 9 * f[5] + f[6]) / (60 * h)
    d2 = (2 * f[0] - 27 * f[1] + 270 * f[2] - 490 * f[3] + 270 * f[4] - 27 * f[5] + 2 * f[6]) / (180 * h ** 2)
    d3 = (f[0] - 8 * f[1] + 13 * f[2] - 13 * f[4] + 8 * f[5] - f[6]) / (8 * h ** 3)
    return np.array([f[3], d1, d2, d3])


class RayRule:
    """Quadrature for int_0^inf [u(x + r e) - u(x) - c(r) r u'(x)] m(r) dr along one lattice axis.

    ``mode`` fixes the compensation c(r): 'none', 'ball' (r <= 1), 'full' (all r)
    or 'cell' (r <= one lattice cell; used where compensations cancel anyway).
    """

    def __init__(self, profile: RadialProfile, period: float, n: int, mode: str,
                 refine: int = REFINE, far_periods: int = FAR_PERIODS):
        if mode not in ("none", "ball", "full", "cell"):
            raise OutOfRange(f"unknown compensation mode {mode!r}")
        self.period, self.n, self.mode = float(period), int(n), mode
        h = self.period / n
        hf = h / refine
        nf = n * refine
        J = far_periods * nf
        self.h, self.R = h, far_periods * self.period
        starts = np.arange(refine, J)
        x = (starts[:, None] + _GL_T[None, :]) * hf
        pw = np.asarray(profile(x), dtype=float) * (0.5 * hf * _GL_W)
        if not np.all(np.isfinite(pw)):
            raise QuadratureFailure("profile is not finite on the quadrature nodes")
        W = np.zeros(J + 3)
        for off in range(4):
            # node index start-1+off, shifted by one so index refine-1 is valid
            np.add.at(W, starts + off, pw @ _CUBIC[off])
        nodes = np.arange(J + 3) - 1
        kper = np.bincount(nodes % nf, weights=W, minlength=nf)
        self._khat = np.fft.ifft(kper) * nf
        self.nf = nf

        self.tail_h = profile.tail(h) if h < profile.support_max else 0.0
        self.tail_R = profile.tail(self.R) if self.R < profile.support_max else 0.0
        self.far = _profile_derivatives(profile, self.R)
        if mode == "none":
            mu1, comp = profile.moment(1.0, 0.0, h), 0.0
        elif mode == "ball":
            mu1, comp = (0.0, profile.moment(1.0, h, 1.0)) if h <= 1.0 else (profile.moment(1.0, 1.0, h), 0.0)
        elif mode == "full":
            mu1, comp = 0.0, profile.moment(1.0, h, math.inf)
        else:
            mu1, comp = 0.0, 0.0
        self.comp = comp
        self.taylor = np.array([mu1] + [profile.moment(float(k), 0.0, h) for k in range(2, TAYLOR_ORDER + 1)])
        self.taylor /= special.factorial(np.arange(1, TAYLOR_ORDER + 1))
        # mass of m beyond half a period: jumps that wrap around the torus
        self.wrap_mass = profile.tail(0.5 * self.period) if 0.5 * self.period < profile.support_max else 0.0

    def multiplier(self, k: np.ndarray) -> np.ndarray:
        """Action on the mode exp(i 2 pi k x / period), k signed integers along the ray."""
        k = np.asarray(k, dtype=int)
        z = 2j * np.pi * k / self.period
        out = self._khat[k % self.nf] - self.tail_h - self.comp * z
        powers = z[..., None] ** np.arange(1, TAYLOR_ORDER + 1)
        out = out + powers @ self.taylor
        zs = np.where(k == 0, 1.0, z)
        far = -self.far[0] / zs + self.far[1] / zs ** 2 - self.far[2] / zs ** 3 + self.far[3] / zs ** 4
        return out + np.where(k == 0, self.tail_R, far)


@lru_cache(maxsize=512)
def ray_rule(profile: RadialProfile, period: float, n: int, mode: str,
             refine: int = REFINE, far_periods: int = FAR_PERIODS) -> RayRule:
    return RayRule(profile, period, n, mode, refine, far_periods)


def _axis_of(theta: np.ndarray) -> tuple[int, int]:
    nz = np.flatnonzero(np.abs(theta) > 1e-12)
    if nz.size != 1 or abs(abs(theta[nz[0]]) - 1.0) > 1e-12:
        raise OutOfRange(f"quadrature route needs lattice-axis directions, got {theta}")
    return int(nz[0]), int(np.sign(theta[nz[0]]))


def _atoms(m: LevyMeasure) -> list[tuple[np.ndarray, float, RadialProfile]]:
    return [(th, float(w), p) for th, w, p in zip(m.directions, m.weights, m.profiles) if w != 0]


def _mode_numbers(lattice: Lattice, axis: int) -> np.ndarray:
    n = lattice.n[axis]
    return np.rint(np.fft.fftfreq(n) * n).astype(int)


def _broadcast_axis(vals: np.ndarray, lattice: Lattice, axis: int) -> np.ndarray:
    shape = [1] * lattice.d
    shape[axis] = -1
    return vals.reshape(shape)


def _ball_correction(profile: RadialProfile, g: float) -> float:
    """int s (1_{s<=g} - 1_{s<=1}) m(s) ds: moves the unit-ball cutoff to radius g."""
    if g == 1.0:
        return 0.0
    lo, hi = min(g, 1.0), max(g, 1.0)
    val = profile.moment(1.0, lo, hi)
    return val if g > 1.0 else -val


def _atom_multiplier(lattice: Lattice, theta, w: float, profile: RadialProfile, mode: str,
                     g: float = 1.0, refine: int = REFINE) -> np.ndarray:
    """Multiplier of one atom after the displacement y -> g y (g > 0), cutoff kept at |y| <= 1."""
    axis, sign = _axis_of(np.asarray(theta, dtype=float))
    prof = profile if g == 1.0 else profile.dilate(1.0 / g, 1.0)
    rule = ray_rule(prof, lattice.L[axis], lattice.n[axis], "ball" if mode == "ball" else mode, refine)
    k = sign * _mode_numbers(lattice, axis)
    vals = rule.multiplier(k)
    if mode == "ball" and g != 1.0:
        vals = vals - _ball_correction(prof, g) * (2j * np.pi * k / lattice.L[axis])
    return _broadcast_axis(w * vals, lattice, axis)


def generator_multiplier(atoms, lattice: Lattice, mode: str, refine: int = REFINE) -> np.ndarray:
    total = np.zeros(lattice.shape, dtype=complex)
    for th, w, p in atoms:
        total = total + _atom_multiplier(lattice, th, w, p, mode, refine=refine)
    return total


def _apply_spec(u: GridFunction, mult: np.ndarray) -> np.ndarray:
    out = np.fft.ifftn(np.fft.fftn(u.values) * mult)
    return out.real if u.is_real() else out


# ---------------------------------------------------------------- spectral route

def symbol_on_lattice(m: LevyMeasure, lattice: Lattice, G: np.ndarray | None = None) -> np.ndarray:
    """psi(G^T xi) on the dual lattice in FFT order."""
    xi = lattice.frequencies()
    if G is not None:
        xi = xi @ np.atleast_2d(np.asarray(G, dtype=float))
    return np.asarray(m.symbol(xi))


def fractional_symbol(psi: np.ndarray, kappa: float) -> np.ndarray:
    """The fractional case table, extended to (1, 2) by composition with the full symbol."""
    if not 0.0 <= kappa < 2.0:
        raise OutOfRange(f"kappa must lie in [0, 2), got {kappa}")
    if kappa == 0.0:
        return np.ones_like(psi)
    if kappa == 1.0:
        return psi
    frac = -np.power(np.maximum(-psi.real, 0.0), kappa if kappa < 1.0 else kappa - 1.0)
    return frac if kappa < 1.0 else psi * frac


def apply_multiplier(u: GridFunction, m: LevyMeasure, kappa: float = 1.0) -> GridFunction:
    if kappa == 0.0:
        return u.like(u.values.copy())
    mult = fractional_symbol(symbol_on_lattice(m, u.lattice), kappa)
    return u.like(_apply_spec(u, mult))


# ---------------------------------------------------------------- quadrature route

def second_difference(u: GridFunction, x, y, alpha: float) -> float:
    """u(x+y) - u(x) - chi(y) y.grad u(x), off-lattice points by trigonometric interpolation."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    vals = u.evaluate(np.stack([x + y, x]))
    out = vals[0] - vals[1]
    c = float(chi(alpha, float(np.linalg.norm(y))))
    if c:
        grad = np.array([u.like(gv).evaluate(x[None, :])[0] for gv in u.gradient()])
        out -= c * float(grad @ y)
    return float(np.real(out))


def apply_generator(u: GridFunction, m: LevyMeasure, refine: int = REFINE) -> GridFunction:
    """L u by x-space quadrature along the directions of the measure."""
    mult = generator_multiplier(_atoms(m), u.lattice, m.chi_mode, refine)
    return u.like(_apply_spec(u, mult))


def wrap_mass(m: LevyMeasure, lattice: Lattice) -> float:
    """Jump intensity beyond half the box: the part of the measure that wraps around the torus."""
    return float(sum(w * p.tail(0.5 * min(lattice.L)) for _, w, p in _atoms(m)))


# ---------------------------------------------------------------- kernels and coefficients

class FrozenKernel:
    """A bounded kernel rho(t, z, y); z and y are arrays of shape (..., d)."""

    def __init__(self, func: Callable, d: int, K: float | None = None, label: str = "rho",
                 depends_on_y: bool | None = None, depends_on_z: bool | None = None):
        self.func, self.d, self.label = func, int(d), label
        self.K = K
        self._dy, self._dz = depends_on_y, depends_on_z

    @classmethod
    def constant(cls, value: float, d: int) -> "FrozenKernel":
        return cls(lambda t, z, y: np.full(np.broadcast_shapes(np.shape(z)[:-1], np.shape(y)[:-1]), float(value)),
                   d, K=abs(float(value)), label=f"const {value}", depends_on_y=False, depends_on_z=False)

    @classmethod
    def from_expression(cls, text: str, d: int, K: float | None = None) -> "FrozenKernel":
        expr = compile_expression(text, ("t", "x", "z", "y"), {"x": d, "z": d, "y": d})
        uses_z = expr.uses("x") or expr.uses("z")

        def func(t, z, y, expr=expr):
            return expr(t=t, x=z, z=z, y=y)
        return cls(func, d, K, label=text, depends_on_y=expr.uses("y"), depends_on_z=uses_z)

    def __call__(self, t: float, z, y) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.asarray(self.func(t, z, y), dtype=float)

    def _probe(self, t: float, vary: str) -> bool:
        rng = np.random.default_rng(12345)
        z = rng.uniform(-1, 1, (16, self.d))
        y = rng.normal(size=(16, self.d)) * np.exp(rng.uniform(-6, 2, (16, 1)))
        base = self(t, z, y)
        if vary == "y":
            other = self(t, z, y[::-1])
        else:
            other = self(t, z[::-1], y)
        return bool(np.max(np.abs(base - other)) > 1e-14 * max(1.0, np.max(np.abs(base))))

    def depends_on_y(self, t: float = 0.0) -> bool:
        return self._dy if self._dy is not None else self._probe(t, "y")

    def depends_on_z(self, t: float = 0.0) -> bool:
        return self._dz if self._dz is not None else self._probe(t, "z")


def _weighted_atoms(atoms, weight: Callable[[np.ndarray, np.ndarray], np.ndarray]):
    """Multiply each atom's profile by weight(theta, r); constant weights just rescale the atom."""
    probe = np.logspace(-8, 3, 45)
    out = []
    for th, w, p in atoms:
        vals = np.asarray(weight(th, probe), dtype=float)
        if np.ptp(vals) <= 1e-15 * max(1.0, np.max(np.abs(vals))):
            out.append((th, w * float(vals[0]), p))
        else:
            prof = CallableProfile(lambda r, p=p, th=th: p(r) * weight(th, np.asarray(r)), p.order,
                                   label=f"weighted {p!r}")
            prof.support_max = p.support_max
            out.append((th, w, prof))
    return out


def _frozen_atoms(rho: FrozenKernel, m: LevyMeasure, t: float, z) -> list:
    z = np.atleast_1d(np.asarray(z, dtype=float))

    def weight(th, r):
        r = np.asarray(r, dtype=float)
        y = r[..., None] * th
        return rho(t, np.broadcast_to(z, y.shape), y)
    return _weighted_atoms(_atoms(m), weight)


def _annulus_defect(atoms, radii=(1e-3, 1e-2, 0.1, 0.5)) -> float:
    worst = 0.0
    d = len(atoms[0][0])
    for r in radii:
        vec = np.zeros(d)
        for th, w, p in atoms:
            vec += w * th * p.moment(1.0, r, 1.0)
        scale = sum(w * p.moment(1.0, r, 1.0) for th, w, p in atoms)
        worst = max(worst, float(np.linalg.norm(vec)) / max(scale, 1e-300))
    return worst


def check_kernel(rho: FrozenKernel, m: LevyMeasure, t: float, z_points: np.ndarray,
                 symmetry_tol: float = 1e-8) -> Report:
    """Boundedness on sampled points and, for order one, vanishing annulus first moments."""
    rep = Report("kernel")
    z_points = np.atleast_2d(z_points)
    rng = np.random.default_rng(7)
    y = rng.normal(size=(256, m.d)) * np.exp(rng.uniform(-8, 3, (256, 1)))
    vals = np.stack([rho(t, np.broadcast_to(z, y.shape), y) for z in z_points])
    sup = float(np.max(np.abs(vals)))
    rep.add("bounded", rho.K is None or sup <= rho.K * (1 + 1e-12), sup=sup, K=rho.K)
    if m.chi_mode == "ball":
        defect = max(_annulus_defect(_frozen_atoms(rho, m, t, z)) for z in z_points[:8])
        rep.add("annulus symmetry", defect <= symmetry_tol, defect=defect)
    return rep


def _require_symmetric_order_one(atoms, alpha: float) -> None:
    if chi_mode(alpha) == "ball":
        defect = _annulus_defect(atoms)
        if defect > 1e-8:
            raise OutOfRange(f"order-one kernels must have vanishing annulus moments (defect {defect:.3g})")


def apply_frozen(u: GridFunction, rho: FrozenKernel, m: LevyMeasure, t: float, z) -> GridFunction:
    """L_{t,z} u: the generator with its kernel frozen at the point z."""
    atoms = _frozen_atoms(rho, m, t, z)
    _require_symmetric_order_one(atoms, m.alpha)
    return u.like(_apply_spec(u, generator_multiplier(atoms, u.lattice, m.chi_mode)))


def _kernel_terms(rho: FrozenKernel, atoms, t: float, lattice: Lattice,
                  tol: float = 1e-14) -> list[tuple[np.ndarray | None, list]]:
    """Split rho(t, x, y) into sum_i a_i(x) b_i(y): (grid values of a_i, atoms weighted by b_i)."""
    pts = lattice.points()
    if not rho.depends_on_y(t):
        y0 = np.zeros(pts.shape)
        y0[..., 0] = 0.5
        return [(rho(t, pts, y0), atoms)]
    if not rho.depends_on_z(t):
        z0 = np.zeros(lattice.d)
        return [(None, _weighted_atoms(atoms, lambda th, r: rho(t, np.broadcast_to(z0, r.shape + (lattice.d,)),
                                                                  np.asarray(r)[..., None] * th)))]
    if lattice.d != 1:
        raise OutOfRange("kernels depending on both z and y are supported in one dimension")
    P, o = lattice.L[0], lattice.origin[0]
    probe_r = np.logspace(-6, 2, 33)
    nz = 16
    while True:
        zs = o + P * np.arange(nz) / nz
        samp = np.stack([rho(t, np.full((probe_r.size, 1), zz), (probe_r[:, None] * th[None, :]))
                         for zz in zs for th, _, _ in atoms[:2]]).reshape(nz, -1)
        coef = np.fft.rfft(samp, axis=0) / nz
        mag = np.max(np.abs(coef), axis=1)
        if mag[-(nz // 4):].max() <= tol * mag.max() or nz >= 512:
            break
        nz *= 2
    keep = np.flatnonzero(mag > tol * mag.max())
    x = lattice.axes()[0]
    zs = o + P * np.arange(nz) / nz
    terms = []
    for k in keep:
        for part in ("cos", "sin") if k else ("cos",):
            if k and part == "sin" and np.max(np.abs(coef[k].imag)) <= tol * mag.max():
                continue
            if k and part == "cos" and np.max(np.abs(coef[k].real)) <= tol * mag.max():
                continue
            basis = np.exp(-2j * np.pi * k * (zs - o) / P) / nz
            scale = 1.0 if k == 0 else 2.0

            def weight(th, r, basis=basis, scale=scale, part=part):
                r = np.asarray(r, dtype=float)
                y = r[..., None] * th
                acc = sum(b * rho(t, np.full(y.shape, zz), y) for b, zz in zip(basis, zs))
                return scale * (acc.real if part == "cos" else -acc.imag)
            a = np.cos(2 * np.pi * k * (x - o) / P) if part == "cos" else np.sin(2 * np.pi * k * (x - o) / P)
            terms.append((a, _weighted_atoms(atoms, weight)))
    return terms


def apply_A(u: GridFunction, rho: FrozenKernel, m: LevyMeasure, t: float) -> GridFunction:
    """x -> (L_{t,x} u)(x)."""
    out = np.zeros(u.lattice.shape, dtype=u.values.dtype)
    for a, atoms in _kernel_terms(rho, _atoms(m), t, u.lattice):
        _require_symmetric_order_one(atoms, m.alpha)
        vals = _apply_spec(u, generator_multiplier(atoms, u.lattice, m.chi_mode))
        out = out + (vals if a is None else a * vals)
    return u.like(out)


def _cheb_nodes(lo: float, hi: float, count: int) -> np.ndarray:
    j = np.arange(count)
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * j / (count - 1))


def _bary_interp(nodes: np.ndarray, vals: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric interpolation on Chebyshev points of the second kind; vals shape (count, *x.shape)."""
    count = nodes.size
    wts = np.ones(count)
    wts[0] = wts[-1] = 0.5
    wts *= (-1.0) ** np.arange(count)
    diff = x[None, ...] - nodes.reshape((-1,) + (1,) * x.ndim)
    exact = np.abs(diff) < 1e-15
    diff = np.where(exact, 1.0, diff)
    c = wts.reshape((-1,) + (1,) * x.ndim) / diff
    out = np.sum(c * vals, axis=0) / np.sum(c, axis=0)
    hit = exact.any(axis=0)
    if hit.any():
        idx = np.argmax(exact, axis=0)
        out = np.where(hit, np.take_along_axis(vals, idx[None, ...], axis=0)[0], out)
    return out


def _scaled_atom_values(u: GridFunction, theta, w: float, profile: RadialProfile, mode: str,
                        g: np.ndarray, tol: float = 1e-11) -> np.ndarray:
    """Pointwise int [u(x + g(x) r theta) - u(x) - c(r) g(x) r theta.grad u(x)] w m(r) dr."""
    g = np.broadcast_to(np.asarray(g, dtype=float), u.lattice.shape)
    sign = np.sign(g)
    if np.any(sign != sign.flat[0]) or sign.flat[0] == 0:
        raise SingularCoefficient("the displacement scale must keep one sign and stay away from zero")
    theta = np.asarray(theta, dtype=float) * sign.flat[0]
    ag = np.abs(g)
    lo, hi = float(ag.min()), float(ag.max())
    if hi - lo <= 1e-15 * hi:
        return _apply_spec(u, _atom_multiplier(u.lattice, theta, w, profile, mode, lo))
    if isinstance(profile, PowerProfile):
        a = profile.alpha
        base = _apply_spec(u, _atom_multiplier(u.lattice, theta, w, profile, mode))
        out = ag ** a * base
        if mode == "ball":
            axis, s = _axis_of(theta)
            order = [0] * u.d
            order[axis] = 1
            du = s * u.derivative(order).values
            c = profile.c * ag ** a
            corr = c * np.log(ag) if a == 1.0 else c * (ag ** (1 - a) - 1.0) / (1 - a)
            out = out - w * corr * du
        return out
    count, prev = 9, None
    while True:
        nodes = _cheb_nodes(lo, hi, count)
        vals = np.stack([_apply_spec(u, _atom_multiplier(u.lattice, theta, w, profile, mode, float(gn)))
                         for gn in nodes])
        cur = _bary_interp(nodes, vals, ag)
        if prev is not None and np.max(np.abs(cur - prev)) <= tol * max(1.0, np.max(np.abs(cur))):
            return cur
        if count > 65:
            raise QuadratureFailure("interpolation in the displacement scale did not converge")
        prev, count = cur, 2 * count - 1


def _lattice_matrix_field(Gfield: CoefficientField, lattice: Lattice) -> np.ndarray:
    G = Gfield(lattice.points())
    dets = np.abs(np.linalg.det(G))
    if Gfield.c0 and np.min(dets) < Gfield.c0 * (1 - 1e-12):
        raise SingularCoefficient(f"|det G| = {np.min(dets):.3g} below c0 = {Gfield.c0}")
    if np.min(dets) <= 0:
        raise SingularCoefficient("G is singular on the lattice")
    return G


def _transform_atoms_constant(m_atoms, G: np.ndarray):
    """Atoms of the push-forward of the measure under y -> G y, with the scale of each direction."""
    out = []
    for th, w, p in m_atoms:
        v = G @ th
        g = float(np.linalg.norm(v))
        out.append((v / g, w, p, g))
    return out


def apply_G(u: GridFunction, Gfield: CoefficientField, m: LevyMeasure) -> GridFunction:
    """x -> int [u(x + G(x) y) - u(x) - chi(y) G(x) y.grad u(x)] nu(dy)."""
    lat = u.lattice
    G = _lattice_matrix_field(Gfield, lat)
    flat = G.reshape(-1, lat.d, lat.d)
    mode = m.chi_mode
    out = np.zeros(lat.shape)
    if np.max(np.abs(flat - flat[0])) == 0.0:
        for th, w, p, g in _transform_atoms_constant(_atoms(m), flat[0]):
            out = out + _apply_spec(u, _atom_multiplier(lat, th, w, p, mode, g))
        return u.like(out)
    off = flat - np.einsum("kii->ki", flat)[:, :, None] * np.eye(lat.d)
    if np.max(np.abs(off)) > 1e-14 * np.max(np.abs(flat)):
        raise OutOfRange("variable matrix fields must be diagonal for the quadrature route")
    for th, w, p in _atoms(m):
        axis, _ = _axis_of(th)
        out = out + _scaled_atom_values(u, th, w, p, mode, G[..., axis, axis])
    return u.like(out)


@dataclass
class LowerOrderCoefficients:
    """b(t,z), p(t,z), q(t,z,y) = q_scale(t,z) y, kernel rho2(t,z,y) and the auxiliary measure nu2."""

    nu: LevyMeasure
    b: Callable | None = None
    p: Callable | None = None
    q_scale: Callable | None = None
    rho2: FrozenKernel | None = None
    nu2: LevyMeasure | None = None
    K: float | None = None

    @property
    def alpha(self) -> float:
        return self.nu.alpha

    @property
    def jump_measure(self) -> LevyMeasure:
        return self.nu if self.nu2 is None else self.nu2


def apply_Q(u: GridFunction, c: LowerOrderCoefficients, t: float) -> GridFunction:
    lat = u.lattice
    pts = lat.points()
    out = np.zeros(lat.shape)
    if c.p is not None:
        out = out + np.broadcast_to(np.asarray(c.p(t, pts), dtype=float), lat.shape) * u.values
    high = 1.0 < c.alpha < 2.0
    if high and c.b is not None:
        b = np.broadcast_to(np.asarray(c.b(t, pts), dtype=float), lat.shape + (lat.d,))
        out = out + np.einsum("...i,i...->...", b, u.gradient())
    if c.q_scale is None:
        return u.like(out)
    mode = "ball" if high else "none"
    g = np.broadcast_to(np.asarray(c.q_scale(t, pts), dtype=float), lat.shape)
    if np.min(np.abs(g)) == 0.0:
        raise SingularCoefficient("q(t, z, y) must not vanish for y != 0")
    atoms = _atoms(c.jump_measure)
    if mode == "none":
        for _, _, p in atoms:
            try:
                p.moment(1.0, 0.0, 1.0)
            except DivergentIntegral as exc:
                raise DivergentIntegral(f"uncompensated jump part diverges: {exc}") from None
    terms = [(None, atoms)] if c.rho2 is None else _kernel_terms(c.rho2, atoms, t, lat)
    for a, wat in terms:
        vals = sum(_scaled_atom_values(u, th, w, p, mode, g) for th, w, p in wat)
        out = out + (vals if a is None else a * vals)
    return u.like(out)


# ---------------------------------------------------------------- commutator and modulus

def commutator(u: GridFunction, m: LevyMeasure, eta, z=None, rho: FrozenKernel | None = None,
               Gfield: CoefficientField | None = None, t: float = 0.0, beta: float | None = None) -> GridFunction:
    """int [u(x+y)-u(x)][eta(x+y)-eta(x)] (weight) nu(dy) by double-difference quadrature.

    ``eta`` is a grid function or an integer scale m for the bump eta_{m,z}.
    With ``rho`` the kernel is frozen at z; with ``Gfield`` the jump is G(z) y.
    """
    if rho is not None and Gfield is not None:
        raise OutOfRange("choose at most one of rho and Gfield")
    lat = u.lattice
    z = np.zeros(lat.d) if z is None else np.atleast_1d(np.asarray(z, dtype=float))
    if not isinstance(eta, GridFunction):
        from .spaces import bump
        eta = bump(None, int(eta), z, lat)
    fine = lat.refined(2)
    uf, ef = band_limited_resample(u, fine), band_limited_resample(eta, fine)
    atoms = _atoms(m) if rho is None else _frozen_atoms(rho, m, t, z)
    if Gfield is not None:
        G = Gfield(z[None, :])[0]
        mult = sum(_atom_multiplier(fine, th, w, p, "cell", g) for th, w, p, g in _transform_atoms_constant(atoms, G))
    else:
        mult = generator_multiplier(atoms, fine, "cell")
    A = lambda f: np.fft.ifftn(np.fft.fftn(f) * mult).real
    vals = A(uf.values * ef.values) - uf.values * A(ef.values) - ef.values * A(uf.values)
    coarse = vals[tuple(slice(None, None, 2) for _ in range(lat.d))]
    return u.like(coarse)


def coefficient_modulus(Gfield: CoefficientField, sf: ScalingFunction, alpha: float, delta_p: float,
                        z, zp) -> float:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    zp = np.atleast_1d(np.asarray(zp, dtype=float))
    diff = Gfield(z[None, :])[0] - Gfield(zp[None, :])[0]
    gbar = float(np.linalg.norm(diff, 2))
    if gbar == 0.0:
        return 0.0
    if alpha < 1.0:
        return float(1.0 / sf.w(1.0 / gbar))
    if alpha == 1.0:
        return max(float(1.0 / (sf.w(1.0 / gbar) * sf.w(gbar) ** delta_p)), gbar)
    return gbar


# ---------------------------------------------------------------- subordination and resolvents

_PANEL_NODES, _PANEL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _log_time_nodes(t_lo: float, t_hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes in s = log t on unit panels; weights include dt = t ds."""
    s0, s1 = math.log(t_lo), math.log(t_hi)
    edges = np.linspace(s0, s1, max(2, int(math.ceil(s1 - s0)) + 1))
    a, b = edges[:-1, None], edges[1:, None]
    s = 0.5 * (a + b) + 0.5 * (b - a) * _PANEL_NODES
    wts = 0.5 * (b - a) * _PANEL_WEIGHTS * np.exp(s)
    return np.exp(s).ravel(), wts.ravel()


def _semigroup_multiplier(m: LevyMeasure, lattice: Lattice, t: float) -> np.ndarray:
    """x -> E u(x + Z_t) as a multiplier, computed from the periodized density of Z_t."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        dens = density(m, t, lattice, clip=False)
    lat = dens.lattice
    xi = lat.frequencies()
    phase = np.exp(2j * np.pi * (xi @ np.array(lat.origin)))
    return np.fft.ifftn(dens.values) * np.prod(lat.n) * lat.cell_volume * phase


def _time_bounds(m: LevyMeasure, lattice: Lattice, rate_floor: float = 0.0,
                 rel: float = 1e-13) -> tuple[float, float]:
    # only sizes of the symbol choose the window; the integrands come from densities
    re = -np.real(symbol_on_lattice(m, lattice))
    nonzero = re[re > 0]
    big = float(nonzero.max()) if nonzero.size else 1.0
    small = float(nonzero.min()) if nonzero.size else 1.0
    t_lo = rel / (big + rate_floor)
    # the slowest decay is the zero mode's e^{-rate_floor t} whenever a floor is present
    slowest = rate_floor if rate_floor > 0 else small
    t_hi = 40.0 / max(slowest, 1e-300)
    return t_lo, t_hi


def _head_integral(increment: Callable[[float], np.ndarray], t_lo: float, kappa: float) -> np.ndarray:
    """int_0^t_lo t^{-1-kappa} g(t) dt for g(t) = c1 t + c2 t^2 fitted at t_lo and t_lo/2.

    The window starts at a relative time where g is far above rounding, so the
    quadratic fit, not the size of t_lo, controls the error.
    """
    g1, g2 = increment(t_lo), increment(0.5 * t_lo)
    c2 = 2.0 * (g1 - 2.0 * g2) / t_lo ** 2
    c1 = g1 / t_lo - c2 * t_lo
    return c1 * t_lo ** (1.0 - kappa) / (1.0 - kappa) + c2 * t_lo ** (2.0 - kappa) / (2.0 - kappa)


def _time_integral(m: LevyMeasure, lattice: Lattice, kernel: Callable[[float], float],
                   transform: Callable[[np.ndarray, float], np.ndarray], t_lo: float, t_hi: float) -> np.ndarray:
    ts, wts = _log_time_nodes(t_lo, t_hi)
    acc = np.zeros(lattice.shape, dtype=complex)
    for t, wt in zip(ts, wts):
        acc += wt * kernel(t) * transform(_semigroup_multiplier(m, lattice, t), t)
    return acc


def apply_fractional_subordination(u: GridFunction, m: LevyMeasure, kappa: float, R: float = 1.0,
                                   tail_tol: float = 1e-8) -> GridFunction:
    """C int t^{-1-kappa} E[u(x + Z_t) - u(x)] dt for the symmetrized weighted rescaling of the measure."""
    if not 0.0 < kappa < 1.0:
        raise OutOfRange("kappa must lie in (0, 1)")
    mr = m.rescale(R, weighted=True) if R != 1.0 else m
    mbar = mr.symmetrize()
    lat = u.lattice
    t_lo, t_hi = _time_bounds(mbar, lat, rel=HEAD_REL)
    acc = _time_integral(mbar, lat, lambda t: t ** (-1.0 - kappa), lambda M, t: M - 1.0, t_lo, t_hi)
    acc += _head_integral(lambda t: _semigroup_multiplier(mbar, lat, t) - 1.0, t_lo, kappa)
    m_hi = _semigroup_multiplier(mbar, lat, t_hi)
    zero = np.zeros(lat.shape, dtype=bool)
    zero[(0,) * lat.d] = True
    acc += np.where(zero, 0.0, -1.0) * t_hi ** (-kappa) / kappa
    tail = float(np.max(np.abs(np.where(zero, 0.0, m_hi)))) * t_hi ** (-kappa) / kappa
    if tail > tail_tol:
        warnings.warn(f"time quadrature tail estimate {tail:.3g}", TimeQuadratureTruncation, stacklevel=2)
    C = kappa / special.gamma(1.0 - kappa)
    return u.like(_apply_spec(u, C * acc))


def resolvent_multiplier(m: LevyMeasure, lattice: Lattice, a: float, kappa: float, inverse: bool) -> np.ndarray:
    """(a - psi)^{+-kappa} with the symmetrized base a - Re psi except for the full kappa = 1 part."""
    if not a > 0:
        raise OutOfRange("a must be > 0")
    if not 0.0 < kappa < 2.0:
        raise OutOfRange("kappa must lie in (0, 2)")
    psi = symbol_on_lattice(m, lattice)
    sym = a - psi.real
    if kappa == 1.0:
        base = a - psi
    elif kappa < 1.0:
        base = sym ** kappa
    else:
        base = (a - psi) * sym ** (kappa - 1.0)
    return 1.0 / base if inverse else base


def _probabilistic_resolvent(u: GridFunction, m: LevyMeasure, a: float, kappa: float, inverse: bool) -> np.ndarray:
    lat = u.lattice
    if kappa == 1.0:
        if not inverse:
            return a * u.values - apply_generator(u, m).values
        t_lo, t_hi = _time_bounds(m, lat, a)
        acc = _time_integral(m, lat, lambda t: math.exp(-a * t), lambda M, t: M, t_lo, t_hi)
        acc += t_lo * _semigroup_multiplier(m, lat, t_lo)
        return _apply_spec(u, acc)
    mbar = m.symmetrize()
    if inverse:
        t_lo, t_hi = _time_bounds(mbar, lat, a)
        acc = _time_integral(mbar, lat, lambda t: t ** (kappa - 1.0) * math.exp(-a * t),
                             lambda M, t: M, t_lo, t_hi)
        acc += _semigroup_multiplier(mbar, lat, t_lo) * t_lo ** kappa / kappa
        return _apply_spec(u, acc / special.gamma(kappa))
    t_lo, t_hi = _time_bounds(mbar, lat, a, rel=HEAD_REL)
    acc = _time_integral(mbar, lat, lambda t: t ** (-1.0 - kappa),
                         lambda M, t: 1.0 - math.exp(-a * t) * M, t_lo, t_hi)
    acc += _head_integral(lambda t: 1.0 - math.exp(-a * t) * _semigroup_multiplier(mbar, lat, t), t_lo, kappa)
    acc += t_hi ** (-kappa) / kappa
    return _apply_spec(u, acc * kappa / special.gamma(1.0 - kappa))


def fractional_resolvent(u: GridFunction, m: LevyMeasure, a: float, kappa: float, inverse: bool = False,
                         route: str = "spectral") -> GridFunction:
    """(aI - L)^{kappa} (or its inverse); kappa in (1, 2) composes the order-one and fractional parts."""
    if route == "spectral":
        return u.like(_apply_spec(u, resolvent_multiplier(m, u.lattice, a, kappa, inverse)))
    if route != "probabilistic":
        raise OutOfRange(f"unknown route {route!r}")
    if kappa <= 1.0:
        return u.like(_probabilistic_resolvent(u, m, a, kappa, inverse))
    frac, one = kappa - 1.0, 1.0
    if inverse:
        v = u.like(_probabilistic_resolvent(u, m, a, one, True))
        return u.like(_probabilistic_resolvent(v, m, a, frac, True))
    v = u.like(_probabilistic_resolvent(u, m, a, frac, False))
    return u.like(_probabilistic_resolvent(v, m, a, one, False))
