"""Littlewood-Paley filter banks, generalized Hoelder/Besov norms and smooth bump functions."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from .errors import BandOverflow, BumpOverflow, OutOfRange, RegularityRangeWarning, Report
from .grid import GridFunction, Lattice
from .measures import LevyMeasure
from .operators import apply_multiplier, fractional_resolvent
from .scaling import ScalingFunction

PARTITION_TOL = 1e-10
EXHAUSTIVE_MAX_N = 256


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def check_beta(beta: float, alpha: float | None) -> None:
    if not beta > 0:
        raise OutOfRange("beta must be > 0")
    if alpha is not None and beta >= (1.0 / alpha) * (1 - 1e-6):
        warnings.warn(f"beta = {beta} is outside (0, 1/alpha) for alpha = {alpha}", RegularityRangeWarning,
                      stacklevel=3)


# ---------------------------------------------------------------- filter bank

@dataclass
class LPFilterBank:
    """Bands phi_0 (low pass) and phi_j(xi) = phi(N^-j xi), a partition of unity on the lattice modes."""

    sf: ScalingFunction
    N: int
    J: int
    lattice: Lattice
    width: float
    bands: np.ndarray = field(repr=False)
    residual: float = 0.0

    def weights(self, beta: float) -> np.ndarray:
        return np.asarray(self.sf.w(float(self.N) ** -np.arange(self.J + 1, dtype=float))) ** (-beta)

    def project(self, u: GridFunction, j: int) -> GridFunction:
        return u.apply_symbol(self.bands[j])

    def band_sups(self, u: GridFunction) -> np.ndarray:
        spec = u.fft()
        return np.array([np.max(np.abs(np.fft.ifftn(spec * b))) for b in self.bands])

    def describe(self) -> dict:
        return {"N": self.N, "J": self.J, "width": self.width, "residual": self.residual,
                "lattice": self.lattice.describe()}


def _low_pass(s: np.ndarray, width: float) -> np.ndarray:
    # 1 below s = 0.5 - width/2, 0 above s = 0.5 + width/2 (s = log|xi| / log N)
    return 1.0 - smooth_step((s - 0.5 + 0.5 * width) / width)


def build_filter_bank(sf: ScalingFunction, lattice: Lattice, J: int | None = None,
                      width: float = 0.25) -> LPFilterBank:
    """Bank covering every resolved mode; the transition width is ``width`` log N in log|xi|."""
    N = int(sf.N)
    xi = np.linalg.norm(lattice.frequencies(), axis=-1)
    xi_max = float(xi.max())
    if J is None:
        J = max(0, int(math.ceil(math.log(xi_max) / math.log(N) - 0.5 + 0.5 * width)))
    if J > 0 and float(N) ** (J - 0.5 - 0.5 * width) > xi_max:
        raise BandOverflow(f"band {J} starts at |xi| = {N ** (J - 0.5 - 0.5 * width):.4g}, beyond "
                           f"the largest resolved frequency {xi_max:.4g}")
    with np.errstate(divide="ignore"):
        s = np.where(xi > 0, np.log(np.where(xi > 0, xi, 1.0)) / math.log(N), -np.inf)
    cum = [_low_pass(s - j, width) for j in range(J + 1)]
    bands = np.stack([cum[0]] + [cum[j] - cum[j - 1] for j in range(1, J + 1)])
    residual = float(np.max(np.abs(1.0 - bands.sum(axis=0))))
    if residual > PARTITION_TOL:
        raise OutOfRange(f"{J + 1} bands leave partition residual {residual:.3g}; increase J")
    return LPFilterBank(sf, N, J, lattice, width, bands, residual)


def besov_norm(u: GridFunction, bank: LPFilterBank, beta: float) -> float:
    """sup_j w(N^-j)^-beta |u * phi_j|_0."""
    if not beta > 0:
        raise OutOfRange("beta must be > 0")
    return float(np.max(bank.weights(beta) * bank.band_sups(u)))


# ---------------------------------------------------------------- Hoelder norms

def h_set(lattice: Lattice, exhaustive: bool | None = None) -> np.ndarray:
    """Integer lattice shifts (k, d) with |h| <= L/4, up to sign.

    Exhaustive when every axis has n <= 256, otherwise powers of two times
    the vectors of {-1, 0, 1}^d.
    """
    d = lattice.d
    dx = lattice.dx
    lim = 0.25 * min(lattice.L)
    if exhaustive is None:
        exhaustive = max(lattice.n) <= EXHAUSTIVE_MAX_N
    if exhaustive:
        ranges = [np.arange(-int(lim // h), int(lim // h) + 1) for h in dx]
        ks = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)
    else:
        dirs = np.array([v for v in product((-1, 0, 1), repeat=d) if any(v)])
        scale = 2 ** np.arange(0, int(math.log2(max(lattice.n))) + 1)
        ks = (scale[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    # keep one of each +-h pair: first nonzero coordinate positive
    first = np.array([k[np.flatnonzero(k)[0]] if np.any(k) else 0 for k in ks])
    ks = ks[first > 0]
    lengths = np.linalg.norm(ks * dx, axis=1)
    ks = ks[(lengths <= lim + 1e-12) & (lengths > 0)]
    return np.unique(ks, axis=0)


def holder_seminorm(u: GridFunction, sf: ScalingFunction, beta: float,
                    shifts: np.ndarray | None = None) -> tuple[float, tuple]:
    """sup |u(x+h) - u(x)| / w(|h|)^beta with the maximizing (x index, h)."""
    lat = u.lattice
    shifts = h_set(lat) if shifts is None else shifts
    best, arg = 0.0, ((0,) * lat.d, np.zeros(lat.d))
    axes = tuple(range(lat.d))
    lengths = np.linalg.norm(shifts * lat.dx, axis=1)
    weights = np.asarray(sf.w(lengths)) ** (-beta)
    for k, wt in zip(shifts, weights):
        diff = np.abs(np.roll(u.values, tuple(-int(v) for v in k), axis=axes) - u.values)
        idx = int(np.argmax(diff))
        val = float(diff.flat[idx]) * wt
        if val > best:
            best, arg = val, (np.unravel_index(idx, lat.shape), k * lat.dx)
    return best, arg


def holder_norm(u: GridFunction, sf: ScalingFunction, beta: float, order: str = "base",
                mu: LevyMeasure | None = None, shifts: np.ndarray | None = None) -> float:
    """'base': |u|_0 + [u]_beta; 'oneplus': |u|_0 + |L u|_0 + [L u]_beta for the reference measure mu."""
    if order == "base":
        return u.sup() + holder_seminorm(u, sf, beta, shifts)[0]
    if order != "oneplus":
        raise OutOfRange("order must be 'base' or 'oneplus'")
    if mu is None:
        raise OutOfRange("the 1+beta norm needs a reference measure")
    check_beta(beta, mu.alpha)
    Lu = apply_multiplier(u, mu, 1.0)
    return u.sup() + Lu.sup() + holder_seminorm(Lu, sf, beta, shifts)[0]


@dataclass
class NormReport:
    besov: float
    holder: float
    holder_one_plus: float | None
    band_sups: list
    max_pair: dict

    def to_dict(self) -> dict:
        return {"besov": self.besov, "holder": self.holder, "holder_one_plus": self.holder_one_plus,
                "band_sups": list(map(float, self.band_sups)), "max_pair": self.max_pair}


def norm_report(u: GridFunction, sf: ScalingFunction, bank: LPFilterBank, beta: float,
                mu: LevyMeasure | None = None) -> NormReport:
    semi, (idx, h) = holder_seminorm(u, sf, beta)
    x = u.lattice.points()[tuple(idx)]
    one = holder_norm(u, sf, beta, "oneplus", mu) if mu is not None else None
    return NormReport(besov_norm(u, bank, beta), u.sup() + semi, one, bank.band_sups(u).tolist(),
                      {"x": x.tolist(), "h": np.asarray(h).tolist(), "quotient": semi})


def kappa_norms(u: GridFunction, bank: LPFilterBank, mu: LevyMeasure, beta: float, kappa: float) -> dict:
    """|u|_0 + |L^{mu,kappa} u|_{beta,inf}, |(I - L)^kappa u|_{beta,inf} and |u|_{kappa+beta,inf}."""
    frac = apply_multiplier(u, mu, kappa)
    res = fractional_resolvent(u, mu, 1.0, kappa) if kappa > 0 else u
    return {"fractional": u.sup() + besov_norm(frac, bank, beta),
            "resolvent": besov_norm(res, bank, beta),
            "besov": besov_norm(u, bank, kappa + beta)}


def equivalence_report(family: Sequence[GridFunction], sf: ScalingFunction, bank: LPFilterBank,
                       mu: LevyMeasure, beta: float, kappa: float) -> Report:
    if not 0.0 < kappa <= 1.0:
        raise OutOfRange("kappa must lie in (0, 1]")
    check_beta(beta, mu.alpha)
    rep = Report("norm equivalence")
    pairs = {"fractional/resolvent": (0, 1), "fractional/besov": (0, 2), "resolvent/besov": (1, 2)}
    table = {k: [] for k in pairs}
    for i, u in enumerate(family):
        if u.sup() == 0.0:
            rep.notes.append(f"function {i} is zero and was excluded")
            continue
        vals = kappa_norms(u, bank, mu, beta, kappa)
        v = np.array(list(vals.values()))
        ratios = {k: float(v[a] / v[b]) for k, (a, b) in pairs.items()}
        for k, r in ratios.items():
            table[k].append(r)
        rep.add(f"function {i}", bool(np.all(np.isfinite(v)) and np.all(v > 0)), **vals, **ratios)
    spreads = {k: (max(r) / min(r) if r else math.nan) for k, r in table.items()}
    worst = max(spreads.values()) if table["fractional/besov"] else math.nan
    rep.add("ratio interval", bool(np.isfinite(worst)), spread=worst,
            **{f"{k} min": min(r) for k, r in table.items() if r},
            **{f"{k} max": max(r) for k, r in table.items() if r},
            **{f"{k} spread": v for k, v in spreads.items()})
    return rep


# ---------------------------------------------------------------- bumps and localization

@dataclass(frozen=True)
class BumpProfile:
    """Radial cutoff equal to 1 on |x| <= 1 and 0 on |x| >= 2."""

    def __call__(self, r):
        return 1.0 - smooth_step(np.asarray(r, dtype=float) - 1.0)

    def modulus(self, delta: np.ndarray, grid: int = 20001) -> np.ndarray:
        """omega(delta) = sup_{|r-s|<=delta} |eta(r) - eta(s)| for the monotone radial profile."""
        r = np.linspace(1.0, 2.0, grid)
        vals = self(r)
        delta = np.atleast_1d(np.asarray(delta, dtype=float))
        out = np.empty(delta.shape)
        for i, dlt in enumerate(delta):
            if dlt >= 1.0:
                out[i] = 1.0
                continue
            out[i] = float(np.max(self(r - dlt) - vals))
        return out


DEFAULT_BUMP = BumpProfile()


def _torus_offset(lattice: Lattice, z) -> np.ndarray:
    pts = lattice.points()
    L = np.array(lattice.L)
    diff = pts - np.asarray(z, dtype=float)
    return diff - L * np.round(diff / L)


def bump(profile, m: int, z, lattice: Lattice) -> GridFunction:
    """eta(m (x - z)) with periodic distance; the support must not wrap around the torus."""
    profile = DEFAULT_BUMP if profile is None else profile
    if not m >= 1:
        raise OutOfRange("m must be a positive integer")
    if 2.0 / m >= 0.5 * min(lattice.L):
        raise BumpOverflow(f"support radius 2/m = {2.0 / m} is not below half the box {0.5 * min(lattice.L)}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    r = np.linalg.norm(_torus_offset(lattice, z), axis=-1) * m
    return GridFunction(profile(r), lattice)


def bump_seminorm_constant(sf: ScalingFunction, beta: float, profile: BumpProfile = DEFAULT_BUMP) -> float:
    """[eta]_beta = sup_delta omega(delta) / w(delta)^beta for the scale-one bump."""
    delta = np.logspace(-4, 1, 400)
    return float(np.max(profile.modulus(delta) / np.asarray(sf.w(delta)) ** beta))


def default_z_grid(lattice: Lattice, m: int) -> np.ndarray:
    """Lattice points with spacing at most 1/(2m) per axis."""
    axes = []
    for o, n, L in zip(lattice.origin, lattice.n, lattice.L):
        step = max(1, int((L / n) ** -1 * (0.5 / m)))
        axes.append(o + np.arange(0, n, step) * (L / n))
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lattice.d)


def partition_norm_check(u: GridFunction, sf: ScalingFunction, beta: float, m: int,
                         z_grid: np.ndarray | None = None, g: GridFunction | None = None) -> Report:
    """Localization inequalities for the bump family eta_{m,z}, with explicit constants.

    (1) sup_z |eta f|_0 = |f|_0.
    (2) |f|_beta <= C2 l(m)^beta |f|_0 + sup_z |eta f|_beta with C2 from the pairs too long to
        fit under one plateau.
    (3) sup_z |eta f|_beta <= C3 l(m)^beta |f|_0 + |f|_beta with C3 = [eta]_beta.
    (4) |f g|_beta <= |f|_0 |g|_0 + |f|_0 [g]_beta + |g|_0 [f]_beta (g defaults to eta_{m,z}).
    """
    lat = u.lattice
    z_grid = default_z_grid(lat, m) if z_grid is None else np.atleast_2d(z_grid)
    shifts = h_set(lat)
    lm = float(sf.l(float(m))) ** beta
    f0 = u.sup()
    fsemi = holder_seminorm(u, sf, beta, shifts)[0]
    rep = Report(f"localization m={m}")

    sups, norms, prod_slack = [], [], []
    for z in z_grid:
        eta = bump(None, m, z, lat)
        prodf = u * eta
        sups.append(prodf.sup())
        semi = holder_seminorm(prodf, sf, beta, shifts)[0]
        norms.append(prodf.sup() + semi)
        gg = eta if g is None else g
        lhs = prodf.sup() + semi if g is None else (u * gg).sup() + holder_seminorm(u * gg, sf, beta, shifts)[0]
        rhs = f0 * gg.sup() + f0 * holder_seminorm(gg, sf, beta, shifts)[0] + gg.sup() * fsemi
        prod_slack.append(rhs - lhs)
    sup_rec = max(sups)
    rep.add("sup recovery", abs(sup_rec - f0) <= 1e-12 * max(1.0, f0), lhs=sup_rec, rhs=f0,
            error=abs(sup_rec - f0))

    spacing = np.array([np.min(np.diff(np.unique(z_grid[:, i]))) if np.unique(z_grid[:, i]).size > 1
                        else lat.L[i] for i in range(lat.d)])
    reach = 2.0 / m - float(np.linalg.norm(spacing))
    lengths = np.linalg.norm(shifts * lat.dx, axis=1)
    long = lengths[lengths > reach]
    C2 = float(2.0 * np.max(np.asarray(sf.w(long)) ** (-beta)) / lm) if long.size else 0.0
    lhs2 = f0 + fsemi
    rhs2 = C2 * lm * f0 + max(norms)
    rep.add("norm recovery", rhs2 - lhs2 >= -1e-12 * max(1.0, lhs2), lhs=lhs2, rhs=rhs2, C=C2,
            slack=rhs2 - lhs2)

    C3 = bump_seminorm_constant(sf, beta)
    lhs3 = max(norms)
    rhs3 = C3 * lm * f0 + f0 + fsemi
    rep.add("localized norm bound", rhs3 - lhs3 >= -1e-12 * max(1.0, lhs3), lhs=lhs3, rhs=rhs3, C=C3,
            slack=rhs3 - lhs3)
    worst = min(prod_slack)
    rep.add("product rule", worst >= -1e-12 * max(1.0, f0), min_slack=worst)
    return rep
