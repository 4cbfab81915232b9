"""Sampling of Levy increments and jump-SDE paths, and transition densities by symbol inversion."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .errors import AliasingWarning, OutOfRange, StepOverflow
from .grid import GridFunction, Lattice
from .measures import LevyMeasure

BLOCK = 1024
TABLE_POINTS = 512
NYQUIST_TOL = 1e-8
CLIP_LEVEL = -1e-12
_STREAM_INCREMENT = 0
_STREAM_PATH = 1


def _block_rng(seed_root: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed_root) & (2 ** 64 - 1), spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class _RadialTable:
    """Inverse of r -> tail(r)/tail(eps) on a log table, power-law continued beyond."""

    log_r: np.ndarray
    log_tail: np.ndarray  # log of normalized tail, decreasing from 0

    def sample(self, u: np.ndarray) -> np.ndarray:
        # u uniform in (0,1]: solve tail(r)/tail(eps) = u
        lu = np.log(u)
        lr = np.interp(-lu, -self.log_tail, self.log_r)
        beyond = lu < self.log_tail[-1]
        if beyond.any():
            slope = (self.log_r[-1] - self.log_r[-2]) / (self.log_tail[-1] - self.log_tail[-2])
            lr = np.where(beyond, self.log_r[-1] + slope * (lu - self.log_tail[-1]), lr)
        return np.exp(lr)

    def max_interpolation_error(self) -> float:
        # second differences of log tail bound the local linear-interpolation error
        if self.log_r.size < 3:
            return 0.0
        return float(np.max(np.abs(np.diff(self.log_tail, 2))) / 8.0)


class IncrementSampler:
    """Draws of Z_t: compound Poisson jumps beyond ``eps_jump`` plus a small-jump treatment.

    ``mode`` is 'drop' (small jumps replaced by their mean) or 'gaussian' (small
    jumps replaced by a Gaussian with the same mean and covariance). Draw
    ``index`` is a pure function of (seed_root, index, t): draws are produced in
    blocks of BLOCK indices, each block from its own counter-keyed stream.
    """

    def __init__(self, measure: LevyMeasure, eps_jump: float | None = None, mode: str | None = None,
                 seed_root: int = 0, horizon: float = 1.0, max_jumps: float = 1e4):
        if mode is None:
            mode = "gaussian" if measure.alpha >= 1.0 else "drop"
        if mode not in ("drop", "gaussian"):
            raise OutOfRange("mode must be 'drop' or 'gaussian'")
        self.measure = measure
        self.mode = mode
        self.seed_root = int(seed_root)
        self.eps = float(eps_jump) if eps_jump is not None else self._default_eps(horizon, max_jumps)
        if not self.eps > 0:
            raise OutOfRange("eps_jump must be > 0")
        atoms = list(zip(measure.directions, measure.weights, measure.profiles))
        tails = np.array([w * p.tail(self.eps) for _, w, p in atoms])
        self.intensity = float(tails.sum())
        if not np.isfinite(self.intensity):
            raise OutOfRange("large-jump intensity is not finite")
        self.atom_probs = tails / self.intensity if self.intensity > 0 else tails
        self.directions = measure.directions
        self.tables = [self._table(p) for _, _, p in atoms]
        self.drift, self.cov = self._small_jump_moments(atoms)

    def _default_eps(self, horizon: float, max_jumps: float) -> float:
        # largest dyadic cutoff keeps lambda*T <= max_jumps; shrink while affordable
        eps = 1.0
        while self.measure.tail(eps / 2) * horizon <= max_jumps and eps > 1e-6:
            eps /= 2
        return eps

    def _table(self, profile) -> _RadialTable:
        t0 = profile.tail(self.eps)
        if t0 <= 0:
            return _RadialTable(np.log([self.eps, 2 * self.eps]), np.array([0.0, -1.0]))
        hi = self.eps
        while profile.tail(hi) > 1e-13 * t0 and hi < 1e300:
            hi *= 10.0
        hi = min(hi, profile.support_max)
        r = np.geomspace(self.eps, hi, TABLE_POINTS)
        tails = np.array([profile.tail(x) for x in r]) / t0
        keep = tails > 0
        return _RadialTable(np.log(r[keep]), np.log(np.minimum(tails[keep], 1.0)))

    def _small_jump_moments(self, atoms) -> tuple[np.ndarray, np.ndarray]:
        d = self.measure.d
        mean = np.zeros(d)
        cov = np.zeros((d, d))
        mode = self.measure.chi_mode
        for th, w, p in atoms:
            if w == 0:
                continue
            cov += w * np.outer(th, th) * p.moment(2.0, 0.0, self.eps)
            if mode == "none":
                # uncompensated small jumps have mean int_{|y|<=eps} y nu(dy)
                mean += w * th * p.moment(1.0, 0.0, self.eps)
            elif mode == "full":
                # the large jumps are compensated in full
                mean -= w * th * p.moment(1.0, self.eps, math.inf)
            elif self.eps < 1.0:
                mean -= w * th * p.moment(1.0, self.eps, 1.0)
            else:
                mean += w * th * p.moment(1.0, 1.0, self.eps)
        return mean, cov

    def describe(self) -> dict:
        return {"eps_jump": self.eps, "mode": self.mode, "seed_root": self.seed_root,
                "intensity": self.intensity,
                "small_jump_variance": float(np.trace(self.cov)),
                "table_error": max(t.max_interpolation_error() for t in self.tables)}

    # ---- sampling

    def _jumps(self, rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        """Sum of ``counts[i]`` independent large jumps for each i, shape (len(counts), d)."""
        total = int(counts.sum())
        d = self.measure.d
        out = np.zeros((counts.size, d))
        if total == 0:
            return out
        owner = np.repeat(np.arange(counts.size), counts)
        atom = rng.choice(len(self.tables), size=total, p=self.atom_probs)
        u = 1.0 - rng.random(total)
        radii = np.empty(total)
        for k, table in enumerate(self.tables):
            sel = atom == k
            if sel.any():
                radii[sel] = table.sample(u[sel])
        jumps = radii[:, None] * self.directions[atom]
        for ax in range(d):
            out[:, ax] = np.bincount(owner, weights=jumps[:, ax], minlength=counts.size)
        return out

    def _gauss(self, rng: np.random.Generator, t: float, size: int) -> np.ndarray:
        z = rng.standard_normal((size, self.measure.d))
        if self.mode != "gaussian":
            return np.zeros_like(z)
        chol = _psd_sqrt(self.cov)
        return math.sqrt(t) * z @ chol.T

    def _block_increments(self, t: float, block: int) -> np.ndarray:
        rng = _block_rng(self.seed_root, _STREAM_INCREMENT, block)
        counts = rng.poisson(self.intensity * t, size=BLOCK)
        big = self._jumps(rng, counts)
        return big + t * self.drift + self._gauss(rng, t, BLOCK)

    def sample_increments(self, t: float, count: int, start: int = 0) -> np.ndarray:
        """Draws with indices start .. start+count-1 of Z_t, shape (count, d)."""
        if not t > 0:
            raise OutOfRange("t must be > 0")
        first, last = start // BLOCK, (start + count - 1) // BLOCK
        blocks = [self._block_increments(t, b) for b in range(first, last + 1)]
        allv = np.concatenate(blocks)
        off = start - first * BLOCK
        return allv[off:off + count]

    def sample_increment(self, t: float, index: int) -> np.ndarray:
        return self.sample_increments(t, 1, index)[0]

    def large_jump_counts(self, t: float, count: int, start: int = 0) -> np.ndarray:
        first, last = start // BLOCK, (start + count - 1) // BLOCK
        out = [_block_rng(self.seed_root, _STREAM_INCREMENT, b).poisson(self.intensity * t, size=BLOCK)
               for b in range(first, last + 1)]
        allv = np.concatenate(out)
        off = start - first * BLOCK
        return allv[off:off + count]

    def _block_path_increments(self, times: np.ndarray, block: int) -> np.ndarray:
        """Increments over each time step for the BLOCK paths of ``block``, shape (steps, BLOCK, d)."""
        rng = _block_rng(self.seed_root, _STREAM_PATH, block)
        dts = np.diff(times)
        out = np.empty((dts.size, BLOCK, self.measure.d))
        for k, dt in enumerate(dts):
            counts = rng.poisson(self.intensity * dt, size=BLOCK)
            out[k] = self._jumps(rng, counts) + dt * self.drift + self._gauss(rng, dt, BLOCK)
        return out

    def path_increments(self, times: Sequence[float], count: int, start: int = 0) -> np.ndarray:
        """Increments of paths start..start+count-1 over the time grid, shape (count, steps, d)."""
        times = np.asarray(times, dtype=float)
        if times[0] != 0 or np.any(np.diff(times) <= 0):
            raise OutOfRange("times must start at 0 and increase strictly")
        first, last = start // BLOCK, (start + count - 1) // BLOCK
        parts = [self._block_path_increments(times, b) for b in range(first, last + 1)]
        allv = np.concatenate(parts, axis=1)
        off = start - first * BLOCK
        return np.transpose(allv[:, off:off + count], (1, 0, 2))


def _psd_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    return vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))


# ---------------------------------------------------------------- SDE paths

@dataclass
class CoefficientField:
    """Matrix field G(z) with declared bounds |det G| >= c0 and ||G|| <= K."""

    func: Callable[[np.ndarray], np.ndarray]
    d: int
    c0: float = 0.0
    K: float = math.inf
    delta_p: float = 0.25
    constant: bool = False
    label: str = "G"

    @classmethod
    def constant_matrix(cls, G, label: str = "const") -> "CoefficientField":
        G = np.atleast_2d(np.asarray(G, dtype=float))
        det = abs(np.linalg.det(G))
        return cls(lambda z, G=G: np.broadcast_to(G, np.shape(z)[:-1] + G.shape).copy(), G.shape[0],
                   c0=det, K=float(np.linalg.norm(G, 2)), constant=True, label=label)

    @classmethod
    def scalar_field(cls, factor: Callable[[np.ndarray], np.ndarray], d: int, label: str = "scalar") -> "CoefficientField":
        def func(z):
            f = np.asarray(factor(np.asarray(z)))
            return f[..., None, None] * np.eye(d)
        return cls(func, d, label=label)

    def __call__(self, z) -> np.ndarray:
        """G at points of shape (..., d), returning (..., d, d)."""
        z = np.asarray(z, dtype=float)
        return np.asarray(self.func(z), dtype=float)

    def bounds_on(self, points: np.ndarray) -> tuple[float, float]:
        G = self(points.reshape(-1, self.d))
        dets = np.abs(np.linalg.det(G))
        norms = np.linalg.norm(G, ord=2, axis=(-2, -1))
        return float(dets.min()), float(norms.max())


@dataclass
class Path:
    times: np.ndarray
    x: np.ndarray  # (steps+1, d)

    def to_csv(self, path: str | Path) -> None:
        write_path_csv(path, self.times, self.x)


def write_path_csv(path, times: np.ndarray, x: np.ndarray) -> None:
    d = x.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(d)])
        for t, row in zip(times, x):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def sample_sde_paths(sampler: IncrementSampler, G: CoefficientField, times: Sequence[float],
                     count: int, start: int = 0, x0=None, guard: float = 1e6) -> np.ndarray:
    """Euler jump scheme x_{k+1} = x_k + G(x_k) dZ_k for paths start..start+count-1, shape (count, steps+1, d)."""
    times = np.asarray(times, dtype=float)
    dz = sampler.path_increments(times, count, start)
    d = sampler.measure.d
    x = np.zeros((count, times.size, d))
    if x0 is not None:
        x[:, 0] = np.asarray(x0, dtype=float)
    for k in range(times.size - 1):
        Gk = G(x[:, k])
        x[:, k + 1] = x[:, k] + np.einsum("pij,pj->pi", Gk, dz[:, k])
        if np.any(np.abs(x[:, k + 1]) > guard):
            raise StepOverflow(f"path left the domain guard {guard} at step {k + 1}")
    return x


def sample_sde_path(sampler: IncrementSampler, G: CoefficientField, times: Sequence[float],
                    index: int, x0=None, guard: float = 1e6) -> Path:
    times = np.asarray(times, dtype=float)
    x = sample_sde_paths(sampler, G, times, 1, index, x0, guard)[0]
    return Path(times, x)


# ---------------------------------------------------------------- densities

@dataclass
class DensityGrid:
    t: float
    lattice: Lattice  # centered lattice; values follow its axes
    values: np.ndarray
    imag_residue: float = 0.0
    clip_mass: float = 0.0
    nyquist_level: float = 0.0

    def mass(self) -> float:
        return float(self.values.sum() * self.lattice.cell_volume)

    def axis(self) -> np.ndarray:
        return self.lattice.axes()[0]

    def cdf(self, x: np.ndarray) -> np.ndarray:
        """CDF of the law wrapped onto the box (1-D), linear between lattice points."""
        if self.lattice.d != 1:
            raise OutOfRange("cdf is one-dimensional")
        xs = self.axis()
        h = self.lattice.dx[0]
        p = self.values
        # cell-centred trapezoid: mass between consecutive points
        lo_edge = xs[0]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * h)])
        # the wrap-around cell between the last point and lo_edge + L
        wrap = 0.5 * (p[-1] + p[0]) * h
        total = cum[-1] + wrap
        grid = np.concatenate([xs, [lo_edge + self.lattice.L[0]]])
        cum = np.concatenate([cum, [total]])
        # start the CDF at the box edge: shift by half of the wrap cell is unnecessary since
        # xs[0] is the left edge itself
        return np.interp(x, grid, cum) / total

    def to_files(self, stem: str | Path) -> None:
        stem = Path(stem)
        self.values.astype("<f8").tofile(stem.with_suffix(".bin"))
        meta = {"d": self.lattice.d, "L": list(self.lattice.L), "n": list(self.lattice.n),
                "origin": list(self.lattice.origin), "t": self.t, "dtype": "float64",
                "order": "row-major", "imag_residue": self.imag_residue, "clip_mass": self.clip_mass}
        stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _centered(lattice: Lattice) -> Lattice:
    return Lattice(lattice.n, lattice.L, tuple(-0.5 * L for L in lattice.L))


def _spectral_density(m: LevyMeasure, t: float, lattice: Lattice, multiplier=None,
                      warn: bool = True) -> tuple[np.ndarray, float, float]:
    lat = _centered(lattice)
    xi = lat.frequencies()
    psi = np.asarray(m.symbol(xi))
    char = np.exp(t * psi)
    level = float(np.max(np.abs(char[lat.nyquist_mask()])))
    if warn and level > NYQUIST_TOL:
        warnings.warn(f"exp(t Re psi) = {level:.3g} at the Nyquist shell exceeds {NYQUIST_TOL}",
                      AliasingWarning, stacklevel=3)
    if multiplier is not None:
        char = char * multiplier(xi)
    # char_k = E e^{i 2 pi xi_k Z}, so p(x_j) = L^{-d} sum_k char_k e^{-i 2 pi xi_k (x_j - origin)} e^{-i 2 pi xi_k origin}
    phase = np.exp(-2j * np.pi * (xi @ np.array(lat.origin)))
    vals = np.fft.fftn(char * phase) / np.prod(lat.L)
    return vals, level, float(np.max(np.abs(vals.imag)))


def density(m: LevyMeasure, t: float, lattice: Lattice, clip: bool = True) -> DensityGrid:
    """Periodized transition density of Z_t on the lattice box centred at the origin."""
    if not t > 0:
        raise OutOfRange("t must be > 0")
    vals, level, imag = _spectral_density(m, t, lattice)
    p = vals.real.copy()
    clip_mass = 0.0
    if clip:
        low = p < CLIP_LEVEL
        lat = _centered(lattice)
        if low.any():
            clip_mass = float(np.sum(CLIP_LEVEL - p[low]) * lat.cell_volume)
            p[low] = CLIP_LEVEL
            p /= p.sum() * lat.cell_volume
    return DensityGrid(t, _centered(lattice), p, imag, clip_mass, level)


def density_derivative(m: LevyMeasure, t: float, lattice: Lattice, order: Sequence[int]) -> np.ndarray:
    mult = lambda xi: np.prod([(-2j * np.pi * xi[..., i]) ** o for i, o in enumerate(order)], axis=0)
    vals, _, _ = _spectral_density(m, t, lattice, multiplier=mult)
    return vals.real


def density_derivative_bound(m: LevyMeasure, t: float, order: Sequence[int], R: float,
                             lattice: Lattice) -> float:
    """int |d^theta p^R(t,x)| dx * gamma(t)^{|theta|}, p^R the density of the weighted rescaling."""
    order = tuple(int(o) for o in np.atleast_1d(order))
    if sum(order) > 4:
        raise OutOfRange("|theta| <= 4")
    mr = m.rescale(R, weighted=True) if R != 1.0 else m
    vals = density_derivative(mr, t, lattice, order)
    integral = float(np.sum(np.abs(vals)) * lattice.cell_volume)
    k = sum(order)
    return integral * float(m.scaling.gamma(t)) ** k if k else integral


def check_scaling_identity(m: LevyMeasure, t: float, R: float, lattice: Lattice) -> float:
    """sup |p(t,z) - R^{-d} p^R(t/w(R), z/R)| / sup p on the lattice."""
    if R == 1.0:
        return 0.0
    p = density(m, t, lattice, clip=False).values
    mr = m.rescale(R, weighted=True)
    wR = float(m.scaling.w(R))
    small = Lattice(lattice.n, tuple(L / R for L in lattice.L))
    pr = density(mr, t / wR, small, clip=False).values * R ** (-m.d)
    return float(np.max(np.abs(p - pr)) / np.max(np.abs(p)))


def ks_against_density(samples: np.ndarray, dens: DensityGrid) -> tuple[float, float]:
    """KS statistic and p-value of 1-D samples wrapped onto the density box."""
    L = dens.lattice.L[0]
    lo = dens.lattice.origin[0]
    x = np.mod(np.asarray(samples, dtype=float).ravel() - lo, L) + lo
    res = stats.kstest(x, dens.cdf)
    return float(res.statistic), float(res.pvalue)


def ks_threshold(n: int, significance: float = 1e-3) -> float:
    return float(stats.kstwo.isf(significance, n))
