"""Periodic lattices and grid functions with FFT-based calculus."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import OutOfRange


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Lattice:
    """Uniform periodic lattice on prod_i [origin_i, origin_i + L_i)."""

    n: tuple[int, ...]
    L: tuple[float, ...]
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        L = tuple(float(v) for v in np.atleast_1d(self.L))
        if len(L) == 1 and len(n) > 1:
            L = L * len(n)
        if len(n) != len(L):
            raise OutOfRange("n and L must have one entry per axis")
        if not all(_is_pow2(v) for v in n):
            raise OutOfRange(f"resolution must be a power of two per axis, got {n}")
        if not all(v > 0 for v in L):
            raise OutOfRange("extent must be positive")
        origin = tuple(0.0 for _ in n) if self.origin is None else tuple(float(v) for v in np.atleast_1d(self.origin))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def cube(cls, d: int, n: int, L: float = 1.0, centered: bool = False) -> "Lattice":
        origin = (-0.5 * L,) * d if centered else None
        return cls((n,) * d, (L,) * d, origin)

    @property
    def d(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def dx(self) -> np.ndarray:
        return np.array(self.L) / np.array(self.n)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    def axes(self) -> list[np.ndarray]:
        return [o + np.arange(n) * (L / n) for o, n, L in zip(self.origin, self.n, self.L)]

    def points(self) -> np.ndarray:
        """Coordinates as an array of shape (*n, d)."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def frequency_axes(self) -> list[np.ndarray]:
        return [np.fft.fftfreq(n, d=L / n) for n, L in zip(self.n, self.L)]

    def frequencies(self) -> np.ndarray:
        """Dual-lattice frequencies k/L in FFT order, shape (*n, d)."""
        return np.stack(np.meshgrid(*self.frequency_axes(), indexing="ij"), axis=-1)

    def nyquist_mask(self) -> np.ndarray:
        masks = np.zeros(self.n, dtype=bool)
        for ax, n in enumerate(self.n):
            idx = [slice(None)] * self.d
            idx[ax] = n // 2
            masks[tuple(idx)] = True
        return masks

    def refined(self, factor: int = 2) -> "Lattice":
        return Lattice(tuple(v * factor for v in self.n), self.L, self.origin)

    def scaled(self, factor: float) -> "Lattice":
        return Lattice(self.n, tuple(v * factor for v in self.L), tuple(v * factor for v in self.origin))

    def describe(self) -> dict:
        return {"d": self.d, "n": list(self.n), "L": list(self.L), "origin": list(self.origin)}


class GridFunction:
    """Samples of a periodic function on a lattice."""

    def __init__(self, values: np.ndarray, lattice: Lattice):
        values = np.asarray(values)
        if values.shape != lattice.shape:
            raise OutOfRange(f"values shape {values.shape} does not match lattice {lattice.shape}")
        if not np.all(np.isfinite(values)):
            raise OutOfRange("grid function values must be finite")
        self.values = values
        self.lattice = lattice

    @classmethod
    def from_function(cls, f: Callable[..., np.ndarray], lattice: Lattice) -> "GridFunction":
        grids = np.meshgrid(*lattice.axes(), indexing="ij")
        vals = np.asarray(f(*grids))
        vals = np.broadcast_to(vals, lattice.shape).copy()
        return cls(vals, lattice)

    @classmethod
    def zeros(cls, lattice: Lattice) -> "GridFunction":
        return cls(np.zeros(lattice.shape), lattice)

    def like(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(values, self.lattice)

    @property
    def d(self) -> int:
        return self.lattice.d

    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def fft(self) -> np.ndarray:
        return np.fft.fftn(self.values)

    def _finish(self, spec: np.ndarray, keep_real: bool | None = None) -> "GridFunction":
        out = np.fft.ifftn(spec)
        if keep_real is None:
            keep_real = self.is_real()
        return self.like(out.real.copy() if keep_real else out)

    def apply_symbol(self, symbol: np.ndarray, keep_real: bool | None = None) -> "GridFunction":
        return self._finish(self.fft() * symbol, keep_real)

    def derivative(self, order: Sequence[int]) -> "GridFunction":
        """Spectral partial derivative of multi-index ``order`` (Nyquist modes dropped for odd orders)."""
        spec = self.fft()
        for ax, (k, o) in enumerate(zip(self.lattice.frequency_axes(), order)):
            if o == 0:
                continue
            fac = (2j * np.pi * k) ** o
            if o % 2 == 1 and self.lattice.n[ax] % 2 == 0:
                fac[self.lattice.n[ax] // 2] = 0.0
            shape = [1] * self.d
            shape[ax] = -1
            spec = spec * fac.reshape(shape)
        return self._finish(spec)

    def gradient(self) -> np.ndarray:
        """Array of shape (d, *n)."""
        out = []
        for ax in range(self.d):
            order = [0] * self.d
            order[ax] = 1
            out.append(self.derivative(order).values)
        return np.stack(out)

    def hessian(self) -> np.ndarray:
        """Array of shape (d, d, *n)."""
        H = np.empty((self.d, self.d) + self.lattice.shape, dtype=self.values.dtype)
        for a in range(self.d):
            for b in range(self.d):
                order = [0] * self.d
                order[a] += 1
                order[b] += 1
                H[a, b] = self.derivative(order).values
        return H

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Trigonometric interpolant evaluated at arbitrary points of shape (m, d)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        spec = self.fft() / self.values.size
        freqs = self.lattice.frequencies().reshape(-1, self.d)
        coef = spec.reshape(-1)
        shift = pts - np.array(self.lattice.origin)
        out = np.exp(2j * np.pi * shift @ freqs.T) @ coef
        # for real data the real part splits the Nyquist term symmetrically
        return out.real if self.is_real() else out

    def shifted(self, y: Sequence[float]) -> "GridFunction":
        """x -> u(x + y) by exact Fourier translation."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        phase = np.exp(2j * np.pi * (self.lattice.frequencies() @ y))
        nyq = self.lattice.nyquist_mask()
        phase = np.where(nyq, phase.real, phase)
        return self.apply_symbol(phase)

    def roll(self, steps: Sequence[int]) -> "GridFunction":
        """x -> u(x + steps*dx), exact on the lattice."""
        return self.like(np.roll(self.values, [-int(s) for s in steps], axis=tuple(range(self.d))))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def integral(self) -> float:
        return float(np.sum(self.values).real * self.lattice.cell_volume)

    def __add__(self, other):
        return self.like(self.values + (other.values if isinstance(other, GridFunction) else other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.like(self.values - (other.values if isinstance(other, GridFunction) else other))

    def __rsub__(self, other):
        return self.like((other.values if isinstance(other, GridFunction) else other) - self.values)

    def __mul__(self, other):
        return self.like(self.values * (other.values if isinstance(other, GridFunction) else other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.like(self.values / (other.values if isinstance(other, GridFunction) else other))

    def __neg__(self):
        return self.like(-self.values)

    def __repr__(self) -> str:
        return f"GridFunction(d={self.d}, n={self.lattice.n}, L={self.lattice.L})"


def band_limited_resample(u: GridFunction, lattice: Lattice) -> GridFunction:
    """Move a grid function to another resolution of the same box by zero-padding/truncating its spectrum."""
    if lattice.L != u.lattice.L or lattice.origin != u.lattice.origin:
        raise OutOfRange("resampling needs the same box")
    spec = np.fft.fftshift(u.fft())
    out = np.zeros(lattice.shape, dtype=complex)
    src = [slice(max(0, (a - b) // 2), max(0, (a - b) // 2) + min(a, b)) for a, b in zip(u.lattice.n, lattice.n)]
    dst = [slice(max(0, (b - a) // 2), max(0, (b - a) // 2) + min(a, b)) for a, b in zip(u.lattice.n, lattice.n)]
    out[tuple(dst)] = spec[tuple(src)]
    # split or merge the Nyquist planes so the interpolant stays real
    for ax, (a, b) in enumerate(zip(u.lattice.n, lattice.n)):
        if b > a:
            idx = [slice(None)] * u.d
            idx[ax] = (b - a) // 2
            half = out[tuple(idx)] * 0.5
            out[tuple(idx)] = half
            idx2 = list(idx)
            idx2[ax] = (b - a) // 2 + a
            out[tuple(idx2)] = half
    vals = np.fft.ifftn(np.fft.ifftshift(out)) * (np.prod(lattice.n) / np.prod(u.lattice.n))
    return GridFunction(vals.real.copy() if u.is_real() else vals, lattice)
