"""Uniform product grids, wavefunction algebra, and spectral operators.

All quantities are in atomic units (hbar = 1). Grids are equally spaced and
treated as periodic by the Fourier kinetic operator; that is legitimate only
for states that have decayed at the box edge, which `boundary_leak` checks.

Storage is row major with the last axis fastest, both in memory and in every
file format built on top of this module.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.special import eval_hermite

from .errors import DegenerateInputError, ValidationError

__all__ = [
    "Axis",
    "ProductGrid",
    "Wavefunction",
    "inner_product",
    "norm",
    "normalize",
    "apply_diagonal",
    "apply_kinetic",
    "gram_schmidt_deflate",
    "boundary_leak",
    "hermite_gauss",
    "fft_workers",
]

_AXIS_LABELS = ("r1", "r2", "qc")


def fft_workers() -> int:
    """Worker count for the FFT backend, capped by POLDQC_THREADS.

    pocketfft parallelizes over independent 1D transforms, so the numerical
    result is identical for any worker count.
    """
    n = os.cpu_count() or 1
    env = os.environ.get("POLDQC_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            raise ValidationError(f"POLDQC_THREADS must be an integer, got {env!r}")
    return n


@dataclass(frozen=True)
class Axis:
    """One uniformly spaced coordinate axis.

    label   one of r1, r2 (bond lengths, bohr) or qc (photon displacement)
    mass    inertia parameter: reduced nuclear mass for r axes, exactly 1 for qc
    """

    label: str
    n_points: int
    min: float
    max: float
    mass: float

    def __post_init__(self):
        if self.label not in _AXIS_LABELS:
            raise ValidationError(f"axis label must be one of {_AXIS_LABELS}, got {self.label!r}")
        if self.n_points < 16:
            raise ValidationError(f"axis {self.label}: n_points must be >= 16, got {self.n_points}")
        if not self.max > self.min:
            raise ValidationError(f"axis {self.label}: max must exceed min")
        if not self.mass > 0:
            raise ValidationError(f"axis {self.label}: mass must be positive")
        if self.label == "qc" and self.mass != 1.0:
            raise ValidationError("the qc axis carries unit inertia by convention")

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return self.min + self.spacing * np.arange(self.n_points)


class ProductGrid:
    """Direct product of 1 to 3 axes; r axes first, an optional qc axis last.

    Cavity surfaces always carry exactly one qc axis (enforced where they are
    built); pure-r grids are allowed here so the same machinery can solve
    one-dimensional molecular problems.
    """

    def __init__(self, axes):
        axes = tuple(axes)
        if not 1 <= len(axes) <= 3:
            raise ValidationError(f"ProductGrid takes 1-3 axes, got {len(axes)}")
        labels = [ax.label for ax in axes]
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate axis labels: {labels}")
        n_qc = labels.count("qc")
        if n_qc > 1:
            raise ValidationError("at most one qc axis allowed")
        if n_qc == 1 and labels[-1] != "qc":
            raise ValidationError("the qc axis must come last")
        self.axes = axes
        self.shape = tuple(ax.n_points for ax in axes)
        self.total_points = int(np.prod(self.shape))
        self.volume_element = float(np.prod([ax.spacing for ax in axes]))
        self._k2m = None
        self._k2m_half = None

    def __eq__(self, other):
        return isinstance(other, ProductGrid) and self.axes == other.axes

    def __hash__(self):
        return hash(self.axes)

    def __repr__(self):
        dims = "x".join(str(n) for n in self.shape)
        return f"ProductGrid({dims}: {', '.join(ax.label for ax in self.axes)})"

    def meshes(self):
        """Coordinate arrays of the full grid shape, one per axis."""
        return np.meshgrid(*[ax.points for ax in self.axes], indexing="ij")

    def kinetic_multiplier(self) -> np.ndarray:
        """Sum over axes of k^2/(2m) on the unshifted FFT wavenumber grid."""
        if self._k2m is None:
            self._k2m = self._build_multiplier(half=False)
        return self._k2m

    def kinetic_multiplier_half(self) -> np.ndarray:
        """Kinetic multiplier for the real-transform layout (rfftn)."""
        if self._k2m_half is None:
            self._k2m_half = self._build_multiplier(half=True)
        return self._k2m_half

    def _build_multiplier(self, half: bool) -> np.ndarray:
        parts = []
        last = len(self.axes) - 1
        for i, ax in enumerate(self.axes):
            if half and i == last:
                k = 2.0 * np.pi * np.fft.rfftfreq(ax.n_points, d=ax.spacing)
            else:
                k = 2.0 * np.pi * np.fft.fftfreq(ax.n_points, d=ax.spacing)
            parts.append(k * k / (2.0 * ax.mass))
        out = parts[0]
        for p in parts[1:]:
            out = out[..., None] + p
        return np.ascontiguousarray(out)


@dataclass
class Wavefunction:
    """Amplitudes over a ProductGrid, flat, row major, last axis fastest.

    Amplitudes may be float64 or complex128; real storage is used for the
    relaxation fast path. Treat instances as immutable values.
    """

    grid: ProductGrid
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes)
        if amps.dtype not in (np.float64, np.complex128):
            amps = amps.astype(np.complex128)
        amps = amps.reshape(-1)
        if amps.size != self.grid.total_points:
            raise ValidationError(
                f"amplitude length {amps.size} does not match grid total_points "
                f"{self.grid.total_points}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValidationError("amplitudes contain NaN or Inf")
        self.amplitudes = amps

    def shaped(self) -> np.ndarray:
        return self.amplitudes.reshape(self.grid.shape)


def _check_same_grid(a: Wavefunction, b: Wavefunction):
    if a.grid is not b.grid and a.grid != b.grid:
        raise ValidationError("wavefunctions live on different grids")


def inner_product(a: Wavefunction, b: Wavefunction) -> complex:
    """Volume-weighted <a|b>; conjugate-symmetric."""
    _check_same_grid(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.volume_element)


def norm(psi: Wavefunction) -> float:
    return math.sqrt(
        float(np.vdot(psi.amplitudes, psi.amplitudes).real) * psi.grid.volume_element
    )


def normalize(psi: Wavefunction) -> Wavefunction:
    n = norm(psi)
    if n == 0.0:
        raise DegenerateInputError("cannot normalize the zero wavefunction")
    return Wavefunction(psi.grid, psi.amplitudes / n)


def apply_diagonal(psi: Wavefunction, surface: np.ndarray) -> Wavefunction:
    """Pointwise multiplication by a real surface over the same grid."""
    surface = np.asarray(surface).reshape(-1)
    if surface.size != psi.grid.total_points:
        raise ValidationError(
            f"surface length {surface.size} does not match grid total_points "
            f"{psi.grid.total_points}"
        )
    return Wavefunction(psi.grid, psi.amplitudes * surface)


def apply_kinetic(psi: Wavefunction) -> Wavefunction:
    """Sum over axes of -(1/2m) d2/dx2 via forward/inverse Fourier transform.

    Exact for band-limited periodic functions. Real input stays real.
    """
    out = kinetic_on_array(psi.shaped(), psi.grid)
    return Wavefunction(psi.grid, out.reshape(-1))


def kinetic_on_array(arr: np.ndarray, grid: ProductGrid) -> np.ndarray:
    """Kinetic operator on a grid-shaped array (internal fast path)."""
    w = fft_workers()
    if np.isrealobj(arr):
        spec = sfft.rfftn(arr, workers=w)
        spec *= grid.kinetic_multiplier_half()
        return sfft.irfftn(spec, s=grid.shape, workers=w)
    spec = sfft.fftn(arr, workers=w)
    spec *= grid.kinetic_multiplier()
    return sfft.ifftn(spec, workers=w)


def gram_schmidt_deflate(psi: Wavefunction, basis) -> Wavefunction:
    """Project out the span of `basis` (assumed orthonormal) and renormalize.

    Two projection passes for numerical stability. Raises if the input lies
    in the span (relative residual below 1e-12).
    """
    amps = psi.amplitudes.copy()
    dv = psi.grid.volume_element
    in_norm = math.sqrt(float(np.vdot(amps, amps).real) * dv)
    if in_norm == 0.0:
        raise DegenerateInputError("cannot deflate the zero wavefunction")
    for _ in range(2):
        for chi in basis:
            _check_same_grid(psi, chi)
            c = np.vdot(chi.amplitudes, amps) * dv
            if np.isrealobj(amps) and np.isrealobj(chi.amplitudes):
                amps -= c.real * chi.amplitudes
            else:
                amps = amps - c * chi.amplitudes
    res_norm = math.sqrt(float(np.vdot(amps, amps).real) * dv)
    if res_norm < 1e-12 * in_norm:
        raise DegenerateInputError(
            "trial state lies in the span of the deflation basis "
            f"(relative residual {res_norm / in_norm:.2e})"
        )
    return Wavefunction(psi.grid, amps / res_norm)


def boundary_leak(psi: Wavefunction) -> float:
    """Largest edge amplitude relative to the largest amplitude anywhere."""
    arr = np.abs(psi.shaped())
    peak = arr.max()
    if peak == 0.0:
        return 0.0
    edge = 0.0
    for ax in range(arr.ndim):
        edge = max(edge, np.take(arr, 0, axis=ax).max(), np.take(arr, -1, axis=ax).max())
    return float(edge / peak)


def hermite_gauss(n: int, omega: float, mass: float, x: np.ndarray) -> np.ndarray:
    """Analytic harmonic-oscillator eigenfunction n at frequency omega.

    Continuum-normalized; callers renormalize on their grid where needed.
    """
    if n < 0:
        raise ValidationError("quantum number must be non-negative")
    a = mass * omega
    xi = np.sqrt(a) * np.asarray(x, dtype=float)
    pref = (a / np.pi) ** 0.25 / math.sqrt(2.0**n * math.factorial(n))
    return pref * eval_hermite(n, xi) * np.exp(-0.5 * xi * xi)
