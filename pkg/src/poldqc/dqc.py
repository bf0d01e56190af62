"""Frequency-domain double-quantum-coherence spectra.

The signal is evaluated directly on the (omega3, omega2) frequency grid as a
sum of Lorentzian pathway products over the classified single- and
double-excitation manifolds, with the first waiting time set to zero. Direct
evaluation is exact for the uniform dephasing model and avoids windowing
artifacts of a time-domain transform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .eigen import EigenSolution
from .errors import (
    DegenerateInputError,
    ParseError,
    PartitionError,
    ValidationError,
)
from .units import hartree_to_cm

# windows covering the double-excitation band along omega2 and the
# fundamental band along omega3, in 1/cm
DEFAULT_OMEGA2 = (8200.0, 1.0, 601)
DEFAULT_OMEGA3 = (4000.0, 1.0, 451)

_FLOAT_FMT = "%.17g"


@dataclass(frozen=True)
class FrequencyAxis:
    """Uniform frequency samples start + step*k, k = 0..n-1, in 1/cm."""

    start: float
    step: float
    n: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValidationError("frequency step must be positive")
        if self.n < 2:
            raise ValidationError("a frequency axis needs at least two samples")

    @property
    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.n)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.n - 1)


@dataclass
class SpectrumGrid:
    """Complex signal on an omega2 x omega3 grid.

    values           (n2, n3) complex array, omega2 along the first axis
    gamma_cm         uniform dephasing width, 1/cm
    normalization    max |S| removed by normalize_spectrum, None when raw
    """

    omega2: FrequencyAxis
    omega3: FrequencyAxis
    values: np.ndarray
    gamma_cm: float
    normalization: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.omega2.n, self.omega3.n):
            raise ValidationError(
                f"values must have shape {(self.omega2.n, self.omega3.n)}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("spectrum contains non-finite values")
        if not self.gamma_cm > 0:
            raise ValidationError("dephasing width must be positive")
        if self.normalization is not None:
            if not self.normalization > 0:
                raise ValidationError("normalization divisor must be positive")
            peak = float(np.max(np.abs(self.values)))
            if abs(peak - 1.0) > 1e-12:
                raise ValidationError(
                    "normalized spectrum must have unit peak magnitude"
                )


@dataclass(frozen=True)
class Peak:
    """One local maximum of |S|, refined off-grid by a quadratic fit."""

    omega2: float
    omega3: float
    magnitude: float
    assignment: str | None = None


def compute_dqc(
    eig: EigenSolution,
    gamma_cm: float,
    omega2: FrequencyAxis,
    omega3: FrequencyAxis,
) -> SpectrumGrid:
    """DQC signal S(omega3, omega2) at zero first waiting time.

    Every pathway g -> e -> f -> e' -> g contributes a double-excitation
    Lorentzian along omega2 times the difference of an e'-g and an f-e'
    Lorentzian along omega3, weighted by its four transition dipoles. The
    resonance positions are converted from pairwise energy differences, so
    equal gaps cancel exactly and harmonic ladders produce no signal.
    Summation runs over ascending state indices to keep results bit-stable.
    """
    if not gamma_cm > 0:
        raise ValidationError("dephasing width must be positive")
    part = eig.partition
    e_set = sorted(part.e_set)
    f_set = sorted(part.f_set)
    if not e_set or not f_set:
        raise PartitionError("DQC needs both excitation manifolds populated")

    g = part.g
    energies = eig.energies
    mu = eig.dipoles
    w2 = omega2.values
    w3 = omega3.values
    gam = 1j * gamma_cm

    values = np.zeros((omega2.n, omega3.n), dtype=complex)
    for f in f_set:
        ladder = sum(mu[f, e] * mu[e, g] for e in e_set)
        if ladder == 0.0:
            continue
        row3 = np.zeros(omega3.n, dtype=complex)
        for ep in e_set:
            amp = mu[g, ep] * mu[ep, f]
            if amp == 0.0:
                continue
            w_eg = hartree_to_cm(float(energies[ep] - energies[g]))
            w_fe = hartree_to_cm(float(energies[f] - energies[ep]))
            row3 += amp * (1.0 / (w3 - w_eg + gam) - 1.0 / (w3 - w_fe + gam))
        w_fg = hartree_to_cm(float(energies[f] - energies[g]))
        values += np.outer(ladder / (w2 - w_fg + gam), row3)
    return SpectrumGrid(
        omega2=omega2, omega3=omega3, values=values, gamma_cm=gamma_cm
    )


def normalize_spectrum(s: SpectrumGrid) -> SpectrumGrid:
    """Divide by the peak magnitude and record the divisor."""
    peak = float(np.max(np.abs(s.values)))
    if peak == 0.0:
        raise DegenerateInputError("cannot normalize an all-zero spectrum")
    return replace(s, values=s.values / peak, normalization=peak)


def difference_spectrum(a: SpectrumGrid, b: SpectrumGrid) -> np.ndarray:
    """Pointwise |a| - |b| after normalizing each spectrum to unit peak."""
    if a.omega2 != b.omega2 or a.omega3 != b.omega3:
        raise ValidationError("difference requires identical frequency axes")
    mag_a = np.abs(normalize_spectrum(a).values)
    mag_b = np.abs(normalize_spectrum(b).values)
    return mag_a - mag_b


def spectrum_channels(s: SpectrumGrid):
    """Real, imaginary, and absolute channels, all scaled by 1/max|S|."""
    peak = float(np.max(np.abs(s.values)))
    if peak == 0.0:
        raise DegenerateInputError("cannot scale an all-zero spectrum")
    return s.values.real / peak, s.values.imag / peak, np.abs(s.values) / peak


def _refine(f_minus: float, f_zero: float, f_plus: float):
    """Quadratic vertex through three points: (offset, gain) from the center.

    The center is a strict maximum, so the curvature is negative and the
    offset lies inside (-1, 1) grid steps.
    """
    a = 0.5 * (f_plus + f_minus) - f_zero
    b = 0.5 * (f_plus - f_minus)
    return -b / (2.0 * a), -b * b / (4.0 * a)


def _pathway_tables(eig: EigenSolution):
    part = eig.partition
    energies = eig.energies
    g = part.g
    table2 = [
        (f"f{f}g", hartree_to_cm(float(energies[f] - energies[g])))
        for f in sorted(part.f_set)
    ]
    table3 = [
        (f"e{e}g", hartree_to_cm(float(energies[e] - energies[g])))
        for e in sorted(part.e_set)
    ]
    for f in sorted(part.f_set):
        for e in sorted(part.e_set):
            table3.append(
                (f"f{f}e{e}", hartree_to_cm(float(energies[f] - energies[e])))
            )
    return table2, table3


def _nearest(table, value: float) -> str:
    name, _ = min(table, key=lambda item: abs(item[1] - value))
    return name


def find_peaks(s: SpectrumGrid, threshold: float, eig: EigenSolution | None = None):
    """Strict interior local maxima of |S| above threshold * max|S|.

    Each peak is refined off-grid by independent quadratic fits along both
    axes and reported in descending magnitude. When an EigenSolution is
    supplied, each peak is annotated with the nearest pathway resonance
    (double-excitation coherence along omega2, single coherence along
    omega3).
    """
    if not 0.0 < threshold < 1.0:
        raise ValidationError("peak threshold must lie strictly inside (0, 1)")
    mag = np.abs(s.values)
    level = threshold * float(mag.max())
    core = mag[1:-1, 1:-1]
    highest = np.ones_like(core, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            shifted = mag[1 + di : mag.shape[0] - 1 + di,
                          1 + dj : mag.shape[1] - 1 + dj]
            highest &= core > shifted
    highest &= core > level

    tables = _pathway_tables(eig) if eig is not None else None
    w2 = s.omega2.values
    w3 = s.omega3.values
    peaks = []
    for i, j in zip(*np.nonzero(highest)):
        i, j = int(i) + 1, int(j) + 1
        d2, gain2 = _refine(mag[i - 1, j], mag[i, j], mag[i + 1, j])
        d3, gain3 = _refine(mag[i, j - 1], mag[i, j], mag[i, j + 1])
        pos2 = w2[i] + d2 * s.omega2.step
        pos3 = w3[j] + d3 * s.omega3.step
        assignment = None
        if tables is not None:
            assignment = f"{_nearest(tables[0], pos2)} | {_nearest(tables[1], pos3)}"
        peaks.append(
            Peak(
                omega2=float(pos2),
                omega3=float(pos3),
                magnitude=float(mag[i, j] + gain2 + gain3),
                assignment=assignment,
            )
        )
    peaks.sort(key=lambda p: (-p.magnitude, p.omega2, p.omega3))
    return peaks


def save_spectrum(s: SpectrumGrid, path) -> None:
    """Write a spectrum as plot-ready text, 17 significant digits."""
    lines = ["#POLDQC-SPECTRUM v1"]
    for tag, ax in (("omega2_cm", s.omega2), ("omega3_cm", s.omega3)):
        lines.append(
            f"#{tag} {_FLOAT_FMT % ax.start} {_FLOAT_FMT % ax.step} {ax.n}"
        )
    lines.append(f"#gamma_cm {_FLOAT_FMT % s.gamma_cm}")
    if s.normalization is not None:
        lines.append(f"#normalization {_FLOAT_FMT % s.normalization}")
    lines.append("#columns omega2 omega3 re im abs")
    w2 = s.omega2.values
    w3 = s.omega3.values
    out = []
    for i in range(s.omega2.n):
        row = s.values[i]
        for j in range(s.omega3.n):
            z = row[j]
            out.append(
                " ".join(
                    _FLOAT_FMT % x
                    for x in (w2[i], w3[j], z.real, z.imag, abs(z))
                )
            )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines + out) + "\n")


def _parse_axis_line(parts, path, line_no):
    if len(parts) != 3:
        raise ParseError(
            "frequency axis needs start, step, and count",
            path=path, line=line_no,
        )
    try:
        return FrequencyAxis(float(parts[0]), float(parts[1]), int(parts[2]))
    except (ValueError, ValidationError) as exc:
        raise ParseError(f"bad frequency axis: {exc}", path=path, line=line_no)


def load_spectrum(path) -> SpectrumGrid:
    """Read a spectrum written by save_spectrum, with line-number errors."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw or raw[0] != "#POLDQC-SPECTRUM v1":
        raise ParseError("not a POLDQC-SPECTRUM v1 file", path=path, line=1)

    axes = {}
    gamma = None
    normalization = None
    row = 0
    values = None
    expected = None
    for line_no, line in enumerate(raw[1:], start=2):
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if not parts:
                continue
            key = parts[0]
            if key in ("omega2_cm", "omega3_cm"):
                axes[key] = _parse_axis_line(parts[1:], path, line_no)
            elif key in ("gamma_cm", "normalization"):
                try:
                    number = float(parts[1])
                except (IndexError, ValueError):
                    raise ParseError(
                        f"{key} needs one numeric value", path=path, line=line_no
                    )
                if key == "gamma_cm":
                    gamma = number
                else:
                    normalization = number
            elif key == "columns":
                if parts[1:] != ["omega2", "omega3", "re", "im", "abs"]:
                    raise ParseError(
                        "unsupported column layout", path=path, line=line_no
                    )
            else:
                raise ParseError(
                    f"unknown header key {key!r}", path=path, line=line_no
                )
            continue
        if values is None:
            if "omega2_cm" not in axes or "omega3_cm" not in axes:
                raise ParseError(
                    "data before both frequency axes were declared",
                    path=path, line=line_no,
                )
            if gamma is None:
                raise ParseError(
                    "data before the dephasing width was declared",
                    path=path, line=line_no,
                )
            expected = axes["omega2_cm"].n * axes["omega3_cm"].n
            values = np.empty(expected, dtype=complex)
        parts = line.split()
        if len(parts) != 5:
            raise ParseError(
                f"expected 5 columns, found {len(parts)}", path=path, line=line_no
            )
        if row >= expected:
            raise ParseError(
                f"expected {expected} data lines, found more", path=path,
                line=line_no,
            )
        try:
            values[row] = complex(float(parts[2]), float(parts[3]))
        except ValueError:
            raise ParseError("malformed data row", path=path, line=line_no)
        row += 1
    if values is None or row != expected:
        raise ParseError(
            f"expected {0 if expected is None else expected} data lines, "
            f"found {row}",
            path=path, line=len(raw),
        )
    ax2 = axes["omega2_cm"]
    ax3 = axes["omega3_cm"]
    return SpectrumGrid(
        omega2=ax2,
        omega3=ax3,
        values=values.reshape(ax2.n, ax3.n),
        gamma_cm=gamma,
        normalization=normalization,
    )
