"""Molecular and cavity models, and ground-state surface construction.

Atomic units throughout. Each molecule is a Morse oscillator carrying a
bond-length dependent dipole and a far off-resonant two-level electronic
degree of freedom. The cavity contributes one photon displacement coordinate
qc. Coupled ground-state potential and dipole surfaces are assembled
pointwise from a mean-field (product state over molecules) treatment of the
electronic problem, in four flavors:

FieldFree   bare molecules plus the bare photon harmonic term
Linear      bilinear light-matter coupling only
Full        bilinear coupling plus the self-dipole term, solved
            self-consistently
ETC         cavity terms evaluated with frozen field-free electronic
            expectation values (no self-consistency)
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    CalibrationError,
    ConvergenceError,
    ParseError,
    ValidationError,
)
from .grids import Axis, ProductGrid
from .units import cm_to_hartree, hartree_to_cm

# Hydrogen fluoride constants used as defaults throughout.
HF_BOND_LENGTH = 1.7329  # bohr
HF_REDUCED_MASS = 1744.59  # atomic units (0.957055 amu)
HF_OMEGA1_CM = 4281.0  # fundamental transition
HF_OMEGA2_CM = 4108.0  # first hot-band transition

_FLOAT_FMT = "%.17g"


class SurfaceVariant(enum.Enum):
    """How the cavity enters the ground-state surface."""

    FIELD_FREE = "free"
    LINEAR = "linear"
    FULL = "full"
    ETC = "etc"


@dataclass(frozen=True)
class MorseParams:
    """Morse potential D(1 - exp(-a(r-re)))^2 with reduced mass attached.

    depth  D, hartree
    a      range parameter, 1/bohr
    re     equilibrium bond length, bohr
    mass   reduced mass, atomic units
    """

    depth: float
    a: float
    re: float
    mass: float

    def __post_init__(self):
        for name in ("depth", "a", "re", "mass"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"Morse parameter {name} must be positive")
        if self.n_bound < 5:
            raise ValidationError(
                f"Morse well supports only {self.n_bound} bound states, need at least 5"
            )

    @property
    def omega_e(self) -> float:
        """Harmonic frequency a*sqrt(2D/m), hartree."""
        return self.a * math.sqrt(2.0 * self.depth / self.mass)

    @property
    def omega_exe(self) -> float:
        """Anharmonicity a^2/(2m), hartree."""
        return self.a**2 / (2.0 * self.mass)

    @property
    def n_bound(self) -> int:
        return int(math.floor(math.sqrt(2.0 * self.mass * self.depth) / self.a - 0.5))


def morse_levels(p: MorseParams, v_max: int) -> np.ndarray:
    """Analytic bound-state energies E_v for v = 0..v_max, hartree."""
    if v_max >= p.n_bound:
        raise ValidationError(f"v_max={v_max} exceeds the {p.n_bound} bound states")
    v = np.arange(v_max + 1) + 0.5
    return p.omega_e * v - p.omega_exe * v**2


def fit_morse_to_transitions(
    omega1_cm: float,
    omega2_cm: float,
    mass: float,
    re: float = HF_BOND_LENGTH,
) -> MorseParams:
    """Morse parameters whose first two level spacings match the targets.

    omega1_cm is the 0->1 spacing and omega2_cm the 1->2 spacing. The analytic
    ladder E_v = we(v+1/2) - wexe(v+1/2)^2 reproduces both exactly with
    wexe = (w1-w2)/2 and we = w1 + 2 wexe.
    """
    if not omega1_cm > 0 or not omega2_cm > 0:
        raise ValidationError("transition frequencies must be positive")
    omega_exe_cm = 0.5 * (omega1_cm - omega2_cm)
    if omega_exe_cm <= 0:
        raise ValidationError(
            "level spacings must shrink with v: need omega1_cm > omega2_cm"
        )
    omega_e = cm_to_hartree(omega1_cm + 2.0 * omega_exe_cm)
    omega_exe = cm_to_hartree(omega_exe_cm)
    depth = omega_e**2 / (4.0 * omega_exe)
    a = math.sqrt(2.0 * mass * omega_exe)
    return MorseParams(depth=depth, a=a, re=re, mass=mass)


def morse_potential(r, p: MorseParams):
    """V(r) = D(1 - exp(-a(r-re)))^2; zero at re, depth D at dissociation."""
    x = 1.0 - np.exp(-p.a * (np.asarray(r, dtype=float) - p.re))
    return p.depth * x * x


@dataclass(frozen=True)
class DipoleModel:
    """Bond-length dipole plus a two-level electronic response.

    form       "linear": mu0 + slope*(r - re)
               "mecke":  q * r * exp(-r/rstar)
    mu0        dipole at re (linear form), atomic units
    slope      dipole derivative at re (linear form), atomic units/bohr
    q, rstar   charge and decay length (mecke form)
    re         reference bond length, bohr
    delta_e    electronic excitation gap, hartree
    d_trans    electronic transition dipole, atomic units

    The default slope is the calibrated value that puts the one-molecule
    polariton splitting at 60 1/cm for lambda0 = 0.03 with the cavity tuned
    to the fundamental (see calibrate_dipole_slope).
    """

    form: str = "linear"
    mu0: float = 0.71
    slope: float = 0.3845494439485523
    q: float = 0.0
    rstar: float = 1.0
    re: float = HF_BOND_LENGTH
    delta_e: float = 0.35
    d_trans: float = 0.35

    def __post_init__(self):
        if self.form not in ("linear", "mecke"):
            raise ValidationError(f"unknown dipole form {self.form!r}")
        if self.form == "mecke" and not self.rstar > 0:
            raise ValidationError("mecke decay length must be positive")
        if self.delta_e <= 0:
            raise ValidationError("electronic gap must be positive")
        if self.d_trans < 0:
            raise ValidationError("electronic transition dipole must be nonnegative")


def nuclear_dipole(r, m: DipoleModel):
    """Nuclear-frame dipole at bond length r, atomic units."""
    r = np.asarray(r, dtype=float)
    if m.form == "linear":
        return m.mu0 + m.slope * (r - m.re)
    return m.q * r * np.exp(-r / m.rstar)


def mecke_from_linear(m: DipoleModel) -> DipoleModel:
    """Mecke model matching the linear form's value and slope at re."""
    if m.mu0 == 0.0:
        raise ValidationError("cannot match a mecke form to mu0 = 0")
    denom = 1.0 - m.re * m.slope / m.mu0
    if denom <= 0:
        raise ValidationError(
            "slope too steep for a mecke match: need slope*re < mu0"
        )
    rstar = m.re / denom
    q = m.mu0 * math.exp(m.re / rstar) / m.re
    return dataclasses.replace(m, form="mecke", q=q, rstar=rstar)


@dataclass(frozen=True)
class CavityMode:
    """Single cavity mode: frequency, coupling, and molecule count.

    The effective coupling seen by each molecule is lambda0/sqrt(n_mol), so
    the collective splitting of n_mol identical molecules stays pinned to the
    single-molecule value times sqrt(n_mol) at fixed lambda0. All molecules
    are taken aligned with the mode polarization.
    """

    omega_c: float  # hartree
    lambda0: float  # atomic units
    n_mol: int = 1

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValidationError("cavity frequency must be positive")
        if self.lambda0 < 0:
            raise ValidationError("coupling strength must be nonnegative")
        if self.n_mol not in (1, 2):
            raise ValidationError("n_mol must be 1 or 2")

    @property
    def lambda_c(self) -> float:
        return self.lambda0 / math.sqrt(self.n_mol)

    @property
    def mode_volume(self) -> float:
        """Implied mode volume 4*pi/lambda_c^2 (metadata only)."""
        lc = self.lambda_c
        return 4.0 * math.pi / lc**2 if lc > 0 else math.inf


@dataclass(frozen=True)
class SCFState:
    """Converged electronic product state at one nuclear/photon geometry.

    mixing          per-molecule sigma_x expectation of the two-level ground
                    state (sine of the mixing angle)
    dipoles         per-molecule dipole expectation, atomic units
    energy          electronic plus coupling energy, hartree; the photon
                    harmonic term is excluded and added by the surface builder
    iterations      sweeps used (0 for the no-iteration variants)
    residual        last max change in the per-molecule dipole expectations
    energy_history  energy after initialization and after each sweep
    """

    mixing: tuple
    dipoles: tuple
    energy: float
    iterations: int
    residual: float
    energy_history: tuple = ()


def _require_gap_off_resonant(dip: DipoleModel, cav: CavityMode) -> None:
    if dip.delta_e <= 10.0 * cav.omega_c:
        raise ValidationError(
            "electronic gap must exceed 10x the cavity frequency, got "
            f"{dip.delta_e:.4g} vs omega_c={cav.omega_c:.4g}"
        )


def _mean_field_energy(sx, mu_n, v_nuc, wq, lam2, dip: DipoleModel, variant):
    """Total product-state energy for mixing amplitudes sx, vectorized.

    sx, mu_n, v_nuc have shape (n_mol, N); wq = omega_c*qc*lambda_c has
    shape (N,). The photon harmonic term is not included.
    """
    d = dip.d_trans
    mu = mu_n + d * sx
    sz = np.sqrt(1.0 - sx * sx)
    e_site = v_nuc + 0.5 * dip.delta_e * (1.0 - sz) - wq * mu
    if variant is SurfaceVariant.FULL:
        e_site = e_site + 0.5 * lam2 * (mu_n * mu_n + d * d + 2.0 * mu_n * d * sx)
        cross = lam2 * mu[0] * mu[1] if mu.shape[0] == 2 else 0.0
        return e_site.sum(axis=0) + cross
    return e_site.sum(axis=0)


def _scf_kernel(mu_n, v_nuc, qc, cav: CavityMode, dip: DipoleModel,
                variant: SurfaceVariant, tol: float, max_iter: int,
                track_energy: bool):
    """Self-consistent two-level ground states over a batch of geometries.

    mu_n, v_nuc: arrays of shape (n_mol, N); qc: shape (N,). Returns
    (sx, mu, energy, iterations, residual, history). Gauss-Seidel sweeps with
    exact per-site minimization; each site update can only lower the total
    energy, so the energy sequence is non-increasing by construction. A
    sticky 0.5 damping engages pointwise if the residual ever grows.
    """
    n_mol, n_pts = mu_n.shape
    lam = cav.lambda_c
    lam2 = lam * lam
    wq = cav.omega_c * qc * lam
    d = dip.d_trans
    half_gap = 0.5 * dip.delta_e

    sx = np.zeros_like(mu_n)
    mu = mu_n.copy()

    if variant is SurfaceVariant.ETC:
        energy = v_nuc.sum(axis=0) - wq * mu_n.sum(axis=0)
        energy = energy + 0.5 * lam2 * ((mu_n * mu_n + d * d).sum(axis=0))
        if n_mol == 2:
            energy = energy + lam2 * mu_n[0] * mu_n[1]
        history = [energy] if track_energy else []
        return sx, mu, energy, 0, np.zeros(n_pts), history

    history = []
    if track_energy:
        history.append(_mean_field_energy(sx, mu_n, v_nuc, wq, lam2, dip, variant))

    damp = np.ones(n_pts)
    prev_res = np.full(n_pts, np.inf)
    res = prev_res
    converged_at = max_iter + 1
    for sweep in range(1, max_iter + 1):
        res = np.zeros(n_pts)
        for i in range(n_mol):
            if variant is SurfaceVariant.FULL:
                mu_other = mu[1 - i] if n_mol == 2 else 0.0
                cx = d * (-wq + lam2 * (mu_n[i] + mu_other))
            else:
                cx = d * (-wq)
            best = -cx / np.hypot(cx, half_gap)
            sx[i] = damp * best + (1.0 - damp) * sx[i]
            mu_new = mu_n[i] + d * sx[i]
            res = np.maximum(res, np.abs(mu_new - mu[i]))
            mu[i] = mu_new
        if track_energy:
            history.append(_mean_field_energy(sx, mu_n, v_nuc, wq, lam2, dip, variant))
        if res.max() < tol:
            converged_at = sweep
            break
        damp = np.where(res > prev_res, 0.5 * damp, damp)
        prev_res = res
    if converged_at > max_iter:
        worst = int(np.argmax(res))
        err = ConvergenceError(
            f"electronic self-consistency stalled: residual {res[worst]:.3e} "
            f"after {max_iter} sweeps"
        )
        err.batch_index = worst
        raise err
    energy = _mean_field_energy(sx, mu_n, v_nuc, wq, lam2, dip, variant)
    return sx, mu, energy, converged_at, res, history


def scf_electronic_ground(
    r,
    qc: float,
    cav: CavityMode,
    dip: DipoleModel,
    variant: SurfaceVariant,
    tol: float = 1e-12,
    max_iter: int = 200,
    morse: MorseParams | None = None,
) -> SCFState:
    """Electronic product ground state at one geometry.

    r is a sequence of bond lengths, one per molecule. The nuclear potential
    enters the reported energy only when a MorseParams is supplied; the
    mixing amplitudes and dipole expectations do not depend on it.
    """
    if variant is SurfaceVariant.FIELD_FREE:
        raise ValidationError("the field-free variant has no electronic problem")
    if tol <= 0:
        raise ValidationError("scf tolerance must be positive")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if r.shape[0] != cav.n_mol:
        raise ValidationError(f"expected {cav.n_mol} bond lengths, got {r.shape[0]}")
    _require_gap_off_resonant(dip, cav)

    mu_n = nuclear_dipole(r, dip).reshape(cav.n_mol, 1)
    if morse is not None:
        v_nuc = morse_potential(r, morse).reshape(cav.n_mol, 1)
    else:
        v_nuc = np.zeros_like(mu_n)
    qc_arr = np.full(1, float(qc))
    sx, mu, energy, iters, res, history = _scf_kernel(
        mu_n, v_nuc, qc_arr, cav, dip, variant, tol, max_iter, track_energy=True
    )
    return SCFState(
        mixing=tuple(float(s[0]) for s in sx),
        dipoles=tuple(float(m[0]) for m in mu),
        energy=float(energy[0]),
        iterations=iters,
        residual=float(res[0]) if np.ndim(res) else float(res),
        energy_history=tuple(float(h[0]) for h in history),
    )


@dataclass
class SurfaceSet:
    """Potential and dipole surfaces on a shared grid, plus metadata.

    potential and dipole are flat float64 arrays in row-major order (last
    axis fastest). The potential is referenced to the field-free minimum of
    the same grid, so its own minimum sits near zero.
    """

    grid: ProductGrid
    variant: SurfaceVariant
    potential: np.ndarray
    dipole: np.ndarray
    metadata: dict

    def __post_init__(self):
        self.potential = np.ascontiguousarray(self.potential, dtype=float).ravel()
        self.dipole = np.ascontiguousarray(self.dipole, dtype=float).ravel()
        n = self.grid.total_points
        if self.potential.shape[0] != n or self.dipole.shape[0] != n:
            raise ValidationError(
                f"surface arrays must hold {n} values to match the grid"
            )
        if not np.all(np.isfinite(self.potential)):
            raise ValidationError("potential surface contains non-finite values")
        if not np.all(np.isfinite(self.dipole)):
            raise ValidationError("dipole surface contains non-finite values")
        vmin = float(self.potential.min())
        if abs(vmin) > 0.1:
            raise ValidationError(
                f"potential minimum {vmin:.4g} hartree is not near zero; "
                "surfaces are referenced to the field-free minimum"
            )


def _expected_labels(n_mol: int) -> tuple:
    return ("r1", "qc") if n_mol == 1 else ("r1", "r2", "qc")


def build_surface_set(
    grid: ProductGrid,
    morse: MorseParams,
    dip: DipoleModel,
    cav: CavityMode,
    variant: SurfaceVariant,
    scf_tol: float = 1e-12,
    scf_max_iter: int = 200,
    qc_probe_coeff: float = 0.0,
) -> SurfaceSet:
    """Ground-state potential and dipole surfaces on a product grid.

    The potential at each point is the electronic (variant) energy plus the
    photon harmonic term 0.5*omega_c^2*qc^2, shifted so the field-free
    surface minimum over the same grid sits at zero. The dipole surface is
    the total matter dipole expectation: converged for Full/Linear, frozen
    field-free for ETC/FieldFree. qc_probe_coeff optionally adds a photon
    displacement contribution qc_probe_coeff*qc to the dipole surface; the
    default leaves the probe purely material.
    """
    labels = tuple(ax.label for ax in grid.axes)
    if labels != _expected_labels(cav.n_mol):
        raise ValidationError(
            f"grid axes {labels} do not match the "
            f"{_expected_labels(cav.n_mol)} layout for n_mol={cav.n_mol}"
        )
    for ax in grid.axes[:-1]:
        if ax.mass != morse.mass:
            raise ValidationError(
                f"axis {ax.label} mass {ax.mass} disagrees with the Morse "
                f"reduced mass {morse.mass}"
            )
    if variant is not SurfaceVariant.FIELD_FREE:
        _require_gap_off_resonant(dip, cav)

    meshes = grid.meshes()
    qc = meshes[-1].ravel()
    r_list = [m.ravel() for m in meshes[:-1]]
    mu_n = np.stack([nuclear_dipole(r, dip) for r in r_list])
    v_nuc = np.stack([morse_potential(r, morse) for r in r_list])

    e_photon = 0.5 * cav.omega_c**2 * qc * qc
    free = v_nuc.sum(axis=0) + e_photon
    free_min = float(free.min())

    if variant is SurfaceVariant.FIELD_FREE:
        potential = free - free_min
        dipole = mu_n.sum(axis=0)
    else:
        try:
            _, mu, energy, _, _, _ = _scf_kernel(
                mu_n, v_nuc, qc, cav, dip, variant,
                scf_tol, scf_max_iter, track_energy=False,
            )
        except ConvergenceError as err:
            flat = getattr(err, "batch_index", None)
            idx = np.unravel_index(flat, grid.shape) if flat is not None else "?"
            raise ConvergenceError(
                f"surface build failed at grid point {idx}: {err}"
            ) from err
        potential = energy + e_photon - free_min
        dipole = mu.sum(axis=0)
    if qc_probe_coeff != 0.0:
        dipole = dipole + qc_probe_coeff * qc

    meta = {
        "variant": variant.value,
        "n_mol": str(cav.n_mol),
        "omega_c_cm": _FLOAT_FMT % hartree_to_cm(cav.omega_c),
        "lambda0": _FLOAT_FMT % cav.lambda0,
        "dipole_form": dip.form,
        "mu0": _FLOAT_FMT % dip.mu0,
        "mu_slope": _FLOAT_FMT % dip.slope,
        "delta_e": _FLOAT_FMT % dip.delta_e,
        "d_trans": _FLOAT_FMT % dip.d_trans,
        "morse_depth": _FLOAT_FMT % morse.depth,
        "morse_a": _FLOAT_FMT % morse.a,
        "re": _FLOAT_FMT % morse.re,
        "source": "poldqc surface builder",
    }
    if dip.form == "mecke":
        meta["mecke_q"] = _FLOAT_FMT % dip.q
        meta["mecke_rstar"] = _FLOAT_FMT % dip.rstar
    if qc_probe_coeff != 0.0:
        meta["qc_probe_coeff"] = _FLOAT_FMT % qc_probe_coeff
    return SurfaceSet(grid=grid, variant=variant, potential=potential,
                      dipole=dipole, metadata=meta)


def save_surface_set(s: SurfaceSet, path) -> None:
    """Write a surface set as self-describing text; values round-trip exactly."""
    lines = ["#POLDQC-SURFACE v1"]
    for key, value in s.metadata.items():
        lines.append(f"#{key}={value}")
    for ax in s.grid.axes:
        lines.append(
            "#axis %s %d %s %s %s"
            % (ax.label, ax.n_points, _FLOAT_FMT % ax.min,
               _FLOAT_FMT % ax.max, _FLOAT_FMT % ax.mass)
        )
    lines.append("#columns V mu")
    for v, mu in zip(s.potential, s.dipole):
        lines.append("%.16e %.16e" % (v, mu))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_axis_line(text: str, path, lineno: int) -> Axis:
    parts = text.split()
    if len(parts) != 6:
        raise ParseError("axis line needs label, n, min, max, mass",
                         path=path, line=lineno)
    try:
        return Axis(label=parts[1], n_points=int(parts[2]), min=float(parts[3]),
                    max=float(parts[4]), mass=float(parts[5]))
    except ValueError as err:
        raise ParseError(f"bad axis value: {err}", path=path, line=lineno) from err


def load_surface_set(path) -> SurfaceSet:
    """Read a surface set written by save_surface_set."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "#POLDQC-SURFACE v1":
        raise ParseError("expected header '#POLDQC-SURFACE v1'", path=path, line=1)

    metadata: dict = {}
    axes = []
    columns_seen = False
    data_start = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.startswith("#"):
            data_start = lineno
            break
        if line.startswith("#axis "):
            axes.append(_parse_axis_line(line, path, lineno))
        elif line == "#columns V mu":
            columns_seen = True
            data_start = lineno + 1
            break
        elif "=" in line:
            key, _, value = line[1:].partition("=")
            metadata[key] = value
        else:
            raise ParseError(f"unrecognized header line {line!r}", path=path,
                             line=lineno)
    if not columns_seen:
        raise ParseError("missing '#columns V mu' line", path=path,
                         line=len(lines))
    if not axes:
        raise ParseError("no #axis lines found", path=path, line=data_start - 1)

    grid = ProductGrid(axes)
    expected = grid.total_points
    rows = lines[data_start - 1:]
    rows = [row for row in rows if row.strip()]
    if len(rows) != expected:
        raise ParseError(
            f"expected {expected} data lines, found {len(rows)}",
            path=path, line=data_start,
        )
    potential = np.empty(expected)
    dipole = np.empty(expected)
    for k, row in enumerate(rows):
        parts = row.split()
        if len(parts) != 2:
            raise ParseError(f"expected 2 values per line, found {len(parts)}",
                             path=path, line=data_start + k)
        try:
            potential[k] = float(parts[0])
            dipole[k] = float(parts[1])
        except ValueError as err:
            raise ParseError(f"bad value: {err}", path=path,
                             line=data_start + k) from err

    if "variant" not in metadata:
        raise ParseError("metadata is missing the variant tag", path=path, line=2)
    try:
        variant = SurfaceVariant(metadata["variant"])
    except ValueError as err:
        raise ParseError(f"unknown variant {metadata['variant']!r}",
                         path=path, line=2) from err
    return SurfaceSet(grid=grid, variant=variant, potential=potential,
                      dipole=dipole, metadata=metadata)


def default_calibration_grid(morse: MorseParams) -> ProductGrid:
    """Compact single-molecule grid adequate for the lowest two manifolds.

    The photon width 1/sqrt(omega_c) is around 7 bohr for mid-infrared
    cavities, so the qc box extends to +-50 to keep edge amplitudes below
    the boundary-leak threshold.
    """
    r_axis = Axis("r1", 64, morse.re - 1.05, morse.re + 1.8, morse.mass)
    qc_axis = Axis("qc", 48, -50.0, 50.0, 1.0)
    return ProductGrid([r_axis, qc_axis])


def first_order_rabi_cm(cav: CavityMode, morse: MorseParams,
                        dip: DipoleModel) -> float:
    """Perturbative one-molecule polariton splitting, in 1/cm.

    Uses the harmonic 0->1 transition dipole mu01 = slope/sqrt(2 m w1) and
    the resonant light-matter matrix element, giving
    2 * lambda_c * sqrt(omega_c/2) * mu01.
    """
    omega1 = morse.omega_e - 2.0 * morse.omega_exe
    mu01 = dip.slope / math.sqrt(2.0 * morse.mass * omega1)
    return hartree_to_cm(2.0 * cav.lambda_c * math.sqrt(cav.omega_c / 2.0) * mu01)


def _polariton_gap_cm(slope: float, cav: CavityMode, morse: MorseParams,
                      dip_template: DipoleModel, grid: ProductGrid,
                      n_states: int) -> float:
    """LP/UP splitting of the first excited manifold for a given slope."""
    from .eigen import RelaxationConfig, relax_eigenstates

    dip = dataclasses.replace(dip_template, form="linear", slope=slope)
    surfaces = build_surface_set(grid, morse, dip, cav, SurfaceVariant.FULL)
    cfg = RelaxationConfig(n_states=n_states, dt_imag=25.0, energy_tol=1e-9)
    solution = relax_eigenstates(surfaces, cfg)
    gaps = solution.energies - solution.energies[0]
    window = (gaps > 0.5 * cav.omega_c) & (gaps < 1.5 * cav.omega_c)
    picked = np.flatnonzero(window)
    if picked.size != 2:
        raise CalibrationError(
            f"expected 2 states in the first excited manifold, found {picked.size}"
        )
    return hartree_to_cm(float(gaps[picked[1]] - gaps[picked[0]]))


def calibrate_dipole_slope(
    target_rabi_cm: float,
    cav: CavityMode,
    morse: MorseParams,
    dip_template: DipoleModel,
    grid: ProductGrid | None = None,
    n_states: int = 4,
) -> DipoleModel:
    """Dipole slope that reproduces a target one-molecule polariton splitting.

    Runs the full surface -> eigenstates pipeline inside a bracketed root
    search on the slope, seeded by the perturbative splitting estimate.
    The returned model matches the target within 0.5 1/cm.
    """
    from scipy.optimize import brentq

    if target_rabi_cm <= 0:
        raise ValidationError("target splitting must be positive")
    if cav.n_mol != 1:
        raise ValidationError("calibration runs on a single molecule")
    if cav.lambda0 == 0:
        raise CalibrationError("no coupling: zero lambda0 cannot split the manifold")
    omega1 = morse.omega_e - 2.0 * morse.omega_exe
    if abs(hartree_to_cm(cav.omega_c - omega1)) > 5.0:
        raise ValidationError(
            "calibration expects the cavity resonant with the fundamental"
        )
    if grid is None:
        grid = default_calibration_grid(morse)

    unit = first_order_rabi_cm(cav, morse, dataclasses.replace(
        dip_template, form="linear", slope=1.0))
    seed = target_rabi_cm / unit

    def objective(slope: float) -> float:
        return _polariton_gap_cm(slope, cav, morse, dip_template, grid,
                                 n_states) - target_rabi_cm

    lo, hi = 0.75 * seed, 1.3 * seed
    f_lo, f_hi = objective(lo), objective(hi)
    for _ in range(6):
        if f_lo * f_hi <= 0:
            break
        if f_lo > 0:
            lo *= 0.6
            f_lo = objective(lo)
        else:
            hi *= 1.6
            f_hi = objective(hi)
    else:
        raise CalibrationError(
            f"could not bracket the target splitting {target_rabi_cm} 1/cm "
            f"within slope range [{lo:.4g}, {hi:.4g}]"
        )
    slope = brentq(objective, lo, hi, rtol=1e-5)
    final = objective(slope) + target_rabi_cm
    if abs(final - target_rabi_cm) > 0.5:
        raise CalibrationError(
            f"root finding landed at {final:.3f} 1/cm, outside the 0.5 window"
        )
    return dataclasses.replace(dip_template, form="linear", slope=float(slope))
