"""Lowest coupled eigenstates by imaginary-time Krylov relaxation.

States are relaxed one at a time under deflation against the already
converged ones, then polished by a final Rayleigh-Ritz rotation inside the
converged span, which resolves nearly degenerate pairs exactly. Everything
runs in real arithmetic: imaginary-time propagation of a real start state
under a real Hamiltonian stays real.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    BoundaryLeakError,
    ConvergenceError,
    DegenerateInputError,
    NumericalError,
    ParseError,
    PartitionError,
    ValidationError,
)
from .grids import (
    Axis,
    ProductGrid,
    Wavefunction,
    boundary_leak,
    hermite_gauss,
    kinetic_on_array,
)
from .model import SurfaceSet, SurfaceVariant
from .units import cm_to_hartree

_FLOAT_FMT = "%.17g"

# classification windows for single and double excitations, in units of the
# reference frequency
E_WINDOW = (0.5, 1.5)
F_WINDOW = (1.5, 2.5)

# measured edge amplitude above this fraction of the peak marks a state as
# touching the box boundary
LEAK_LIMIT = 1e-6

# energy spacing below which two states count as degenerate
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class RelaxationConfig:
    """Knobs for the imaginary-time relaxation."""

    n_states: int = 10
    dt_imag: float = 5.0
    krylov_order: int = 10
    energy_tol: float = 1e-10
    max_steps: int = 20000

    def __post_init__(self):
        if self.n_states < 1:
            raise ValidationError("n_states must be at least 1")
        if not self.dt_imag > 0:
            raise ValidationError("imaginary time step must be positive")
        if self.krylov_order < 4:
            raise ValidationError("krylov_order must be at least 4")
        if not self.energy_tol > 0:
            raise ValidationError("energy tolerance must be positive")
        if self.max_steps < 51:
            raise ValidationError("max_steps must allow at least one 50-step window")


@dataclass(frozen=True)
class ManifoldPartition:
    """Ground / single-excitation / double-excitation classification.

    Indices land in e_set when (E - E_g)/omega_ref falls inside (0.5, 1.5)
    and in f_set inside (1.5, 2.5). States above 2.5 or in gaps go to the
    unclassified list and stay out of the spectra.
    """

    g: int
    e_set: tuple
    f_set: tuple
    omega_ref: float
    unclassified: tuple = ()


@dataclass
class EigenSolution:
    """Relaxed eigenpairs, transition dipoles, and their classification.

    energies  ascending, hartree
    states    real Wavefunctions, empty when only energies were loaded
    dipoles   symmetric matter transition-dipole matrix, atomic units
    """

    energies: np.ndarray
    states: list
    dipoles: np.ndarray
    partition: ManifoldPartition
    grid: ProductGrid
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.energies = np.asarray(self.energies, dtype=float)
        n = self.energies.shape[0]
        if np.any(np.diff(self.energies) < -DEGENERACY_TOL):
            raise ValidationError("energies must ascend (degeneracy tolerance 1e-9)")
        self.dipoles = np.asarray(self.dipoles)
        if self.dipoles.shape != (n, n):
            raise ValidationError(f"dipole matrix must be {n}x{n}")
        if np.iscomplexobj(self.dipoles):
            if np.max(np.abs(self.dipoles.imag)) > 1e-10:
                raise ValidationError("dipole matrix has imaginary residue above 1e-10")
            self.dipoles = self.dipoles.real.copy()
        if np.max(np.abs(self.dipoles - self.dipoles.T)) > 1e-10:
            raise ValidationError("dipole matrix must be symmetric within 1e-10")
        if self.states:
            if len(self.states) != n:
                raise ValidationError("need one state per energy")
            dv = self.grid.volume_element
            amps = np.stack([st.amplitudes for st in self.states])
            overlap = (amps.conj() @ amps.T) * dv
            if np.max(np.abs(overlap - np.eye(n))) > 1e-8:
                raise ValidationError("states are not orthonormal to 1e-8")


def _lanczos_exp(matvec, v, tau, order, dot):
    """One normalized imaginary-time step exp(-H tau) v in a Krylov basis.

    Returns (new vector, Rayleigh quotient of the input). The small basis is
    fully reorthogonalized; a breakdown (residual below 1e-14) means an
    invariant subspace was found, where the propagation is exact.
    """
    basis = [v]
    alpha = []
    beta = []
    w = matvec(v)
    alpha.append(float(np.real(dot(v, w))))
    w = w - alpha[0] * v
    for _ in range(order - 1):
        for u in basis:
            w = w - dot(u, w) * u
        b = math.sqrt(float(np.real(dot(w, w))))
        if b < 1e-14:
            break
        beta.append(b)
        vj = w / b
        basis.append(vj)
        w = matvec(vj)
        alpha.append(float(np.real(dot(vj, w))))
        w = w - alpha[-1] * vj - beta[-1] * basis[-2]
    if len(basis) == 1:
        return v, alpha[0]
    vals, vecs = scipy.linalg.eigh_tridiagonal(alpha, beta)
    weights = np.exp(-(vals - vals[0]) * tau)
    coefs = vecs @ (weights * vecs[0, :])
    out = coefs[0] * basis[0]
    for c, u in zip(coefs[1:], basis[1:]):
        out = out + c * u
    out = out / math.sqrt(float(np.real(dot(out, out))))
    return out, alpha[0]


def krylov_imaginary_step(psi, hamiltonian, tau: float, order: int = 10):
    """Normalized exp(-H tau) psi in an order-k Krylov subspace.

    psi may be a Wavefunction (hamiltonian maps Wavefunction to Wavefunction,
    inner products carry the grid volume element) or a plain vector
    (hamiltonian is a matvec, plain Euclidean inner product). The energy
    expectation cannot increase across the step.
    """
    if not tau > 0:
        raise ValidationError("imaginary time step must be positive")
    if order < 2:
        raise ValidationError("krylov order must be at least 2")
    if isinstance(psi, Wavefunction):
        grid = psi.grid
        dv = grid.volume_element

        def dot(a, b):
            return np.vdot(a, b) * dv

        def matvec(a):
            return hamiltonian(Wavefunction(grid, a)).amplitudes

        amps = psi.amplitudes
        nrm = math.sqrt(float(np.real(dot(amps, amps))))
        if abs(nrm - 1.0) > 1e-6:
            raise ValidationError("input state must be normalized")
        out, _ = _lanczos_exp(matvec, amps / nrm, tau, order, dot)
        return Wavefunction(grid, out)
    arr = np.asarray(psi)
    nrm = float(np.linalg.norm(arr))
    if abs(nrm - 1.0) > 1e-6:
        raise ValidationError("input vector must be normalized")
    out, _ = _lanczos_exp(hamiltonian, arr / nrm, tau, order, np.vdot)
    return out


def _deflate(arr, basis, dot):
    """Two-pass projection of arr out of an orthonormal basis, renormalized."""
    in_norm = math.sqrt(float(np.real(dot(arr, arr))))
    if in_norm == 0.0:
        raise DegenerateInputError("cannot deflate the zero vector")
    for _ in range(2):
        for u in basis:
            arr = arr - dot(u, arr) * u
    out_norm = math.sqrt(float(np.real(dot(arr, arr))))
    if out_norm < 1e-12 * in_norm:
        raise DegenerateInputError("vector lies in the span of the basis")
    return arr / out_norm


def _guess_frequencies(potential, grid):
    """Per-axis harmonic widths and center from curvature at the minimum."""
    shaped = potential.reshape(grid.shape)
    kmin = np.unravel_index(int(np.argmin(shaped)), grid.shape)
    centers = []
    omegas = []
    for d, ax in enumerate(grid.axes):
        centers.append(ax.points[kmin[d]])
        cut = shaped[tuple(kmin[:d]) + (slice(None),) + tuple(kmin[d + 1:])]
        i = min(max(kmin[d], 1), ax.n_points - 2)
        curv = (cut[i - 1] - 2.0 * cut[i] + cut[i + 1]) / ax.spacing**2
        if curv > 0:
            omegas.append(math.sqrt(curv / ax.mass))
        else:
            # flat or concave cut: fall back to a width of a tenth of the box
            sigma = (ax.max - ax.min) / 10.0
            omegas.append(1.0 / (ax.mass * sigma**2))
    return centers, omegas


def _hermite_product(grid, ns, centers, omegas):
    """Product of per-axis harmonic eigenfunctions, as a flat array."""
    arr = np.ones(grid.shape)
    for d, ax in enumerate(grid.axes):
        line = hermite_gauss(ns[d], omegas[d], ax.mass, ax.points - centers[d])
        shape = [1] * len(grid.axes)
        shape[d] = ax.n_points
        arr = arr * line.reshape(shape)
    return arr.ravel()


def _initial_guesses(s: SurfaceSet, count: int):
    """Harmonic ladder guesses around the potential minimum, lowest first.

    With two molecular axes, pairs (a, b) vs (b, a) are combined into
    symmetric and antisymmetric guesses (symmetric first) so that both
    exchange sectors are seeded.
    """
    grid = s.grid
    centers, omegas = _guess_frequencies(s.potential, grid)
    ndim = len(grid.axes)
    two_r = ndim >= 2 and grid.axes[0].label == "r1" and grid.axes[1].label == "r2"

    nmax = max(3, count)
    ladder = []
    for flat in np.ndindex(*([nmax] * ndim)):
        ladder.append((sum((n + 0.5) * w for n, w in zip(flat, omegas)), flat))
    ladder.sort(key=lambda item: (item[0], item[1]))

    guesses = []
    for _, ns in ladder:
        if len(guesses) >= count:
            break
        if two_r and ns[0] > ns[1]:
            continue
        if two_r and ns[0] < ns[1]:
            a = _hermite_product(grid, ns, centers, omegas)
            b = _hermite_product(grid, (ns[1], ns[0]) + ns[2:], centers, omegas)
            guesses.append(a + b)
            guesses.append(a - b)
        else:
            guesses.append(_hermite_product(grid, ns, centers, omegas))
    return guesses


def relax_eigenstates(s: SurfaceSet, cfg: RelaxationConfig = RelaxationConfig()):
    """Relax the lowest eigenstates of kinetic + potential on the grid.

    Sequential imaginary-time relaxation with per-step deflation, stopped
    when the energy drift over 50 steps falls below the tolerance, followed
    by a Rayleigh-Ritz rotation of the converged span. Degenerate pairs
    (within 1e-9 hartree) are ordered bright-first by their transition
    dipole off the ground state, and each state's global sign makes its
    largest amplitude positive.
    """
    grid = s.grid
    dv = grid.volume_element
    pot = s.potential
    shape = grid.shape

    def matvec(a):
        return kinetic_on_array(a.reshape(shape), grid).ravel() + pot * a

    def dot(a, b):
        return np.vdot(a, b) * dv

    guesses = _initial_guesses(s, cfg.n_states + 8)
    converged = []
    for k in range(cfg.n_states):
        psi = None
        while guesses:
            try:
                psi = _deflate(guesses.pop(0), converged, dot)
                break
            except DegenerateInputError:
                continue
        if psi is None:
            raise NumericalError(f"ran out of independent start vectors at state {k}")

        window = []
        for step in range(cfg.max_steps):
            psi_new, e_now = _lanczos_exp(matvec, psi, cfg.dt_imag,
                                          cfg.krylov_order, dot)
            psi = _deflate(psi_new, converged, dot)
            window.append(e_now)
            if len(window) > 50 and abs(window[-1] - window[-51]) < cfg.energy_tol:
                break
        else:
            delta = abs(window[-1] - window[-51]) if len(window) > 50 else math.inf
            raise ConvergenceError(
                f"state {k} still drifting by {delta:.3e} hartree per 50 steps "
                f"after {cfg.max_steps} steps"
            )
        converged.append(psi)

    # Rayleigh-Ritz rotation inside the converged span: exact for whatever
    # near-degenerate mixing the sequential relaxation left behind.
    n = cfg.n_states
    applied = [matvec(v) for v in converged]
    hmat = np.empty((n, n))
    smat = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            hmat[i, j] = np.real(dot(converged[i], applied[j]))
            smat[i, j] = np.real(dot(converged[i], converged[j]))
    hmat = 0.5 * (hmat + hmat.T)
    smat = 0.5 * (smat + smat.T)
    energies, coef = scipy.linalg.eigh(hmat, smat)
    states = []
    for a in range(n):
        vec = coef[0, a] * converged[0]
        for j in range(1, n):
            vec = vec + coef[j, a] * converged[j]
        states.append(vec / math.sqrt(float(np.real(dot(vec, vec)))))

    for idx, arr in enumerate(states):
        leak = boundary_leak(Wavefunction(grid, arr))
        if leak > LEAK_LIMIT:
            raise BoundaryLeakError(
                f"state {idx} has edge amplitude {leak:.2e} of its peak; "
                "enlarge the grid box"
            )

    # order degenerate clusters bright-first, then fix global signs
    dip_flat = s.dipole
    mu = _dipole_matrix(np.stack(states), dip_flat, dv)
    order = _degenerate_bright_first(energies, np.abs(mu[0]))
    energies = energies[order]
    states = [states[i] for i in order]
    wavefunctions = []
    for arr in states:
        peak = int(np.argmax(np.abs(arr)))
        if arr[peak] < 0:
            arr = -arr
        wavefunctions.append(Wavefunction(grid, arr))
    mu = _dipole_matrix(np.stack([w.amplitudes for w in wavefunctions]),
                        dip_flat, dv)

    omega_ref = _reference_frequency(s, energies)
    partition = partition_manifolds(energies, omega_ref)
    metadata = dict(s.metadata)
    metadata["omega_ref_hartree"] = _FLOAT_FMT % omega_ref
    metadata["n_states"] = str(n)
    return EigenSolution(energies=energies, states=wavefunctions, dipoles=mu,
                         partition=partition, grid=grid, metadata=metadata)


def _reference_frequency(s: SurfaceSet, energies) -> float:
    """Cavity frequency from metadata; first excitation for field-free sets."""
    if s.variant is not SurfaceVariant.FIELD_FREE and "omega_c_cm" in s.metadata:
        return cm_to_hartree(float(s.metadata["omega_c_cm"]))
    if len(energies) < 2:
        raise PartitionError("need at least two states to set a reference frequency")
    return float(energies[1] - energies[0])


def _degenerate_bright_first(energies, brightness):
    """Stable order: ascending energy, ties (within 1e-9) by brightness."""
    order = list(range(len(energies)))
    start = 0
    while start < len(order):
        stop = start + 1
        while (stop < len(order)
               and energies[order[stop]] - energies[order[stop - 1]] < DEGENERACY_TOL):
            stop += 1
        cluster = order[start:stop]
        cluster.sort(key=lambda i: -brightness[i])
        order[start:stop] = cluster
        start = stop
    return np.array(order)


def _dipole_matrix(amps, dipole_surface, dv):
    mats = (amps.conj() * dipole_surface) @ amps.T * dv
    if np.iscomplexobj(mats):
        if np.max(np.abs(mats.imag)) > 1e-10:
            raise NumericalError("transition dipoles have imaginary residue")
        mats = mats.real
    return 0.5 * (mats + mats.T)


def transition_dipoles(states, dipole_surface) -> np.ndarray:
    """Matrix of <i| dipole |j> over orthonormal states; exactly symmetric."""
    if not states:
        raise ValidationError("need at least one state")
    dv = states[0].grid.volume_element
    flat = np.asarray(dipole_surface).reshape(-1)
    if flat.size != states[0].grid.total_points:
        raise ValidationError("dipole surface does not match the state grid")
    amps = np.stack([st.amplitudes for st in states])
    return _dipole_matrix(amps, flat, dv)


def partition_manifolds(energies, omega_ref: float) -> ManifoldPartition:
    """Classify states into ground / single / double excitation manifolds."""
    energies = np.asarray(energies, dtype=float)
    if energies.size < 2:
        raise PartitionError("need at least two states to partition")
    if np.any(np.diff(energies) < -DEGENERACY_TOL):
        raise ValidationError("energies must be ascending")
    if not omega_ref > 0:
        raise PartitionError(f"reference frequency must be positive, got {omega_ref}")
    x = (energies - energies[0]) / omega_ref
    e_set = tuple(i for i in range(1, energies.size)
                  if E_WINDOW[0] < x[i] < E_WINDOW[1])
    f_set = tuple(i for i in range(1, energies.size)
                  if F_WINDOW[0] < x[i] < F_WINDOW[1])
    if not e_set:
        raise PartitionError(
            "no states in the single-excitation window; check the reference "
            "frequency or raise n_states"
        )
    if not f_set:
        raise PartitionError(
            "no states in the double-excitation window; check the reference "
            "frequency or raise n_states"
        )
    classified = {0} | set(e_set) | set(f_set)
    unclassified = tuple(i for i in range(energies.size) if i not in classified)
    return ManifoldPartition(g=0, e_set=e_set, f_set=f_set,
                             omega_ref=float(omega_ref),
                             unclassified=unclassified)


def save_eigen_solution(sol: EigenSolution, path, include_states: bool = True):
    """Write energies, dipoles, and partition as text; states as a sidecar.

    The sidecar `<path>.wf` holds raw little-endian float64 amplitudes after
    a fixed 64-byte text header.
    """
    lines = ["#POLDQC-EIGEN v1"]
    for key, value in sol.metadata.items():
        lines.append(f"#{key}={value}")
    for ax in sol.grid.axes:
        lines.append(
            "#axis %s %d %s %s %s"
            % (ax.label, ax.n_points, _FLOAT_FMT % ax.min,
               _FLOAT_FMT % ax.max, _FLOAT_FMT % ax.mass)
        )
    lines.append("#energies_hartree")
    for e in sol.energies:
        lines.append("%.16e" % e)
    lines.append("#dipoles_au")
    for row in sol.dipoles:
        lines.append(" ".join("%.16e" % v for v in row))
    part = sol.partition
    lines.append(
        "#partition g=%d e=%s f=%s"
        % (part.g, ",".join(map(str, part.e_set)), ",".join(map(str, part.f_set)))
    )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")

    if include_states and sol.states:
        header = f"POLDQC-WF v1 {len(sol.states)} {sol.grid.total_points}"
        blob = header.encode("ascii").ljust(64)
        amps = np.stack([np.real(st.amplitudes) for st in sol.states])
        with open(str(path) + ".wf", "wb") as fh:
            fh.write(blob)
            fh.write(amps.astype("<f8").tobytes())


def _parse_int_list(text: str) -> tuple:
    return tuple(int(tok) for tok in text.split(",") if tok != "")


def load_eigen_solution(path) -> EigenSolution:
    """Read an eigen result; pulls states from `<path>.wf` when present."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "#POLDQC-EIGEN v1":
        raise ParseError("expected header '#POLDQC-EIGEN v1'", path=path, line=1)

    metadata: dict = {}
    axes = []
    energies = []
    dipole_rows = []
    partition_line = None
    section = None
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#axis "):
            parts = line.split()
            if len(parts) != 6:
                raise ParseError("axis line needs label, n, min, max, mass",
                                 path=path, line=lineno)
            try:
                axes.append(Axis(label=parts[1], n_points=int(parts[2]),
                                 min=float(parts[3]), max=float(parts[4]),
                                 mass=float(parts[5])))
            except ValueError as err:
                raise ParseError(f"bad axis value: {err}", path=path,
                                 line=lineno) from err
        elif line == "#energies_hartree":
            section = "energies"
        elif line == "#dipoles_au":
            section = "dipoles"
        elif line.startswith("#partition "):
            partition_line = (line, lineno)
            section = None
        elif line.startswith("#") and "=" in line:
            key, _, value = line[1:].partition("=")
            metadata[key] = value
        elif line.startswith("#"):
            raise ParseError(f"unrecognized header line {line!r}", path=path,
                             line=lineno)
        elif section == "energies":
            try:
                energies.append(float(line))
            except ValueError as err:
                raise ParseError(f"bad energy: {err}", path=path,
                                 line=lineno) from err
        elif section == "dipoles":
            try:
                dipole_rows.append([float(tok) for tok in line.split()])
            except ValueError as err:
                raise ParseError(f"bad dipole row: {err}", path=path,
                                 line=lineno) from err
        elif line.strip():
            raise ParseError(f"unexpected line {line!r}", path=path, line=lineno)

    if not axes:
        raise ParseError("no #axis lines found", path=path, line=2)
    if not energies:
        raise ParseError("missing #energies_hartree block", path=path, line=2)
    n = len(energies)
    if len(dipole_rows) != n or any(len(row) != n for row in dipole_rows):
        raise ParseError(f"dipole block must be {n} rows of {n} values",
                         path=path, line=2)
    if partition_line is None:
        raise ParseError("missing #partition line", path=path, line=len(lines))
    if "omega_ref_hartree" not in metadata:
        raise ParseError("metadata is missing omega_ref_hartree", path=path, line=2)

    text, lineno = partition_line
    fields = dict(tok.split("=", 1) for tok in text[len("#partition "):].split())
    try:
        g = int(fields["g"])
        e_set = _parse_int_list(fields["e"])
        f_set = _parse_int_list(fields["f"])
    except (KeyError, ValueError) as err:
        raise ParseError(f"bad partition line: {err}", path=path,
                         line=lineno) from err
    omega_ref = float(metadata["omega_ref_hartree"])
    energies_arr = np.array(energies)
    classified = {g} | set(e_set) | set(f_set)
    unclassified = tuple(i for i in range(n) if i not in classified)
    partition = ManifoldPartition(g=g, e_set=e_set, f_set=f_set,
                                  omega_ref=omega_ref, unclassified=unclassified)

    grid = ProductGrid(axes)
    states = []
    sidecar = str(path) + ".wf"
    if os.path.exists(sidecar):
        with open(sidecar, "rb") as fh:
            header = fh.read(64).decode("ascii", errors="replace").strip()
            parts = header.split()
            if parts[:2] != ["POLDQC-WF", "v1"] or len(parts) != 4:
                raise ParseError("bad wavefunction sidecar header", path=sidecar,
                                 line=1)
            n_states, total = int(parts[2]), int(parts[3])
            if n_states != n or total != grid.total_points:
                raise ParseError(
                    f"sidecar shape {n_states}x{total} does not match "
                    f"{n}x{grid.total_points}", path=sidecar, line=1)
            raw = np.frombuffer(fh.read(), dtype="<f8")
            if raw.size != n_states * total:
                raise ParseError(
                    f"sidecar holds {raw.size} values, expected "
                    f"{n_states * total}", path=sidecar, line=1)
            for k in range(n_states):
                states.append(Wavefunction(grid, raw[k * total:(k + 1) * total].copy()))

    return EigenSolution(energies=energies_arr, states=states,
                         dipoles=np.array(dipole_rows), partition=partition,
                         grid=grid, metadata=metadata)
