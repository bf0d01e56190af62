"""Uncoupled product states and projections of coupled eigenstates.

The bare basis consists of products of 1D molecular vibrational states with
analytic photon levels. For two molecules the local vibrations are combined
into symmetric and antisymmetric normal modes before tensoring with the
photon factor. Projecting a coupled solution onto this basis yields the
weight table that identifies polaritons, dark states, and leftover mixtures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigen import EigenSolution, RelaxationConfig, relax_eigenstates
from .errors import BoundaryLeakError, ValidationError
from .grids import Axis, ProductGrid, Wavefunction, hermite_gauss, normalize
from .model import CavityMode, MorseParams, SurfaceSet, SurfaceVariant, morse_potential
from .units import hartree_to_cm

# weight thresholds for naming the rows of a decomposition table
DARK_THRESHOLD = 0.5
PURE_THRESHOLD = 0.75
POLARITON_THRESHOLD = 0.4


@dataclass(frozen=True)
class BareState:
    """One uncoupled product state on the full grid.

    label      "|v,n>" for one molecule, "|vsva,n>" for two
    quanta     (v,) or (v_s, v_a) vibrational quantum numbers
    n_photon   photon level
    function   normalized Wavefunction on the product grid
    energy     sum of the 1D molecular energies and (n + 1/2) omega_c, hartree
    """

    label: str
    quanta: tuple
    n_photon: int
    function: Wavefunction
    energy: float

    @property
    def exchange_odd(self) -> bool:
        """True when the state flips sign under molecule exchange.

        Pure antisymmetric-mode kets |0 v_a, n> carry the minus-sign local
        combination; everything else in the supported set, including the
        local product |11, n>, is exchange-even.
        """
        return len(self.quanta) == 2 and self.quanta[0] == 0 and self.quanta[1] > 0


@dataclass
class DecompositionTable:
    """Squared projections of coupled states onto the bare basis.

    row_labels  coupled-state names (g, LP(1), d1, bare kets, mixed...)
    col_labels  bare-state labels in basis order
    weights     (n_rows, n_cols) array of |c|^2 values
    residuals   per row, 1 - sum of the row's weights
    energies    coupled-state energies in row order, hartree
    """

    row_labels: tuple
    col_labels: tuple
    weights: np.ndarray
    residuals: np.ndarray
    energies: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.residuals = np.asarray(self.residuals, dtype=float)
        self.energies = np.asarray(self.energies, dtype=float)
        shape = (len(self.row_labels), len(self.col_labels))
        if self.weights.shape != shape:
            raise ValidationError(f"weight table must have shape {shape}")
        if self.residuals.shape != (shape[0],) or self.energies.shape != (shape[0],):
            raise ValidationError("need one residual and one energy per row")
        if self.weights.min() < 0.0 or self.weights.max() > 1.0 + 1e-9:
            raise ValidationError("squared coefficients must lie in [0, 1]")
        if np.any(self.weights.sum(axis=1) > 1.0 + 1e-9):
            raise ValidationError("row sums exceed 1: projections are inconsistent")
        if np.any(self.weights.sum(axis=0) > 1.0 + 1e-9):
            raise ValidationError("column sums exceed 1: states are not orthonormal")
        if np.max(np.abs(1.0 - self.weights.sum(axis=1) - self.residuals)) > 1e-9:
            raise ValidationError("residuals disagree with the row sums")


def molecular_eigenstates_1d(morse: MorseParams, axis: Axis, n_v: int):
    """Lowest n_v vibrational eigenfunctions of the 1D Morse oscillator.

    Returns (functions, energies): a list of grid-normalized 1D arrays and
    the matching energies in hartree. Phases are fixed positive at the outer
    classical turning point so coefficients, not just their squares, are
    reproducible.
    """
    if n_v < 1:
        raise ValidationError("need at least one vibrational state")
    if n_v > morse.n_bound:
        raise ValidationError(
            f"requested {n_v} states but the well holds only {morse.n_bound}"
        )
    if axis.mass != morse.mass:
        raise ValidationError(
            f"axis mass {axis.mass} disagrees with the Morse mass {morse.mass}"
        )
    grid = ProductGrid((Axis("r1", axis.n_points, axis.min, axis.max, axis.mass),))
    surface = SurfaceSet(
        grid=grid,
        variant=SurfaceVariant.FIELD_FREE,
        potential=morse_potential(grid.axes[0].points, morse),
        dipole=np.zeros(axis.n_points),
        metadata={"variant": "free", "source": "bare molecular ladder"},
    )
    # solve a couple of extra states so the manifold classification inside
    # the relaxation always sees a single and a double excitation
    n_solve = min(max(n_v, 3), morse.n_bound)
    cfg = RelaxationConfig(n_states=n_solve, dt_imag=25.0, energy_tol=1e-10)
    sol = relax_eigenstates(surface, cfg)

    points = grid.axes[0].points
    functions = []
    for v in range(n_v):
        amps = sol.states[v].amplitudes.real.copy()
        ratio = min(max(float(sol.energies[v]) / morse.depth, 0.0), 1.0 - 1e-12)
        r_turn = morse.re - math.log(1.0 - math.sqrt(ratio)) / morse.a
        k = int(np.argmin(np.abs(points - r_turn)))
        if amps[k] < 0.0:
            amps = -amps
        functions.append(amps)
    return functions, sol.energies[:n_v].copy()


def photon_eigenfunction(n: int, omega_c: float, axis: Axis) -> np.ndarray:
    """Analytic photon level n on the given axis, grid-normalized.

    The displacement-coordinate oscillator has unit mass, so the ground
    state is a Gaussian of variance 1/(2 omega_c). The axis must extend to
    at least six of those widths on both sides.
    """
    if n < 0 or n > 4:
        raise ValidationError("photon levels are tabulated for n = 0..4")
    if not omega_c > 0:
        raise ValidationError("cavity frequency must be positive")
    sigma = 1.0 / math.sqrt(2.0 * omega_c)
    if axis.min > -6.0 * sigma or axis.max < 6.0 * sigma:
        raise BoundaryLeakError(
            f"axis [{axis.min}, {axis.max}] covers less than 6 ground-state "
            f"widths ({6.0 * sigma:.2f}) of the photon mode"
        )
    line = hermite_gauss(n, omega_c, 1.0, axis.points)
    return line / math.sqrt(np.sum(line * line) * axis.spacing)


def _two_mol_factors(v_s: int, v_a: int):
    """Local-mode contributions ((v1, v2, sign), ...) for a normal-mode ket."""
    if v_a == 0 and v_s == 0:
        return ((0, 0, 1.0),)
    if v_a == 0:
        return ((v_s, 0, 1.0), (0, v_s, 1.0))
    if v_s == 0:
        return ((v_a, 0, 1.0), (0, v_a, -1.0))
    if (v_s, v_a) == (1, 1):
        return ((1, 1, 1.0),)
    raise ValidationError(
        f"no symmetrized product defined for (v_s, v_a) = ({v_s}, {v_a})"
    )


def _enumerate_one(n_v_max: int, n_photon_max: int, total_cap: int):
    keys = []
    for v in range(n_v_max + 1):
        for n in range(n_photon_max + 1):
            if v + n <= total_cap:
                keys.append((v + n, n, v))
    keys.sort()
    return [(key[2], key[1]) for key in keys]


def _enumerate_two(n_v_max: int, n_photon_max: int, total_cap: int):
    keys = []
    for v_s in range(n_v_max + 1):
        for v_a in range(n_v_max + 1 - v_s):
            for n in range(n_photon_max + 1):
                if v_s + v_a + n > total_cap:
                    continue
                if v_a == 0:
                    rank = 0
                elif v_s == 0:
                    rank = 1
                else:
                    rank = 2
                keys.append((v_s + v_a + n, n, rank, v_a, v_s))
    keys.sort()
    return [(key[4], key[3], key[1]) for key in keys]


def build_bare_basis(
    n_mol: int,
    n_v_max: int,
    n_photon_max: int,
    grid: ProductGrid,
    morse: MorseParams,
    cavity: CavityMode,
):
    """Uncoupled product states |v, n> or |v_s v_a, n> on the full grid.

    States are enumerated with v_total <= n_v_max, n <= n_photon_max, and
    total quanta <= max(n_v_max, n_photon_max), ordered by total quanta,
    then photon number, then symmetric before antisymmetric before
    combination modes. With both caps at 2 this covers one-molecule
    {|0,0> ... |0,2>} (six states) and two-molecule {|00,0> ... |00,2>}
    (ten states).
    """
    if n_mol not in (1, 2):
        raise ValidationError("the bare basis supports one or two molecules")
    if cavity.n_mol != n_mol:
        raise ValidationError(
            f"cavity is configured for {cavity.n_mol} molecules, not {n_mol}"
        )
    if n_v_max < 0 or n_photon_max < 0:
        raise ValidationError("state caps must be nonnegative")
    if n_photon_max > 4:
        raise ValidationError("photon levels are tabulated for n = 0..4")
    if n_mol == 2 and n_v_max > 2:
        raise ValidationError(
            "symmetrized two-molecule labels are defined for at most "
            "two vibrational quanta"
        )
    labels = tuple(ax.label for ax in grid.axes)
    expected = ("r1", "qc") if n_mol == 1 else ("r1", "r2", "qc")
    if labels != expected:
        raise ValidationError(
            f"grid axes {labels} do not match the {expected} layout"
        )
    if n_mol == 2:
        r1, r2 = grid.axes[0], grid.axes[1]
        same = (
            r1.n_points == r2.n_points
            and r1.min == r2.min
            and r1.max == r2.max
            and r1.mass == r2.mass
        )
        if not same:
            raise ValidationError("the two molecular axes must be identical")

    mol_funcs, mol_energies = molecular_eigenstates_1d(
        morse, grid.axes[0], n_v_max + 1
    )
    qc_axis = grid.axes[-1]
    photon = [
        photon_eigenfunction(n, cavity.omega_c, qc_axis)
        for n in range(n_photon_max + 1)
    ]
    photon_energy = [(n + 0.5) * cavity.omega_c for n in range(n_photon_max + 1)]

    total_cap = max(n_v_max, n_photon_max)
    states = []
    if n_mol == 1:
        for v, n in _enumerate_one(n_v_max, n_photon_max, total_cap):
            arr = np.outer(mol_funcs[v], photon[n])
            states.append(
                BareState(
                    label=f"|{v},{n}>",
                    quanta=(v,),
                    n_photon=n,
                    function=normalize(Wavefunction(grid, arr.ravel())),
                    energy=float(mol_energies[v] + photon_energy[n]),
                )
            )
        return states

    for v_s, v_a, n in _enumerate_two(n_v_max, n_photon_max, total_cap):
        parts = _two_mol_factors(v_s, v_a)
        mol = np.zeros((grid.axes[0].n_points, grid.axes[1].n_points))
        for v1, v2, sign in parts:
            mol += sign * np.outer(mol_funcs[v1], mol_funcs[v2])
        if len(parts) > 1:
            mol /= math.sqrt(2.0)
        arr = mol[:, :, None] * photon[n][None, None, :]
        energy = (
            float(mol_energies[parts[0][0]] + mol_energies[parts[0][1]])
            + photon_energy[n]
        )
        states.append(
            BareState(
                label=f"|{v_s}{v_a},{n}>",
                quanta=(v_s, v_a),
                n_photon=n,
                function=normalize(Wavefunction(grid, arr.ravel())),
                energy=energy,
            )
        )
    return states


def _assign_polariton_labels(labels, polaritons, manifold):
    """Name an energy-ordered polariton group LP/MP/UP within one manifold."""
    count = len(polaritons)
    if count == 1:
        labels[polaritons[0]] = f"P({manifold})"
        return
    for place, idx in enumerate(polaritons):
        if place == 0:
            labels[idx] = f"LP({manifold})"
        elif place == count - 1:
            labels[idx] = f"UP({manifold})"
        elif count == 3:
            labels[idx] = f"MP({manifold})"
        else:
            labels[idx] = f"MP{place}({manifold})"


def _label_rows(weights, manifolds, basis):
    """Name coupled rows from their dominant bare-state content.

    Row 0 is always the ground state. Within each excitation manifold, a
    row is dark when at least half its weight sits on exchange-odd bare
    states, pure when a single bare state holds 0.75 or more, a polariton
    when the best match is at least 0.4, and mixed otherwise. Polaritons
    are ranked LP/MP/UP by energy inside their manifold; dark and mixed
    rows are numbered through the whole table in energy order.
    """
    odd_mask = np.array([b.exchange_odd for b in basis])
    labels = [None] * weights.shape[0]
    labels[0] = "g"
    dark_rows = []
    mixed_rows = []
    for manifold in (1, 2):
        polaritons = []
        for idx in range(1, weights.shape[0]):
            if manifolds[idx] != manifold:
                continue
            row = weights[idx]
            if odd_mask.any() and row[odd_mask].sum() >= DARK_THRESHOLD:
                dark_rows.append(idx)
            elif row.max() >= PURE_THRESHOLD:
                labels[idx] = basis[int(np.argmax(row))].label
            elif row.max() >= POLARITON_THRESHOLD:
                polaritons.append(idx)
            else:
                mixed_rows.append(idx)
        _assign_polariton_labels(labels, polaritons, manifold)
    for count, idx in enumerate(sorted(dark_rows)):
        labels[idx] = f"d{count + 1}"
    for count, idx in enumerate(sorted(mixed_rows)):
        labels[idx] = f"mixed{count + 1}"
    return tuple(labels)


def decompose(eig: EigenSolution, basis) -> DecompositionTable:
    """Project the classified coupled states onto the bare basis.

    Rows cover the ground state and the single- and double-excitation
    manifolds in energy order; columns follow the basis order. Unclassified
    eigenstates are left out of the table.
    """
    if not basis:
        raise ValidationError("bare basis is empty")
    if not eig.states:
        raise ValidationError("decomposition needs the stored wavefunctions")
    for bare in basis:
        if bare.function.grid != eig.grid:
            raise ValidationError("bare basis and eigenstates use different grids")

    part = eig.partition
    rows = [part.g] + sorted(part.e_set) + sorted(part.f_set)
    manifolds = [0] + [1] * len(part.e_set) + [2] * len(part.f_set)

    dv = eig.grid.volume_element
    bare_amps = np.stack([b.function.amplitudes for b in basis])
    coupled = np.stack([eig.states[j].amplitudes for j in rows])
    coefs = (bare_amps.conj() @ coupled.T) * dv
    weights = np.abs(coefs.T) ** 2

    labels = _label_rows(weights, manifolds, basis)
    return DecompositionTable(
        row_labels=labels,
        col_labels=tuple(b.label for b in basis),
        weights=weights,
        residuals=1.0 - weights.sum(axis=1),
        energies=eig.energies[rows],
    )


def format_decomposition_table(table: DecompositionTable) -> str:
    """Tab-separated table of squared weights, four decimals per value.

    The second column reports each state's energy above the ground row in
    1/cm; the last column is the weight missing from the listed basis.
    """
    header = ["state", "E_cm"] + list(table.col_labels) + ["residual"]
    lines = ["\t".join(header)]
    e0 = table.energies[0]
    for i, label in enumerate(table.row_labels):
        cells = [label, f"{hartree_to_cm(table.energies[i] - e0):.2f}"]
        cells += [f"{w:.4f}" for w in table.weights[i]]
        cells.append(f"{table.residuals[i]:.4f}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
