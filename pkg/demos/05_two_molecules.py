"""Two molecules in one cavity: dark states and collective DQC structure.

The coupling constant is divided by sqrt(N) internally, so the first
Rabi splitting stays at its calibrated value while the state count
grows: the single-excitation manifold gains a dark antisymmetric
combination pinned at the field-free fundamental, and the
double-excitation manifold holds six states, three of them polaritonic.
The uncoupled two-molecule control at the end shows the combination
band cancel out of the DQC response, the signature that separates
genuine collective coupling from two molecules that merely share a
spectrum.

Runtime is a few minutes; the three-dimensional solves dominate.
"""

import dataclasses
import time

import numpy as np

from poldqc import (
    Axis,
    CavityMode,
    DipoleModel,
    FrequencyAxis,
    ProductGrid,
    RelaxationConfig,
    SurfaceVariant,
    build_bare_basis,
    build_surface_set,
    cm_to_hartree,
    compute_dqc,
    decompose,
    find_peaks,
    fit_morse_to_transitions,
    format_decomposition_table,
    hartree_to_cm,
    normalize_spectrum,
    relax_eigenstates,
)

morse = fit_morse_to_transitions(4281.0, 4108.0, 1744.59)
dipole = DipoleModel()


def solve_pair(cavity):
    grid = ProductGrid((
        Axis("r1", 48, morse.re - 1.05, morse.re + 1.8, morse.mass),
        Axis("r2", 48, morse.re - 1.05, morse.re + 1.8, morse.mass),
        Axis("qc", 32, -50.0, 50.0, 1.0),
    ))
    surface = build_surface_set(grid, morse, dipole, cavity,
                                SurfaceVariant.FULL)
    start = time.perf_counter()
    sol = relax_eigenstates(surface, RelaxationConfig(
        n_states=11, dt_imag=25.0, energy_tol=1e-9))
    print(f"(solved 11 states on {grid.shape} in "
          f"{time.perf_counter() - start:.0f} s)")
    return grid, sol


coupled_cavity = CavityMode(omega_c=cm_to_hartree(4281.0), lambda0=0.03,
                            n_mol=2)
print("coupled pair, cavity resonant, lambda scaled by 1/sqrt(2):")
grid, sol = solve_pair(coupled_cavity)

part = sol.partition
gaps = [hartree_to_cm(float(e - sol.energies[part.g]))
        for e in sol.energies]
basis = build_bare_basis(2, 2, 2, grid, morse, coupled_cavity)
table = decompose(sol, basis)
print(format_decomposition_table(table))
print()

labels = list(table.row_labels)
order = [part.g] + sorted(part.e_set) + sorted(part.f_set)
lp1 = gaps[order[labels.index("LP(1)")]]
up1 = gaps[order[labels.index("UP(1)")]]
d1 = gaps[order[labels.index("d1")]]
print(f"Rabi splitting UP(1) - LP(1) = {up1 - lp1:.2f} 1/cm "
      "(same as one molecule)")
print(f"dark state d1 at {d1:.2f}, the field-free fundamental; its")
mu = np.abs(sol.dipoles)
print(f"transition dipole from the ground state is "
      f"{mu[part.g, order[labels.index('d1')]]:.2e} "
      f"(brightest: {np.max(mu):.2e})")
print()

ax2 = FrequencyAxis(8200.0, 1.0, 601)
ax3 = FrequencyAxis(4000.0, 1.0, 451)
peaks = find_peaks(normalize_spectrum(compute_dqc(sol, 10.0, ax2, ax3)),
                   0.02, sol)
print(f"DQC peaks above 2% of max ({len(peaks)} found, strongest first):")
for p in peaks[:10]:
    print(f"  Omega2 = {p.omega2:8.2f}  Omega3 = {p.omega3:8.2f}  "
          f"mag = {p.magnitude:.3f}  [{p.assignment}]")
print("four Omega2 columns carry signal: the molecular overtone plus")
print("LP(2), MP(2), UP(2); the dark combinations stay silent.")
print()

print("uncoupled control, lambda0 = 0, cavity detuned to 4000:")
control_cavity = CavityMode(omega_c=cm_to_hartree(4000.0), lambda0=0.0,
                            n_mol=2)
_, control = solve_pair(control_cavity)
cpart = control.partition
cgaps = [hartree_to_cm(float(e - control.energies[cpart.g]))
         for e in control.energies]
bright = max(cpart.e_set, key=lambda e: abs(control.dipoles[cpart.g, e]))
combination = min(cpart.f_set,
                  key=lambda f: abs(cgaps[f] - 2.0 * cgaps[bright]))
print(f"combination state |11,0> sits at {cgaps[combination]:.2f}, exactly "
      f"twice the fundamental {cgaps[bright]:.2f}")

kept = tuple(f for f in cpart.f_set if f != combination)
pruned = dataclasses.replace(
    control, partition=dataclasses.replace(cpart, f_set=kept))
full_map = compute_dqc(control, 10.0, ax2, ax3).values
pruned_map = compute_dqc(pruned, 10.0, ax2, ax3).values
leak = np.max(np.abs(full_map - pruned_map)) / np.max(np.abs(full_map))
print(f"its contribution to the DQC response: {leak:.2e} of the maximum;")
print("the two pathways through it interfere destructively, so only the")
print("anharmonically shifted pair states survive without coupling.")
