"""Compare the coupling variants through their DQC difference spectra.

The same molecule and cavity are solved four ways: the full
self-consistent surface with dipole self-energy, the linearized coupling
without the quadratic term, the frozen-expectation model, and the
uncoupled reference. Difference maps between normalized spectra expose
what each approximation misses; the difference of a spectrum with itself
is identically zero, which is the sanity anchor for the whole exercise.
"""

import numpy as np

from poldqc import (
    Axis,
    CavityMode,
    DipoleModel,
    FrequencyAxis,
    ProductGrid,
    RelaxationConfig,
    SurfaceVariant,
    build_surface_set,
    cm_to_hartree,
    compute_dqc,
    difference_spectrum,
    find_peaks,
    fit_morse_to_transitions,
    normalize_spectrum,
    relax_eigenstates,
)

morse = fit_morse_to_transitions(4281.0, 4108.0, 1744.59)
dipole = DipoleModel()
cavity = CavityMode(omega_c=cm_to_hartree(4281.0), lambda0=0.03, n_mol=1)
grid = ProductGrid((
    Axis("r1", 64, morse.re - 1.05, morse.re + 1.8, morse.mass),
    Axis("qc", 48, -50.0, 50.0, 1.0),
))
ax2 = FrequencyAxis(8200.0, 1.0, 601)
ax3 = FrequencyAxis(4000.0, 1.0, 451)

spectra = {}
tops = {}
for variant in SurfaceVariant:
    surface = build_surface_set(grid, morse, dipole, cavity, variant)
    sol = relax_eigenstates(surface, RelaxationConfig(
        n_states=8, dt_imag=25.0, energy_tol=1e-9))
    spectra[variant] = compute_dqc(sol, 10.0, ax2, ax3)
    tops[variant] = find_peaks(normalize_spectrum(spectra[variant]), 0.05)[0]

print("strongest DQC peak per variant:")
for variant, p in tops.items():
    print(f"  {variant.value:>6}: Omega2 = {p.omega2:8.2f}  "
          f"Omega3 = {p.omega3:8.2f}")
print()

full = spectra[SurfaceVariant.FULL]
for other in (SurfaceVariant.LINEAR, SurfaceVariant.ETC,
              SurfaceVariant.FIELD_FREE):
    delta = difference_spectrum(full, spectra[other])
    shift = tops[SurfaceVariant.FULL].omega2 - tops[other].omega2
    print(f"full vs {other.value:>6}: max|difference| = "
          f"{np.max(np.abs(delta)):.4f} of unit peak, strongest-peak "
          f"Omega2 shift = {shift:+.2f} 1/cm")

self_delta = difference_spectrum(full, full)
print(f"full vs   full: max|difference| = {np.max(np.abs(self_delta)):.1f} "
      "(identically zero)")
print()
print("the full surface sits red of the frozen-expectation model along")
print("Omega2: the self-consistent response relaxes the doubly excited")
print("states, and the difference map keeps the sign of that shift.")
