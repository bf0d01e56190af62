"""Fit a Morse oscillator to two transition frequencies and check the solver.

The model diatomic is pinned by its fundamental (4281 1/cm) and first hot
band (4108 1/cm). Those two numbers fix the harmonic frequency and the
anharmonicity exactly, so every analytic level is known in closed form and
the grid eigensolver can be judged against them digit by digit.
"""

import time

import numpy as np

from poldqc import (
    fit_morse_to_transitions,
    hartree_to_cm,
    molecular_eigenstates_1d,
    morse_levels,
)
from poldqc.grids import Axis

HF_MASS = 1744.59
OMEGA_1 = 4281.0
OMEGA_2 = 4108.0

morse = fit_morse_to_transitions(OMEGA_1, OMEGA_2, HF_MASS)
print("Morse model fitted to the two lowest transitions")
print(f"  omega_e   = {hartree_to_cm(morse.omega_e):10.3f} 1/cm")
print(f"  omega_exe = {hartree_to_cm(morse.omega_exe):10.3f} 1/cm")
print(f"  re        = {morse.re:10.4f} bohr")
print(f"  bound states supported: {morse.n_bound}")
print()

axis = Axis("r1", 96, morse.re - 1.05, morse.re + 1.8, morse.mass)
start = time.perf_counter()
functions, energies = molecular_eigenstates_1d(morse, axis, 5)
elapsed = time.perf_counter() - start
exact = morse_levels(morse, 4)

print(f"solved 5 states on a {axis.n_points}-point grid in {elapsed:.2f} s")
print(f"{'v':>3} {'solved 1/cm':>14} {'analytic 1/cm':>14} {'error':>12}")
for v in range(5):
    solved = hartree_to_cm(float(energies[v]))
    ref = hartree_to_cm(float(exact[v]))
    print(f"{v:>3} {solved:>14.4f} {ref:>14.4f} {solved - ref:>12.2e}")
print()

gap_10 = hartree_to_cm(float(energies[1] - energies[0]))
gap_20 = hartree_to_cm(float(energies[2] - energies[0]))
delta = 2.0 * gap_10 - gap_20
print(f"fundamental      E1 - E0   = {gap_10:9.3f} 1/cm")
print(f"overtone         E2 - E0   = {gap_20:9.3f} 1/cm")
print(f"anharmonicity    2(E1-E0) - (E2-E0) = {delta:7.3f} 1/cm")
print()
print("the 173 1/cm anharmonic defect is what a double quantum coherence")
print("spectrum resolves; a perfectly harmonic ladder would cancel exactly.")

turning = axis.points[np.argmax(np.abs(functions[2]))]
print(f"(v=2 amplitude peaks near r = {turning:.3f} bohr, outside re,")
print(" as expected for an anharmonic outer turning point)")
