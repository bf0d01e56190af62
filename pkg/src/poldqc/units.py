"""Unit constants. Everything internal is atomic units (hbar = 1)."""

# 1 hartree in cm^-1 (CODATA); the only conversion the package ever applies.
HARTREE_TO_INVCM = 219474.6313632
INVCM_TO_HARTREE = 1.0 / HARTREE_TO_INVCM

# 1 amu in electron masses, used when quoting reduced masses.
AMU_TO_AU = 1822.888


def cm_to_hartree(x):
    return x * INVCM_TO_HARTREE


def hartree_to_cm(x):
    return x * HARTREE_TO_INVCM
