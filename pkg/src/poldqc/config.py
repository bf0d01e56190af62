"""Run configuration: a line-based ``key = value`` file with ``[section]``
headers, every key unit-suffixed, unknown keys rejected with line numbers.

A minimal file is empty: every key has a documented default, chosen so that
the defaults describe the resonant single-molecule setup (cavity at the
fundamental, coupling 0.03, desk-scale grid). The parsed result is a
:class:`RunConfig` carrying validated domain objects from the owning
modules, plus the resolved raw values so a run manifest can echo the
effective configuration exactly.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .dqc import FrequencyAxis
from .eigen import RelaxationConfig
from .errors import ParseError, ValidationError
from .grids import Axis, ProductGrid
from .model import (
    HF_BOND_LENGTH,
    HF_REDUCED_MASS,
    CavityMode,
    DipoleModel,
    MorseParams,
    SurfaceVariant,
    fit_morse_to_transitions,
    mecke_from_linear,
)
from .units import cm_to_hartree

__all__ = [
    "GridSpec",
    "RunConfig",
    "apply_preset",
    "echo_config",
    "parse_config",
    "PRESETS",
]

_CALIBRATED_SLOPE = DipoleModel.slope

# (type, default) per key; None defaults are derived after parsing.
_SCHEMA = {
    "molecule": {
        "omega1_cm": (float, 4281.0),
        "omega2_cm": (float, 4108.0),
        "mass_au": (float, HF_REDUCED_MASS),
        "re_bohr": (float, HF_BOND_LENGTH),
        "dipole_form": (str, "linear"),
        "dipole_mu0_au": (float, 0.71),
        "dipole_slope_au": (float, _CALIBRATED_SLOPE),
        "electronic_gap_au": (float, 0.35),
        "electronic_dipole_au": (float, 0.35),
    },
    "cavity": {
        "omega_c_cm": (float, 4281.0),
        "lambda0": (float, 0.03),
        "n_mol": (int, 1),
    },
    "grid": {
        "r_points": (int, 96),
        "r_min_bohr": (float, None),
        "r_max_bohr": (float, None),
        "qc_points": (int, 48),
        "qc_min_au": (float, -50.0),
        "qc_max_au": (float, 50.0),
    },
    "solver": {
        "n_states": (int, 10),
        "dt_imag_au": (float, 25.0),
        "krylov_order": (int, 10),
        "energy_tol_ha": (float, 1e-9),
        "max_steps": (int, 20000),
    },
    "spectrum": {
        "gamma_cm": (float, 10.0),
        "omega2_start_cm": (float, 8200.0),
        "omega2_step_cm": (float, 1.0),
        "omega2_points": (int, 601),
        "omega3_start_cm": (float, 4000.0),
        "omega3_step_cm": (float, 1.0),
        "omega3_points": (int, 451),
    },
    "run": {
        "variant": (str, "full"),
    },
}

# The default r window brackets the Morse well: about one de Broglie
# wavelength below re and far enough up the soft wall for two quanta.
_R_BELOW = 1.05
_R_ABOVE = 1.8

PRESETS = {
    "desk": {"r_points": 96, "qc_points": 48},
    "paper": {"r_points": 128, "qc_points": 64},
}


@dataclass(frozen=True)
class GridSpec:
    """Per-axis point counts and windows, before masses are attached."""

    r_points: int
    r_min: float
    r_max: float
    qc_points: int
    qc_min: float
    qc_max: float

    def build(self, morse: MorseParams, n_mol: int) -> ProductGrid:
        """Product grid with one r axis per molecule plus the photon axis."""
        axes = [
            Axis(f"r{i + 1}", self.r_points, self.r_min, self.r_max,
                 morse.mass)
            for i in range(n_mol)
        ]
        axes.append(Axis("qc", self.qc_points, self.qc_min, self.qc_max, 1.0))
        return ProductGrid(axes)


@dataclass(frozen=True)
class RunConfig:
    """Validated run settings plus the resolved raw key values."""

    morse: MorseParams
    dipole: DipoleModel
    cavity: CavityMode
    grid: GridSpec
    solver: RelaxationConfig
    gamma_cm: float
    omega2: FrequencyAxis
    omega3: FrequencyAxis
    variant: SurfaceVariant
    resolved: dict


def _strip_unit(key: str) -> str:
    for suffix in ("_cm", "_au", "_bohr", "_ha"):
        if key.endswith(suffix):
            return key[: -len(suffix)]
    return key


def _suggest(section: str, key: str) -> str:
    base = _strip_unit(key)
    for known in _SCHEMA[section]:
        if _strip_unit(known) == base:
            return f" (unit suffix mismatch: expected {known!r})"
    return ""


def _convert(kind, raw: str, path, lineno: int, key: str):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
            return value
        return raw
    except ValueError:
        want = "an integer" if kind is int else "a number"
        raise ParseError(f"value for {key!r} must be {want}, got {raw!r}",
                         path=path, line=lineno) from None


def parse_config(path) -> RunConfig:
    """Read a config file, fill defaults, and build the domain objects.

    Raises ParseError with the offending line number for format problems
    (unknown sections or keys, duplicates, bad literals) and ValidationError
    for values the domain objects reject (negative coupling, shrinking
    level spacings, and so on).
    """
    path = Path(path)
    seen: dict[tuple, object] = {}
    section = None
    for lineno, rawline in enumerate(path.read_text().splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                known = ", ".join(_SCHEMA)
                raise ParseError(
                    f"unknown section [{section}]; sections are {known}",
                    path=path, line=lineno)
            continue
        if "=" not in line:
            raise ParseError("expected 'key = value' or a [section] header",
                             path=path, line=lineno)
        if section is None:
            raise ParseError("key outside any [section]", path=path,
                             line=lineno)
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _SCHEMA[section]:
            raise ParseError(
                f"unknown key {key!r} in [{section}]{_suggest(section, key)}",
                path=path, line=lineno)
        if not raw:
            raise ParseError(f"empty value for {key!r}", path=path,
                             line=lineno)
        if (section, key) in seen:
            raise ParseError(f"duplicate key {key!r} in [{section}]",
                             path=path, line=lineno)
        kind, _ = _SCHEMA[section][key]
        value = _convert(kind, raw, path, lineno, key)
        if (section, key) == ("run", "variant"):
            try:
                SurfaceVariant(value)
            except ValueError:
                names = ", ".join(v.value for v in SurfaceVariant)
                raise ParseError(
                    f"unknown variant {value!r}; choose from {names}",
                    path=path, line=lineno) from None
        seen[(section, key)] = value

    return _from_resolved(_fill_defaults(seen))


def _fill_defaults(seen: dict) -> dict:
    resolved: dict = {name: {} for name in _SCHEMA}
    for name, keys in _SCHEMA.items():
        for key, (_, default) in keys.items():
            resolved[name][key] = seen.get((name, key), default)
    re = resolved["molecule"]["re_bohr"]
    if resolved["grid"]["r_min_bohr"] is None:
        resolved["grid"]["r_min_bohr"] = re - _R_BELOW
    if resolved["grid"]["r_max_bohr"] is None:
        resolved["grid"]["r_max_bohr"] = re + _R_ABOVE
    return resolved


def _from_resolved(resolved: dict) -> RunConfig:
    mol = resolved["molecule"]
    morse = fit_morse_to_transitions(mol["omega1_cm"], mol["omega2_cm"],
                                     mol["mass_au"], re=mol["re_bohr"])
    dipole = DipoleModel(
        form="linear",
        mu0=mol["dipole_mu0_au"],
        slope=mol["dipole_slope_au"],
        re=mol["re_bohr"],
        delta_e=mol["electronic_gap_au"],
        d_trans=mol["electronic_dipole_au"],
    )
    if mol["dipole_form"] == "mecke":
        dipole = mecke_from_linear(dipole)
    elif mol["dipole_form"] != "linear":
        raise ValidationError(
            f"dipole_form must be 'linear' or 'mecke', got {mol['dipole_form']!r}")

    cav = resolved["cavity"]
    cavity = CavityMode(omega_c=cm_to_hartree(cav["omega_c_cm"]),
                        lambda0=cav["lambda0"], n_mol=cav["n_mol"])

    g = resolved["grid"]
    if not g["r_min_bohr"] < g["r_max_bohr"]:
        raise ValidationError("grid needs r_min_bohr < r_max_bohr")
    if not g["qc_min_au"] < g["qc_max_au"]:
        raise ValidationError("grid needs qc_min_au < qc_max_au")
    grid = GridSpec(g["r_points"], g["r_min_bohr"], g["r_max_bohr"],
                    g["qc_points"], g["qc_min_au"], g["qc_max_au"])

    s = resolved["solver"]
    solver = RelaxationConfig(n_states=s["n_states"], dt_imag=s["dt_imag_au"],
                              krylov_order=s["krylov_order"],
                              energy_tol=s["energy_tol_ha"],
                              max_steps=s["max_steps"])

    sp = resolved["spectrum"]
    omega2 = FrequencyAxis(sp["omega2_start_cm"], sp["omega2_step_cm"],
                           sp["omega2_points"])
    omega3 = FrequencyAxis(sp["omega3_start_cm"], sp["omega3_step_cm"],
                           sp["omega3_points"])

    return RunConfig(
        morse=morse, dipole=dipole, cavity=cavity, grid=grid, solver=solver,
        gamma_cm=sp["gamma_cm"], omega2=omega2, omega3=omega3,
        variant=SurfaceVariant(resolved["run"]["variant"]),
        resolved=resolved,
    )


def default_config() -> RunConfig:
    """The all-defaults configuration (resonant single molecule)."""
    return _from_resolved(_fill_defaults({}))


def apply_preset(cfg: RunConfig, preset: str) -> RunConfig:
    """Replace the grid point counts with a named preset's."""
    if preset not in PRESETS:
        names = ", ".join(PRESETS)
        raise ValidationError(f"unknown preset {preset!r}; choose from {names}")
    resolved = {name: dict(block) for name, block in cfg.resolved.items()}
    resolved["grid"].update(PRESETS[preset])
    return _from_resolved(resolved)


def set_variant(cfg: RunConfig, variant: str) -> RunConfig:
    """Replace the surface variant (CLI override of the [run] block)."""
    try:
        SurfaceVariant(variant)
    except ValueError:
        names = ", ".join(v.value for v in SurfaceVariant)
        raise ValidationError(
            f"unknown variant {variant!r}; choose from {names}") from None
    resolved = {name: dict(block) for name, block in cfg.resolved.items()}
    resolved["run"]["variant"] = variant
    return _from_resolved(resolved)


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(cfg: RunConfig) -> str:
    """The effective configuration as a parseable config file."""
    lines = []
    for name in _SCHEMA:
        lines.append(f"[{name}]")
        for key in _SCHEMA[name]:
            lines.append(f"{key} = {_format_value(cfg.resolved[name][key])}")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"
