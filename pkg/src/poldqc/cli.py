"""Command-line pipeline: one command per stage, text artifacts, and a
run manifest next to every output.

Commands: calibrate, surface, solve, decompose, spectrum, diff, peaks.
Each command reads the documented file formats of the owning modules and
writes its primary output plus ``<out>.manifest.txt`` recording the
effective configuration, tool version, input and output digests, and
wall-clock time per stage. Reruns with identical inputs produce
byte-identical primary outputs; only the manifest timestamp and timings
vary.

Exit codes: 0 success, 2 parse errors (config or data files), 3 validation
errors, 4 convergence failures, 5 data-dependent numerical failures.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .basis import build_bare_basis, decompose, format_decomposition_table
from .config import (
    PRESETS,
    RunConfig,
    apply_preset,
    echo_config,
    parse_config,
    set_variant,
)
from .dqc import (
    compute_dqc,
    difference_spectrum,
    find_peaks,
    load_spectrum,
    normalize_spectrum,
    save_spectrum,
    spectrum_channels,
)
from .eigen import load_eigen_solution, relax_eigenstates, save_eigen_solution
from .errors import (
    ConvergenceError,
    NumericalError,
    ParseError,
    PoldqcError,
    ValidationError,
)
from .model import (
    SurfaceVariant,
    build_surface_set,
    calibrate_dipole_slope,
    load_surface_set,
    save_surface_set,
)

_FLOAT_FMT = "%.17g"

# Bare-basis caps used by the decompose command: two vibrational quanta and
# two photons span both excitation manifolds the spectra probe.
_N_V_MAX = 2
_N_PHOTON_MAX = 2

_CHANNELS = ("re", "im", "abs")


class StageClock:
    """Wall-clock bookkeeping; `current` names the stage for error reports."""

    def __init__(self):
        self.timings: list[tuple[str, float]] = []
        self.current: str | None = None

    @contextlib.contextmanager
    def stage(self, name: str):
        self.current = name
        start = time.perf_counter()
        yield
        self.timings.append((name, time.perf_counter() - start))
        self.current = None


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(command: str, out_path, cfg: RunConfig | None,
                    inputs, outputs, clock: StageClock) -> None:
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    lines = [
        "#POLDQC-MANIFEST v1",
        f"command = {command}",
        f"version = {__version__}",
        f"generated = {stamp}",
        "",
        "[config]",
    ]
    if cfg is None:
        lines.append("  (none)")
    else:
        lines += ["  " + text if text else "" for text in
                  echo_config(cfg).splitlines()]
    lines += ["", "[inputs]"]
    lines += [f"  {p} sha256 {_sha256(p)}" for p in inputs] or ["  (none)"]
    lines += ["", "[outputs]"]
    lines += [f"  {p} sha256 {_sha256(p)}" for p in outputs]
    lines += ["", "[timings]"]
    lines += [f"  {name} = {spent:.3f} s" for name, spent in clock.timings]
    Path(str(out_path) + ".manifest.txt").write_text("\n".join(lines) + "\n")


def _load_run_config(args) -> RunConfig | None:
    if getattr(args, "config", None) is None:
        return None
    cfg = parse_config(args.config)
    if getattr(args, "preset", None):
        cfg = apply_preset(cfg, args.preset)
    if getattr(args, "variant", None):
        cfg = set_variant(cfg, args.variant)
    return cfg


def _cmd_calibrate(args, clock: StageClock):
    cfg = _load_run_config(args)
    with clock.stage("calibrate"):
        grid = cfg.grid.build(cfg.morse, 1)
        fitted = calibrate_dipole_slope(args.target_cm, cfg.cavity,
                                        cfg.morse, cfg.dipole, grid=grid)
    with clock.stage("write"):
        text = (
            "#POLDQC-CALIBRATION v1\n"
            f"# dipole slope for a {repr(args.target_cm)} 1/cm polariton "
            "splitting\n"
            "# paste into a run config:\n"
            "[molecule]\n"
            f"dipole_slope_au = {repr(fitted.slope)}\n"
        )
        Path(args.out).write_text(text)
    return cfg, [args.config], [args.out]


def _cmd_surface(args, clock: StageClock):
    cfg = _load_run_config(args)
    with clock.stage("build"):
        grid = cfg.grid.build(cfg.morse, cfg.cavity.n_mol)
        surface = build_surface_set(grid, cfg.morse, cfg.dipole, cfg.cavity,
                                    cfg.variant)
    with clock.stage("write"):
        save_surface_set(surface, args.out)
    return cfg, [args.config], [args.out]


def _cmd_solve(args, clock: StageClock):
    cfg = _load_run_config(args)
    with clock.stage("load"):
        surface = load_surface_set(args.surface)
    with clock.stage("relax"):
        solution = relax_eigenstates(surface, cfg.solver)
    with clock.stage("write"):
        save_eigen_solution(solution, args.out)
    return cfg, [args.config, args.surface], [args.out]


def _cmd_decompose(args, clock: StageClock):
    cfg = _load_run_config(args)
    with clock.stage("load"):
        solution = load_eigen_solution(args.eigen)
    with clock.stage("basis"):
        basis = build_bare_basis(cfg.cavity.n_mol, _N_V_MAX, _N_PHOTON_MAX,
                                 solution.grid, cfg.morse, cfg.cavity)
    with clock.stage("decompose"):
        table = decompose(solution, basis)
    with clock.stage("write"):
        Path(args.out).write_text(format_decomposition_table(table))
    return cfg, [args.config, args.eigen], [args.out]


def _parse_channels(raw: str) -> tuple:
    picked = tuple(part.strip() for part in raw.split(",") if part.strip())
    if not picked or any(ch not in _CHANNELS for ch in picked):
        raise ParseError(
            f"--channels takes a comma-separated subset of "
            f"{', '.join(_CHANNELS)}; got {raw!r}")
    return picked


def _axis_header(name: str, axis) -> str:
    return (f"#{name} {_FLOAT_FMT % axis.start} {_FLOAT_FMT % axis.step} "
            f"{axis.n}")


def _write_field(path, spectrum, field: np.ndarray, kind: str,
                 extra: list) -> None:
    """Real-valued companion format for plot-ready channels and differences."""
    lines = [
        f"#POLDQC-{kind} v1",
        _axis_header("omega2_cm", spectrum.omega2),
        _axis_header("omega3_cm", spectrum.omega3),
    ]
    lines += extra
    lines.append("#columns omega2 omega3 value")
    w2 = spectrum.omega2.values
    w3 = spectrum.omega3.values
    for i in range(spectrum.omega2.n):
        for j in range(spectrum.omega3.n):
            lines.append(
                f"{_FLOAT_FMT % w2[i]} {_FLOAT_FMT % w3[j]} "
                f"{_FLOAT_FMT % field[i, j]}")
    Path(path).write_text("\n".join(lines) + "\n")


def _cmd_spectrum(args, clock: StageClock):
    cfg = _load_run_config(args)
    with clock.stage("load"):
        solution = load_eigen_solution(args.eigen)
    with clock.stage("compute"):
        spectrum = compute_dqc(solution, cfg.gamma_cm, cfg.omega2, cfg.omega3)
    outputs = [args.out]
    with clock.stage("write"):
        save_spectrum(spectrum, args.out)
        if args.channels:
            picked = _parse_channels(args.channels)
            fields = dict(zip(_CHANNELS, spectrum_channels(spectrum)))
            peak = float(np.max(np.abs(spectrum.values)))
            stem = Path(args.out).with_suffix("")
            for name in picked:
                target = stem.parent / f"{stem.name}.{name}.dat"
                extra = [f"#gamma_cm {_FLOAT_FMT % spectrum.gamma_cm}",
                         f"#normalization {_FLOAT_FMT % peak}",
                         f"#channel {name}"]
                _write_field(target, spectrum, fields[name], "CHANNEL", extra)
                outputs.append(target)
    return cfg, [args.config, args.eigen], outputs


def _cmd_diff(args, clock: StageClock):
    cfg = _load_run_config(args)
    with clock.stage("load"):
        first = load_spectrum(args.first)
        second = load_spectrum(args.second)
    with clock.stage("subtract"):
        delta = difference_spectrum(first, second)
    with clock.stage("write"):
        extra = [f"#gamma_a_cm {_FLOAT_FMT % first.gamma_cm}",
                 f"#gamma_b_cm {_FLOAT_FMT % second.gamma_cm}"]
        _write_field(args.out, first, delta, "DIFF", extra)
    inputs = [args.first, args.second]
    if args.config:
        inputs.insert(0, args.config)
    return cfg, inputs, [args.out]


def _cmd_peaks(args, clock: StageClock):
    cfg = _load_run_config(args)
    with clock.stage("load"):
        spectrum = load_spectrum(args.spectrum)
        if spectrum.normalization is None:
            spectrum = normalize_spectrum(spectrum)
        reference = None
        if args.eigen:
            reference = load_eigen_solution(args.eigen)
    with clock.stage("search"):
        peaks = find_peaks(spectrum, args.threshold, eig=reference)
    with clock.stage("write"):
        lines = ["#POLDQC-PEAKS v1",
                 f"#threshold {repr(args.threshold)}",
                 "omega2_cm\tomega3_cm\tmagnitude\tassignment"]
        for p in peaks:
            tag = p.assignment if p.assignment is not None else "-"
            lines.append(f"{p.omega2:.4f}\t{p.omega3:.4f}\t"
                         f"{p.magnitude:.6f}\t{tag}")
        Path(args.out).write_text("\n".join(lines) + "\n")
    inputs = [args.spectrum]
    if args.eigen:
        inputs.append(args.eigen)
    if args.config:
        inputs.insert(0, args.config)
    return cfg, inputs, [args.out]


_HANDLERS = {
    "calibrate": _cmd_calibrate,
    "surface": _cmd_surface,
    "solve": _cmd_solve,
    "decompose": _cmd_decompose,
    "spectrum": _cmd_spectrum,
    "diff": _cmd_diff,
    "peaks": _cmd_peaks,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poldqc",
        description="Double-quantum-coherence 2D infrared spectra of "
                    "vibrational polaritons, one pipeline stage per command.",
    )
    parser.add_argument("--version", action="version",
                        version=f"poldqc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")

    def common(sp, default_out, need_config=True):
        sp.add_argument("--config", required=need_config,
                        default=None, help="run configuration file")
        sp.add_argument("--out", default=default_out,
                        help=f"output path (default {default_out})")

    sp = sub.add_parser(
        "calibrate",
        help="fit the dipole slope to a target polariton splitting")
    common(sp, "calibration.txt")
    sp.add_argument("--target-cm", type=float, default=60.0,
                    help="target splitting in 1/cm (default 60)")
    sp.add_argument("--preset", choices=sorted(PRESETS),
                    help="override grid point counts")

    sp = sub.add_parser("surface",
                        help="build and save a cavity potential surface set")
    common(sp, "surface.dat")
    sp.add_argument("--variant",
                    choices=[v.value for v in SurfaceVariant],
                    help="override the configured surface variant")
    sp.add_argument("--preset", choices=sorted(PRESETS),
                    help="override grid point counts")

    sp = sub.add_parser("solve",
                        help="relax eigenstates on a saved surface set")
    sp.add_argument("surface", help="surface file from the surface command")
    common(sp, "eigen.dat")

    sp = sub.add_parser(
        "decompose",
        help="weight solved states over the symmetrized bare basis")
    sp.add_argument("eigen", help="eigenstate file from the solve command")
    common(sp, "decomposition.tsv")

    sp = sub.add_parser("spectrum",
                        help="compute the double-quantum 2D spectrum")
    sp.add_argument("eigen", help="eigenstate file from the solve command")
    common(sp, "spectrum.dat")
    sp.add_argument("--channels", default=None,
                    help="also write plot-ready files: "
                         "comma-separated subset of re,im,abs")

    sp = sub.add_parser(
        "diff", help="normalized magnitude difference of two spectra")
    sp.add_argument("first", help="spectrum file")
    sp.add_argument("second", help="spectrum file subtracted from the first")
    common(sp, "difference.dat", need_config=False)

    sp = sub.add_parser("peaks", help="locate and label spectral maxima")
    sp.add_argument("spectrum", help="spectrum file")
    sp.add_argument("eigen", nargs="?", default=None,
                    help="optional eigenstate file for peak assignments")
    common(sp, "peaks.tsv", need_config=False)
    sp.add_argument("--threshold", type=float, default=0.1,
                    help="peak floor as a fraction of the maximum "
                         "(default 0.1)")

    return parser


def _exit_code(err: PoldqcError) -> int:
    if isinstance(err, ParseError):
        return 2
    if isinstance(err, ValidationError):
        return 3
    if isinstance(err, ConvergenceError):
        return 4
    if isinstance(err, NumericalError):
        return 5
    return 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    clock = StageClock()
    try:
        cfg, inputs, outputs = _HANDLERS[args.command](args, clock)
        with clock.stage("manifest"):
            _write_manifest(args.command, args.out, cfg, inputs, outputs,
                            clock)
    except PoldqcError as err:
        where = f"/{clock.current}" if clock.current else ""
        print(f"poldqc {args.command}{where}: {err}", file=sys.stderr)
        return _exit_code(err)
    except OSError as err:
        where = f"/{clock.current}" if clock.current else ""
        print(f"poldqc {args.command}{where}: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
