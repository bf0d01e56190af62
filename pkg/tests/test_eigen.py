import math

import numpy as np
import pytest
import scipy.linalg

from poldqc.eigen import (
    EigenSolution,
    ManifoldPartition,
    RelaxationConfig,
    krylov_imaginary_step,
    load_eigen_solution,
    partition_manifolds,
    relax_eigenstates,
    save_eigen_solution,
    transition_dipoles,
)
from poldqc.errors import (
    BoundaryLeakError,
    ConvergenceError,
    ParseError,
    PartitionError,
    ValidationError,
)
from poldqc.grids import (
    Axis,
    ProductGrid,
    Wavefunction,
    apply_kinetic,
    hermite_gauss,
    inner_product,
    normalize,
)
from poldqc.model import (
    HF_REDUCED_MASS,
    CavityMode,
    DipoleModel,
    SurfaceSet,
    SurfaceVariant,
    build_surface_set,
    fit_morse_to_transitions,
    morse_levels,
    morse_potential,
)
from poldqc.units import HARTREE_TO_INVCM, cm_to_hartree, hartree_to_cm


def harmonic_surface(omega=1.0, n=48, half=10.0, mass=1.0, label="qc"):
    ax_mass = 1.0 if label == "qc" else mass
    g = ProductGrid([Axis(label, n, -half, half, ax_mass)])
    x = g.axes[0].points
    pot = 0.5 * ax_mass * omega**2 * x**2
    return SurfaceSet(grid=g, variant=SurfaceVariant.FIELD_FREE,
                      potential=pot, dipole=0.3 * x, metadata={})


def make_ham(surface):
    pot = surface.potential

    def ham(psi):
        return Wavefunction(psi.grid, apply_kinetic(psi).amplitudes
                            + pot * psi.amplitudes)

    return ham


def rayleigh(psi, ham):
    return inner_product(psi, ham(psi)).real


class TestKrylovStep:
    def test_eigenstate_invariant(self):
        s = harmonic_surface(omega=1.1)
        x = s.grid.axes[0].points
        psi = normalize(Wavefunction(s.grid, hermite_gauss(0, 1.1, 1.0, x)))
        out = krylov_imaginary_step(psi, make_ham(s), tau=5.0, order=10)
        assert np.max(np.abs(out.amplitudes - psi.amplitudes)) < 1e-12

    def test_relaxes_to_harmonic_ground(self):
        s = harmonic_surface(omega=0.9)
        x = s.grid.axes[0].points
        rng = np.random.default_rng(17)
        amps = sum(c * hermite_gauss(k, 0.9, 1.0, x)
                   for k, c in enumerate(rng.normal(size=6)))
        psi = normalize(Wavefunction(s.grid, amps))
        ham = make_ham(s)
        for _ in range(200):
            psi = krylov_imaginary_step(psi, ham, tau=5.0, order=10)
        assert rayleigh(psi, ham) == pytest.approx(0.45, abs=1e-8)

    def test_energy_never_increases(self):
        s = harmonic_surface(omega=1.0)
        x = s.grid.axes[0].points
        rng = np.random.default_rng(3)
        amps = sum(c * hermite_gauss(k, 1.0, 1.0, x)
                   for k, c in enumerate(rng.normal(size=8)))
        psi = normalize(Wavefunction(s.grid, amps))
        ham = make_ham(s)
        energies = [rayleigh(psi, ham)]
        for _ in range(30):
            psi = krylov_imaginary_step(psi, ham, tau=2.0, order=6)
            energies.append(rayleigh(psi, ham))
        assert np.all(np.diff(energies) <= 1e-12)

    def test_matches_dense_exponential_on_toy_matrix(self):
        rng = np.random.default_rng(5)
        h = rng.normal(size=(8, 8))
        h = 0.5 * (h + h.T)
        v = rng.normal(size=8)
        v /= np.linalg.norm(v)
        tau = 0.7
        exact = scipy.linalg.expm(-tau * h) @ v
        exact /= np.linalg.norm(exact)
        approx = krylov_imaginary_step(v, lambda a: h @ a, tau=tau, order=8)
        assert np.max(np.abs(approx - exact)) < 1e-10

    def test_unnormalized_input_rejected(self):
        s = harmonic_surface()
        psi = Wavefunction(s.grid, 2.0 * normalize(
            Wavefunction(s.grid, hermite_gauss(0, 1.0, 1.0, s.grid.axes[0].points))
        ).amplitudes)
        with pytest.raises(ValidationError):
            krylov_imaginary_step(psi, make_ham(s), tau=1.0)


def hf_morse():
    return fit_morse_to_transitions(4281.0, 4108.0, HF_REDUCED_MASS)


def morse_surface(n_points=64):
    p = hf_morse()
    g = ProductGrid([Axis("r1", n_points, p.re - 1.05, p.re + 1.8, p.mass)])
    pot = morse_potential(g.axes[0].points, p)
    return SurfaceSet(grid=g, variant=SurfaceVariant.FIELD_FREE, potential=pot,
                      dipole=np.full(n_points, 0.71), metadata={}), p


def fast_cfg(n_states=10, tol=1e-9):
    return RelaxationConfig(n_states=n_states, dt_imag=25.0, energy_tol=tol)


class TestRelaxation:
    def test_separable_harmonic_levels(self):
        wa, wb = 1.0, 1.3
        g = ProductGrid([Axis("r1", 36, -9.0, 9.0, 1.0),
                         Axis("qc", 36, -9.0, 9.0, 1.0)])
        xa, xb = g.meshes()
        pot = 0.5 * wa**2 * xa**2 + 0.5 * wb**2 * xb**2
        s = SurfaceSet(grid=g, variant=SurfaceVariant.FIELD_FREE,
                       potential=pot.ravel() - pot.min(),
                       dipole=0.3 * xa.ravel(), metadata={})
        sol = relax_eigenstates(s, fast_cfg())
        exact = sorted(wa * (na + 0.5) + wb * (nb + 0.5)
                       for na in range(6) for nb in range(6))[:10]
        offset = pot.min()
        for e, ref in zip(sol.energies, exact):
            assert e == pytest.approx(ref - offset, rel=1e-7)

    def test_morse_levels_match_analytic(self):
        s, p = morse_surface()
        sol = relax_eigenstates(s, fast_cfg(n_states=5))
        ref = morse_levels(p, 4)
        for v in range(5):
            err_cm = abs(hartree_to_cm(sol.energies[v] - ref[v]))
            assert err_cm < 0.5

    def test_coarser_grid_bounds_finer_from_above(self):
        s64, _ = morse_surface(64)
        s128, _ = morse_surface(128)
        e64 = relax_eigenstates(s64, fast_cfg(n_states=4)).energies
        e128 = relax_eigenstates(s128, fast_cfg(n_states=4)).energies
        assert np.all(e64 >= e128 - 1.1e-7)

    def test_field_free_product_spectrum(self):
        # detuned photon so molecular and photonic ladders interleave cleanly
        p = hf_morse()
        omega_c = cm_to_hartree(4000.0)
        g = ProductGrid([Axis("r1", 64, p.re - 1.05, p.re + 1.8, p.mass),
                         Axis("qc", 48, -50.0, 50.0, 1.0)])
        r, qc = g.meshes()
        pot = morse_potential(r, p) + 0.5 * omega_c**2 * qc**2
        s = SurfaceSet(grid=g, variant=SurfaceVariant.FIELD_FREE,
                       potential=(pot - pot.min()).ravel(),
                       dipole=(0.71 + 0.3 * (r - p.re)).ravel(), metadata={})
        sol = relax_eigenstates(s, fast_cfg())

        levels = morse_levels(p, 4)
        combos = sorted((levels[v] - levels[0]) + omega_c * n
                        for v in range(5) for n in range(5))[:10]
        gaps = sol.energies - sol.energies[0]
        for got, ref in zip(gaps, combos):
            assert abs(hartree_to_cm(got - ref)) < 0.5

        assert sol.partition.g == 0
        for i, st in enumerate(sol.states):
            for j in range(i):
                assert abs(inner_product(sol.states[j], st)) < 1e-8

    def test_polariton_splitting_doubles_with_coupling(self):
        p = hf_morse()
        omega1 = p.omega_e - 2.0 * p.omega_exe
        g = ProductGrid([Axis("r1", 64, p.re - 1.05, p.re + 1.8, p.mass),
                         Axis("qc", 48, -50.0, 50.0, 1.0)])
        dip = DipoleModel(mu0=0.71, slope=0.385)
        gaps = []
        for lam in (0.015, 0.03):
            cav = CavityMode(omega_c=omega1, lambda0=lam, n_mol=1)
            s = build_surface_set(g, p, dip, cav, SurfaceVariant.FULL)
            sol = relax_eigenstates(s, fast_cfg(n_states=4))
            e = sol.partition.e_set
            assert len(e) == 2
            gaps.append(sol.energies[e[1]] - sol.energies[e[0]])
        assert gaps[1] / gaps[0] == pytest.approx(2.0, rel=0.05)

    def test_boundary_leak_detected(self):
        g = ProductGrid([Axis("qc", 24, -4.0, 4.0, 1.0)])
        x = g.axes[0].points
        s = SurfaceSet(grid=g, variant=SurfaceVariant.FIELD_FREE,
                       potential=0.5 * x**2 - (0.5 * x**2).min(),
                       dipole=np.zeros(24), metadata={})
        with pytest.raises(BoundaryLeakError):
            relax_eigenstates(s, fast_cfg(n_states=2))

    def test_non_convergence_reports_state(self):
        s = harmonic_surface(omega=1.0)
        cfg = RelaxationConfig(n_states=2, dt_imag=1e-6, energy_tol=1e-30,
                               max_steps=60)
        with pytest.raises(ConvergenceError, match="state 0"):
            relax_eigenstates(s, cfg)

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            RelaxationConfig(n_states=0)
        with pytest.raises(ValidationError):
            RelaxationConfig(dt_imag=-1.0)
        with pytest.raises(ValidationError):
            RelaxationConfig(krylov_order=3)


class TestTransitionDipoles:
    def solved_harmonic(self):
        s = harmonic_surface(omega=1.0, n=48, half=9.0)
        sol = relax_eigenstates(s, fast_cfg(n_states=4))
        return s, sol

    def test_constant_dipole_is_diagonal(self):
        _, sol = self.solved_harmonic()
        mu = transition_dipoles(sol.states, np.full(48, 0.7))
        assert np.max(np.abs(mu - 0.7 * np.eye(4))) < 1e-10

    def test_linear_dipole_fundamental(self):
        s, sol = self.solved_harmonic()
        mu = transition_dipoles(sol.states, s.dipole)
        assert abs(mu[0, 1]) == pytest.approx(0.3 / math.sqrt(2.0), rel=1e-8)

    def test_linear_dipole_overtone_forbidden(self):
        s, sol = self.solved_harmonic()
        mu = transition_dipoles(sol.states, s.dipole)
        assert abs(mu[0, 2]) < 1e-8

    def test_matrix_is_exactly_symmetric(self):
        s, sol = self.solved_harmonic()
        mu = transition_dipoles(sol.states, s.dipole)
        assert np.array_equal(mu, mu.T)


class TestPartition:
    def test_windows(self):
        e = np.array([0.0, 0.9, 1.1, 1.9, 2.1, 2.4, 2.8]) * 0.02
        part = partition_manifolds(e, 0.02)
        assert part.g == 0
        assert part.e_set == (1, 2)
        assert part.f_set == (3, 4, 5)
        assert part.unclassified == (6,)

    def test_zero_reference_rejected(self):
        with pytest.raises(PartitionError):
            partition_manifolds(np.array([0.0, 1.0, 2.0]), 0.0)

    def test_empty_single_manifold_rejected(self):
        with pytest.raises(PartitionError):
            partition_manifolds(np.array([0.0, 1.9, 2.1]), 1.0)

    def test_empty_double_manifold_rejected(self):
        with pytest.raises(PartitionError):
            partition_manifolds(np.array([0.0, 1.0, 1.2]), 1.0)


class TestEigenIO:
    def solved(self):
        s = harmonic_surface(omega=1.0, n=48, half=9.0)
        return relax_eigenstates(s, fast_cfg(n_states=4))

    def test_round_trip_with_states(self, tmp_path):
        sol = self.solved()
        path = tmp_path / "eigen.dat"
        save_eigen_solution(sol, path)
        back = load_eigen_solution(path)
        assert np.array_equal(back.energies, sol.energies)
        assert np.array_equal(back.dipoles, sol.dipoles)
        assert back.partition == sol.partition
        assert back.grid == sol.grid
        assert len(back.states) == 4
        for a, b in zip(back.states, sol.states):
            assert np.array_equal(a.amplitudes, np.real(b.amplitudes))

    def test_round_trip_without_sidecar(self, tmp_path):
        sol = self.solved()
        path = tmp_path / "eigen.dat"
        save_eigen_solution(sol, path, include_states=False)
        back = load_eigen_solution(path)
        assert back.states == []
        assert np.array_equal(back.energies, sol.energies)

    def test_sidecar_shape_mismatch_rejected(self, tmp_path):
        sol = self.solved()
        path = tmp_path / "eigen.dat"
        save_eigen_solution(sol, path)
        raw = (tmp_path / "eigen.dat.wf").read_bytes()
        (tmp_path / "eigen.dat.wf").write_bytes(raw[:-16])
        with pytest.raises(ParseError):
            load_eigen_solution(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "eigen.dat"
        path.write_text("#POLDQC-EIGEN v2\n")
        with pytest.raises(ParseError) as err:
            load_eigen_solution(path)
        assert err.value.line == 1

    def test_solution_invariants_enforced(self):
        g = ProductGrid([Axis("qc", 16, -5.0, 5.0, 1.0)])
        part = ManifoldPartition(g=0, e_set=(1,), f_set=(2,), omega_ref=1.0)
        with pytest.raises(ValidationError):
            EigenSolution(energies=np.array([0.0, 2.0, 1.0]), states=[],
                          dipoles=np.zeros((3, 3)), partition=part, grid=g)
        with pytest.raises(ValidationError):
            EigenSolution(energies=np.array([0.0, 1.0, 2.0]), states=[],
                          dipoles=np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0],
                                            [0.0, 0.0, 0.0]]),
                          partition=part, grid=g)
