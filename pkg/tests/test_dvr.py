"""Grid discretization, trap spectra and the effective 1D coupling."""

import numpy as np
import pytest

from fermidwell.dvr import (
    GridSpec,
    OrbitalBasis,
    SpeciesParams,
    TrapParams,
    ZETA_HALF_ABS,
    build_kinetic,
    build_potential,
    effective_coupling,
    reduced_mass,
    solve_single_particle,
)

GRID = GridSpec()


def test_grid_geometry():
    assert GRID.length == 80.0
    assert GRID.spacing == pytest.approx(80.0 / 401)
    nodes = GRID.nodes
    assert len(nodes) == 400
    assert nodes[0] == pytest.approx(-40.0 + GRID.spacing)
    assert nodes[-1] == pytest.approx(40.0 - GRID.spacing)
    assert np.all(np.diff(nodes) > 0)
    assert not np.any(np.isclose(nodes, 0.0, atol=1e-12))


def test_grid_rejects_node_at_origin():
    # 399 interior points put a node exactly at x=0
    with pytest.raises(ValueError):
        GridSpec(-40.0, 40.0, 399)


def test_grid_rejects_box_not_containing_origin():
    with pytest.raises(ValueError):
        GridSpec(1.0, 40.0, 400)


def test_grid_rejects_too_few_points():
    with pytest.raises(ValueError):
        GridSpec(-40.0, 40.0, 32)


def test_kinetic_reproduces_box_spectrum():
    grid = GridSpec(-10.0, 10.0, 100)
    kin = build_kinetic(grid, 1.0)
    vals = np.linalg.eigvalsh(kin)
    k = np.arange(1, 101)
    exact = (k * np.pi / grid.length) ** 2 / 2.0
    assert np.max(np.abs(np.sort(vals) - exact)) < 1e-10


def test_kinetic_symmetric_and_mass_scaling():
    kin1 = build_kinetic(GRID, 1.0)
    kin6 = build_kinetic(GRID, 6.0)
    assert np.max(np.abs(kin1 - kin1.T)) < 1e-12
    assert np.max(np.abs(kin6 - kin1 / 6.0)) < 1e-12


@pytest.mark.parametrize("mass", [1.0, 6.0])
def test_harmonic_oscillator_spectrum(mass):
    # no barrier: lowest levels must match omega*(n + 1/2)
    species = SpeciesParams(mass, 0.1, "A" if mass == 1.0 else "B")
    trap = TrapParams(barrier_height=0.0)
    basis = solve_single_particle(GRID, species, trap, 8)
    exact = 0.1 * (np.arange(8) + 0.5)
    assert np.max(np.abs(basis.energies - exact)) < 1e-8


def test_potential_components():
    species = SpeciesParams(2.0, 0.1, "A")
    trap = TrapParams(barrier_height=1.0, barrier_width=0.5, tilt=0.3)
    v = build_potential(GRID, species, trap)
    x = GRID.nodes
    expected = (
        0.5 * 2.0 * 0.01 * x**2
        + 1.0 / (0.5 * np.sqrt(2 * np.pi)) * np.exp(-(x**2) / (2 * 0.25))
        + 0.3 * x
    )
    assert np.max(np.abs(v - expected)) < 1e-12


def test_orbitals_orthonormal_and_parity():
    species = SpeciesParams(1.0, 0.1, "A")
    basis = solve_single_particle(GRID, species, TrapParams(), 10)
    u = basis.orbitals
    assert np.max(np.abs(u @ u.T - np.eye(10))) < 1e-10
    # symmetric trap: every orbital has definite parity, alternating
    flipped = u[:, ::-1]
    for a in range(10):
        sym = min(np.max(np.abs(u[a] - flipped[a])), np.max(np.abs(u[a] + flipped[a])))
        assert sym < 1e-8


def test_solver_deterministic_sign():
    species = SpeciesParams(6.0, 0.1, "B")
    b1 = solve_single_particle(GRID, species, TrapParams(), 6)
    b2 = solve_single_particle(GRID, species, TrapParams(), 6)
    assert np.array_equal(b1.orbitals, b2.orbitals)
    for a in range(6):
        peak = np.argmax(np.abs(b1.orbitals[a]))
        assert b1.orbitals[a, peak] > 0


def test_overlaps_partition_identity():
    species = SpeciesParams(1.0, 0.1, "A")
    basis = solve_single_particle(GRID, species, TrapParams(), 6)
    total = basis.overlap_left + basis.overlap_right
    assert np.max(np.abs(total - np.eye(6))) < 1e-12
    # projections are symmetric with eigenvalues in [0, 1]
    vals = np.linalg.eigvalsh(basis.overlap_left)
    assert np.all(vals > -1e-12) and np.all(vals < 1 + 1e-12)


def test_position_matrix_against_quadrature():
    species = SpeciesParams(1.0, 0.1, "A")
    basis = solve_single_particle(GRID, species, TrapParams(), 5)
    vals = basis.values_at_nodes()
    w = GRID.weight
    direct = np.einsum("aj,j,cj->ac", vals, GRID.nodes, vals) * w
    assert np.max(np.abs(basis.position_matrix - direct)) < 1e-10


def test_wavefunction_normalization():
    species = SpeciesParams(1.0, 0.1, "A")
    basis = solve_single_particle(GRID, species, TrapParams(), 4)
    vals = basis.values_at_nodes()
    norms = np.sum(vals**2, axis=1) * GRID.weight
    assert np.max(np.abs(norms - 1.0)) < 1e-12


def test_tilt_lowers_left_side():
    species = SpeciesParams(1.0, 0.1, "A")
    tilted = solve_single_particle(GRID, species, TrapParams(tilt=0.2), 1)
    # ground orbital of the tilted trap sits left of the origin
    dens = tilted.orbitals[0] ** 2
    mean_x = float(np.sum(dens * GRID.nodes))
    assert mean_x < -1.0


def test_orbital_basis_rejects_non_orthonormal():
    species = SpeciesParams(1.0, 0.1, "A")
    u = np.ones((2, GRID.n_points)) / np.sqrt(GRID.n_points)
    with pytest.raises(Exception):
        OrbitalBasis(GRID, species, 2, np.array([0.0, 1.0]), u)


def test_reduced_mass():
    assert reduced_mass(1.0, 6.0) == pytest.approx(6.0 / 7.0)


def test_effective_coupling_formula():
    mu, omega_perp, a_s = 6.0 / 7.0, 10.0, 0.05
    a_perp = 1.0 / np.sqrt(mu * omega_perp)
    expected = 2 * a_s / (mu * a_perp**2) / (1 - ZETA_HALF_ABS * a_s / (np.sqrt(2) * a_perp))
    assert effective_coupling(a_s, omega_perp, mu) == pytest.approx(expected, rel=1e-14)


def test_effective_coupling_weak_limit():
    mu, omega_perp = 0.5, 4.0
    a_s = 1e-8
    g = effective_coupling(a_s, omega_perp, mu)
    assert g == pytest.approx(2 * a_s * omega_perp, rel=1e-6)


def test_effective_coupling_resonance():
    mu, omega_perp = 1.0, 1.0
    a_perp = 1.0
    a_res = np.sqrt(2) * a_perp / ZETA_HALF_ABS
    with pytest.raises(ZeroDivisionError):
        effective_coupling(a_res, omega_perp, mu)


def test_species_and_trap_validation():
    with pytest.raises(ValueError):
        SpeciesParams(-1.0, 0.1, "A")
    with pytest.raises(ValueError):
        SpeciesParams(1.0, 0.1, "C")
    with pytest.raises(ValueError):
        TrapParams(barrier_width=0.0)
    assert TrapParams().with_tilt(0.2).tilt == 0.2
