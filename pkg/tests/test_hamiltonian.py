"""Many-body Hamiltonian assembly checked against dense oracles."""

import numpy as np
import pytest

import oracles
from fermidwell.dvr import GridSpec, SpeciesParams, TrapParams, solve_single_particle
from fermidwell.fock import ManyBodyState, enumerate_basis
from fermidwell.hamiltonian import (
    AssemblyError,
    SparseHamiltonian,
    assemble,
    build_interaction,
    requench,
)

GRID = GridSpec(-20.0, 20.0, 128)
SPECIES_A = SpeciesParams(1.0, 0.1, "A")
SPECIES_B = SpeciesParams(6.0, 0.1, "B")
TRAP = TrapParams()


def small_bases(m_a, m_b):
    oa = solve_single_particle(GRID, SPECIES_A, TRAP, m_a)
    ob = solve_single_particle(GRID, SPECIES_B, TRAP, m_b)
    return oa, ob


def dense_reference(h: SparseHamiltonian, tilt: float) -> np.ndarray:
    """Dense two-species matrix built through the tuple-based oracle."""
    oa, ob = h.orbitals_a, h.orbitals_b
    h_a = np.diag(oa.energies) + tilt * oa.position_matrix
    h_b = np.diag(ob.energies) + tilt * ob.position_matrix
    return oracles.dense_two_species_h(
        oa.n_orbitals,
        h.fock_a.n_particles,
        ob.n_orbitals,
        h.fock_b.n_particles,
        h_a,
        h_b,
        h.interaction.elements,
    )


def permuted_dense(h: SparseHamiltonian, tilt: float) -> np.ndarray:
    """Oracle matrix re-ordered into the bitmask basis convention."""
    ref = dense_reference(h, tilt)
    perm_a = h.fock_a.index_of(
        [sum(1 << a for a in t) for t in oracles.basis_tuples(h.fock_a.n_orbitals, h.fock_a.n_particles)]
    )
    perm_b = h.fock_b.index_of(
        [sum(1 << a for a in t) for t in oracles.basis_tuples(h.fock_b.n_orbitals, h.fock_b.n_particles)]
    )
    db = h.dim_b
    flat = np.array([pa * db + pb for pa in perm_a for pb in perm_b])
    out = np.zeros_like(ref)
    out[np.ix_(flat, flat)] = ref
    return out


def dense_of(h: SparseHamiltonian) -> np.ndarray:
    eye = np.eye(h.dimension)
    return np.column_stack([h.matvec(eye[:, j]) for j in range(h.dimension)]).real


def test_interaction_tensor_symmetries():
    oa, ob = small_bases(4, 3)
    w = build_interaction(oa, ob, 1.3).elements
    assert w.shape == (4, 4, 3, 3)
    assert np.max(np.abs(w - np.transpose(w, (1, 0, 2, 3)))) < 1e-12
    assert np.max(np.abs(w - np.transpose(w, (0, 1, 3, 2)))) < 1e-12


def test_interaction_scales_linearly_with_g():
    oa, ob = small_bases(3, 3)
    w1 = build_interaction(oa, ob, 1.0).elements
    w2 = build_interaction(oa, ob, -2.5).elements
    assert np.max(np.abs(w2 + 2.5 * w1)) < 1e-12


def test_interaction_matches_quadrature():
    oa, ob = small_bases(3, 3)
    w = build_interaction(oa, ob, 2.0).elements
    va, vb = oa.values_at_nodes(), ob.values_at_nodes()
    direct = 2.0 * np.einsum("aj,cj,bj,dj->acbd", va, va, vb, vb) * GRID.weight
    assert np.max(np.abs(w - direct)) < 1e-10


def test_interaction_requires_shared_grid():
    oa, _ = small_bases(3, 3)
    other = solve_single_particle(GridSpec(-20.0, 20.0, 130), SPECIES_B, TRAP, 3)
    with pytest.raises(ValueError):
        build_interaction(oa, other, 1.0)


@pytest.mark.parametrize("n_a,n_b,tilt", [(1, 1, 0.0), (1, 1, 0.2), (2, 1, 0.1), (2, 2, 0.2)])
def test_assembled_matrix_matches_dense_oracle(n_a, n_b, tilt):
    oa, ob = small_bases(4, 3)
    fa, fb = enumerate_basis(4, n_a), enumerate_basis(3, n_b)
    inter = build_interaction(oa, ob, 0.8)
    h = assemble(oa, ob, fa, fb, inter, tilt)
    assert np.max(np.abs(dense_of(h) - permuted_dense(h, tilt))) < 1e-10


def test_loop_species_symmetric_result():
    # asymmetric orbital counts exercise both loop-species branches
    oa, ob = small_bases(3, 5)
    inter = build_interaction(oa, ob, 1.1)
    fa, fb = enumerate_basis(3, 2), enumerate_basis(5, 2)
    h = assemble(oa, ob, fa, fb, inter, 0.05)
    assert h._loop_species == "B"
    assert np.max(np.abs(dense_of(h) - permuted_dense(h, 0.05))) < 1e-10


def test_noninteracting_is_separable():
    oa, ob = small_bases(4, 4)
    fa, fb = enumerate_basis(4, 2), enumerate_basis(4, 2)
    inter = build_interaction(oa, ob, 0.0)
    h = assemble(oa, ob, fa, fb, inter, 0.1)
    assert h._pair_actions == []
    rng = np.random.default_rng(0)
    c = rng.standard_normal((fa.dim, fb.dim)) + 1j * rng.standard_normal((fa.dim, fb.dim))
    from fermidwell.fock import one_body_matrix

    h_a = one_body_matrix(fa, np.diag(oa.energies) + 0.1 * oa.position_matrix).toarray()
    h_b = one_body_matrix(fb, np.diag(ob.energies) + 0.1 * ob.position_matrix).toarray()
    assert np.max(np.abs(h.apply(c) - (h_a @ c + (h_b @ c.T).T))) < 1e-10


def test_hermiticity_of_apply():
    oa, ob = small_bases(4, 3)
    fa, fb = enumerate_basis(4, 2), enumerate_basis(3, 2)
    h = assemble(oa, ob, fa, fb, build_interaction(oa, ob, 2.0), 0.2)
    rng = np.random.default_rng(1)
    shape = (fa.dim, fb.dim)
    u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    assert np.vdot(u, h.apply(v)) == pytest.approx(np.vdot(h.apply(u), v), rel=1e-12)


def test_expectation_and_scaled():
    oa, ob = small_bases(3, 3)
    fa, fb = enumerate_basis(3, 1), enumerate_basis(3, 1)
    h = assemble(oa, ob, fa, fb, build_interaction(oa, ob, 0.7), 0.0)
    rng = np.random.default_rng(2)
    c = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    state = ManyBodyState(fa, fb, c).normalized()
    e = h.expectation(state)
    assert h.scaled(-1.0).expectation(state) == pytest.approx(-e)
    assert np.max(np.abs(h.scaled(2.0).apply(state.coeffs) - 2.0 * h.apply(state.coeffs))) < 1e-12


def test_requench_changes_only_tilt():
    oa, ob = small_bases(3, 3)
    fa, fb = enumerate_basis(3, 2), enumerate_basis(3, 1)
    h0 = assemble(oa, ob, fa, fb, build_interaction(oa, ob, 1.5), 0.2)
    h1 = requench(h0, 0.0)
    assert h1.tilt_value == 0.0
    assert h1._pair_actions is h0._pair_actions
    assert np.max(np.abs(dense_of(h1) - permuted_dense(h1, 0.0))) < 1e-10


def test_parity_symmetry_without_tilt():
    # at zero tilt the trap is even; the many-body spectrum from the dense
    # matrix must equal that of the spatially mirrored problem
    oa, ob = small_bases(3, 3)
    fa, fb = enumerate_basis(3, 1), enumerate_basis(3, 1)
    h = assemble(oa, ob, fa, fb, build_interaction(oa, ob, 1.0), 0.0)
    mat = dense_of(h)
    assert np.max(np.abs(mat - mat.T)) < 1e-10


def test_shape_validation():
    oa, ob = small_bases(3, 3)
    fa, fb = enumerate_basis(4, 2), enumerate_basis(3, 1)
    with pytest.raises(ValueError):
        assemble(oa, ob, fa, fb, build_interaction(oa, ob, 1.0), 0.0)
