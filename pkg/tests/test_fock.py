"""Occupation-number bases and fermionic operator embeddings, checked
against an independent tuple-based second-quantization oracle."""

from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fermidwell.fock import (
    CapacityError,
    EmptySpeciesError,
    FockBasis,
    ManyBodyState,
    annihilate_at,
    annihilation_map,
    apply_one_body,
    enumerate_basis,
    one_body_matrix,
)

import oracles


def config_to_tuple(config: int, m: int) -> tuple:
    return tuple(a for a in range(m) if config >> a & 1)


@pytest.mark.parametrize("m,n", [(1, 0), (1, 1), (4, 2), (6, 3), (8, 1), (8, 8)])
def test_enumeration_complete_and_ordered(m, n):
    basis = enumerate_basis(m, n)
    assert basis.dim == comb(m, n)
    assert np.all(np.diff(basis.configs) > 0) or basis.dim == 1
    occ = basis.occupations()
    assert np.all(occ.sum(axis=1) == n)
    # matches the lexicographic tuple enumeration as a set
    got = {config_to_tuple(int(c), m) for c in basis.configs}
    assert got == set(oracles.basis_tuples(m, n))


def test_enumeration_validation():
    with pytest.raises(ValueError):
        enumerate_basis(3, 4)
    with pytest.raises(ValueError):
        enumerate_basis(3, -1)
    with pytest.raises(CapacityError):
        enumerate_basis(30, 15, max_dim=1000)


def test_index_of_roundtrip_and_missing():
    basis = enumerate_basis(6, 3)
    idx = basis.index_of(basis.configs)
    assert np.array_equal(idx, np.arange(basis.dim))
    with pytest.raises(KeyError):
        basis.index_of(np.int64(0b1111))  # popcount 4, not a member


@pytest.mark.parametrize("m,n", [(3, 1), (4, 2), (5, 3)])
def test_one_body_matrix_against_oracle(m, n):
    rng = np.random.default_rng(5)
    h = rng.standard_normal((m, m))
    h = h + h.T
    basis = enumerate_basis(m, n)
    mat = one_body_matrix(basis, h).toarray()
    ref = oracles.dense_one_body(m, n, h)
    # map oracle tuple ordering onto bitmask ordering
    tuples = oracles.basis_tuples(m, n)
    perm = basis.index_of([sum(1 << a for a in t) for t in tuples])
    ref_perm = np.zeros_like(ref)
    ref_perm[np.ix_(perm, perm)] = ref
    assert np.max(np.abs(mat - ref_perm.real)) < 1e-12


def test_number_operator_diagonal():
    basis = enumerate_basis(5, 2)
    for a in range(5):
        h = np.zeros((5, 5))
        h[a, a] = 1.0
        mat = one_body_matrix(basis, h).toarray()
        occ = basis.occupations()[:, a].astype(float)
        assert np.max(np.abs(mat - np.diag(occ))) < 1e-15


@settings(max_examples=40, deadline=None)
@given(
    m=st.integers(2, 6),
    data=st.data(),
)
def test_annihilation_anticommutation(m, data):
    n = data.draw(st.integers(2, m))
    i = data.draw(st.integers(0, m - 1))
    j = data.draw(st.integers(0, m - 1))
    big = enumerate_basis(m, n)
    mid = enumerate_basis(m, n - 1)
    small = enumerate_basis(m, n - 2)
    ai_then = annihilation_map(mid, small, i) @ annihilation_map(big, mid, j)
    aj_then = annihilation_map(mid, small, j) @ annihilation_map(big, mid, i)
    anti = (ai_then + aj_then).toarray()
    assert np.max(np.abs(anti)) < 1e-15


@settings(max_examples=30, deadline=None)
@given(m=st.integers(2, 5), data=st.data())
def test_number_conservation_identity(m, data):
    # sum_a a^dag_a a_a acts as N on every basis state
    n = data.draw(st.integers(0, m))
    basis = enumerate_basis(m, n)
    mat = one_body_matrix(basis, np.eye(m)).toarray()
    assert np.max(np.abs(mat - n * np.eye(basis.dim))) < 1e-15


def test_annihilation_map_signs_against_oracle():
    m, n = 5, 3
    big, small = enumerate_basis(m, n), enumerate_basis(m, n - 1)
    for orbital in range(m):
        mat = annihilation_map(big, small, orbital).toarray()
        for j, config in enumerate(big.configs):
            occ = config_to_tuple(int(config), m)
            res = oracles.annihilate(occ, orbital)
            col = mat[:, j]
            if res is None:
                assert np.all(col == 0)
            else:
                sign, out = res
                i = small.index_of(sum(1 << a for a in out))[0]
                assert col[i] == sign
                assert np.count_nonzero(col) == 1


def test_annihilation_map_shape_validation():
    with pytest.raises(ValueError):
        annihilation_map(enumerate_basis(4, 2), enumerate_basis(4, 2), 0)


def test_many_body_state_basics():
    fa, fb = enumerate_basis(4, 2), enumerate_basis(3, 1)
    state = ManyBodyState.from_configs(fa, fb, 0b0011, 0b100)
    assert state.norm == pytest.approx(1.0)
    assert state.coeffs.dtype == np.complex128
    doubled = ManyBodyState(fa, fb, 2.0 * state.coeffs)
    assert doubled.normalized().norm == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ManyBodyState(fa, fb, np.zeros((2, 2)))
    with pytest.raises(ZeroDivisionError):
        ManyBodyState(fa, fb, np.zeros((fa.dim, fb.dim))).normalized()


def test_apply_one_body_requires_hermitian():
    fa, fb = enumerate_basis(3, 1), enumerate_basis(3, 1)
    state = ManyBodyState.from_configs(fa, fb, 0b001, 0b001)
    h = np.zeros((3, 3))
    h[0, 1] = 1.0
    with pytest.raises(ValueError):
        apply_one_body(state, "A", h)


def test_apply_one_body_matches_dense_oracle():
    m_a, n_a, m_b, n_b = 4, 2, 3, 2
    fa, fb = enumerate_basis(m_a, n_a), enumerate_basis(m_b, n_b)
    rng = np.random.default_rng(11)
    h = rng.standard_normal((m_a, m_a))
    h = h + h.T
    coeffs = rng.standard_normal((fa.dim, fb.dim)) + 1j * rng.standard_normal((fa.dim, fb.dim))
    state = ManyBodyState(fa, fb, coeffs)
    out = apply_one_body(state, "A", h)
    ref_op = one_body_matrix(fa, h).toarray()
    assert np.max(np.abs(out.coeffs - ref_op @ coeffs)) < 1e-12
    # species B acts on the second index
    hb = rng.standard_normal((m_b, m_b))
    hb = hb + hb.T
    out_b = apply_one_body(state, "B", hb)
    ref_b = one_body_matrix(fb, hb).toarray()
    assert np.max(np.abs(out_b.coeffs - (ref_b @ coeffs.T).T)) < 1e-12


def test_annihilate_at_single_determinant():
    fa, fb = enumerate_basis(3, 2), enumerate_basis(2, 1)
    state = ManyBodyState.from_configs(fa, fb, 0b011, 0b01)
    # remove orbital 1: a_1 |{0,1}> = -|{0}>
    amplitudes = np.array([0.0, 1.0, 0.0])
    out = annihilate_at(state, "A", amplitudes)
    assert out.basis_a.n_particles == 1
    i = out.basis_a.index_of(0b001)[0]
    assert out.coeffs[i, 0] == pytest.approx(-1.0)
    assert out.norm == pytest.approx(1.0)


def test_annihilate_at_norm_equals_density_contraction():
    # |c(x)|^2 of the collapsed state equals <Psi| psi^dag psi |Psi>
    m = 4
    fa, fb = enumerate_basis(m, 2), enumerate_basis(2, 1)
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal((fa.dim, fb.dim)) + 1j * rng.standard_normal((fa.dim, fb.dim))
    state = ManyBodyState(fa, fb, coeffs).normalized()
    amps = rng.standard_normal(m)
    out = annihilate_at(state, "A", amps)
    # permute rows into the oracle's lexicographic tuple ordering
    perm = fa.index_of([sum(1 << a for a in t) for t in oracles.basis_tuples(m, 2)])
    d = oracles.dense_rdm1(m, 2, 2, 1, state.coeffs[perm], first=True)
    expected = float((amps @ d.real @ amps))
    assert out.norm**2 == pytest.approx(expected, abs=1e-12)


def test_annihilate_at_empty_species():
    fa, fb = enumerate_basis(3, 0), enumerate_basis(3, 1)
    state = ManyBodyState(fa, fb, np.ones((1, 3)))
    with pytest.raises(EmptySpeciesError):
        annihilate_at(state, "A", np.ones(3))
