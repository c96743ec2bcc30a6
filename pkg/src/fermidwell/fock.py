"""Antisymmetric occupation-number bases and fermionic operator embeddings.

Configurations are stored as integer bitmasks (bit a set = orbital a
occupied), ordered by ascending integer value.  The sign convention is the
Jordan-Wigner string counting occupied orbitals below the acted-on index;
annihilation acts first when a pair a^dag_a a_c is applied.
"""

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp

#: refuse many-body product spaces larger than this (desk-scale guarantee)
DEFAULT_CAPACITY = 10_000_000

HERMITICITY_TOL = 1e-12


class CapacityError(MemoryError):
    """Requested basis exceeds the configured memory budget."""


class EmptySpeciesError(ValueError):
    """Annihilation requested on a species with no particles."""


def _popcount(x: np.ndarray) -> np.ndarray:
    if hasattr(np, "bitwise_count"):
        return np.bitwise_count(x)
    # numpy < 2.0 fallback
    x = x.astype(np.uint64)
    out = np.zeros_like(x)
    while np.any(x):
        out += x & 1
        x >>= np.uint64(1)
    return out


@dataclass
class CouplingTable:
    """All nonzero matrix elements of a^dag_a a_c between basis configs.

    Entries are grouped by the ordered pair id p = a * m + c;
    ``ptr[p]:ptr[p+1]`` delimits the rows of pair p.
    """

    n_orbitals: int
    pair_a: np.ndarray
    pair_c: np.ndarray
    rows_out: np.ndarray
    rows_in: np.ndarray
    signs: np.ndarray
    ptr: np.ndarray


@dataclass
class FockBasis:
    """Canonical ordered N-particle basis over m orbitals."""

    n_orbitals: int
    n_particles: int
    configs: np.ndarray
    _couplings: CouplingTable | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.configs)

    def index_of(self, configs) -> np.ndarray:
        """Ordinals of the given bitmask configs (must all be members)."""
        configs = np.atleast_1d(np.asarray(configs, dtype=np.int64))
        idx = np.searchsorted(self.configs, configs)
        if np.any(idx >= self.dim) or np.any(self.configs[np.minimum(idx, self.dim - 1)] != configs):
            raise KeyError("configuration not in basis")
        return idx

    def occupations(self) -> np.ndarray:
        """(dim, m) boolean occupation table."""
        bits = np.arange(self.n_orbitals, dtype=np.int64)
        return (self.configs[:, None] >> bits[None, :]) & 1 > 0

    def couplings(self) -> CouplingTable:
        if self._couplings is None:
            self._couplings = _build_couplings(self)
        return self._couplings


def enumerate_basis(m: int, n: int, max_dim: int = DEFAULT_CAPACITY) -> FockBasis:
    """Enumerate all popcount-n bitmasks over m orbitals in ascending order."""
    if not 0 <= n <= m:
        raise ValueError(f"cannot place {n} fermions in {m} orbitals")
    dim = comb(m, n)
    if dim > max_dim:
        raise CapacityError(f"basis dimension {dim} exceeds capacity budget {max_dim}")
    if n == 0:
        return FockBasis(m, n, np.zeros(1, dtype=np.int64))
    # colex-style enumeration: successively extend by the highest bit
    configs = [np.int64((1 << n) - 1)]
    current = configs[0]
    for _ in range(dim - 1):
        # Gosper's hack: next integer with the same popcount
        c = int(current)
        lo = c & -c
        lz = c + lo
        current = np.int64(lz | (((c ^ lz) // lo) >> 2))
        configs.append(current)
    return FockBasis(m, n, np.array(configs, dtype=np.int64))


def _parity_below(configs: np.ndarray, orbital: int) -> np.ndarray:
    """(-1)^(number of occupied orbitals with index < orbital)."""
    mask = np.int64((1 << orbital) - 1)
    return np.where(_popcount(configs & mask) % 2 == 0, 1, -1).astype(np.int8)


def _build_couplings(basis: FockBasis) -> CouplingTable:
    m = basis.n_orbitals
    configs = basis.configs
    pair_a, pair_c, rows_out, rows_in, signs = [], [], [], [], []
    ptr = [0]
    for a in range(m):
        bit_a = np.int64(1 << a)
        for c in range(m):
            bit_c = np.int64(1 << c)
            if a == c:
                rows = np.nonzero(configs & bit_c)[0]
                out = rows
                sgn = np.ones(len(rows), dtype=np.int8)
            else:
                sel = (configs & bit_c > 0) & (configs & bit_a == 0)
                rows = np.nonzero(sel)[0]
                intermediate = configs[rows] ^ bit_c
                sgn = _parity_below(configs[rows], c) * _parity_below(intermediate, a)
                out = basis.index_of(intermediate | bit_a) if len(rows) else rows
            n_new = len(rows)
            pair_a.append(np.full(n_new, a, dtype=np.int16))
            pair_c.append(np.full(n_new, c, dtype=np.int16))
            rows_out.append(np.asarray(out, dtype=np.int32))
            rows_in.append(np.asarray(rows, dtype=np.int32))
            signs.append(sgn)
            ptr.append(ptr[-1] + n_new)
    return CouplingTable(
        m,
        np.concatenate(pair_a),
        np.concatenate(pair_c),
        np.concatenate(rows_out),
        np.concatenate(rows_in),
        np.concatenate(signs),
        np.array(ptr, dtype=np.int64),
    )


def determinant_coefficients(basis: FockBasis, columns: np.ndarray) -> np.ndarray:
    """Expansion of the Slater determinant of N orbital vectors over the basis.

    ``columns`` is (m, N); the coefficient of a configuration is the minor of
    the rows picked out by its occupied orbitals, so a determinant built from
    rotated orbitals becomes an exact linear combination of configurations.
    """
    m, n = basis.n_orbitals, basis.n_particles
    if columns.shape != (m, n):
        raise ValueError(f"column matrix must be {m}x{n}")
    if n == 0:
        return np.ones(1)
    occ = basis.occupations()
    idx = np.argsort(~occ, axis=1, kind="stable")[:, :n]
    return np.linalg.det(columns[idx])


def one_body_matrix(basis: FockBasis, h: np.ndarray) -> sp.csr_matrix:
    """Sparse Fock-space embedding of sum_ac h[a,c] a^dag_a a_c."""
    m = basis.n_orbitals
    if h.shape != (m, m):
        raise ValueError(f"one-body matrix must be {m}x{m}")
    t = basis.couplings()
    vals = h[t.pair_a, t.pair_c] * t.signs
    mat = sp.csr_matrix((vals, (t.rows_out, t.rows_in)), shape=(basis.dim, basis.dim))
    mat.sum_duplicates()
    return mat


@dataclass
class ManyBodyState:
    """Complex coefficient matrix over the A x B configuration product space."""

    basis_a: FockBasis
    basis_b: FockBasis
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        expected = (self.basis_a.dim, self.basis_b.dim)
        if self.coeffs.shape != expected:
            raise ValueError(f"coefficient matrix must have shape {expected}")
        if not np.iscomplexobj(self.coeffs):
            self.coeffs = self.coeffs.astype(np.complex128)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "ManyBodyState":
        n = self.norm
        if n < 1e-300:
            raise ZeroDivisionError("cannot normalize a zero state")
        return ManyBodyState(self.basis_a, self.basis_b, self.coeffs / n, self.time)

    def copy(self) -> "ManyBodyState":
        return ManyBodyState(self.basis_a, self.basis_b, self.coeffs.copy(), self.time)

    @classmethod
    def from_configs(
        cls,
        basis_a: FockBasis,
        basis_b: FockBasis,
        config_a: int,
        config_b: int,
        time: float = 0.0,
    ) -> "ManyBodyState":
        """Single product determinant |config_a> x |config_b>."""
        coeffs = np.zeros((basis_a.dim, basis_b.dim), dtype=np.complex128)
        ia = basis_a.index_of(config_a)[0]
        ib = basis_b.index_of(config_b)[0]
        coeffs[ia, ib] = 1.0
        return cls(basis_a, basis_b, coeffs, time)


def _species_basis(state: ManyBodyState, species: str) -> FockBasis:
    if species == "A":
        return state.basis_a
    if species == "B":
        return state.basis_b
    raise ValueError("species must be 'A' or 'B'")


def apply_one_body(state: ManyBodyState, species: str, h: np.ndarray) -> ManyBodyState:
    """Apply sum_ac h[a,c] a^dag_a a_c on one species (result unnormalized)."""
    if np.max(np.abs(h - h.conj().T)) > HERMITICITY_TOL:
        raise ValueError("one-body matrix is not Hermitian")
    basis = _species_basis(state, species)
    op = one_body_matrix(basis, h.real) if np.isrealobj(h) else None
    if op is None:
        t = basis.couplings()
        vals = h[t.pair_a, t.pair_c] * t.signs
        op = sp.csr_matrix((vals, (t.rows_out, t.rows_in)), shape=(basis.dim, basis.dim))
    if species == "A":
        out = op @ state.coeffs
    else:
        out = (op @ state.coeffs.T).T
    return ManyBodyState(state.basis_a, state.basis_b, out, state.time)


def annihilation_map(basis_from: FockBasis, basis_to: FockBasis, orbital: int) -> sp.csr_matrix:
    """Sparse matrix of a_orbital from the N-particle to the (N-1)-particle basis."""
    if basis_to.n_particles != basis_from.n_particles - 1 or basis_to.n_orbitals != basis_from.n_orbitals:
        raise ValueError("target basis must have one particle fewer over the same orbitals")
    bit = np.int64(1 << orbital)
    rows = np.nonzero(basis_from.configs & bit)[0]
    sgn = _parity_below(basis_from.configs[rows], orbital).astype(np.float64)
    out = basis_to.index_of(basis_from.configs[rows] ^ bit) if len(rows) else rows
    return sp.csr_matrix((sgn, (out, rows)), shape=(basis_to.dim, basis_from.dim))


def annihilate_at(state: ManyBodyState, species: str, amplitudes: np.ndarray) -> ManyBodyState:
    """Apply the field operator sum_a amplitudes[a] a_a on one species.

    The result lives in the (N-1)-particle basis of the same orbitals and is
    unnormalized; its squared norm is the one-body density contracted with
    |amplitudes|^2 cross terms (for a position-space field operator, the
    spatial density at that point).
    """
    basis = _species_basis(state, species)
    if basis.n_particles == 0:
        raise EmptySpeciesError(f"species {species} has no particles to annihilate")
    amplitudes = np.asarray(amplitudes)
    if amplitudes.shape != (basis.n_orbitals,):
        raise ValueError("amplitude vector length must equal the orbital count")
    target = enumerate_basis(basis.n_orbitals, basis.n_particles - 1)
    op = sp.csr_matrix((target.dim, basis.dim))
    for a in np.nonzero(np.abs(amplitudes) > 0)[0]:
        op = op + amplitudes[a] * annihilation_map(basis, target, int(a))
    if species == "A":
        out = op @ state.coeffs
        return ManyBodyState(target, state.basis_b, out, state.time)
    out = (op @ state.coeffs.T).T
    return ManyBodyState(state.basis_a, target, out, state.time)
