"""Sparse many-body Hamiltonian in the two-species product Fock space.

The operator is held matrix-free: per-species one-body matrices act as sparse
Fock-space maps, and the interspecies contact interaction is applied pairwise
through precomputed half-contracted one-body operators on the partner
species.  Memory scales with m^4 plus hop lists, never with dim^2.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dvr import OrbitalBasis
from .fock import FockBasis, ManyBodyState, one_body_matrix

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap

#: interaction tensor entries below this fraction of the largest entry are
#: dropped (quadrature noise floor)
SCREENING_REL = 1e-14

HERMITICITY_CHECK_TOL = 1e-10


class AssemblyError(RuntimeError):
    """Hamiltonian assembly produced an inconsistent operator."""


@dataclass
class InteractionTensor:
    """Contact-interaction quadrature integrals W[a, c, b, d].

    W = g * sum_j phi^A_a phi^A_c phi^B_b phi^B_d * weight over DVR nodes;
    indices (a, c) act on species A, (b, d) on species B.
    """

    coupling: float
    elements: np.ndarray

    @property
    def m_a(self) -> int:
        return self.elements.shape[0]

    @property
    def m_b(self) -> int:
        return self.elements.shape[2]


def build_interaction(basis_a: OrbitalBasis, basis_b: OrbitalBasis, g: float) -> InteractionTensor:
    """Quadrature evaluation of all m_A^2 x m_B^2 contact integrals."""
    if basis_a.grid != basis_b.grid:
        raise ValueError("orbital bases must share one grid")
    ua, ub = basis_a.orbitals, basis_b.orbitals
    ma, mb = basis_a.n_orbitals, basis_b.n_orbitals
    # int phi_a phi_c phi_b phi_d dx = sum_j u_a u_c u_b u_d / weight
    pa = (ua[:, None, :] * ua[None, :, :]).reshape(ma * ma, -1)
    pb = (ub[:, None, :] * ub[None, :, :]).reshape(mb * mb, -1)
    w = (g / basis_a.grid.weight) * (pa @ pb.T)
    elements = w.reshape(ma, ma, mb, mb)
    if g != 0.0:
        floor = SCREENING_REL * np.max(np.abs(elements))
        elements = np.where(np.abs(elements) < floor, 0.0, elements)
    return InteractionTensor(g, elements)


@dataclass
class _PairAction:
    """One ordered orbital pair (a, c) of the loop species: scatter/gather
    rows in its Fock basis plus the W-contracted partner operator."""

    rows_out: np.ndarray
    rows_in: np.ndarray
    signs: np.ndarray
    partner_op: sp.csr_matrix  # acts on the partner species index


@njit(cache=True)
def _fused_pair_apply(
    c, acc, rows_out, rows_in, signs, act_ptr, act_op, op_data, op_indices, op_indptr, op_base
):
    """Accumulate all pair actions: acc[ro] += sign * op @ c[ri] per hop."""
    n_act = len(act_op)
    dim_b = c.shape[1]
    for i in range(n_act):
        o = act_op[i]
        base = op_base[o]
        for h in range(act_ptr[i], act_ptr[i + 1]):
            ri = rows_in[h]
            ro = rows_out[h]
            s = signs[h]
            for j in range(dim_b):
                accu = c[0, 0] * 0.0
                for idx in range(op_indptr[o, j], op_indptr[o, j + 1]):
                    accu += op_data[base + idx] * c[ri, op_indices[base + idx]]
                acc[ro, j] += s * accu


@dataclass
class _FusedActions:
    """Pair actions flattened into contiguous arrays for the jit kernel."""

    rows_out: np.ndarray
    rows_in: np.ndarray
    signs: np.ndarray
    act_ptr: np.ndarray
    act_op: np.ndarray
    op_data: np.ndarray
    op_indices: np.ndarray
    op_indptr: np.ndarray
    op_base: np.ndarray


def _fuse_actions(actions: list) -> "_FusedActions":
    ops = []
    op_index: dict[int, int] = {}
    act_op = []
    for act in actions:
        key = id(act.partner_op)
        if key not in op_index:
            op_index[key] = len(ops)
            ops.append(act.partner_op)
        act_op.append(op_index[key])
    rows_out = np.concatenate([a.rows_out for a in actions])
    rows_in = np.concatenate([a.rows_in for a in actions])
    signs = np.concatenate([a.signs for a in actions])
    act_ptr = np.zeros(len(actions) + 1, dtype=np.int64)
    np.cumsum([len(a.rows_out) for a in actions], out=act_ptr[1:])
    op_data = np.concatenate([op.data for op in ops])
    op_indices = np.concatenate([op.indices.astype(np.int64) for op in ops])
    op_indptr = np.stack([op.indptr.astype(np.int64) for op in ops])
    op_base = np.zeros(len(ops), dtype=np.int64)
    np.cumsum([op.nnz for op in ops[:-1]], out=op_base[1:])
    return _FusedActions(
        rows_out.astype(np.int64),
        rows_in.astype(np.int64),
        signs.astype(np.float64),
        act_ptr,
        np.asarray(act_op, dtype=np.int64),
        op_data,
        op_indices,
        op_indptr,
        op_base,
    )


@dataclass
class SparseHamiltonian:
    """Matrix-free action of the full two-species Hamiltonian."""

    orbitals_a: OrbitalBasis
    orbitals_b: OrbitalBasis
    fock_a: FockBasis
    fock_b: FockBasis
    interaction: InteractionTensor
    tilt_value: float
    h_a: sp.csr_matrix = field(repr=False)
    h_b: sp.csr_matrix = field(repr=False)
    _pair_actions: list = field(repr=False)
    _loop_species: str = field(repr=False)
    _fused: "_FusedActions | None" = field(default=None, repr=False)

    @property
    def dim_a(self) -> int:
        return self.fock_a.dim

    @property
    def dim_b(self) -> int:
        return self.fock_b.dim

    @property
    def dimension(self) -> int:
        return self.dim_a * self.dim_b

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        """H acting on a coefficient matrix of shape (dim_A, dim_B)."""
        out = self.h_a @ coeffs
        out += (self.h_b @ coeffs.T).T
        if self._pair_actions:
            c_loop = coeffs if self._loop_species == "A" else np.ascontiguousarray(coeffs.T)
            acc = np.zeros_like(c_loop)
            if _HAVE_NUMBA:
                if self._fused is None:
                    self._fused = _fuse_actions(self._pair_actions)
                f = self._fused
                _fused_pair_apply(
                    c_loop, acc, f.rows_out, f.rows_in, f.signs, f.act_ptr,
                    f.act_op, f.op_data, f.op_indices, f.op_indptr, f.op_base,
                )
            else:
                for act in self._pair_actions:
                    block = act.signs[:, None] * c_loop[act.rows_in]
                    acc[act.rows_out] += (act.partner_op @ block.T).T
            out += acc if self._loop_species == "A" else acc.T
        return out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v.reshape(self.dim_a, self.dim_b)).ravel()

    def as_linear_operator(self):
        from scipy.sparse.linalg import LinearOperator

        n = self.dimension
        return LinearOperator((n, n), matvec=self.matvec, dtype=np.complex128)

    def expectation(self, state: ManyBodyState) -> float:
        c = state.coeffs
        return float(np.vdot(c, self.apply(c)).real)

    def scaled(self, factor: float) -> "_ScaledOperator":
        return _ScaledOperator(self, factor)


@dataclass
class _ScaledOperator:
    """Lightweight view factor * H (used e.g. for time-reversed propagation)."""

    base: SparseHamiltonian
    factor: float

    @property
    def dim_a(self):
        return self.base.dim_a

    @property
    def dim_b(self):
        return self.base.dim_b

    def apply(self, coeffs):
        return self.factor * self.base.apply(coeffs)

    def expectation(self, state):
        return self.factor * self.base.expectation(state)


def _one_body_fock(
    orbitals: OrbitalBasis, fock: FockBasis, tilt: float
) -> sp.csr_matrix:
    h = np.diag(orbitals.energies) + tilt * orbitals.position_matrix
    return one_body_matrix(fock, h)


def _build_pair_actions(
    loop_fock: FockBasis,
    partner_fock: FockBasis,
    w_loop_first: np.ndarray,
) -> list:
    """Pair actions for the loop species; ``w_loop_first[a, c]`` must be the
    (m_p x m_p) partner-side block of the interaction tensor."""
    m = loop_fock.n_orbitals
    table = loop_fock.couplings()
    floor = SCREENING_REL * max(np.max(np.abs(w_loop_first)), 1e-300)
    actions = []
    partner_cache: dict[tuple[int, int], sp.csr_matrix] = {}
    for a in range(m):
        for c in range(m):
            block = w_loop_first[a, c]
            if np.max(np.abs(block)) <= floor:
                continue
            p = a * m + c
            sl = slice(table.ptr[p], table.ptr[p + 1])
            if sl.start == sl.stop:
                continue
            key = (min(a, c), max(a, c))  # W symmetric under a <-> c
            if key not in partner_cache:
                partner_cache[key] = one_body_matrix(partner_fock, block)
            actions.append(
                _PairAction(
                    table.rows_out[sl].copy(),
                    table.rows_in[sl].copy(),
                    table.signs[sl].astype(np.float64),
                    partner_cache[key],
                )
            )
    return actions


def assemble(
    basis_a: OrbitalBasis,
    basis_b: OrbitalBasis,
    fock_a: FockBasis,
    fock_b: FockBasis,
    interaction: InteractionTensor,
    tilt: float,
    check_hermiticity: bool = True,
) -> SparseHamiltonian:
    """Assemble the many-body Hamiltonian with the given tilt applied."""
    if fock_a.n_orbitals != basis_a.n_orbitals or fock_b.n_orbitals != basis_b.n_orbitals:
        raise ValueError("Fock and orbital bases disagree on orbital count")
    if interaction.elements.shape != (
        basis_a.n_orbitals,
        basis_a.n_orbitals,
        basis_b.n_orbitals,
        basis_b.n_orbitals,
    ):
        raise ValueError("interaction tensor shape mismatch")
    h_a = _one_body_fock(basis_a, fock_a, tilt)
    h_b = _one_body_fock(basis_b, fock_b, tilt)
    # loop over the species with more orbitals: partner operators stay small
    if interaction.coupling == 0.0:
        actions, loop_species = [], "A"
    elif basis_a.n_orbitals >= basis_b.n_orbitals:
        actions = _build_pair_actions(fock_a, fock_b, interaction.elements)
        loop_species = "A"
    else:
        w_b_first = np.transpose(interaction.elements, (2, 3, 0, 1))
        actions = _build_pair_actions(fock_b, fock_a, w_b_first)
        loop_species = "B"
    h = SparseHamiltonian(
        basis_a, basis_b, fock_a, fock_b, interaction, tilt, h_a, h_b, actions, loop_species
    )
    if check_hermiticity:
        _check_hermitian(h)
    return h


def _check_hermitian(h: SparseHamiltonian, n_probes: int = 2) -> None:
    rng = np.random.default_rng(7)
    shape = (h.dim_a, h.dim_b)
    for _ in range(n_probes):
        u = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        lhs = np.vdot(u, h.apply(v))
        rhs = np.vdot(h.apply(u), v)
        scale = max(abs(lhs), abs(rhs), 1.0)
        if abs(lhs - rhs) / scale > HERMITICITY_CHECK_TOL:
            raise AssemblyError(f"assembled operator is not Hermitian: {abs(lhs - rhs) / scale:.3e}")


def requench(h: SparseHamiltonian, d_new: float) -> SparseHamiltonian:
    """Replace the tilt one-body term; interaction content is shared."""
    h_a = _one_body_fock(h.orbitals_a, h.fock_a, d_new)
    h_b = _one_body_fock(h.orbitals_b, h.fock_b, d_new)
    return SparseHamiltonian(
        h.orbitals_a,
        h.orbitals_b,
        h.fock_a,
        h.fock_b,
        h.interaction,
        d_new,
        h_a,
        h_b,
        h._pair_actions,
        h._loop_species,
        h._fused,
    )
