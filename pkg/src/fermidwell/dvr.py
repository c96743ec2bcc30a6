"""Sine-DVR discretization, trap potentials and single-particle eigenbases.

The spatial domain is a hard-wall box discretized on the interior nodes of a
sine DVR.  All single-particle quantities (kinetic matrix, trap potential,
orbitals, position matrix, half-space overlaps) live on this grid and are
consumed by the many-body modules.  Units: lengths in sqrt(hbar/(M_A w_perp)),
energies in hbar*w_perp, masses in M_A.
"""

from dataclasses import dataclass, field

import numpy as np

#: |zeta(1/2)| entering the effective 1D coupling of a transversally
#: confined mixture.
ZETA_HALF_ABS = 1.4603545088095868

ORTHONORMALITY_TOL = 1e-10


class EigensolverError(RuntimeError):
    """Single-particle eigensolve failed to reach the requested accuracy."""


@dataclass(frozen=True)
class GridSpec:
    """Interior sine-DVR nodes of a hard-wall box [x_min, x_max]."""

    x_min: float = -40.0
    x_max: float = 40.0
    n_points: int = 400

    def __post_init__(self):
        if not self.x_min < 0.0 < self.x_max:
            raise ValueError("box must contain x=0 strictly in its interior")
        if self.n_points < 64:
            raise ValueError("n_points must be at least 64")
        if np.any(np.isclose(self.nodes, 0.0, atol=1e-12)):
            raise ValueError("a grid node coincides with x=0; the left/right partition is ambiguous")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def spacing(self) -> float:
        """Uniform node spacing; also the DVR quadrature weight."""
        return self.length / (self.n_points + 1)

    @property
    def nodes(self) -> np.ndarray:
        j = np.arange(1, self.n_points + 1)
        return self.x_min + j * self.spacing

    @property
    def weight(self) -> float:
        return self.spacing


@dataclass(frozen=True)
class SpeciesParams:
    """Mass and longitudinal trap frequency of one fermionic component."""

    mass: float
    omega: float
    label: str

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.omega < 0:
            raise ValueError("omega must be non-negative")
        if self.label not in ("A", "B"):
            raise ValueError("species label must be 'A' or 'B'")


@dataclass(frozen=True)
class TrapParams:
    """Double-well parameters: Gaussian barrier plus linear tilt.

    V(x) = 1/2 M w^2 x^2 + V0/(w_b sqrt(2 pi)) exp(-x^2/(2 w_b^2)) + d x
    """

    barrier_height: float = 1.0
    barrier_width: float = 1.0
    tilt: float = 0.0

    def __post_init__(self):
        if self.barrier_height < 0:
            raise ValueError("barrier height must be non-negative")
        if self.barrier_width <= 0:
            raise ValueError("barrier width must be positive")

    def with_tilt(self, tilt: float) -> "TrapParams":
        return TrapParams(self.barrier_height, self.barrier_width, tilt)


@dataclass
class OrbitalBasis:
    """Lowest eigenstates of a single-particle trap Hamiltonian.

    ``orbitals[a, j]`` is the DVR coefficient of orbital a at node j; the
    coefficient vectors are l2-orthonormal, so the wavefunction value at a
    node is ``orbitals[a, j] / sqrt(grid.weight)``.
    """

    grid: GridSpec
    species: SpeciesParams
    n_orbitals: int
    energies: np.ndarray
    orbitals: np.ndarray
    position_matrix: np.ndarray = field(init=False)
    overlap_left: np.ndarray = field(init=False)
    overlap_right: np.ndarray = field(init=False)

    def __post_init__(self):
        u = self.orbitals
        gram = u @ u.T
        resid = np.max(np.abs(gram - np.eye(self.n_orbitals)))
        if resid > ORTHONORMALITY_TOL:
            raise EigensolverError(f"orbitals not orthonormal: residual {resid:.3e}")
        if np.any(np.diff(self.energies) < -1e-12):
            raise EigensolverError("orbital energies not sorted ascending")
        x = self.grid.nodes
        self.position_matrix = (u * x) @ u.T
        left = x < 0.0
        self.overlap_left = (u[:, left]) @ u[:, left].T
        self.overlap_right = (u[:, ~left]) @ u[:, ~left].T

    def values_at_nodes(self) -> np.ndarray:
        """Orbital wavefunction values at the grid nodes."""
        return self.orbitals / np.sqrt(self.grid.weight)


def _sine_transform(n: int) -> np.ndarray:
    j = np.arange(1, n + 1)
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(j, j) * np.pi / (n + 1))


def build_kinetic(grid: GridSpec, mass: float) -> np.ndarray:
    """Exact sine-DVR kinetic matrix -1/(2M) d^2/dx^2 with hard walls.

    Constructed by transforming the diagonal particle-in-a-box spectrum
    k^2 pi^2 / (2 M L^2) from the sine basis to the node basis.
    """
    if mass <= 0:
        raise ValueError("mass must be positive")
    n = grid.n_points
    k = np.arange(1, n + 1)
    e_box = (k * np.pi / grid.length) ** 2 / (2.0 * mass)
    u = _sine_transform(n)
    kin = (u * e_box) @ u
    return 0.5 * (kin + kin.T)


def build_potential(grid: GridSpec, species: SpeciesParams, trap: TrapParams) -> np.ndarray:
    """Trap potential evaluated at the DVR nodes."""
    x = grid.nodes
    harmonic = 0.5 * species.mass * species.omega**2 * x**2
    w_b = trap.barrier_width
    barrier = trap.barrier_height / (w_b * np.sqrt(2.0 * np.pi)) * np.exp(-(x**2) / (2.0 * w_b**2))
    return harmonic + barrier + trap.tilt * x


def solve_single_particle(
    grid: GridSpec,
    species: SpeciesParams,
    trap: TrapParams,
    n_orbitals: int,
) -> OrbitalBasis:
    """Lowest ``n_orbitals`` eigenpairs of the single-particle Hamiltonian."""
    if not 1 <= n_orbitals <= grid.n_points:
        raise ValueError("n_orbitals must lie in [1, n_points]")
    h = build_kinetic(grid, species.mass) + np.diag(build_potential(grid, species, trap))
    energies, vectors = np.linalg.eigh(h)
    energies = energies[:n_orbitals]
    orbitals = vectors[:, :n_orbitals].T.copy()
    # fix a deterministic sign: largest-magnitude coefficient positive
    for a in range(n_orbitals):
        peak = np.argmax(np.abs(orbitals[a]))
        if orbitals[a, peak] < 0:
            orbitals[a] = -orbitals[a]
    resid = np.max(np.abs(h @ orbitals.T - orbitals.T * energies))
    if resid > 1e-8:
        raise EigensolverError(f"eigensolver residual {resid:.3e} exceeds 1e-8")
    return OrbitalBasis(grid, species, n_orbitals, energies, orbitals)


def effective_coupling(a_s: float, omega_perp: float, mu: float) -> float:
    """Effective 1D interspecies coupling of a transversally confined pair.

    g = 2 a_s / (mu a_perp^2) * (1 - |zeta(1/2)| a_s / (sqrt(2) a_perp))^-1
    with a_perp = 1/sqrt(mu omega_perp).  Diverges at the confinement-induced
    resonance a_s = sqrt(2) a_perp / |zeta(1/2)|.
    """
    if omega_perp <= 0 or mu <= 0:
        raise ValueError("omega_perp and mu must be positive")
    a_perp = 1.0 / np.sqrt(mu * omega_perp)
    denom = 1.0 - ZETA_HALF_ABS * a_s / (np.sqrt(2.0) * a_perp)
    if abs(denom) < 1e-12:
        raise ZeroDivisionError("scattering length at the confinement-induced resonance")
    return 2.0 * a_s / (mu * a_perp**2) / denom


def reduced_mass(mass_a: float, mass_b: float) -> float:
    return mass_a * mass_b / (mass_a + mass_b)
