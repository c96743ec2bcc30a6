"""Measurement functionals: reduced densities, well populations, pair
probabilities, interspecies entanglement and fragmentation, Fourier spectra.

All functionals are pure read-only maps of an immutable state snapshot.
The left/right partition is strictly x < 0 / x > 0; the grid never places a
node at x = 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .dvr import OrbitalBasis
from .fock import FockBasis, ManyBodyState, one_body_matrix

RDM_EIGENVALUE_TOL = 1e-10


@dataclass
class OneBodyRDM:
    """One-body reduced density matrix D[a, c] = <a^dag_a a_c> of one species."""

    species: str
    matrix: np.ndarray
    n_particles: int

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def natural_populations(self) -> np.ndarray:
        """Eigenvalues in descending order (ties broken by orbital index)."""
        vals = np.linalg.eigvalsh(self.matrix)
        return vals[::-1]

    def spatial_density(self, basis: OrbitalBasis) -> np.ndarray:
        """rho(x_j) at the DVR nodes; integrates to N under the quadrature."""
        u = basis.orbitals
        dens = np.einsum("ac,aj,cj->j", self.matrix.real, u, u) / basis.grid.weight
        return dens


@dataclass
class SchmidtSpectrum:
    """Squared singular values of the A x B coefficient matrix, descending."""

    weights: np.ndarray

    @property
    def rank(self) -> int:
        return int(np.sum(self.weights > 1e-14))


@dataclass
class ObservableSeries:
    """Time-stamped record of every scalar observable plus density profiles."""

    times: list = field(default_factory=list)
    left_pop_a: list = field(default_factory=list)
    left_pop_b: list = field(default_factory=list)
    p2_aa: list = field(default_factory=list)
    p2_bb: list = field(default_factory=list)
    p2_ab: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    frag_a: list = field(default_factory=list)
    frag_b: list = field(default_factory=list)
    density_a: list = field(default_factory=list)
    density_b: list = field(default_factory=list)
    schmidt: list = field(default_factory=list)

    def as_arrays(self) -> dict:
        out = {}
        for name in (
            "times",
            "left_pop_a",
            "left_pop_b",
            "p2_aa",
            "p2_bb",
            "p2_ab",
            "entropy",
            "frag_a",
            "frag_b",
        ):
            out[name] = np.asarray(getattr(self, name))
        out["density_a"] = np.asarray(self.density_a)
        out["density_b"] = np.asarray(self.density_b)
        max_rank = max((len(s) for s in self.schmidt), default=0)
        sch = np.zeros((len(self.schmidt), max_rank))
        for i, s in enumerate(self.schmidt):
            sch[i, : len(s)] = s
        out["schmidt"] = sch
        return out


def _species_objects(state: ManyBodyState, species: str) -> tuple[FockBasis, np.ndarray]:
    if species == "A":
        return state.basis_a, state.coeffs
    if species == "B":
        return state.basis_b, state.coeffs.T
    raise ValueError("species must be 'A' or 'B'")


def rdm1(state: ManyBodyState, species: str) -> OneBodyRDM:
    """One-body RDM <a^dag_a a_c> of the requested species."""
    basis, c = _species_objects(state, species)
    t = basis.couplings()
    rowdots = np.einsum("ij,ij->i", c[t.rows_out].conj(), c[t.rows_in])
    vals = rowdots * t.signs
    m = basis.n_orbitals
    pair_ids = t.pair_a.astype(np.int64) * m + t.pair_c
    d = (
        np.bincount(pair_ids, weights=vals.real, minlength=m * m)
        + 1j * np.bincount(pair_ids, weights=vals.imag, minlength=m * m)
    ).reshape(m, m)
    d = 0.5 * (d + d.conj().T)
    return OneBodyRDM(species, d, basis.n_particles)


def left_population(rdm: OneBodyRDM, basis: OrbitalBasis) -> float:
    """Expected particle number in the left well, Tr(D O^L)."""
    return float(np.trace(rdm.matrix @ basis.overlap_left).real)


def _left_number_op(fock: FockBasis, basis: OrbitalBasis):
    return one_body_matrix(fock, basis.overlap_left)


def pair_probability(
    state: ManyBodyState,
    pair: str,
    basis_a: OrbitalBasis,
    basis_b: OrbitalBasis,
) -> float:
    """Probability that two fermions of the given pair share a well.

    Same-species: [<N_L(N_L-1)> + <N_R(N_R-1)>] / (N(N-1)).
    Cross-species: [<N^A_L N^B_L> + <N^A_R N^B_R>] / (N_A N_B).
    """
    c = state.coeffs
    na, nb = state.basis_a.n_particles, state.basis_b.n_particles
    if pair in ("AA", "BB"):
        species = pair[0]
        fock, cc = _species_objects(state, species)
        n = fock.n_particles
        if n < 2:
            raise ValueError(f"pair probability {pair} requires at least two particles")
        orbital = basis_a if species == "A" else basis_b
        op = _left_number_op(fock, orbital)
        z = op @ cc
        n_l = float(np.vdot(cc, z).real)
        n_l2 = float(np.vdot(z, z).real)
        # right-well moments via N_R = N - N_L
        n_r = n - n_l
        n_r2 = n * n - 2 * n * n_l + n_l2
        return ((n_l2 - n_l) + (n_r2 - n_r)) / (n * (n - 1))
    if pair != "AB":
        raise ValueError("pair must be 'AA', 'BB' or 'AB'")
    op_a = _left_number_op(state.basis_a, basis_a)
    op_b = _left_number_op(state.basis_b, basis_b)
    za = op_a @ c
    ll = float(np.sum(c.conj() * ((op_b @ za.T).T)).real)
    nl_a = float(np.vdot(c, za).real)
    nl_b = float(np.vdot(c, (op_b @ c.T).T).real)
    rr = na * nb - na * nl_b - nb * nl_a + ll
    return (ll + rr) / (na * nb)


def schmidt_spectrum(state: ManyBodyState) -> SchmidtSpectrum:
    """Interspecies Schmidt weights (squared singular values of the coefficients)."""
    s = np.linalg.svd(state.coeffs, compute_uv=False)
    return SchmidtSpectrum(np.sort(s**2)[::-1])


def entropy(spec: SchmidtSpectrum) -> float:
    """Von Neumann entropy -sum lam ln lam with the 0 ln 0 = 0 convention."""
    lam = spec.weights[spec.weights > 1e-300]
    return float(-np.sum(lam * np.log(lam)))


def fragmentation(rdm: OneBodyRDM) -> float:
    """N minus the summed N largest natural populations; 0 for a determinant."""
    pops = rdm.natural_populations()
    return float(rdm.n_particles - np.sum(pops[: rdm.n_particles]).real)


def spectrum(
    times: np.ndarray,
    values: np.ndarray,
    omega_grid: np.ndarray,
    detrend: bool = False,
) -> np.ndarray:
    """P(w) = Re[(1/pi) int_0^T f(t) e^{iwt} dt] on the finite record.

    No windowing or detrending is applied unless ``detrend`` subtracts the
    time mean explicitly.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    dt = np.diff(times)
    if len(dt) == 0 or np.max(np.abs(dt - dt[0])) > 1e-9 * max(abs(dt[0]), 1e-30):
        raise ValueError("spectrum requires a uniformly sampled time series")
    f = values - values.mean() if detrend else values
    phases = np.exp(1j * np.outer(omega_grid, times))
    # trapezoid weights on the uniform grid
    w = np.full(len(times), dt[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return (phases @ (f * w)).real / np.pi


def default_omega_grid(n: int = 2000, omega_max: float = 2.0) -> np.ndarray:
    return np.linspace(0.0, omega_max, n)


def spectral_peaks(
    omega: np.ndarray,
    power: np.ndarray,
    threshold_frac: float = 0.1,
    omega_min: float = 0.0,
) -> np.ndarray:
    """Frequencies of local maxima of |P| above a fraction of the global max."""
    mag = np.abs(power)
    sel = omega >= omega_min
    mag_sel = np.where(sel, mag, 0.0)
    floor = threshold_frac * np.max(mag_sel)
    peaks = []
    for i in range(1, len(omega) - 1):
        if sel[i] and mag[i] >= floor and mag[i] > mag[i - 1] and mag[i] >= mag[i + 1]:
            peaks.append(omega[i])
    return np.asarray(peaks)


def measure_all(
    state: ManyBodyState,
    basis_a: OrbitalBasis,
    basis_b: OrbitalBasis,
    series: ObservableSeries,
) -> None:
    """Append one fully populated record for this snapshot to the series."""
    da = rdm1(state, "A")
    db = rdm1(state, "B")
    series.times.append(state.time)
    series.left_pop_a.append(left_population(da, basis_a))
    series.left_pop_b.append(left_population(db, basis_b))
    na, nb = state.basis_a.n_particles, state.basis_b.n_particles
    series.p2_aa.append(
        pair_probability(state, "AA", basis_a, basis_b) if na >= 2 else np.nan
    )
    series.p2_bb.append(
        pair_probability(state, "BB", basis_a, basis_b) if nb >= 2 else np.nan
    )
    series.p2_ab.append(pair_probability(state, "AB", basis_a, basis_b))
    spec = schmidt_spectrum(state)
    series.entropy.append(entropy(spec))
    series.schmidt.append(spec.weights)
    series.frag_a.append(fragmentation(da))
    series.frag_b.append(fragmentation(db))
    series.density_a.append(da.spatial_density(basis_a))
    series.density_b.append(db.spatial_density(basis_b))
