"""Simulated in-situ absorption images by sequential conditional sampling.

One shot draws particle positions of the first imaged species one at a time
from the instantaneous conditional one-body density, collapsing the exact
many-body state by field-operator annihilation after each draw, then images
the second species from the remainder.  Positions are convolved with a
Gaussian point spread function on the image grid.
"""

from dataclasses import dataclass, field

import numpy as np

from .dvr import GridSpec, OrbitalBasis
from .fock import ManyBodyState, annihilate_at
from .observables import rdm1

#: retry cap for the measure-zero event of annihilating at a node of
#: (numerically) vanishing density
MAX_RETRIES = 100


class SamplingError(RuntimeError):
    """Position sampling or state collapse failed."""


@dataclass(frozen=True)
class ShotConfig:
    order: str = "AB"
    psf_width: float = 1.0
    n_shots: int = 100
    seed: int = 0
    image_grid: np.ndarray | None = None

    def __post_init__(self):
        if self.order not in ("AB", "BA"):
            raise ValueError("imaging order must be 'AB' or 'BA'")
        if self.psf_width <= 0:
            raise ValueError("psf_width must be positive")
        if self.n_shots < 1:
            raise ValueError("n_shots must be at least 1")

    def resolve_grid(self, grid: GridSpec) -> np.ndarray:
        if self.image_grid is not None:
            return np.asarray(self.image_grid)
        return grid.nodes


@dataclass
class ShotRecord:
    """One simulated absorption image pair with imaging-order metadata."""

    order: str
    time: float
    positions_first: np.ndarray
    positions_second: np.ndarray
    image_grid: np.ndarray
    image_first: np.ndarray
    image_second: np.ndarray

    def positions(self, species: str) -> np.ndarray:
        return self.positions_first if species == self.order[0] else self.positions_second

    def image(self, species: str) -> np.ndarray:
        return self.image_first if species == self.order[0] else self.image_second


@dataclass
class ShotAverage:
    """Pointwise mean image per species and its left-well integral."""

    time: float
    image_grid: np.ndarray
    mean_image: dict
    left_fraction: dict
    n_shots: int


def draw_position(density: np.ndarray, grid: GridSpec, rng: np.random.Generator) -> tuple[float, int]:
    """Rejection-sample a node index from a non-negative density profile.

    Propose a node uniformly, accept when density exceeds a uniform draw on
    [0, max density]; the stationary law is density / sum(density) on the
    uniform grid.
    """
    density = np.asarray(density)
    peak = np.max(density)
    if not peak > 0:
        raise SamplingError("cannot sample from an identically zero density")
    n = len(density)
    for _ in range(1000 * n):
        j = int(rng.integers(n))
        if density[j] > rng.uniform(0.0, peak):
            return float(grid.nodes[j]), j
    raise SamplingError("rejection sampling failed to accept")


def _psf_profile(positions: np.ndarray, image_grid: np.ndarray, width: float) -> np.ndarray:
    if len(positions) == 0:
        return np.zeros_like(image_grid)
    return np.exp(-((image_grid[:, None] - positions[None, :]) ** 2) / (2.0 * width**2)).sum(axis=1)


def _sample_species(
    state: ManyBodyState,
    species: str,
    orbital: OrbitalBasis,
    rng: np.random.Generator,
) -> tuple[ManyBodyState, np.ndarray]:
    """Draw all particles of one species, collapsing the state after each."""
    grid = orbital.grid
    sqrt_w = np.sqrt(grid.weight)
    n = state.basis_a.n_particles if species == "A" else state.basis_b.n_particles
    positions = []
    current = state
    for _ in range(n):
        density = rdm1(current, species).spatial_density(orbital)
        density = np.clip(density, 0.0, None)
        for attempt in range(MAX_RETRIES):
            x, j = draw_position(density, grid, rng)
            amplitudes = orbital.orbitals[:, j] / sqrt_w
            collapsed = annihilate_at(current, species, amplitudes)
            norm2 = collapsed.norm**2
            if norm2 > 1e-12:
                break
        else:
            raise SamplingError("renormalization failed repeatedly during shot collapse")
        positions.append(x)
        current = collapsed.normalized()
    return current, np.asarray(positions)


def single_shot(
    state: ManyBodyState,
    basis_a: OrbitalBasis,
    basis_b: OrbitalBasis,
    cfg: ShotConfig,
    rng: np.random.Generator,
) -> ShotRecord:
    """Simulate one absorption image pair in the configured species order."""
    state = state.normalized()
    image_grid = cfg.resolve_grid(basis_a.grid)
    first, second = cfg.order[0], cfg.order[1]
    orbital = {"A": basis_a, "B": basis_b}
    remainder, pos_first = _sample_species(state, first, orbital[first], rng)
    _, pos_second = _sample_species(remainder, second, orbital[second], rng)
    return ShotRecord(
        cfg.order,
        state.time,
        pos_first,
        pos_second,
        image_grid,
        _psf_profile(pos_first, image_grid, cfg.psf_width),
        _psf_profile(pos_second, image_grid, cfg.psf_width),
    )


def run_shots(
    state: ManyBodyState,
    basis_a: OrbitalBasis,
    basis_b: OrbitalBasis,
    cfg: ShotConfig,
) -> list[ShotRecord]:
    """Independent shots with per-shot RNG streams derived from (seed, index)."""
    records = []
    for k in range(cfg.n_shots):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=cfg.seed, spawn_key=(k,)))
        records.append(single_shot(state, basis_a, basis_b, cfg, rng))
    return records


def average_shots(records: list[ShotRecord], psf_width: float | None = None) -> ShotAverage:
    """Pointwise mean image and PSF-normalized left-well fraction per species.

    The raw sum-of-Gaussians image integrates to N * w_PSF * sqrt(2 pi); the
    left fraction divides that factor out so its infinite-shot limit is the
    left-well expectation of the one-body density.
    """
    if not records:
        raise ValueError("cannot average an empty list of shots")
    grid = records[0].image_grid
    for r in records[1:]:
        if r.image_grid.shape != grid.shape or np.max(np.abs(r.image_grid - grid)) > 1e-12:
            raise ValueError("shot records use inconsistent image grids")
        if r.order != records[0].order:
            raise ValueError("shot records use inconsistent imaging order")
    if psf_width is None:
        psf_width = 1.0
    dx = grid[1] - grid[0]
    norm = psf_width * np.sqrt(2.0 * np.pi)
    mean_image, left_fraction = {}, {}
    for species in ("A", "B"):
        mean = np.mean([r.image(species) for r in records], axis=0)
        mean_image[species] = mean
        left_fraction[species] = float(np.sum(mean[grid < 0.0]) * dx / norm)
    return ShotAverage(records[0].time, grid, mean_image, left_fraction, len(records))
