"""Few-fermion double-well tunneling simulator.

Numerically exact configuration-interaction dynamics of a mass-imbalanced
two-species fermionic mixture in a one-dimensional double well: sine-DVR
single-particle problems, sparse many-body Hamiltonian, Krylov time
propagation, tunneling observables and simulated absorption imaging.
"""

__version__ = "0.1.0"

from .dvr import (
    GridSpec,
    SpeciesParams,
    TrapParams,
    OrbitalBasis,
    build_kinetic,
    build_potential,
    solve_single_particle,
    effective_coupling,
)
from .fock import FockBasis, ManyBodyState, enumerate_basis, apply_one_body, annihilate_at
from .hamiltonian import InteractionTensor, SparseHamiltonian, build_interaction, assemble, requench
from .dynamics import PropagationConfig, GroundStateResult, ground_state, propagate
from .observables import (
    OneBodyRDM,
    SchmidtSpectrum,
    ObservableSeries,
    rdm1,
    left_population,
    pair_probability,
    schmidt_spectrum,
    entropy,
    fragmentation,
    spectrum,
)
from .singleshot import ShotConfig, ShotRecord, ShotAverage, draw_position, single_shot, average_shots
from .harness import (
    ExperimentConfig,
    ConvergenceReport,
    run_quench,
    sweep_tilt,
    sweep_parameters,
    convergence_study,
)
