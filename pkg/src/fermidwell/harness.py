"""Experiment orchestration: configuration, the quench pipeline, parameter
sweeps, convergence studies and data export.

A run solves the tilt-free single-particle orbitals once, finds the
many-body ground state of the tilted trap, quenches the tilt and propagates
with an observable sink.  Identical configuration and seed give bit-identical
output files.
"""

import dataclasses
import json
import warnings
import zlib
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from . import dynamics, observables
from .dvr import GridSpec, OrbitalBasis, SpeciesParams, TrapParams, solve_single_particle
from .fock import (
    CapacityError,
    DEFAULT_CAPACITY,
    FockBasis,
    ManyBodyState,
    determinant_coefficients,
    enumerate_basis,
)
from .hamiltonian import assemble, build_interaction, requench
from .observables import ObservableSeries, default_omega_grid, measure_all, spectrum
from .singleshot import ShotAverage, ShotConfig, ShotRecord, average_shots, run_shots

#: mass-imbalance band outside of which a warning is emitted
MASS_RATIO_BAND = (2.0, 15.0)

#: tilt thresholds separating negligible / intermediate / pinned response
TILT_BANDS = (0.03, 0.09)

SWEEP_AXES = ("g", "mass_ratio", "particle_number", "barrier_height", "tilt")


class ConfigError(ValueError):
    """Invalid or unknown experiment configuration content."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat, fully resolved description of one quench experiment."""

    x_min: float = -40.0
    x_max: float = 40.0
    n_points: int = 400
    mass_a: float = 1.0
    mass_b: float = 6.0
    omega: float = 0.1
    barrier_height: float = 1.0
    barrier_width: float = 1.0
    d_initial: float = 0.2
    d_final: float = 0.0
    g_ab: float = 0.1
    n_a: int = 3
    n_b: int = 3
    # calibrated per species: the pre-quench tilt displaces the light species
    # to the trap edge, so it needs far more trap orbitals than the heavy one
    n_orbitals_a: int = 25
    n_orbitals_b: int = 12
    t_final: float = 200.0
    dt_out: float = 0.2
    krylov_dim: int = 20
    tol: float = 1e-9
    dt_max: float = 2.0
    shot_times: tuple = ()
    n_shots: int = 0
    shot_order: str = "AB"
    psf_width: float = 1.0
    seed: int = 1234
    capacity: int = DEFAULT_CAPACITY

    def __post_init__(self):
        for name in (
            "x_min", "x_max", "mass_a", "mass_b", "omega", "barrier_height",
            "barrier_width", "d_initial", "d_final", "g_ab", "t_final",
            "dt_out", "tol", "dt_max", "psf_width",
        ):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.n_a < 0 or self.n_b < 0:
            raise ConfigError("particle numbers must be non-negative")
        if self.n_orbitals_a < max(1, self.n_a) or self.n_orbitals_b < max(1, self.n_b):
            raise ConfigError("orbital counts must be at least the particle numbers")
        if not (self.d_initial >= self.d_final >= 0.0):
            warnings.warn(
                "tilt protocol is usually d_initial >= d_final >= 0; proceeding anyway",
                stacklevel=2,
            )

    # --- derived builders -------------------------------------------------
    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.x_min, self.x_max, self.n_points)

    @property
    def species_a(self) -> SpeciesParams:
        return SpeciesParams(self.mass_a, self.omega, "A")

    @property
    def species_b(self) -> SpeciesParams:
        return SpeciesParams(self.mass_b, self.omega, "B")

    @property
    def trap(self) -> TrapParams:
        return TrapParams(self.barrier_height, self.barrier_width, 0.0)

    @property
    def propagation(self) -> dynamics.PropagationConfig:
        return dynamics.PropagationConfig(
            self.t_final, self.dt_out, self.krylov_dim, self.tol, self.dt_max
        )

    @property
    def product_dimension(self) -> int:
        return comb(self.n_orbitals_a, self.n_a) * comb(self.n_orbitals_b, self.n_b)

    def check_capacity(self) -> None:
        if self.product_dimension > self.capacity:
            raise CapacityError(
                f"product dimension {self.product_dimension} exceeds capacity {self.capacity}"
            )

    def replace(self, **kwargs) -> "ExperimentConfig":
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["shot_times"] = list(self.shot_times)
        return out

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "ExperimentConfig":
        """Named trap presets: 'paper-sec2' (narrow barrier, w=0.1) and
        'paper-sec3' (wide barrier, w=1.0, the dynamics default)."""
        widths = {"paper-sec2": 0.1, "paper-sec3": 1.0}
        if name not in widths:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(widths)}")
        overrides.setdefault("barrier_width", widths[name])
        return cls(**overrides)

    @classmethod
    def from_mapping(cls, mapping: dict, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        base = base if base is not None else cls()
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for key, raw in mapping.items():
            if key not in fields:
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = _coerce(key, raw, type(getattr(base, key)))
        return dataclasses.replace(base, **values)

    @classmethod
    def from_file(cls, path, base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        """Flat key=value text file; '#' starts a comment; unknown keys fail."""
        mapping = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            mapping[key.strip()] = value.strip()
        return cls.from_mapping(mapping, base)


def _coerce(key, raw, kind):
    if not isinstance(raw, str):
        return raw
    try:
        if key == "shot_times":
            return tuple(float(v) for v in raw.split(",") if v.strip()) if raw else ()
        if kind is tuple:
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"cannot parse value {raw!r} for key {key!r}") from exc


@dataclass
class RunResult:
    """Everything produced by one quench run."""

    config: ExperimentConfig
    series: ObservableSeries
    ground_energy: float
    orbitals_a: OrbitalBasis
    orbitals_b: OrbitalBasis
    snapshots: dict
    final_state: ManyBodyState
    shot_averages: dict = field(default_factory=dict)
    shot_records: dict = field(default_factory=dict)

    def spectra(self, omega: np.ndarray | None = None):
        """Fourier power of both left-population series on a common grid."""
        arrays = self.series.as_arrays()
        if omega is None:
            omega = default_omega_grid()
        pa = spectrum(arrays["times"], arrays["left_pop_a"], omega)
        pb = spectrum(arrays["times"], arrays["left_pop_b"], omega)
        return omega, pa, pb


@dataclass
class SweepEntry:
    """One point of a parameter sweep; skipped runs carry the reason."""

    value: float
    result: RunResult | None = None
    skipped_reason: str | None = None


@dataclass
class ConvergenceReport:
    """Left-population deviation of each configuration from the reference.

    Deviations are |rho_C - rho_ref|_L / N_sigma time series; the reference
    is the largest orbital count in the study.
    """

    reference_orbitals: int
    orbital_counts: list
    times: np.ndarray
    deviation_a: dict
    deviation_b: dict

    def max_deviation(self, count: int, species: str) -> float:
        dev = self.deviation_a if species == "A" else self.deviation_b
        return float(np.max(dev[count]))


def sweep_seed(base_seed: int, value) -> int:
    """Base seed plus a stable hash of the axis value."""
    return int(base_seed) + zlib.crc32(repr(value).encode())


def tilt_band(d: float) -> str:
    """Qualitative postquench response regime of the tilt value."""
    if d < TILT_BANDS[0]:
        return "negligible"
    if d <= TILT_BANDS[1]:
        return "intermediate"
    return "pinned"


def _tilted_determinant(orbitals: OrbitalBasis, fock: FockBasis, tilt: float) -> np.ndarray:
    """Non-interacting tilted ground determinant expanded over the basis."""
    h = np.diag(orbitals.energies) + tilt * orbitals.position_matrix
    _, vecs = np.linalg.eigh(h)
    return determinant_coefficients(fock, vecs[:, : fock.n_particles])


def run_quench(cfg: ExperimentConfig, progress=None) -> RunResult:
    """Full pipeline: orbitals, ground state of the tilted trap, tilt quench,
    propagation with an observable sink, optional single-shot snapshots."""
    cfg.check_capacity()
    grid = cfg.grid
    try:
        orbitals_a = solve_single_particle(grid, cfg.species_a, cfg.trap, cfg.n_orbitals_a)
        orbitals_b = solve_single_particle(grid, cfg.species_b, cfg.trap, cfg.n_orbitals_b)
    except Exception as exc:
        raise RuntimeError(f"orbital stage failed: {exc}") from exc
    fock_a = enumerate_basis(cfg.n_orbitals_a, cfg.n_a, cfg.capacity)
    fock_b = enumerate_basis(cfg.n_orbitals_b, cfg.n_b, cfg.capacity)
    try:
        interaction = build_interaction(orbitals_a, orbitals_b, cfg.g_ab)
        h_initial = assemble(orbitals_a, orbitals_b, fock_a, fock_b, interaction, cfg.d_initial)
    except Exception as exc:
        raise RuntimeError(f"assembly stage failed: {exc}") from exc
    try:
        guess = np.outer(
            _tilted_determinant(orbitals_a, fock_a, cfg.d_initial),
            _tilted_determinant(orbitals_b, fock_b, cfg.d_initial),
        ).ravel()
        gs = dynamics.ground_state(h_initial, seed=cfg.seed, guess=guess)
    except Exception as exc:
        raise RuntimeError(f"ground-state stage failed: {exc}") from exc
    h_final = requench(h_initial, cfg.d_final)

    series = ObservableSeries()
    snapshots: dict[float, ManyBodyState] = {}
    shot_times = sorted(set(float(t) for t in cfg.shot_times))

    def sink(state: ManyBodyState):
        measure_all(state, orbitals_a, orbitals_b, series)
        for t_im in shot_times:
            if abs(state.time - t_im) <= 0.5 * cfg.dt_out and t_im not in snapshots:
                snapshots[t_im] = state.copy()
        if progress is not None:
            progress(state.time)

    try:
        final = dynamics.propagate(gs.state, h_final, cfg.propagation, sink)
    except Exception as exc:
        raise RuntimeError(f"propagation stage failed: {exc}") from exc

    result = RunResult(
        cfg, series, gs.energy, orbitals_a, orbitals_b, snapshots, final
    )
    if cfg.n_shots > 0 and snapshots:
        shot_cfg_base = ShotConfig(cfg.shot_order, cfg.psf_width, cfg.n_shots, cfg.seed)
        for t_im, snap in sorted(snapshots.items()):
            shot_cfg = dataclasses.replace(
                shot_cfg_base, seed=sweep_seed(cfg.seed, ("shots", t_im))
            )
            records = run_shots(snap, orbitals_a, orbitals_b, shot_cfg)
            result.shot_records[t_im] = records
            result.shot_averages[t_im] = average_shots(records, cfg.psf_width)
    return result


def sweep_tilt(cfg: ExperimentConfig, d_values) -> dict:
    """One quench per postquench tilt; entries carry the response band."""
    out = {}
    for d in d_values:
        if not 0.0 <= d < cfg.d_initial:
            raise ConfigError(f"postquench tilt {d} must lie in [0, d_initial)")
        run_cfg = cfg.replace(d_final=float(d), seed=sweep_seed(cfg.seed, float(d)))
        out[float(d)] = (tilt_band(float(d)), run_quench(run_cfg))
    return out


def _apply_axis(cfg: ExperimentConfig, axis: str, value: float) -> ExperimentConfig:
    if axis == "g":
        return cfg.replace(g_ab=float(value))
    if axis == "mass_ratio":
        lo, hi = MASS_RATIO_BAND
        if not lo <= value <= hi:
            warnings.warn(
                f"mass ratio {value} outside the validated band [{lo}, {hi}]",
                stacklevel=3,
            )
        return cfg.replace(mass_b=cfg.mass_a * float(value))
    if axis == "particle_number":
        n = int(value)
        return cfg.replace(n_a=n, n_b=n)
    if axis == "barrier_height":
        return cfg.replace(barrier_height=float(value))
    if axis == "tilt":
        return cfg.replace(d_final=float(value))
    raise ConfigError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


def sweep_parameters(cfg: ExperimentConfig, axis: str, values) -> list:
    """Batch of runs along one axis with the per-value seed policy.

    Runs whose basis would exceed the capacity budget are skipped with the
    reason recorded instead of aborting the sweep.
    """
    entries = []
    for value in values:
        run_cfg = _apply_axis(cfg, axis, value).replace(seed=sweep_seed(cfg.seed, (axis, float(value))))
        try:
            run_cfg.check_capacity()
        except CapacityError as exc:
            entries.append(SweepEntry(float(value), None, str(exc)))
            continue
        entries.append(SweepEntry(float(value), run_quench(run_cfg)))
    return entries


def convergence_study(cfg: ExperimentConfig, orbital_counts) -> ConvergenceReport:
    """Left-population deviation of smaller orbital bases from the largest."""
    counts = sorted(set(int(m) for m in orbital_counts))
    if not counts:
        raise ConfigError("orbital_counts must not be empty")
    runs = {}
    for m in counts:
        runs[m] = run_quench(cfg.replace(n_orbitals_a=m, n_orbitals_b=m))
    ref = counts[-1]
    arrays_ref = runs[ref].series.as_arrays()
    dev_a, dev_b = {}, {}
    for m in counts:
        arrays = runs[m].series.as_arrays()
        dev_a[m] = np.abs(arrays["left_pop_a"] - arrays_ref["left_pop_a"]) / cfg.n_a
        dev_b[m] = np.abs(arrays["left_pop_b"] - arrays_ref["left_pop_b"]) / cfg.n_b
    return ConvergenceReport(ref, counts, arrays_ref["times"], dev_a, dev_b)


# --- data export -----------------------------------------------------------

from . import __version__ as _pkg_version  # noqa: E402  (avoid import cycle at top)


def _header(cfg: ExperimentConfig, columns: str) -> str:
    config_line = json.dumps(cfg.to_dict(), sort_keys=True)
    return f"version: {_pkg_version}\nconfig: {config_line}\n{columns}"


def _savetxt(path: Path, data: np.ndarray, cfg: ExperimentConfig, columns: str) -> None:
    np.savetxt(
        path,
        np.atleast_2d(data),
        fmt="%.17g",
        delimiter=",",
        header=_header(cfg, columns),
    )


def write_outputs(result: RunResult, out_dir) -> dict:
    """Serialize one run: scalar series, density and spectrum matrices, the
    Schmidt spectrum, per-shot records and a JSON manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    arrays = result.series.as_arrays()
    written = []

    table = np.column_stack(
        [
            arrays["times"],
            arrays["left_pop_a"],
            arrays["left_pop_b"],
            arrays["p2_aa"],
            arrays["p2_bb"],
            arrays["p2_ab"],
            arrays["entropy"],
            arrays["frag_a"],
            arrays["frag_b"],
        ]
    )
    _savetxt(
        out / "series.csv",
        table,
        cfg,
        "t,left_pop_A,left_pop_B,p2_AA,p2_BB,p2_AB,entropy,frag_A,frag_B",
    )
    written.append("series.csv")

    nodes = cfg.grid.nodes
    for name, key in (("density_A.csv", "density_a"), ("density_B.csv", "density_b")):
        dens = np.column_stack([arrays["times"], arrays[key]])
        cols = "t," + ",".join(f"x={x:.6g}" for x in nodes)
        _savetxt(out / name, dens, cfg, cols)
        written.append(name)

    omega, pa, pb = result.spectra()
    for name, p in (("spectrum_A.csv", pa), ("spectrum_B.csv", pb)):
        _savetxt(out / name, np.column_stack([omega, p]), cfg, "omega,power")
        written.append(name)

    n_weights = arrays["schmidt"].shape[1]
    cols = "t," + ",".join(f"lambda_{k}" for k in range(1, n_weights + 1))
    _savetxt(out / "schmidt.csv", np.column_stack([arrays["times"], arrays["schmidt"]]), cfg, cols)
    written.append("schmidt.csv")

    if result.shot_records:
        shots_dir = out / "shots"
        shots_dir.mkdir(exist_ok=True)
        for t_im, records in sorted(result.shot_records.items()):
            written.append(_write_shots(shots_dir, cfg, t_im, records, result.shot_averages[t_im]))

    manifest = {
        "version": _pkg_version,
        "config": cfg.to_dict(),
        "ground_energy": result.ground_energy,
        "outputs": written,
        "orbital_energies_A": [float(e) for e in result.orbitals_a.energies],
        "orbital_energies_B": [float(e) for e in result.orbitals_b.energies],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append("manifest.json")
    return manifest


def _write_shots(shots_dir: Path, cfg, t_im, records: list, avg: ShotAverage) -> str:
    name = f"shots_t{t_im:g}.csv"
    lines = [
        f"# version: {_pkg_version}",
        f"# config: {json.dumps(cfg.to_dict(), sort_keys=True)}",
        "# t,shot,species,positions...",
    ]
    for k, rec in enumerate(records):
        for species in ("A", "B"):
            pos = ",".join(f"{x:.17g}" for x in rec.positions(species))
            lines.append(f"{t_im:.17g},{k},{species},{pos}")
    (shots_dir / name).write_text("\n".join(lines) + "\n")
    avg_table = np.column_stack([avg.image_grid, avg.mean_image["A"], avg.mean_image["B"]])
    _savetxt(
        shots_dir / f"average_t{t_im:g}.csv",
        avg_table,
        cfg,
        f"x,mean_image_A,mean_image_B  (left fractions: A={avg.left_fraction['A']:.6g}, "
        f"B={avg.left_fraction['B']:.6g})",
    )
    return f"shots/{name}"


def write_convergence(report: ConvergenceReport, cfg: ExperimentConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = ["t"]
    blocks = [report.times]
    for m in report.orbital_counts:
        cols += [f"dev_A_m{m}", f"dev_B_m{m}"]
        blocks += [report.deviation_a[m], report.deviation_b[m]]
    _savetxt(out / "convergence.csv", np.column_stack(blocks), cfg, ",".join(cols))
    summary = {
        "version": _pkg_version,
        "config": cfg.to_dict(),
        "reference_orbitals": report.reference_orbitals,
        "max_deviation": {
            str(m): {
                "A": report.max_deviation(m, "A"),
                "B": report.max_deviation(m, "B"),
            }
            for m in report.orbital_counts
        },
    }
    (out / "convergence.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
