"""Figure rendering for run outputs.

Every plotting function writes a PNG next to the CSV data and returns the
path.  Rendering is headless (Agg backend).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import RunResult


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_populations(result: RunResult, out_dir) -> Path:
    arrays = result.series.as_arrays()
    cfg = result.config
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(arrays["times"], arrays["left_pop_a"] / max(cfg.n_a, 1), label="A")
    ax.plot(arrays["times"], arrays["left_pop_b"] / max(cfg.n_b, 1), label="B")
    ax.set_xlabel("t")
    ax.set_ylabel("left-well population fraction")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    return _finish(fig, Path(out_dir) / "populations.png")


def plot_pair_probabilities(result: RunResult, out_dir) -> Path:
    arrays = result.series.as_arrays()
    fig, ax = plt.subplots(figsize=(7, 4))
    for key, label in (("p2_aa", "AA"), ("p2_bb", "BB"), ("p2_ab", "AB")):
        if not np.all(np.isnan(arrays[key])):
            ax.plot(arrays["times"], arrays[key], label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("same-well pair probability")
    ax.legend()
    return _finish(fig, Path(out_dir) / "pair_probabilities.png")


def plot_entropy(result: RunResult, out_dir) -> Path:
    arrays = result.series.as_arrays()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(arrays["times"], arrays["entropy"], label="entropy")
    ax.plot(arrays["times"], arrays["frag_a"], label="fragmentation A")
    ax.plot(arrays["times"], arrays["frag_b"], label="fragmentation B")
    ax.set_xlabel("t")
    ax.legend()
    return _finish(fig, Path(out_dir) / "entropy.png")


def plot_spectra(result: RunResult, out_dir) -> Path:
    omega, pa, pb = result.spectra()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(omega, pa, label="A")
    ax.plot(omega, pb, label="B")
    ax.set_xlabel("omega")
    ax.set_ylabel("P(omega)")
    ax.legend()
    return _finish(fig, Path(out_dir) / "spectra.png")


def plot_densities(result: RunResult, out_dir) -> Path:
    arrays = result.series.as_arrays()
    nodes = result.config.grid.nodes
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for ax, key, label in ((axes[0], "density_a", "A"), (axes[1], "density_b", "B")):
        mesh = ax.pcolormesh(
            nodes, arrays["times"], arrays[key], shading="nearest", cmap="magma"
        )
        ax.set_xlabel("x")
        ax.set_title(f"species {label}")
        fig.colorbar(mesh, ax=ax)
    axes[0].set_ylabel("t")
    return _finish(fig, Path(out_dir) / "densities.png")


def plot_shot_averages(result: RunResult, out_dir) -> list:
    paths = []
    for t_im, avg in sorted(result.shot_averages.items()):
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(avg.image_grid, avg.mean_image["A"], label="A")
        ax.plot(avg.image_grid, avg.mean_image["B"], label="B")
        ax.set_xlabel("x")
        ax.set_ylabel("mean image")
        ax.set_title(f"t = {t_im:g}, {avg.n_shots} shots")
        ax.legend()
        paths.append(_finish(fig, Path(out_dir) / f"shots_t{t_im:g}.png"))
    return paths


def render_all(result: RunResult, out_dir) -> list:
    """Render the full figure set for one run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [
        plot_populations(result, out),
        plot_pair_probabilities(result, out),
        plot_entropy(result, out),
        plot_spectra(result, out),
        plot_densities(result, out),
    ]
    paths.extend(plot_shot_averages(result, out))
    return paths
