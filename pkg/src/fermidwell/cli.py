"""Command-line entry point.

Subcommands: ``run`` (single quench), ``sweep`` (parameter batch),
``shots`` (quench plus single-shot imaging), ``converge`` (orbital-count
study).  Each writes CSV data, a JSON manifest and rendered figures into
the output directory.
"""

import argparse
import sys

from . import harness, plots
from .harness import ConfigError, ExperimentConfig


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument(
        "--preset",
        choices=["paper-sec2", "paper-sec3"],
        default="paper-sec3",
        help="trap preset: narrow (w=0.1) or wide (w=1.0, default) barrier",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermidwell",
        description="Quench dynamics of a mass-imbalanced fermion mixture in a double well.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single quench run")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="parameter sweep")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=harness.SWEEP_AXES)
    p_sweep.add_argument("--values", required=True, help="comma-separated axis values")

    p_shots = sub.add_parser("shots", help="quench run with single-shot imaging")
    _add_common(p_shots)
    p_shots.add_argument("--n-shots", type=int, default=100)
    p_shots.add_argument("--order", choices=["AB", "BA"], default="AB")
    p_shots.add_argument("--times", default="10,30,60", help="comma-separated imaging times")

    p_conv = sub.add_parser("converge", help="orbital-count convergence study")
    _add_common(p_conv)
    p_conv.add_argument("--orbitals", required=True, help="comma-separated orbital counts")
    return parser


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_preset(args.preset)
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, base=cfg)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _progress(t: float) -> None:
    print(f"\r  t = {t:8.2f}", end="", file=sys.stderr, flush=True)


def _finish_run(result, out_dir) -> None:
    harness.write_outputs(result, out_dir)
    plots.render_all(result, out_dir)
    print(f"\nwrote {out_dir}", file=sys.stderr)


def cmd_run(args) -> int:
    cfg = load_config(args)
    result = harness.run_quench(cfg, progress=_progress)
    _finish_run(result, args.out)
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values must list at least one number")
    entries = harness.sweep_parameters(cfg, args.axis, values)
    for entry in entries:
        sub_dir = f"{args.out}/{args.axis}_{entry.value:g}"
        if entry.result is None:
            print(f"skipped {args.axis}={entry.value:g}: {entry.skipped_reason}", file=sys.stderr)
            continue
        _finish_run(entry.result, sub_dir)
    return 0


def cmd_shots(args) -> int:
    cfg = load_config(args)
    times = tuple(float(v) for v in args.times.split(",") if v.strip())
    cfg = cfg.replace(n_shots=args.n_shots, shot_order=args.order, shot_times=times)
    result = harness.run_quench(cfg, progress=_progress)
    _finish_run(result, args.out)
    for t_im, avg in sorted(result.shot_averages.items()):
        print(
            f"t={t_im:g}: left fractions A={avg.left_fraction['A']:.4f}, "
            f"B={avg.left_fraction['B']:.4f}",
            file=sys.stderr,
        )
    return 0


def cmd_converge(args) -> int:
    cfg = load_config(args)
    counts = [int(v) for v in args.orbitals.split(",") if v.strip()]
    if len(counts) < 2:
        raise ConfigError("--orbitals must list at least two counts")
    report = harness.convergence_study(cfg, counts)
    harness.write_convergence(report, cfg, args.out)
    for m in report.orbital_counts:
        print(
            f"m={m}: max deviation A={report.max_deviation(m, 'A'):.4f}, "
            f"B={report.max_deviation(m, 'B'):.4f}",
            file=sys.stderr,
        )
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "shots": cmd_shots, "converge": cmd_converge}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
