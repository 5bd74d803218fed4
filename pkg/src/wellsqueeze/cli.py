"""Command-line entry point.

Exit status: 0 success, 1 validation/usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np
from scipy import constants

from .control import estimate_si_duration
from .diagnostics import compare_models, validity_window
from .errors import IntegrationError, TruncationError
from .runner import (
    BUILTIN_SCENARIOS,
    default_output_dir,
    emit_density_map,
    prepare,
    resolve_config,
    run_models,
    run_scenario,
)
from .targetgen import TargetSpec, target_coefficients
from .welltrap import WellSpec, coupling_matrix

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _charge(text: str) -> float:
    if text.strip().lower() == "e":
        return constants.e
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("charge must be positive")
    return value


def cmd_synth(args):
    setup = prepare(resolve_config(args.config))
    s = setup.schedule
    print(f"# scenario={setup.config.name} N={setup.well.num_levels} T={s.horizon:.17g} modes={len(s)}")
    print(f"{'k':>4} {'omega_1k':>24} {'B_k':>24} {'V_k':>24}")
    for k, w, b in zip(s.modes, s.carriers, s.slopes):
        print(f"{k:>4d} {w:>24.17g} {b:>24.17g} {2 * b:>24.17g}")
    return EXIT_OK


def cmd_run(args):
    cfg = resolve_config(args.config)
    out = args.output_dir or cfg.output_dir or default_output_dir()
    report = run_scenario(cfg, output_dir=out)
    print(f"scenario {cfg.name}: N={report.num_levels} T={report.horizon:.6g} -> {Path(out) / cfg.name}")
    for m in cfg.models:
        w = report.widths[m]
        print(
            f"  {m:>8}: width {w[0]:.6f} -> {w[-1]:.6f}, width violations {len(report.width_violations[m])}, "
            f"peak violations {len(report.peak_violations[m])}, fidelity {report.final_fidelity[m]:.6f}"
        )
    for pair, dev in report.deviations.items():
        print(f"  max deviation {pair} (validity window): {dev:.6g}")
    return EXIT_OK


def cmd_compare(args):
    cfg = resolve_config(args.config)
    models = [m.strip() for m in args.models.split(",") if m.strip()]
    if len(models) != 2:
        raise UsageError("compare: --models needs exactly two comma-separated tags")
    setup = prepare(cfg)
    trajs = run_models(setup, models)
    win = validity_window(cfg.sigma, cfg.length, setup.schedule.horizon)
    inside = compare_models(trajs[models[0]], trajs[models[1]], (win.start, win.end))
    overall = compare_models(trajs[models[0]], trajs[models[1]])
    result = {
        "scenario": cfg.name,
        "models": models,
        "num_levels": setup.well.num_levels,
        "window": [win.start, win.end],
        "max_deviation_window": inside.max_deviation,
        "max_deviation_all": overall.max_deviation,
    }
    if args.json:
        print(json.dumps(result, indent=2))
    else:
        print(f"{models[0]} vs {models[1]} ({cfg.name}, N={setup.well.num_levels})")
        print(f"  max deviation over validity window [0, {win.end:.6g}): {inside.max_deviation:.6g}")
        print(f"  max deviation over [0, T]: {overall.max_deviation:.6g}")
    return EXIT_OK


def cmd_figure(args):
    cfg = resolve_config(args.config)
    if args.grid < 256:
        raise UsageError("figure: --grid must be >= 256")
    setup = prepare(cfg)
    model = args.model or cfg.models[0]
    traj = run_models(setup, [model])[model]
    base = Path(args.output) if args.output else Path(cfg.output_dir or default_output_dir()) / cfg.name / f"density_{model}"
    base.parent.mkdir(parents=True, exist_ok=True)
    txt, png = emit_density_map(traj, setup.well, args.grid, base, frame=args.frame)
    print(f"wrote {txt}\nwrote {png}")
    return EXIT_OK


def cmd_si_estimate(args):
    if not 0 < args.sigma_ratio < 1 or not 0 < args.x0_ratio < 1:
        raise UsageError("si-estimate: --sigma-ratio and --x0-ratio must lie in (0, 1)")
    levels = max(args.levels or args.mode, args.mode, 2)
    well = WellSpec(num_levels=levels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tspec = TargetSpec(args.sigma_ratio, args.x0_ratio)
    target = target_coefficients(tspec, well)
    T = estimate_si_duration(args.field, args.charge, args.length, target, coupling_matrix(well), args.mode)
    print(f"T = {T:.6e} s")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wellsqueeze", description="Analytic optimal squeezing in an infinite square well.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    builtin = ", ".join(sorted(BUILTIN_SCENARIOS))

    q = sub.add_parser("synth", help="print the synthesized control schedule")
    q.add_argument("--config", default="fig1", help=f"config file or built-in name ({builtin})")
    q.set_defaults(func=cmd_synth)

    q = sub.add_parser("run", help="run a scenario and write its outputs")
    q.add_argument("--config", required=True, help=f"config file or built-in name ({builtin})")
    q.add_argument("--output-dir", help="overrides the config and the environment default")
    q.set_defaults(func=cmd_run)

    q = sub.add_parser("compare", help="max amplitude deviation between two models")
    q.add_argument("--models", required=True, help="two tags, e.g. rwa,reduced")
    q.add_argument("--config", required=True)
    q.add_argument("--json", action="store_true")
    q.set_defaults(func=cmd_compare)

    q = sub.add_parser("figure", help="emit the density map of one model")
    q.add_argument("--config", required=True)
    q.add_argument("--model")
    q.add_argument("--grid", type=int, default=512)
    q.add_argument("--frame", choices=("interaction", "lab"), default="interaction")
    q.add_argument("--output", help="base path (suffixes .txt/.png are added)")
    q.set_defaults(func=cmd_figure)

    q = sub.add_parser("si-estimate", help="control duration in seconds for an ion")
    q.add_argument("--field", type=float, required=True, help="electric field amplitude [V/m]")
    q.add_argument("--charge", type=_charge, default=constants.e, help="charge [C] or 'e'")
    q.add_argument("--length", type=float, required=True, help="well width [m]")
    q.add_argument("--sigma-ratio", type=float, required=True, help="target width / well width")
    q.add_argument("--x0-ratio", type=float, default=0.5)
    q.add_argument("--mode", type=int, required=True)
    q.add_argument("--levels", type=int, help="basis size (defaults to mode)")
    q.set_defaults(func=cmd_si_estimate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (IntegrationError, TruncationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
