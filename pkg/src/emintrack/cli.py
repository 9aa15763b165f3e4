"""Command line interface.

Subcommands:

* ``sweep``    open-loop voltage sweep for one load condition
* ``track``    one closed-loop tracking run of a scenario
* ``batch``    seeded transition trials across averaging depths
* ``validate`` built-in invariant suite

Exit codes: 0 on success, 1 on a scenario/usage error, 2 on a fatal
plant or controller error (including validation failure).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .config import ConfigError, Scenario, default_scenario, parse_scenario
from .controller import PlantFatalError
from .harness import (
    BatchSummary,
    ReportBundle,
    TrialResult,
    emit_reports,
    run_batch,
    run_sweep,
    run_tracking,
    run_transition,
    sweep_argmin,
    voltage_grid,
)
from .sim import StallError
from . import __version__


class _Parser(argparse.ArgumentParser):
    """Argument errors map to exit code 1 like every other scenario error."""

    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="emintrack", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"emintrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="open-loop voltage sweep", parents=[])
    sweep.add_argument("--load", required=True, choices=("none", "low", "high"))
    sweep.add_argument("--nc", type=int, default=1, choices=(1, 3, 5),
                       help="measured cycles per grid voltage")
    sweep.add_argument("--config", help="scenario file with parameter overrides")
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--seed", type=int, help="override the base seed")
    sweep.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    track = sub.add_parser("track", help="one closed-loop tracking run")
    track.add_argument("--scenario", required=True, help="scenario file")
    track.add_argument("--out", required=True)
    track.add_argument("--seed", type=int)
    track.add_argument("--no-figures", action="store_true")

    batch = sub.add_parser("batch", help="seeded transition trials with statistics")
    batch.add_argument("--scenario", required=True, help="scenario file")
    batch.add_argument("--trials", type=int, help="override the trial count")
    batch.add_argument("--out", required=True)
    batch.add_argument("--seed", type=int)
    batch.add_argument("--no-figures", action="store_true")

    sub.add_parser("validate", help="run the built-in invariant suite")
    return parser


def _load_scenario(path: str | None, seed: int | None) -> Scenario:
    scenario = parse_scenario(path) if path else default_scenario()
    if seed is not None:
        scenario = replace(scenario, base_seed=seed)
    return scenario


def _cmd_sweep(args) -> int:
    scenario = _load_scenario(args.config, args.seed)
    condition = scenario.preset(args.load)
    grid = voltage_grid()
    rows = run_sweep(condition, grid, args.nc, scenario)
    best = sweep_argmin(rows)
    bundle = ReportBundle(
        scenario=scenario,
        command="sweep",
        sweeps={args.load: rows},
        notes={
            "load": args.load,
            "nc": args.nc,
            "grid_points": len(grid),
            "stalled_points": len(grid) - len(rows),
            "argmin_voltage": best.voltage,
            "argmin_energy": best.mean_energy,
        },
    )
    files = emit_reports(bundle, args.out, figures=not args.no_figures)
    print(f"sweep {args.load}: {len(rows)}/{len(grid)} grid points, "
          f"minimum {best.mean_energy * 1e3:.3g} mJ/cycle at {best.voltage:.3g} V")
    _print_files(files)
    return 0


def _cmd_track(args) -> int:
    scenario = _load_scenario(args.scenario, args.seed)
    if len(scenario.load_schedule) == 2:
        trial = run_transition(scenario, scenario.base_seed)
        trials = [trial]
        if trial.timed_out:
            print("tracking run did not re-converge within the horizon")
        else:
            print(f"re-converged at {trial.convergence_voltage:.3g} V "
                  f"in {trial.response_time:.3g} s after the load switch")
    else:
        result = run_tracking(scenario, scenario.base_seed)
        optima = [r for r in result.rows if r.event == "optimum_found"]
        last = optima[-1] if optima else None
        trials = [
            TrialResult(
                nc=scenario.controller.averaging_cycles,
                trial_index=0,
                seed=scenario.base_seed,
                response_time=None,
                convergence_voltage=last.data.get("voltage") if last else None,
                energy_at_optimum=last.data.get("energy") if last else None,
                timed_out=last is None,
                settled=last is not None,
                rows=tuple(result.rows),
            )
        ]
        if last is not None:
            print(f"settled at {last.data['voltage']:.3g} V")
        else:
            print("no optimum found within the horizon")
    bundle = ReportBundle(scenario=scenario, command="track", trials=trials)
    files = emit_reports(bundle, args.out, figures=not args.no_figures)
    _print_files(files)
    return 0


def _cmd_batch(args) -> int:
    scenario = _load_scenario(args.scenario, args.seed)
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be at least 1")
        scenario = replace(scenario, trials=args.trials)
    summary: BatchSummary = run_batch(scenario)
    bundle = ReportBundle(
        scenario=scenario,
        command="batch",
        trials=summary.trials,
        stats=summary.stats,
    )
    files = emit_reports(bundle, args.out, figures=not args.no_figures)
    for s in summary.stats:
        rt = f"{s.response_mean:.3g} s" if s.response_mean is not None else "n/a"
        cv = f"{s.voltage_mean:.3g} V" if s.voltage_mean is not None else "n/a"
        print(f"nc={s.nc}: {s.completed} trials, mean response {rt}, mean convergence {cv}, "
              f"{s.timed_out} timed out")
    _print_files(files)
    return 0


def _cmd_validate(_args) -> int:
    from .validate import run_validation

    return 0 if run_validation(verbose=True) else 2


def _print_files(files) -> None:
    for path in files:
        print(f"  wrote {path}")


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "track":
            return _cmd_track(args)
        if args.command == "batch":
            return _cmd_batch(args)
        if args.command == "validate":
            return _cmd_validate(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (PlantFatalError, StallError) as exc:
        print(f"fatal: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
