"""
Command-line front end: `ds_well <command> [--config FILE] [--preset NAME]
[--out DIR] [--threads N] [--check]`.

Exit codes: 0 success, 1 acceptance check failed (with --check), 2 error.
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional

from . import experiments
from .fvm import dump_system
from .kernels import KernelField, dump_integration_points, generate_integration_points
from .scenario import PRESETS, Scenario, load_scenario

logger = logging.getLogger("ds_well")

THREADS_ENV = "DS_WELL_THREADS"


def _default_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if not value:
        return 1
    try:
        threads = int(value)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer: {value!r}")
    if threads < 1:
        raise ValueError(f"{THREADS_ENV} must be positive: {threads}")
    return threads


def _add_common_options(parser: argparse.ArgumentParser, suppress: bool):
    """
    Options accepted before and after the subcommand.  The subcommand copies
    use SUPPRESS defaults so they only override values actually given.
    """
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--config", default=default(None), help="scenario YAML file")
    parser.add_argument("--preset", choices=sorted(PRESETS), default=default(None),
                        help="built-in scenario the config file overrides (default: default)")
    parser.add_argument("--out", default=default("results"),
                        help="output directory (default: results)")
    parser.add_argument("--threads", type=int, default=default(None),
                        help=f"worker threads (default: ${THREADS_ENV} or 1)")
    parser.add_argument("--check", action="store_true", default=default(False),
                        help="exit with code 1 when an acceptance check fails")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", default=default(False),
                           help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", default=default(False),
                           help="warnings only")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_common_options(common, suppress=True)

    parser = argparse.ArgumentParser(
        prog="ds_well",
        description="Distributed-source well model for anisotropic Darcy flow.",
    )
    _add_common_options(parser, suppress=False)
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("analytic", parents=[common],
                        help="sample the analytical solution on a lattice")
    run = commands.add_parser("run", parents=[common], help="solve one scenario")
    run.add_argument("--level", type=int, default=0, help="refinement level of the mesh")
    run.add_argument("--model", choices=experiments.MODELS, default="ds", help="well model")
    run.add_argument("--dump", action="store_true",
                     help="also write the linear system and the integration points")
    convergence = commands.add_parser("convergence", parents=[common],
                                      help="grid convergence for several anisotropy ratios")
    convergence.add_argument("--levels", type=int, default=None)
    convergence.add_argument("--alphas", type=float, nargs="+", default=None)
    convergence.add_argument("--full-scale", action="store_true",
                             help="run four levels (three observed rates)")
    commands.add_parser("kernel-study", parents=[common], help="influence of the outer kernel radius")
    sweep = commands.add_parser("rotation-sweep", parents=[common],
                                help="robustness with respect to rotations")
    sweep.add_argument("--mode", choices=("permeability", "well", "both"), default=None)
    compare = commands.add_parser("compare", parents=[common],
                                  help="comparison with the Peaceman-type model")
    compare.add_argument("--levels", type=int, default=None)
    compare.add_argument("--full-scale", action="store_true",
                         help="use the 160x320x160 reference grid")
    return parser


def _configure_logging(args: argparse.Namespace):
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _scenario(args: argparse.Namespace) -> Scenario:
    preset = args.preset
    if preset is None and args.command == "compare":
        preset = "comparison"
    return load_scenario(args.config, preset)


def _report(result: experiments.StudyResult, out: str, summary_name: str):
    result.write(out)
    text = result.render()
    with open(os.path.join(out, f"{summary_name}.txt"), "w", encoding="utf-8") as file:
        file.write(text + "\n")
    print(text)


def _run_analytic(scenario: Scenario, args):
    files, lines = experiments.export_analytic(scenario, args.out)
    with open(os.path.join(args.out, "analytic.txt"), "w", encoding="utf-8") as file:
        file.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    for path in files:
        logger.info(f"Wrote {path}")


def _run_single(scenario: Scenario, args) -> experiments.StudyResult:
    run = experiments.run_model(scenario, args.level, model=args.model)
    files = experiments.export_model(run, args.out)
    if args.dump:
        path = os.path.join(args.out, "system.mtx")
        dump_system(run.system, path)
        files += [path, f"{path}.rhs"]
        if run.model == "ds":
            first = run.intersections[0]
            field = KernelField.build(run.kernel, run.chain, first.interval)
            path = os.path.join(args.out, "integration_points.csv")
            dump_integration_points(generate_integration_points(field), path)
            files.append(path)
    result = experiments.StudyResult("run", ["model", "h_max", "Q", "E_p", "E_q"])
    result.rows.append([run.model, run.h_max, run.total_rate, run.e_p, run.e_q])
    result.files.extend(files)
    return result


def _run_study(scenario: Scenario, args) -> experiments.StudyResult:
    if args.command == "convergence":
        if args.full_scale:
            scenario = scenario.with_changes(
                convergence=replace(scenario.convergence, full_scale=True))
        return experiments.run_convergence(scenario, args.levels, args.alphas, args.threads)
    if args.command == "kernel-study":
        return experiments.run_kernel_study(scenario, args.threads)
    if args.command == "rotation-sweep":
        return experiments.run_rotation_sweep(scenario, args.mode, args.threads)
    if args.full_scale:
        scenario = scenario.with_changes(compare=replace(scenario.compare, full_scale=True))
    return experiments.run_comparison(scenario, args.levels, threads=args.threads, out=args.out)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        if args.threads is None:
            args.threads = _default_threads()
        scenario = _scenario(args)
        os.makedirs(args.out, exist_ok=True)
        if args.command == "analytic":
            _run_analytic(scenario, args)
            return 0
        if args.command == "run":
            result = _run_single(scenario, args)
        else:
            result = _run_study(scenario, args)
        _report(result, args.out, result.name)
    except experiments.StudyError as error:
        if error.partial.rows:
            path = error.partial.write(args.out)
            logger.error(f"Partial table written to {path}")
        logger.error(str(error))
        return 2
    except (ValueError, RuntimeError, OSError) as error:
        logger.error(str(error))
        return 2
    if args.check and not result.passed:
        logger.error("Acceptance checks failed")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
