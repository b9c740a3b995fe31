#!/usr/bin/env python3
"""
Command-line entry point of the BD-RIS toolkit.

Usage:
    python -m bdris simulate experiments/scaling.json --trials 10000 --progress
    python -m bdris optimize --channel channel.json --solver tree
    python -m bdris estimate --m 4 --group-size 2 --trials 1000
    python -m bdris analyze --law scaling --m 8 16 32 64
    python -m bdris selftest

Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.
"""

import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import ValidationError
from tqdm import tqdm

from bdris.config import __version__, settings
from bdris.errors import InvalidInputError, NumericalError
from bdris.models.channel import ChannelDims, ChannelSet, FadingSpec
from bdris.models.experiment import ExperimentConfig
from bdris.services.analysis_service import get_analysis_service
from bdris.services.channel_service import get_channel_service
from bdris.services.estimate_service import get_estimate_service
from bdris.services.experiment_service import ConfigError, ExperimentService, load_config
from bdris.services.export_service import FORMATS, get_export_service
from bdris.services.optimize_service import get_optimize_service
from bdris.services.selftest_service import SelftestService
from bdris.utils.helpers import encode_matrix, format_duration, make_rng, mean_stderr

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

LAWS = ("scaling", "group", "complexity", "dualpol")


def print_banner():
    """Print application banner."""
    print("=" * 65, file=sys.stderr)
    print(f"  BD-RIS Toolkit v{__version__}", file=sys.stderr)
    print("=" * 65, file=sys.stderr)


def configure_logging(verbose: bool = False) -> None:
    """Configure root logging on standard error, plus a file when BDRIS_LOG_FILE is set."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if settings.log_file:
        handlers.append(logging.FileHandler(settings.log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose or settings.debug else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


# ----------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------


def apply_overrides(cfg: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    """Return the configuration with command-line overrides applied and re-validated."""
    data = cfg.model_dump()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.trials is not None:
        data["trials"] = args.trials
    if args.out is not None:
        data["output"] = str(Path(args.out).absolute())
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid override: {e}")


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.progress:
        print_banner()
    cfg = apply_overrides(load_config(args.config), args)
    service = ExperimentService(threads=args.threads)
    exporter = get_export_service()

    if args.progress:
        with tqdm(total=len(cfg.sweep.values), desc=cfg.name, unit="points", file=sys.stderr) as pbar:

            def progress(index: int, row: Dict[str, Any]) -> None:
                pbar.update(1)
                pbar.set_postfix({k: f"{v:.4g}" for k, v in row.items() if k.endswith("_mean")})

            result = service.run_experiment(cfg, progress=progress)
    else:
        result = service.run_experiment(cfg)

    if cfg.output:
        target = exporter.write(result, cfg.output, args.format)
        print(f"Wrote {target} in {format_duration(result.metadata['wall_time_s'])}", file=sys.stderr)
    elif args.format == "csv":
        sys.stdout.write(exporter.generate_csv(result))
    else:
        print(exporter.generate_json_export(result))
    return 0


# ----------------------------------------------------------------------
# optimize
# ----------------------------------------------------------------------


def cmd_optimize(args: argparse.Namespace) -> int:
    optimizer = get_optimize_service()
    if args.channel:
        if not Path(args.channel).is_file():
            raise InvalidInputError(f"Channel file not found: {args.channel}")
        ch = ChannelSet.load(args.channel)
    else:
        fading = FadingSpec(seed=args.seed or 0)
        ch = get_channel_service().sample_channels(fading, ChannelDims(1, args.n_tx, args.m))

    if ch.n_t > 1:
        w, result = optimizer.miso_alternate(ch, args.power, solver=args.solver)
        report: Dict[str, Any] = {"precoder": encode_matrix(w)}
    else:
        result = optimizer.get_siso_solver(args.solver)(ch.h_ri, ch.h_it)
        theta = optimizer.scattering_of(result).theta
        report = {"optimalityRatio": optimizer.optimality_ratio(ch.h_ri, theta, ch.h_it)}

    spec = optimizer.scattering_of(result)
    report.update(
        {
            "solver": args.solver,
            "objective": result.objective,
            "converged": result.converged,
            "iterations": result.iterations,
            "residuals": result.residuals,
            "theta": encode_matrix(spec.theta),
        }
    )
    for key in ("objective", "optimalityRatio"):
        if key in report:
            print(f"{key}: {report[key]:.12g}", file=sys.stderr)

    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)
        print(f"Wrote {args.out}", file=sys.stderr)
    else:
        print(json.dumps({k: v for k, v in report.items() if k not in ("theta", "precoder")}, indent=2))
    return 0


# ----------------------------------------------------------------------
# estimate
# ----------------------------------------------------------------------


def cmd_estimate(args: argparse.Namespace) -> int:
    estimator = get_estimate_service()
    channels = get_channel_service()
    patterns = estimator.group_patterns(args.m, args.group_size or args.m)
    dims = ChannelDims(args.n, 1, args.m)
    seed = args.seed or 0
    trials = args.trials or 1000

    errors = []
    for index in tqdm(range(trials), desc="estimate", unit="trials", file=sys.stderr, disable=not args.progress):
        rng = make_rng(seed, index)
        ch = channels.sample_channels(FadingSpec(), dims, rng)
        errors.append(estimator.estimation_trial(ch, patterns, args.sigma2, args.pilot_power, rng))

    mean, stderr = mean_stderr(errors)
    theory = estimator.theoretical_mse(patterns, args.n, args.sigma2, args.pilot_power)
    rows = [{"m": args.m, "groupSize": patterns.group_size, "trials": trials, "mse": mean, "stderr": stderr,
             "theory": theory, "ratio": mean / theory if theory else float("nan")}]
    print(get_export_service().generate_txt_export(rows, title="Least-squares cascaded channel estimation"))
    return 0


# ----------------------------------------------------------------------
# analyze
# ----------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    analysis = get_analysis_service()
    rows: List[Dict[str, Any]] = []

    if args.law == "scaling":
        for m in args.m:
            laws = analysis.scaling_laws(m)
            rows.append({"m": m, "dris": laws.dris, "bdris": laws.bdris, "ratio": laws.ratio})
    elif args.law == "group":
        for m in args.m:
            for m_bar in args.group_size or [m]:
                rows.append(
                    {
                        "m": m,
                        "mBar": m_bar,
                        "gain": analysis.group_gain(m, m_bar),
                        "ratio": analysis.group_gain_ratio(m, m_bar).value,
                        "ratioPrinted": analysis.group_gain_ratio(m, m_bar, variant="printed").value,
                    }
                )
    elif args.law == "complexity":
        for m in args.m:
            optimum = analysis.optimal_complexity(m, args.n_tx, args.users)
            rows.append({"m": m, "miso": optimum.miso, "muMimo": optimum.mu_mimo})
    else:
        for chi in args.chi:
            row: Dict[str, Any] = {"chi": chi, "same": analysis.dual_pol_limit(chi, "rayleigh", True).value}
            for fading in ("rayleigh", "los"):
                row[f"opposite_{fading}"] = analysis.dual_pol_limit(chi, fading, False).value
            rows.append(row)

    print(get_export_service().generate_txt_export(rows, title=f"Closed-form {args.law} analysis"))
    return 0


# ----------------------------------------------------------------------
# selftest
# ----------------------------------------------------------------------


def cmd_selftest(args: argparse.Namespace) -> int:
    results = SelftestService(seed=args.seed or 0).run(only=args.only)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed", file=sys.stderr)
    return 0 if failed == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdris", description="BD-RIS modeling, optimization and simulation toolkit")
    parser.add_argument("--verbose", action="store_true", help="Enable debug logging")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Base seed (default: from config or 0)")
    common.add_argument("--trials", type=int, default=None, help="Trials per sweep point")
    common.add_argument("--out", type=str, default=None, help="Output file")
    common.add_argument("--format", type=str, default="csv", choices=FORMATS, help="Output format (default: csv)")
    common.add_argument("--progress", action="store_true", help="Show a progress bar")

    simulate = sub.add_parser("simulate", parents=[common], help="Run a Monte-Carlo experiment")
    simulate.add_argument("config", type=str, help="Experiment configuration (JSON)")
    simulate.add_argument(
        "--threads", type=int, default=None, help=f"Worker threads (default: BDRIS_THREADS or {settings.threads})"
    )
    simulate.set_defaults(handler=cmd_simulate)

    optimize = sub.add_parser("optimize", parents=[common], help="Solve one channel realization")
    optimize.add_argument("--channel", type=str, default=None, help="Channel set (JSON); random Rayleigh if omitted")
    optimize.add_argument("--solver", type=str, default="unitary", help="dris, unitary, tree, penalty or givens")
    optimize.add_argument("--m", type=int, default=16, help="Elements of a random channel (default: 16)")
    optimize.add_argument("--n-tx", type=int, default=1, help="Transmit antennas of a random channel (default: 1)")
    optimize.add_argument("--power", type=float, default=1.0, help="MISO transmit power (default: 1)")
    optimize.set_defaults(handler=cmd_optimize)

    estimate = sub.add_parser("estimate", parents=[common], help="Least-squares estimation error")
    estimate.add_argument("--m", type=int, default=4, help="Elements (default: 4)")
    estimate.add_argument("--group-size", type=int, default=None, help="Group size (default: M)")
    estimate.add_argument("--n", type=int, default=4, help="Receive antennas (default: 4)")
    estimate.add_argument("--sigma2", type=float, default=1.0, help="Noise power (default: 1)")
    estimate.add_argument("--pilot-power", type=float, default=1.0, help="Pilot power (default: 1)")
    estimate.set_defaults(handler=cmd_estimate)

    analyze = sub.add_parser("analyze", help="Print closed-form tables")
    analyze.add_argument("--law", type=str, default="scaling", choices=LAWS, help="Table to print")
    analyze.add_argument("--m", type=int, nargs="+", default=[8, 16, 32, 64], help="Element counts")
    analyze.add_argument("--group-size", type=int, nargs="+", default=None, help="Group sizes")
    analyze.add_argument("--n-tx", type=int, default=4, help="Transmit antennas (complexity)")
    analyze.add_argument("--users", type=int, nargs="+", default=[1, 1, 1, 1], help="Antennas per user (complexity)")
    analyze.add_argument("--chi", type=float, nargs="+", default=[0.1, 0.25, 0.5, 1.0], help="Cross-polar ratios")
    analyze.set_defaults(handler=cmd_analyze)

    selftest = sub.add_parser("selftest", help="Run the built-in invariant suite")
    selftest.add_argument("--seed", type=int, default=None, help="Seed of the random checks")
    selftest.add_argument("--only", type=str, default=None, help="Run checks whose name contains this text")
    selftest.set_defaults(handler=cmd_selftest)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 1

    configure_logging(args.verbose)
    started = time.time()
    try:
        code = args.handler(args)
    except InvalidInputError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"Numerical failure: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("\nInterrupted.", file=sys.stderr)
        return 1
    logger.debug(f"{args.command} finished in {format_duration(time.time() - started)}")
    return code


if __name__ == "__main__":
    sys.exit(main())
