"""
Command line: ``python -m tailcouple {estimate,simulate,scan-k,bridge-check}``.

Reports go to --output or stdout. Exit code 0 on success, 2 on invalid
input, 3 when the fitted tail makes a measure infinite; every error prints
a single line on stderr.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from tailcouple import __version__
from tailcouple.config import configure_logging, get_settings
from tailcouple.errors import TailCoupleError
from tailcouple.models.request_models import (
    BridgeCheckRequest,
    Command,
    EstimatorOptions,
    RunConfig,
    SimulateRequest,
)
from tailcouple.services.bridge_engine import VarianceMode
from tailcouple.services.reporting import run_bridge_check, run_estimate, run_scan, run_simulation
from tailcouple.services.sample_core import read_csv, write_csv
from tailcouple.services.sim_lab import DistributionModel, sample_from

logger = logging.getLogger(__name__)


def _add_estimator_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--measure1", "--measure", dest="measure1", default="mean",
                   help="mean | pht:rho=R | cte:t=T")
    p.add_argument("--transform1", "--transform", dest="transform1", default="identity",
                   help="identity | power:beta=B")
    p.add_argument("--measure2", default=None)
    p.add_argument("--transform2", default="identity")
    p.add_argument("--coupling", default="first", help="first | ratio | zenga:p=P")
    p.add_argument("--preset", default=None,
                   help="zenga:p=P | weighted:beta=B | relative:measure=SPEC (overrides measures and coupling)")
    p.add_argument("--k", default="auto", help="auto | integer | fraction:C | power:A | scan")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--b1", type=float, default=0.0)
    p.add_argument("--b2", type=float, default=0.0)
    p.add_argument("--omega1", type=float, default=0.0)
    p.add_argument("--omega2", type=float, default=0.0)
    p.add_argument("--variance-mode", choices=[m.value for m in VarianceMode], default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tailcouple", description="Coupled risk measures for heavy-tailed losses.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser(Command.estimate.value, help="estimate a coupled measure from a CSV of losses")
    est.add_argument("--input", required=True)
    _add_estimator_args(est)
    est.add_argument("--seed", type=int, default=None)
    est.add_argument("--output", default=None)

    sim = sub.add_parser(Command.simulate.value, help="Monte Carlo study on a synthetic model")
    sim.add_argument("--model", required=True, help="pareto:gamma=G | burr:lam=L,tau=T | frechet:gamma=G")
    _add_estimator_args(sim)
    sim.add_argument("--n", type=int, default=10_000)
    sim.add_argument("--reps", type=int, default=500)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--output", default=None)
    sim.add_argument("--emit-sample", default=None, metavar="PATH",
                     help="write one sample of size n drawn with --seed to PATH and stop")

    scan = sub.add_parser(Command.scan_k.value, help="Hill estimates over a range of k, as CSV")
    scan.add_argument("--input", required=True)
    scan.add_argument("--transform", default="identity")
    scan.add_argument("--from", dest="k_from", type=int, default=10)
    scan.add_argument("--to", dest="k_to", type=int, default=200)
    scan.add_argument("--output", default=None)

    bridge = sub.add_parser(Command.bridge_check.value, help="simulated vs analytic bridge moments")
    bridge.add_argument("--gamma", type=float, required=True)
    bridge.add_argument("--rho", type=float, default=1.0)
    bridge.add_argument("--k-over-n", type=float, default=None)
    bridge.add_argument("--grid", type=int, default=None)
    bridge.add_argument("--reps", type=int, default=None)
    bridge.add_argument("--seed", type=int, default=None)
    bridge.add_argument("--output", default=None)
    return parser


def _options(args: argparse.Namespace) -> dict:
    return dict(
        measure1=args.measure1,
        transform1=args.transform1,
        measure2=args.measure2,
        transform2=args.transform2,
        coupling=args.coupling,
        preset=args.preset,
        k=args.k,
        alpha=args.alpha if args.alpha is not None else get_settings().default_alpha,
        b1=args.b1,
        b2=args.b2,
        omega1=args.omega1,
        omega2=args.omega2,
        variance_mode=args.variance_mode,
    )


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dispatch(args: argparse.Namespace) -> None:
    seed = getattr(args, "seed", None)
    run = RunConfig(
        command=args.command,
        input=getattr(args, "input", None),
        output=args.output,
        seed=seed if seed is not None else get_settings().seed,
    )

    if run.command is Command.estimate:
        sample = read_csv(run.input)
        report = run_estimate(sample, EstimatorOptions(**_options(args)), seed=run.seed)
        _emit(report.to_json(), run.output)
    elif run.command is Command.simulate:
        req = SimulateRequest(model=args.model, n=args.n, reps=args.reps, seed=run.seed, **_options(args))
        if args.emit_sample:
            write_csv(sample_from(DistributionModel.parse(req.model), req.n, run.seed), args.emit_sample)
            logger.info("Wrote %d losses to %s", req.n, args.emit_sample)
            return
        _emit(run_simulation(req, run.seed).to_json(), run.output)
    elif run.command is Command.scan_k:
        report = run_scan(read_csv(run.input), args.transform, args.k_from, args.k_to)
        _emit(report.to_csv(), run.output)
    else:
        req = BridgeCheckRequest(
            gamma=args.gamma, rho=args.rho, k_over_n=args.k_over_n,
            grid_size=args.grid, reps=args.reps, seed=run.seed,
        )
        _emit(run_bridge_check(req, run.seed).to_json(), run.output)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        _dispatch(args)
    except TailCoupleError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()))
        print(f"error: invalid {where or 'argument'}: {first['msg']}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return 2
    return 0
