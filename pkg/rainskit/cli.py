"""
rainskit command line.

Exit codes: 0 success, 1 input error, 2 solver trouble, 3 property violation.
Reports go to stdout (or --out) as JSON, sweeps as CSV; logs go to stderr.
"""

import argparse
import concurrent.futures
import dataclasses
import io
import logging
import os
import sys
import typing

from .rainskit import (
    InputDecodeError, PropertyViolation, SolverError, SepConeMode, SDP_TOL, ASSERT_TOL,
)
from . import channels, rains, emax, amortization, jsonio, specreader

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
EXIT_PROPERTY = 3

TOL_ENV = "RAINSKIT_TOL"
DUMP_ENV = "RAINSKIT_DUMP_DIR"
MAX_PROTOCOL_ROUNDS = 4
CONVERSE_ROUNDS = 10
CONVERSE_RATE = 1.0

FAMILIES: dict[str, typing.Callable[[int, float], channels.Channel]] = {
    "depolarizing": channels.make_depolarizing,
    "erasure": channels.make_erasure,
    "dephasing": lambda d, p: channels.make_dephasing(p),
    "amplitude-damping": lambda d, p: channels.make_amplitude_damping(p),
}
# r_max never increases along the parameter for these
MONOTONE_FAMILIES = ("depolarizing", "erasure")

@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    input_path: str | None = None
    tol: float = SDP_TOL
    seed: int = 0
    trials: int = 1
    output_format: str = "json"
    sweep_grid: tuple[float, ...] | None = None
    jobs: int = 1
    out: str | None = None

    def __post_init__(self):
        if not 1e-12 <= self.tol <= 1e-4:
            raise InputDecodeError(f"tol must lie in [1e-12, 1e-4], got {self.tol!r}")
        if self.trials < 1:
            raise InputDecodeError(f"trials must be at least 1, got {self.trials}")
        if self.jobs < 1:
            raise InputDecodeError(f"jobs must be at least 1, got {self.jobs}")
        if self.output_format not in ("json", "csv"):
            raise InputDecodeError(f"unknown output format {self.output_format!r}")

def resolve_tol(flag: float | None, environ: typing.Mapping[str, str] = os.environ) -> float:
    """--tol, then RAINSKIT_TOL, then the default."""
    if flag is not None:
        return flag
    if TOL_ENV in environ:
        try:
            return float(environ[TOL_ENV])
        except ValueError as e:
            raise InputDecodeError(f"{TOL_ENV}={environ[TOL_ENV]!r} is not a number") from e
    return SDP_TOL

def parse_mode(text: str) -> SepConeMode | None:
    match text:
        case "auto":
            return None
        case "exact":
            return SepConeMode.ExactSmallDims
        case "ppt":
            return SepConeMode.PptRelaxation
    raise InputDecodeError(f"unknown cone mode {text!r}")

#region: commands

def measure_document(result: rains.MeasureResult) -> dict:
    c = result.certificate
    return {
        "name": result.name,
        "value": result.value,
        "log2_value": result.log2_value,
        "exact": result.exact,
        "certificate_interval": [c.lower, c.upper],
        "residuals": result.residuals,
    }

def _state_input(config: RunConfig, args):
    state, cut = jsonio.read_state(config.input_path)
    if args.dims:
        spec = specreader.read_dims(args.dims)
        state, cut = state.refactor(spec.dims), spec.cut
    return state, cut

def cmd_state_rains(config: RunConfig, args) -> tuple[dict, int]:
    state, cut = _state_input(config, args)
    return measure_document(rains.w_state(state, cut, config.tol)), EXIT_OK

def cmd_state_emax(config: RunConfig, args) -> tuple[dict, int]:
    state, cut = _state_input(config, args)
    return measure_document(emax.w_sep(state, cut, parse_mode(args.mode), config.tol)), EXIT_OK

def cmd_channel_rains(config: RunConfig, args) -> tuple[dict, int]:
    n = jsonio.read_channel(config.input_path)
    return measure_document(rains.gamma_channel(n, config.tol)), EXIT_OK

def cmd_channel_emax(config: RunConfig, args) -> tuple[dict, int]:
    n = jsonio.read_channel(config.input_path)
    return measure_document(emax.sigma_channel(n, parse_mode(args.mode), config.tol)), EXIT_OK

def cmd_qtheta(config: RunConfig, args) -> tuple[dict, int]:
    n = jsonio.read_channel(config.input_path)
    return measure_document(rains.transpose_diamond_norm(n, config.tol)), EXIT_OK

def cmd_verify_amortization(config: RunConfig, args) -> tuple[dict, int]:
    spec = specreader.read_dims(args.dims)
    if len(spec.dims) != 3:
        raise InputDecodeError(f"--dims needs three factors A′xA|B′, got {spec.dims}")
    channel = jsonio.read_channel(config.input_path) if config.input_path else None
    campaign = amortization.amortization_campaign(config.trials, config.seed, spec.dims.factors, config.tol,
                                                  config.jobs, args.dim_out, channel)
    instances = [{
        "index": i,
        "margin": r.margin,
        "construction_margin": r.construction_margin,
        "sandwich_margin": r.sandwich_margin,
        "scale": r.scale,
        "ok": r.ok,
        "failures": r.failures(),
    } for i, r in enumerate(campaign.reports)]
    document = {
        "seed": config.seed,
        "dims": list(spec.dims.factors),
        "trials": config.trials,
        "passed": campaign.passed,
        "min_margin": min(campaign.margins),
        "instances": instances,
    }
    return document, EXIT_OK if campaign.ok else EXIT_PROPERTY

def sweep_row(family: str, dim: int, p: float, tol: float) -> dict:
    n = FAMILIES[family](dim, p)
    r_max = rains.r_max_channel(n, tol)
    row = {
        "family": family,
        "param": p,
        "r_max": r_max,
        "e_max": None,
        "q_theta": rains.q_theta(n, tol),
        "converse_fidelity_ceiling": amortization.fidelity_ceiling_curve(r_max, CONVERSE_RATE, [CONVERSE_ROUNDS])[0][1],
    }
    if n.dim_in * n.dim_out <= emax.EXACT_DIM_LIMIT:
        row["e_max"] = emax.e_max_channel(n, SepConeMode.ExactSmallDims, tol)
    return row

def cmd_sweep(config: RunConfig, args) -> tuple[list[dict], int]:
    if args.family not in FAMILIES:
        raise InputDecodeError(f"unknown family {args.family!r}, expected one of {', '.join(FAMILIES)}")
    grid = config.sweep_grid
    with concurrent.futures.ThreadPoolExecutor(max_workers=config.jobs) as executor:
        rows = list(executor.map(lambda p: sweep_row(args.family, args.dim, p, config.tol), grid))
    if args.family in MONOTONE_FAMILIES:
        ordered = sorted(rows, key=lambda row: row["param"])
        for before, after in zip(ordered, ordered[1:]):
            if after["r_max"] > before["r_max"] + ASSERT_TOL:
                raise PropertyViolation(f"{args.family}: r_max increases from p={before['param']:g} to p={after['param']:g}")
    return rows, EXIT_OK

def cmd_converse(config: RunConfig, args) -> tuple[dict, int]:
    if args.r_max is not None:
        r_max = args.r_max
    elif config.input_path:
        r_max = rains.r_max_channel(jsonio.read_channel(config.input_path), config.tol)
    else:
        raise InputDecodeError("converse needs --channel or --r-max")
    report = amortization.strong_converse_bound(args.n, args.M, args.epsilon, r_max, args.rate)
    return {"r_max": r_max, **dataclasses.asdict(report)}, EXIT_OK

def cmd_protocol(config: RunConfig, args) -> tuple[dict, int]:
    if not 1 <= args.rounds <= MAX_PROTOCOL_ROUNDS:
        raise InputDecodeError(f"rounds must lie in [1, {MAX_PROTOCOL_ROUNDS}], got {args.rounds}")
    if args.shape != "teleportation" and not config.input_path:
        raise InputDecodeError(f"a {args.shape} protocol needs --channel")
    match args.shape:
        case "teleportation":
            transcript = amortization.teleportation_transcript()
        case "replacement":
            transcript = amortization.replacement_transcript(jsonio.read_channel(config.input_path), args.rounds, config.seed)
        case _:
            transcript = amortization.random_transcript(jsonio.read_channel(config.input_path), args.rounds, config.seed)
    report = amortization.run_protocol_and_check(transcript, config.tol)
    return jsonio.encode(report), EXIT_OK if report.ok else EXIT_PROPERTY

#endregion

#region: argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rainskit", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="errors only")
    parser.add_argument("--tol", type=float, default=None, help=f"solver tolerance (default ${TOL_ENV} or {SDP_TOL:g})")
    parser.add_argument("--out", default=None, help="write the report here instead of stdout")
    parser.add_argument("--format", dest="output_format", choices=("json", "csv"), default=None)
    parser.add_argument("--jobs", type=int, default=1, help="concurrent instances in campaigns and sweeps")
    parser.add_argument("--dump-sdp", default=None, metavar="DIR", help="dump programs that fail to solve")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, handler, help_text in (
        ("state-rains", cmd_state_rains, "W and R_max of a state"),
        ("state-emax", cmd_state_emax, "W_sep and E_max of a state"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("input", help="state JSON")
        sub.add_argument("--dims", default=None, help="refactor the state, e.g. 2x2|2")
        if name == "state-emax":
            sub.add_argument("--mode", choices=("auto", "exact", "ppt"), default="auto")
        sub.set_defaults(handler=handler)

    for name, handler, help_text in (
        ("channel-rains", cmd_channel_rains, "Γ and R_max of a channel"),
        ("channel-emax", cmd_channel_emax, "Σ and E_max of a channel"),
        ("qtheta", cmd_qtheta, "‖T∘N‖_◇ and Q_Θ of a channel"),
    ):
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument("input", help="channel JSON")
        if name == "channel-emax":
            sub.add_argument("--mode", choices=("auto", "exact", "ppt"), default="auto")
        sub.set_defaults(handler=handler)

    sub = commands.add_parser("verify-amortization", help="random W(ω) ≤ Γ·W(ρ) campaign")
    sub.add_argument("--trials", type=int, default=50)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--dims", default="2x2|2", help="A′xA|B′")
    sub.add_argument("--dim-out", type=int, default=None, help="output dimension of the random channels")
    sub.add_argument("--channel", dest="input", default=None, help="fix the channel instead of drawing it")
    sub.set_defaults(handler=cmd_verify_amortization)

    sub = commands.add_parser("sweep", help="bounds along a channel family")
    sub.add_argument("--family", required=True)
    sub.add_argument("--grid", required=True, help="0,0.5,1 or 0:1:0.25 or linspace(0,1,5)")
    sub.add_argument("--dim", type=int, default=2)
    sub.set_defaults(handler=cmd_sweep)

    sub = commands.add_parser("converse", help="strong converse bound")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--M", type=int, required=True)
    sub.add_argument("--epsilon", type=float, required=True)
    sub.add_argument("--channel", dest="input", default=None)
    sub.add_argument("--r-max", type=float, default=None)
    sub.add_argument("--rate", type=float, default=None, help="rate Q for the fidelity ceiling (default log₂M/n)")
    sub.set_defaults(handler=cmd_converse)

    sub = commands.add_parser("protocol", help="run and check a protocol transcript")
    sub.add_argument("--rounds", type=int, default=2)
    sub.add_argument("--channel", dest="input", default=None)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--shape", choices=("random", "teleportation", "replacement"), default="random")
    sub.set_defaults(handler=cmd_protocol)
    return parser

def configure_logging(verbose: int, quiet: bool):
    if quiet:
        level = logging.ERROR
    else:
        level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True)

def make_config(args) -> RunConfig:
    grid = tuple(specreader.read_grid(args.grid)) if getattr(args, "grid", None) else None
    output_format = args.output_format or ("csv" if args.command == "sweep" else "json")
    return RunConfig(
        command=args.command,
        input_path=getattr(args, "input", None),
        tol=resolve_tol(args.tol),
        seed=getattr(args, "seed", 0),
        trials=getattr(args, "trials", 1),
        output_format=output_format,
        sweep_grid=grid,
        jobs=args.jobs,
        out=args.out,
    )

def render(document: typing.Any, config: RunConfig) -> str:
    if config.output_format == "csv":
        if not isinstance(document, list):
            raise InputDecodeError(f"{config.command} has no CSV form")
        stream = io.StringIO()
        jsonio.write_sweep_csv(document, stream)
        return stream.getvalue()
    return jsonio.dumps(document) + "\n"

def main(argv: typing.Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors, which is the solver code here
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT
    configure_logging(args.verbose, args.quiet)
    try:
        config = make_config(args)
        if args.dump_sdp:
            os.environ[DUMP_ENV] = args.dump_sdp
        document, code = args.handler(config, args)
        text = render(document, config)
        if config.out:
            with open(config.out, "w", encoding="utf-8", newline="") as fp:
                fp.write(text)
        else:
            sys.stdout.write(text)
        return code
    except PropertyViolation as e:
        logger.error("property violation: %s", e)
        return EXIT_PROPERTY
    except SolverError as e:
        logger.error("solver trouble: %s", e)
        return EXIT_SOLVER
    except (ValueError, OSError) as e:
        logger.error("%s", e)
        return EXIT_INPUT

#endregion
