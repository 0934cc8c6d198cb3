import argparse
import json
import sys
from dataclasses import asdict, dataclass, field

import pandas as pd
from loguru import logger

from annealed_sampler import AnnealedCurve, annealed_curve
from annealed_sampler import threshold_frame as annealed_threshold_frame
from configs.rules.experiments import presets_dict
from configs.tools.table_writer import OUTPUT_FORMATS, TableWriter
from ensemble_runner import (
    SweepTable,
    histogram_frame,
    reaction_time_series,
    run_ensemble,
    steady_distribution,
    sweep_over_N,
)
from errors import DomainError, GridRangeError, InvariantViolation
from scaling_analysis import (
    ThresholdCriterion,
    collapse,
    collapse_quality,
    collapse_tau,
    correlation_exponent,
    fit_power_law,
    order_parameter_exponent,
    search_space_size,
    tau_exponent,
    threshold_exponent,
    threshold_frame,
)

LOG_FORMAT = "{time} {level} {message}"
EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_USAGE_ERROR = 2


@dataclass
class ExperimentConfig:
    """Resolved parameters of one command, defaults included."""

    command: str
    parameters: dict = field(default_factory=dict)
    output: str = "-"
    output_format: str = "csv"
    workers: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


class ExperimentCommand:
    """
    Base class for the subcommands.

    ``start`` runs ``execute`` and turns library errors into exit codes, the
    way the pipeline steps report success instead of raising.
    """

    name = ""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.params = config.parameters
        self.writer = TableWriter(config.output_format)

    def start(self) -> int:
        logger.info(f"Starting '{self.name}' with config: {self.config.to_json()}")
        try:
            self.execute()
            logger.info(f"'{self.name}' completed successfully.")
            return EXIT_OK
        except (DomainError, GridRangeError) as e:
            logger.error(f"'{self.name}' failed: {e}")
            return EXIT_RUNTIME_ERROR
        except InvariantViolation as e:
            logger.exception(f"Invariant violated during '{self.name}': {e}")
            return EXIT_RUNTIME_ERROR
        except (FileNotFoundError, KeyError, ValueError) as e:
            logger.error(f"'{self.name}' could not process its input: {e}")
            return EXIT_RUNTIME_ERROR

    def execute(self):
        raise NotImplementedError

    def criterion(self) -> ThresholdCriterion:
        if self.params["criterion"] == "half-crossing":
            return ThresholdCriterion.half_crossing()
        return ThresholdCriterion.first_nonzero(self.params["theta"])

    def sweep_tables(self) -> list[SweepTable]:
        frame = self.writer.read_frames(self.params["inputs"])
        return SweepTable.from_frame(frame)


class SimulateCommand(ExperimentCommand):
    name = "simulate"

    def execute(self):
        p = self.params
        stats = run_ensemble(
            p["pool_size"],
            p["system_size"],
            p["realizations"],
            p["seed"],
            p["max_sweeps"],
            self.config.workers,
            p["initial_values"],
        )
        record = stats.to_row() | {
            "tau_raw": stats.tau_raw,
            "unreliable": stats.unreliable,
        }
        self.writer.write_record(record, self.config.output)


class SweepCommand(ExperimentCommand):
    name = "sweep"

    def execute(self):
        p = self.params
        frames = []
        for M in p["pool_sizes"]:
            table = sweep_over_N(
                M,
                p["n_grid"],
                p["realizations"],
                p["seed"],
                p["max_sweeps"],
                self.config.workers,
            )
            frames.append(table.to_frame())
        combined = pd.concat(frames, ignore_index=True)
        self.writer.write_frame(combined, self.config.output)


class DistributionCommand(ExperimentCommand):
    name = "distribution"

    def execute(self):
        p = self.params
        histogram = steady_distribution(
            p["pool_size"],
            p["system_size"],
            p["realizations"],
            p["seed"],
            p["max_sweeps"],
            self.config.workers,
            p["initial_values"],
        )
        self.writer.write_frame(histogram_frame(histogram), self.config.output)


class SeriesCommand(ExperimentCommand):
    name = "series"

    def execute(self):
        p = self.params
        frame = reaction_time_series(
            p["pool_size"],
            p["system_size"],
            p["seed"],
            p["realization"],
            p["max_sweeps"],
        )
        self.writer.write_frame(frame, self.config.output)


class AnnealedCommand(ExperimentCommand):
    name = "annealed"

    def execute(self):
        p = self.params
        frames = [
            annealed_curve(
                M, p["n_grid"], p["samples"], p["seed"], self.config.workers
            ).to_frame()
            for M in p["pool_sizes"]
        ]
        combined = pd.concat(frames, ignore_index=True)
        self.writer.write_frame(combined, self.config.output)


class ThresholdsCommand(ExperimentCommand):
    name = "thresholds"

    def execute(self):
        frame = self.writer.read_frames(self.params["inputs"])
        if "q" in frame.columns:
            result = annealed_threshold_frame(AnnealedCurve.from_frame(frame))
        else:
            result = threshold_frame(SweepTable.from_frame(frame), self.criterion())
        self.writer.write_frame(result, self.config.output)


class FitCommand(ExperimentCommand):
    name = "fit"

    def execute(self):
        p = self.params
        frame = self.writer.read_frames([p["input"]])
        for column in (p["x_col"], p["y_col"]):
            if column not in frame.columns:
                raise DomainError(
                    f"column {column!r} not in {p['input']} (has {list(frame.columns)})"
                )
        x = frame[p["x_col"]].astype(float)
        y = frame[p["y_col"]].astype(float)
        points = list(zip(x, y))
        fit = fit_power_law(points)
        logger.info(
            f"Fitted exponent {fit.exponent:.4f} +/- {fit.stderr_exponent:.4f} "
            f"(R^2={fit.r_squared:.4f}, {fit.points_used} points)"
        )
        self.writer.write_record(fit.to_dict(), self.config.output)


class CollapseCommand(ExperimentCommand):
    name = "collapse"

    def execute(self):
        p = self.params
        tables = self.sweep_tables()
        if p["observable"] == "tau":
            table = collapse_tau(tables, p["nc"], p["nu"], p["delta"])
        else:
            table = collapse(tables, p["nc"], p["nu"], p["beta"])
        quality = collapse_quality(table)
        logger.success(f"Collapse quality ({p['observable']}): {quality:.6g}")

        if self.config.output_format == "json":
            record = {
                "observable": table.observable,
                "n_c": table.n_c,
                "nu": table.nu,
                "y_exponent": table.y_exponent,
                "beta": table.beta,
                "delta": table.delta,
                "quality": quality,
                "points": table.points.to_dict(orient="records"),
            }
            self.writer.write_record(record, self.config.output)
        else:
            self.writer.write_frame(table.points, self.config.output)
        if p["quality_output"]:
            TableWriter("json").write_record({"quality": quality}, p["quality_output"])


class ExponentsCommand(ExperimentCommand):
    name = "exponents"

    def execute(self):
        tables = self.sweep_tables()
        criterion = self.criterion()
        n_c_inf = None if self.params["free_nc"] else 0.0
        nu = correlation_exponent(tables, criterion, n_c_inf)
        record = {
            "alpha": threshold_exponent(tables, criterion).to_dict(),
            "nu": nu.to_dict(),
            "beta": order_parameter_exponent(tables, nu.exponent, criterion).to_dict(),
            "delta": tau_exponent(tables).to_dict(),
        }
        TableWriter("json").write_record(record, self.config.output)


class SearchSpaceCommand(ExperimentCommand):
    name = "search-space"

    def execute(self):
        N = self.params["system_size"]
        record = {"N": N, "G": search_space_size(N)}
        self.writer.write_record(record, self.config.output)


COMMANDS = {
    command.name: command
    for command in (
        SimulateCommand,
        SweepCommand,
        DistributionCommand,
        SeriesCommand,
        AnnealedCommand,
        ThresholdsCommand,
        FitCommand,
        CollapseCommand,
        ExponentsCommand,
        SearchSpaceCommand,
    )
}


def _integer(minimum: int):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer: {text!r}")
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}, got {value}")
        return value

    return parse


def _probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}")
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1), got {value}")
    return value


def _n_grid(minimum: int):
    """Parses "start:stop:step" (stop included) or "n1,n2,...". """

    def parse(text: str) -> list[int]:
        try:
            if ":" in text:
                start, stop, step = (int(part) for part in text.split(":"))
                if step < 1:
                    raise argparse.ArgumentTypeError(
                        f"grid step must be >= 1: {text!r}"
                    )
                grid = list(range(start, stop + 1, step))
            else:
                grid = [int(part) for part in text.split(",") if part.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid N grid: {text!r}")
        if not grid:
            raise argparse.ArgumentTypeError(f"empty N grid: {text!r}")
        if min(grid) < minimum:
            raise argparse.ArgumentTypeError(f"grid values must be >= {minimum}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise argparse.ArgumentTypeError(
                f"grid must be strictly increasing: {text!r}"
            )
        return grid

    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", default="-", help='output file ("-" = stdout)')
    common.add_argument("--format", choices=OUTPUT_FORMATS, default=None)
    common.add_argument("--preset", choices=sorted(presets_dict), default="desk")
    common.add_argument("--workers", type=_integer(1), default=1)
    common.add_argument(
        "--log-level",
        default="INFO",
        choices=["TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR"],
    )

    parser = argparse.ArgumentParser(
        prog="stochastic-prime-generator",
        description="Monte Carlo experiments on the stochastic prime generator.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def run_options(sub, pool_sizes: bool = False, seed_required: bool = True):
        if pool_sizes:
            sub.add_argument("--pool-size", type=_integer(3), nargs="+")
        else:
            sub.add_argument("--pool-size", type=_integer(3), required=True)
        sub.add_argument("--seed", type=_integer(0), required=seed_required)
        sub.add_argument("--max-sweeps", type=_integer(1), default=None)

    simulate = subparsers.add_parser("simulate", parents=[common])
    run_options(simulate)
    simulate.add_argument("--system-size", type=_integer(2), required=True)
    simulate.add_argument("--realizations", type=_integer(1), default=None)
    simulate.add_argument("--initial-values", type=_integer(2), nargs="+")

    sweep = subparsers.add_parser("sweep", parents=[common])
    run_options(sweep, pool_sizes=True)
    sweep.add_argument("--n-grid", type=_n_grid(2), required=True)
    sweep.add_argument("--realizations", type=_integer(1), default=None)

    distribution = subparsers.add_parser("distribution", parents=[common])
    run_options(distribution)
    distribution.add_argument("--system-size", type=_integer(2), required=True)
    distribution.add_argument("--realizations", type=_integer(1), default=None)
    distribution.add_argument("--initial-values", type=_integer(2), nargs="+")

    series = subparsers.add_parser("series", parents=[common])
    run_options(series)
    series.add_argument("--system-size", type=_integer(2), required=True)
    series.add_argument("--realization", type=_integer(0), default=0)

    annealed = subparsers.add_parser("annealed", parents=[common])
    annealed.add_argument("--pool-size", type=_integer(4), nargs="+")
    annealed.add_argument("--seed", type=_integer(0), required=True)
    annealed.add_argument("--n-grid", type=_n_grid(1), required=True)
    annealed.add_argument("--samples", type=_integer(1), default=None)

    thresholds = subparsers.add_parser("thresholds", parents=[common])
    thresholds.add_argument("--inputs", nargs="+", required=True)
    thresholds.add_argument(
        "--criterion",
        choices=["first-nonzero", "half-crossing"],
        default="first-nonzero",
    )
    thresholds.add_argument("--theta", type=_probability, default=None)

    fit = subparsers.add_parser("fit", parents=[common])
    fit.add_argument("--input", required=True)
    fit.add_argument("--x-col", required=True)
    fit.add_argument("--y-col", required=True)

    collapse_parser = subparsers.add_parser("collapse", parents=[common])
    collapse_parser.add_argument("--inputs", nargs="+", required=True)
    collapse_parser.add_argument("--observable", choices=["P", "tau"], default="P")
    collapse_parser.add_argument("--nc", type=float, default=None)
    collapse_parser.add_argument("--nu", type=float, default=None)
    collapse_parser.add_argument("--beta", type=float, default=None)
    collapse_parser.add_argument("--delta", type=float, default=None)
    collapse_parser.add_argument("--quality-output", default=None)

    exponents = subparsers.add_parser("exponents", parents=[common])
    exponents.add_argument("--inputs", nargs="+", required=True)
    exponents.add_argument(
        "--criterion",
        choices=["first-nonzero", "half-crossing"],
        default="first-nonzero",
    )
    exponents.add_argument("--theta", type=_probability, default=None)
    exponents.add_argument("--free-nc", action="store_true")

    search_space = subparsers.add_parser("search-space", parents=[common])
    search_space.add_argument("--system-size", type=_integer(2), required=True)

    return parser


_PRESET_KEYS = {
    "realizations": "realizations",
    "samples": "samples",
    "max_sweeps": "max_sweeps",
    "theta": "theta",
    "nc": "n_c",
    "nu": "nu",
    "beta": "beta",
    "delta": "delta",
}
_POOL_LADDERS = {"sweep": "pool_sizes", "annealed": "annealed_pool_sizes"}
_GLOBAL_KEYS = {"command", "output", "format", "preset", "workers", "log_level"}


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Fills unset options from the preset and freezes them in a config."""
    preset = presets_dict[args.preset]
    parameters = {"preset": args.preset}
    for key, value in vars(args).items():
        if key in _GLOBAL_KEYS:
            continue
        if value is None and key in _PRESET_KEYS:
            value = preset[_PRESET_KEYS[key]]
        if key == "pool_size" and value is None:
            value = list(preset[_POOL_LADDERS[args.command]])
        if key == "pool_size" and isinstance(value, list):
            key, value = "pool_sizes", value
        parameters[key] = value

    output_format = args.format
    if output_format is None:
        output_format = "json" if args.command in ("fit", "exponents") else "csv"

    return ExperimentConfig(
        command=args.command,
        parameters=parameters,
        output=args.output,
        output_format=output_format,
        workers=args.workers,
    )


def configure_logging(level: str):
    logger.remove()
    logger.add(sys.stderr, format=LOG_FORMAT, level=level)


def main(argv: list[str] | None = None) -> int:
    """
    Parses the command line and runs one subcommand.

    Returns:
        0 on success, 1 on a runtime or range error, 2 on a usage error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_initial_values(parser, args)
    except SystemExit as exit_request:
        return EXIT_USAGE_ERROR if exit_request.code else EXIT_OK

    configure_logging(args.log_level)
    config = resolve_config(args)
    return COMMANDS[config.command](config).start()


def _check_initial_values(parser: argparse.ArgumentParser, args: argparse.Namespace):
    values = getattr(args, "initial_values", None)
    if values is None:
        return
    if len(values) != args.system_size:
        parser.error("--initial-values must list exactly --system-size values")
    if max(values) > args.pool_size:
        parser.error("--initial-values must not exceed --pool-size")
