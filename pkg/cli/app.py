"""Batch command-line interface: bounds, simulate, verify and compare."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
import argparse
import logging
import math
import sys

import numpy as np

from core.bounds import (
    BOUND_FAMILIES,
    BoundParams,
    certifiable_tails,
    complement_bounds,
    crossover,
    evaluate_bound,
    mcdiarmid_tail,
    negative_association_tail,
    tabulate_bounds,
)
from core.model import (
    comparison_parameters,
    effective_coupling_constant,
    mean_estimate,
    reduce_statistic,
    total_weight,
)
from core.params import ModelSpec, STATISTICS, load_model_config
from core.results import FORMATS, Report, bound_report, export_report
from core.solver import sample_pairs, sample_statistics
from core.verify import verify_model

logger = logging.getLogger("sizebiasconc")

COMMANDS = ("bounds", "simulate", "verify", "compare")
DEFAULT_T_GRID = "0:10:1"
DEFAULT_SAMPLES = 10**5

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2


@dataclass(frozen=True, slots=True)
class RunConfig:
    command: str
    config_path: str
    t_grid: str = DEFAULT_T_GRID
    samples: int = DEFAULT_SAMPLES
    seed: int | None = None
    out: str = "-"
    fmt: str = "csv"
    jobs: int = 1
    statistic: str = "ge"
    complement: bool = False
    pairs: bool = False
    bound_a: str = "bernstein:right"
    bound_b: str = "mcdiarmid:right"


def validate_run_config(run: RunConfig) -> None:
    errors: list[str] = []
    if run.command not in COMMANDS:
        errors.append(f"command must be one of {', '.join(COMMANDS)}")
    if run.command in ("simulate", "verify") and run.seed is None:
        errors.append(f"--seed is required for {run.command}")
    if run.seed is not None and not (0 <= run.seed < 2**64):
        errors.append("--seed must be an unsigned 64-bit integer")
    if run.samples < 1:
        errors.append("--samples must be >= 1")
    if run.jobs < 1:
        errors.append("--jobs must be >= 1")
    if run.fmt not in FORMATS:
        errors.append(f"--format must be one of {', '.join(FORMATS)}")
    if run.fmt == "xlsx" and run.out == "-":
        errors.append("--format xlsx needs --out PATH")
    if run.statistic not in STATISTICS:
        errors.append("--statistic must be 'ge' or 'ne'")
    try:
        parse_t_grid(run.t_grid)
    except ValueError as exc:
        errors.append(str(exc))
    if errors:
        raise ValueError("; ".join(errors))


def parse_t_grid(text: str) -> np.ndarray:
    """'start:stop:step' with stop included; start > stop gives an empty grid."""

    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("--t-grid must look like start:stop:step")
    try:
        start, stop, step = (float(part) for part in parts)
    except ValueError as exc:
        raise ValueError("--t-grid entries must be numbers") from exc
    if not all(math.isfinite(value) for value in (start, stop, step)):
        raise ValueError("--t-grid entries must be finite")
    if step <= 0.0:
        raise ValueError("--t-grid step must be > 0")
    if start < 0.0:
        raise ValueError("--t-grid start must be >= 0")
    if start > stop:
        return np.zeros(0)
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _resolved_mu(model: ModelSpec, statistic: str) -> float:
    mu = mean_estimate(model, statistic).value
    if mu <= 0.0:
        raise ValueError(f"{model.variant} {statistic} statistic has zero mean")
    return mu


def cmd_bounds(run: RunConfig, model: ModelSpec) -> Report:
    mu = _resolved_mu(model, run.statistic)
    c = effective_coupling_constant(model, run.statistic)
    metadata = {
        "model": model.variant,
        "statistic": run.statistic,
        "offset": reduce_statistic(model, run.statistic).offset,
    }
    table = tabulate_bounds(mu, c, parse_t_grid(run.t_grid), metadata=metadata)
    if run.complement:
        table = complement_bounds(table, total_weight(model))
    logger.info("tabulated %d bound values (mu=%.6g, c=%.6g)", sum(len(v) for v in table.values.values()), mu, c)
    return bound_report(table, model.variant, run.statistic)


def cmd_simulate(run: RunConfig, model: ModelSpec) -> Report:
    metadata = {"model": model.variant, "statistic": run.statistic, "seed": run.seed, "samples": run.samples}
    if run.pairs:
        batch = sample_pairs(model, run.statistic, run.samples, run.seed, run.jobs)
        rows = [
            {"sample": index, "alpha": int(alpha), "y": float(y) + batch.offset, "y_s": float(y_s) + batch.offset}
            for index, (alpha, y, y_s) in enumerate(zip(batch.alpha, batch.y, batch.y_s))
        ]
        return Report("pairs", ("sample", "alpha", "y", "y_s"), rows, metadata)
    values = sample_statistics(model, run.statistic, run.samples, run.seed, run.jobs)
    rows = [{"sample": index, "y": float(value)} for index, value in enumerate(values)]
    return Report("samples", ("sample", "y"), rows, metadata)


def cmd_verify(run: RunConfig, model: ModelSpec) -> Report:
    return verify_model(model, run.statistic, parse_t_grid(run.t_grid), run.samples, int(run.seed), run.jobs)


def _parse_bound_name(text: str) -> tuple[str, str]:
    family, _, side = text.partition(":")
    return family, side or "right"


def comparison_bound(model: ModelSpec, statistic: str, name: str) -> Callable[[float], float]:
    """Tail bound t -> value for one of the size-bias families or a competing method.

    Competing methods: mcdiarmid, certifiable and negative_association, each with :left or :right.
    """

    family, side = _parse_bound_name(name)
    if side not in ("left", "right"):
        raise ValueError(f"bound side must be left or right in {name}")
    mu = _resolved_mu(model, statistic)
    c = effective_coupling_constant(model, statistic)
    comparison = comparison_parameters(model, statistic)
    if family in BOUND_FAMILIES:
        if side not in BOUND_FAMILIES[family]:
            raise ValueError(f"bound family {family} does not cover the {side} tail")
        return lambda t: evaluate_bound(family, side, BoundParams(mu=mu, c=c, t=t))
    if family == "mcdiarmid":
        if comparison.mcdiarmid_c is None:
            raise ValueError(f"no bounded-difference constants for {model.variant}")
        coords = comparison.mcdiarmid_c
        return lambda t: mcdiarmid_tail(coords, t)
    if family == "certifiable":
        if comparison.certifiable is None:
            raise ValueError(f"no certifiable-function constants for {model.variant} {statistic}")
        cc, a, b = comparison.certifiable
        index = 0 if side == "left" else 1
        return lambda t: certifiable_tails(cc, a, b, mu, t)[index]
    if family == "negative_association":
        if not comparison.negative_association:
            raise ValueError(f"{model.variant} {statistic} indicators are not negatively associated")
        return lambda t: negative_association_tail(mu, t, side)
    raise ValueError(f"unknown bound: {name}")


def cmd_compare(run: RunConfig, model: ModelSpec) -> Report:
    grid = parse_t_grid(run.t_grid)
    bound_a = comparison_bound(model, run.statistic, run.bound_a)
    bound_b = comparison_bound(model, run.statistic, run.bound_b)
    rows = []
    for t in grid:
        value_a, value_b = bound_a(float(t)), bound_b(float(t))
        rows.append(
            {"row": "grid", "t": float(t), "value_a": value_a, "value_b": value_b, "difference": value_a - value_b}
        )
    crossings = crossover(bound_a, bound_b, (float(grid[0]), float(grid[-1]))) if len(grid) >= 2 else []
    for t in crossings:
        rows.append({"row": "crossover", "t": t, "value_a": bound_a(t), "value_b": bound_b(t), "difference": bound_a(t) - bound_b(t)})
    metadata = {"model": model.variant, "statistic": run.statistic, "bound_a": run.bound_a, "bound_b": run.bound_b}
    return Report("compare", ("row", "t", "value_a", "value_b", "difference"), rows, metadata)


HANDLERS: dict[str, Callable[[RunConfig, ModelSpec], Report]] = {
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sizebiasconc", description="Size-bias concentration bounds for occupancy models.")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    commands = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = commands.add_parser(name)
        sub.add_argument("--config", required=True, metavar="PATH", help="model JSON document")
        sub.add_argument("--out", default="-", metavar="PATH", help="output file, '-' for standard output")
        sub.add_argument("--format", dest="fmt", default="csv", choices=FORMATS)
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
        sub.add_argument("--t-grid", default=DEFAULT_T_GRID, metavar="START:STOP:STEP")
        sub.add_argument("--jobs", type=int, default=1)
        sub.add_argument("--statistic", default="ge", choices=STATISTICS)
        if name == "bounds":
            sub.add_argument("--complement", action="store_true", help="bounds for sum(w) - Y")
        if name == "simulate":
            sub.add_argument("--pairs", action="store_true", help="emit size-bias pairs instead of samples")
        if name == "compare":
            sub.add_argument("--bound-a", default="bernstein:right", metavar="FAMILY:SIDE")
            sub.add_argument("--bound-b", default="mcdiarmid:right", metavar="FAMILY:SIDE")
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=args.command,
        config_path=args.config,
        t_grid=args.t_grid,
        samples=args.samples,
        seed=args.seed,
        out=args.out,
        fmt=args.fmt,
        jobs=args.jobs,
        statistic=args.statistic,
        complement=getattr(args, "complement", False),
        pairs=getattr(args, "pairs", False),
        bound_a=getattr(args, "bound_a", "bernstein:right"),
        bound_b=getattr(args, "bound_b", "mcdiarmid:right"),
    )


def run(run_config: RunConfig) -> int:
    model = load_model_config(run_config.config_path)
    if run_config.seed is None and model.seed is not None:
        run_config = replace(run_config, seed=model.seed)
    validate_run_config(run_config)
    logger.info("%s on %s (%s)", run_config.command, run_config.config_path, model.variant)
    report = HANDLERS[run_config.command](run_config, model)
    export_report(report, run_config.out, run_config.fmt)
    if not report.passed:
        for failure in report.failures:
            logger.error("audit failed: %s", failure)
        return EXIT_FAILED
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(run_config_from_args(args))
    except ValueError as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_INVALID
    except RuntimeError as exc:
        logger.error("run failed: %s", exc)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
