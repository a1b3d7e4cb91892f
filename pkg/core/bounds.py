"""Closed-form tail bounds for bounded size-bias couplings and competing methods."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
import logging
import math
from typing import Any

import numpy as np
from scipy.optimize import bisect
from scipy.special import xlog1py, xlogy

logger = logging.getLogger(__name__)

SIDES = ("left", "right")

# family -> tails it bounds
BOUND_FAMILIES: dict[str, tuple[str, ...]] = {
    "gauss": ("left",),
    "basic": ("right",),
    "sub_poisson": ("left", "right"),
    "bernstein": ("left", "right"),
}


@dataclass(frozen=True, slots=True)
class BoundParams:
    mu: float
    c: float
    t: float

    def __post_init__(self) -> None:
        errors: list[str] = []
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            errors.append("mu must be > 0")
        if not (math.isfinite(self.c) and self.c > 0.0):
            errors.append("c must be > 0")
        if not (math.isfinite(self.t) and self.t >= 0.0):
            errors.append("t must be >= 0")
        if errors:
            raise ValueError("; ".join(errors))


def _from_log(log_value: float) -> float:
    if math.isnan(log_value):
        raise RuntimeError("bound evaluation produced NaN")
    return float(min(1.0, math.exp(min(0.0, log_value))))


def left_tail_gauss(params: BoundParams) -> float:
    """exp(-t^2 / (2 c mu))."""

    return _from_log(-params.t**2 / (2.0 * params.c * params.mu))


def right_tail_basic(params: BoundParams) -> float:
    """exp(-t^2 / (2 c mu + c t))."""

    return _from_log(-params.t**2 / (2.0 * params.c * params.mu + params.c * params.t))


def sub_poisson_log(params: BoundParams, side: str = "right") -> float:
    """Log of (mu/(mu+s))^((s+mu)/c) e^(s/c) at s = t (right) or s = -t (left)."""

    mu, c, t = params.mu, params.c, params.t
    if side == "right":
        return (t - float(xlog1py(mu + t, t / mu))) / c
    if side == "left":
        if t > mu:
            return -math.inf
        return (-t - float(xlog1py(mu - t, -t / mu))) / c
    raise ValueError("side must be 'left' or 'right'")


def sub_poisson_log_h(params: BoundParams, side: str = "right") -> float:
    """Same exponent written as -(mu/c) h(s/mu) with h(x) = (1+x) log(1+x) - x."""

    mu, c, t = params.mu, params.c, params.t
    if side not in SIDES:
        raise ValueError("side must be 'left' or 'right'")
    x = t / mu if side == "right" else -t / mu
    if x < -1.0:
        return -math.inf
    h = float(xlogy(1.0 + x, 1.0 + x)) - x
    return -(mu / c) * h


def sub_poisson_tail(params: BoundParams, side: str = "right") -> float:
    if side == "left" and params.t > params.mu:
        # Y >= 0 cannot fall more than mu below its mean
        return 0.0
    return _from_log(sub_poisson_log(params, side))


def bernstein_tail(params: BoundParams, side: str = "right") -> float:
    """exp(-t^2 / (2 c mu + 2 c t / 3)); dominates the sub-Poisson bound on either side."""

    if side not in SIDES:
        raise ValueError("side must be 'left' or 'right'")
    return _from_log(-params.t**2 / (2.0 * params.c * params.mu + 2.0 * params.c * params.t / 3.0))


def negative_association_tail(mu: float, t: float, side: str = "right") -> float:
    """Sub-Poisson bound with c = 1, the shape available under negative association."""

    return sub_poisson_tail(BoundParams(mu=mu, c=1.0, t=t), side)


def mcdiarmid_tail(c_vec: Sequence[float] | np.ndarray, t: float) -> float:
    """Bounded-differences bound exp(-2 t^2 / sum c_i^2)."""

    coords = np.asarray(c_vec, dtype=float).reshape(-1)
    errors: list[str] = []
    if coords.size == 0 or np.any(coords < 0.0) or not np.any(coords > 0.0):
        errors.append("c_vec must be nonnegative and not all zero")
    if t < 0.0:
        errors.append("t must be >= 0")
    if errors:
        raise ValueError("; ".join(errors))
    return _from_log(-2.0 * t**2 / float(np.sum(coords**2)))


def mcdiarmid_er_tail(m: int, t: float, weight: float = 1.0) -> float:
    """Degree-count form: c_i = 2 |w| over the m(m-1)/2 edges."""

    if m < 2:
        raise ValueError("m must be >= 2")
    return mcdiarmid_tail(np.full(m * (m - 1) // 2, 2.0 * weight), t)


def certifiable_tails(c: float, a: float, b: float, mu: float, t: float) -> tuple[float, float]:
    """(left, right) bounds for a c-Lipschitz function certified by a*s + b coordinates."""

    errors: list[str] = []
    if c <= 0.0:
        errors.append("c must be > 0")
    if a < 0.0:
        errors.append("a must be >= 0")
    if b < 0.0:
        errors.append("b must be >= 0")
    if t < 0.0:
        errors.append("t must be >= 0")
    if errors:
        raise ValueError("; ".join(errors))
    if t == 0.0:
        return 1.0, 1.0

    scale = 2.0 * c**2
    left_den = scale * (a * mu + b + t / (3.0 * c))
    right_den = scale * (a * mu + b + a * t)
    left = _from_log(-t**2 / left_den)
    right = 0.0 if right_den <= 0.0 else _from_log(-t**2 / right_den)
    return left, right


def evaluate_bound(family: str, side: str, params: BoundParams) -> float:
    if family not in BOUND_FAMILIES:
        raise ValueError(f"unknown bound family: {family}")
    if side not in BOUND_FAMILIES[family]:
        raise ValueError(f"bound family {family} does not cover the {side} tail")
    if family == "gauss":
        return left_tail_gauss(params)
    if family == "basic":
        return right_tail_basic(params)
    if family == "sub_poisson":
        return sub_poisson_tail(params, side)
    return bernstein_tail(params, side)


@dataclass(frozen=True, slots=True)
class TailBoundReport:
    t_grid: np.ndarray
    mu: float
    c: float
    values: dict[tuple[str, str], np.ndarray]
    metadata: dict[str, Any] = field(default_factory=dict)

    def rows(self) -> list[dict[str, Any]]:
        """One row per (t, family, side) in grid order."""

        out: list[dict[str, Any]] = []
        for index, t in enumerate(self.t_grid):
            for (family, side), values in self.values.items():
                out.append(
                    {
                        "t": float(t),
                        "bound": family,
                        "side": side,
                        "value": float(values[index]),
                        "mu": self.mu,
                        "c": self.c,
                    }
                )
        return out


def tabulate_bounds(
    mu: float,
    c: float,
    t_grid: Sequence[float] | np.ndarray,
    families: Sequence[str] | None = None,
    metadata: dict[str, Any] | None = None,
) -> TailBoundReport:
    grid = np.asarray(t_grid, dtype=float).reshape(-1)
    chosen = list(BOUND_FAMILIES) if families is None else list(families)
    values: dict[tuple[str, str], np.ndarray] = {}
    for family in chosen:
        if family not in BOUND_FAMILIES:
            raise ValueError(f"unknown bound family: {family}")
        for side in BOUND_FAMILIES[family]:
            values[(family, side)] = np.array(
                [evaluate_bound(family, side, BoundParams(mu=mu, c=c, t=float(t))) for t in grid]
            )
    return TailBoundReport(t_grid=grid, mu=float(mu), c=float(c), values=values, metadata=dict(metadata or {}))


def crossover(
    bound_a: Callable[[float], float],
    bound_b: Callable[[float], float],
    t_range: tuple[float, float],
    tol: float = 1e-6,
    n_grid: int = 2001,
) -> list[float]:
    """Points in t_range where bound_a - bound_b changes sign, located by bisection."""

    lo, hi = float(t_range[0]), float(t_range[1])
    if not (hi > lo):
        raise ValueError("t_range must satisfy start < stop")
    grid = np.linspace(lo, hi, n_grid)

    def diff(t: float) -> float:
        return float(bound_a(t)) - float(bound_b(t))

    signs = np.sign([diff(float(t)) for t in grid])
    crossings: list[float] = []
    last_index: int | None = None
    for index, sign in enumerate(signs):
        if sign == 0.0:
            continue
        if last_index is not None and sign != signs[last_index]:
            root = bisect(diff, float(grid[last_index]), float(grid[index]), xtol=tol)
            crossings.append(float(root))
        last_index = index
    logger.debug("crossover on [%g, %g]: %d crossing(s)", lo, hi, len(crossings))
    return crossings


def complement_bounds(report: TailBoundReport, total: float) -> TailBoundReport:
    """Bounds for total - Y: same deviations with the left and right tails exchanged."""

    if total < report.mu:
        raise ValueError("total must be >= mu")
    swap = {"left": "right", "right": "left"}
    values = {(family, swap[side]): values for (family, side), values in report.values.items()}
    metadata = {**report.metadata, "complement_of_mu": report.mu, "complement_total": float(total)}
    return TailBoundReport(
        t_grid=report.t_grid,
        mu=float(total) - report.mu,
        c=report.c,
        values=values,
        metadata=metadata,
    )
