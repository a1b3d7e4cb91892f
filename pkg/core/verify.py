"""Exact oracles and Monte-Carlo audits of the couplings and tail bounds."""

from collections.abc import Callable, Sequence
from dataclasses import dataclass
import itertools
import logging
import math

import numpy as np
from scipy.special import gammaln

from .bounds import BOUND_FAMILIES, BoundParams, evaluate_bound
from .lattice import GappedPmf, LatticePmf
from .model import (
    check_statistic,
    effective_coupling_constant,
    is_germ_grain,
    mean_estimate,
    reduce_statistic,
)
from .params import ErGraphParams, HypergeometricParams, ModelSpec, MultinomialParams
from .results import Report
from .solver import SizeBiasSampler, sample_pairs, sample_statistics

logger = logging.getLogger(__name__)

ENUMERATION_LIMIT = 10**7
WILSON_Z = 4.0
TV_TOLERANCE = 0.01
TV_MIN_SAMPLES = 10**5
VALUE_DECIMALS = 9
EXACT_MEAN_TOLERANCE = 1e-10

AUDIT_COLUMNS = ("model", "statistic", "check", "value", "limit", "pass")
DOMINATION_COLUMNS = ("model", "statistic", "bound", "side", "t", "bound_value", "empirical", "halfwidth", "pass")


@dataclass(frozen=True, slots=True)
class DiscreteLaw:
    """Finitely supported law on sorted real atoms; zero-probability atoms are allowed."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float).reshape(-1)
        probs = np.asarray(self.probs, dtype=float).reshape(-1)
        errors: list[str] = []
        if values.shape != probs.shape or values.size == 0:
            errors.append("values and probs must be nonempty and of equal length")
        elif np.any(np.diff(values) <= 0.0):
            errors.append("values must be strictly increasing")
        if np.any(probs < 0.0) or abs(float(probs.sum()) - 1.0) > 1e-9:
            errors.append("probs must be >= 0 and sum to 1")
        if errors:
            raise ValueError("; ".join(errors))
        values.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    def prob(self, value: float) -> float:
        index = np.flatnonzero(np.isclose(self.values, value, rtol=0.0, atol=10.0**-VALUE_DECIMALS))
        return float(self.probs[index].sum())

    def shifted(self, offset: float) -> "DiscreteLaw":
        return DiscreteLaw(self.values + offset, self.probs)

    @classmethod
    def from_pmf(cls, pmf: LatticePmf | GappedPmf) -> "DiscreteLaw":
        return cls(pmf.support.astype(float), pmf.probs)

    @classmethod
    def from_weighted(cls, values: np.ndarray, weights: np.ndarray) -> "DiscreteLaw":
        """Group equal values (to VALUE_DECIMALS places) and normalise their weights."""

        rounded = np.round(np.asarray(values, dtype=float), VALUE_DECIMALS)
        atoms, inverse = np.unique(rounded, return_inverse=True)
        mass = np.bincount(inverse, weights=np.asarray(weights, dtype=float), minlength=len(atoms))
        return cls(atoms, mass / mass.sum())

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "DiscreteLaw":
        values = np.asarray(samples, dtype=float).reshape(-1)
        if values.size == 0:
            raise ValueError("samples must be nonempty")
        return cls.from_weighted(values, np.ones(values.size))


def law_total_variation(first: DiscreteLaw, second: DiscreteLaw) -> float:
    atoms = np.union1d(np.round(first.values, VALUE_DECIMALS), np.round(second.values, VALUE_DECIMALS))
    a = np.zeros(len(atoms))
    b = np.zeros(len(atoms))
    a[np.searchsorted(atoms, np.round(first.values, VALUE_DECIMALS))] = first.probs
    b[np.searchsorted(atoms, np.round(second.values, VALUE_DECIMALS))] = second.probs
    return 0.5 * float(np.abs(a - b).sum())


def exact_size_bias_law(law: DiscreteLaw | LatticePmf | GappedPmf) -> DiscreteLaw:
    """P(Y^s = y) = y P(Y = y) / mu."""

    base = law if isinstance(law, DiscreteLaw) else DiscreteLaw.from_pmf(law)
    if np.any(base.values < 0.0):
        raise ValueError("size biasing needs a nonnegative variable")
    mu = base.mean
    if mu <= 0.0:
        raise ValueError("size biasing needs a positive mean")
    return DiscreteLaw(base.values, base.values * base.probs / mu)


# brute-force enumeration


def _mixed_radix(options: list[np.ndarray], codes: np.ndarray) -> np.ndarray:
    """Decode configuration codes into one chosen option per coordinate."""

    out = np.empty((len(codes), len(options)), dtype=np.int64)
    rest = codes.copy()
    for column, choices in enumerate(options):
        out[:, column] = choices[rest % len(choices)]
        rest //= len(choices)
    return out


def _check_enumerable(count: int, what: str) -> None:
    if count > ENUMERATION_LIMIT:
        raise ValueError(f"{what} has {count} configurations; brute force allows at most {ENUMERATION_LIMIT}")


def _indicator_values(model: ModelSpec, counts: np.ndarray, kind: str) -> np.ndarray:
    hits = counts >= model.thresholds[None, :] if kind == "ge" else counts != model.thresholds[None, :]
    return hits @ model.weights


def _er_law(model: ModelSpec, payload: ErGraphParams, kind: str, block: int) -> DiscreteLaw:
    m = payload.edge_probs.shape[0]
    pairs = [(i, j) for i, j in itertools.combinations(range(m), 2) if payload.edge_probs[i, j] > 0.0]
    _check_enumerable(2 ** len(pairs), "er_graph")
    incidence = np.zeros((len(pairs), m))
    for row, (i, j) in enumerate(pairs):
        incidence[row, i] = incidence[row, j] = 1.0
    probs = np.array([payload.edge_probs[i, j] for i, j in pairs])
    values: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    for start in range(0, 2 ** len(pairs), block):
        codes = np.arange(start, min(start + block, 2 ** len(pairs)), dtype=np.int64)
        bits = ((codes[:, None] >> np.arange(len(pairs))) & 1).astype(float)
        log_p = bits @ np.log(probs) + (1.0 - bits) @ np.log1p(-probs)
        counts = np.rint(bits @ incidence).astype(np.int64)
        values.append(_indicator_values(model, counts, kind))
        weights.append(np.exp(log_p))
    return DiscreteLaw.from_weighted(np.concatenate(values), np.concatenate(weights))


def _multinomial_law(model: ModelSpec, payload: MultinomialParams, kind: str, block: int) -> DiscreteLaw:
    placement = payload.placement
    urns, balls = placement.shape
    options = [np.flatnonzero(placement[:, j] > 0.0) for j in range(balls)]
    total = math.prod(len(choices) for choices in options)
    _check_enumerable(total, "multinomial")
    values: list[np.ndarray] = []
    weights: list[np.ndarray] = []
    for start in range(0, total, block):
        codes = np.arange(start, min(start + block, total), dtype=np.int64)
        locations = _mixed_radix(options, codes)
        prob = np.prod(placement[locations, np.arange(balls)[None, :]], axis=1)
        counts = np.stack([(locations == urn).sum(axis=1) for urn in range(urns)], axis=1)
        values.append(_indicator_values(model, counts, kind))
        weights.append(prob)
    return DiscreteLaw.from_weighted(np.concatenate(values), np.concatenate(weights))


def _hypergeometric_law(model: ModelSpec, payload: HypergeometricParams, kind: str) -> DiscreteLaw:
    counts = [int(c) for c in payload.counts]
    s = int(payload.sample_size)
    _check_enumerable(math.prod(min(c, s) + 1 for c in counts), "hypergeometric")
    vectors = [
        vector
        for vector in itertools.product(*(range(min(c, s) + 1) for c in counts))
        if sum(vector) == s
    ]
    taken = np.array(vectors, dtype=np.int64)
    sizes = np.array(counts, dtype=float)
    log_weight = np.sum(gammaln(sizes + 1) - gammaln(taken + 1) - gammaln(sizes - taken + 1), axis=1)
    weight = np.exp(log_weight - log_weight.max())
    return DiscreteLaw.from_weighted(_indicator_values(model, taken, kind), weight)


def brute_force_law(model: ModelSpec, kind: str, block: int = 1 << 16) -> DiscreteLaw:
    """Exact law of the full statistic by enumerating every configuration."""

    check_statistic(kind)
    payload = model.payload
    if isinstance(payload, ErGraphParams):
        return _er_law(model, payload, kind, block)
    if isinstance(payload, MultinomialParams):
        return _multinomial_law(model, payload, kind, block)
    if isinstance(payload, HypergeometricParams):
        return _hypergeometric_law(model, payload, kind)
    raise ValueError(f"{model.variant} has a continuum of configurations; brute force is unavailable")


def is_enumerable(model: ModelSpec) -> bool:
    payload = model.payload
    if isinstance(payload, ErGraphParams):
        return 2 ** int(np.count_nonzero(np.triu(payload.edge_probs, k=1))) <= ENUMERATION_LIMIT
    if isinstance(payload, MultinomialParams):
        return math.prod(int(np.count_nonzero(column)) for column in payload.placement.T) <= ENUMERATION_LIMIT
    if isinstance(payload, HypergeometricParams):
        s = int(payload.sample_size)
        return math.prod(min(int(c), s) + 1 for c in payload.counts) <= ENUMERATION_LIMIT
    return False


# empirical tails


def wilson_halfwidth(fraction: float, n: int, z: float = WILSON_Z) -> float:
    if n <= 0:
        raise ValueError("n must be > 0")
    scale = z * z / n
    return z / (1.0 + scale) * math.sqrt(fraction * (1.0 - fraction) / n + scale / (4.0 * n))


class EmpiricalTail:
    """Sorted sample with tail-fraction queries."""

    def __init__(self, samples: Sequence[float] | np.ndarray) -> None:
        values = np.sort(np.asarray(samples, dtype=float).reshape(-1))
        if values.size == 0:
            raise ValueError("samples must be nonempty")
        if not np.all(np.isfinite(values)):
            raise ValueError("samples must be finite")
        values.setflags(write=False)
        self.values = values

    @property
    def count(self) -> int:
        return int(self.values.size)

    def fraction(self, threshold: float, side: str = "right") -> float:
        """Fraction of samples >= threshold (right) or <= threshold (left)."""

        if side == "right":
            return (self.count - int(np.searchsorted(self.values, threshold, side="left"))) / self.count
        if side == "left":
            return int(np.searchsorted(self.values, threshold, side="right")) / self.count
        raise ValueError("side must be 'left' or 'right'")


def empirical_tail(
    samples: Sequence[float] | np.ndarray | EmpiricalTail,
    threshold: float,
    side: str = "right",
    z: float = WILSON_Z,
) -> tuple[float, float]:
    """(fraction, Wilson half-width) of samples beyond threshold."""

    tail = samples if isinstance(samples, EmpiricalTail) else EmpiricalTail(samples)
    fraction = tail.fraction(threshold, side)
    return fraction, wilson_halfwidth(fraction, tail.count, z)


# audits


def _reduced_mean(model: ModelSpec, kind: str) -> tuple[float, float]:
    estimate = mean_estimate(model, kind)
    offset = reduce_statistic(model, kind).offset
    mu = estimate.value - offset
    if mu <= 0.0:
        raise ValueError(f"{model.variant} {kind} statistic has zero mean after reduction")
    return mu, estimate.error


def audit_domination(
    model: ModelSpec,
    kind: str,
    t_grid: Sequence[float] | np.ndarray,
    n_samples: int,
    seed: int | None,
    jobs: int = 1,
    families: Sequence[str] | None = None,
) -> Report:
    """Check that every implemented bound dominates the empirical tail at each t."""

    check_statistic(kind)
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    reduction = reduce_statistic(model, kind)
    mu, _ = _reduced_mean(model, kind)
    c = effective_coupling_constant(model, kind)
    samples = sample_statistics(model, kind, n_samples, seed, jobs, reduction)
    tail = EmpiricalTail(samples)
    rows = []
    failures = []
    for family in families or BOUND_FAMILIES:
        if family not in BOUND_FAMILIES:
            raise ValueError(f"unknown bound family: {family}")
        for side in BOUND_FAMILIES[family]:
            for t in np.asarray(t_grid, dtype=float):
                bound = evaluate_bound(family, side, BoundParams(mu=mu, c=c, t=float(t)))
                threshold = mu + t if side == "right" else mu - t
                fraction, halfwidth = empirical_tail(tail, threshold, side)
                passed = fraction <= bound + halfwidth
                rows.append(
                    {
                        "model": model.variant,
                        "statistic": kind,
                        "bound": family,
                        "side": side,
                        "t": float(t),
                        "bound_value": bound,
                        "empirical": fraction,
                        "halfwidth": halfwidth,
                        "pass": passed,
                    }
                )
                if not passed:
                    failures.append(
                        f"{model.variant} {kind}: {family} {side} bound {bound:.6g} below empirical tail {fraction:.6g} at t={t:g}"
                    )
    logger.info("domination audit %s %s: %d rows, %d failure(s)", model.variant, kind, len(rows), len(failures))
    return Report(
        name="domination",
        columns=DOMINATION_COLUMNS,
        rows=rows,
        metadata={"mu": mu, "c": c, "n_samples": int(n_samples), "seed": seed, "offset": reduction.offset},
        failures=tuple(failures),
    )


def _check(rows: list[dict], failures: list[str], model: ModelSpec, kind: str, name: str, value: float, limit: float, passed: bool) -> None:
    rows.append({"model": model.variant, "statistic": kind, "check": name, "value": float(value), "limit": float(limit), "pass": bool(passed)})
    if not passed:
        failures.append(f"{model.variant} {kind}: {name} = {value:.6g} exceeds {limit:.6g}")


def _test_functions(y: np.ndarray) -> list[tuple[str, Callable[[np.ndarray], np.ndarray]]]:
    """Constant, first two moments and indicators of Y above its quartiles."""

    out: list[tuple[str, Callable[[np.ndarray], np.ndarray]]] = [
        ("one", np.ones_like),
        ("identity", lambda values: values),
        ("square", np.square),
    ]
    for level in np.unique(np.quantile(y, [0.25, 0.5, 0.75])):
        out.append((f"indicator_ge_{level:.6g}", lambda values, level=float(level): (values >= level).astype(float)))
    return out


def audit_coupling(model: ModelSpec, kind: str, n_samples: int, seed: int | None, jobs: int = 1) -> Report:
    """Bounded increase, size-bias identity residuals and, when enumerable, the law of Y^s."""

    check_statistic(kind)
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    mu, mean_error = _reduced_mean(model, kind)
    c = effective_coupling_constant(model, kind)
    batch = sample_pairs(model, kind, n_samples, seed, jobs)
    rows: list[dict] = []
    failures: list[str] = []
    increase = batch.y_s - batch.y
    _check(rows, failures, model, kind, "max_increase", float(increase.max()), c, float(increase.max()) <= c + 1e-9)
    if kind == "ne" and not is_germ_grain(model):
        spread = float(np.abs(increase).max())
        _check(rows, failures, model, kind, "max_abs_change", spread, c, spread <= c + 1e-9)

    for name, f in _test_functions(batch.y):
        diffs = batch.y * f(batch.y) - mu * f(batch.y_s)
        residual = abs(float(diffs.mean()))
        slack = WILSON_Z * float(diffs.std(ddof=1)) / math.sqrt(n_samples)
        slack += mean_error * float(np.abs(f(batch.y_s)).mean())
        _check(rows, failures, model, kind, f"identity_{name}", residual, slack + 1e-12, residual <= slack + 1e-12)

    law_checked = False
    if not is_germ_grain(model) and is_enumerable(model):
        if n_samples < TV_MIN_SAMPLES:
            logger.warning(
                "%d pairs cannot resolve TV %g; size-bias law check skipped (needs >= %d)",
                n_samples,
                TV_TOLERANCE,
                TV_MIN_SAMPLES,
            )
        else:
            exact = exact_size_bias_law(brute_force_law(model, kind).shifted(-batch.offset))
            distance = law_total_variation(DiscreteLaw.from_samples(batch.y_s), exact)
            _check(rows, failures, model, kind, "tv_size_bias_law", distance, TV_TOLERANCE, distance <= TV_TOLERANCE)
            law_checked = True

    logger.info("coupling audit %s %s: %d checks, %d failure(s)", model.variant, kind, len(rows), len(failures))
    return Report(
        name="coupling",
        columns=AUDIT_COLUMNS,
        rows=rows,
        metadata={
            "mu": mu,
            "c": c,
            "n_samples": int(n_samples),
            "seed": seed,
            "offset": batch.offset,
            "law_checked": law_checked,
        },
        failures=tuple(failures),
    )


def audit_chain(model: ModelSpec, kind: str, n_samples: int, seed: int | None) -> Report:
    """Per-level stability of the other components along the coupled count paths.

    Raising the count of alpha by one may raise the weighted indicator sum over the other
    components by at most B |w|, with B = 1 for degree counts and != statistics and B = 0 for
    >= statistics of multinomial and hypergeometric models, where the other counts only fall.
    """

    check_statistic(kind)
    if model.variant not in ("er_graph", "multinomial", "hypergeometric"):
        raise ValueError("chain audits cover er_graph, multinomial and hypergeometric models")
    sampler = SizeBiasSampler(model, kind)
    rng = np.random.default_rng(seed)
    steps_per_level = 1.0 if kind == "ne" or model.variant == "er_graph" else 0.0
    limit = steps_per_level * model.abs_w
    direction = 1 if model.variant == "er_graph" else -1
    worst_growth = 0.0
    monotone = True
    alpha_steps = True
    active = sampler.reduction.active
    for _ in range(n_samples):
        alpha, path = sampler.count_path(rng)
        others = active[active != alpha]
        sums = [_others_sum(model, counts, kind, others) for counts in path]
        for before, after, low, high in zip(sums, sums[1:], path, path[1:]):
            worst_growth = max(worst_growth, after - before)
            change = np.delete(high - low, alpha)
            monotone &= bool(np.all(direction * change >= 0))
            alpha_steps &= int(high[alpha] - low[alpha]) == 1
    rows: list[dict] = []
    failures: list[str] = []
    _check(rows, failures, model, kind, "max_growth_per_level", worst_growth, limit, worst_growth <= limit + 1e-9)
    _check(rows, failures, model, kind, "others_monotone", float(not monotone), 0.0, monotone)
    _check(rows, failures, model, kind, "alpha_unit_steps", float(not alpha_steps), 0.0, alpha_steps)
    return Report(
        name="chain",
        columns=AUDIT_COLUMNS,
        rows=rows,
        metadata={"n_samples": int(n_samples), "seed": seed},
        failures=tuple(failures),
    )


def _others_sum(model: ModelSpec, counts: np.ndarray, kind: str, others: np.ndarray) -> float:
    d = model.thresholds[others]
    hits = counts[others] >= d if kind == "ge" else counts[others] != d
    return float(np.dot(model.weights[others], hits))


def audit_mean(model: ModelSpec, kind: str, n_samples: int, seed: int | None, jobs: int = 1) -> Report:
    """Closed-form mean against the exact law, or against a Monte-Carlo average."""

    check_statistic(kind)
    estimate = mean_estimate(model, kind)
    rows: list[dict] = []
    failures: list[str] = []
    if not is_germ_grain(model) and is_enumerable(model):
        exact = brute_force_law(model, kind).mean
        gap = abs(exact - estimate.value)
        _check(rows, failures, model, kind, "mean_vs_enumeration", gap, EXACT_MEAN_TOLERANCE, gap <= EXACT_MEAN_TOLERANCE)
    else:
        if n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        samples = sample_statistics(model, kind, n_samples, seed, jobs)
        gap = abs(float(samples.mean()) - estimate.value)
        limit = WILSON_Z * float(samples.std(ddof=1)) / math.sqrt(n_samples) + estimate.error + 1e-12
        _check(rows, failures, model, kind, "mean_vs_monte_carlo", gap, limit, gap <= limit)
    return Report(
        name="mean",
        columns=AUDIT_COLUMNS,
        rows=rows,
        metadata={"mean": estimate.value, "mean_error": estimate.error, "seed": seed},
        failures=tuple(failures),
    )


VERIFY_COLUMNS = ("audit", "model", "statistic", "bound", "side", "t", "bound_value", "empirical", "halfwidth", "pass")


def _matrix_rows(report: Report) -> list[dict]:
    """Audit rows in the domination layout: the check name fills bound, its limit fills bound_value."""

    if report.columns == DOMINATION_COLUMNS:
        return [{"audit": report.name, **row} for row in report.rows]
    return [
        {
            "audit": report.name,
            "model": row["model"],
            "statistic": row["statistic"],
            "bound": row["check"],
            "side": "",
            "t": None,
            "bound_value": row["limit"],
            "empirical": row["value"],
            "halfwidth": 0.0,
            "pass": row["pass"],
        }
        for row in report.rows
    ]


def verify_model(
    model: ModelSpec,
    kind: str,
    t_grid: Sequence[float] | np.ndarray,
    n_samples: int,
    seed: int,
    jobs: int = 1,
) -> Report:
    """Run every applicable audit on one model; each audit draws from its own child stream."""

    children = np.random.SeedSequence(seed).spawn(4)
    seeds = [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]
    reports = [
        audit_mean(model, kind, n_samples, seeds[0], jobs),
        audit_coupling(model, kind, n_samples, seeds[1], jobs),
        audit_domination(model, kind, t_grid, n_samples, seeds[2], jobs),
    ]
    if model.variant in ("er_graph", "multinomial", "hypergeometric"):
        reports.append(audit_chain(model, kind, min(n_samples, 10**4), seeds[3]))
    rows = [row for report in reports for row in _matrix_rows(report)]
    failures = tuple(failure for report in reports for failure in report.failures)
    logger.info("verify %s %s: %d rows, %s", model.variant, kind, len(rows), "passed" if not failures else f"{len(failures)} failure(s)")
    return Report(
        name="verify",
        columns=VERIFY_COLUMNS,
        rows=rows,
        metadata={"seed": int(seed), "n_samples": int(n_samples), **{f"{r.name}": r.metadata for r in reports}},
        failures=failures,
    )
