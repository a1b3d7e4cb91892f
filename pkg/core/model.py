"""Marginal laws, means and coupling constants of the occupancy models."""

from dataclasses import dataclass
import logging
import math

import numpy as np

from .geometry import KISSING_TABLE, band_edges, band_index, ball_probability, unit_ball_volume
from .lattice import LatticePmf, hypergeometric_pmf, pb_pmf, point_mass, prob_ne, tail_ge
from .params import (
    GERM_GRAIN,
    ErGraphParams,
    GermGrainParams,
    HypergeometricParams,
    ModelSpec,
    MultinomialParams,
)

logger = logging.getLogger(__name__)

NEIGHBOR_RADIUS = 2.0


@dataclass(frozen=True, slots=True)
class Reduction:
    """Components kept after stripping constant indicators; offset sums the surely-one weights."""

    statistic: str
    active: np.ndarray
    offset: float


@dataclass(frozen=True, slots=True)
class MeanEstimate:
    """Mean of the full statistic with an error estimate (0 for closed forms)."""

    value: float
    error: float


@dataclass(frozen=True, slots=True)
class ComplementDescriptor:
    """Y_complement = offset + sign * Y, whose tails are those of Y swapped."""

    offset: float
    sign: int


@dataclass(frozen=True, slots=True)
class ComparisonParams:
    """Constants for the competing bounds: bounded differences and certifiable functions."""

    mcdiarmid_c: np.ndarray | None
    certifiable: tuple[float, float, float] | None
    negative_association: bool


def check_statistic(kind: str) -> None:
    if kind not in ("ge", "ne"):
        raise ValueError("statistic must be 'ge' or 'ne'")


def pb_with_fixed(p: np.ndarray) -> LatticePmf:
    """Poisson Binomial law allowing components that are surely 0 or surely 1."""

    probabilities = np.asarray(p, dtype=float).reshape(-1)
    ones = int(np.sum(probabilities >= 1.0))
    free = probabilities[(probabilities > 0.0) & (probabilities < 1.0)]
    if free.size == 0:
        return point_mass(ones)
    pmf = pb_pmf(free)
    return LatticePmf(pmf.lo + ones, pmf.probs)


def indicator_mean(pmf: LatticePmf, d: int, kind: str) -> float:
    return tail_ge(pmf, d) if kind == "ge" else prob_ne(pmf, d)


def location_probabilities(model: ModelSpec, points: np.ndarray, alpha: int | None = None) -> np.ndarray:
    """Per-point success probabilities of the covering indicators, shape (len(points), k).

    gg_volume: P(D(x, U_beta) <= rho_beta) for every ball beta.
    gg_neighbors: P(D(x, U_beta) <= 2) for every beta != alpha.
    """

    payload = model.payload
    if not isinstance(payload, GermGrainParams):
        raise ValueError("location probabilities exist only for germ-grain models")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if model.variant == "gg_volume":
        columns = [
            ball_probability(density, pts, float(radius), payload.grid)
            for density, radius in zip(payload.densities, payload.radii)
        ]
    else:
        if alpha is None:
            raise ValueError("gg_neighbors location probabilities need the index alpha")
        columns = [
            ball_probability(density, pts, NEIGHBOR_RADIUS, payload.grid)
            for beta, density in enumerate(payload.densities)
            if beta != alpha
        ]
    return np.stack(columns, axis=-1)


def marginal_pmf(model: ModelSpec, alpha: int) -> LatticePmf:
    payload = model.payload
    if not (0 <= alpha < model.n_components):
        raise ValueError(f"alpha must lie in [0, {model.n_components})")
    if isinstance(payload, ErGraphParams):
        return pb_with_fixed(np.delete(payload.edge_probs[alpha], alpha))
    if isinstance(payload, MultinomialParams):
        return pb_with_fixed(payload.placement[alpha])
    if isinstance(payload, HypergeometricParams):
        return hypergeometric_pmf(int(payload.counts[alpha]), int(payload.sample_size), int(payload.counts.sum()))
    raise ValueError(f"{model.variant} counts depend on location; use marginal_pmf_at")


def marginal_pmf_at(model: ModelSpec, alpha: int | None, u: np.ndarray) -> LatticePmf:
    """Law of the count at location u (gg_volume) or of M_alpha given U_alpha = u (gg_neighbors)."""

    return pb_with_fixed(location_probabilities(model, u, alpha)[0])


def _location_thresholds(model: ModelSpec, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    bands = band_index(model.payload.breaks, points[:, 0])
    return model.weights[bands], model.thresholds[bands]


def location_indicator_means(model: ModelSpec, points: np.ndarray, kind: str, alpha: int | None = None) -> np.ndarray:
    """P(F(u)) at each point: the indicator mean of the count at u."""

    check_statistic(kind)
    payload = model.payload
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if model.variant == "gg_volume":
        _, thresholds = _location_thresholds(model, pts)
    else:
        thresholds = np.full(len(pts), int(model.thresholds[alpha]))
    if payload.all_uniform:
        probs = location_probabilities(model, pts[:1], alpha)[0]
        pmf = pb_with_fixed(probs)
        cache = {int(d): indicator_mean(pmf, int(d), kind) for d in np.unique(thresholds)}
        return np.array([cache[int(d)] for d in thresholds])
    matrix = location_probabilities(model, pts, alpha)
    return np.array([indicator_mean(pb_with_fixed(row), int(d), kind) for row, d in zip(matrix, thresholds)])


def _germ_grain_component_mean(model: ModelSpec, alpha: int, kind: str, payload: GermGrainParams, coarse: bool) -> float:
    grid = payload.grid.coarsened() if coarse else payload.grid
    if payload.all_uniform:
        return float(location_indicator_means(model, np.zeros((1, payload.dimension)), kind, alpha)[0])
    nodes = grid.points()
    density = payload.densities[alpha].pdf(nodes)
    values = location_indicator_means(model, nodes, kind, alpha)
    return float(np.sum(values * density) / np.sum(density))


def component_means(model: ModelSpec, kind: str) -> np.ndarray:
    """E 1(M_alpha >= d_alpha) (ge) or E 1(M_alpha != d_alpha) (ne) for every component."""

    check_statistic(kind)
    payload = model.payload
    if model.variant == "gg_volume":
        raise ValueError("gg_volume has a continuum of components; use mean_estimate")
    if isinstance(payload, GermGrainParams):
        return np.array(
            [_germ_grain_component_mean(model, alpha, kind, payload, False) for alpha in range(model.n_components)]
        )
    return np.array(
        [
            indicator_mean(marginal_pmf(model, alpha), int(model.thresholds[alpha]), kind)
            for alpha in range(model.n_components)
        ]
    )


def reduce_statistic(model: ModelSpec, kind: str) -> Reduction:
    """Strip components whose indicator is constant; surely-one indicators move into the offset."""

    check_statistic(kind)
    if model.variant == "gg_volume":
        return Reduction(kind, np.arange(model.n_components), 0.0)
    active: list[int] = []
    offset = 0.0
    for alpha in range(model.n_components):
        if model.variant == "gg_neighbors":
            lo, hi = 0, model.n_components - 1
            d = int(model.thresholds[alpha])
            surely_one = d <= lo if kind == "ge" else d > hi
            surely_zero = d > hi if kind == "ge" else False
        else:
            pmf = marginal_pmf(model, alpha)
            d = int(model.thresholds[alpha])
            mean = indicator_mean(pmf, d, kind)
            if kind == "ge":
                surely_one, surely_zero = d <= pmf.lo, d > pmf.hi
            else:
                surely_one, surely_zero = not pmf.contains(d), mean <= 0.0
        if surely_one:
            offset += float(model.weights[alpha])
        elif not surely_zero:
            active.append(alpha)
    logger.debug("%s %s reduction: %d active of %d, offset %g", model.variant, kind, len(active), model.n_components, offset)
    return Reduction(kind, np.asarray(active, dtype=np.int64), offset)


def _volume_quadrature_mean(model: ModelSpec, kind: str, coarse: bool) -> float:
    payload = model.payload
    grid = payload.grid.coarsened() if coarse else payload.grid
    nodes = grid.points()
    weights, _ = _location_thresholds(model, nodes)
    values = location_indicator_means(model, nodes, kind)
    return float(np.sum(weights * values) * grid.cell_volume)


def _volume_band_mean(model: ModelSpec, kind: str) -> float:
    """Exact integral for uniform germs: the indicator mean is constant on each band."""

    payload = model.payload
    side = payload.side
    lengths = np.diff(band_edges(payload.breaks, side))
    cross_section = side ** (payload.dimension - 1)
    probs = location_probabilities(model, np.zeros((1, payload.dimension)))[0]
    pmf = pb_with_fixed(probs)
    return float(
        sum(
            float(w) * length * cross_section * indicator_mean(pmf, int(d), kind)
            for w, d, length in zip(model.weights, model.thresholds, lengths)
        )
    )


def mean_estimate(model: ModelSpec, kind: str) -> MeanEstimate:
    check_statistic(kind)
    payload = model.payload
    if model.variant == "gg_volume":
        exact_sweep = payload.dimension == 1
        if payload.all_uniform:
            band_mean = _volume_band_mean(model, kind)
            if exact_sweep:
                return MeanEstimate(band_mean, 0.0)
            # the statistic is evaluated on the quadrature grid, so its mean is the grid sum
            value = _volume_quadrature_mean(model, kind, False)
            return MeanEstimate(value, abs(value - band_mean))
        value = _volume_quadrature_mean(model, kind, False)
        return MeanEstimate(value, abs(value - _volume_quadrature_mean(model, kind, True)))
    means = component_means(model, kind)
    value = float(np.dot(model.weights, means))
    if model.variant == "gg_neighbors" and not payload.all_uniform:
        coarse = np.array(
            [_germ_grain_component_mean(model, alpha, kind, payload, True) for alpha in range(model.n_components)]
        )
        return MeanEstimate(value, abs(value - float(np.dot(model.weights, coarse))))
    return MeanEstimate(value, 0.0)


def mean_ge(model: ModelSpec) -> float:
    return mean_estimate(model, "ge").value


def mean_ne(model: ModelSpec) -> float:
    return mean_estimate(model, "ne").value


def sigma_d(d_vec: np.ndarray | list[int], kappa1: int) -> int:
    """Sum of the kappa1 largest thresholds."""

    if kappa1 < 1:
        raise ValueError("kappa1 must be >= 1")
    ordered = sorted((int(d) for d in d_vec), reverse=True)
    return int(sum(ordered[:kappa1]))


def kissing_constant(payload: GermGrainParams) -> int:
    if payload.kappa1 is not None:
        return int(payload.kappa1)
    if payload.dimension not in KISSING_TABLE:
        raise ValueError(f"kappa1 is tabulated for dimensions 1-3 only; supply params.kappa1 for p={payload.dimension}")
    return KISSING_TABLE[payload.dimension]


def coupling_constant(model: ModelSpec, kind: str) -> float:
    """Nominal coupling constant c of each model, Y^s <= Y + c.

    For gg_volume this is the nominal pi_p |w| |d| rho^p (ge) and pi_p |w| rho^p (ne); the
    sampled couplings do not obey it. Use effective_coupling_constant for a sure bound.
    """

    check_statistic(kind)
    w, d = model.abs_w, model.abs_d
    payload = model.payload
    if model.variant == "er_graph":
        return w * (d + 1) if kind == "ge" else 2.0 * w
    if model.variant in ("multinomial", "hypergeometric"):
        return w if kind == "ge" else 2.0 * w
    if model.variant == "gg_volume":
        volume = unit_ball_volume(payload.dimension) * w * float(payload.radii.max()) ** payload.dimension
        return volume * d if kind == "ge" else volume
    kappa1 = kissing_constant(payload)
    sigma = sigma_d(model.thresholds, kappa1)
    if kind == "ge":
        return w * d * (sigma + 1)
    return w * (sigma + sigma_d(model.thresholds + 1, kappa1) + 1)


def effective_coupling_constant(model: ModelSpec, kind: str) -> float:
    """Constant the sampled couplings obey surely.

    For gg_volume in dimension >= 2 the statistic is a cell-centre sum, so a ball covers at most
    the cells within radius + h sqrt(p) / 2. For the != volume statistic a moved ball changes
    coverage on both its old and its new ball.
    """

    check_statistic(kind)
    if model.variant != "gg_volume":
        return coupling_constant(model, kind)
    payload = model.payload
    radius = float(payload.radii.max())
    if payload.dimension >= 2:
        radius += payload.grid.spacing * math.sqrt(payload.dimension) / 2.0
    volume = unit_ball_volume(payload.dimension) * model.abs_w * radius**payload.dimension
    return volume * model.abs_d if kind == "ge" else 2.0 * volume


def total_weight(model: ModelSpec) -> float:
    if model.variant == "gg_volume":
        payload = model.payload
        lengths = np.diff(band_edges(payload.breaks, payload.side))
        return float(np.dot(model.weights, lengths) * payload.side ** (payload.dimension - 1))
    return float(model.weights.sum())


def complement_statistic(model: ModelSpec, kind: str) -> ComplementDescriptor:
    """sum(w) - Y: bounds for it follow from those for Y with the tails swapped."""

    check_statistic(kind)
    return ComplementDescriptor(offset=total_weight(model), sign=-1)


def comparison_parameters(model: ModelSpec, kind: str) -> ComparisonParams:
    check_statistic(kind)
    w = model.abs_w
    unit = bool(np.all(model.weights == 1.0))
    payload = model.payload
    if isinstance(payload, ErGraphParams):
        m = payload.edge_probs.shape[0]
        mcdiarmid = np.full(m * (m - 1) // 2, 2.0 * w)
        certifiable = (2.0, float(model.abs_d), 0.0) if unit and kind == "ge" else None
        return ComparisonParams(mcdiarmid, certifiable, False)
    if isinstance(payload, MultinomialParams):
        n = payload.placement.shape[1]
        if kind == "ge":
            return ComparisonParams(np.full(n, w), (1.0, float(model.abs_d), 0.0) if unit else None, True)
        return ComparisonParams(np.full(n, 2.0 * w), (2.0, 0.0, float(n)) if unit else None, False)
    if isinstance(payload, HypergeometricParams):
        return ComparisonParams(None, None, kind == "ge")
    return ComparisonParams(None, None, False)


def is_germ_grain(model: ModelSpec) -> bool:
    return model.variant in GERM_GRAIN
