"""Configuration sampling, statistics and size-bias coupled pairs."""

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
import logging
import threading

import numpy as np

from .couplings import MonotoneChain, ThresholdLift, ne_perturbation
from .geometry import (
    QuadratureGrid,
    band_edges,
    band_index,
    band_midpoints,
    covered_segments_1d,
    pairwise_torus_distance,
    sample_inside,
    sample_outside,
)
from .lattice import LatticePmf, sample_value
from .model import (
    NEIGHBOR_RADIUS,
    Reduction,
    check_statistic,
    component_means,
    location_indicator_means,
    location_probabilities,
    marginal_pmf,
    pb_with_fixed,
    reduce_statistic,
)
from .params import (
    ErGraphParams,
    GermGrainParams,
    HypergeometricParams,
    ModelSpec,
    MultinomialParams,
)

logger = logging.getLogger(__name__)

DEFAULT_CHUNKS = 16
REJECTION_CAP = 10**6


@dataclass(frozen=True, slots=True)
class Configuration:
    """Raw randomness of one model draw; only the field of the model's variant is set."""

    variant: str
    edges: np.ndarray | None = None
    locations: np.ndarray | None = None
    sample: np.ndarray | None = None
    points: np.ndarray | None = None


@dataclass(frozen=True, slots=True)
class CoupledSample:
    """(Y, Y^s) of the reduced statistic; add offset for the full values.

    alpha is the size-biased component, or -1 for gg_volume where location holds the point.
    """

    y: float
    y_s: float
    alpha: int
    statistic: str
    offset: float = 0.0
    location: tuple[float, ...] | None = None


@dataclass(frozen=True, slots=True)
class PairBatch:
    y: np.ndarray
    y_s: np.ndarray
    alpha: np.ndarray
    statistic: str
    offset: float


def _generator(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _colors(payload: HypergeometricParams) -> np.ndarray:
    return np.repeat(np.arange(len(payload.counts)), payload.counts)


@lru_cache(maxsize=8)
def _grid_nodes(side: float, p: int, points_per_axis: int) -> np.ndarray:
    nodes = QuadratureGrid(side, p, points_per_axis).points()
    nodes.setflags(write=False)
    return nodes


def sample_configuration(model: ModelSpec, seed: int | np.random.Generator | None = None) -> Configuration:
    rng = _generator(seed)
    payload = model.payload
    if isinstance(payload, ErGraphParams):
        m = payload.edge_probs.shape[0]
        upper = np.triu(rng.random((m, m)) < payload.edge_probs, k=1)
        return Configuration(model.variant, edges=upper | upper.T)
    if isinstance(payload, MultinomialParams):
        cdf = np.cumsum(payload.placement, axis=0)
        draws = rng.random(payload.placement.shape[1])
        urns = np.minimum((draws[None, :] >= cdf).sum(axis=0), payload.placement.shape[0] - 1)
        return Configuration(model.variant, locations=urns)
    if isinstance(payload, HypergeometricParams):
        chosen = rng.choice(int(payload.counts.sum()), size=int(payload.sample_size), replace=False)
        return Configuration(model.variant, sample=np.sort(chosen))
    points = np.vstack([density.sample(rng, 1) for density in payload.densities])
    return Configuration(model.variant, points=points)


def neighbor_counts(points: np.ndarray, side: float) -> np.ndarray:
    """Number of other unit balls meeting each unit ball."""

    adjacent = pairwise_torus_distance(points, points, side) <= NEIGHBOR_RADIUS
    np.fill_diagonal(adjacent, False)
    return adjacent.sum(axis=1)


def occupancy_counts(model: ModelSpec, config: Configuration) -> np.ndarray:
    payload = model.payload
    if isinstance(payload, ErGraphParams):
        return config.edges.sum(axis=1)
    if isinstance(payload, MultinomialParams):
        return np.bincount(config.locations, minlength=payload.placement.shape[0])
    if isinstance(payload, HypergeometricParams):
        return np.bincount(_colors(payload)[config.sample], minlength=len(payload.counts))
    if model.variant == "gg_neighbors":
        return neighbor_counts(config.points, payload.side)
    raise ValueError("gg_volume counts are indexed by location, not by component")


def _indicator_sum(model: ModelSpec, counts: np.ndarray, kind: str, components: np.ndarray) -> float:
    d = model.thresholds[components]
    hits = counts[components] >= d if kind == "ge" else counts[components] != d
    return float(np.dot(model.weights[components], hits))


def volume_statistic(model: ModelSpec, points: np.ndarray, kind: str) -> float:
    """Weighted volume of points covered by at least (ge) or other than (ne) d(x) balls."""

    payload = model.payload
    if payload.dimension == 1:
        lengths, depths, bands = covered_segments_1d(points[:, 0], payload.radii, payload.side, payload.breaks)
        d = model.thresholds[bands]
        hits = depths >= d if kind == "ge" else depths != d
        return float(np.sum(lengths * model.weights[bands] * hits))
    grid = payload.grid
    nodes = _grid_nodes(grid.side, grid.p, grid.points_per_axis)
    depths = (pairwise_torus_distance(nodes, points, payload.side) <= payload.radii[None, :]).sum(axis=1)
    bands = band_index(payload.breaks, nodes[:, 0])
    d = model.thresholds[bands]
    hits = depths >= d if kind == "ge" else depths != d
    return float(np.sum(model.weights[bands] * hits) * grid.cell_volume)


def statistic(model: ModelSpec, config: Configuration, kind: str, reduction: Reduction | None = None) -> float:
    """Y_ge or Y_ne of a configuration; with a reduction, only its active components are summed."""

    check_statistic(kind)
    if model.variant == "gg_volume":
        return volume_statistic(model, config.points, kind)
    components = np.arange(model.n_components) if reduction is None else reduction.active
    return _indicator_sum(model, occupancy_counts(model, config), kind, components)


def _exchangeable_path(m: int, lower: int, upper: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Equal success probabilities: a uniform lower-subset, then one uniform absent coordinate per level."""

    order = rng.permutation(m)
    path = []
    for level in range(lower, upper + 1):
        state = np.zeros(m, dtype=np.int8)
        state[order[:level]] = 1
        path.append(state)
    return path


class ChainCache:
    """Thread-safe cache of solved monotone chains keyed by the success-probability vector."""

    def __init__(self, limit: int) -> None:
        self.limit = limit
        self._chains: dict[bytes, MonotoneChain] = {}
        self._lock = threading.Lock()

    def get(self, p: np.ndarray) -> MonotoneChain:
        key = np.asarray(p, dtype=float).tobytes()
        with self._lock:
            chain = self._chains.get(key)
        if chain is None:
            chain = MonotoneChain(p, self.limit)
            with self._lock:
                self._chains.setdefault(key, chain)
        return chain


class SizeBiasSampler:
    """Generic size-bias engine: draw the index, the base level, the lift, then the configuration pair."""

    def __init__(self, model: ModelSpec, kind: str, chains: ChainCache | None = None) -> None:
        check_statistic(kind)
        self.model = model
        self.kind = kind
        self.reduction = reduce_statistic(model, kind)
        if self.reduction.active.size == 0:
            raise ValueError(f"{model.variant} {kind} statistic is constant after reduction")
        self.chains = chains if chains is not None else ChainCache(model.chain_exact_limit)
        self._movers: dict[tuple, ThresholdLift | object] = {}
        payload = model.payload
        if model.variant == "gg_volume":
            self._prepare_volume(payload)
        else:
            means = component_means(model, kind)[self.reduction.active]
            weights = model.weights[self.reduction.active] * means
            if weights.sum() <= 0.0:
                raise ValueError("statistic has zero mean")
            self.index_probs = weights / weights.sum()
            if model.variant == "gg_neighbors":
                self._prepare_neighbors(payload)
            else:
                for alpha in self.reduction.active:
                    self._mover(marginal_pmf(model, int(alpha)), int(model.thresholds[alpha]))

    # levels

    def _mover(self, pmf: LatticePmf, d: int):
        key = (pmf.lo, pmf.probs.tobytes(), d)
        mover = self._movers.get(key)
        if mover is None:
            mover = ThresholdLift(pmf, d) if self.kind == "ge" else ne_perturbation(pmf, d)
            self._movers[key] = mover
        return mover

    def _levels(self, pmf: LatticePmf, d: int, rng: np.random.Generator) -> tuple[int, int]:
        """(N, N + A) with N ~ pmf and N + A ~ L(M | M >= d) or L(M | M != d)."""

        n = sample_value(pmf, rng)
        if (self.kind == "ge" and d <= pmf.lo) or (self.kind == "ne" and not pmf.contains(d)):
            # the conditioning event is sure at this location
            return n, n
        mover = self._mover(pmf, d)
        shift = mover.lift(n, rng) if self.kind == "ge" else mover.shift(n, rng)
        return n, n + shift

    def _indicator_path(self, p: np.ndarray, lower: int, upper: int, rng: np.random.Generator) -> list[np.ndarray]:
        """Coupled indicator vectors at totals lower, ..., upper; surely-one entries stay on."""

        probs = np.asarray(p, dtype=float)
        ones = probs >= 1.0
        free = (probs > 0.0) & (probs < 1.0)
        fixed = int(ones.sum())
        base = ones.astype(np.int8)
        if not np.any(free):
            return [base.copy() for _ in range(lower, upper + 1)]
        if np.ptp(probs[free]) == 0.0:
            states = _exchangeable_path(int(free.sum()), lower - fixed, upper - fixed, rng)
        else:
            states = self.chains.get(probs[free]).sample_path(lower - fixed, upper - fixed, rng)
        path = []
        for state in states:
            vector = base.copy()
            vector[free] = state
            path.append(vector)
        return path

    def _pair(self, p: np.ndarray, n: int, lifted: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
        lower, upper = min(n, lifted), max(n, lifted)
        path = self._indicator_path(p, lower, upper, rng)
        if lifted >= n:
            return path[0], path[-1], path
        return path[-1], path[0], path

    # per-variant constructions

    def _draw_alpha(self, rng: np.random.Generator) -> int:
        position = int(np.searchsorted(np.cumsum(self.index_probs), rng.random(), side="right"))
        return int(self.reduction.active[min(position, len(self.index_probs) - 1)])

    def _er(self, rng: np.random.Generator) -> tuple[int, list[np.ndarray]]:
        payload: ErGraphParams = self.model.payload
        alpha = self._draw_alpha(rng)
        others = np.delete(np.arange(payload.edge_probs.shape[0]), alpha)
        graph = sample_configuration(self.model, rng).edges.copy()
        pmf = marginal_pmf(self.model, alpha)
        n, lifted = self._levels(pmf, int(self.model.thresholds[alpha]), rng)
        base, lift, path = self._pair(payload.edge_probs[alpha, others], n, lifted, rng)

        def counts_for(x: np.ndarray) -> np.ndarray:
            graph[alpha, others] = x.astype(bool)
            graph[others, alpha] = x.astype(bool)
            return graph.sum(axis=1)

        ordered = [counts_for(x) for x in (base, lift)]
        return alpha, ordered + [counts_for(x) for x in path]

    def _multinomial(self, rng: np.random.Generator) -> tuple[int, list[np.ndarray]]:
        payload: MultinomialParams = self.model.payload
        placement = payload.placement
        urns, balls = placement.shape
        alpha = self._draw_alpha(rng)
        # destination of every ball given that it avoids urn alpha
        elsewhere = np.delete(placement, alpha, axis=0) / (1.0 - placement[alpha])[None, :]
        cdf = np.cumsum(elsewhere, axis=0)
        picks = np.minimum((rng.random(balls)[None, :] >= cdf).sum(axis=0), urns - 2)
        destinations = np.delete(np.arange(urns), alpha)[picks]
        pmf = marginal_pmf(self.model, alpha)
        n, lifted = self._levels(pmf, int(self.model.thresholds[alpha]), rng)
        base, lift, path = self._pair(placement[alpha], n, lifted, rng)

        def counts_for(x: np.ndarray) -> np.ndarray:
            return np.bincount(np.where(x.astype(bool), alpha, destinations), minlength=urns)

        return alpha, [counts_for(base), counts_for(lift)] + [counts_for(x) for x in path]

    def _hypergeometric(self, rng: np.random.Generator) -> tuple[int, list[np.ndarray]]:
        payload: HypergeometricParams = self.model.payload
        colors = _colors(payload)
        alpha = self._draw_alpha(rng)
        pmf = marginal_pmf(self.model, alpha)
        n, lifted = self._levels(pmf, int(self.model.thresholds[alpha]), rng)
        lower, upper = min(n, lifted), max(n, lifted)

        own = np.flatnonzero(colors == alpha)
        foreign = np.flatnonzero(colors != alpha)
        chosen_own = list(rng.permutation(own)[:lower])
        chosen_foreign = list(rng.permutation(foreign)[: int(payload.sample_size) - lower])
        taken = set(chosen_own)
        unused_own = [label for label in own if label not in taken]
        counts_path = []
        minlength = len(payload.counts)
        counts_path.append(np.bincount(colors[chosen_own + chosen_foreign], minlength=minlength))
        for _ in range(lower, upper):
            # swap a uniform sampled foreign ball for a uniform unsampled ball of color alpha
            chosen_foreign.pop(int(rng.integers(len(chosen_foreign))))
            chosen_own.append(unused_own.pop(int(rng.integers(len(unused_own)))))
            counts_path.append(np.bincount(colors[chosen_own + chosen_foreign], minlength=minlength))
        base, lift = (counts_path[0], counts_path[-1]) if lifted >= n else (counts_path[-1], counts_path[0])
        return alpha, [base, lift] + counts_path

    def _prepare_volume(self, payload: GermGrainParams) -> None:
        side = payload.side
        edges = band_edges(payload.breaks, side)
        mass = self.model.weights * np.diff(edges)
        self._band_probs = mass / mass.sum()
        self._band_edges = edges
        probes = np.vstack(
            [_grid_nodes(side, payload.dimension, payload.points_per_axis), band_midpoints(payload.breaks, side, payload.dimension)]
        )
        self._sup = float(location_indicator_means(self.model, probes, self.kind).max())
        if self._sup <= 0.0:
            raise ValueError("statistic has zero mean")

    def _volume_location(self, rng: np.random.Generator) -> np.ndarray:
        payload: GermGrainParams = self.model.payload
        for _ in range(REJECTION_CAP):
            band = int(np.searchsorted(np.cumsum(self._band_probs), rng.random(), side="right"))
            band = min(band, len(self._band_probs) - 1)
            u = rng.random(payload.dimension) * payload.side
            u[0] = self._band_edges[band] + rng.random() * (self._band_edges[band + 1] - self._band_edges[band])
            accept = float(location_indicator_means(self.model, u[None, :], self.kind)[0]) / self._sup
            if accept > 1.0:
                logger.warning("indicator mean at a sampled location exceeds the grid-scan supremum by %.3g", accept - 1.0)
            if rng.random() < accept:
                return u
        raise RuntimeError(f"location rejection sampler hit the cap of {REJECTION_CAP}")

    def _positions(
        self,
        centre: np.ndarray,
        radius_of: Callable[[int], float],
        indices: np.ndarray,
        states: list[np.ndarray],
        rng: np.random.Generator,
    ) -> dict[int, tuple[np.ndarray | None, np.ndarray | None]]:
        """Inside and outside draws for each index, shared by every configuration of the pair."""

        payload: GermGrainParams = self.model.payload
        stacked = np.vstack(states)
        out: dict[int, tuple[np.ndarray | None, np.ndarray | None]] = {}
        for column, index in enumerate(indices):
            density = payload.densities[int(index)]
            radius = radius_of(int(index))
            inside = sample_inside(density, centre, radius, rng) if np.any(stacked[:, column] == 1) else None
            outside = sample_outside(density, centre, radius, rng) if np.any(stacked[:, column] == 0) else None
            out[int(index)] = (inside, outside)
        return out

    def _volume(self, rng: np.random.Generator) -> tuple[np.ndarray, float, float]:
        payload: GermGrainParams = self.model.payload
        u = self._volume_location(rng)
        probs = location_probabilities(self.model, u[None, :])[0]
        d = int(self.model.thresholds[band_index(payload.breaks, u[:1])[0]])
        n, lifted = self._levels(pb_with_fixed(probs), d, rng)
        base, lift, _ = self._pair(probs, n, lifted, rng)
        indices = np.arange(len(payload.radii))
        draws = self._positions(u, lambda j: float(payload.radii[j]), indices, [base, lift], rng)

        def points_for(x: np.ndarray) -> np.ndarray:
            return np.vstack([draws[int(j)][0] if x[j] else draws[int(j)][1] for j in indices])

        y = volume_statistic(self.model, points_for(base), self.kind)
        y_s = volume_statistic(self.model, points_for(lift), self.kind)
        return u, y, y_s

    def _prepare_neighbors(self, payload: GermGrainParams) -> None:
        nodes = _grid_nodes(payload.side, payload.dimension, payload.points_per_axis)
        self._neighbor_sup = {
            int(alpha): float(location_indicator_means(self.model, nodes, self.kind, int(alpha)).max())
            for alpha in self.reduction.active
        }

    def _neighbor_location(self, alpha: int, rng: np.random.Generator) -> np.ndarray:
        payload: GermGrainParams = self.model.payload
        density = payload.densities[alpha]
        sup = self._neighbor_sup[alpha]
        for _ in range(REJECTION_CAP):
            u = density.sample(rng, 1)[0]
            accept = float(location_indicator_means(self.model, u[None, :], self.kind, alpha)[0]) / sup
            if accept > 1.0:
                logger.warning("indicator mean at a sampled location exceeds the grid-scan supremum by %.3g", accept - 1.0)
            if rng.random() < accept:
                return u
        raise RuntimeError(f"location rejection sampler hit the cap of {REJECTION_CAP}")

    def _neighbors(self, rng: np.random.Generator) -> tuple[int, list[np.ndarray]]:
        payload: GermGrainParams = self.model.payload
        alpha = self._draw_alpha(rng)
        u = self._neighbor_location(alpha, rng)
        others = np.delete(np.arange(len(payload.radii)), alpha)
        probs = location_probabilities(self.model, u[None, :], alpha)[0]
        n, lifted = self._levels(pb_with_fixed(probs), int(self.model.thresholds[alpha]), rng)
        base, lift, _ = self._pair(probs, n, lifted, rng)
        draws = self._positions(u, lambda j: NEIGHBOR_RADIUS, others, [base, lift], rng)

        def counts_for(x: np.ndarray) -> np.ndarray:
            points = np.empty((len(payload.radii), payload.dimension))
            points[alpha] = u
            for column, beta in enumerate(others):
                inside, outside = draws[int(beta)]
                points[beta] = inside if x[column] else outside
            return neighbor_counts(points, payload.side)

        return alpha, [counts_for(base), counts_for(lift)]

    def count_path(self, rng: np.random.Generator) -> tuple[int, list[np.ndarray]]:
        """Index and occupancy counts at every level between N and N + A, lower level first."""

        if self.model.variant == "er_graph":
            alpha, counts = self._er(rng)
        elif self.model.variant == "multinomial":
            alpha, counts = self._multinomial(rng)
        elif self.model.variant == "hypergeometric":
            alpha, counts = self._hypergeometric(rng)
        else:
            raise ValueError("count paths are recorded for er_graph, multinomial and hypergeometric models")
        return alpha, counts[2:]

    def sample(self, rng: np.random.Generator) -> CoupledSample:
        variant = self.model.variant
        if variant == "gg_volume":
            u, y, y_s = self._volume(rng)
            return CoupledSample(y, y_s, -1, self.kind, 0.0, tuple(float(c) for c in u))
        if variant == "er_graph":
            alpha, counts = self._er(rng)
        elif variant == "multinomial":
            alpha, counts = self._multinomial(rng)
        elif variant == "hypergeometric":
            alpha, counts = self._hypergeometric(rng)
        else:
            alpha, counts = self._neighbors(rng)
        active = self.reduction.active
        y = _indicator_sum(self.model, counts[0], self.kind, active)
        y_s = _indicator_sum(self.model, counts[1], self.kind, active)
        return CoupledSample(y, y_s, alpha, self.kind, self.reduction.offset)


def sample_size_bias_pair(model: ModelSpec, kind: str, seed: int | np.random.Generator | None = None) -> CoupledSample:
    return SizeBiasSampler(model, kind).sample(_generator(seed))


def _chunk_streams(n: int, seed: int | None, chunks: int = DEFAULT_CHUNKS) -> list[tuple[int, np.random.Generator]]:
    """Fixed split of n draws over independent child streams; independent of the worker count."""

    count = max(1, min(chunks, n))
    sizes = [len(part) for part in np.array_split(np.arange(n), count)]
    children = np.random.SeedSequence(seed).spawn(count)
    return [(size, np.random.default_rng(child)) for size, child in zip(sizes, children)]


def _run_chunks(tasks: list[Callable[[], object]], jobs: int) -> list[object]:
    if jobs <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda task: task(), tasks))


def sample_statistics(
    model: ModelSpec,
    kind: str,
    n_samples: int,
    seed: int | None,
    jobs: int = 1,
    reduction: Reduction | None = None,
) -> np.ndarray:
    """n_samples draws of the statistic (full, or reduced when a reduction is given)."""

    check_statistic(kind)
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")

    def make(size: int, rng: np.random.Generator) -> Callable[[], np.ndarray]:
        return lambda: np.array(
            [statistic(model, sample_configuration(model, rng), kind, reduction) for _ in range(size)], dtype=float
        )

    parts = _run_chunks([make(size, rng) for size, rng in _chunk_streams(n_samples, seed)], jobs)
    return np.concatenate(parts) if parts else np.zeros(0)


def sample_pairs(model: ModelSpec, kind: str, n_samples: int, seed: int | None, jobs: int = 1) -> PairBatch:
    check_statistic(kind)
    if n_samples < 0:
        raise ValueError("n_samples must be >= 0")
    chains = ChainCache(model.chain_exact_limit)
    reference = SizeBiasSampler(model, kind, chains)
    logger.info("sampling %d %s %s size-bias pairs", n_samples, model.variant, kind)

    def make(size: int, rng: np.random.Generator) -> Callable[[], list[CoupledSample]]:
        def run() -> list[CoupledSample]:
            sampler = SizeBiasSampler(model, kind, chains)
            return [sampler.sample(rng) for _ in range(size)]

        return run

    parts = _run_chunks([make(size, rng) for size, rng in _chunk_streams(n_samples, seed)], jobs)
    samples = [sample for part in parts for sample in part]
    return PairBatch(
        y=np.array([s.y for s in samples], dtype=float),
        y_s=np.array([s.y_s for s in samples], dtype=float),
        alpha=np.array([s.alpha for s in samples], dtype=np.int64),
        statistic=kind,
        offset=reference.reduction.offset,
    )
