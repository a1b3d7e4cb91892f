"""Torus geometry, germ densities and quadrature for the germ-grain models."""

from dataclasses import dataclass
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

# maximum number of pairwise disjoint unit balls that all meet a central unit ball
KISSING_TABLE: dict[int, int] = {1: 2, 2: 5, 3: 12}

REJECTION_CAP = 10**6


def unit_ball_volume(p: int) -> float:
    """Volume pi_p of the unit ball in R^p."""

    return math.pi ** (p / 2.0) / math.gamma(p / 2.0 + 1.0)


def torus_side(volume: float, p: int) -> float:
    return float(volume) ** (1.0 / p)


def torus_displacement(x: np.ndarray, y: np.ndarray, side: float) -> np.ndarray:
    """Coordinatewise wrapped distance min(|dx|, side - |dx|)."""

    delta = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) % side
    return np.minimum(delta, side - delta)


def torus_distance(x: np.ndarray, y: np.ndarray, side: float) -> np.ndarray:
    return np.sqrt(np.sum(torus_displacement(x, y, side) ** 2, axis=-1))


def pairwise_torus_distance(points: np.ndarray, others: np.ndarray, side: float) -> np.ndarray:
    """Distance matrix of shape (len(points), len(others))."""

    return torus_distance(points[:, None, :], others[None, :, :], side)


def sample_in_ball(rng: np.random.Generator, center: np.ndarray, radius: float, side: float) -> np.ndarray:
    """Uniform point in the ball of the given radius around center, wrapped onto the torus."""

    p = len(center)
    direction = rng.standard_normal(p)
    direction /= np.linalg.norm(direction)
    distance = radius * rng.random() ** (1.0 / p)
    return (np.asarray(center, dtype=float) + distance * direction) % side


@dataclass(frozen=True, slots=True)
class UniformDensity:
    side: float
    p: int

    @property
    def sup(self) -> float:
        return 1.0 / self.side**self.p

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(x).shape[:-1], self.sup)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random((size, self.p)) * self.side


@dataclass(frozen=True, slots=True)
class HistogramDensity:
    """Piecewise-constant density on a regular k^p cell grid; masses sum to 1."""

    side: float
    p: int
    masses: np.ndarray

    def __post_init__(self) -> None:
        masses = np.array(self.masses, dtype=float, copy=True)
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        errors: list[str] = []
        if masses.ndim != self.p or len(set(masses.shape)) != 1:
            errors.append(f"histogram must be a cube array with {self.p} axes")
        if np.any(masses < 0.0) or not np.all(np.isfinite(masses)):
            errors.append("histogram masses must be finite and >= 0")
        elif abs(float(masses.sum()) - 1.0) > 1e-9:
            errors.append("histogram masses must sum to 1")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def cells_per_axis(self) -> int:
        return int(self.masses.shape[0])

    @property
    def cell(self) -> float:
        return self.side / self.cells_per_axis

    @property
    def sup(self) -> float:
        return float(self.masses.max()) / self.cell**self.p

    def pdf(self, x: np.ndarray) -> np.ndarray:
        points = np.asarray(x, dtype=float)
        index = np.clip(np.floor((points % self.side) / self.cell).astype(int), 0, self.cells_per_axis - 1)
        return self.masses[tuple(np.moveaxis(index, -1, 0))] / self.cell**self.p

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        flat = rng.choice(self.masses.size, size=size, p=self.masses.reshape(-1))
        corner = np.stack(np.unravel_index(flat, self.masses.shape), axis=-1).astype(float) * self.cell
        return corner + rng.random((size, self.p)) * self.cell

    def cdf_1d(self, x: np.ndarray) -> np.ndarray:
        """Cumulative mass on [0, x] extended periodically (one axis only)."""

        points = np.asarray(x, dtype=float)
        laps = np.floor(points / self.side)
        local = points - laps * self.side
        cumulative = np.concatenate([[0.0], np.cumsum(self.masses)])
        position = local / self.cell
        index = np.clip(np.floor(position).astype(int), 0, self.cells_per_axis - 1)
        partial = cumulative[index] + (position - index) * self.masses[index]
        return laps + partial


Density = UniformDensity | HistogramDensity


@dataclass(frozen=True, slots=True)
class QuadratureGrid:
    """Cell-centre rule on the torus with points_per_axis^p cells."""

    side: float
    p: int
    points_per_axis: int

    @property
    def spacing(self) -> float:
        return self.side / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.p

    def points(self) -> np.ndarray:
        axis = (np.arange(self.points_per_axis) + 0.5) * self.spacing
        mesh = np.meshgrid(*([axis] * self.p), indexing="ij")
        return np.stack([coord.reshape(-1) for coord in mesh], axis=-1)

    def coarsened(self) -> "QuadratureGrid":
        return QuadratureGrid(self.side, self.p, max(1, self.points_per_axis // 2))


def ball_probability(
    density: Density,
    x: np.ndarray,
    radius: float,
    grid: QuadratureGrid | None = None,
) -> np.ndarray:
    """P(D(x, U) <= radius) for U with the given density, at each point of x."""

    points = np.atleast_2d(np.asarray(x, dtype=float))
    if isinstance(density, UniformDensity):
        value = unit_ball_volume(density.p) * radius**density.p * density.sup
        return np.full(len(points), min(1.0, value))
    if density.p == 1:
        coord = points[:, 0]
        value = density.cdf_1d(coord + radius) - density.cdf_1d(coord - radius)
        return np.clip(value, 0.0, 1.0)
    if grid is None:
        raise ValueError("a quadrature grid is required for histogram densities in dimension >= 2")
    nodes = grid.points()
    weights = density.pdf(nodes) * grid.cell_volume
    out = np.empty(len(points))
    for start in range(0, len(points), 256):
        block = points[start : start + 256]
        inside = pairwise_torus_distance(block, nodes, density.side) <= radius
        out[start : start + len(block)] = inside @ weights
    return np.clip(out, 0.0, 1.0)


def sample_inside(
    density: Density,
    center: np.ndarray,
    radius: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw from the density restricted to the closed ball around center."""

    if isinstance(density, UniformDensity):
        return sample_in_ball(rng, center, radius, density.side)
    for _ in range(REJECTION_CAP):
        proposal = sample_in_ball(rng, center, radius, density.side)
        if rng.random() * density.sup < float(density.pdf(proposal)):
            return proposal
    raise RuntimeError(f"rejection sampler inside a ball of radius {radius} hit the cap of {REJECTION_CAP}")


def sample_outside(
    density: Density,
    center: np.ndarray,
    radius: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw from the density restricted to the complement of the closed ball around center."""

    for _ in range(REJECTION_CAP):
        proposal = density.sample(rng, 1)[0]
        if float(torus_distance(proposal, center, density.side)) > radius:
            return proposal
    raise RuntimeError(f"rejection sampler outside a ball of radius {radius} hit the cap of {REJECTION_CAP}")


def band_edges(breaks: np.ndarray, side: float) -> np.ndarray:
    return np.concatenate([[0.0], np.asarray(breaks, dtype=float), [side]])


def band_index(breaks: np.ndarray, first_coord: np.ndarray) -> np.ndarray:
    """Band of each point along the first axis; bands are [edge_k, edge_{k+1})."""

    return np.searchsorted(np.asarray(breaks, dtype=float), first_coord, side="right")


def band_midpoints(breaks: np.ndarray, side: float, p: int) -> np.ndarray:
    edges = band_edges(breaks, side)
    points = np.full((len(edges) - 1, p), side / 2.0)
    points[:, 0] = 0.5 * (edges[:-1] + edges[1:])
    return points


def covered_segments_1d(
    centers: np.ndarray,
    radii: np.ndarray,
    side: float,
    breaks: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split the circle into segments on which coverage depth and band are constant.

    Returns (lengths, depths, bands) per segment.
    """

    coords = np.asarray(centers, dtype=float).reshape(-1)
    ends = np.concatenate([(coords - radii) % side, (coords + radii) % side])
    cuts = np.unique(np.concatenate([[0.0, side], np.asarray(breaks, dtype=float), ends]))
    lengths = np.diff(cuts)
    keep = lengths > 0.0
    lengths = lengths[keep]
    mids = 0.5 * (cuts[:-1] + cuts[1:])[keep]
    distances = torus_displacement(mids[:, None], coords[None, :], side)
    depths = (distances <= np.asarray(radii)[None, :]).sum(axis=1)
    return lengths, depths, band_index(breaks, mids)
