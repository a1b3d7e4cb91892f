"""Model schema, JSON configuration and validation."""

from dataclasses import dataclass
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .couplings import DEFAULT_CHAIN_LIMIT
from .geometry import Density, HistogramDensity, QuadratureGrid, UniformDensity, torus_side

VARIANTS = ("er_graph", "gg_volume", "gg_neighbors", "multinomial", "hypergeometric")
STATISTICS = ("ge", "ne")
GERM_GRAIN = ("gg_volume", "gg_neighbors")
DEFAULT_POINTS_PER_AXIS = 64


def _frozen(values: Any, dtype: type = float) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, slots=True)
class ErGraphParams:
    edge_probs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "edge_probs", _frozen(self.edge_probs))


@dataclass(frozen=True, slots=True)
class MultinomialParams:
    """placement[alpha, j] is the probability that ball j lands in urn alpha."""

    placement: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "placement", _frozen(self.placement))


@dataclass(frozen=True, slots=True)
class HypergeometricParams:
    counts: np.ndarray
    sample_size: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "counts", _frozen(self.counts, dtype=np.int64))


@dataclass(frozen=True, slots=True)
class GermGrainParams:
    """Balls of the given radii centred at independent points of the torus of volume n."""

    dimension: int
    volume: float
    radii: np.ndarray
    densities: tuple[Density, ...]
    breaks: np.ndarray
    points_per_axis: int = DEFAULT_POINTS_PER_AXIS
    kappa1: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "radii", _frozen(self.radii))
        object.__setattr__(self, "breaks", _frozen(self.breaks))
        object.__setattr__(self, "densities", tuple(self.densities))

    @property
    def side(self) -> float:
        return torus_side(self.volume, self.dimension)

    @property
    def grid(self) -> QuadratureGrid:
        return QuadratureGrid(self.side, self.dimension, self.points_per_axis)

    @property
    def all_uniform(self) -> bool:
        return all(isinstance(density, UniformDensity) for density in self.densities)


Payload = ErGraphParams | MultinomialParams | HypergeometricParams | GermGrainParams


@dataclass(frozen=True, slots=True)
class ModelSpec:
    """One occupancy model.

    weights and thresholds are indexed by component; for gg_volume they are the band values of
    the piecewise-constant functions w(x) and d(x) along the first axis.
    """

    variant: str
    weights: np.ndarray
    thresholds: np.ndarray
    payload: Payload
    seed: int | None = None
    chain_exact_limit: int = DEFAULT_CHAIN_LIMIT

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "thresholds", _frozen(self.thresholds, dtype=np.int64))

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def abs_w(self) -> float:
        return float(np.max(self.weights))

    @property
    def abs_d(self) -> int:
        return int(np.max(np.abs(self.thresholds)))


def _payload_size(variant: str, payload: Payload) -> int:
    if isinstance(payload, ErGraphParams):
        return int(payload.edge_probs.shape[0]) if payload.edge_probs.ndim == 2 else -1
    if isinstance(payload, MultinomialParams):
        return int(payload.placement.shape[0]) if payload.placement.ndim == 2 else -1
    if isinstance(payload, HypergeometricParams):
        return len(payload.counts)
    if variant == "gg_volume":
        return len(payload.breaks) + 1
    return len(payload.radii)


def _er_errors(payload: ErGraphParams) -> list[str]:
    errors: list[str] = []
    probs = payload.edge_probs
    if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
        return ["edge_probs must be a square matrix"]
    if probs.shape[0] < 2:
        errors.append("er_graph needs at least 2 vertices")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0.0) or np.any(probs >= 1.0):
        errors.append("edge_probs entries must lie in [0, 1)")
    if not np.allclose(probs, probs.T, rtol=0.0, atol=1e-12):
        errors.append("edge_probs must be symmetric")
    if np.any(np.diag(probs) != 0.0):
        errors.append("edge_probs diagonal must be zero")
    return errors


def _multinomial_errors(payload: MultinomialParams) -> list[str]:
    errors: list[str] = []
    placement = payload.placement
    if placement.ndim != 2:
        return ["placement must be a matrix of shape (urns, balls)"]
    if placement.shape[0] < 2 or placement.shape[1] < 1:
        errors.append("multinomial needs at least 2 urns and 1 ball")
    if not np.all(np.isfinite(placement)) or np.any(placement < 0.0) or np.any(placement >= 1.0):
        errors.append("placement entries must lie in [0, 1)")
    elif np.any(np.abs(placement.sum(axis=0) - 1.0) > 1e-9):
        errors.append("placement columns must sum to 1")
    return errors


def _hypergeometric_errors(payload: HypergeometricParams) -> list[str]:
    errors: list[str] = []
    if len(payload.counts) < 2:
        errors.append("hypergeometric needs at least 2 colors")
    if np.any(payload.counts < 0):
        errors.append("counts must be >= 0")
    if not (0 <= payload.sample_size <= int(payload.counts.sum())):
        errors.append("sample_size must satisfy 0 <= s <= sum(counts)")
    return errors


def _germ_grain_errors(model: ModelSpec, payload: GermGrainParams) -> list[str]:
    errors: list[str] = []
    p = payload.dimension
    if p < 1:
        return ["dimension must be >= 1"]
    if not (math.isfinite(payload.volume) and payload.volume > 0.0):
        return ["volume must be > 0"]
    side = payload.side
    radii = payload.radii
    m = len(radii)
    if m < 1:
        errors.append("at least one ball is required")
    if np.any(radii <= 0.0) or not np.all(np.isfinite(radii)):
        errors.append("radii must be > 0")
    if len(payload.densities) != m:
        errors.append("one density per ball is required")
    for density in payload.densities:
        if density.p != p or abs(density.side - side) > 1e-9 * side:
            errors.append("density dimension and side must match the torus")
            break
    if payload.points_per_axis < 2:
        errors.append("quadrature points_per_axis must be >= 2")

    if model.variant == "gg_volume":
        breaks = payload.breaks
        if breaks.ndim != 1 or np.any(np.diff(breaks) <= 0.0) or np.any(breaks <= 0.0) or np.any(breaks >= side):
            errors.append("breaks must be strictly increasing inside (0, side)")
        if math.sqrt(p) * side <= 2.0 * float(radii.sum()):
            errors.append("gg_volume requires sqrt(p) n^(1/p) > 2 * sum(radii)")
        if np.any(model.thresholds < 1):
            errors.append("gg_volume thresholds must be >= 1")
    else:
        if np.any(radii != 1.0):
            errors.append("gg_neighbors uses unit radii")
        if m < 2:
            errors.append("gg_neighbors needs at least 2 points")
        if math.sqrt(p) * side <= 2.0 * m:
            errors.append("gg_neighbors requires sqrt(p) n^(1/p) > 2m")
        if side <= 6.0:
            errors.append("gg_neighbors requires n^(1/p) > 6")
        if np.any(model.thresholds < 1):
            errors.append("gg_neighbors thresholds must be >= 1")
        if payload.kappa1 is not None and payload.kappa1 < 1:
            errors.append("kappa1 must be >= 1 when provided")
    return errors


def validate_model(model: ModelSpec) -> None:
    """Validate a model and raise ValueError listing every violation."""

    errors: list[str] = []
    if model.variant not in VARIANTS:
        raise ValueError(f"variant must be one of {', '.join(VARIANTS)}")

    expected = {
        "er_graph": ErGraphParams,
        "multinomial": MultinomialParams,
        "hypergeometric": HypergeometricParams,
        "gg_volume": GermGrainParams,
        "gg_neighbors": GermGrainParams,
    }[model.variant]
    if not isinstance(model.payload, expected):
        raise ValueError(f"{model.variant} requires {expected.__name__}")

    if model.weights.ndim != 1 or model.n_components == 0:
        errors.append("weights must be a nonempty vector")
    elif not np.all(np.isfinite(model.weights)) or np.any(model.weights <= 0.0):
        errors.append("weights must be finite and > 0")
    if model.thresholds.shape != model.weights.shape:
        errors.append("thresholds and weights must have the same length")
    size = _payload_size(model.variant, model.payload)
    if size >= 0 and model.n_components != size:
        errors.append(f"{model.variant} expects {size} weights, got {model.n_components}")
    if model.chain_exact_limit < 1:
        errors.append("chain_exact_limit must be >= 1")
    if model.seed is not None and model.seed < 0:
        errors.append("seed must be >= 0")

    if isinstance(model.payload, ErGraphParams):
        errors.extend(_er_errors(model.payload))
    elif isinstance(model.payload, MultinomialParams):
        errors.extend(_multinomial_errors(model.payload))
    elif isinstance(model.payload, HypergeometricParams):
        errors.extend(_hypergeometric_errors(model.payload))
    else:
        errors.extend(_germ_grain_errors(model, model.payload))

    if errors:
        raise ValueError("; ".join(errors))


def _broadcast(value: Any, size: int, name: str, errors: list[str]) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return [value] * size
    if isinstance(value, list):
        return value
    errors.append(f"{name} must be a number or a list")
    return [0] * size


def _require(section: dict[str, Any], key: str, prefix: str, errors: list[str]) -> Any:
    if key not in section:
        errors.append(f"{prefix}.{key} is required")
        return None
    return section[key]


def _parse_density(entry: Any, side: float, p: int, errors: list[str]) -> Density:
    if entry == "uniform":
        return UniformDensity(side, p)
    if isinstance(entry, dict) and "histogram" in entry:
        masses = np.asarray(entry["histogram"], dtype=float)
        total = float(masses.sum())
        if total > 0.0:
            masses = masses / total
        try:
            return HistogramDensity(side, p, masses)
        except ValueError as exc:
            errors.append(f"params.densities: {exc}")
            return UniformDensity(side, p)
    errors.append("params.densities entries must be 'uniform' or {'histogram': [...]}")
    return UniformDensity(side, p)


def _germ_grain_payload(variant: str, params: dict[str, Any], config: dict[str, Any], errors: list[str]) -> GermGrainParams | None:
    dimension = _require(params, "dimension", "params", errors)
    volume = _require(params, "volume", "params", errors)
    if dimension is None or volume is None:
        return None
    dimension, volume = int(dimension), float(volume)
    if dimension < 1 or volume <= 0.0:
        errors.append("params.dimension must be >= 1 and params.volume > 0")
        return None
    side = torus_side(volume, dimension)

    if variant == "gg_volume":
        radii_value = _require(params, "radii", "params", errors)
        if radii_value is None:
            return None
        if isinstance(radii_value, list):
            radii = [float(r) for r in radii_value]
        else:
            radii = [float(radii_value)] * int(_require(params, "balls", "params", errors) or 0)
    else:
        points = _require(params, "points", "params", errors)
        if points is None:
            return None
        radii = [1.0] * int(points)

    densities_value = params.get("densities", "uniform")
    entries = densities_value if isinstance(densities_value, list) else [densities_value] * len(radii)
    if len(entries) != len(radii):
        errors.append("params.densities must list one entry per ball")
    densities = tuple(_parse_density(entry, side, dimension, errors) for entry in entries)
    quadrature = config.get("quadrature", {}) or {}
    kappa1 = params.get("kappa1")
    return GermGrainParams(
        dimension=dimension,
        volume=volume,
        radii=np.asarray(radii, dtype=float),
        densities=densities,
        breaks=np.asarray(params.get("breaks", []), dtype=float),
        points_per_axis=int(quadrature.get("points_per_axis", DEFAULT_POINTS_PER_AXIS)),
        kappa1=None if kappa1 is None else int(kappa1),
    )


def model_from_config(config: dict[str, Any]) -> ModelSpec:
    """Build and validate a ModelSpec from a decoded JSON document."""

    errors: list[str] = []
    variant = config.get("variant")
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {', '.join(VARIANTS)}")
    params = config.get("params")
    if not isinstance(params, dict):
        raise ValueError("params must be an object")

    payload: Payload | None = None
    size = 0
    if variant == "er_graph":
        if "edge_probs" in params:
            payload = ErGraphParams(np.asarray(params["edge_probs"], dtype=float))
        else:
            vertices = _require(params, "vertices", "params", errors)
            edge_prob = _require(params, "edge_prob", "params", errors)
            if vertices is not None and edge_prob is not None:
                matrix = np.full((int(vertices), int(vertices)), float(edge_prob))
                np.fill_diagonal(matrix, 0.0)
                payload = ErGraphParams(matrix)
    elif variant == "multinomial":
        if "placement" in params:
            payload = MultinomialParams(np.asarray(params["placement"], dtype=float))
        else:
            urns = _require(params, "urns", "params", errors)
            balls = _require(params, "balls", "params", errors)
            if urns is not None and balls is not None:
                payload = MultinomialParams(np.full((int(urns), int(balls)), 1.0 / int(urns)))
    elif variant == "hypergeometric":
        counts = _require(params, "counts", "params", errors)
        sample_size = _require(params, "sample_size", "params", errors)
        if counts is not None and sample_size is not None:
            payload = HypergeometricParams(np.asarray(counts, dtype=np.int64), int(sample_size))
    else:
        payload = _germ_grain_payload(variant, params, config, errors)

    if payload is not None:
        size = _payload_size(variant, payload)
    weights = _broadcast(config.get("weights", 1.0), size, "weights", errors)
    thresholds = _broadcast(config.get("thresholds", 1), size, "thresholds", errors)
    if any(float(d) != int(d) for d in thresholds if isinstance(d, (int, float))):
        errors.append("thresholds must be integers")
    if errors or payload is None:
        raise ValueError("; ".join(errors) if errors else "params could not be parsed")

    seed = config.get("seed")
    model = ModelSpec(
        variant=variant,
        weights=np.asarray(weights, dtype=float),
        thresholds=np.asarray([int(d) for d in thresholds], dtype=np.int64),
        payload=payload,
        seed=None if seed is None else int(seed),
        chain_exact_limit=int(config.get("chain_exact_limit", DEFAULT_CHAIN_LIMIT)),
    )
    validate_model(model)
    return model


def load_model_config(path: str | Path) -> ModelSpec:
    config_path = Path(path)
    try:
        with config_path.open("r", encoding="utf-8") as handle:
            config = json.load(handle)
    except FileNotFoundError as exc:
        raise ValueError(f"model config not found: {config_path}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"model config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ValueError("model config must be a JSON object")
    return model_from_config(config)


def _density_to_config(density: Density) -> Any:
    if isinstance(density, UniformDensity):
        return "uniform"
    return {"histogram": density.masses.tolist()}


def model_to_config(model: ModelSpec) -> dict[str, Any]:
    """Canonical JSON-ready echo of a model: explicit matrices, lists and floats."""

    payload = model.payload
    params: dict[str, Any]
    config: dict[str, Any] = {}
    if isinstance(payload, ErGraphParams):
        params = {"edge_probs": payload.edge_probs.tolist()}
    elif isinstance(payload, MultinomialParams):
        params = {"placement": payload.placement.tolist()}
    elif isinstance(payload, HypergeometricParams):
        params = {"counts": [int(c) for c in payload.counts], "sample_size": int(payload.sample_size)}
    else:
        params = {
            "dimension": int(payload.dimension),
            "volume": float(payload.volume),
            "densities": [_density_to_config(density) for density in payload.densities],
        }
        if model.variant == "gg_volume":
            params["radii"] = [float(r) for r in payload.radii]
            params["breaks"] = [float(b) for b in payload.breaks]
        else:
            params["points"] = len(payload.radii)
            if payload.kappa1 is not None:
                params["kappa1"] = int(payload.kappa1)
        config["quadrature"] = {"points_per_axis": int(payload.points_per_axis)}

    config.update(
        {
            "variant": model.variant,
            "weights": [float(w) for w in model.weights],
            "thresholds": [int(d) for d in model.thresholds],
            "params": params,
            "chain_exact_limit": int(model.chain_exact_limit),
        }
    )
    if model.seed is not None:
        config["seed"] = int(model.seed)
    return config


def validate_model_config(config: dict[str, Any]) -> None:
    """Raise ValueError listing every problem of a decoded model document."""

    model_from_config(config)
