"""Step couplings, threshold lifts and monotone conditional-Bernoulli chains."""

from collections.abc import Iterator
from dataclasses import dataclass
from itertools import combinations
import logging
import math

import networkx as nx
from networkx.algorithms.flow import preflow_push
import numpy as np

from .lattice import (
    GappedPmf,
    LatticePmf,
    conditional_ge,
    lattice_from_weights,
    prob_ne,
    reflect,
    require_log_concave,
    sample_value,
    tail_ge,
    upper_tails,
)

logger = logging.getLogger(__name__)

DEFAULT_CHAIN_LIMIT = 12
FLOW_SCALE = 2**48
KERNEL_RESIDUAL_TOLERANCE = 1e-10
COEFFICIENT_TOLERANCE = 1e-12
LEVEL_ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True, slots=True)
class StepCoefficients:
    """pi_x^(d) (direction 'up') or rho_x^(d) (direction 'down') over x in [lo, lo + len - 1]."""

    direction: str
    d: int
    lo: int
    values: np.ndarray

    def at(self, x: int) -> float:
        index = x - self.lo
        if index < 0 or index >= len(self.values):
            return 0.0
        return float(self.values[index])


def _up_values(pmf: LatticePmf, d: int) -> StepCoefficients:
    values = np.zeros(len(pmf.probs))
    if pmf.contains(d + 1):
        tails = upper_tails(pmf.probs)
        p_d = pmf.prob(d)
        tail_next = tails[d + 1 - pmf.lo]
        start = max(d, pmf.lo) - pmf.lo
        for index in range(start, len(pmf.probs) - 1):
            values[index] = tails[index + 1] * p_d / (tail_next * pmf.probs[index])
    assert np.all(values <= 1.0 + COEFFICIENT_TOLERANCE), "step coefficient above 1 for a log-concave pmf"
    values = np.clip(values, 0.0, 1.0)
    values.setflags(write=False)
    return StepCoefficients("up", d, pmf.lo, values)


def step_up_coefficients(pmf: LatticePmf, d: int) -> StepCoefficients:
    require_log_concave(pmf)
    return _up_values(pmf, d)


def step_down_coefficients(pmf: LatticePmf, d: int) -> StepCoefficients:
    """rho^(d) through the reflection rho_x^(d) = pi_{-x}^(-d) of -M."""

    require_log_concave(pmf)
    mirrored = _up_values(reflect(pmf), -d)
    values = np.array(mirrored.values[::-1])
    values.setflags(write=False)
    return StepCoefficients("down", d, pmf.lo, values)


def pi_coeff(pmf: LatticePmf, d: int, x: int) -> float:
    return step_up_coefficients(pmf, d).at(x)


def rho_coeff(pmf: LatticePmf, d: int, x: int) -> float:
    return step_down_coefficients(pmf, d).at(x)


def step_up_law(pmf: LatticePmf, d: int) -> LatticePmf:
    """Exact law of N + Z with N ~ L(M | M >= d) and Z | N ~ Bern(pi_N^(d))."""

    require_log_concave(pmf)
    if not pmf.contains(d + 1):
        raise ValueError(f"d+1={d + 1} must lie in the support [{pmf.lo}, {pmf.hi}]")
    base = conditional_ge(pmf, d)
    coeffs = _up_values(pmf, d)
    weights = np.zeros(len(base.probs) + 1)
    for offset, mass in enumerate(base.probs):
        pi = coeffs.at(base.lo + offset)
        weights[offset] += mass * (1.0 - pi)
        weights[offset + 1] += mass * pi
    return lattice_from_weights(base.lo, weights)


def step_down_law(pmf: LatticePmf, d: int) -> LatticePmf:
    """Exact law of N - Z with N ~ L(M | M <= d) and Z | N ~ Bern(rho_N^(d))."""

    if not pmf.contains(d - 1):
        raise ValueError(f"d-1={d - 1} must lie in the support [{pmf.lo}, {pmf.hi}]")
    return reflect(step_up_law(reflect(pmf), -d))


@dataclass(frozen=True, slots=True)
class NePerturbation:
    """X = Z*Z_plus - (1 - Z)*Z_minus with Z ~ Bern(q), so that M + X ~ L(M | M != d)."""

    pmf: LatticePmf
    d: int
    q: float
    pi: StepCoefficients
    rho: StepCoefficients

    def law(self) -> GappedPmf:
        weights = np.zeros(len(self.pmf.probs) + 2)
        for offset, mass in enumerate(self.pmf.probs):
            x = self.pmf.lo + offset
            up = self.q * self.pi.at(x)
            down = (1.0 - self.q) * self.rho.at(x)
            # index k of weights holds the atom lo - 1 + k
            weights[offset + 2] += mass * up
            weights[offset] += mass * down
            weights[offset + 1] += mass * (1.0 - up - down)
        nonzero = np.flatnonzero(weights > 0.0)
        first, last = int(nonzero[0]), int(nonzero[-1])
        kept = weights[first : last + 1]
        return GappedPmf(self.pmf.lo - 1 + first, kept / kept.sum())

    def shift(self, m: int, rng: np.random.Generator) -> int:
        if rng.random() < self.q:
            return int(rng.random() < self.pi.at(m))
        return -int(rng.random() < self.rho.at(m))

    def sample(self, rng: np.random.Generator) -> tuple[int, int]:
        m = sample_value(self.pmf, rng)
        return m, self.shift(m, rng)


def ne_perturbation(pmf: LatticePmf, d: int) -> NePerturbation:
    require_log_concave(pmf)
    not_d = prob_ne(pmf, d)
    if not_d <= 0.0:
        raise ValueError(f"P(M = {d}) is 1; the != statistic is degenerate")
    above = tail_ge(pmf, d + 1)
    q = 0.0 if above <= 0.0 else min(1.0, above / not_d)
    return NePerturbation(
        pmf=pmf,
        d=d,
        q=q,
        pi=_up_values(pmf, d),
        rho=step_down_coefficients(pmf, d),
    )


def ne_perturbation_law(pmf: LatticePmf, d: int) -> GappedPmf:
    return ne_perturbation(pmf, d).law()


class ThresholdLift:
    """All-at-once lift M -> M + A with L(M + A) = L(M | M >= d) and 0 <= A <= d - lo.

    The lift runs the chain M_{k+1} = M_k + Bern(pi^(k)_{M_k}) for k = lo, ..., d - 1.
    """

    def __init__(self, pmf: LatticePmf, d: int) -> None:
        require_log_concave(pmf)
        if not pmf.contains(d):
            raise ValueError(f"d={d} must lie in the support [{pmf.lo}, {pmf.hi}]")
        self.pmf = pmf
        self.d = d
        self._steps = [_up_values(pmf, k) for k in range(pmf.lo, d)]

    def lift(self, m: int, rng: np.random.Generator) -> int:
        current = m
        for coeffs in self._steps:
            if rng.random() < coeffs.at(current):
                current += 1
        return current - m

    def sample(self, rng: np.random.Generator) -> tuple[int, int]:
        m = sample_value(self.pmf, rng)
        return m, self.lift(m, rng)

    def joint_law(self) -> dict[tuple[int, int], float]:
        """Exact law of (M, A) by propagating the Bernoulli chain."""

        states: dict[tuple[int, int], float] = {
            (int(x), int(x)): float(mass) for x, mass in zip(self.pmf.support, self.pmf.probs)
        }
        for coeffs in self._steps:
            nxt: dict[tuple[int, int], float] = {}
            for (m, current), mass in states.items():
                pi = coeffs.at(current)
                if pi < 1.0:
                    key = (m, current)
                    nxt[key] = nxt.get(key, 0.0) + mass * (1.0 - pi)
                if pi > 0.0:
                    key = (m, current + 1)
                    nxt[key] = nxt.get(key, 0.0) + mass * pi
            states = nxt
        return {(m, current - m): mass for (m, current), mass in sorted(states.items())}

    def sum_law(self) -> LatticePmf:
        joint = self.joint_law()
        totals = [m + a for m, a in joint]
        lo, hi = min(totals), max(totals)
        weights = np.zeros(hi - lo + 1)
        for (m, a), mass in joint.items():
            weights[m + a - lo] += mass
        return lattice_from_weights(lo, weights)


def lift_to_threshold(pmf: LatticePmf, d: int) -> ThresholdLift:
    return ThresholdLift(pmf, d)


def _validated_probabilities(p: np.ndarray | list[float]) -> np.ndarray:
    probabilities = np.asarray(p, dtype=float).reshape(-1)
    if probabilities.size == 0:
        raise ValueError("p must be nonempty")
    if np.any(~np.isfinite(probabilities)) or np.any(probabilities <= 0.0) or np.any(probabilities >= 1.0):
        raise ValueError("every p_j must lie strictly between 0 and 1")
    return probabilities


def _indicator(positions: tuple[int, ...], m: int) -> np.ndarray:
    vector = np.zeros(m, dtype=np.int8)
    vector[list(positions)] = 1
    return vector


class ConditionalBernoulli:
    """Exact L(X | sum X = a) for independent X_j ~ Bern(p_j).

    table[i, n] holds log P(X_n + ... + X_{m-1} = i); sampling decides the coordinates in
    order, conditioning on the remaining sum.
    """

    def __init__(self, p: np.ndarray | list[float]) -> None:
        self.p = _validated_probabilities(p)
        m = len(self.p)
        self._log_p = np.log(self.p)
        self._log_q = np.log1p(-self.p)
        table = np.full((m + 1, m + 1), -np.inf)
        table[0, m] = 0.0
        for n in range(m - 1, -1, -1):
            stay = self._log_q[n] + table[:, n + 1]
            take = np.full(m + 1, -np.inf)
            take[1:] = self._log_p[n] + table[:-1, n + 1]
            table[:, n] = np.logaddexp(stay, take)
        self._table = table

    @property
    def m(self) -> int:
        return len(self.p)

    def _check_level(self, a: int) -> None:
        if not (0 <= a <= self.m):
            raise ValueError(f"a={a} must satisfy 0 <= a <= {self.m}")

    def log_level_prob(self, a: int) -> float:
        self._check_level(a)
        return float(self._table[a, 0])

    def sample(self, a: int, rng: np.random.Generator) -> np.ndarray:
        self._check_level(a)
        m = self.m
        vector = np.zeros(m, dtype=np.int8)
        remaining = a
        for n in range(m):
            if remaining == 0:
                break
            if remaining == m - n:
                vector[n:] = 1
                break
            log_take = self._log_p[n] + self._table[remaining - 1, n + 1] - self._table[remaining, n]
            if rng.random() < math.exp(min(0.0, log_take)):
                vector[n] = 1
                remaining -= 1
        return vector

    def law(self, a: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
        """Enumerate the level set {x : sum x = a} in lexicographic order with its probabilities."""

        self._check_level(a)
        if math.comb(self.m, a) > LEVEL_ENUMERATION_LIMIT:
            raise ValueError(f"level {a} of {self.m} indicators is too large to enumerate")
        states = list(combinations(range(self.m), a))
        log_odds = self._log_p - self._log_q
        base = float(self._log_q.sum()) - float(self._table[a, 0])
        probs = np.array([math.exp(base + float(log_odds[list(state)].sum())) for state in states])
        return states, probs / probs.sum()


def conditional_bernoulli(p: np.ndarray | list[float], a: int, rng: np.random.Generator) -> np.ndarray:
    return ConditionalBernoulli(p).sample(a, rng)


@dataclass(frozen=True, slots=True)
class CouplingChain:
    """A realized chain X_0 <= X_1 <= ... <= X_m of 0/1 vectors with sum X_a = a."""

    p: np.ndarray
    states: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        errors: list[str] = []
        for a, state in enumerate(self.states):
            if int(state.sum()) != a:
                errors.append(f"state {a} must have exactly {a} ones")
            if a > 0 and np.any(state < self.states[a - 1]):
                errors.append(f"state {a} must dominate state {a - 1}")
        if errors:
            raise ValueError("; ".join(errors))


@dataclass(frozen=True, slots=True)
class _Kernel:
    targets: tuple[np.ndarray, ...]
    cdfs: tuple[np.ndarray, ...]


class MonotoneChain:
    """Monotone coupling of the conditional Bernoulli laws at every level.

    Level a is linked to level a + 1 by a transport kernel supported on arcs x -> x + e_i,
    solved once as an integer max-flow and cached.
    """

    def __init__(self, p: np.ndarray | list[float], limit: int = DEFAULT_CHAIN_LIMIT) -> None:
        self.p = _validated_probabilities(p)
        if len(self.p) > limit:
            raise ValueError(
                f"monotone chain over {len(self.p)} indicators exceeds chain_exact_limit={limit}; "
                "use ConditionalBernoulli for single-level sampling or reduce the model to desk scale"
            )
        self._sampler = ConditionalBernoulli(self.p)
        self._levels = [self._sampler.law(a) for a in range(self.m + 1)]
        self._index = [{state: i for i, state in enumerate(states)} for states, _ in self._levels]
        self.residuals: list[float] = []
        self._kernels = [self._solve_kernel(a) for a in range(self.m)]

    @property
    def m(self) -> int:
        return len(self.p)

    def level_law(self, a: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
        return self._levels[a]

    def _solve_kernel(self, a: int) -> _Kernel:
        states_a, probs_a = self._levels[a]
        states_b, probs_b = self._levels[a + 1]
        index_b = self._index[a + 1]

        supply = np.floor(probs_a * FLOW_SCALE).astype(np.int64)
        tiny = supply == 0
        supply[tiny] = 1
        demand = np.ceil(probs_b * FLOW_SCALE).astype(np.int64) + int(tiny.sum())

        graph = nx.DiGraph()
        for i in range(len(states_a)):
            graph.add_edge("source", ("a", i), capacity=int(supply[i]))
        for j in range(len(states_b)):
            graph.add_edge(("b", j), "sink", capacity=int(demand[j]))
        for i, state in enumerate(states_a):
            members = set(state)
            for coord in range(self.m):
                if coord in members:
                    continue
                # no capacity attribute: unbounded arc
                graph.add_edge(("a", i), ("b", index_b[tuple(sorted(state + (coord,)))]))

        flow_value, flow = nx.maximum_flow(graph, "source", "sink", flow_func=preflow_push)
        if int(flow_value) != int(supply.sum()):
            raise RuntimeError(
                f"monotone transport between levels {a} and {a + 1} is infeasible "
                f"(flow {flow_value} of {int(supply.sum())})"
            )

        targets: list[np.ndarray] = []
        cdfs: list[np.ndarray] = []
        induced = np.zeros(len(states_b))
        for i in range(len(states_a)):
            arcs = sorted((node[1], amount) for node, amount in flow[("a", i)].items() if amount > 0)
            target = np.array([j for j, _ in arcs], dtype=np.int64)
            weights = np.array([amount for _, amount in arcs], dtype=float) / float(supply[i])
            induced[target] += probs_a[i] * weights
            targets.append(target)
            cdfs.append(np.cumsum(weights))

        residual = float(np.max(np.abs(induced - probs_b)))
        logger.debug("level %d -> %d: %d x %d states, residual %.3e", a, a + 1, len(states_a), len(states_b), residual)
        if residual > KERNEL_RESIDUAL_TOLERANCE:
            raise RuntimeError(f"transport kernel at level {a} has residual {residual:.3e}")
        self.residuals.append(residual)
        return _Kernel(tuple(targets), tuple(cdfs))

    def _step(self, a: int, i: int, rng: np.random.Generator) -> int:
        kernel = self._kernels[a]
        cdf = kernel.cdfs[i]
        pick = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return int(kernel.targets[i][min(pick, len(cdf) - 1)])

    def iter_path(self, a: int, b: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
        if not (0 <= a <= b <= self.m):
            raise ValueError(f"levels must satisfy 0 <= a <= b <= {self.m}")
        start = self._sampler.sample(a, rng)
        i = self._index[a][tuple(int(k) for k in np.flatnonzero(start))]
        yield start
        for level in range(a, b):
            i = self._step(level, i, rng)
            yield _indicator(self._levels[level + 1][0][i], self.m)

    def sample_path(self, a: int, b: int, rng: np.random.Generator) -> list[np.ndarray]:
        """Every chain state from level a up to level b of one draw."""

        return list(self.iter_path(a, b, rng))

    def sample_chain(self, rng: np.random.Generator) -> CouplingChain:
        return CouplingChain(self.p, tuple(self.sample_path(0, self.m, rng)))


def monotone_chain(p: np.ndarray | list[float], limit: int = DEFAULT_CHAIN_LIMIT) -> MonotoneChain:
    return MonotoneChain(p, limit)


def chain_segment(chain: MonotoneChain, a: int, b: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """The pair (X_a, X_b) of one chain draw."""

    path = chain.sample_path(a, b, rng)
    return path[0], path[-1]
