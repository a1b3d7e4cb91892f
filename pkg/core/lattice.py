"""Finite lattice distributions and log-concavity helpers."""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

SUM_TOLERANCE = 1e-12
LC_RELATIVE_TOLERANCE = 1e-12


def _as_probs(probs: np.ndarray | list[float]) -> np.ndarray:
    values = np.array(probs, dtype=float, copy=True).reshape(-1)
    values.setflags(write=False)
    return values


def _probability_errors(probs: np.ndarray) -> list[str]:
    errors: list[str] = []
    if probs.size == 0:
        errors.append("probs must be nonempty")
        return errors
    if not np.all(np.isfinite(probs)):
        errors.append("probs must be finite")
        return errors
    if np.any(probs < 0.0):
        errors.append("probs must be >= 0")
    if abs(float(probs.sum()) - 1.0) > SUM_TOLERANCE:
        errors.append(f"probs must sum to 1 within {SUM_TOLERANCE:g}")
    return errors


@dataclass(frozen=True, slots=True)
class LatticePmf:
    """Probability mass function on the integer interval [lo, lo + len(probs) - 1]."""

    lo: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = _as_probs(self.probs)
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "probs", probs)
        errors = _probability_errors(probs)
        if not errors and (probs[0] <= 0.0 or probs[-1] <= 0.0):
            errors.append("first and last probs must be > 0")
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def hi(self) -> int:
        return self.lo + len(self.probs) - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def contains(self, x: int) -> bool:
        return self.lo <= x <= self.hi

    def prob(self, x: int) -> float:
        if not self.contains(x):
            return 0.0
        return float(self.probs[x - self.lo])

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))


@dataclass(frozen=True, slots=True)
class GappedPmf:
    """Lattice pmf whose interior atoms may be zero (returned by conditioning on M != d)."""

    lo: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = _as_probs(self.probs)
        object.__setattr__(self, "lo", int(self.lo))
        object.__setattr__(self, "probs", probs)
        errors = _probability_errors(probs)
        if errors:
            raise ValueError("; ".join(errors))

    @property
    def hi(self) -> int:
        return self.lo + len(self.probs) - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def prob(self, x: int) -> float:
        if not (self.lo <= x <= self.hi):
            return 0.0
        return float(self.probs[x - self.lo])

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))


def _trimmed(lo: int, weights: np.ndarray) -> tuple[int, np.ndarray]:
    """Drop zero end atoms and renormalize."""

    nonzero = np.flatnonzero(weights > 0.0)
    if nonzero.size == 0:
        raise ValueError("distribution has no positive mass")
    first, last = int(nonzero[0]), int(nonzero[-1])
    kept = np.asarray(weights[first : last + 1], dtype=float)
    return lo + first, kept / kept.sum()


def lattice_from_weights(lo: int, weights: np.ndarray) -> LatticePmf:
    """Build a LatticePmf from nonnegative unnormalized weights."""

    new_lo, probs = _trimmed(lo, np.asarray(weights, dtype=float))
    return LatticePmf(new_lo, probs)


def point_mass(k: int) -> LatticePmf:
    return LatticePmf(k, np.ones(1))


def pb_pmf(p: np.ndarray | list[float]) -> LatticePmf:
    """Poisson Binomial pmf of a sum of independent Bernoulli(p_j) variables."""

    probabilities = np.asarray(p, dtype=float).reshape(-1)
    if probabilities.size == 0:
        raise ValueError("p must be nonempty")
    if np.any(~np.isfinite(probabilities)) or np.any(probabilities <= 0.0) or np.any(probabilities >= 1.0):
        raise ValueError("every p_j must lie strictly between 0 and 1; strip constant summands first")

    # Coefficients of prod_j (1 - p_j + p_j z).
    pmf = np.array([1.0])
    for p_j in probabilities:
        nxt = np.zeros(len(pmf) + 1)
        nxt[:-1] = pmf * (1.0 - p_j)
        nxt[1:] += pmf * p_j
        pmf = nxt
    return lattice_from_weights(0, pmf)


def binomial_pmf(n: int, p: float) -> LatticePmf:
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return point_mass(0)
    return pb_pmf(np.full(n, p))


def _log_binom(n: np.ndarray | float, k: np.ndarray | float) -> np.ndarray:
    return gammaln(np.asarray(n, dtype=float) + 1.0) - gammaln(np.asarray(k, dtype=float) + 1.0) - gammaln(
        np.asarray(n, dtype=float) - np.asarray(k, dtype=float) + 1.0
    )


def hypergeometric_pmf(k: int, ell: int, i: int) -> LatticePmf:
    """Number of color-k balls in a sample of size ell drawn without replacement from i balls."""

    errors: list[str] = []
    if i < 0:
        errors.append("i must be >= 0")
    if not (0 <= k <= i):
        errors.append("k must satisfy 0 <= k <= i")
    if not (0 <= ell <= i):
        errors.append("ell must satisfy 0 <= ell <= i")
    if errors:
        raise ValueError("; ".join(errors))

    lo = max(0, ell + k - i)
    hi = min(ell, k)
    j = np.arange(lo, hi + 1)
    log_q = _log_binom(k, j) + _log_binom(i - k, ell - j) - _log_binom(i, ell)
    weights = np.exp(log_q - log_q.max())
    return lattice_from_weights(lo, weights)


def is_log_concave(pmf: LatticePmf) -> bool:
    """Check p_x^2 >= p_{x-1} p_{x+1} on the interior, with relative tolerance."""

    probs = pmf.probs
    if np.any(probs <= 0.0):
        return False
    if len(probs) < 3:
        return True
    square = probs[1:-1] ** 2
    product = probs[:-2] * probs[2:]
    return bool(np.all(square >= product - LC_RELATIVE_TOLERANCE * square))


def require_log_concave(pmf: LatticePmf) -> None:
    if not is_log_concave(pmf):
        raise ValueError("pmf must be log-concave on an integer interval")


def upper_tails(probs: np.ndarray) -> np.ndarray:
    """Backward accumulation: entry k is sum(probs[k:])."""

    return np.cumsum(probs[::-1])[::-1]


def lower_tails(probs: np.ndarray) -> np.ndarray:
    return np.cumsum(probs)


def hazard(pmf: LatticePmf, x: int) -> float:
    if not pmf.contains(x):
        raise ValueError(f"x={x} lies outside support [{pmf.lo}, {pmf.hi}]")
    index = x - pmf.lo
    tail = upper_tails(pmf.probs)[index]
    return float(min(1.0, pmf.probs[index] / tail))


def tail_ge(pmf: LatticePmf | GappedPmf, d: int) -> float:
    """P(M >= d)."""

    if d <= pmf.lo:
        return 1.0
    if d > pmf.hi:
        return 0.0
    return float(min(1.0, upper_tails(pmf.probs)[d - pmf.lo]))


def tail_le(pmf: LatticePmf | GappedPmf, d: int) -> float:
    """P(M <= d)."""

    if d >= pmf.hi:
        return 1.0
    if d < pmf.lo:
        return 0.0
    return float(min(1.0, lower_tails(pmf.probs)[d - pmf.lo]))


def prob_eq(pmf: LatticePmf | GappedPmf, d: int) -> float:
    return pmf.prob(d)


def prob_ne(pmf: LatticePmf | GappedPmf, d: int) -> float:
    return 1.0 - prob_eq(pmf, d)


def conditional_ge(pmf: LatticePmf, d: int) -> LatticePmf:
    """L(M | M >= d)."""

    if tail_ge(pmf, d) <= 0.0:
        raise ValueError(f"P(M >= {d}) is zero")
    start = max(d - pmf.lo, 0)
    return lattice_from_weights(pmf.lo + start, pmf.probs[start:])


def conditional_le(pmf: LatticePmf, d: int) -> LatticePmf:
    """L(M | M <= d)."""

    if tail_le(pmf, d) <= 0.0:
        raise ValueError(f"P(M <= {d}) is zero")
    stop = min(d - pmf.lo, len(pmf.probs) - 1)
    return lattice_from_weights(pmf.lo, pmf.probs[: stop + 1])


def conditional_ne(pmf: LatticePmf, d: int) -> GappedPmf:
    """L(M | M != d); removing an interior atom leaves a gap."""

    if prob_ne(pmf, d) <= 0.0:
        raise ValueError(f"P(M != {d}) is zero")
    weights = np.array(pmf.probs, dtype=float)
    if pmf.contains(d):
        weights[d - pmf.lo] = 0.0
    lo, probs = _trimmed(pmf.lo, weights)
    return GappedPmf(lo, probs)


def reflect(pmf: LatticePmf) -> LatticePmf:
    """Law of -M."""

    return LatticePmf(-pmf.hi, pmf.probs[::-1])


def total_variation(first: LatticePmf | GappedPmf, second: LatticePmf | GappedPmf) -> float:
    lo = min(first.lo, second.lo)
    hi = max(first.hi, second.hi)
    a = np.zeros(hi - lo + 1)
    b = np.zeros(hi - lo + 1)
    a[first.lo - lo : first.hi - lo + 1] = first.probs
    b[second.lo - lo : second.hi - lo + 1] = second.probs
    return float(0.5 * np.abs(a - b).sum())


def sample_value(pmf: LatticePmf | GappedPmf, rng: np.random.Generator) -> int:
    """Draw one value by inverting the cumulative distribution."""

    cdf = lower_tails(pmf.probs)
    index = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return pmf.lo + min(index, len(pmf.probs) - 1)
