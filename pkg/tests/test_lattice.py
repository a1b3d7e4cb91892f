import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.lattice import (
    GappedPmf,
    LatticePmf,
    binomial_pmf,
    conditional_ge,
    conditional_le,
    conditional_ne,
    hazard,
    hypergeometric_pmf,
    is_log_concave,
    pb_pmf,
    point_mass,
    prob_eq,
    prob_ne,
    reflect,
    sample_value,
    tail_ge,
    tail_le,
    total_variation,
)


def _fair_pair() -> LatticePmf:
    return binomial_pmf(2, 0.5)


def test_pb_pmf_matches_hand_enumeration() -> None:
    assert np.allclose(pb_pmf([0.5, 0.5]).probs, [0.25, 0.5, 0.25], atol=1e-15)
    assert np.allclose(pb_pmf([0.2, 0.5]).probs, [0.4, 0.5, 0.1], atol=1e-15)
    single = pb_pmf([0.3])
    assert single.lo == 0
    assert np.allclose(single.probs, [0.7, 0.3], atol=1e-15)


@pytest.mark.parametrize("bad", [[0.0, 0.5], [0.5, 1.0], [], [float("nan")]])
def test_pb_pmf_rejects_degenerate_components(bad) -> None:
    with pytest.raises(ValueError) as exc:
        pb_pmf(bad)
    assert "p" in str(exc.value)


def test_pb_pmf_error_names_the_reduction() -> None:
    with pytest.raises(ValueError) as exc:
        pb_pmf([0.2, 1.0])
    assert "strictly between 0 and 1" in str(exc.value)


def test_hypergeometric_pmf_examples() -> None:
    half = hypergeometric_pmf(2, 1, 4)
    assert half.lo == 0
    assert np.allclose(half.probs, [0.5, 0.5], atol=1e-12)

    pair = hypergeometric_pmf(2, 2, 4)
    assert np.allclose(pair.probs, [1 / 6, 4 / 6, 1 / 6], atol=1e-12)

    empty = hypergeometric_pmf(0, 3, 5)
    assert empty.lo == 0
    assert empty.hi == 0


def test_hypergeometric_pmf_support_starts_above_zero_when_forced() -> None:
    # drawing 4 of 5 with 3 of the color forces at least 2 of it
    pmf = hypergeometric_pmf(3, 4, 5)
    assert pmf.lo == 2
    assert pmf.hi == 3


def test_hypergeometric_pmf_rejects_bad_parameters() -> None:
    with pytest.raises(ValueError) as exc:
        hypergeometric_pmf(6, 2, 5)
    assert "k must satisfy" in str(exc.value)


def test_lattice_pmf_rejects_zero_endpoints_and_bad_sums() -> None:
    with pytest.raises(ValueError) as exc:
        LatticePmf(0, [0.0, 1.0])
    assert "first and last probs must be > 0" in str(exc.value)

    with pytest.raises(ValueError) as exc:
        LatticePmf(0, [0.5, 0.6])
    assert "sum to 1" in str(exc.value)


def test_lattice_pmf_is_read_only() -> None:
    pmf = _fair_pair()
    with pytest.raises(ValueError):
        pmf.probs[0] = 1.0


def test_is_log_concave_examples() -> None:
    assert is_log_concave(_fair_pair())
    assert not is_log_concave(LatticePmf(0, [0.25, 0.25, 0.5]))
    assert is_log_concave(point_mass(4))


def test_hazard_of_fair_pair() -> None:
    pmf = _fair_pair()
    assert hazard(pmf, 0) == pytest.approx(0.25)
    assert hazard(pmf, 1) == pytest.approx(2 / 3)
    assert hazard(pmf, 2) == pytest.approx(1.0)
    assert hazard(point_mass(3), 3) == 1.0


def test_hazard_outside_support_raises() -> None:
    with pytest.raises(ValueError) as exc:
        hazard(_fair_pair(), 3)
    assert "outside support" in str(exc.value)


def test_tails_and_point_probabilities() -> None:
    pmf = _fair_pair()
    assert tail_ge(pmf, 1) == pytest.approx(0.75)
    assert tail_ge(pmf, -3) == 1.0
    assert tail_ge(pmf, 3) == 0.0
    assert tail_le(pmf, 0) == pytest.approx(0.25)
    assert tail_le(pmf, 5) == 1.0
    assert tail_le(pmf, -1) == 0.0
    assert prob_eq(pmf, 1) == pytest.approx(0.5)
    assert prob_ne(pmf, 1) == pytest.approx(0.5)
    assert prob_ne(pmf, 7) == 1.0


def test_conditionals() -> None:
    pmf = _fair_pair()
    upper = conditional_ge(pmf, 1)
    assert upper.lo == 1
    assert np.allclose(upper.probs, [2 / 3, 1 / 3])

    lower = conditional_le(pmf, 1)
    assert lower.lo == 0
    assert np.allclose(lower.probs, [1 / 3, 2 / 3])

    gapped = conditional_ne(pmf, 1)
    assert isinstance(gapped, GappedPmf)
    assert gapped.lo == 0
    assert np.allclose(gapped.probs, [0.5, 0.0, 0.5])

    trimmed = conditional_ne(pmf, 0)
    assert trimmed.lo == 1
    assert np.allclose(trimmed.probs, [2 / 3, 1 / 3])


def test_conditionals_reject_null_events() -> None:
    with pytest.raises(ValueError) as exc:
        conditional_ge(_fair_pair(), 3)
    assert "is zero" in str(exc.value)
    with pytest.raises(ValueError) as exc:
        conditional_ne(point_mass(2), 2)
    assert "is zero" in str(exc.value)


def test_reflect_and_total_variation() -> None:
    pmf = pb_pmf([0.2, 0.5])
    mirrored = reflect(pmf)
    assert mirrored.lo == -2
    assert np.allclose(mirrored.probs, [0.1, 0.5, 0.4])
    assert total_variation(pmf, pmf) == 0.0
    assert total_variation(point_mass(0), point_mass(1)) == pytest.approx(1.0)
    assert total_variation(pmf, _fair_pair()) == pytest.approx(0.15)


def test_sample_value_frequencies() -> None:
    rng = np.random.default_rng(7)
    pmf = pb_pmf([0.2, 0.5])
    draws = np.array([sample_value(pmf, rng) for _ in range(20000)])
    freq = np.bincount(draws, minlength=3) / len(draws)
    assert np.allclose(freq, pmf.probs, atol=0.02)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=0.01, max_value=0.99), min_size=1, max_size=20))
def test_poisson_binomial_is_log_concave_with_monotone_hazard(p) -> None:
    pmf = pb_pmf(p)
    assert abs(float(pmf.probs.sum()) - 1.0) <= 1e-12
    assert is_log_concave(pmf)
    rates = [hazard(pmf, int(x)) for x in pmf.support]
    assert all(later >= earlier - 1e-9 for earlier, later in zip(rates, rates[1:]))


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=1, max_value=40).flatmap(
    lambda i: st.tuples(st.just(i), st.integers(0, i), st.integers(0, i))
))
def test_hypergeometric_is_log_concave(args) -> None:
    i, k, ell = args
    pmf = hypergeometric_pmf(k, ell, i)
    assert is_log_concave(pmf)
    assert pmf.mean() == pytest.approx(ell * k / i, abs=1e-9)
