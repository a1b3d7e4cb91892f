import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.couplings import (
    COEFFICIENT_TOLERANCE,
    ConditionalBernoulli,
    CouplingChain,
    MonotoneChain,
    ThresholdLift,
    chain_segment,
    ne_perturbation,
    ne_perturbation_law,
    pi_coeff,
    rho_coeff,
    step_down_law,
    step_up_coefficients,
    step_up_law,
)
from core.lattice import (
    LatticePmf,
    binomial_pmf,
    conditional_ge,
    conditional_le,
    conditional_ne,
    pb_pmf,
    point_mass,
    total_variation,
    upper_tails,
)

EXACT = 1e-10


def _binomial_corpus():
    for n in range(1, 9):
        for p in np.round(np.arange(0.1, 1.0, 0.1), 1):
            yield n, float(p), binomial_pmf(n, float(p))


def test_pi_and_rho_coefficients_of_fair_pair() -> None:
    pmf = binomial_pmf(2, 0.5)
    assert pi_coeff(pmf, 0, 0) == pytest.approx(1.0)
    assert pi_coeff(pmf, 0, 1) == pytest.approx(1 / 6)
    assert pi_coeff(pmf, 0, 2) == 0.0
    assert rho_coeff(pmf, 2, 1) == pytest.approx(1 / 6)
    # below the threshold nothing moves up
    assert pi_coeff(pmf, 1, 0) == 0.0


def test_step_up_law_matches_conditional_on_binomial_corpus() -> None:
    for n, p, pmf in _binomial_corpus():
        for d in range(0, n):
            law = step_up_law(pmf, d)
            assert total_variation(law, conditional_ge(pmf, d + 1)) <= EXACT, (n, p, d)


def test_step_down_law_matches_conditional_on_binomial_corpus() -> None:
    for n, p, pmf in _binomial_corpus():
        for d in range(1, n + 1):
            law = step_down_law(pmf, d)
            assert total_variation(law, conditional_le(pmf, d - 1)) <= EXACT, (n, p, d)


def test_ne_perturbation_law_matches_conditional_on_binomial_corpus() -> None:
    for n, p, pmf in _binomial_corpus():
        for d in range(0, n + 1):
            law = ne_perturbation_law(pmf, d)
            assert total_variation(law, conditional_ne(pmf, d)) <= EXACT, (n, p, d)


def test_ne_perturbation_outside_support_leaves_law_unchanged() -> None:
    pmf = binomial_pmf(3, 0.4)
    law = ne_perturbation_law(pmf, 5)
    assert total_variation(law, pmf) <= EXACT


def test_ne_perturbation_rejects_degenerate_count() -> None:
    with pytest.raises(ValueError) as exc:
        ne_perturbation(point_mass(3), 3)
    assert "degenerate" in str(exc.value)


def test_ne_perturbation_moves_at_most_one_step() -> None:
    coupling = ne_perturbation(binomial_pmf(5, 0.3), 2)
    rng = np.random.default_rng(11)
    for _ in range(2000):
        m, shift = coupling.sample(rng)
        assert shift in (-1, 0, 1)
        if m == 2:
            assert shift != 0


def test_step_up_law_requires_next_atom_in_support() -> None:
    with pytest.raises(ValueError) as exc:
        step_up_law(binomial_pmf(2, 0.5), 2)
    assert "must lie in the support" in str(exc.value)


def test_step_couplings_reject_non_log_concave_input() -> None:
    with pytest.raises(ValueError) as exc:
        step_up_coefficients(LatticePmf(0, [0.25, 0.25, 0.5]), 0)
    assert "log-concave" in str(exc.value)


def test_threshold_lift_joint_law_on_binomial_corpus() -> None:
    for n, p, pmf in _binomial_corpus():
        for d in range(0, n + 1):
            lift = ThresholdLift(pmf, d)
            joint = lift.joint_law()
            assert abs(sum(joint.values()) - 1.0) <= EXACT
            assert all(0 <= a <= d - pmf.lo for _, a in joint)
            assert total_variation(lift.sum_law(), conditional_ge(pmf, d)) <= EXACT, (n, p, d)


def test_threshold_lift_never_lowers_and_reaches_threshold() -> None:
    pmf = pb_pmf([0.2, 0.7, 0.4, 0.9])
    lift = ThresholdLift(pmf, 3)
    rng = np.random.default_rng(5)
    for _ in range(2000):
        m, a = lift.sample(rng)
        assert a >= 0
        assert m + a >= 3


def test_conditional_bernoulli_two_coins() -> None:
    sampler = ConditionalBernoulli([0.9, 0.1])
    states, probs = sampler.law(1)
    assert states == [(0,), (1,)]
    assert probs[0] == pytest.approx(81 / 82)

    rng = np.random.default_rng(3)
    draws = np.array([sampler.sample(1, rng) for _ in range(20000)])
    assert np.all(draws.sum(axis=1) == 1)
    assert draws[:, 0].mean() == pytest.approx(81 / 82, abs=0.01)


def test_conditional_bernoulli_level_probability_matches_poisson_binomial() -> None:
    p = [0.3, 0.6, 0.2, 0.8]
    sampler = ConditionalBernoulli(p)
    pmf = pb_pmf(p)
    for a in range(5):
        assert np.exp(sampler.log_level_prob(a)) == pytest.approx(pmf.prob(a), rel=1e-10)


def test_conditional_bernoulli_rejects_bad_level() -> None:
    with pytest.raises(ValueError) as exc:
        ConditionalBernoulli([0.5, 0.5]).sample(3, np.random.default_rng(0))
    assert "0 <= a <= 2" in str(exc.value)


def test_coupling_chain_rejects_non_monotone_states() -> None:
    states = (np.array([0, 0]), np.array([1, 0]), np.array([1, 1]))
    CouplingChain(np.array([0.5, 0.5]), states)
    broken = (np.array([0, 0, 0]), np.array([1, 0, 0]), np.array([0, 1, 1]))
    with pytest.raises(ValueError) as exc:
        CouplingChain(np.array([0.5, 0.5, 0.5]), broken)
    assert "dominate" in str(exc.value)


def test_monotone_chain_kernels_reproduce_level_laws() -> None:
    rng = np.random.default_rng(2024)
    for _ in range(10):
        m = int(rng.integers(2, 7))
        p = rng.uniform(0.05, 0.95, size=m)
        chain = MonotoneChain(p)
        assert len(chain.residuals) == m
        assert max(chain.residuals) <= EXACT
        for _ in range(200):
            sampled = chain.sample_chain(rng)
            assert len(sampled.states) == m + 1


def test_monotone_chain_uniform_levels_are_uniform() -> None:
    chain = MonotoneChain([0.5] * 4)
    for a in range(5):
        _, probs = chain.level_law(a)
        assert np.allclose(probs, probs[0])


def test_monotone_chain_segment_is_nested() -> None:
    chain = MonotoneChain([0.3, 0.6, 0.2, 0.8, 0.5])
    rng = np.random.default_rng(9)
    for _ in range(500):
        low, high = chain_segment(chain, 1, 4, rng)
        assert low.sum() == 1
        assert high.sum() == 4
        assert np.all(high >= low)


def test_monotone_chain_over_limit_is_rejected() -> None:
    with pytest.raises(ValueError) as exc:
        MonotoneChain(np.full(13, 0.3))
    assert "chain_exact_limit" in str(exc.value)


@pytest.mark.slow
def test_monotone_chain_matches_conditional_bernoulli_marginals() -> None:
    rng = np.random.default_rng(77)
    for _ in range(50):
        m = int(rng.integers(2, 9))
        p = rng.uniform(0.05, 0.95, size=m)
        chain = MonotoneChain(p)
        assert max(chain.residuals) <= EXACT
        level = 1
        states, probs = chain.level_law(level)
        counts = dict.fromkeys(states, 0)
        draws = 10**4
        for _ in range(draws):
            path = chain.sample_path(0, m, rng)
            for earlier, later in zip(path, path[1:]):
                assert np.all(later >= earlier)
            counts[tuple(int(k) for k in np.flatnonzero(path[level]))] += 1
        freq = np.array([counts[state] for state in states]) / draws
        assert 0.5 * np.abs(freq - probs).sum() <= 0.05


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(min_value=0.01, max_value=0.99), min_size=1, max_size=12),
    st.integers(min_value=-1, max_value=13),
)
def test_step_coefficients_lie_in_unit_interval(p, d) -> None:
    pmf = pb_pmf(p)
    coeffs = step_up_coefficients(pmf, d)
    assert np.all(coeffs.values >= 0.0)
    assert np.all(coeffs.values <= 1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(min_value=0.01, max_value=0.99), min_size=2, max_size=20))
def test_raw_step_coefficients_stay_below_one_before_clamping(p) -> None:
    pmf = pb_pmf(p)
    probs = pmf.probs
    tails = upper_tails(probs)
    for d in range(pmf.lo, pmf.hi):
        xs = np.arange(d, pmf.hi)
        raw = tails[xs + 1] * probs[d] / (tails[d + 1] * probs[xs])
        assert np.all(raw <= 1.0 + COEFFICIENT_TOLERANCE)
        assert np.allclose(step_up_coefficients(pmf, d).values[xs], np.clip(raw, 0.0, 1.0), rtol=1e-12, atol=0.0)
