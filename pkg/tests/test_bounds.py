import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.bounds import (
    BoundParams,
    bernstein_tail,
    certifiable_tails,
    complement_bounds,
    crossover,
    evaluate_bound,
    left_tail_gauss,
    mcdiarmid_er_tail,
    mcdiarmid_tail,
    negative_association_tail,
    right_tail_basic,
    sub_poisson_log,
    sub_poisson_log_h,
    sub_poisson_tail,
    tabulate_bounds,
)


def _baseline_params(t: float = 1.0) -> BoundParams:
    return BoundParams(mu=1.0, c=1.0, t=t)


def test_sub_poisson_right_tail_at_unit_parameters() -> None:
    assert sub_poisson_tail(_baseline_params(), "right") == pytest.approx(math.e / 4, rel=1e-12)


def test_sub_poisson_left_tail_vanishes_beyond_mean() -> None:
    assert sub_poisson_tail(BoundParams(mu=2.0, c=1.0, t=2.5), "left") == 0.0
    assert sub_poisson_log(BoundParams(mu=2.0, c=1.0, t=2.5), "left") == -math.inf


def test_sub_poisson_log_forms_agree() -> None:
    for mu in (0.5, 3.0, 40.0):
        for c in (1.0, 2.5):
            for t in np.linspace(0.0, 0.99 * mu, 7):
                params = BoundParams(mu=mu, c=c, t=float(t))
                for side in ("left", "right"):
                    assert sub_poisson_log(params, side) == pytest.approx(
                        sub_poisson_log_h(params, side), rel=1e-10, abs=1e-12
                    )


def test_bound_ordering_on_a_lattice() -> None:
    for mu in (0.5, 2.0, 10.0, 100.0):
        for c in (1.0, 3.0):
            for t in np.linspace(0.0, 3.0 * mu, 13):
                params = BoundParams(mu=mu, c=c, t=float(t))
                poisson = sub_poisson_tail(params, "right")
                bern = bernstein_tail(params, "right")
                basic = right_tail_basic(params)
                assert poisson <= bern + 1e-12
                assert bern <= basic + 1e-12
                assert sub_poisson_tail(params, "left") <= left_tail_gauss(params) + 1e-12
                assert sub_poisson_tail(params, "left") <= bernstein_tail(params, "left") + 1e-12


def test_bounds_equal_one_at_zero_deviation() -> None:
    params = BoundParams(mu=5.0, c=2.0, t=0.0)
    assert left_tail_gauss(params) == 1.0
    assert right_tail_basic(params) == 1.0
    assert sub_poisson_tail(params, "right") == 1.0
    assert bernstein_tail(params, "left") == 1.0


def test_negative_association_tail_is_unit_constant_sub_poisson() -> None:
    assert negative_association_tail(1.0, 1.0) == pytest.approx(math.e / 4)


def test_mcdiarmid_er_form() -> None:
    for m in (2, 5, 20):
        for t in (0.5, 3.0, 12.0):
            expected = math.exp(-t**2 / (m * (m - 1)))
            assert mcdiarmid_er_tail(m, t) == pytest.approx(expected, rel=1e-12)


def test_mcdiarmid_rejects_bad_inputs() -> None:
    with pytest.raises(ValueError) as exc:
        mcdiarmid_tail([0.0, 0.0], -1.0)
    message = str(exc.value)
    assert "not all zero" in message
    assert "t must be >= 0" in message

    with pytest.raises(ValueError) as exc:
        mcdiarmid_er_tail(1, 1.0)
    assert "m must be >= 2" in str(exc.value)


def test_bernstein_and_mcdiarmid_cross_at_forty_five() -> None:
    roots = crossover(
        lambda t: bernstein_tail(BoundParams(mu=10.0, c=1.0, t=t)),
        lambda t: mcdiarmid_tail(np.ones(100), t),
        (1.0, 90.0),
    )
    assert len(roots) == 1
    assert roots[0] == pytest.approx(45.0, abs=0.5)


def test_crossover_rejects_empty_range() -> None:
    with pytest.raises(ValueError) as exc:
        crossover(lambda t: t, lambda t: 1.0, (2.0, 2.0))
    assert "start < stop" in str(exc.value)


def test_er_gauss_left_beats_mcdiarmid_for_small_thresholds() -> None:
    for m in range(9, 31):
        for d in range(0, (m - 3) // 2 + 1):
            for t in np.linspace(0.5, float(m), 9):
                params = BoundParams(mu=float(m), c=float(d + 1), t=float(t))
                assert left_tail_gauss(params) <= mcdiarmid_er_tail(m, float(t)) + 1e-12, (m, d, t)


def test_certifiable_tails() -> None:
    assert certifiable_tails(1.0, 1.0, 0.0, 5.0, 0.0) == (1.0, 1.0)
    left, right = certifiable_tails(1.0, 1.0, 0.0, 5.0, 2.0)
    assert left == pytest.approx(math.exp(-4.0 / (2.0 * (5.0 + 2.0 / 3.0))))
    assert right == pytest.approx(math.exp(-4.0 / (2.0 * 7.0)))

    with pytest.raises(ValueError) as exc:
        certifiable_tails(0.0, -1.0, 0.0, 1.0, 1.0)
    assert "c must be > 0" in str(exc.value)
    assert "a must be >= 0" in str(exc.value)


def test_bound_params_collects_all_errors() -> None:
    with pytest.raises(ValueError) as exc:
        BoundParams(mu=0.0, c=-1.0, t=-2.0)
    message = str(exc.value)
    assert "mu must be > 0" in message
    assert "c must be > 0" in message
    assert "t must be >= 0" in message


def test_evaluate_bound_rejects_uncovered_side() -> None:
    with pytest.raises(ValueError) as exc:
        evaluate_bound("gauss", "right", _baseline_params())
    assert "does not cover the right tail" in str(exc.value)

    with pytest.raises(ValueError) as exc:
        evaluate_bound("chernoff", "right", _baseline_params())
    assert "unknown bound family" in str(exc.value)


def test_tabulate_bounds_rows() -> None:
    report = tabulate_bounds(4.0, 2.0, [0.0, 1.0, 2.0], metadata={"model": "desk"})
    rows = report.rows()
    assert len(rows) == 3 * 6
    assert rows[0]["t"] == 0.0
    assert {row["bound"] for row in rows} == {"gauss", "basic", "sub_poisson", "bernstein"}
    assert all(row["mu"] == 4.0 and row["c"] == 2.0 for row in rows)
    assert report.metadata == {"model": "desk"}

    only = tabulate_bounds(4.0, 2.0, [1.0], families=["gauss"])
    assert list(only.values) == [("gauss", "left")]

    with pytest.raises(ValueError):
        tabulate_bounds(4.0, 2.0, [1.0], families=["chernoff"])


def test_tabulate_bounds_with_empty_grid_has_no_rows() -> None:
    assert tabulate_bounds(1.0, 1.0, []).rows() == []


def test_complement_bounds_swaps_sides() -> None:
    report = tabulate_bounds(4.0, 2.0, [1.0, 2.0])
    flipped = complement_bounds(report, 10.0)
    assert flipped.mu == pytest.approx(6.0)
    assert np.array_equal(flipped.values[("gauss", "right")], report.values[("gauss", "left")])
    assert np.array_equal(flipped.values[("basic", "left")], report.values[("basic", "right")])
    assert flipped.metadata["complement_total"] == 10.0

    with pytest.raises(ValueError) as exc:
        complement_bounds(report, 3.0)
    assert "total must be >= mu" in str(exc.value)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(min_value=1e-3, max_value=1e4),
    st.floats(min_value=0.5, max_value=50.0),
    st.floats(min_value=0.0, max_value=1e4),
)
def test_bounds_are_probabilities(mu, c, t) -> None:
    params = BoundParams(mu=mu, c=c, t=t)
    for side in ("left", "right"):
        for value in (sub_poisson_tail(params, side), bernstein_tail(params, side)):
            assert 0.0 <= value <= 1.0
    assert 0.0 <= left_tail_gauss(params) <= 1.0
    assert 0.0 <= right_tail_basic(params) <= 1.0
