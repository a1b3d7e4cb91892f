import numpy as np
import pytest
from scipy.stats import binom, hypergeom

from core.model import (
    comparison_parameters,
    complement_statistic,
    component_means,
    coupling_constant,
    effective_coupling_constant,
    marginal_pmf,
    mean_estimate,
    mean_ge,
    mean_ne,
    reduce_statistic,
    sigma_d,
)
from core.params import model_from_config


def _er(vertices: int = 6, edge_prob: float = 0.3, thresholds=2):
    return model_from_config(
        {"variant": "er_graph", "params": {"vertices": vertices, "edge_prob": edge_prob}, "thresholds": thresholds}
    )


def _volume_1d(radius: float = 1.5, thresholds=1):
    return model_from_config(
        {
            "variant": "gg_volume",
            "params": {"dimension": 1, "volume": 20.0, "radii": radius, "balls": 2},
            "thresholds": thresholds,
        }
    )


def test_er_mean_matches_binomial_tail() -> None:
    model = _er()
    assert mean_ge(model) == pytest.approx(6 * binom.sf(1, 5, 0.3), rel=1e-12)
    assert mean_estimate(model, "ge").error == 0.0


def test_multinomial_means_match_closed_forms() -> None:
    ge_model = model_from_config({"variant": "multinomial", "params": {"urns": 4, "balls": 6}, "thresholds": 2})
    assert mean_ge(ge_model) == pytest.approx(4 * binom.sf(1, 6, 0.25), rel=1e-12)

    ne_model = model_from_config({"variant": "multinomial", "params": {"urns": 4, "balls": 6}, "thresholds": 1})
    expected = 4 * (1 - 6 * 0.25 * 0.75**5)
    assert mean_ne(ne_model) == pytest.approx(expected, rel=1e-12)


def test_hypergeometric_mean_matches_scipy() -> None:
    model = model_from_config(
        {"variant": "hypergeometric", "params": {"counts": [3, 5, 2], "sample_size": 4}, "thresholds": 1}
    )
    expected = sum(hypergeom.sf(0, 10, count, 4) for count in (3, 5, 2))
    assert mean_ge(model) == pytest.approx(expected, rel=1e-10)


def test_gg_volume_mean_in_one_dimension() -> None:
    model = _volume_1d()
    n, rho = 20.0, 1.5
    estimate = mean_estimate(model, "ge")
    assert estimate.value == pytest.approx(n * (1 - (1 - 2 * rho / n) ** 2), rel=1e-12)
    assert estimate.error == 0.0


def test_component_means_reject_volume_model() -> None:
    with pytest.raises(ValueError) as exc:
        component_means(_volume_1d(), "ge")
    assert "use mean_estimate" in str(exc.value)


def test_marginal_pmf_of_er_vertex() -> None:
    pmf = marginal_pmf(_er(), 0)
    assert pmf.lo == 0
    assert pmf.hi == 5
    assert pmf.mean() == pytest.approx(1.5)

    with pytest.raises(ValueError) as exc:
        marginal_pmf(_er(), 6)
    assert "alpha must lie in [0, 6)" in str(exc.value)


def test_statistic_kind_is_checked() -> None:
    with pytest.raises(ValueError) as exc:
        mean_estimate(_er(), "gt")
    assert "statistic must be 'ge' or 'ne'" in str(exc.value)


def test_coupling_constants() -> None:
    assert coupling_constant(_er(thresholds=2), "ge") == 3.0
    assert coupling_constant(_er(thresholds=2), "ne") == 2.0

    neighbors = model_from_config(
        {"variant": "gg_neighbors", "params": {"dimension": 2, "volume": 400.0, "points": 8}, "thresholds": 1}
    )
    assert coupling_constant(neighbors, "ge") == 6.0

    volume = _volume_1d(radius=1.0)
    assert effective_coupling_constant(volume, "ge") == pytest.approx(2.0)
    assert effective_coupling_constant(volume, "ne") == pytest.approx(4.0)

    urns = model_from_config({"variant": "multinomial", "params": {"urns": 3, "balls": 4}, "weights": 2.5})
    assert coupling_constant(urns, "ge") == 2.5
    assert coupling_constant(urns, "ne") == 5.0


def test_kissing_constant_needs_override_above_three_dimensions() -> None:
    config = {"variant": "gg_neighbors", "params": {"dimension": 4, "volume": 2401.0, "points": 3}, "thresholds": 1}
    with pytest.raises(ValueError) as exc:
        coupling_constant(model_from_config(config), "ge")
    assert "supply params.kappa1" in str(exc.value)

    config["params"]["kappa1"] = 24
    assert coupling_constant(model_from_config(config), "ge") == 4.0


def test_sigma_d() -> None:
    assert sigma_d((3, 1, 2), 2) == 5
    assert sigma_d((3, 1, 2), 10) == 6
    with pytest.raises(ValueError) as exc:
        sigma_d((1,), 0)
    assert "kappa1 must be >= 1" in str(exc.value)


def test_reduction_moves_sure_indicators_into_offset() -> None:
    model = _er(vertices=5, thresholds=[0, 2, 9, 1, 2])
    ge = reduce_statistic(model, "ge")
    assert ge.offset == 1.0
    assert list(ge.active) == [1, 3, 4]

    ne = reduce_statistic(model, "ne")
    assert ne.offset == 1.0
    assert list(ne.active) == [0, 1, 3, 4]


def test_reduction_drops_empty_colors() -> None:
    model = model_from_config(
        {"variant": "hypergeometric", "params": {"counts": [2, 3, 0], "sample_size": 2}, "thresholds": 1}
    )
    reduction = reduce_statistic(model, "ge")
    assert list(reduction.active) == [0, 1]
    assert reduction.offset == 0.0


def test_complement_statistic_offset_is_total_weight() -> None:
    assert complement_statistic(_er(), "ge").offset == 6.0
    assert complement_statistic(_volume_1d(), "ge").offset == pytest.approx(20.0)


def test_comparison_parameters() -> None:
    er = comparison_parameters(_er(), "ge")
    assert er.mcdiarmid_c is not None
    assert len(er.mcdiarmid_c) == 15
    assert np.all(er.mcdiarmid_c == 2.0)
    assert er.certifiable == (2.0, 2.0, 0.0)
    assert not er.negative_association

    urns = model_from_config({"variant": "multinomial", "params": {"urns": 3, "balls": 4}, "thresholds": 1})
    assert comparison_parameters(urns, "ge").negative_association
    assert comparison_parameters(urns, "ne").certifiable == (2.0, 0.0, 4.0)
    assert np.all(comparison_parameters(urns, "ge").mcdiarmid_c == 1.0)
    assert np.all(comparison_parameters(urns, "ne").mcdiarmid_c == 2.0)
