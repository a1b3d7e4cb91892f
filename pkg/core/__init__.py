"""Core size-bias coupling and concentration package."""

from .lattice import (
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
    tail_ge,
    tail_le,
    total_variation,
)
from .couplings import (
    ConditionalBernoulli,
    CouplingChain,
    MonotoneChain,
    ThresholdLift,
    conditional_bernoulli,
    lift_to_threshold,
    monotone_chain,
    ne_perturbation,
    ne_perturbation_law,
    pi_coeff,
    rho_coeff,
    step_down_law,
    step_up_law,
)
from .bounds import (
    BoundParams,
    TailBoundReport,
    bernstein_tail,
    certifiable_tails,
    complement_bounds,
    crossover,
    left_tail_gauss,
    mcdiarmid_er_tail,
    mcdiarmid_tail,
    negative_association_tail,
    right_tail_basic,
    sub_poisson_tail,
    tabulate_bounds,
)
from .params import ModelSpec, load_model_config, model_from_config, model_to_config, validate_model, validate_model_config
from .model import (
    coupling_constant,
    effective_coupling_constant,
    marginal_pmf,
    mean_estimate,
    mean_ge,
    mean_ne,
    reduce_statistic,
    sigma_d,
)
from .solver import CoupledSample, SizeBiasSampler, sample_configuration, sample_pairs, sample_size_bias_pair, statistic
from .results import Report, export_report
from .verify import (
    EmpiricalTail,
    audit_chain,
    audit_coupling,
    audit_domination,
    audit_mean,
    brute_force_law,
    empirical_tail,
    exact_size_bias_law,
    verify_model,
)

__all__ = [
    "GappedPmf",
    "LatticePmf",
    "binomial_pmf",
    "conditional_ge",
    "conditional_le",
    "conditional_ne",
    "hazard",
    "hypergeometric_pmf",
    "is_log_concave",
    "pb_pmf",
    "point_mass",
    "prob_eq",
    "prob_ne",
    "tail_ge",
    "tail_le",
    "total_variation",
    "ConditionalBernoulli",
    "CouplingChain",
    "MonotoneChain",
    "ThresholdLift",
    "conditional_bernoulli",
    "lift_to_threshold",
    "monotone_chain",
    "ne_perturbation",
    "ne_perturbation_law",
    "pi_coeff",
    "rho_coeff",
    "step_down_law",
    "step_up_law",
    "BoundParams",
    "TailBoundReport",
    "bernstein_tail",
    "certifiable_tails",
    "complement_bounds",
    "crossover",
    "left_tail_gauss",
    "mcdiarmid_er_tail",
    "mcdiarmid_tail",
    "negative_association_tail",
    "right_tail_basic",
    "sub_poisson_tail",
    "tabulate_bounds",
    "ModelSpec",
    "load_model_config",
    "model_from_config",
    "model_to_config",
    "validate_model",
    "validate_model_config",
    "coupling_constant",
    "effective_coupling_constant",
    "marginal_pmf",
    "mean_estimate",
    "mean_ge",
    "mean_ne",
    "reduce_statistic",
    "sigma_d",
    "CoupledSample",
    "SizeBiasSampler",
    "sample_configuration",
    "sample_pairs",
    "sample_size_bias_pair",
    "statistic",
    "Report",
    "export_report",
    "EmpiricalTail",
    "audit_chain",
    "audit_coupling",
    "audit_domination",
    "audit_mean",
    "brute_force_law",
    "empirical_tail",
    "exact_size_bias_law",
    "verify_model",
]
