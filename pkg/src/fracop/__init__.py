"""Fractional-calculus numerics: GL, RL, Caputo, Laplace-domain and l1 derivatives."""
from .core_types import (
    DiracTerm,
    DistributionalSignal,
    ExprSource,
    FracOrder,
    Grid,
    SampledSource,
    distributional_add,
    from_csv,
    max_regular_diff,
    to_csv,
)
from .ell1 import (
    ell1_derivative,
    ell1_frac_derivative,
    ell1_linearity_check,
    ell1_second_derivative,
)
from .expression import parse
from .frac_gd import DescentConfig, Objective, descend, fractional_gradient, random_problem
from .gl import GLPlan, gl_derivative, gl_integral
from .laplace import (
    ClosedFormTransform,
    KernelOperator,
    LaplaceField,
    convolution_form,
    exponential_kernel_operator,
    forward_transform,
    invert_stehfest,
    invert_talbot,
    kernel_derivative,
    lt_derivative,
    power_kernel_operator,
    split_polynomial,
)
from .rl_caputo import caputo_derivative, power_rule_oracle, rl_derivative, rl_integral, semigroup_check
from .special import MLParams, beta_fn, gamma_fn, gen_binomial, mittag_leffler

__all__ = [
    "beta_fn",
    "caputo_derivative",
    "ClosedFormTransform",
    "convolution_form",
    "descend",
    "DescentConfig",
    "DiracTerm",
    "distributional_add",
    "DistributionalSignal",
    "ell1_derivative",
    "ell1_frac_derivative",
    "ell1_linearity_check",
    "ell1_second_derivative",
    "exponential_kernel_operator",
    "ExprSource",
    "forward_transform",
    "FracOrder",
    "fractional_gradient",
    "from_csv",
    "gamma_fn",
    "gen_binomial",
    "gl_derivative",
    "gl_integral",
    "GLPlan",
    "Grid",
    "invert_stehfest",
    "invert_talbot",
    "kernel_derivative",
    "KernelOperator",
    "LaplaceField",
    "lt_derivative",
    "max_regular_diff",
    "mittag_leffler",
    "MLParams",
    "Objective",
    "parse",
    "power_kernel_operator",
    "power_rule_oracle",
    "random_problem",
    "rl_derivative",
    "rl_integral",
    "SampledSource",
    "semigroup_check",
    "split_polynomial",
    "to_csv",
]
