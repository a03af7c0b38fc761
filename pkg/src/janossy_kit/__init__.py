"""Finite determinantal chain ensembles on discretized spaces.

A chain ensemble places n particles on each of M ordered floors of one
discretized space, with a density built from determinants of cross-floor
couplings.  This package computes its correlation kernel in closed block
form, window statistics (Janossy densities, gap and counting probabilities,
extreme-value curves) along two independent routes, and checks every closed
form against brute-force enumeration oracles.
"""

from __future__ import annotations

from .chain_ensemble import (
    ChainEnsemble,
    ConvolutionTables,
    GramMatrix,
    chain_convolve,
    gram_matrix,
    left_convolve,
    marginal_ensemble,
    partition_function,
    right_convolve,
)
from .errors import BudgetExceededError, ConfigError, SingularOperatorError
from .janossy import (
    ExtremePoint,
    JanossyKernel,
    biorthogonal_janossy_recipe,
    count_probability,
    janossy_density,
    janossy_kernel_explicit,
    kth_extreme_distribution,
)
from .kernels import (
    BlockKernel,
    RestrictedOperator,
    correlation_function,
    correlation_kernel,
    dyson_mehta_check,
    export_kernel_csv,
    fredholm_det,
    kernel_to_json,
    resolvent_kernel,
    restrict,
)
from .measure_space import (
    DiscretizedSpace,
    Window,
    WindowFamily,
    complement,
    make_discrete,
    make_quadrature,
    window_family_from_json,
    window_from_json,
)
from .models import (
    ChainModelSpec,
    build_coupled_chain,
    build_karlin_mcgregor,
    build_model,
    build_random,
    build_unitary,
)
from .oracle import (
    EnumeratedDistribution,
    brute_correlation,
    brute_count_probability,
    brute_janossy,
    enumerate_density,
    quad_oracle_m1,
)
from .verify import SuiteReport, verify_suite

__version__ = "1.0.0"

__all__ = [
    "BlockKernel",
    "BudgetExceededError",
    "ChainEnsemble",
    "ChainModelSpec",
    "ConfigError",
    "ConvolutionTables",
    "DiscretizedSpace",
    "EnumeratedDistribution",
    "ExtremePoint",
    "GramMatrix",
    "JanossyKernel",
    "RestrictedOperator",
    "SingularOperatorError",
    "SuiteReport",
    "Window",
    "WindowFamily",
    "biorthogonal_janossy_recipe",
    "brute_correlation",
    "brute_count_probability",
    "brute_janossy",
    "build_coupled_chain",
    "build_karlin_mcgregor",
    "build_model",
    "build_random",
    "build_unitary",
    "chain_convolve",
    "complement",
    "correlation_function",
    "correlation_kernel",
    "count_probability",
    "dyson_mehta_check",
    "enumerate_density",
    "export_kernel_csv",
    "fredholm_det",
    "gram_matrix",
    "janossy_density",
    "janossy_kernel_explicit",
    "kernel_to_json",
    "kth_extreme_distribution",
    "left_convolve",
    "make_discrete",
    "make_quadrature",
    "marginal_ensemble",
    "partition_function",
    "quad_oracle_m1",
    "resolvent_kernel",
    "restrict",
    "right_convolve",
    "verify_suite",
    "window_family_from_json",
    "window_from_json",
]
