from __future__ import annotations

__version__ = "0.1.0"

from .logger import logs, set_verbosity
from .errors import *
from .converter_core import *
from .convertutil import add_converter, ConvertStatic
from .experimentlib import ExperimentCommand, ExperimentLibrary, ExperimentKind, ExpParam, ExpParamSpec
from .oracle import (
    FunctionPairOracle,
    QueryOracle,
    RngStream,
    TruthBundle,
    closeness_audit,
    draw_gaussian,
    make_pair,
    reset_counter,
)
from .smoothing import (
    Estimate,
    SmoothingConfig,
    fpsgd_grad_estimate,
    grad_estimate,
    grad_estimate_with_error,
    grad_sample,
    gradient_bound,
    hessian_bound,
    smoothed_hessian_estimate,
    smoothed_hessian_with_error,
    smoothed_value_estimate,
    subgaussian_tail_audit,
    variance_scaling,
    verify_smoothing_bounds,
)
from .stationarity import (
    StationarityReport,
    check_sosp,
    finite_diff_grad,
    finite_diff_hessian,
    hessian_from_grad,
    hvp_from_grad,
    min_eig_matrix_free,
)
from .optim import (
    OptimizerConfig,
    RunRecord,
    attach_terminal,
    default_config,
    exact_gradient_sampler,
    fpsgd,
    gaussian_noise_sampler,
    gd_baseline,
    psgd,
    zpsgd,
)
from . import hardfn, relu, expsearch, benchmarks
from .expsearch import exhaustive_sosp_search
from .benchmarks import Benchmark, build_benchmark
from .harness import ExperimentSpec, SospExperiments, emit_landscape_grid, run
