"""Unbiased Monte Carlo for functionals of parabolic PDEs with random drift."""

from .brownian import DyadicPath, antithetic_swap, coarsen, levy_proxy, sample_path
from .estimators import (GeometricLaw, WSample, ZSample, biased_baseline_w, biased_baseline_z,
                         nested_delta, rho, sample_geometric, unbiased_w, unbiased_z)
from .field import FieldRealization, FieldSpec, drift_eval, realize, truncation_size
from .params import ParamSet, derive_parameters, override_parameters
from .problems import example2_problem, load_problem, ou_conditional_mean, ou_nu_quadrature, \
    ou_problem
from .scheme import Problem, SchemeResult, delta_gen, num_sol
from .streams import CopyStreams, StreamFactory

__version__ = "0.1.0"
