"""Simulation and numerical verification of the functional limit theorem for
maxima of perturbed random walks."""

__version__ = "0.1.0"

from .core import (RETAIN_ALL, TOP, DomainError, PointMeasure, StepFunction, TailLaw,
                   step_eval, validate_measure)
from .functional import (F_path, TimeChange, build_time_change, eval_F,
                         modulus_of_continuity, skorokhod_upper_bound, theorem2_demo_instance)
from .limit import (LimitSample, coupled_comparison, sample_conjecture_rv, sample_limit,
                    sample_limit_path, sample_prm)
from .samplers import (RngStream, XiLaw, bridge_max_sample, sample_eta, sample_frechet,
                       sample_xi)
from .stats import (KsReport, frechet_cdf, ks_one_sample, ks_two_sample,
                    prob_conjecture_negative, quantiles)
from .walk import (WalkConfig, empirical_point_measure, perturbed_max_path,
                   scaled_walk_path)
