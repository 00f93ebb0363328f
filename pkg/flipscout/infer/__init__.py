"""Parameter estimation for the pairwise model and its baselines."""

from flipscout.infer.base import FitConfig, FitReport, Penalty
from flipscout.infer.baselines import PoissonModel, fit_independent, fit_poisson, homogenize
from flipscout.infer.gaussian import DgParams, fit_dichotomized_gaussian, orthant_probability
from flipscout.infer.pseudolikelihood import fit_rpml, rpl_gradient, rpl_objective
from flipscout.infer.reversal import fit_reversal_pairwise

__all__ = [
    "DgParams",
    "FitConfig",
    "FitReport",
    "Penalty",
    "PoissonModel",
    "fit_dichotomized_gaussian",
    "fit_independent",
    "fit_poisson",
    "fit_rpml",
    "fit_reversal_pairwise",
    "homogenize",
    "orthant_probability",
    "rpl_gradient",
    "rpl_objective",
]
