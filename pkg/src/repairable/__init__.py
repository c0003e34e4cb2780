"""Repairable-systems reliability toolkit.

Event data, unit-mean renewal laws and frailties, trend-renewal,
virtual-age and log-linear modulated intensity models, exact likelihoods,
maximum-likelihood fitting of the eight-corner model cube, exact
simulation, trend tests, residual diagnostics and marked competing-risks
processes.
"""

from ._core import BACKEND
from .cube import CubeReport, fit_cube
from .distributions import (
    DegenerateFrailty,
    Exponential,
    Gamma,
    GammaFrailty,
    Lifetime,
    Weibull,
    frailty_quadrature,
    renewal_from_name,
)
from .errors import (
    DataError,
    DomainError,
    NumericalError,
    QuadratureError,
    RepairableError,
    StarvedProcessError,
)
from .events import EventDataset, SystemHistory, parse_dataset, superpose, write_dataset
from .fitting import FitResult, ModelFamily, fit, lr_test
from .likelihood import LogLikelihoodReport, loglik, loglik_gamma_frailty, loglik_htrp
from .models import LogLinearModulatedModel, TRPModel, VirtualAgeModel, conditional_intensity
from .simulation import SimulationPlan, simulate
from .trends import Constant, LogLinear, PowerLaw

__all__ = [
    "BACKEND",
    "Constant",
    "CubeReport",
    "DataError",
    "DegenerateFrailty",
    "DomainError",
    "EventDataset",
    "Exponential",
    "FitResult",
    "Gamma",
    "GammaFrailty",
    "Lifetime",
    "LogLikelihoodReport",
    "LogLinear",
    "LogLinearModulatedModel",
    "ModelFamily",
    "NumericalError",
    "PowerLaw",
    "QuadratureError",
    "RepairableError",
    "SimulationPlan",
    "StarvedProcessError",
    "SystemHistory",
    "TRPModel",
    "VirtualAgeModel",
    "Weibull",
    "conditional_intensity",
    "fit",
    "fit_cube",
    "frailty_quadrature",
    "loglik",
    "loglik_gamma_frailty",
    "loglik_htrp",
    "lr_test",
    "parse_dataset",
    "renewal_from_name",
    "simulate",
    "superpose",
    "write_dataset",
]

__version__ = "0.1.0"
