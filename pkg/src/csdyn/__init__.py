"""Dynamics of iterative thresholding algorithms for compressed sensing.

Simulates AMP, IST and ITA on random Gaussian instances and predicts their
MSE trajectories: scalar state evolution for AMP, and a Monte Carlo solution
of the dynamical mean-field (generating functional) equations for IST.
"""

__version__ = "0.1.0"

from .effective_process import GfaPrediction, gfa_predict
from .estimators import AMPRegressor, ISTRegressor
from .gfa_core import OrderParams
from .iterative import Trajectory, run
from .model import ProblemInstance, SignalPrior, make_instance
from .shrinkage import ThresholdSchedule, soft_threshold
from .state_evolution import se_run, se_step

__all__ = [
    "AMPRegressor",
    "GfaPrediction",
    "ISTRegressor",
    "OrderParams",
    "ProblemInstance",
    "SignalPrior",
    "ThresholdSchedule",
    "Trajectory",
    "gfa_predict",
    "make_instance",
    "run",
    "se_run",
    "se_step",
    "soft_threshold",
]
