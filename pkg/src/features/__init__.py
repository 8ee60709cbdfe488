from .evolution import InitialData, Trajectory, sample_trajectory
from .observables import estimate_constant, hardy_check, observability_report

__all__ = [
    "InitialData",
    "Trajectory",
    "sample_trajectory",
    "estimate_constant",
    "hardy_check",
    "observability_report",
]
