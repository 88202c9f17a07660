from .gp import GpKernel, GpModel, gp_fit, gp_predict
from .eigen import EigenTask, eigen_solve, jacobi_eigh
from .synthetic import DurationModel, SyntheticTask, draw_duration, synthetic_evaluate

__all__ = [
    "GpKernel", "GpModel", "gp_fit", "gp_predict",
    "EigenTask", "eigen_solve", "jacobi_eigh",
    "DurationModel", "SyntheticTask", "draw_duration", "synthetic_evaluate",
]
