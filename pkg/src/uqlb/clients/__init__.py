from .lhs import ParameterBox, gs2_box, lhs_sample
from .runner import ExperimentPlan, run_experiment
from .qoi import QoIConfig, qoi_integral

__all__ = [
    "ParameterBox", "gs2_box", "lhs_sample",
    "ExperimentPlan", "run_experiment",
    "QoIConfig", "qoi_integral",
]
