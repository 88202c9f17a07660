from .spec import AllocationSpec, JobSpec, SimConfig, SimJobOutcome, load_sim_config, load_job_spec
from .sim import run_sim
from .process import ProcessBackend, ProcessJobHandle

__all__ = [
    "AllocationSpec", "JobSpec", "SimConfig", "SimJobOutcome",
    "load_sim_config", "load_job_spec", "run_sim",
    "ProcessBackend", "ProcessJobHandle",
]
