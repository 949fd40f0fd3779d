from .engine import SimEngine
from .runner import run_scenario
from .scheduler import CostModel
from .scheduler import Scheduler
from .workload import Scenario

__version__ = "0.1.0"

__all__ = ["SimEngine", "Scheduler", "CostModel", "Scenario", "run_scenario"]
