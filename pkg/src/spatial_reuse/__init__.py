"""Selfish multi-armed bandits for channel and transmit-power selection in WLANs."""
from .channel import Arm, ArmSpace, ChannelModel, LinkBudget, RadioParams
from .geometry import Deployment, ScenarioConfig, build_dynamic, build_grid, build_random
from .oracle import OracleResult, brute_force, empirical_regret
from .orchestrator import RunResult, run, run_concurrent, run_sequential, step_throughputs
from .policies import PolicyParams, PolicyState, make_policy

__all__ = [
    "Arm", "ArmSpace", "ChannelModel", "LinkBudget", "RadioParams",
    "Deployment", "ScenarioConfig", "build_dynamic", "build_grid", "build_random",
    "OracleResult", "brute_force", "empirical_regret",
    "RunResult", "run", "run_concurrent", "run_sequential", "step_throughputs",
    "PolicyParams", "PolicyState", "make_policy",
]
