from .replay import Experience, ReplayBuffer
from .rules import RulesPolicy, droop_step
from .sac import ActionMap, SacConfig, SacLearner, SacPolicy, TrainMetrics

__all__ = [
    "ActionMap",
    "Experience",
    "ReplayBuffer",
    "RulesPolicy",
    "SacConfig",
    "SacLearner",
    "SacPolicy",
    "TrainMetrics",
    "droop_step",
]
