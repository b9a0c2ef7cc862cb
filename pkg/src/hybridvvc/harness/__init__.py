from .environment import DemandProfile, ScenarioConfig, VoltageControlEnv
from .compare import ComparisonReport, compare
from .plots import CsvFormatError, emit_plots, read_run_csv
from .runner import AgentConfig, Experiment, RunConfig, RunSummary, run

__all__ = [
    "AgentConfig",
    "ComparisonReport",
    "CsvFormatError",
    "DemandProfile",
    "Experiment",
    "RunConfig",
    "RunSummary",
    "ScenarioConfig",
    "VoltageControlEnv",
    "compare",
    "emit_plots",
    "read_run_csv",
    "run",
]
