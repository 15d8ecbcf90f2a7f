from core.bench.runner import (
    COMMANDS, RunResult, run_ablation, run_benchmark, run_rcr_comparison, run_theta_sweep, stage,
)

__all__ = [
    "COMMANDS", "RunResult", "run_ablation", "run_benchmark", "run_rcr_comparison", "run_theta_sweep", "stage",
]
