"""Q-cycle proton pump simulator: Pauli master equation on 8 binding sites coupled to shuttle diffusion."""
from .params import ModelParams
from .harness import run_trajectory, run_scan, ScanSpec

__all__ = ["ModelParams", "run_trajectory", "run_scan", "ScanSpec"]
