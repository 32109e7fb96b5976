"""Threshold drift diagnostics for cost-sensitive transaction monitoring."""
from driftgate.dataset import Dataset, SynthSpec, generate_synthetic, ingest_elliptic
from driftgate.errors import ComputationError, InputError
from driftgate.kernels import BACKEND
from driftgate.metrics import CostSpec, optimal_threshold, oracle_threshold, pr_auc, roc_auc
from driftgate.protocols import ProtocolConfig, run_forward_split, run_random_split, run_recalibration, run_rolling
from driftgate.scoring import LogisticScorer, ScoredWindow

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ComputationError",
    "CostSpec",
    "Dataset",
    "InputError",
    "LogisticScorer",
    "ProtocolConfig",
    "ScoredWindow",
    "SynthSpec",
    "generate_synthetic",
    "ingest_elliptic",
    "optimal_threshold",
    "oracle_threshold",
    "pr_auc",
    "roc_auc",
    "run_forward_split",
    "run_random_split",
    "run_recalibration",
    "run_rolling",
]
