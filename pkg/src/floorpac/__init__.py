"""Data-dependent PAC-Bayesian certificates for floored, rounded and Langevin gradient methods."""

from .certifier import BoundReport, certify, compare_variants, random_label_curve, sweep_m
from .config import ConfigError, RunConfig, execute, load_config
from .datasets import Dataset, IndexSplit, synth_blobs
from .models import ModelArch, ModelObjective
from .optimizers import Schedule, TrajectoryLog, run
from .scalar_bounds import BoundBreakdown, CatoniParams, TheoremId

__version__ = "0.1.0"

__all__ = [
    "BoundBreakdown",
    "BoundReport",
    "CatoniParams",
    "ConfigError",
    "Dataset",
    "IndexSplit",
    "ModelArch",
    "ModelObjective",
    "RunConfig",
    "Schedule",
    "TheoremId",
    "TrajectoryLog",
    "certify",
    "compare_variants",
    "execute",
    "load_config",
    "random_label_curve",
    "run",
    "sweep_m",
    "synth_blobs",
]
