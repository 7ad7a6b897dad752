"""Structured greedy algorithms for smoothed linear contextual bandits."""

from .norms import NormFamily, NormSpec, norm_value, project_ball
from .estimator import SolverConfig, DesignBlock, estimate_parameter, puffer_transform
from .environments import Environment, EnvKind, GroundTruth, Mode, NoiseModel
from .agents import Algo, AgentConfig, RunTrace, run_baseline, run_multi, run_single

__version__ = "0.1.0"
