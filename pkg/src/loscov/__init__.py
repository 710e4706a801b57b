"""Spatially consistent LOS blockage and LOS coverage for vehicular networks."""

__version__ = "0.1.0"

from .analytic import (los_prob_joint, los_prob_pair, los_prob_projected, los_prob_single,
                       los_prob_single_multilane)
from .config import ConfigError, load_scenario
from .coverage import (CoverageQuery, CoverageResult, NumericalBudgetError, full_coverage_prob,
                       k_los_prob, poisson_truncation)
from .experiments import ExperimentSpec, recipe, run_experiment, validate
from .model import (NoDetectableRegion, ObstacleSet, ProbEstimate, RadioParams, ScenarioParams,
                    TransmitterSet, detect_radius, is_blocked, project_lane, project_tx,
                    sample_obstacles, window_length)
from .simulate import (SimConfig, SimEstimate, sim_coverage, sim_ergodic_los, sim_joint_los,
                       sim_los_single, sim_volume_fraction)

__all__ = [
    "ConfigError", "CoverageQuery", "CoverageResult", "ExperimentSpec", "NoDetectableRegion", "NumericalBudgetError",
    "ObstacleSet", "ProbEstimate", "RadioParams", "ScenarioParams", "SimConfig", "SimEstimate",
    "TransmitterSet", "detect_radius", "full_coverage_prob", "is_blocked", "k_los_prob",
    "load_scenario", "los_prob_joint", "los_prob_pair", "los_prob_projected", "los_prob_single",
    "los_prob_single_multilane", "poisson_truncation", "project_lane", "project_tx",
    "recipe", "run_experiment", "sample_obstacles", "sim_coverage", "sim_ergodic_los", "sim_joint_los", "sim_los_single",
    "sim_volume_fraction", "validate", "window_length",
]
