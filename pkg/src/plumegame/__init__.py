"""Multi-agent air pollution simulator.

Emission source controllers play an evolutionary N-person prisoner's
dilemma; a Gaussian plume model disperses what they emit, neural
forecasters predict the coming concentrations and air quality, and the
forecast feeds back as rewards, penalties or directives depending on the
chosen regulation strategy.
"""

__version__ = "0.1.0"

from .domain import (
    Pollutant,
    ScenarioConfig,
    Source,
    Strategy,
    appreciation,
    classify_air_quality,
    load_scenario,
    validate_scenario,
)
from .engine import ForecastModels, Metrics, Simulation, Trajectory, compute_metrics, run

__all__ = [
    "__version__",
    "Pollutant",
    "ScenarioConfig",
    "Source",
    "Strategy",
    "appreciation",
    "classify_air_quality",
    "load_scenario",
    "validate_scenario",
    "ForecastModels",
    "Metrics",
    "Simulation",
    "Trajectory",
    "compute_metrics",
    "run",
]
