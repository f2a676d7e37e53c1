"""Shared vocabulary of the simulator.

Pollutants, point sources, grid boxes, environment state, air-quality
bands and the scenario configuration (with its plain-text file loader).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

log = logging.getLogger(__name__)


class Pollutant(Enum):
    PM10 = "pm10"
    SOX = "sox"
    NOX = "nox"
    CO = "co"
    O3 = "o3"


#: Canonical column order used by dataset files, concentration arrays and CSVs.
POLLUTANT_ORDER = (Pollutant.PM10, Pollutant.SOX, Pollutant.NOX, Pollutant.CO, Pollutant.O3)

#: Pollutants a source may emit.  O3 is secondary (photochemical), never emitted.
EMITTED_POLLUTANTS = (Pollutant.PM10, Pollutant.SOX, Pollutant.NOX, Pollutant.CO)


class Strategy(Enum):
    EG_CP = "eg-cp"    # evolutionary game, cumulative penalty
    EG_NCP = "eg-ncp"  # evolutionary game, per-step penalty
    EG_NP = "eg-np"    # evolutionary game, no penalty
    CS = "cs"          # centralized authority
    NC = "nc"          # no cooperation, everyone defects


# Upper band edges in ug/m3 for bands 1..4; band 5 is unbounded above.
# Intervals are half-open [lo, hi): a value equal to an edge falls in the
# next band up.  CO has no band and never enters the index.
AQ_BAND_EDGES: dict[Pollutant, tuple[float, ...]] = {
    Pollutant.SOX: (30.0, 60.0, 125.0, 250.0),
    Pollutant.NOX: (45.0, 80.0, 200.0, 400.0),
    Pollutant.O3: (45.0, 80.0, 150.0, 270.0),
    Pollutant.PM10: (20.0, 40.0, 100.0, 200.0),
}

AQ_LABELS = {1: "Very Good", 2: "Good", 3: "Average", 4: "Bad", 5: "Very Bad"}

#: Box edge length in metres (each box is one cubic kilometre).
BOX_EDGE_M = 1000.0


def pollutant_sub_index(pollutant: Pollutant, concentration: float) -> int:
    """Band index 1..5 for a single pollutant concentration."""
    if concentration < 0:
        raise ValueError(f"negative concentration for {pollutant.value}: {concentration}")
    edges = AQ_BAND_EDGES[pollutant]
    for i, edge in enumerate(edges):
        if concentration < edge:
            return i + 1
    return 5


def classify_air_quality(concentrations: Mapping[Pollutant, float]) -> int:
    """Overall air-quality index: the worst per-pollutant band.

    Requires SOx, NOx, O3 and PM10 concentrations (ug/m3, all >= 0);
    CO is ignored because it carries no band.
    """
    index = 1
    for pollutant in AQ_BAND_EDGES:
        if pollutant not in concentrations:
            raise ValueError(f"missing concentration for {pollutant.value}")
        index = max(index, pollutant_sub_index(pollutant, concentrations[pollutant]))
    return index


def appreciation(index: int) -> float:
    """Numeric appreciation of an air-quality index, strictly decreasing in it."""
    if index not in AQ_LABELS:
        raise ValueError(f"air-quality index out of range 1..5: {index}")
    return float(6 - index)


@dataclass(frozen=True)
class Source:
    """A point emitter of one pollutant."""

    id: int
    pollutant: Pollutant
    emission_rate: float  # g/h
    position: tuple[float, float, float]  # metres
    stack_height: float  # metres
    max_rate: float  # g/h

    def __post_init__(self):
        if self.pollutant is Pollutant.O3:
            raise ValueError("O3 is a secondary pollutant; no source may emit it")
        if not 0.0 <= self.emission_rate <= self.max_rate:
            raise ValueError(
                f"source {self.id}: emission rate {self.emission_rate} outside [0, {self.max_rate}]"
            )


@dataclass(frozen=True)
class GridBox:
    """One cubic-kilometre cell of the world."""

    id: int
    origin: tuple[float, float, float]  # metres
    edge: float = BOX_EDGE_M
    member_sources: tuple[int, ...] = ()

    @property
    def centre(self) -> tuple[float, float, float]:
        return (self.origin[0] + self.edge / 2.0, self.origin[1] + self.edge / 2.0, 0.0)


@dataclass(frozen=True, eq=False)
class EnvState:
    """Climate plus per-box concentrations for one step."""

    step: int
    wind_speed: float  # m/s, > 0
    wind_direction: float  # radians, fixed within a step
    temperature: float  # degrees C
    humidity: float  # percent
    rainfall: float  # mm
    concentrations: np.ndarray  # (n_boxes, 5) ug/m3, POLLUTANT_ORDER columns
    aq_index: int

    def __post_init__(self):
        if self.wind_speed <= 0:
            raise ValueError(f"wind speed must be > 0, got {self.wind_speed}")
        if np.any(self.concentrations < 0):
            raise ValueError("concentrations must be >= 0")
        if self.aq_index not in AQ_LABELS:
            raise ValueError(f"air-quality index out of range 1..5: {self.aq_index}")

    def mean_concentrations(self) -> np.ndarray:
        """Per-pollutant mean over boxes, POLLUTANT_ORDER."""
        return self.concentrations.mean(axis=0)


def build_grid(num_boxes: int) -> tuple[GridBox, ...]:
    """Boxes tiled on a horizontal strip, one km per cell, along +x."""
    return tuple(
        GridBox(id=i, origin=(i * BOX_EDGE_M, 0.0, 0.0)) for i in range(num_boxes)
    )


def box_of_position(position: tuple[float, float, float], num_boxes: int) -> int:
    """Index of the strip box containing a world position."""
    x, y, _ = position
    if not (0.0 <= x < num_boxes * BOX_EDGE_M and 0.0 <= y < BOX_EDGE_M):
        raise ValueError(f"position {position} outside the {num_boxes}-box strip")
    return int(x // BOX_EDGE_M)


@dataclass(frozen=True)
class ScenarioConfig:
    """All simulation parameters, defaults matching the reference scenario."""

    num_pm10_sources: int = 100
    num_sox_sources: int = 100
    num_nox_sources: int = 100
    num_co_sources: int = 100
    max_emission_rate: float = 2000.0  # g/h
    goal_pm10_level: float = 20.0  # ug/m3
    goal_sox_level: float = 30.0
    goal_nox_level: float = 45.0
    goal_o3_level: float = 45.0
    goal_aq_index: int = 1
    memory_steps: int = 4  # L, ring length of per-agent history
    initial_cooperator_proportion: float = 0.5
    num_boxes: int = 20
    temperature_t0: float = 12.7  # degrees C
    humidity_t0: float = 71.0  # percent
    wind_speed_t0: float = 2.4  # m/s
    pm10_t0: float = 13.0  # ug/m3
    sox_t0: float = 17.0
    nox_t0: float = 2.0
    co_t0: float = 0.5
    o3_t0: float = 29.0
    aq_index_t0: int = 2
    total_hours: float = 4900.0
    step_hours: float = 2.0
    prediction_horizon_hours: float = 2.0
    strategy: Strategy = Strategy.EG_CP
    payoff_b: float = 2.0
    payoff_c: float = -0.5
    seed: int = 1
    action_step_fraction: float = 0.1  # multiplicative emission change per action
    initial_emission_fraction: float = 0.8  # of max_emission_rate at t=0
    stack_height: float = 18.0  # metres, all sources
    wind_direction: float = 0.0  # radians; 0 blows along the strip's long axis

    @property
    def num_steps(self) -> int:
        return int(round(self.total_hours / self.step_hours))

    def source_counts(self) -> dict[Pollutant, int]:
        return {
            Pollutant.PM10: self.num_pm10_sources,
            Pollutant.SOX: self.num_sox_sources,
            Pollutant.NOX: self.num_nox_sources,
            Pollutant.CO: self.num_co_sources,
        }

    def goal_levels(self) -> dict[Pollutant, float]:
        """Goal concentration per pollutant; CO has none."""
        return {
            Pollutant.PM10: self.goal_pm10_level,
            Pollutant.SOX: self.goal_sox_level,
            Pollutant.NOX: self.goal_nox_level,
            Pollutant.O3: self.goal_o3_level,
        }

    def initial_concentrations(self) -> dict[Pollutant, float]:
        return {
            Pollutant.PM10: self.pm10_t0,
            Pollutant.SOX: self.sox_t0,
            Pollutant.NOX: self.nox_t0,
            Pollutant.CO: self.co_t0,
            Pollutant.O3: self.o3_t0,
        }


_INT_FIELDS = {
    "num_pm10_sources", "num_sox_sources", "num_nox_sources", "num_co_sources",
    "goal_aq_index", "memory_steps", "num_boxes", "aq_index_t0", "seed",
}


def validate_scenario(raw: Mapping[str, object]) -> ScenarioConfig:
    """Build a ScenarioConfig from a raw mapping, filling defaults.

    Every violated invariant is reported by field name; all violations are
    collected into a single error.
    """
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown scenario keys: {', '.join(unknown)}")

    kwargs: dict[str, object] = {}
    problems: list[str] = []
    for key, value in raw.items():
        try:
            if key == "strategy":
                kwargs[key] = value if isinstance(value, Strategy) else Strategy(str(value).lower())
            elif key in _INT_FIELDS:
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        except (TypeError, ValueError):
            problems.append(f"{key}: cannot parse {value!r}")
    if problems:
        raise ValueError("invalid scenario: " + "; ".join(problems))

    cfg = ScenarioConfig(**kwargs)

    def check(ok: bool, message: str) -> None:
        if not ok:
            problems.append(message)

    check(cfg.memory_steps >= 2, f"memory_steps: memory length must be >= 2, got {cfg.memory_steps}")
    check(0.0 <= cfg.initial_cooperator_proportion <= 1.0,
          f"initial_cooperator_proportion: must lie in [0,1], got {cfg.initial_cooperator_proportion}")
    check(cfg.step_hours > 0, f"step_hours: must be > 0, got {cfg.step_hours}")
    if cfg.step_hours > 0:
        ratio = cfg.total_hours / cfg.step_hours
        check(abs(ratio - round(ratio)) < 1e-9 and ratio >= 1,
              f"total_hours: step length {cfg.step_hours} h must divide total time {cfg.total_hours} h")
    check(math.isfinite(cfg.payoff_b), f"payoff_b: must be finite, got {cfg.payoff_b}")
    check(math.isfinite(cfg.payoff_c), f"payoff_c: must be finite, got {cfg.payoff_c}")
    for name in ("num_pm10_sources", "num_sox_sources", "num_nox_sources", "num_co_sources"):
        check(getattr(cfg, name) >= 0, f"{name}: must be >= 0")
    check(cfg.max_emission_rate > 0, f"max_emission_rate: must be > 0, got {cfg.max_emission_rate}")
    for name in ("goal_pm10_level", "goal_sox_level", "goal_nox_level", "goal_o3_level"):
        check(getattr(cfg, name) > 0, f"{name}: must be > 0")
    check(cfg.goal_aq_index in AQ_LABELS, f"goal_aq_index: must be 1..5, got {cfg.goal_aq_index}")
    check(cfg.aq_index_t0 in AQ_LABELS, f"aq_index_t0: must be 1..5, got {cfg.aq_index_t0}")
    check(cfg.num_boxes >= 1, f"num_boxes: must be >= 1, got {cfg.num_boxes}")
    check(cfg.wind_speed_t0 > 0, f"wind_speed_t0: must be > 0, got {cfg.wind_speed_t0}")
    for name in ("pm10_t0", "sox_t0", "nox_t0", "co_t0", "o3_t0"):
        check(getattr(cfg, name) >= 0, f"{name}: must be >= 0")
    check(cfg.prediction_horizon_hours > 0,
          f"prediction_horizon_hours: must be > 0, got {cfg.prediction_horizon_hours}")
    check(0.0 < cfg.action_step_fraction < 1.0,
          f"action_step_fraction: must lie in (0,1), got {cfg.action_step_fraction}")
    check(0.0 <= cfg.initial_emission_fraction <= 1.0,
          f"initial_emission_fraction: must lie in [0,1], got {cfg.initial_emission_fraction}")
    check(cfg.stack_height >= 0, f"stack_height: must be >= 0, got {cfg.stack_height}")

    if problems:
        raise ValueError("invalid scenario: " + "; ".join(problems))

    # The classic payoff constraint; the reference scenario itself breaks it
    # (c = -0.5), so a breach is only worth a warning.
    n_group = max(min(cfg.source_counts().values()), 1)
    b, c = cfg.payoff_b, cfg.payoff_c
    if not (b > c > 0 and c > b / n_group):
        log.warning(
            "payoff constants b=%g, c=%g violate b > c > 0 and c > b/N (N=%d); accepted as configured",
            b, c, n_group,
        )
    return cfg


def scenario_to_text(config: ScenarioConfig) -> str:
    """Canonical key-value dump; parseable by load_scenario and stable enough
    to hash for comparing runs."""
    lines = []
    for f in fields(ScenarioConfig):
        value = getattr(config, f.name)
        if isinstance(value, Strategy):
            value = value.value
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario from a plain-text key-value file.

    Lines look like ``goal_pm10_level = 20``; blank lines and ``#`` comments
    are skipped.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        if key in raw:
            raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return validate_scenario(raw)
