"""Simulation engine.

Runs the per-step loop: agents act, emission rates move, the plume model
disperses, the forecasters predict the next horizon, exceedances are
penalized, rewards feed the learners, and a new environment state is
committed.  A Trajectory collects the per-step summaries that the metrics
and the CLI reports are built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .domain import (
    EMITTED_POLLUTANTS,
    POLLUTANT_ORDER,
    EnvState,
    GridBox,
    Pollutant,
    ScenarioConfig,
    Source,
    Strategy,
    appreciation,
    box_of_position,
    build_grid,
    classify_air_quality,
)
from .dispersion import PlumeTable
from .forecasting.mlp import MlpModel, predict_air_quality
from .forecasting.preprocess import TimeSeriesDataset
from .forecasting.rbf import FEATURES, RbfModel, predict_pollutant
from .game import (
    COOPERATE,
    DECREASE,
    DEFECT,
    HOLD,
    PavlovGroup,
    PayoffParams,
    PenaltyMode,
    central_directive,
)

#: Action code for the centralized strategy's "keep the current rate".
HOLD_CODE = 2

#: Wind speed floor (m/s): the plume model is undefined in a dead calm.
MIN_WIND_SPEED = 0.1

_PENALTY_BY_STRATEGY = {
    Strategy.EG_CP: PenaltyMode.CUMULATIVE,
    Strategy.EG_NCP: PenaltyMode.INSTANTANEOUS,
    Strategy.EG_NP: PenaltyMode.NONE,
}

_COLUMN = {p: i for i, p in enumerate(POLLUTANT_ORDER)}


@dataclass(frozen=True)
class ForecastModels:
    """The five pollutant regressors plus the index classifier."""

    rbf: dict[str, RbfModel]
    mlp: MlpModel

    def __post_init__(self):
        missing = [p for p in FEATURES if p not in self.rbf]
        if missing:
            raise ValueError(f"missing pollutant models: {', '.join(missing)}")

    @classmethod
    def load(cls, directory: str | Path) -> "ForecastModels":
        directory = Path(directory)
        rbf = {}
        for pollutant in FEATURES:
            path = directory / f"rbf_{pollutant}.json"
            if not path.exists():
                raise FileNotFoundError(f"missing model file {path}; run the train command first")
            rbf[pollutant] = RbfModel.load(path)
        mlp_path = directory / "mlp_aq.json"
        if not mlp_path.exists():
            raise FileNotFoundError(f"missing model file {mlp_path}; run the train command first")
        return cls(rbf=rbf, mlp=MlpModel.load(mlp_path))

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for pollutant, model in self.rbf.items():
            model.save(directory / f"rbf_{pollutant}.json")
        self.mlp.save(directory / "mlp_aq.json")


def apply_actions(rates: np.ndarray, actions: np.ndarray, fraction: float,
                  max_rate: float) -> np.ndarray:
    """New emission rates: decrease scales by (1-f), increase by (1+f),
    hold keeps the rate; everything clamps to [0, max_rate]."""
    factor = np.where(
        actions == COOPERATE, 1.0 - fraction,
        np.where(actions == DEFECT, 1.0 + fraction, 1.0),
    )
    return np.clip(rates * factor, 0.0, max_rate)


@dataclass
class Trajectory:
    """Per-step summaries of one run."""

    strategy: Strategy
    seed: int
    step_hours: float
    goal_aq_index: int
    steps: np.ndarray  # (T,)
    aq_index: np.ndarray  # (T,) rule-based index of the current means
    predicted_aq: np.ndarray  # (T,) classifier forecast for t + horizon
    concentrations: np.ndarray  # (T, 5) mean over boxes, POLLUTANT_ORDER
    predicted_levels: np.ndarray  # (T, 5)
    coop_all: np.ndarray  # (T,)
    coop_by_pollutant: np.ndarray  # (T, 4), EMITTED_POLLUTANTS order
    cumulative_rewards: np.ndarray  # (T, n_agents)
    exceedance: np.ndarray  # (T, 5) any-box exceedance per pollutant

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def hours(self) -> np.ndarray:
        return self.steps * self.step_hours


class Simulation:
    """One run's world: sources, grid, learners and the current state."""

    def __init__(self, config: ScenarioConfig, models: ForecastModels,
                 dataset: TimeSeriesDataset, strategy: Strategy | None = None,
                 seed: int | None = None):
        self.config = config
        self.models = models
        self.dataset = dataset
        self.strategy = strategy if strategy is not None else config.strategy
        self.seed = config.seed if seed is None else seed
        if len(dataset) < 2:
            raise ValueError("climate dataset is empty")

        position_seed, action_seed = np.random.SeedSequence(self.seed).spawn(2)
        rng_positions = np.random.Generator(np.random.PCG64(position_seed))
        self._rng_actions = np.random.Generator(np.random.PCG64(action_seed))

        counts = config.source_counts()
        total = sum(counts.values())
        xy = rng_positions.uniform(size=(total, 2))
        xy[:, 0] *= config.num_boxes * 1000.0
        xy[:, 1] *= 1000.0

        sources: list[Source] = []
        initial_rate = config.initial_emission_fraction * config.max_emission_rate
        next_id = 0
        self.groups: dict[Pollutant, _Group] = {}
        for pollutant in EMITTED_POLLUTANTS:
            indices = np.arange(next_id, next_id + counts[pollutant])
            for i in indices:
                sources.append(Source(
                    id=int(i),
                    pollutant=pollutant,
                    emission_rate=initial_rate,
                    position=(float(xy[i, 0]), float(xy[i, 1]), 0.0),
                    stack_height=config.stack_height,
                    max_rate=config.max_emission_rate,
                ))
            next_id += counts[pollutant]
            box_ids = np.array([box_of_position(sources[i].position, config.num_boxes)
                                for i in indices], dtype=int)
            learners = None
            if self.strategy in _PENALTY_BY_STRATEGY and len(indices):
                learners = PavlovGroup(len(indices), config.memory_steps)
            self.groups[pollutant] = _Group(
                pollutant=pollutant,
                indices=indices,
                box_ids=box_ids,
                params=PayoffParams(config.payoff_b, config.payoff_c, max(len(indices), 1)),
                learners=learners,
            )

        self.sources = tuple(sources)
        bare_grid = build_grid(config.num_boxes)
        members: dict[int, list[int]] = {box.id: [] for box in bare_grid}
        for source in sources:
            members[box_of_position(source.position, config.num_boxes)].append(source.id)
        self.grid = tuple(
            GridBox(id=box.id, origin=box.origin, edge=box.edge,
                    member_sources=tuple(members[box.id]))
            for box in bare_grid
        )
        self.plume = PlumeTable(sources, self.grid, config.wind_direction) if sources else None
        self.rates = np.full(total, initial_rate)
        self.n_agents = total

        initial = config.initial_concentrations()
        self.o3_level = initial[Pollutant.O3]
        concentrations = np.tile(
            np.array([initial[p] for p in POLLUTANT_ORDER]), (config.num_boxes, 1)
        )
        self.env = EnvState(
            step=0,
            wind_speed=config.wind_speed_t0,
            wind_direction=config.wind_direction,
            temperature=config.temperature_t0,
            humidity=config.humidity_t0,
            rainfall=0.0,
            concentrations=concentrations,
            aq_index=config.aq_index_t0,
        )
        self.t = 0
        # Directive inputs and ozone state both come from forecasts once any
        # exist; until then the initial readings stand in.
        self._predicted_levels = {p: initial[p] for p in POLLUTANT_ORDER}
        self._predicted_aq = config.aq_index_t0
        self._pending_o3: list[tuple[float, float]] = []
        self._goals = config.goal_levels()
        self._cumulative = np.zeros(total)

    def _climate(self, step: int) -> tuple[float, float, float, float]:
        row = int(step * self.config.step_hours) % len(self.dataset)
        cols = self.dataset.columns
        ws = max(float(cols["ws"][row]), MIN_WIND_SPEED)
        return ws, float(cols["t"][row]), float(cols["hu"][row]), float(cols["rf"][row])

    def _choose_actions(self) -> np.ndarray:
        config = self.config
        actions = np.empty(self.n_agents, dtype=np.int8)
        if self.strategy is Strategy.NC:
            actions[:] = DEFECT
            return actions
        if self.strategy is Strategy.CS:
            commands = central_directive(
                self._predicted_levels, self._predicted_aq, self._goals, config.goal_aq_index
            )
            for pollutant, group in self.groups.items():
                actions[group.indices] = COOPERATE if commands[pollutant] == DECREASE else HOLD_CODE
            return actions
        for group in self.groups.values():
            learners = group.learners
            if learners is not None and learners.planned is not None:
                actions[group.indices] = learners.planned
            else:
                defect = self._rng_actions.random(len(group.indices)) < (
                    1.0 - config.initial_cooperator_proportion
                )
                actions[group.indices] = np.where(defect, DEFECT, COOPERATE)
        return actions

    def step(self) -> None:
        """Advance the world by one step."""
        config = self.config
        t = self.t + 1
        try:
            ws, temp, hu, rf = self._climate(t)

            actions = self._choose_actions()
            self.rates = apply_actions(self.rates, actions,
                                       config.action_step_fraction, config.max_emission_rate)

            if self.plume is not None:
                boxes = self.plume.concentrations(self.rates, ws)
            else:
                boxes = np.zeros((config.num_boxes, len(POLLUTANT_ORDER)))

            hour = t * config.step_hours
            matured = [value for target, value in self._pending_o3 if target <= hour]
            if matured:
                self.o3_level = matured[-1]
                self._pending_o3 = [(tg, v) for tg, v in self._pending_o3 if tg > hour]
            boxes[:, _COLUMN[Pollutant.O3]] = self.o3_level

            means = boxes.mean(axis=0)
            by_name = {p.value: means[_COLUMN[p]] for p in POLLUTANT_ORDER}
            climate = {"ws": ws, "t": temp, "hu": hu, "rf": rf}
            predicted = {}
            for pollutant in POLLUTANT_ORDER:
                model = self.models.rbf[pollutant.value]
                features = [climate[c] if c in climate else by_name[c]
                            for c in model.feature_names]
                predicted[pollutant] = predict_pollutant(model, features)
            predicted_aq = predict_air_quality(
                self.models.mlp, [predicted[p] for p in POLLUTANT_ORDER]
            )
            self._pending_o3.append((hour + config.prediction_horizon_hours,
                                     predicted[Pollutant.O3]))
            self._predicted_levels = predicted
            self._predicted_aq = predicted_aq

            exceed = np.zeros(len(POLLUTANT_ORDER), dtype=bool)
            for pollutant, goal in self._goals.items():
                col = _COLUMN[pollutant]
                exceed[col] = bool(np.any(boxes[:, col] > goal))

            step_rewards = np.zeros(self.n_agents)
            if self.strategy in _PENALTY_BY_STRATEGY:
                mode = _PENALTY_BY_STRATEGY[self.strategy]
                o3_goal = self._goals[Pollutant.O3]
                o3_margin = self.o3_level - o3_goal
                for pollutant, group in self.groups.items():
                    if not len(group.indices):
                        continue
                    learners = group.learners
                    member_actions = actions[group.indices]
                    member_rates = self.rates[group.indices]
                    defecting = member_actions == DEFECT
                    increments = np.zeros(len(group.indices))
                    goal = self._goals.get(pollutant)
                    if goal is not None:
                        levels = boxes[group.box_ids, _COLUMN[pollutant]]
                        charged = defecting & (levels > goal)
                        sigma = np.where(charged, member_rates / np.where(charged, levels - goal, 1.0), 0.0)
                        increments += np.where(charged, 1.0 - np.exp(-sigma), 0.0)
                    # Regional ozone exceedances are charged to the groups the
                    # forecaster links it to: its precursors SOx and CO.
                    if pollutant in (Pollutant.SOX, Pollutant.CO) and o3_margin > 0:
                        sigma_o3 = np.where(defecting, member_rates / o3_margin, 0.0)
                        increments += np.where(defecting, 1.0 - np.exp(-sigma_o3), 0.0)
                    learners.apply_penalties(increments, mode)

                    ncp = int((member_actions == COOPERATE).sum())
                    base = group.params.b * ncp / group.params.n
                    rewards = np.where(member_actions == COOPERATE,
                                       base - group.params.c,
                                       base - learners.eco_factor)

                    box_sums = np.zeros(config.num_boxes)
                    np.add.at(box_sums, group.box_ids, rewards)
                    box_counts = np.bincount(group.box_ids, minlength=config.num_boxes)
                    counts = box_counts[group.box_ids]
                    neighbor = np.where(
                        counts > 1,
                        (box_sums[group.box_ids] - rewards) / np.maximum(counts - 1, 1),
                        0.0,
                    )
                    learners.record(member_actions, rewards, neighbor)
                    step_rewards[group.indices] = rewards

            aq = classify_air_quality({
                Pollutant.PM10: means[_COLUMN[Pollutant.PM10]],
                Pollutant.SOX: means[_COLUMN[Pollutant.SOX]],
                Pollutant.NOX: means[_COLUMN[Pollutant.NOX]],
                Pollutant.O3: means[_COLUMN[Pollutant.O3]],
            })
            self.env = EnvState(
                step=t, wind_speed=ws, wind_direction=config.wind_direction,
                temperature=temp, humidity=hu, rainfall=rf,
                concentrations=boxes, aq_index=aq,
            )
            self.t = t
            self._cumulative = self._cumulative + step_rewards
            self._last_actions = actions
            self._last_exceed = exceed
            self._last_predicted_vector = np.array(
                [predicted[p] for p in POLLUTANT_ORDER]
            )
        except Exception as exc:
            raise RuntimeError(f"step {t} failed: {exc}") from exc

    def coop_proportions(self) -> tuple[float, np.ndarray]:
        actions = self._last_actions
        overall = float((actions == COOPERATE).mean()) if self.n_agents else 0.0
        per_group = np.array([
            float((actions[self.groups[p].indices] == COOPERATE).mean())
            if len(self.groups[p].indices) else 0.0
            for p in EMITTED_POLLUTANTS
        ])
        return overall, per_group


@dataclass
class _Group:
    pollutant: Pollutant
    indices: np.ndarray
    box_ids: np.ndarray
    params: PayoffParams
    learners: PavlovGroup | None


def run(config: ScenarioConfig, models: ForecastModels, dataset: TimeSeriesDataset,
        strategy: Strategy | None = None, seed: int | None = None) -> Trajectory:
    """Run a full scenario and collect its trajectory."""
    sim = Simulation(config, models, dataset, strategy=strategy, seed=seed)
    n_steps = config.num_steps
    t_index = np.arange(1, n_steps + 1)
    aq = np.zeros(n_steps, dtype=int)
    predicted_aq = np.zeros(n_steps, dtype=int)
    concentrations = np.zeros((n_steps, len(POLLUTANT_ORDER)))
    predicted_levels = np.zeros((n_steps, len(POLLUTANT_ORDER)))
    coop_all = np.zeros(n_steps)
    coop_by = np.zeros((n_steps, len(EMITTED_POLLUTANTS)))
    cumulative = np.zeros((n_steps, sim.n_agents))
    exceedance = np.zeros((n_steps, len(POLLUTANT_ORDER)), dtype=bool)

    for i in range(n_steps):
        sim.step()
        aq[i] = sim.env.aq_index
        predicted_aq[i] = sim._predicted_aq
        concentrations[i] = sim.env.mean_concentrations()
        predicted_levels[i] = sim._last_predicted_vector
        coop_all[i], coop_by[i] = sim.coop_proportions()
        cumulative[i] = sim._cumulative
        exceedance[i] = sim._last_exceed

    return Trajectory(
        strategy=sim.strategy,
        seed=sim.seed,
        step_hours=config.step_hours,
        goal_aq_index=config.goal_aq_index,
        steps=t_index,
        aq_index=aq,
        predicted_aq=predicted_aq,
        concentrations=concentrations,
        predicted_levels=predicted_levels,
        coop_all=coop_all,
        coop_by_pollutant=coop_by,
        cumulative_rewards=cumulative,
        exceedance=exceedance,
    )


def equilibrium(series: np.ndarray, band: float = 0.05, window: int = 100
                ) -> tuple[int, float] | None:
    """First step after which the series stays within +-band of its value
    there for ``window`` consecutive steps; returns (step index, window mean).
    Step indices are 1-based to match Trajectory.steps."""
    series = np.asarray(series, dtype=float)
    if len(series) < window:
        return None
    views = np.lib.stride_tricks.sliding_window_view(series, window)
    stable = np.abs(views - views[:, :1]).max(axis=1) <= band
    hits = np.flatnonzero(stable)
    if not len(hits):
        return None
    start = int(hits[0])
    return start + 1, float(views[start].mean())


@dataclass
class Metrics:
    """Summary bundle of one trajectory."""

    strategy: Strategy
    seed: int
    aq_histogram: np.ndarray  # counts of index values 1..5
    final_aq_index: int
    mean_aq_index: float
    goal_met: bool
    first_improvement_step: int | None  # first step whose appreciation beats the previous
    equilibrium_step: int | None
    equilibrium_coop: float | None
    group_equilibrium: dict[str, tuple[int, float] | None]
    final_coop_all: float
    final_coop_by_pollutant: dict[str, float]
    mean_reward_per_agent: float


def compute_metrics(trajectory: Trajectory) -> Metrics:
    if not len(trajectory):
        raise ValueError("empty trajectory")
    aq = trajectory.aq_index
    histogram = np.bincount(aq, minlength=6)[1:6]

    improvements = np.flatnonzero(
        np.diff([appreciation(int(v)) for v in aq]) > 0
    )
    first_improvement = int(improvements[0]) + 2 if len(improvements) else None

    overall = equilibrium(trajectory.coop_all)
    per_group = {
        p.value: equilibrium(trajectory.coop_by_pollutant[:, i])
        for i, p in enumerate(EMITTED_POLLUTANTS)
    }
    final_rewards = trajectory.cumulative_rewards[-1]
    return Metrics(
        strategy=trajectory.strategy,
        seed=trajectory.seed,
        aq_histogram=histogram,
        final_aq_index=int(aq[-1]),
        mean_aq_index=float(aq.mean()),
        goal_met=bool(aq[-1] <= trajectory.goal_aq_index),
        first_improvement_step=first_improvement,
        equilibrium_step=overall[0] if overall else None,
        equilibrium_coop=overall[1] if overall else None,
        group_equilibrium=per_group,
        final_coop_all=float(trajectory.coop_all[-1]),
        final_coop_by_pollutant={
            p.value: float(trajectory.coop_by_pollutant[-1, i])
            for i, p in enumerate(EMITTED_POLLUTANTS)
        },
        mean_reward_per_agent=float(final_rewards.mean()) if len(final_rewards) else 0.0,
    )
