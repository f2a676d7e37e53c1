"""Agent decision machinery.

Payoff of the N-person game, memory-weighted payoff, Pavlovian probability
and learning-rate updates, neighbour influence, participation-based
penalties, the reward rule and the central authority's directive.  Scalar
functions define the contract; PavlovGroup is the synchronous vectorized
form the engine runs, updating a whole pollutant group per step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .domain import AQ_LABELS, EMITTED_POLLUTANTS, Pollutant

log = logging.getLogger(__name__)

COOPERATE = 0  # decrease emissions
DEFECT = 1  # increase emissions

ALPHA_MIN = 0.01
ALPHA_MAX = 0.5
INITIAL_PROBABILITY = 0.5
INITIAL_LEARNING_RATE = 0.1

#: Commands issued under the centralized strategy.
DECREASE = "decrease"
HOLD = "hold"


class PenaltyMode(Enum):
    CUMULATIVE = "cumulative"
    INSTANTANEOUS = "instantaneous"
    NONE = "none"


_warned_params: set[tuple[float, float, int]] = set()


@dataclass(frozen=True)
class PayoffParams:
    """Payoff curve constants for one pollutant group of size n."""

    b: float  # defection temptation
    c: float  # cooperation cost
    n: int  # group population

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"group size must be >= 1, got {self.n}")
        if not (math.isfinite(self.b) and math.isfinite(self.c)):
            raise ValueError(f"payoff constants must be finite, got b={self.b}, c={self.c}")
        key = (self.b, self.c, self.n)
        if not (self.b > self.c > 0 and self.c > self.b / self.n) and key not in _warned_params:
            _warned_params.add(key)
            log.warning(
                "payoff constants b=%g, c=%g violate b > c > 0 and c > b/N (N=%d)",
                self.b, self.c, self.n,
            )


def payoff(ncp: int, params: PayoffParams, action: int) -> float:
    """Game payoff given the cooperator count: b*ncp/N - c when cooperating,
    b*ncp/N when defecting."""
    if not 0 <= ncp <= params.n:
        raise ValueError(f"cooperator count {ncp} outside [0, {params.n}]")
    _check_action(action)
    base = params.b * ncp / params.n
    return base - params.c if action == COOPERATE else base


def linear_decay_weights(length: int) -> np.ndarray:
    """Memory weights, newest first, linearly decaying, summing to one."""
    if length < 1:
        raise ValueError(f"memory length must be >= 1, got {length}")
    raw = np.arange(length, 0, -1, dtype=float)
    return raw / raw.sum()


def weighted_payoff(payoffs: Sequence[float], weights: Sequence[float]) -> float:
    """Recency-weighted payoff over the memory ring (index 0 = newest)."""
    if len(payoffs) != len(weights):
        raise ValueError(f"length mismatch: {len(payoffs)} payoffs vs {len(weights)} weights")
    total_weight = math.fsum(weights)
    if abs(total_weight - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1 (got {total_weight})")
    for older, newer in zip(weights[1:], weights[:-1]):
        if not older < newer:
            raise ValueError("weights must be strictly decreasing with age")
    total = 0.0
    for w, m in zip(weights, payoffs):
        total += w * m
    return total


def update_probabilities(action: int, prob_cooperate: float, prob_defect: float,
                         learning_rate: float, weighted: float) -> tuple[float, float]:
    """Reinforce or weaken the played action's probability; leave the other.

    Positive weighted payoff: p' = p + (1-p)*alpha.  Otherwise: p' = (1-alpha)*p.
    Both branches keep the probability in [0, 1].
    """
    _check_action(action)
    if not (0.0 <= prob_cooperate <= 1.0 and 0.0 <= prob_defect <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if not 0.0 < learning_rate < 1.0:
        raise ValueError(f"learning rate must lie in (0, 1), got {learning_rate}")
    if action == COOPERATE:
        if weighted > 0.0:
            prob_cooperate = prob_cooperate + (1.0 - prob_cooperate) * learning_rate
        else:
            prob_cooperate = (1.0 - learning_rate) * prob_cooperate
    else:
        if weighted > 0.0:
            prob_defect = prob_defect + (1.0 - prob_defect) * learning_rate
        else:
            prob_defect = (1.0 - learning_rate) * prob_defect
    return prob_cooperate, prob_defect


def homogeneity(actions: Sequence[int], memory_length: int) -> int:
    """Number of adjacent action changes over a full memory of L actions."""
    if len(actions) != memory_length:
        raise ValueError(f"need exactly {memory_length} actions, got {len(actions)}")
    return sum(1 for a, b in zip(actions[:-1], actions[1:]) if a != b)


def update_learning_rate(alpha: float, d: int, memory_length: int) -> float:
    """Adapt the learning rate from the homogeneity indicator, clamped to
    [ALPHA_MIN, ALPHA_MAX]."""
    if d == 0:
        alpha = alpha + 0.015
    elif d == memory_length - 1:
        alpha = alpha + 0.010
    else:
        alpha = alpha - 0.010
    return min(max(alpha, ALPHA_MIN), ALPHA_MAX)


def neighbor_average(payoffs: Sequence[float]) -> float:
    """Mean payoff of the neighbours this step; 0 for a neighbourless agent."""
    if len(payoffs) == 0:
        return 0.0
    return math.fsum(payoffs) / len(payoffs)


def average_neighbor_history(values: Sequence[float]) -> float:
    """Mean of the stored per-step neighbour averages."""
    if len(values) == 0:
        raise ValueError("empty neighbour history")
    return math.fsum(values) / len(values)


def choose_action(action: int, weighted: float, avg_neighbor: float,
                  prob_cooperate: float, prob_defect: float) -> int:
    """Next action: switch only when the neighbours do better and the updated
    probabilities favour the other action.  Deterministic."""
    _check_action(action)
    if action == COOPERATE:
        if weighted < avg_neighbor and prob_defect > prob_cooperate:
            return DEFECT
        return COOPERATE
    if weighted < avg_neighbor and prob_cooperate > prob_defect:
        return COOPERATE
    return DEFECT


def participation(emission_rate: float, level: float, level_max: float) -> float:
    """Agent's share of an exceedance: emission rate over the margin."""
    if emission_rate < 0:
        raise ValueError(f"emission rate must be >= 0, got {emission_rate}")
    if not level > level_max:
        raise ValueError(f"participation undefined without exceedance ({level} <= {level_max})")
    return emission_rate / (level - level_max)


def update_ecofactor(previous: float, sigma: float | None, mode: PenaltyMode) -> float:
    """Accumulated penalty.  ``sigma=None`` means no exceedance this step:
    the cumulative mode keeps its balance, the per-step mode resets."""
    if mode is PenaltyMode.NONE:
        return 0.0
    if sigma is None:
        return previous if mode is PenaltyMode.CUMULATIVE else 0.0
    if sigma < 0:
        raise ValueError(f"participation must be >= 0, got {sigma}")
    increment = 1.0 - math.exp(-sigma)
    return previous + increment if mode is PenaltyMode.CUMULATIVE else increment


def reward(ncp: int, params: PayoffParams, action: int, eco_factor: float) -> float:
    """Step reward: cooperators earn the plain payoff, defectors pay their
    accumulated penalty."""
    value = payoff(ncp, params, action)
    return value if action == COOPERATE else value - eco_factor


def central_directive(predicted_levels: Mapping[Pollutant, float], predicted_aq_index: int,
                      goal_levels: Mapping[Pollutant, float], goal_aq_index: int,
                      ) -> dict[Pollutant, str]:
    """Commands from the air-quality authority to each emitting group.

    Groups whose forecast exceeds their goal level are told to decrease.
    An ozone exceedance is charged to its precursor emitters (SOx and CO).
    If only the predicted index exceeds its goal, every group is told to
    decrease.  Otherwise everyone holds.
    """
    if predicted_aq_index not in AQ_LABELS:
        raise ValueError(f"air-quality index out of range 1..5: {predicted_aq_index}")
    offending: set[Pollutant] = set()
    for pollutant, goal in goal_levels.items():
        if predicted_levels.get(pollutant, 0.0) > goal:
            if pollutant is Pollutant.O3:
                offending.update((Pollutant.SOX, Pollutant.CO))
            else:
                offending.add(pollutant)
    if not offending and predicted_aq_index > goal_aq_index:
        offending.update(EMITTED_POLLUTANTS)
    return {p: (DECREASE if p in offending else HOLD) for p in EMITTED_POLLUTANTS}


def _check_action(action: int) -> None:
    if action not in (COOPERATE, DEFECT):
        raise ValueError(f"action must be {COOPERATE} or {DEFECT}, got {action}")


@dataclass(frozen=True)
class AgentState:
    """Read-only snapshot of one agent, mainly for inspection and tests."""

    id: int
    source_id: int
    action: int
    prob_cooperate: float
    prob_defect: float
    learning_rate: float
    eco_factor: float
    memory_actions: tuple[int, ...]
    memory_payoffs: tuple[float, ...]
    memory_neighbor: tuple[float, ...]


class PavlovGroup:
    """All Pavlovian learners of one pollutant group, updated synchronously.

    Memory rings are (n, L) arrays with column 0 holding the newest record.
    Learning starts only once the ring is full; until then ``planned`` stays
    None and the engine samples warm-up actions itself.
    """

    def __init__(self, n: int, memory_length: int):
        if memory_length < 2:
            raise ValueError(f"memory length must be >= 2, got {memory_length}")
        self.n = n
        self.length = memory_length
        self.weights = linear_decay_weights(memory_length)
        self.prob_cooperate = np.full(n, INITIAL_PROBABILITY)
        self.prob_defect = np.full(n, INITIAL_PROBABILITY)
        self.learning_rate = np.full(n, INITIAL_LEARNING_RATE)
        self.eco_factor = np.zeros(n)
        self.memory_actions = np.zeros((n, memory_length), dtype=np.int8)
        self.memory_payoffs = np.zeros((n, memory_length))
        self.memory_neighbor = np.zeros((n, memory_length))
        self.filled = 0
        self.planned: np.ndarray | None = None

    def apply_penalties(self, increments: np.ndarray, mode: PenaltyMode) -> None:
        """Update every agent's penalty balance for this step.

        ``increments`` holds each agent's summed penalty increment
        (1 - e^-sigma per exceedance channel); agents not being charged
        carry 0, which keeps the cumulative balance and clears the
        per-step one.
        """
        if mode is PenaltyMode.NONE:
            self.eco_factor = np.zeros(self.n)
        elif mode is PenaltyMode.CUMULATIVE:
            self.eco_factor = self.eco_factor + increments
        else:
            self.eco_factor = np.asarray(increments, dtype=float).copy()

    def record(self, actions: np.ndarray, rewards: np.ndarray, neighbor_means: np.ndarray) -> None:
        """Push this step's records; run the learning rules once memory is full."""
        self.memory_actions[:, 1:] = self.memory_actions[:, :-1]
        self.memory_actions[:, 0] = actions
        self.memory_payoffs[:, 1:] = self.memory_payoffs[:, :-1]
        self.memory_payoffs[:, 0] = rewards
        self.memory_neighbor[:, 1:] = self.memory_neighbor[:, :-1]
        self.memory_neighbor[:, 0] = neighbor_means
        self.filled = min(self.filled + 1, self.length)
        if self.filled == self.length:
            self._learn(actions)

    def _learn(self, actions: np.ndarray) -> None:
        wp = (self.memory_payoffs * self.weights).sum(axis=1)
        positive = wp > 0.0
        cooperated = actions == COOPERATE
        alpha = self.learning_rate
        reinforced_c = self.prob_cooperate + (1.0 - self.prob_cooperate) * alpha
        weakened_c = (1.0 - alpha) * self.prob_cooperate
        reinforced_d = self.prob_defect + (1.0 - self.prob_defect) * alpha
        weakened_d = (1.0 - alpha) * self.prob_defect
        self.prob_cooperate = np.where(
            cooperated, np.where(positive, reinforced_c, weakened_c), self.prob_cooperate
        )
        self.prob_defect = np.where(
            ~cooperated, np.where(positive, reinforced_d, weakened_d), self.prob_defect
        )

        changes = (self.memory_actions[:, :-1] != self.memory_actions[:, 1:]).sum(axis=1)
        delta = np.where(changes == 0, 0.015, np.where(changes == self.length - 1, 0.010, -0.010))
        self.learning_rate = np.clip(alpha + delta, ALPHA_MIN, ALPHA_MAX)

        avg_neighbor = self.memory_neighbor.sum(axis=1) / self.length
        wants_other = wp < avg_neighbor
        switch_to_defect = cooperated & wants_other & (self.prob_defect > self.prob_cooperate)
        switch_to_cooperate = ~cooperated & wants_other & (self.prob_cooperate > self.prob_defect)
        self.planned = np.where(
            switch_to_defect, DEFECT, np.where(switch_to_cooperate, COOPERATE, actions)
        ).astype(np.int8)

    def agent_state(self, index: int, agent_id: int = -1, source_id: int = -1) -> AgentState:
        return AgentState(
            id=agent_id,
            source_id=source_id,
            action=int(self.memory_actions[index, 0]) if self.filled else -1,
            prob_cooperate=float(self.prob_cooperate[index]),
            prob_defect=float(self.prob_defect[index]),
            learning_rate=float(self.learning_rate[index]),
            eco_factor=float(self.eco_factor[index]),
            memory_actions=tuple(int(a) for a in self.memory_actions[index, :self.filled]),
            memory_payoffs=tuple(float(p) for p in self.memory_payoffs[index, :self.filled]),
            memory_neighbor=tuple(float(v) for v in self.memory_neighbor[index, :self.filled]),
        )
