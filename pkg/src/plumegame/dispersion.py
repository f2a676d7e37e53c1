"""Gaussian plume dispersion for point sources.

Steady-state plume with ground reflection and exponential decay, spread
parameters from the Briggs open-country interpolation for Pasquill-Gifford
stability class C (the only class implemented).  Emission rates are stored
in g/h and converted to ug/s internally so concentrations come out in ug/m3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import EnvState, GridBox, Pollutant, Source

#: g/h -> ug/s
RATE_TO_UG_PER_S = 1.0e6 / 3600.0

#: First-order decay coefficients, 1/hour.  PM10 and CO do not decay.
DECAY_PER_HOUR: dict[Pollutant, float] = {
    Pollutant.PM10: 0.0,
    Pollutant.SOX: 0.31,
    Pollutant.NOX: 0.45,
    Pollutant.CO: 0.0,
    Pollutant.O3: 0.0,
}


@dataclass(frozen=True)
class Receptor:
    """A sampling point in plume-local coordinates.

    x is downwind, y crosswind, z above ground; the plume is undefined at
    or behind the source (x <= 0).
    """

    x: float
    y: float
    z: float


def sigma_yz(x: float) -> tuple[float, float]:
    """Crosswind and vertical plume spread (m) at downwind distance x (m).

    Briggs open-country class C:
      sigma_y = 0.11 x (1 + 0.0001 x)^(-1/2)
      sigma_z = 0.08 x (1 + 0.0002 x)^(-1/2)
    """
    if x <= 0:
        raise ValueError(f"downwind distance must be > 0, got {x}")
    sigma_y = 0.11 * x / math.sqrt(1.0 + 0.0001 * x)
    sigma_z = 0.08 * x / math.sqrt(1.0 + 0.0002 * x)
    return sigma_y, sigma_z


def decay_term(r_per_hour: float, x: float, u: float) -> float:
    """Dimensionless decay factor over the travel time x/u.

    1 when the decay coefficient is zero, otherwise exp(-R * t) with the
    travel time converted to hours to match R's units.
    """
    if r_per_hour < 0:
        raise ValueError(f"decay coefficient must be >= 0, got {r_per_hour}")
    if x <= 0:
        raise ValueError(f"downwind distance must be > 0, got {x}")
    if u <= 0:
        raise ValueError(f"wind speed must be > 0, got {u}")
    if r_per_hour == 0.0:
        return 1.0
    return math.exp(-r_per_hour * (x / u) / 3600.0)


def plume_concentration(source: Source, receptor: Receptor, wind_speed: float) -> float:
    """Concentration (ug/m3) of the source's pollutant at a plume-local receptor."""
    if receptor.x <= 0:
        raise ValueError(f"receptor must lie downwind (x > 0), got x={receptor.x}")
    if wind_speed <= 0:
        raise ValueError(f"wind speed must be > 0, got {wind_speed}")
    sy, sz = sigma_yz(receptor.x)
    d = decay_term(DECAY_PER_HOUR[source.pollutant], receptor.x, wind_speed)
    q = source.emission_rate * RATE_TO_UG_PER_S * d
    h = source.stack_height
    crosswind = math.exp(-receptor.y**2 / (2.0 * sy**2))
    vertical = math.exp(-((receptor.z - h) ** 2) / (2.0 * sz**2)) + math.exp(
        -((receptor.z + h) ** 2) / (2.0 * sz**2)
    )
    return q / (2.0 * math.pi * wind_speed * sy * sz) * crosswind * vertical


class PlumeTable:
    """Precomputed source-to-receptor geometry for fixed positions and wind direction.

    Source positions, stack heights and the wind direction are all constant
    within a run, so the spread terms and Gaussian factors of every
    (source, box-centre) pair can be evaluated once.  Per step only the wind
    speed and the emission rates change.
    """

    def __init__(self, sources: list[Source] | tuple[Source, ...], grid: tuple[GridBox, ...],
                 wind_direction: float):
        self.sources = tuple(sorted(sources, key=lambda s: s.id))
        self.n_boxes = len(grid)
        centres = np.array([box.centre for box in grid])  # (n_boxes, 3)
        cos_d, sin_d = math.cos(wind_direction), math.sin(wind_direction)

        self._per_pollutant: dict[Pollutant, dict] = {}
        for pollutant in (p for p in Pollutant if p is not Pollutant.O3):
            members = [s for s in self.sources if s.pollutant is pollutant]
            if not members:
                continue
            pos = np.array([s.position for s in members])  # (m, 3)
            stacks = np.array([s.stack_height for s in members])
            dx = centres[None, :, 0] - pos[:, None, 0]  # (m, n_boxes)
            dy = centres[None, :, 1] - pos[:, None, 1]
            downwind = dx * cos_d + dy * sin_d
            crosswind = -dx * sin_d + dy * cos_d
            z = centres[None, :, 2]

            mask = downwind > 0.0
            x = np.where(mask, downwind, 1.0)  # placeholder where upwind
            sy = 0.11 * x / np.sqrt(1.0 + 0.0001 * x)
            sz = 0.08 * x / np.sqrt(1.0 + 0.0002 * x)
            h = stacks[:, None]
            kernel = (
                np.exp(-(crosswind**2) / (2.0 * sy**2))
                * (np.exp(-((z - h) ** 2) / (2.0 * sz**2)) + np.exp(-((z + h) ** 2) / (2.0 * sz**2)))
                / (2.0 * math.pi * sy * sz)
            )
            kernel[~mask] = 0.0
            self._per_pollutant[pollutant] = {
                "indices": np.array([self.sources.index(s) for s in members]),
                "x": np.where(mask, downwind, np.inf),
                "kernel": kernel,
                "decay": DECAY_PER_HOUR[pollutant],
            }

    def concentrations(self, rates: np.ndarray, wind_speed: float) -> np.ndarray:
        """Per-box, per-pollutant field (n_boxes, 5) for rates in source-id order."""
        if wind_speed <= 0:
            raise ValueError(f"wind speed must be > 0, got {wind_speed}")
        out = np.zeros((self.n_boxes, len(Pollutant)))
        for column, pollutant in enumerate(
            (Pollutant.PM10, Pollutant.SOX, Pollutant.NOX, Pollutant.CO, Pollutant.O3)
        ):
            entry = self._per_pollutant.get(pollutant)
            if entry is None:
                continue
            kernel = entry["kernel"]
            if entry["decay"] > 0.0:
                kernel = kernel * np.exp(-entry["decay"] * (entry["x"] / wind_speed) / 3600.0)
            member_rates = rates[entry["indices"]] * RATE_TO_UG_PER_S
            out[:, column] = (member_rates[:, None] * kernel).sum(axis=0) / wind_speed
        return out


def aggregate_boxes(sources: list[Source] | tuple[Source, ...], grid: tuple[GridBox, ...],
                    env: EnvState) -> np.ndarray:
    """Per-box per-pollutant concentrations (ug/m3) from all sources.

    Each box is sampled at its centre at ground level; receptors upwind of a
    source contribute nothing.  Columns follow POLLUTANT_ORDER; the O3 column
    stays zero because nothing emits it.
    """
    table = PlumeTable(sources, grid, env.wind_direction)
    rates = np.array([s.emission_rate for s in table.sources])
    return table.concentrations(rates, env.wind_speed)
