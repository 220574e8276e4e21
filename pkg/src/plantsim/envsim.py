"""Deterministic plant/tank/weather model standing in for the hardware.

Soil moisture follows a single-bucket balance: the pump adds a fixed rate
while evapotranspiration drains it, modulated linearly by ambient
temperature and humidity. Weather is a diurnal sinusoid with humidity
anti-correlated to temperature. Sensor readings are the model truth
encoded back into raw counts plus Gaussian noise.

Noise is counter-based: each draw is a pure function of (seed, sensor
stream, timestamp), so runs that diverge in sampling schedule or policy
still see identical weather and identical per-instant measurement noise.
That makes policy comparisons paired experiments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

from .domain import (
    RAW_RANGES,
    SENSOR_DISTANCE,
    SENSOR_HUMIDITY,
    SENSOR_NUTRIENT,
    SENSOR_SOIL,
    SENSOR_TEMP,
    CalibrationParams,
    SensorFrame,
    clamp,
)
from .sensing import soil_raw_from_pct

DAY_S = 86400.0

# Noise stream identifiers; keyed into the counter RNG alongside (seed, t).
STREAM_TEMP = 1
STREAM_HUMIDITY = 2
STREAM_SOIL = 3
STREAM_DISTANCE = 4
STREAM_NUTRIENT = 5

_M64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


class CounterNoise:
    """Stateless Gaussian noise: draw = f(seed, stream, t).

    Two SplitMix64 passes hash the key into uniforms, Box-Muller maps
    them to a standard normal. No sequence state exists, so asking for
    the same (stream, t) twice gives the same value and skipped
    timestamps cost nothing.
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        self.seed = seed & _M64

    def normal(self, stream: int, t: float, sigma: float) -> float:
        if sigma == 0.0:
            return 0.0
        key = _splitmix64(self.seed ^ _splitmix64((stream & _M64) * 0xA24BAED4963EE407))
        key = _splitmix64(key ^ (int(t) & _M64))
        u1 = ((key >> 11) + 1) / 9007199254740993.0  # (0, 1], log-safe
        u2 = (_splitmix64(key) >> 11) / 9007199254740992.0  # [0, 1)
        return sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass
class SoilModel:
    """Bucket model state and constants; rates are %/min."""

    s: float = 70.0
    et0: float = 0.01113
    a_temp: float = 0.03
    b_hum: float = 0.5
    r_pump: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.s <= 100.0:
            raise ValueError("soil moisture must start inside [0, 100]")
        if self.r_pump <= 0:
            raise ValueError("r_pump must be positive")
        if self.et0 < 0:
            raise ValueError("et0 cannot be negative")


@dataclass
class TankModel:
    """Reservoir state; draws are metered into drawn_liters."""

    level_cm: float = 40.0
    area_cm2: float = 1250.0
    pump_flow_lpm: float = 45.2 / 600.0  # sized so 20 min/day for 30 days draws 45.2 L
    height_cm: float = 40.0
    drawn_liters: float = 0.0

    def __post_init__(self) -> None:
        if self.area_cm2 <= 0 or self.pump_flow_lpm <= 0 or self.height_cm <= 0:
            raise ValueError("tank geometry and flow must be positive")
        if not 0.0 <= self.level_cm <= self.height_cm:
            raise ValueError("tank level must lie inside [0, height]")

    def volume_liters(self) -> float:
        return self.level_cm * self.area_cm2 / 1000.0


@dataclass(frozen=True)
class NoiseParams:
    """Additive measurement noise std-devs, in raw-count units.

    Temperature/humidity/distance defaults follow the sensors' datasheet
    accuracies; the soil figure is one percent of the probe's dry-to-wet
    span expressed in counts.
    """

    temp_c: float = 0.5
    humidity_pct: float = 2.0
    soil_raw: float = 18.0
    distance_cm: float = 0.3
    nutrient_c: float = 0.5

    @classmethod
    def zeros(cls) -> "NoiseParams":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class WeatherModel:
    """Diurnal ambient model: coldest at t=0 (midnight), warmest half a
    period later; humidity swings opposite in phase."""

    temp_mean_c: float = 22.0
    temp_amp_c: float = 6.0
    hum_mean_pct: float = 60.0
    hum_amp_pct: float = 15.0
    period_s: float = DAY_S
    nutrient_damp: float = 0.25
    nutrient_lag_s: float = 7200.0
    noise: NoiseParams = field(default_factory=NoiseParams)


def ambient(weather: WeatherModel, t: float) -> tuple[float, float]:
    """True (temperature °C, humidity %) at time t."""
    c = math.cos(2.0 * math.pi * t / weather.period_s)
    temp = weather.temp_mean_c - weather.temp_amp_c * c
    hum = clamp(weather.hum_mean_pct + weather.hum_amp_pct * c, 0.0, 100.0)
    return temp, hum


def nutrient_temp(weather: WeatherModel, t: float) -> float:
    """Reservoir water temperature: ambient, damped and lagged."""
    c = math.cos(2.0 * math.pi * (t - weather.nutrient_lag_s) / weather.period_s)
    return weather.temp_mean_c - weather.nutrient_damp * weather.temp_amp_c * c


def et_rate(soil: SoilModel, temp_c: float, humidity_pct: float) -> float:
    """Evapotranspiration drain in %/min at the given ambient conditions."""
    return soil.et0 * (1.0 + soil.a_temp * (temp_c - 20.0)) \
        * (1.0 - soil.b_hum * humidity_pct / 100.0)


def advance(soil: SoilModel, tank: TankModel, pump_on: bool,
            et_pct_per_min: float, dt_s: float) -> bool:
    """One Euler step of the water balance; mutates soil and tank.

    Returns True when the pump was commanded on but the tank could not
    supply the full draw (it then delivers only what is left). Moisture
    gain scales with the fraction actually delivered.
    """
    dt_min = dt_s / 60.0
    gain = 0.0
    starved = False
    if pump_on:
        requested = tank.pump_flow_lpm * dt_min
        available = tank.level_cm * tank.area_cm2 / 1000.0
        actual = requested if requested <= available else available
        if actual < requested:
            starved = True
        if actual > 0.0:
            level = tank.level_cm - actual * 1000.0 / tank.area_cm2
            tank.level_cm = level if level > 0.0 else 0.0
            tank.drawn_liters += actual
            gain = soil.r_pump * dt_min * (actual / requested)
    s = soil.s + gain - et_pct_per_min * dt_min
    soil.s = 0.0 if s < 0.0 else 100.0 if s > 100.0 else s
    return starved


def encode_frame(soil_pct: float, tank: TankModel, weather: WeatherModel,
                 t: float, noise_rng: Optional[CounterNoise],
                 probe: CalibrationParams) -> SensorFrame:
    """Encode model truth into a raw sensor frame.

    Soil goes through the inverse of the probe's two-point normalisation;
    noise is added in raw units and every reading saturates at its
    sensor's physical range (a healthy sensor clips, it does not emit
    impossible values).
    """
    temp, hum = ambient(weather, t)
    nut = nutrient_temp(weather, t)
    dist = tank.height_cm - tank.level_cm
    soil_raw = soil_raw_from_pct(soil_pct, probe)
    if noise_rng is not None:
        n = weather.noise
        temp += noise_rng.normal(STREAM_TEMP, t, n.temp_c)
        hum += noise_rng.normal(STREAM_HUMIDITY, t, n.humidity_pct)
        soil_raw += noise_rng.normal(STREAM_SOIL, t, n.soil_raw)
        dist += noise_rng.normal(STREAM_DISTANCE, t, n.distance_cm)
        nut += noise_rng.normal(STREAM_NUTRIENT, t, n.nutrient_c)
    return SensorFrame(
        t=t,
        temp_raw=clamp(temp, *RAW_RANGES[SENSOR_TEMP]),
        humidity_raw=clamp(hum, *RAW_RANGES[SENSOR_HUMIDITY]),
        soil_raw=clamp(soil_raw, *RAW_RANGES[SENSOR_SOIL]),
        ultrasonic_distance_cm=clamp(dist, *RAW_RANGES[SENSOR_DISTANCE]),
        nutrient_temp_raw=clamp(nut, *RAW_RANGES[SENSOR_NUTRIENT]),
    )


class EnvStep(NamedTuple):
    frame: SensorFrame
    tank_empty: bool


def env_step(soil: SoilModel, tank: TankModel, weather: WeatherModel,
             pump_on: bool, t: float, dt: float,
             noise_rng: Optional[CounterNoise],
             probe: CalibrationParams) -> EnvStep:
    """Advance the environment by dt from time t and measure at t+dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    temp, hum = ambient(weather, t)
    starved = advance(soil, tank, pump_on, et_rate(soil, temp, hum), dt)
    return EnvStep(encode_frame(soil.s, tank, weather, t + dt, noise_rng, probe),
                   starved)


@dataclass(frozen=True)
class Proposed:
    """Controller-driven irrigation: the pump follows the state machine."""


@dataclass(frozen=True)
class TimerPolicy:
    """Fixed schedule: on for duration_s at the start of every period_s."""

    period_s: float = 43200.0
    duration_s: float = 510.0

    def __post_init__(self) -> None:
        if not 0 < self.duration_s < self.period_s:
            raise ValueError("timer duration must lie inside (0, period)")


@dataclass(frozen=True)
class ManualPolicy:
    """Daily watering windows: (seconds after midnight, duration) pairs."""

    schedule: tuple[tuple[float, float], ...] = ((8 * 3600.0, 1200.0),)

    def __post_init__(self) -> None:
        prev_end = 0.0
        for start, dur in sorted(self.schedule):
            if dur <= 0 or start < 0 or start + dur > DAY_S:
                raise ValueError("watering windows must fit inside one day")
            if start < prev_end:
                raise ValueError("watering windows must not overlap")
            prev_end = start + dur


IrrigationPolicy = Union[Proposed, TimerPolicy, ManualPolicy]


def policy_decide(p: IrrigationPolicy, t: float, controller_pump: bool) -> bool:
    """Pump command at time t. Timer and manual schedules ignore the
    controller entirely; only the proposed policy follows it."""
    if isinstance(p, Proposed):
        return controller_pump
    if isinstance(p, TimerPolicy):
        return t % p.period_s < p.duration_s
    day_t = t % DAY_S
    return any(start <= day_t < start + dur for start, dur in p.schedule)


def next_policy_toggle(p: IrrigationPolicy, t: float) -> Optional[float]:
    """Earliest time strictly after t when the schedule may flip, or None
    for the proposed policy (its pump changes only at controller steps).
    Used by the scenario loop to land integration chunk boundaries exactly
    on schedule edges, keeping water accounting exact."""
    if isinstance(p, Proposed):
        return None
    if isinstance(p, TimerPolicy):
        pos = t % p.period_s
        base = t - pos
        return base + (p.duration_s if pos < p.duration_s else p.period_s)
    day_t = t % DAY_S
    base = t - day_t
    candidates = []
    for start, dur in p.schedule:
        if day_t < start:
            candidates.append(base + start)
        elif day_t < start + dur:
            candidates.append(base + start + dur)
        else:
            candidates.append(base + DAY_S + start)
    return min(candidates) if candidates else base + DAY_S
