"""Signal pipeline: calibration, moving-average filtering, adaptive sampling
and sensor fault handling with automatic recalibration.

Calibration applies an additive temperature offset, a multiplicative
humidity gain and a two-point linear soil normalisation; water level is
derived from tank geometry minus the ultrasonic distance. Filtering is a
plain arithmetic mean over the last 10 samples (partial means during
warm-up). The sampler picks 1 / 0.5 / 0.1 Hz from the soil-moisture rate
of change, evaluated once per minute on filtered values.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .domain import (
    FACTORY_CALIBRATION,
    HEALTHY,
    RAW_RANGES,
    SENSORS,
    SENSOR_DISTANCE,
    SENSOR_HUMIDITY,
    SENSOR_NUTRIENT,
    SENSOR_SOIL,
    SENSOR_TEMP,
    AlertKind,
    AlertRequest,
    CalibratedFrame,
    CalibrationParams,
    SensorFrame,
    SensorHealth,
    clamp,
    frame_raw_values,
    make_alert_request,
)

FILTER_WINDOW = 10

# Adaptive sampling rates (Hz) and the soil rate-of-change bounds (%/min)
# that select them. Sampling runs fast above FAST_DELTA, slow below
# SLOW_DELTA, and at the middle rate otherwise; boundary values fall in
# the middle branch because both selection inequalities are strict.
RATE_FAST_HZ = 1.0
RATE_MID_HZ = 0.5
RATE_SLOW_HZ = 0.1
FAST_DELTA_PCT_PER_MIN = 5.0
SLOW_DELTA_PCT_PER_MIN = 1.0

# Seconds between rate re-evaluations; the rate-of-change unit is %/min.
RATE_EVAL_PERIOD_S = 60.0

# Consecutive identical raw readings before a sensor counts as stuck.
STUCK_COUNT_DEFAULT = 30

# Signals smoothed by the moving-average filter. Nutrient temperature is
# passed through unfiltered.
FILTERED_SIGNALS = (SENSOR_TEMP, SENSOR_HUMIDITY, SENSOR_SOIL, SENSOR_DISTANCE)


def calibrate(
    raw: SensorFrame,
    params: CalibrationParams,
    health: SensorHealth = HEALTHY,
) -> CalibratedFrame:
    """Convert a raw frame into physical units, clamping percentages."""
    span = params.sm_wet - params.sm_dry
    soil_pct = (raw.soil_raw - params.sm_dry) / span * 100.0
    return CalibratedFrame(
        t=raw.t,
        temp_c=raw.temp_raw + params.alpha_t,
        humidity_pct=clamp(raw.humidity_raw * params.beta_h, 0.0, 100.0),
        soil_moisture_pct=clamp(soil_pct, 0.0, 100.0),
        water_level_cm=max(params.tank_height_cm - raw.ultrasonic_distance_cm, 0.0),
        nutrient_temp_c=raw.nutrient_temp_raw + params.alpha_nt,
        health=health,
    )


def soil_raw_from_pct(pct: float, params: CalibrationParams) -> float:
    """Inverse of the soil normalisation: percent back to raw counts."""
    return params.sm_dry + pct / 100.0 * (params.sm_wet - params.sm_dry)


class MovingAverage:
    """Arithmetic mean over the last `window` samples.

    Before the window fills, the mean runs over the samples seen so far;
    zero-padding would drag early outputs toward zero and trip alerts.
    """

    __slots__ = ("window", "_buf", "_idx", "_count", "_sum")

    def __init__(self, window: int = FILTER_WINDOW):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._buf = [0.0] * window
        self._idx = 0
        self._count = 0
        self._sum = 0.0

    def step(self, x: float) -> float:
        """Push one sample, return the current windowed mean."""
        buf = self._buf
        if self._count < self.window:
            buf[self._idx] = x
            self._count += 1
            self._sum += x
        else:
            self._sum += x - buf[self._idx]
            buf[self._idx] = x
        self._idx += 1
        if self._idx == self.window:
            self._idx = 0
        return self._sum / self._count

    @property
    def count(self) -> int:
        return self._count

    @property
    def value(self) -> Optional[float]:
        return self._sum / self._count if self._count else None

    def reset(self) -> None:
        self._idx = 0
        self._count = 0
        self._sum = 0.0


def filter_step(fs: MovingAverage, x: float) -> tuple[MovingAverage, float]:
    """Single filter update; returns the (mutated) state and the mean."""
    return fs, fs.step(x)


def moving_average(xs: Sequence[float] | np.ndarray, window: int = FILTER_WINDOW) -> np.ndarray:
    """Vectorised equivalent of MovingAverage over a whole series.

    Uses a cumulative-sum difference; accepts a 1-D series or a 2-D batch
    (one series per row, averaged along the last axis).
    """
    x = np.asarray(xs, dtype=float)
    if x.shape[-1] == 0:
        return x.copy()
    c = np.cumsum(x, axis=-1)
    out = np.empty_like(x)
    n = x.shape[-1]
    head = min(window, n)
    counts = np.arange(1, head + 1, dtype=float)
    out[..., :head] = c[..., :head] / counts
    if n > window:
        out[..., window:] = (c[..., window:] - c[..., :-window]) / window
    return out


class AdaptiveSampler:
    """Chooses the sensor acquisition rate from the soil-moisture slope."""

    __slots__ = ("current_rate_hz", "last_sm_pct", "last_rate_eval_t")

    def __init__(
        self,
        initial_rate_hz: float = RATE_MID_HZ,
        last_sm_pct: Optional[float] = None,
        last_rate_eval_t: Optional[float] = None,
    ):
        if initial_rate_hz not in (RATE_FAST_HZ, RATE_MID_HZ, RATE_SLOW_HZ):
            raise ValueError("rate must be one of 1.0, 0.5, 0.1 Hz")
        self.current_rate_hz = initial_rate_hz
        self.last_sm_pct = last_sm_pct
        self.last_rate_eval_t = last_rate_eval_t

    def step(self, sm_pct: float, t: float) -> float:
        """Re-evaluate the rate from the slope since the previous call.

        The first call only seeds the reference point. Callers must pass
        strictly increasing t.
        """
        if self.last_rate_eval_t is None or self.last_sm_pct is None:
            self.last_sm_pct = sm_pct
            self.last_rate_eval_t = t
            return self.current_rate_hz
        if t <= self.last_rate_eval_t:
            raise ValueError("sampler time must be strictly increasing")
        delta = abs(sm_pct - self.last_sm_pct) / ((t - self.last_rate_eval_t) / 60.0)
        self.current_rate_hz = rate_for_delta(delta)
        self.last_sm_pct = sm_pct
        self.last_rate_eval_t = t
        return self.current_rate_hz


def rate_for_delta(delta_pct_per_min: float) -> float:
    """Map |dSM/dt| in %/min to a sampling rate in Hz."""
    d = abs(delta_pct_per_min)
    if d > FAST_DELTA_PCT_PER_MIN:
        return RATE_FAST_HZ
    if d < SLOW_DELTA_PCT_PER_MIN:
        return RATE_SLOW_HZ
    return RATE_MID_HZ


def sampler_step(ss: AdaptiveSampler, sm_pct: float, t: float) -> tuple[AdaptiveSampler, float]:
    return ss, ss.step(sm_pct, t)


class FaultState(str, enum.Enum):
    OK = "Ok"
    STUCK_AT = "StuckAt"
    OUT_OF_RANGE = "OutOfRange"


class FaultTransition(NamedTuple):
    sensor: str
    before: FaultState
    after: FaultState
    t: float


class NoFaultPresent(RuntimeError):
    """auto_recalibrate was called while every sensor is healthy."""


class FaultDetector:
    """Tracks per-sensor health from consecutive raw readings.

    A reading outside the sensor's physical range flags OutOfRange
    immediately; `stuck_count` identical consecutive readings flag
    StuckAt. Transitions are edge-triggered: each state change is
    reported exactly once.
    """

    def __init__(self, stuck_count: int = STUCK_COUNT_DEFAULT):
        if stuck_count < 2:
            raise ValueError("stuck_count must be >= 2")
        self.stuck_count = stuck_count
        self.states: dict[str, FaultState] = {s: FaultState.OK for s in SENSORS}
        self._last_value: dict[str, Optional[float]] = {s: None for s in SENSORS}
        self._repeat: dict[str, int] = {s: 0 for s in SENSORS}

    def step(self, raw: SensorFrame) -> list[FaultTransition]:
        transitions: list[FaultTransition] = []
        for sensor, value in frame_raw_values(raw).items():
            lo, hi = RAW_RANGES[sensor]
            if value == self._last_value[sensor]:
                self._repeat[sensor] += 1
            else:
                self._repeat[sensor] = 1
                self._last_value[sensor] = value
            if not lo <= value <= hi:
                new = FaultState.OUT_OF_RANGE
            elif self._repeat[sensor] >= self.stuck_count:
                new = FaultState.STUCK_AT
            else:
                new = FaultState.OK
            old = self.states[sensor]
            if new is not old:
                self.states[sensor] = new
                transitions.append(FaultTransition(sensor, old, new, raw.t))
        return transitions

    def faulted_sensors(self) -> list[str]:
        return [s for s, st in self.states.items() if st is not FaultState.OK]

    def health(self) -> SensorHealth:
        ok = self.states
        return SensorHealth(
            temp=ok[SENSOR_TEMP] is FaultState.OK,
            humidity=ok[SENSOR_HUMIDITY] is FaultState.OK,
            soil=ok[SENSOR_SOIL] is FaultState.OK,
            distance=ok[SENSOR_DISTANCE] is FaultState.OK,
            nutrient=ok[SENSOR_NUTRIENT] is FaultState.OK,
        )

    def clear(self, sensor: str) -> None:
        """Forget history for one sensor and mark it healthy again."""
        self.states[sensor] = FaultState.OK
        self._last_value[sensor] = None
        self._repeat[sensor] = 0


def check_faults(fstat: FaultDetector, raw: SensorFrame) -> tuple[FaultDetector, list[FaultTransition]]:
    return fstat, fstat.step(raw)


# Calibration fields owned by each sensor; recalibration restores exactly
# these from the factory set.
_PARAM_FIELDS = {
    SENSOR_TEMP: ("alpha_t",),
    SENSOR_HUMIDITY: ("beta_h",),
    SENSOR_SOIL: ("sm_dry", "sm_wet"),
    SENSOR_DISTANCE: ("tank_height_cm",),
    SENSOR_NUTRIENT: ("alpha_nt",),
}


def restore_factory(
    params: CalibrationParams,
    sensors: Iterable[str],
    factory: CalibrationParams,
) -> CalibrationParams:
    """Return params with the given sensors' fields reset to factory values."""
    values = {f: getattr(params, f) for fields in _PARAM_FIELDS.values() for f in fields}
    for sensor in sensors:
        for f in _PARAM_FIELDS[sensor]:
            values[f] = getattr(factory, f)
    return CalibrationParams(**values)


@dataclass
class RecalibrationResult:
    params: CalibrationParams
    recovered: list[str]
    alerts: list[AlertRequest]


class SensingPipeline:
    """Per-device signal chain: fault check, filtering, calibration.

    Owns one filter per smoothed signal, the adaptive sampler and the
    fault detector. On a fresh fault it raises a SensorFault alert, then
    recalibrates automatically: factory constants restored, the sensor's
    filter emptied, its fault history cleared, and a Recovery alert
    raised once for the episode.
    """

    def __init__(
        self,
        params: CalibrationParams,
        factory: CalibrationParams = FACTORY_CALIBRATION,
        stuck_count: int = STUCK_COUNT_DEFAULT,
        auto_recalibrate: bool = True,
    ):
        self.params = params
        self.factory = factory
        self.filters = {s: MovingAverage() for s in FILTERED_SIGNALS}
        self.sampler = AdaptiveSampler()
        self.faults = FaultDetector(stuck_count=stuck_count)
        self.auto_recalibrate_enabled = auto_recalibrate

    def _filtered_value(self, sensor: str, raw_value: float, faulted: bool) -> float:
        """Filter update for one signal. A faulted sensor's reading is kept
        out of the filter: the last smoothed value is held instead (raw
        passthrough if the filter is empty; health flags cover that case)."""
        f = self.filters[sensor]
        if faulted:
            held = f.value
            return held if held is not None else raw_value
        return f.step(raw_value)

    def process(self, raw: SensorFrame) -> tuple[CalibratedFrame, list[AlertRequest]]:
        """Run one raw frame through the chain; returns the calibrated frame
        and any alert requests raised by fault handling.

        The frame's health mirrors the fault state at acquisition time, so
        a frame that triggers recalibration still reports the fault once
        before the recovered state shows up on the next frame.
        """
        alerts: list[AlertRequest] = []
        transitions = self.faults.step(raw)
        health = self.faults.health()
        for tr in transitions:
            if tr.before is FaultState.OK:
                alerts.append(make_alert_request(
                    AlertKind.SENSOR_FAULT, raw.t,
                    f"{tr.sensor} sensor {tr.after.value}",
                ))
        bad = set(self.faults.faulted_sensors())
        filtered = SensorFrame(
            t=raw.t,
            temp_raw=self._filtered_value(SENSOR_TEMP, raw.temp_raw, SENSOR_TEMP in bad),
            humidity_raw=self._filtered_value(SENSOR_HUMIDITY, raw.humidity_raw, SENSOR_HUMIDITY in bad),
            soil_raw=self._filtered_value(SENSOR_SOIL, raw.soil_raw, SENSOR_SOIL in bad),
            ultrasonic_distance_cm=self._filtered_value(
                SENSOR_DISTANCE, raw.ultrasonic_distance_cm, SENSOR_DISTANCE in bad),
            nutrient_temp_raw=raw.nutrient_temp_raw,
        )
        if self.auto_recalibrate_enabled and bad:
            result = auto_recalibrate(self.params, self.faults, self.factory,
                                      filters=self.filters, t=raw.t)
            self.params = result.params
            alerts.extend(result.alerts)
        return calibrate(filtered, self.params, health), alerts

    def maybe_update_rate(self, soil_pct: float, t: float) -> float:
        """Re-evaluate the sampling rate if a full evaluation period passed."""
        s = self.sampler
        if s.last_rate_eval_t is None or t - s.last_rate_eval_t >= RATE_EVAL_PERIOD_S:
            return s.step(soil_pct, t)
        return s.current_rate_hz

    @property
    def current_rate_hz(self) -> float:
        return self.sampler.current_rate_hz


def auto_recalibrate(
    params: CalibrationParams,
    fstat: FaultDetector,
    factory: CalibrationParams,
    filters: Optional[dict[str, MovingAverage]] = None,
    t: float = 0.0,
) -> RecalibrationResult:
    """Restore factory calibration for every faulted sensor.

    Empties the sensor's filter (when one is attached), clears its fault
    history so the next episode is detected afresh, and raises one
    Recovery alert per sensor. Raises NoFaultPresent if nothing is
    faulted.
    """
    faulted = fstat.faulted_sensors()
    if not faulted:
        raise NoFaultPresent("auto_recalibrate called with all sensors Ok")
    new_params = restore_factory(params, faulted, factory)
    alerts = []
    for sensor in faulted:
        if filters is not None and sensor in filters:
            filters[sensor].reset()
        fstat.clear(sensor)
        alerts.append(make_alert_request(
            AlertKind.RECOVERY, t, f"{sensor} sensor recalibrated to factory defaults"))
    return RecalibrationResult(params=new_params, recovered=faulted, alerts=alerts)
