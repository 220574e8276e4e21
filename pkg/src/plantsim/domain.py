"""Shared vocabulary types for the plant monitoring pipeline.

Units are documented conventions enforced by tests, not a unit library:
temperatures in degrees C, humidity and soil moisture in percent,
distances and levels in centimetres, time in seconds since run start.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

# Sensor identifiers used across sensing, envsim and telemetry.
SENSOR_TEMP = "temp"
SENSOR_HUMIDITY = "humidity"
SENSOR_SOIL = "soil"
SENSOR_DISTANCE = "distance"
SENSOR_NUTRIENT = "nutrient"
SENSORS = (SENSOR_TEMP, SENSOR_HUMIDITY, SENSOR_SOIL, SENSOR_DISTANCE, SENSOR_NUTRIENT)

# Physical ranges of the raw quantities. A healthy sensor reports inside
# these; the fault detector flags readings outside them. Soil counts are
# 12-bit ADC style, the distance range is the ultrasonic sensor's 2-400 cm.
RAW_RANGES = {
    SENSOR_TEMP: (-40.0, 80.0),
    SENSOR_HUMIDITY: (0.0, 100.0),
    SENSOR_SOIL: (0.0, 4095.0),
    SENSOR_DISTANCE: (2.0, 400.0),
    SENSOR_NUTRIENT: (-55.0, 125.0),
}

SOIL_RAW_MAX = 4095.0


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


class SensorFrame(NamedTuple):
    """One timestamped set of raw sensor quantities.

    Frames produced by a healthy simulated sensor stay inside RAW_RANGES;
    the type itself does not reject out-of-range values because fault
    injection and fault detection need to see them.
    """

    t: float                      # seconds since run start
    temp_raw: float               # degC
    humidity_raw: float           # %RH
    soil_raw: float               # ADC counts, nominally [0, 4095]
    ultrasonic_distance_cm: float  # cm, nominally [2, 400]
    nutrient_temp_raw: float      # degC


class SensorHealth(NamedTuple):
    """Per-sensor ok (True) / faulted (False) flags."""

    temp: bool = True
    humidity: bool = True
    soil: bool = True
    distance: bool = True
    nutrient: bool = True

    def all_ok(self) -> bool:
        return self.temp and self.humidity and self.soil and self.distance and self.nutrient


HEALTHY = SensorHealth()


class CalibratedFrame(NamedTuple):
    """Physical-unit readings after calibration and filtering."""

    t: float
    temp_c: float
    humidity_pct: float        # clamped to [0, 100]
    soil_moisture_pct: float   # clamped to [0, 100]
    water_level_cm: float      # >= 0
    nutrient_temp_c: float
    health: SensorHealth = HEALTHY


@dataclass(frozen=True)
class CalibrationParams:
    """User-adjustable calibration constants.

    alpha_t is an additive temperature offset, beta_h a multiplicative
    humidity gain, sm_dry/sm_wet the raw counts for bone-dry and saturated
    soil (dry > wet is normal for capacitive probes), tank_height_cm the
    reservoir geometry for deriving water level from ultrasonic distance.
    alpha_nt is an additive offset for the nutrient temperature probe.
    """

    alpha_t: float = 0.0
    beta_h: float = 1.0
    sm_dry: float = 3000.0
    sm_wet: float = 1200.0
    tank_height_cm: float = 40.0
    alpha_nt: float = 0.0

    def __post_init__(self) -> None:
        if self.sm_wet == self.sm_dry:
            raise ValueError("sm_wet must differ from sm_dry")
        if self.beta_h <= 0:
            raise ValueError("beta_h must be > 0")
        if self.tank_height_cm <= 0:
            raise ValueError("tank_height_cm must be > 0")


# Factory defaults restored by automatic recalibration.
FACTORY_CALIBRATION = CalibrationParams()


class InvalidThresholds(ValueError):
    """Raised when a threshold triple violates its ordering constraints."""


@dataclass(frozen=True)
class Thresholds:
    """Irrigation and alarm thresholds.

    soil_low_pct/soil_high_pct bound the hysteresis band (pump on below
    low, off above high); water_critical_cm is the reservoir alarm level.
    """

    soil_low_pct: float = 60.0
    soil_high_pct: float = 80.0
    water_critical_cm: float = 5.0


def validate_thresholds(th: Thresholds) -> Thresholds:
    """Check 0 <= low < high <= 100 and critical >= 0; raise InvalidThresholds."""
    if not 0.0 <= th.soil_low_pct:
        raise InvalidThresholds("soil_low_pct must be >= 0")
    if not th.soil_low_pct < th.soil_high_pct:
        raise InvalidThresholds("soil_low_pct must be strictly below soil_high_pct")
    if not th.soil_high_pct <= 100.0:
        raise InvalidThresholds("soil_high_pct must be <= 100")
    if not th.water_critical_cm >= 0.0:
        raise InvalidThresholds("water_critical_cm must be >= 0")
    return th


class AlertKind(str, enum.Enum):
    SOIL_CRITICAL = "SoilCritical"
    WATER_CRITICAL = "WaterCritical"
    SENSOR_FAULT = "SensorFault"
    RECOVERY = "Recovery"


class Severity(str, enum.Enum):
    WARNING = "Warning"
    CRITICAL = "Critical"


class AlertChannel(str, enum.Enum):
    EMAIL_LIKE = "EmailLike"
    SMS_LIKE = "SmsLike"


# The documented kind -> (severity, channel) table. Critical conditions go
# to the SMS-like sink, warnings to the email-like sink.
ALERT_TABLE = {
    AlertKind.SOIL_CRITICAL: (Severity.WARNING, AlertChannel.EMAIL_LIKE),
    AlertKind.WATER_CRITICAL: (Severity.CRITICAL, AlertChannel.SMS_LIKE),
    AlertKind.SENSOR_FAULT: (Severity.WARNING, AlertChannel.EMAIL_LIKE),
    AlertKind.RECOVERY: (Severity.WARNING, AlertChannel.EMAIL_LIKE),
}


class AlertRequest(NamedTuple):
    """An alert asking to be raised; ids are assigned by whoever stores it."""

    kind: AlertKind
    severity: Severity
    channel: AlertChannel
    t: float
    payload: str


class AlertEvent(NamedTuple):
    """A stored alert with its sequence id."""

    id: int
    t: float
    kind: AlertKind
    severity: Severity
    channel: AlertChannel
    payload: str


def make_alert_request(kind: AlertKind, t: float, payload: str) -> AlertRequest:
    """Build a request with severity/channel taken from ALERT_TABLE."""
    severity, channel = ALERT_TABLE[kind]
    return AlertRequest(kind, severity, channel, t, payload)


def raw_range(sensor: str) -> tuple[float, float]:
    return RAW_RANGES[sensor]


def frame_raw_values(frame: SensorFrame) -> dict[str, float]:
    """Raw readings keyed by sensor name, for range checks and fault logic."""
    return {
        SENSOR_TEMP: frame.temp_raw,
        SENSOR_HUMIDITY: frame.humidity_raw,
        SENSOR_SOIL: frame.soil_raw,
        SENSOR_DISTANCE: frame.ultrasonic_distance_cm,
        SENSOR_NUTRIENT: frame.nutrient_temp_raw,
    }
