"""Vocabulary-type checks: validation rules and the alert routing table."""
import pytest

from plantsim.domain import (
    ALERT_TABLE,
    FACTORY_CALIBRATION,
    HEALTHY,
    RAW_RANGES,
    SENSORS,
    AlertChannel,
    AlertKind,
    CalibrationParams,
    InvalidThresholds,
    SensorFrame,
    SensorHealth,
    Severity,
    Thresholds,
    clamp,
    frame_raw_values,
    make_alert_request,
    validate_thresholds,
)


def test_clamp():
    assert clamp(5.0, 0.0, 10.0) == 5.0
    assert clamp(-1.0, 0.0, 10.0) == 0.0
    assert clamp(11.0, 0.0, 10.0) == 10.0
    assert clamp(0.0, 0.0, 10.0) == 0.0
    assert clamp(10.0, 0.0, 10.0) == 10.0


def test_raw_ranges_cover_all_sensors():
    assert set(RAW_RANGES) == set(SENSORS)
    for lo, hi in RAW_RANGES.values():
        assert lo < hi


def test_frame_raw_values_round_trip():
    f = SensorFrame(t=0.0, temp_raw=21.0, humidity_raw=55.0, soil_raw=2100.0,
                    ultrasonic_distance_cm=12.0, nutrient_temp_raw=19.0)
    vals = frame_raw_values(f)
    assert set(vals) == set(SENSORS)
    assert vals["soil"] == 2100.0
    assert vals["distance"] == 12.0


def test_health_all_ok():
    assert HEALTHY.all_ok()
    assert not SensorHealth(soil=False).all_ok()


class TestCalibrationParams:
    def test_factory_defaults(self):
        p = FACTORY_CALIBRATION
        assert p.sm_dry > p.sm_wet  # capacitive probe: dry counts higher
        assert p.tank_height_cm > 0

    def test_rejects_degenerate_soil_points(self):
        with pytest.raises(ValueError):
            CalibrationParams(sm_dry=2000.0, sm_wet=2000.0)

    def test_rejects_nonpositive_gain(self):
        with pytest.raises(ValueError):
            CalibrationParams(beta_h=0.0)
        with pytest.raises(ValueError):
            CalibrationParams(beta_h=-1.0)

    def test_rejects_nonpositive_tank(self):
        with pytest.raises(ValueError):
            CalibrationParams(tank_height_cm=0.0)

    def test_frozen(self):
        with pytest.raises(AttributeError):
            FACTORY_CALIBRATION.alpha_t = 1.0  # type: ignore[misc]


class TestThresholds:
    def test_defaults_valid(self):
        th = validate_thresholds(Thresholds())
        assert th.soil_low_pct == 60.0
        assert th.soil_high_pct == 80.0
        assert th.water_critical_cm == 5.0

    def test_low_must_be_below_high(self):
        with pytest.raises(InvalidThresholds):
            validate_thresholds(Thresholds(soil_low_pct=80.0, soil_high_pct=60.0))
        with pytest.raises(InvalidThresholds):
            validate_thresholds(Thresholds(soil_low_pct=70.0, soil_high_pct=70.0))

    def test_bounds(self):
        with pytest.raises(InvalidThresholds):
            validate_thresholds(Thresholds(soil_low_pct=-1.0))
        with pytest.raises(InvalidThresholds):
            validate_thresholds(Thresholds(soil_high_pct=101.0))
        with pytest.raises(InvalidThresholds):
            validate_thresholds(Thresholds(water_critical_cm=-2.0))

    def test_error_names_the_violated_constraint(self):
        with pytest.raises(InvalidThresholds, match="soil_low_pct"):
            validate_thresholds(Thresholds(soil_low_pct=90.0, soil_high_pct=80.0))


class TestAlertRouting:
    def test_table_covers_every_kind(self):
        assert set(ALERT_TABLE) == set(AlertKind)

    def test_severity_and_channel_assignments(self):
        assert ALERT_TABLE[AlertKind.SOIL_CRITICAL] == (Severity.WARNING, AlertChannel.EMAIL_LIKE)
        assert ALERT_TABLE[AlertKind.WATER_CRITICAL] == (Severity.CRITICAL, AlertChannel.SMS_LIKE)
        assert ALERT_TABLE[AlertKind.SENSOR_FAULT] == (Severity.WARNING, AlertChannel.EMAIL_LIKE)
        assert ALERT_TABLE[AlertKind.RECOVERY] == (Severity.WARNING, AlertChannel.EMAIL_LIKE)

    def test_make_alert_request_uses_table(self):
        req = make_alert_request(AlertKind.WATER_CRITICAL, 42.0, "tank low")
        assert req.severity is Severity.CRITICAL
        assert req.channel is AlertChannel.SMS_LIKE
        assert req.t == 42.0
        assert req.payload == "tank low"
