"""Signal-pipeline tests.

The moving-average filter is checked against an independent brute-force
oracle (explicit slices, no shared code with the implementation), with a
handful of hand-computed values frozen in.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plantsim.domain import (
    FACTORY_CALIBRATION,
    AlertKind,
    CalibrationParams,
    SensorFrame,
)
from plantsim.sensing import (
    FAST_DELTA_PCT_PER_MIN,
    FILTER_WINDOW,
    RATE_FAST_HZ,
    RATE_MID_HZ,
    RATE_SLOW_HZ,
    SLOW_DELTA_PCT_PER_MIN,
    AdaptiveSampler,
    FaultDetector,
    FaultState,
    MovingAverage,
    NoFaultPresent,
    SensingPipeline,
    auto_recalibrate,
    calibrate,
    moving_average,
    rate_for_delta,
    restore_factory,
    soil_raw_from_pct,
)


def window_mean_oracle(xs, window):
    """Reference filter: mean over the trailing `window` samples, partial
    means while fewer samples exist. Deliberately naive."""
    out = []
    for i in range(len(xs)):
        lo = max(0, i - window + 1)
        out.append(sum(xs[lo:i + 1]) / (i + 1 - lo))
    return out


def frame(t=0.0, temp=21.0, hum=55.0, soil=2100.0, dist=12.0, nut=19.0):
    return SensorFrame(t=t, temp_raw=temp, humidity_raw=hum, soil_raw=soil,
                       ultrasonic_distance_cm=dist, nutrient_temp_raw=nut)


class TestCalibrate:
    def test_temperature_offset(self):
        p = CalibrationParams(alpha_t=-0.8)
        assert calibrate(frame(temp=20.0), p).temp_c == pytest.approx(19.2)

    def test_humidity_gain_and_clamp(self):
        p = CalibrationParams(beta_h=1.1)
        assert calibrate(frame(hum=55.0), p).humidity_pct == pytest.approx(60.5)
        assert calibrate(frame(hum=95.0), p).humidity_pct == 100.0
        p2 = CalibrationParams(beta_h=0.5)
        assert calibrate(frame(hum=0.0), p2).humidity_pct == 0.0

    def test_soil_two_point(self):
        p = CalibrationParams(sm_dry=3000.0, sm_wet=1000.0)
        assert calibrate(frame(soil=2000.0), p).soil_moisture_pct == pytest.approx(50.0)
        assert calibrate(frame(soil=3000.0), p).soil_moisture_pct == 0.0
        assert calibrate(frame(soil=1000.0), p).soil_moisture_pct == 100.0

    def test_soil_clamped_outside_calibration_points(self):
        p = CalibrationParams(sm_dry=3000.0, sm_wet=1000.0)
        assert calibrate(frame(soil=3500.0), p).soil_moisture_pct == 0.0
        assert calibrate(frame(soil=500.0), p).soil_moisture_pct == 100.0

    def test_water_level_from_distance(self):
        p = CalibrationParams(tank_height_cm=40.0)
        assert calibrate(frame(dist=12.0), p).water_level_cm == pytest.approx(28.0)
        assert calibrate(frame(dist=45.0), p).water_level_cm == 0.0

    def test_nutrient_offset(self):
        p = CalibrationParams(alpha_nt=0.3)
        assert calibrate(frame(nut=19.0), p).nutrient_temp_c == pytest.approx(19.3)

    def test_soil_inverse(self):
        p = CalibrationParams(sm_dry=3000.0, sm_wet=1000.0)
        raw = soil_raw_from_pct(50.0, p)
        assert raw == pytest.approx(2000.0)
        assert calibrate(frame(soil=raw), p).soil_moisture_pct == pytest.approx(50.0)

    @given(
        soil=st.floats(min_value=0.0, max_value=4095.0),
        hum=st.floats(min_value=0.0, max_value=100.0),
        dist=st.floats(min_value=2.0, max_value=400.0),
    )
    def test_outputs_in_physical_bounds(self, soil, hum, dist):
        c = calibrate(frame(soil=soil, hum=hum, dist=dist),
                      CalibrationParams(beta_h=1.07))
        assert 0.0 <= c.soil_moisture_pct <= 100.0
        assert 0.0 <= c.humidity_pct <= 100.0
        assert c.water_level_cm >= 0.0

    @given(pct=st.floats(min_value=0.0, max_value=100.0))
    def test_soil_round_trip(self, pct):
        p = FACTORY_CALIBRATION
        back = calibrate(frame(soil=soil_raw_from_pct(pct, p)), p).soil_moisture_pct
        assert back == pytest.approx(pct, abs=1e-9)


class TestMovingAverage:
    def test_frozen_warmup_sequence(self):
        # Stream 1..10: partial means 1.0, 1.5, 2.0, ... then full-window 5.5.
        ma = MovingAverage(FILTER_WINDOW)
        outs = [ma.step(float(x)) for x in range(1, 11)]
        assert outs == pytest.approx([1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5])

    def test_window_flush(self):
        ma = MovingAverage(FILTER_WINDOW)
        for x in range(1, 11):
            ma.step(float(x))
        last = 0.0
        for _ in range(FILTER_WINDOW):
            last = ma.step(100.0)
        assert last == pytest.approx(100.0)

    def test_matches_oracle_on_fixed_stream(self):
        xs = [3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, 6.0, -5.0, 3.0, 5.0, 8.0]
        ma = MovingAverage(4)
        got = [ma.step(x) for x in xs]
        assert got == pytest.approx(window_mean_oracle(xs, 4))

    def test_reset_restarts_warmup(self):
        ma = MovingAverage(3)
        ma.step(10.0)
        ma.step(20.0)
        ma.reset()
        assert ma.value is None
        assert ma.step(7.0) == pytest.approx(7.0)

    def test_rejects_bad_window(self):
        with pytest.raises(ValueError):
            MovingAverage(0)

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=200),
           st.integers(min_value=1, max_value=20))
    def test_streaming_matches_oracle(self, xs, window):
        ma = MovingAverage(window)
        got = [ma.step(x) for x in xs]
        assert got == pytest.approx(window_mean_oracle(xs, window), abs=1e-6)


class TestBulkMovingAverage:
    def test_matches_oracle_1d(self):
        rng = np.random.default_rng(7)
        xs = rng.normal(size=500)
        got = moving_average(xs, FILTER_WINDOW)
        assert got == pytest.approx(window_mean_oracle(list(xs), FILTER_WINDOW))

    def test_matches_oracle_2d_batch(self):
        rng = np.random.default_rng(11)
        xs = rng.normal(size=(50, 80))
        got = moving_average(xs, FILTER_WINDOW)
        for row_got, row_in in zip(got, xs):
            assert row_got == pytest.approx(window_mean_oracle(list(row_in), FILTER_WINDOW))

    def test_empty_series(self):
        assert moving_average(np.array([]), 10).size == 0

    def test_short_series_all_partial(self):
        got = moving_average([4.0, 6.0], 10)
        assert list(got) == pytest.approx([4.0, 5.0])

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=300),
           st.integers(min_value=1, max_value=25))
    @settings(max_examples=50)
    def test_bulk_matches_streaming(self, xs, window):
        ma = MovingAverage(window)
        streamed = [ma.step(x) for x in xs]
        assert list(moving_average(xs, window)) == pytest.approx(streamed, abs=1e-6)

    @given(st.lists(st.floats(min_value=-1e3, max_value=1e3), min_size=1, max_size=100),
           st.floats(min_value=-100.0, max_value=100.0),
           st.floats(min_value=0.1, max_value=10.0))
    @settings(max_examples=50)
    def test_affine_equivariance(self, xs, b, a):
        # mean(a*x + b) = a*mean(x) + b, so the filter commutes with
        # affine maps; calibration order therefore cannot change results.
        base = moving_average(xs, 10)
        mapped = moving_average([a * x + b for x in xs], 10)
        assert list(mapped) == pytest.approx(list(a * base + b), abs=1e-6)


class TestAdaptiveSampler:
    def test_rate_for_delta_branches(self):
        assert rate_for_delta(6.0) == RATE_FAST_HZ
        assert rate_for_delta(3.0) == RATE_MID_HZ
        assert rate_for_delta(0.5) == RATE_SLOW_HZ
        assert rate_for_delta(-6.0) == RATE_FAST_HZ

    def test_boundaries_take_middle_rate(self):
        assert rate_for_delta(FAST_DELTA_PCT_PER_MIN) == RATE_MID_HZ
        assert rate_for_delta(SLOW_DELTA_PCT_PER_MIN) == RATE_MID_HZ

    @given(st.floats(min_value=-50.0, max_value=50.0, allow_nan=False))
    def test_rate_always_one_of_three(self, d):
        assert rate_for_delta(d) in (RATE_FAST_HZ, RATE_MID_HZ, RATE_SLOW_HZ)

    @given(st.floats(min_value=0.0, max_value=50.0), st.floats(min_value=0.0, max_value=50.0))
    def test_rate_monotone_in_magnitude(self, d1, d2):
        lo, hi = sorted((d1, d2))
        assert rate_for_delta(lo) <= rate_for_delta(hi)

    def test_first_step_seeds_reference(self):
        s = AdaptiveSampler()
        assert s.step(70.0, 0.0) == RATE_MID_HZ

    def test_slope_normalised_per_minute(self):
        s = AdaptiveSampler()
        s.step(70.0, 0.0)
        # 6% over 2 minutes = 3 %/min: middle rate.
        assert s.step(64.0, 120.0) == RATE_MID_HZ
        # 6% over the next 1 minute = 6 %/min: fast.
        assert s.step(58.0, 180.0) == RATE_FAST_HZ
        # 0.5% over 1 minute: slow.
        assert s.step(57.5, 240.0) == RATE_SLOW_HZ

    def test_time_must_advance(self):
        s = AdaptiveSampler()
        s.step(70.0, 0.0)
        with pytest.raises(ValueError):
            s.step(70.0, 0.0)


class TestFaultDetector:
    def test_out_of_range_immediate(self):
        fd = FaultDetector()
        trs = fd.step(frame(t=1.0, dist=500.0))
        assert [(tr.sensor, tr.after) for tr in trs] == [("distance", FaultState.OUT_OF_RANGE)]

    def test_out_of_range_edge_triggered(self):
        fd = FaultDetector()
        fd.step(frame(t=1.0, dist=500.0))
        assert fd.step(frame(t=2.0, dist=510.0)) == []

    def test_recovery_transition_reported(self):
        fd = FaultDetector()
        fd.step(frame(t=1.0, dist=500.0))
        trs = fd.step(frame(t=2.0, dist=30.0))
        assert [(tr.sensor, tr.before, tr.after) for tr in trs] == [
            ("distance", FaultState.OUT_OF_RANGE, FaultState.OK)]

    @staticmethod
    def wiggled(i, **kw):
        # Other channels must vary, else they would go stuck themselves.
        base = dict(t=float(i), temp=20.0 + 0.01 * i, hum=55.0 + 0.1 * (i % 7),
                    dist=12.0 + 0.05 * (i % 5), nut=19.0 + 0.02 * (i % 3),
                    soil=2100.0 + i)
        base.update(kw)
        return frame(**base)

    def test_stuck_at_after_k_identical(self):
        fd = FaultDetector(stuck_count=30)
        for i in range(29):
            assert fd.step(self.wiggled(i, soil=2222.0)) == []
        trs = fd.step(self.wiggled(29, soil=2222.0))
        assert [(tr.sensor, tr.after) for tr in trs] == [("soil", FaultState.STUCK_AT)]

    def test_changed_value_resets_stuck_counter(self):
        fd = FaultDetector(stuck_count=3)
        fd.step(self.wiggled(0, soil=2222.0))
        fd.step(self.wiggled(1, soil=2222.0))
        fd.step(self.wiggled(2, soil=2223.0))  # breaks the run
        assert fd.step(self.wiggled(3, soil=2223.0)) == []
        assert fd.faulted_sensors() == []

    def test_health_reflects_states(self):
        fd = FaultDetector()
        fd.step(frame(t=0.0, soil=9999.0))
        h = fd.health()
        assert not h.soil
        assert h.temp and h.humidity and h.distance and h.nutrient

    def test_stuck_while_in_range_only(self):
        # Out-of-range wins over stuck: a pegged out-of-range reading
        # reports OutOfRange, not StuckAt.
        fd = FaultDetector(stuck_count=3)
        for i in range(5):
            fd.step(frame(t=float(i), soil=9999.0, temp=float(i)))
        assert fd.states["soil"] is FaultState.OUT_OF_RANGE


class TestAutoRecalibrate:
    def test_requires_a_fault(self):
        fd = FaultDetector()
        with pytest.raises(NoFaultPresent):
            auto_recalibrate(CalibrationParams(), fd, FACTORY_CALIBRATION)

    def test_restores_only_faulted_fields(self):
        tweaked = CalibrationParams(alpha_t=1.5, beta_h=1.2, sm_dry=2800.0,
                                    sm_wet=1100.0, tank_height_cm=35.0)
        fd = FaultDetector()
        fd.step(frame(t=0.0, soil=9999.0))
        result = auto_recalibrate(tweaked, fd, FACTORY_CALIBRATION, t=0.0)
        assert result.params.sm_dry == FACTORY_CALIBRATION.sm_dry
        assert result.params.sm_wet == FACTORY_CALIBRATION.sm_wet
        # Unfaulted sensors keep their user calibration.
        assert result.params.alpha_t == 1.5
        assert result.params.beta_h == 1.2
        assert result.params.tank_height_cm == 35.0
        assert result.recovered == ["soil"]

    def test_emits_recovery_alert_and_clears_fault(self):
        fd = FaultDetector()
        fd.step(frame(t=0.0, soil=9999.0))
        result = auto_recalibrate(CalibrationParams(), fd, FACTORY_CALIBRATION, t=5.0)
        assert [a.kind for a in result.alerts] == [AlertKind.RECOVERY]
        assert fd.faulted_sensors() == []

    def test_restore_factory_noop_for_no_sensors(self):
        p = CalibrationParams(alpha_t=2.0)
        assert restore_factory(p, [], FACTORY_CALIBRATION) == p


class TestSensingPipeline:
    def test_clean_stream_no_alerts(self):
        p = SensingPipeline(FACTORY_CALIBRATION)
        for i in range(20):
            cal, alerts = p.process(frame(t=float(i), soil=2100.0 + i))
            assert alerts == []
            assert cal.health.all_ok()

    def test_fault_raises_alert_then_recovery(self):
        p = SensingPipeline(CalibrationParams(sm_dry=2900.0, sm_wet=1150.0))
        p.process(frame(t=0.0))
        cal, alerts = p.process(frame(t=1.0, soil=9999.0))
        kinds = [a.kind for a in alerts]
        assert kinds == [AlertKind.SENSOR_FAULT, AlertKind.RECOVERY]
        # Factory soil constants are back after the automatic recalibration.
        assert p.params.sm_dry == FACTORY_CALIBRATION.sm_dry
        assert p.params.sm_wet == FACTORY_CALIBRATION.sm_wet

    def test_fault_episode_alerts_once(self):
        p = SensingPipeline(FACTORY_CALIBRATION, auto_recalibrate=False)
        p.process(frame(t=0.0))
        _, first = p.process(frame(t=1.0, soil=9999.0))
        _, second = p.process(frame(t=2.0, soil=9999.0))
        assert [a.kind for a in first] == [AlertKind.SENSOR_FAULT]
        assert second == []

    def test_filter_cleared_on_recalibration(self):
        p = SensingPipeline(FACTORY_CALIBRATION)
        for i in range(10):
            p.process(frame(t=float(i), soil=3000.0, temp=15.0 + i))
        p.process(frame(t=10.0, soil=9999.0, temp=30.0))
        # Soil filter restarted: next reading stands alone instead of
        # averaging with pre-fault history.
        cal, _ = p.process(frame(t=11.0, soil=2100.0, temp=30.0))
        expected = calibrate(frame(t=11.0, soil=2100.0), FACTORY_CALIBRATION).soil_moisture_pct
        assert cal.soil_moisture_pct == pytest.approx(expected)

    def test_rate_update_gated_by_period(self):
        p = SensingPipeline(FACTORY_CALIBRATION)
        assert p.maybe_update_rate(70.0, 0.0) == RATE_MID_HZ
        # Within the same evaluation window the rate does not move.
        assert p.maybe_update_rate(40.0, 30.0) == RATE_MID_HZ
        # After a full minute the slope (30% over 60s) selects fast.
        assert p.maybe_update_rate(40.0, 60.0) == RATE_FAST_HZ
