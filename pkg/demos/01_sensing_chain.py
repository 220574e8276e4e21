"""
Sensing chain walkthrough: raw counts to trustworthy percentages
================================================================

One raw frame at a time through calibration, smoothing and fault
handling, the same path every acquisition takes on the device.
"""
import numpy as np

from plantsim.domain import CalibrationParams, SensorFrame
from plantsim.sensing import SensingPipeline, rate_for_delta, soil_raw_from_pct

# A capacitive probe counts DOWN as soil gets wetter: dry air ~3000,
# water ~1200. The two-point calibration turns counts into percent.
probe = CalibrationParams(sm_dry=3000.0, sm_wet=1200.0)
pipeline = SensingPipeline(probe)


def frame(t, soil_pct, temp=21.0, hum=52.0, dist=8.0):
    return SensorFrame(t=t, temp_raw=temp, humidity_raw=hum,
                       soil_raw=soil_raw_from_pct(soil_pct, probe),
                       ultrasonic_distance_cm=dist, nutrient_temp_raw=19.0)


# --- 1. Calibration + filtering ----------------------------------------
# Feed a noisy plateau at 64 % moisture; the 10-sample moving average
# settles onto it while single frames jitter by a percent or two.
rng = np.random.default_rng(11)
print("t    raw->pct   filtered")
for t in range(12):
    noisy = 64.0 + rng.normal(0.0, 1.5)
    cal, alerts = pipeline.process(frame(float(t), noisy))
    print(f"{t:2d}   {noisy:7.2f}    {cal.soil_moisture_pct:7.2f}")
    assert not alerts

# --- 2. Adaptive sampling ----------------------------------------------
# The sampler picks 1 / 0.5 / 0.1 Hz from how fast moisture moves.
for slope in (0.2, 3.0, 8.0):
    print(f"slope {slope:4.1f} %/min -> {rate_for_delta(slope):.1f} Hz")

# --- 3. Fault detection and automatic recovery -------------------------
# A dead soil probe repeats the same count bit-for-bit while the other
# sensors keep jittering. After 30 identical readings the detector
# trips, that frame's health flag goes bad, and the pipeline restores
# factory calibration for the sensor and raises Recovery.
stuck_raw = soil_raw_from_pct(64.0, probe)
fired = []
for t in range(100, 130):
    f = SensorFrame(t=float(t), temp_raw=21.0 + rng.normal(0.0, 0.2),
                    humidity_raw=52.0 + rng.normal(0.0, 0.5),
                    soil_raw=stuck_raw,
                    ultrasonic_distance_cm=8.0 + rng.normal(0.0, 0.1),
                    nutrient_temp_raw=19.0 + rng.normal(0.0, 0.1))
    cal, alerts = pipeline.process(f)
    for a in alerts:
        fired.append(a.kind.value)
        print(f"t={t}: {a.kind.value}: {a.payload}")
print("health on the tripping frame:", cal.health)
assert fired == ["SensorFault", "Recovery"]

# The very next changing reading is healthy again.
cal, alerts = pipeline.process(frame(130.0, 63.5))
print("healthy again:", cal.health.all_ok())
