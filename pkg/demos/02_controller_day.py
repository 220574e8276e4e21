"""
Controller walkthrough: hysteresis, emergencies, remote overrides
=================================================================

Drives the irrigation state machine through a hand-scripted morning:
soil dries out, the pump kicks in, the tank runs low, an operator
silences the alarm remotely, water is refilled.
"""
from plantsim.controller import (
    CommandVerb,
    RemoteCommand,
    apply_command,
    controller_step,
    drain_alerts,
    initial_state,
    render_display,
)
from plantsim.domain import HEALTHY, CalibratedFrame, Thresholds

TH = Thresholds()  # soil band [60, 80] %, water critical below 5 cm


def frame(t, soil, water=20.0):
    return CalibratedFrame(t=t, temp_c=23.0, humidity_pct=55.0,
                           soil_moisture_pct=soil, water_level_cm=water,
                           nutrient_temp_c=19.5, health=HEALTHY)


def show(label, cs):
    print(f"{label:32s} mode={cs.mode.value:13s} pump={'ON ' if cs.pump_on else 'off'}"
          f" led={cs.led.value:6s} buzzer={'ON' if cs.buzzer_on else 'off'}")


cs = initial_state(TH)
show("boot", cs)

# Soil drifts down inside the band: nothing happens (no chatter).
for t, soil in enumerate([72.0, 68.0, 63.0, 61.0]):
    cs, _ = controller_step(cs, frame(float(t), soil))
show("drifting inside the band", cs)

# Crossing the low edge starts the pump and raises one alert.
cs, alerts = controller_step(cs, frame(4.0, 59.4))
show("soil below 60", cs)
print("   alert:", alerts[0].kind.value, "-", alerts[0].payload)

# Rising back through the band keeps pumping (hysteresis): irrigation
# only stops above the high edge.
for t, soil in enumerate([63.0, 70.0, 77.0], start=5):
    cs, _ = controller_step(cs, frame(float(t), soil))
show("recovering, still in band", cs)
cs, _ = controller_step(cs, frame(8.0, 80.5))
show("above 80, target reached", cs)

# The tank runs out mid-morning: emergency overrides everything, the
# pump is forced off and the buzzer sounds.
cs, alerts = controller_step(cs, frame(9.0, 59.0, water=3.2))
show("reservoir below 5 cm", cs)
print("   alert:", alerts[0].kind.value, "-", alerts[0].payload)

# A remote acknowledgment silences the buzzer; the red light stays.
cs, ack = apply_command(cs, RemoteCommand(1, CommandVerb.ACK_ALERT, {}))
show("operator acks the alarm", cs)
print("   ack:", ack)

# Remote PumpOn is refused while the reservoir is empty.
cs, ack = apply_command(cs, RemoteCommand(2, CommandVerb.PUMP_ON, {}))
print("   pump-on during emergency ->", ack)

# Refilling the tank clears the emergency; low soil resumes irrigation.
cs, _ = controller_step(cs, frame(10.0, 59.0, water=25.0))
show("tank refilled", cs)

# Everything the morning queued for the cloud, in order:
cs, pending = drain_alerts(cs)
print("queued alerts:", [a.kind.value for a in pending])

# The 16x4 character display, as the device would draw it.
print()
for line in render_display(cs, frame(10.0, 59.0, water=25.0)).lines:
    print(f"  |{line:<16s}|")
