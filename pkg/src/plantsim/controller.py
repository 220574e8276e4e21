"""Irrigation controller: an explicit state machine with hysteresis.

One step consumes a calibrated frame and produces the next state plus any
alert requests. The pump turns on below the low soil threshold and off
above the high one; inside the band it holds, so the pump cannot chatter.
A water level under the critical threshold overrides everything: pump
forced off, buzzer on, red LED, one emergency alert per onset. Sensor
faults park the controller in a pump-off warning mode until readings
recover.

State is immutable; steps return the same object when nothing changed, so
callers may skip downstream work by identity check.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

from .domain import (
    AlertKind,
    AlertRequest,
    CalibratedFrame,
    InvalidThresholds,
    Thresholds,
    make_alert_request,
    validate_thresholds,
)


class Mode(str, enum.Enum):
    NORMAL = "Normal"
    IRRIGATING = "Irrigating"
    WATER_CRITICAL = "WaterCritical"
    FAULT = "Fault"


class Led(str, enum.Enum):
    GREEN = "Green"
    YELLOW = "Yellow"
    RED = "Red"


class Screen(str, enum.Enum):
    MAIN = "Main"
    SECONDARY = "Secondary"
    HISTORICAL = "Historical"
    SETTINGS = "Settings"


_SCREEN_ORDER = (Screen.MAIN, Screen.SECONDARY, Screen.HISTORICAL, Screen.SETTINGS)

# Character cell of the status display: 8 rows of 21 columns.
DISPLAY_ROWS = 8
DISPLAY_COLS = 21


class CommandVerb(str, enum.Enum):
    PUMP_ON = "PumpOn"
    PUMP_OFF = "PumpOff"
    SET_THRESHOLDS = "SetThresholds"
    ACK_ALERT = "AckAlert"


class RemoteCommand(NamedTuple):
    id: int
    verb: CommandVerb
    args: dict


class CommandAck(NamedTuple):
    ok: bool
    detail: str


class DisplayFrame(NamedTuple):
    screen: Screen
    lines: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class ControllerState:
    """Controller snapshot between steps.

    alarm_silenced records an operator acknowledgment during a water
    alarm: the buzzer stays quiet while the mode remains WaterCritical.
    It is the single sanctioned exception to "water-critical means buzzer
    on" and clears itself when the water level recovers.
    """

    mode: Mode = Mode.NORMAL
    pump_on: bool = False
    led: Led = Led.GREEN
    buzzer_on: bool = False
    alarm_silenced: bool = False
    screen: Screen = Screen.MAIN
    last_upload_t: float = 0.0
    thresholds: Thresholds = Thresholds()
    pending_alerts: tuple[AlertRequest, ...] = ()


def initial_state(thresholds: Thresholds = Thresholds(), start_t: float = 0.0) -> ControllerState:
    return ControllerState(thresholds=validate_thresholds(thresholds), last_upload_t=start_t)


def controller_step(
    cs: ControllerState,
    frame: CalibratedFrame,
    th: Optional[Thresholds] = None,
    now: Optional[float] = None,
) -> tuple[ControllerState, list[AlertRequest]]:
    """Advance the state machine by one frame.

    Priority: water-critical > sensor fault > irrigation hysteresis.
    Emergency and low-soil alerts are queued only on the transition into
    the respective condition, never re-queued while it persists.
    """
    if th is None:
        th = cs.thresholds
    t = frame.t if now is None else now
    alerts: list[AlertRequest] = []

    if frame.water_level_cm < th.water_critical_cm:
        mode, pump, led = Mode.WATER_CRITICAL, False, Led.RED
        if cs.mode is Mode.WATER_CRITICAL:
            silenced = cs.alarm_silenced
        else:
            silenced = False
            alerts.append(make_alert_request(
                AlertKind.WATER_CRITICAL, t,
                f"water level {frame.water_level_cm:.1f} cm below "
                f"critical {th.water_critical_cm:.1f} cm"))
        buzzer = not silenced
    elif not frame.health.all_ok():
        # Sensor data untrustworthy: hold the pump off and warn. Fault
        # alerts themselves originate in the sensing pipeline.
        mode, pump, led, buzzer, silenced = Mode.FAULT, False, Led.YELLOW, False, False
    else:
        soil = frame.soil_moisture_pct
        if soil < th.soil_low_pct:
            pump = True
        elif soil > th.soil_high_pct:
            pump = False
        else:
            pump = cs.pump_on
        if pump:
            mode, led = Mode.IRRIGATING, Led.YELLOW
            if cs.mode is not Mode.IRRIGATING:
                alerts.append(make_alert_request(
                    AlertKind.SOIL_CRITICAL, t,
                    f"soil moisture {soil:.1f}% below {th.soil_low_pct:.1f}%"))
        else:
            mode, led = Mode.NORMAL, Led.GREEN
        buzzer, silenced = False, False

    if (mode is cs.mode and pump == cs.pump_on and led is cs.led
            and buzzer == cs.buzzer_on and silenced == cs.alarm_silenced
            and not alerts):
        return cs, alerts
    return replace(
        cs, mode=mode, pump_on=pump, led=led, buzzer_on=buzzer,
        alarm_silenced=silenced,
        pending_alerts=cs.pending_alerts + tuple(alerts),
    ), alerts


def should_upload(cs: ControllerState, now: float, interval: float) -> bool:
    """True when a full upload interval has elapsed (boundary inclusive)."""
    if interval <= 0:
        raise ValueError("upload interval must be positive")
    return now - cs.last_upload_t >= interval


def mark_uploaded(cs: ControllerState, now: float) -> ControllerState:
    return replace(cs, last_upload_t=now)


def drain_alerts(cs: ControllerState) -> tuple[ControllerState, tuple[AlertRequest, ...]]:
    """Hand the queued alerts to the caller and clear the queue."""
    if not cs.pending_alerts:
        return cs, ()
    return replace(cs, pending_alerts=()), cs.pending_alerts


def apply_command(cs: ControllerState, cmd: RemoteCommand) -> tuple[ControllerState, CommandAck]:
    """Apply one remote command; rejections leave the state untouched.

    Pump verbs pass only in Normal/Irrigating: manual pump control during
    a water alarm or sensor fault is refused by the safety interlock.
    """
    verb = cmd.verb
    if verb in (CommandVerb.PUMP_ON, CommandVerb.PUMP_OFF):
        if cs.mode not in (Mode.NORMAL, Mode.IRRIGATING):
            return cs, CommandAck(False, f"RejectedBySafetyInterlock: mode {cs.mode.value}")
        want_on = verb is CommandVerb.PUMP_ON
        if want_on == cs.pump_on:
            return cs, CommandAck(True, "pump already in requested state")
        if want_on:
            return replace(cs, pump_on=True, mode=Mode.IRRIGATING, led=Led.YELLOW), \
                CommandAck(True, "pump on")
        return replace(cs, pump_on=False, mode=Mode.NORMAL, led=Led.GREEN), \
            CommandAck(True, "pump off")
    if verb is CommandVerb.SET_THRESHOLDS:
        base = cs.thresholds
        try:
            th = validate_thresholds(Thresholds(
                soil_low_pct=float(cmd.args.get("soil_low_pct", base.soil_low_pct)),
                soil_high_pct=float(cmd.args.get("soil_high_pct", base.soil_high_pct)),
                water_critical_cm=float(cmd.args.get("water_critical_cm", base.water_critical_cm)),
            ))
        except (InvalidThresholds, TypeError, ValueError) as e:
            return cs, CommandAck(False, f"InvalidThresholds: {e}")
        return replace(cs, thresholds=th), CommandAck(True, "thresholds updated")
    if verb is CommandVerb.ACK_ALERT:
        if cs.mode is Mode.WATER_CRITICAL and cs.buzzer_on:
            return replace(cs, buzzer_on=False, alarm_silenced=True), \
                CommandAck(True, "alarm acknowledged")
        return cs, CommandAck(True, "no active alarm")
    return cs, CommandAck(False, f"unknown verb {verb!r}")


def advance_screen(cs: ControllerState) -> ControllerState:
    i = _SCREEN_ORDER.index(cs.screen)
    return replace(cs, screen=_SCREEN_ORDER[(i + 1) % len(_SCREEN_ORDER)])


def _fit(line: str) -> str:
    return line[:DISPLAY_COLS]


def _stats_row(label: str, values: Sequence[float]) -> str:
    return f"{label:<4}{min(values):5.1f}{sum(values) / len(values):6.1f}{max(values):6.1f}"


def render_display(
    cs: ControllerState,
    frame: CalibratedFrame,
    history: Sequence[CalibratedFrame] = (),
) -> DisplayFrame:
    """Deterministic text rendering of the active screen."""
    if cs.screen is Screen.MAIN:
        lines = [
            "PLANT MONITOR",
            f"Temp {frame.temp_c:6.1f} C",
            f"Hum  {frame.humidity_pct:6.1f} %",
            f"Soil {frame.soil_moisture_pct:6.1f} %",
            f"Mode {cs.mode.value}",
            f"Pump {'ON' if cs.pump_on else 'OFF'}",
        ]
    elif cs.screen is Screen.SECONDARY:
        status = "FAULT" if not frame.health.all_ok() else cs.mode.value
        lines = [
            "SYSTEM STATUS",
            f"Water {frame.water_level_cm:5.1f} cm",
            f"Nutr  {frame.nutrient_temp_c:5.1f} C",
            f"Stat  {status}",
            f"LED   {cs.led.value}",
            f"Buzz  {'ON' if cs.buzzer_on else 'off'}",
        ]
    elif cs.screen is Screen.HISTORICAL:
        if history:
            lines = [
                "24H  MIN  MEAN   MAX",
                _stats_row("Temp", [f.temp_c for f in history]),
                _stats_row("Hum", [f.humidity_pct for f in history]),
                _stats_row("Soil", [f.soil_moisture_pct for f in history]),
                _stats_row("Watr", [f.water_level_cm for f in history]),
            ]
        else:
            lines = ["24H  MIN  MEAN   MAX", "no data"]
    else:
        th = cs.thresholds
        lines = [
            "SETTINGS",
            f"SoilLo {th.soil_low_pct:5.1f} %",
            f"SoilHi {th.soil_high_pct:5.1f} %",
            f"WatCrit {th.water_critical_cm:4.1f} cm",
        ]
    return DisplayFrame(cs.screen, tuple(_fit(s) for s in lines[:DISPLAY_ROWS]))


def state_invariant_violations(cs: ControllerState) -> list[str]:
    """Consistency rules every post-step state must satisfy; empty = ok.

    The acknowledged-alarm latch is the one sanctioned buzzer exception:
    water-critical means the buzzer is on unless alarm_silenced is set.
    """
    v = []
    wc = cs.mode is Mode.WATER_CRITICAL
    if wc != (cs.buzzer_on or cs.alarm_silenced):
        v.append("water-critical mode must coincide with buzzer-or-silenced")
    if cs.buzzer_on and not wc:
        v.append("buzzer on outside water-critical")
    if cs.alarm_silenced and cs.buzzer_on:
        v.append("silenced alarm cannot keep the buzzer on")
    if wc and (cs.led is not Led.RED or cs.pump_on):
        v.append("water-critical requires red LED and pump off")
    if (cs.led is Led.RED) != wc:
        v.append("red LED must coincide with water-critical")
    if cs.mode is Mode.IRRIGATING and not (cs.pump_on and cs.led is Led.YELLOW):
        v.append("irrigating requires pump on and yellow LED")
    if cs.mode is Mode.NORMAL and (cs.pump_on or cs.led is not Led.GREEN):
        v.append("normal requires pump off and green LED")
    if cs.mode is Mode.FAULT and (cs.pump_on or cs.buzzer_on):
        v.append("fault mode requires pump and buzzer off")
    if cs.pump_on and cs.mode is not Mode.IRRIGATING:
        v.append("pump on implies irrigating mode")
    return v
