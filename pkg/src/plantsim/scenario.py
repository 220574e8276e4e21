"""Closed-loop scenario runner under virtual time.

Wires the environment, sensing pipeline, controller, upload buffer and an
in-process ingest service together and advances them event-driven: the
integrator runs in whole chunks bounded by the next acquisition, schedule
toggle or upload tick, so a 30-day run finishes in seconds while schedule
edges still land exactly (water totals are metered, not approximated).

Three irrigation policies share one weather realisation and one noise
seed (the noise generator is keyed by time, not by draw count), so water
and in-band differences between runs are attributable to policy alone.
"""
from __future__ import annotations

import csv
import io
import math
from array import array
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np
import yaml

from .clocks import VirtualClock
from .controller import (
    ControllerState,
    Led,
    Mode,
    Screen,
    controller_step,
    drain_alerts,
    initial_state,
)
from .domain import (
    AlertKind,
    CalibrationParams,
    InvalidThresholds,
    Thresholds,
    validate_thresholds,
)
from .envsim import (
    CounterNoise,
    IrrigationPolicy,
    ManualPolicy,
    NoiseParams,
    Proposed,
    SoilModel,
    TankModel,
    TimerPolicy,
    WeatherModel,
    advance,
    ambient,
    encode_frame,
    next_policy_toggle,
    policy_decide,
)
from .ingest import IngestService
from .sensing import SensingPipeline
from .telemetry import (
    FaultInjectingTransport,
    InProcessTransport,
    UploadBuffer,
    UploadStats,
    enqueue_sample,
    flush,
)

# Fully commented schema; also the single source of the committed scenario
# constants. Omitted keys in a user file take the values shown here.
DEFAULT_CONFIG_YAML = """\
# Scenario configuration. Omitted keys take the values shown here.
# All times are whole simulated seconds unless noted otherwise.

duration_s: 2592000        # simulated span (30 days)
dt_s: 1.0                  # integration step; must divide one second evenly
seed: 42                   # master seed for every sensor noise stream
warmup_s: 86400            # excluded from the in-band metric; < duration_s
series_period_s: 60        # row spacing of the time-series output CSV
out_dir: out               # output directory (the CLI --out flag overrides)

policy:
  kind: proposed           # proposed | timer | manual; `simulate` runs this
  timer:                   # fixed schedule: on for duration_s every period_s
    period_s: 43200
    duration_s: 510
  manual:                  # daily watering windows, each
    schedule:              # [seconds after midnight, duration in seconds]
      - [28800, 1200]

thresholds:
  soil_low_pct: 60.0       # pump on below this (hysteresis lower edge)
  soil_high_pct: 80.0      # pump off above this (hysteresis upper edge)
  water_critical_cm: 5.0   # reservoir level that forces the pump off

soil:
  initial_pct: 70.0
  et0_pct_per_min: 0.01113 # baseline evapotranspiration drain
  a_temp: 0.03             # ET sensitivity per degree C above 20
  b_hum: 0.5               # ET damping by relative humidity
  r_pump_pct_per_min: 1.0  # moisture gain while the pump runs

tank:
  height_cm: 45.0
  area_cm2: 1250.0
  initial_level_cm: 40.0
  pump_flow_lpm: 0.07533333333333334  # 45.2 L over 600 pump-minutes

weather:
  temp_mean_c: 22.0
  temp_amplitude_c: 6.0    # coldest at midnight, warmest at noon
  humidity_mean_pct: 60.0
  humidity_amplitude_pct: 15.0  # swings opposite to temperature
  period_s: 86400
  nutrient_damp: 0.25      # solution tracks ambient at a quarter the swing
  nutrient_lag_s: 7200     # and two hours behind

noise:
  enabled: true            # false freezes every sensor at model truth
  temp_c: 0.5
  humidity_pct: 2.0
  soil_raw: 18.0           # counts; about one percent of the probe span
  distance_cm: 0.3
  nutrient_c: 0.5

calibration:               # device-side constants; tank_height_cm must
  alpha_t: 0.0             # match the physical tank for true level reads
  beta_h: 1.0
  sm_dry: 3000.0
  sm_wet: 1200.0
  tank_height_cm: 45.0
  alpha_nt: 0.0

upload:
  interval_s: 3600         # telemetry cadence in virtual seconds
  buffer_capacity: 4096    # store-and-forward depth; oldest evicted beyond

outages: []                # transport-down windows, e.g. [[7200, 7260]]
"""


class ConfigError(ValueError):
    """Config rejected; .problems lists one diagnostic per offence."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


@dataclass(frozen=True)
class ScenarioConfig:
    """A fully validated scenario: models plus run bookkeeping."""

    duration_s: int
    dt_s: float
    seed: int
    warmup_s: int
    series_period_s: int
    out_dir: str
    policy: IrrigationPolicy
    timer: TimerPolicy
    manual: ManualPolicy
    thresholds: Thresholds
    calibration: CalibrationParams
    soil: SoilModel
    tank: TankModel
    weather: WeatherModel
    upload_interval_s: int
    buffer_capacity: int
    outages: tuple[tuple[float, float], ...]


def _deep_merge(base: dict, override: dict, path: str, problems: list[str]) -> dict:
    """Merge override into base, flagging keys the schema does not know."""
    merged = dict(base)
    for key, value in override.items():
        dotted = f"{path}{key}" if not path else f"{path}.{key}"
        if key not in base:
            problems.append(f"{dotted}: unknown key")
            continue
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                problems.append(f"{dotted}: expected a mapping")
                continue
            merged[key] = _deep_merge(base[key], value, dotted, problems)
        else:
            merged[key] = value
    return merged


class _Reader:
    """Pulls typed values out of the merged config, collecting problems."""

    def __init__(self, data: dict, problems: list[str]):
        self.data = data
        self.problems = problems

    def _raw(self, dotted: str):
        node = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    def num(self, dotted: str, *, whole: bool = False,
            minimum: Optional[float] = None,
            maximum: Optional[float] = None) -> float:
        value = self._raw(dotted)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.problems.append(f"{dotted}: expected a number, got {value!r}")
            return 0.0
        x = float(value)
        if whole and not x.is_integer():
            self.problems.append(f"{dotted}: must be a whole number of seconds")
            return 0.0
        if minimum is not None and x < minimum:
            self.problems.append(f"{dotted}: must be >= {minimum}")
            return minimum
        if maximum is not None and x > maximum:
            self.problems.append(f"{dotted}: must be <= {maximum}")
            return maximum
        return x

    def integer(self, dotted: str, *, minimum: Optional[int] = None) -> int:
        """Exact integer read; seeds must not round-trip through float."""
        value = self._raw(dotted)
        if isinstance(value, bool) or not isinstance(value, int):
            self.problems.append(f"{dotted}: expected an integer, got {value!r}")
            return 0
        if minimum is not None and value < minimum:
            self.problems.append(f"{dotted}: must be >= {minimum}")
            return minimum
        return value

    def flag(self, dotted: str) -> bool:
        value = self._raw(dotted)
        if not isinstance(value, bool):
            self.problems.append(f"{dotted}: expected true or false")
            return True
        return value

    def text(self, dotted: str) -> str:
        value = self._raw(dotted)
        if not isinstance(value, str) or not value:
            self.problems.append(f"{dotted}: expected a non-empty string")
            return "out"
        return value

    def build(self, dotted: str, factory, **kwargs):
        """Run a validating constructor, filing its complaint under dotted."""
        try:
            return factory(**kwargs)
        except (ValueError, TypeError) as exc:
            self.problems.append(f"{dotted}: {exc}")
            return None


def steps_per_second(dt_s: float) -> int:
    """dt must evenly divide one second so events land on the grid."""
    if dt_s <= 0:
        raise ValueError("dt_s must be positive")
    k = round(1.0 / dt_s)
    if k < 1 or abs(k * dt_s - 1.0) > 1e-12:
        raise ValueError("dt_s must evenly divide one second")
    return k


def _read_outages(raw, duration_s: float, problems: list[str]) -> tuple:
    if not isinstance(raw, list):
        problems.append("outages: expected a list of [start, end] pairs")
        return ()
    windows = []
    for i, pair in enumerate(raw):
        dotted = f"outages[{i}]"
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in pair)):
            problems.append(f"{dotted}: expected [start_s, end_s]")
            continue
        start, end = float(pair[0]), float(pair[1])
        if not (start.is_integer() and end.is_integer()):
            problems.append(f"{dotted}: must be whole seconds")
        elif not 0.0 <= start < end <= duration_s:
            problems.append(f"{dotted}: must satisfy 0 <= start < end <= duration")
        else:
            windows.append((start, end))
    windows.sort()
    for (a_start, a_end), (b_start, b_end) in zip(windows, windows[1:]):
        if b_start < a_end:
            problems.append(
                f"outages: [{b_start:g}, {b_end:g}] overlaps [{a_start:g}, {a_end:g}]")
    return tuple(windows)


def _read_schedule(raw, problems: list[str]) -> tuple:
    if not isinstance(raw, list) or not raw:
        problems.append("policy.manual.schedule: expected a non-empty list")
        return ((28800.0, 1200.0),)
    pairs = []
    for i, pair in enumerate(raw):
        dotted = f"policy.manual.schedule[{i}]"
        if (not isinstance(pair, (list, tuple)) or len(pair) != 2
                or any(isinstance(v, bool) or not isinstance(v, (int, float))
                       for v in pair)):
            problems.append(f"{dotted}: expected [start_s, duration_s]")
            continue
        start, dur = float(pair[0]), float(pair[1])
        if not (start.is_integer() and dur.is_integer()):
            problems.append(f"{dotted}: must be whole seconds")
        else:
            pairs.append((start, dur))
    return tuple(pairs)


def scenario_from_dict(user: dict) -> ScenarioConfig:
    """Validate a (possibly partial) config mapping against the schema."""
    problems: list[str] = []
    if user is None:
        user = {}
    if not isinstance(user, dict):
        raise ConfigError(["top level: expected a mapping"])
    defaults = yaml.safe_load(DEFAULT_CONFIG_YAML)
    data = _deep_merge(defaults, user, "", problems)
    r = _Reader(data, problems)

    duration = r.num("duration_s", whole=True, minimum=1)
    dt = r.num("dt_s")
    try:
        steps_per_second(dt)
    except ValueError as exc:
        problems.append(f"dt_s: {exc}")
    seed = r.integer("seed", minimum=0)
    warmup = r.num("warmup_s", whole=True, minimum=0)
    if warmup >= duration:
        problems.append("warmup_s: must be smaller than duration_s")
    series_period = r.num("series_period_s", whole=True, minimum=1)
    out_dir = r.text("out_dir")

    kind = data["policy"]["kind"]
    timer = r.build(
        "policy.timer", TimerPolicy,
        period_s=r.num("policy.timer.period_s", whole=True, minimum=1),
        duration_s=r.num("policy.timer.duration_s", whole=True, minimum=1))
    manual = r.build(
        "policy.manual", ManualPolicy,
        schedule=_read_schedule(data["policy"]["manual"]["schedule"], problems))
    if kind == "proposed":
        policy: Optional[IrrigationPolicy] = Proposed()
    elif kind == "timer":
        policy = timer
    elif kind == "manual":
        policy = manual
    else:
        problems.append(
            f"policy.kind: expected proposed, timer or manual, got {kind!r}")
        policy = Proposed()

    thresholds = r.build(
        "thresholds", Thresholds,
        soil_low_pct=r.num("thresholds.soil_low_pct"),
        soil_high_pct=r.num("thresholds.soil_high_pct"),
        water_critical_cm=r.num("thresholds.water_critical_cm", minimum=0))
    if thresholds is not None:
        try:
            validate_thresholds(thresholds)
        except InvalidThresholds as exc:
            problems.append(f"thresholds: {exc}")

    calibration = r.build(
        "calibration", CalibrationParams,
        alpha_t=r.num("calibration.alpha_t"),
        beta_h=r.num("calibration.beta_h"),
        sm_dry=r.num("calibration.sm_dry"),
        sm_wet=r.num("calibration.sm_wet"),
        tank_height_cm=r.num("calibration.tank_height_cm", minimum=1),
        alpha_nt=r.num("calibration.alpha_nt"))

    soil = r.build(
        "soil", SoilModel,
        s=r.num("soil.initial_pct", minimum=0, maximum=100),
        et0=r.num("soil.et0_pct_per_min", minimum=0),
        a_temp=r.num("soil.a_temp"),
        b_hum=r.num("soil.b_hum"),
        r_pump=r.num("soil.r_pump_pct_per_min"))

    tank = r.build(
        "tank", TankModel,
        height_cm=r.num("tank.height_cm"),
        area_cm2=r.num("tank.area_cm2"),
        level_cm=r.num("tank.initial_level_cm"),
        pump_flow_lpm=r.num("tank.pump_flow_lpm"))

    noise = (r.build(
        "noise", NoiseParams,
        temp_c=r.num("noise.temp_c", minimum=0),
        humidity_pct=r.num("noise.humidity_pct", minimum=0),
        soil_raw=r.num("noise.soil_raw", minimum=0),
        distance_cm=r.num("noise.distance_cm", minimum=0),
        nutrient_c=r.num("noise.nutrient_c", minimum=0))
        if r.flag("noise.enabled") else NoiseParams.zeros())

    weather = r.build(
        "weather", WeatherModel,
        temp_mean_c=r.num("weather.temp_mean_c"),
        temp_amp_c=r.num("weather.temp_amplitude_c", minimum=0),
        hum_mean_pct=r.num("weather.humidity_mean_pct", minimum=0, maximum=100),
        hum_amp_pct=r.num("weather.humidity_amplitude_pct", minimum=0),
        period_s=r.num("weather.period_s", minimum=1),
        nutrient_damp=r.num("weather.nutrient_damp", minimum=0),
        nutrient_lag_s=r.num("weather.nutrient_lag_s", minimum=0),
        noise=noise if noise is not None else NoiseParams.zeros())

    upload_interval = r.num("upload.interval_s", whole=True, minimum=1)
    capacity = r.integer("upload.buffer_capacity", minimum=1)
    outages = _read_outages(data["outages"], duration, problems)

    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(
        duration_s=int(duration),
        dt_s=dt,
        seed=seed,
        warmup_s=int(warmup),
        series_period_s=int(series_period),
        out_dir=out_dir,
        policy=policy,
        timer=timer,
        manual=manual,
        thresholds=thresholds,
        calibration=calibration,
        soil=soil,
        tank=tank,
        weather=weather,
        upload_interval_s=int(upload_interval),
        buffer_capacity=capacity,
        outages=outages,
    )


def default_config() -> ScenarioConfig:
    return scenario_from_dict({})


def load_config(path) -> ScenarioConfig:
    """Parse and validate a YAML config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError([f"{where}: {exc}"]) from exc
    return scenario_from_dict(raw)


def policy_name(p: IrrigationPolicy) -> str:
    if isinstance(p, Proposed):
        return "Proposed"
    if isinstance(p, TimerPolicy):
        return "Timer"
    return "Manual"


class SeriesRow(NamedTuple):
    """One time-series sample of model truth plus actuator state."""

    t_s: float
    temp_c: float
    humidity_pct: float
    soil_pct: float
    water_level_cm: float
    pump: int
    mode: str


@dataclass(frozen=True)
class RunReport:
    """Everything a scenario run is judged on."""

    policy: str
    seed: int
    duration_s: int
    warmup_s: int
    band_low_pct: float
    band_high_pct: float
    water_used_liters: float
    in_band_fraction: float
    alert_counts: dict
    alerts_total: int
    uploads_enqueued: int
    uploads_stored: int
    uploads_evicted: int
    upload_completeness: float
    starved_seconds: float
    final_soil_pct: float
    final_water_level_cm: float
    series: tuple


@dataclass(frozen=True)
class ComparisonReport:
    """Three policies on one environment realisation."""

    proposed: RunReport
    timer: RunReport
    manual: RunReport
    savings_vs_manual: float

    @property
    def runs(self) -> tuple:
        return (self.proposed, self.timer, self.manual)


def build_et_table(cfg: ScenarioConfig) -> array:
    """Evapotranspiration rate (%/min) at every integration step.

    ET depends only on ambient weather, never on soil state, so one table
    serves every policy of a comparison; it is the left-endpoint rate for
    the Euler step starting at index*dt.
    """
    k = steps_per_second(cfg.dt_s)
    w = cfg.weather
    t = np.arange(cfg.duration_s * k, dtype=np.float64) * cfg.dt_s
    c = np.cos(2.0 * np.pi * t / w.period_s)
    temp = w.temp_mean_c - w.temp_amp_c * c
    hum = np.clip(w.hum_mean_pct + w.hum_amp_pct * c, 0.0, 100.0)
    et = (cfg.soil.et0 * (1.0 + cfg.soil.a_temp * (temp - 20.0))
          * (1.0 - cfg.soil.b_hum * hum / 100.0))
    table = array("d")
    table.frombytes(et.astype(np.float64).tobytes())
    return table


def _policy_snapshot(thr: Thresholds, pump_on: bool, below: bool,
                     t: float) -> ControllerState:
    """Telemetry-only state for schedule-driven runs (no controller)."""
    if below:
        mode, led = Mode.WATER_CRITICAL, Led.RED
    elif pump_on:
        mode, led = Mode.IRRIGATING, Led.GREEN
    else:
        mode, led = Mode.NORMAL, Led.GREEN
    return ControllerState(mode=mode, pump_on=pump_on, led=led,
                           buzzer_on=below, alarm_silenced=False,
                           screen=Screen.MAIN, last_upload_t=t,
                           thresholds=thr, pending_alerts=())


def run_scenario(cfg: ScenarioConfig, *,
                 policy: Optional[IrrigationPolicy] = None,
                 service: Optional[IngestService] = None,
                 write_key: Optional[str] = None,
                 et_table: Optional[array] = None) -> RunReport:
    """Run one policy against one seeded environment realisation.

    When no service is supplied an in-memory one is created for the run.
    Series rows sample model truth each series period with the actuator
    state that was in effect during the preceding second; the in-band
    metric is time-weighted on the integration grid and skips the warmup.
    """
    policy = cfg.policy if policy is None else policy
    is_proposed = isinstance(policy, Proposed)
    clock = VirtualClock(0.0)
    own_service = service is None
    if own_service:
        service = IngestService(clock=clock)
    if write_key is None:
        channel = service.create_channel(f"plantsim-{policy_name(policy).lower()}")
        write_key = channel.write_key
    transport = InProcessTransport(service, write_key)
    if cfg.outages:
        transport = FaultInjectingTransport(transport, seed=cfg.seed,
                                            outages=cfg.outages, clock=clock)

    soil = replace(cfg.soil)
    tank = replace(cfg.tank)
    weather = cfg.weather
    thr = cfg.thresholds
    noise_rng = CounterNoise(cfg.seed)
    pipeline = SensingPipeline(cfg.calibration)
    buffer = UploadBuffer(cfg.buffer_capacity)
    et = build_et_table(cfg) if et_table is None else et_table

    k = steps_per_second(cfg.dt_s)
    dt = cfg.dt_s
    n_steps = cfg.duration_s * k
    if len(et) != n_steps:
        raise ValueError("et_table does not match duration_s / dt_s")
    row_every = cfg.series_period_s * k
    warmup_steps = cfg.warmup_s * k
    duration = float(cfg.duration_s)

    cs = initial_state(thr)
    pump_on = False
    was_below = False
    mode_str = Mode.NORMAL.value
    alert_counts: dict[str, int] = {}
    stats = UploadStats()
    enqueued = 0
    in_band_steps = 0
    starved_steps = 0
    band_lo, band_hi = thr.soil_low_pct, thr.soil_high_pct
    series: list[SeriesRow] = []
    latest_calib = None

    def count_alert(kind: AlertKind) -> None:
        alert_counts[kind.value] = alert_counts.get(kind.value, 0) + 1

    def acquire(t: float) -> float:
        """Sample, filter, decide; returns the next acquisition time."""
        nonlocal cs, pump_on, was_below, mode_str, latest_calib
        frame = encode_frame(soil.s, tank, weather, t, noise_rng, cfg.calibration)
        calib, sense_alerts = pipeline.process(frame)
        for a in sense_alerts:
            count_alert(a.kind)
        if is_proposed:
            cs, _ = controller_step(cs, calib)
            cs, pending = drain_alerts(cs)
            for a in pending:
                count_alert(a.kind)
            pump_on = cs.pump_on
            mode_str = cs.mode.value
        else:
            below = calib.water_level_cm < thr.water_critical_cm
            if below and not was_below:
                count_alert(AlertKind.WATER_CRITICAL)
            was_below = below
            mode_str = (Mode.WATER_CRITICAL.value if below
                        else Mode.IRRIGATING.value if pump_on
                        else Mode.NORMAL.value)
        latest_calib = calib
        rate = pipeline.maybe_update_rate(calib.soil_moisture_pct, t)
        return t + 1.0 / rate

    def upload(t: float) -> None:
        nonlocal enqueued
        rec_cs = cs if is_proposed else _policy_snapshot(thr, pump_on, was_below, t)
        enqueue_sample(buffer, latest_calib, rec_cs, pipeline.current_rate_hz)
        enqueued += 1
        clock.advance_to(t)
        # One attempt per record per tick; retries ride later ticks so the
        # scenario clock never jumps over backoff sleeps.
        stats.merge(flush(buffer, transport, max_attempts=1))

    if not is_proposed:
        pump_on = policy_decide(policy, 0.0, False)
        mode_str = Mode.IRRIGATING.value if pump_on else Mode.NORMAL.value
    next_acq = acquire(0.0)
    upload(0.0)
    temp0, hum0 = ambient(weather, 0.0)
    series.append(SeriesRow(0.0, temp0, hum0, soil.s, tank.level_cm,
                            int(pump_on), mode_str))
    next_upload = float(cfg.upload_interval_s)
    next_toggle = next_policy_toggle(policy, 0.0)

    t = 0.0
    j = 0
    while t < duration:
        t_next = next_acq if next_acq < next_upload else next_upload
        if next_toggle is not None and next_toggle < t_next:
            t_next = next_toggle
        if duration < t_next:
            t_next = duration
        j_next = round(t_next * k)
        while j < j_next:
            starved = advance(soil, tank, pump_on, et[j], dt)
            j += 1
            if starved:
                starved_steps += 1
            if j > warmup_steps and band_lo <= soil.s <= band_hi:
                in_band_steps += 1
            if j % row_every == 0:
                t_row = j * dt
                temp, hum = ambient(weather, t_row)
                series.append(SeriesRow(t_row, temp, hum, soil.s,
                                        tank.level_cm, int(pump_on), mode_str))
        t = t_next
        if t >= duration:
            break
        if next_toggle is not None and t == next_toggle:
            pump_on = policy_decide(policy, t, False)
            next_toggle = next_policy_toggle(policy, t)
        if t == next_acq:
            next_acq = acquire(t)
        if t == next_upload:
            upload(t)
            next_upload = t + cfg.upload_interval_s

    # Drain what the hourly ticks left behind; every outage window lies
    # inside [0, duration) so backoff sleeps now walk through clear air.
    clock.advance_to(duration)
    if len(buffer):
        stats.merge(flush(buffer, transport, clock=clock, max_attempts=8))
    if own_service:
        service.close()

    post_steps = n_steps - warmup_steps
    return RunReport(
        policy=policy_name(policy),
        seed=cfg.seed,
        duration_s=cfg.duration_s,
        warmup_s=cfg.warmup_s,
        band_low_pct=band_lo,
        band_high_pct=band_hi,
        water_used_liters=tank.drawn_liters,
        in_band_fraction=in_band_steps / post_steps if post_steps else 0.0,
        alert_counts=dict(sorted(alert_counts.items())),
        alerts_total=sum(alert_counts.values()),
        uploads_enqueued=enqueued,
        uploads_stored=stats.succeeded,
        uploads_evicted=buffer.evicted,
        upload_completeness=stats.succeeded / enqueued if enqueued else 1.0,
        starved_seconds=starved_steps * dt,
        final_soil_pct=soil.s,
        final_water_level_cm=tank.level_cm,
        series=tuple(series),
    )


def run_comparison(cfg: ScenarioConfig) -> ComparisonReport:
    """Proposed vs timer vs manual on the identical environment.

    The savings ratio is undefined (NaN) when the manual baseline pumped
    nothing, e.g. a span too short to reach its first schedule window.
    """
    et = build_et_table(cfg)
    proposed = run_scenario(cfg, policy=Proposed(), et_table=et)
    timer = run_scenario(cfg, policy=cfg.timer, et_table=et)
    manual = run_scenario(cfg, policy=cfg.manual, et_table=et)
    if manual.water_used_liters > 0.0:
        savings = 1.0 - proposed.water_used_liters / manual.water_used_liters
    else:
        savings = math.nan
    return ComparisonReport(proposed=proposed, timer=timer, manual=manual,
                            savings_vs_manual=savings)


def _fmt(x: float) -> str:
    """Shortest exact decimal; keeps CSV byte-stable and re-parseable."""
    return repr(float(x))


def series_csv(report: RunReport) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["t_s", "temp_c", "humidity_pct", "soil_pct",
                "water_level_cm", "pump", "mode"])
    for row in report.series:
        w.writerow([int(row.t_s), _fmt(row.temp_c), _fmt(row.humidity_pct),
                    _fmt(row.soil_pct), _fmt(row.water_level_cm),
                    row.pump, row.mode])
    return out.getvalue()


_SUMMARY_COLUMNS = (
    "policy", "seed", "duration_s", "warmup_s", "band_low_pct",
    "band_high_pct", "water_used_liters", "in_band_fraction", "alerts_total",
    "uploads_enqueued", "uploads_stored", "uploads_evicted",
    "upload_completeness", "starved_seconds", "final_soil_pct",
    "final_water_level_cm",
)


def _summary_cells(r: RunReport) -> list:
    return [r.policy, r.seed, r.duration_s, r.warmup_s,
            _fmt(r.band_low_pct), _fmt(r.band_high_pct),
            _fmt(r.water_used_liters), _fmt(r.in_band_fraction),
            r.alerts_total, r.uploads_enqueued, r.uploads_stored,
            r.uploads_evicted, _fmt(r.upload_completeness),
            _fmt(r.starved_seconds), _fmt(r.final_soil_pct),
            _fmt(r.final_water_level_cm)]


def summary_csv(report: RunReport) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(_SUMMARY_COLUMNS)
    w.writerow(_summary_cells(report))
    return out.getvalue()


def summary_text(report: RunReport) -> str:
    r = report
    alerts = (", ".join(f"{kind}={n}" for kind, n in r.alert_counts.items())
              or "none")
    lines = [
        f"Scenario: policy={r.policy} seed={r.seed} "
        f"duration={r.duration_s}s warmup={r.warmup_s}s",
        f"  water used            {r.water_used_liters:10.2f} L",
        f"  in-band fraction      {r.in_band_fraction:10.4f}  "
        f"(soil in [{r.band_low_pct:g}, {r.band_high_pct:g}] after warmup)",
        f"  upload completeness   {r.upload_completeness:10.4f}  "
        f"({r.uploads_stored}/{r.uploads_enqueued} stored, "
        f"{r.uploads_evicted} evicted)",
        f"  tank starved          {r.starved_seconds:10.1f} s",
        f"  final soil moisture   {r.final_soil_pct:10.2f} %",
        f"  final water level     {r.final_water_level_cm:10.2f} cm",
        f"  alerts                {alerts}",
    ]
    return "\n".join(lines) + "\n"


def _savings(water: float, manual_water: float) -> float:
    return 1.0 - water / manual_water if manual_water > 0.0 else math.nan


def comparison_csv(cr: ComparisonReport) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["policy", "water_used_liters", "in_band_fraction",
                "alerts_total", "savings_vs_manual"])
    manual_water = cr.manual.water_used_liters
    for r in cr.runs:
        w.writerow([r.policy, _fmt(r.water_used_liters),
                    _fmt(r.in_band_fraction), r.alerts_total,
                    _fmt(_savings(r.water_used_liters, manual_water))])
    return out.getvalue()


def comparison_text(cr: ComparisonReport) -> str:
    manual_water = cr.manual.water_used_liters
    lines = [f"{'Policy':<10}{'Water (L)':>11}{'In-band %':>11}"
             f"{'Alerts':>8}{'Savings vs manual':>19}"]
    for r in cr.runs:
        savings = _savings(r.water_used_liters, manual_water)
        lines.append(f"{r.policy:<10}{r.water_used_liters:>11.2f}"
                     f"{100.0 * r.in_band_fraction:>11.1f}"
                     f"{r.alerts_total:>8}{savings:>19.3f}")
    lines.append("")
    lines.append(f"Water savings, proposed vs manual: "
                 f"{100.0 * cr.savings_vs_manual:.1f}%")
    return "\n".join(lines) + "\n"
