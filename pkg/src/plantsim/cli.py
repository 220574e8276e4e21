"""Operator entry point.

Four verbs share one config format: `simulate` runs a single policy under
virtual time, `compare` replays the three-policy water study, `serve`
hosts the ingest service (journaled, live rate limit, dashboard assets),
and `device` runs the plant-plus-firmware loop in wall-clock time against
a served instance. Exit codes: 0 success, 2 config problem, 3 runtime
failure.
"""
from __future__ import annotations

import argparse
import signal
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from .clocks import SystemClock
from .controller import (
    apply_command,
    controller_step,
    drain_alerts,
    initial_state,
    render_display,
)
from .envsim import CounterNoise, advance, encode_frame
from .httpapi import make_server
from .ingest import SINK_EMAIL, SINK_SMS, IngestService
from .scenario import (
    DEFAULT_CONFIG_YAML,
    ConfigError,
    ScenarioConfig,
    build_et_table,
    comparison_csv,
    comparison_text,
    default_config,
    load_config,
    run_comparison,
    run_scenario,
    series_csv,
    summary_csv,
    summary_text,
)
from .sensing import SensingPipeline
from .telemetry import (
    CsvJournalTransport,
    HttpTransport,
    UploadBuffer,
    enqueue_sample,
    flush,
    poll_commands,
)

DEFAULT_BIND = "127.0.0.1:8100"
DEFAULT_SERVICE_URL = "http://127.0.0.1:8100"
LIVE_UPLOAD_INTERVAL_S = 15.0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plantsim",
        description="Desk-scale plant monitoring: simulation, comparison, "
                    "cloud service and live device loop.")
    parser.add_argument("--print-default-config", action="store_true",
                        help="write the documented default config to stdout "
                             "and exit")
    sub = parser.add_subparsers(dest="cmd")

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None,
                       help="scenario config file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (overrides config out_dir)")

    sim = sub.add_parser("simulate", help="run one policy under virtual time")
    common(sim)

    cmp_ = sub.add_parser("compare",
                          help="run proposed vs timer vs manual irrigation")
    common(cmp_)

    srv = sub.add_parser("serve", help="run the ingest service over HTTP")
    common(srv)
    srv.add_argument("--bind", default=DEFAULT_BIND, help="addr:port to listen on")
    srv.add_argument("--data", type=Path, default=Path("data"),
                     help="journal directory (created if missing)")
    srv.add_argument("--assets", type=Path, default=None,
                     help="static dashboard directory to serve at /")
    srv.add_argument("--rate-limit", type=float, default=15.0,
                     help="minimum seconds between stored updates per channel")

    dev = sub.add_parser("device", help="run a live device against a service")
    common(dev)
    dev.add_argument("--service", default=DEFAULT_SERVICE_URL,
                     help="base URL of the ingest service")
    dev.add_argument("--interval", type=float, default=LIVE_UPLOAD_INTERVAL_S,
                     help="seconds between telemetry uploads")
    dev.add_argument("--duration", type=float, default=None,
                     help="stop after this many wall seconds (default: run on)")
    return parser


def _load_config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(["--seed: must be >= 0"])
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg: ScenarioConfig) -> Path:
    return args.out if args.out is not None else Path(cfg.out_dir)


def _write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    report = run_scenario(cfg)
    _write(out / "series.csv", series_csv(report))
    _write(out / "summary.csv", summary_csv(report))
    text = summary_text(report)
    _write(out / "summary.txt", text)
    print(text, end="")
    print(f"outputs written to {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    cr = run_comparison(cfg)
    for run in cr.runs:
        _write(out / f"series_{run.policy.lower()}.csv", series_csv(run))
    _write(out / "comparison.csv", comparison_csv(cr))
    text = comparison_text(cr)
    _write(out / "comparison.txt", text)
    print(text, end="")
    print(f"outputs written to {out}")
    return 0


def _parse_bind(bind: str) -> tuple[str, int]:
    host, sep, port = bind.rpartition(":")
    if not sep or not port.isdigit():
        raise ConfigError([f"--bind: expected addr:port, got {bind!r}"])
    return host or "127.0.0.1", int(port)


def _ensure_channel(service: IngestService):
    existing = service.channels()
    if existing:
        return existing[0]
    channel = service.create_channel("plant-monitor")
    # Stock alert rules for a fresh data dir, mirroring the default device
    # thresholds; the rearm gap keeps sensor noise near the threshold from
    # refiring on every sample. Journaled, so they survive restarts.
    service.add_rule(channel.id, 3, "<", 60.0, severity="warning",
                     sink=SINK_EMAIL, rearm_gap=2.0)
    service.add_rule(channel.id, 4, "<", 5.0, severity="critical",
                     sink=SINK_SMS, rearm_gap=1.0)
    return channel


def cmd_serve(args) -> int:
    addr = _parse_bind(args.bind)
    service = IngestService(data_dir=args.data, live_mode=True,
                            rate_limit_s=args.rate_limit)
    try:
        channel = _ensure_channel(service)
        bootstrap = {"channel_id": channel.id, "name": channel.name,
                     "read_key": channel.read_key,
                     "write_key": channel.write_key}
        assets = args.assets if args.assets and args.assets.is_dir() else None
        server = make_server(service, addr, assets_dir=assets,
                             bootstrap=bootstrap)
    except Exception:
        service.close()
        raise
    host, port = server.server_address[:2]
    print(f"serving channel {channel.id} ({channel.name}) "
          f"on http://{host}:{port}", flush=True)
    if assets:
        print(f"dashboard assets from {assets}", flush=True)
    try:
        server.serve_forever(poll_interval=0.2)
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.close()
    return 0


def _bootstrap_device(service_url: str) -> tuple[int, str]:
    import requests

    try:
        r = requests.get(f"{service_url.rstrip('/')}/bootstrap.json", timeout=5)
        doc = r.json()
        return int(doc["channel_id"]), str(doc["write_key"])
    except (requests.RequestException, ValueError, KeyError) as exc:
        raise RuntimeError(
            f"cannot bootstrap from {service_url}: {exc}") from exc


def cmd_device(args) -> int:
    """Wall-clock main loop: sense, decide, display, upload, obey.

    The plant lives in the same environment model the simulator uses,
    advanced by real elapsed time; outages are survived by the upload
    buffer and anything still queued at shutdown lands in a CSV journal.
    """
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    channel_id, write_key = _bootstrap_device(args.service)
    transport = HttpTransport(args.service, channel_id, write_key)
    print(f"device online: channel {channel_id} via {args.service}", flush=True)

    clock = SystemClock()
    noise_rng = CounterNoise(cfg.seed)
    pipeline = SensingPipeline(cfg.calibration)
    buffer = UploadBuffer(cfg.buffer_capacity)
    soil = replace(cfg.soil)
    tank = replace(cfg.tank)
    weather = cfg.weather
    cs = initial_state(cfg.thresholds)
    et_by_second = build_et_table(replace(cfg, duration_s=86400, dt_s=1.0,
                                          warmup_s=0))

    stop = False

    def request_stop(signum, frame):
        nonlocal stop
        stop = True

    try:
        signal.signal(signal.SIGINT, request_stop)
        signal.signal(signal.SIGTERM, request_stop)
    except ValueError:
        pass  # not the main thread (tests); rely on --duration

    start = clock.now()
    # Records go out stamped with wall time; the whole-second floor keeps
    # the timestamps exact through the ISO-8601 wire format.
    epoch0 = float(int(start))
    env_t = 0.0
    next_acq = 0.0
    next_upload = 0.0
    latest = None
    shown: Optional[tuple] = None
    while not stop:
        now = clock.now() - start
        if args.duration is not None and now >= args.duration:
            break
        # Integrate the plant over the wall time that actually elapsed,
        # in whole-second steps (the model's grid).
        while env_t + 1.0 <= now:
            advance(soil, tank, cs.pump_on,
                    et_by_second[int(env_t) % 86400], 1.0)
            env_t += 1.0
        if now >= next_acq:
            frame = encode_frame(soil.s, tank, weather, env_t, noise_rng,
                                 cfg.calibration)
            calib, _ = pipeline.process(frame)
            cs, _ = controller_step(cs, calib, now=now)
            cs, _ = drain_alerts(cs)
            latest = calib
            rate = pipeline.maybe_update_rate(calib.soil_moisture_pct, now)
            next_acq = now + 1.0 / rate
            display = render_display(cs, calib)
            key = (display.screen, tuple(display.lines))
            if key != shown:
                shown = key
                print("\n".join(display.lines) + "\n", flush=True)
        if latest is not None and now >= next_upload:
            enqueue_sample(buffer, latest._replace(t=epoch0 + latest.t),
                           cs, pipeline.current_rate_hz)
            flush(buffer, transport, clock=clock, max_attempts=1)
            next_upload = now + args.interval
        # poll_commands swallows transport failures itself; buffered
        # telemetry rides out the outage.
        for cmd in poll_commands(transport, limit=4):
            cs, ack = apply_command(cs, cmd)
            print(f"command {cmd.verb.value}: "
                  f"{'ok' if ack.ok else ack.detail}", flush=True)
        clock.sleep(0.25)

    # Shutdown contract: push what we can, journal the rest.
    if len(buffer):
        flush(buffer, transport, clock=clock, max_attempts=2)
    if len(buffer):
        out.mkdir(parents=True, exist_ok=True)
        journal = CsvJournalTransport(out / "pending.csv")
        flush(buffer, journal, clock=clock, max_attempts=1)
        print(f"journaled undelivered records to {out / 'pending.csv'}",
              flush=True)
    print("device stopped", flush=True)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        print(DEFAULT_CONFIG_YAML, end="")
        return 0
    if args.cmd is None:
        parser.print_usage(sys.stderr)
        return 2
    handlers = {"simulate": cmd_simulate, "compare": cmd_compare,
                "serve": cmd_serve, "device": cmd_device}
    try:
        return handlers[args.cmd](args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 0
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
