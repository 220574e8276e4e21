"""Device-side telemetry: field mapping, store-and-forward buffer, retry.

Records are the eight-field wire unit: temperature, humidity, soil
moisture, water level, nutrient temperature, pump state, alert level,
sampling rate. The buffer is a bounded FIFO; when the transport fails,
records stay queued and flush retries oldest-first with exponential
backoff, so order is preserved and a later success uploads the backlog.

Every record carries a client-assigned sequence number. The service
deduplicates on it, which turns at-least-once delivery (a response can
be lost after the server stored the entry) into exactly-once storage.
"""
from __future__ import annotations

import csv
import random
import threading
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from .clocks import SystemClock, VirtualClock
from .controller import CommandVerb, ControllerState, Led, RemoteCommand
from .domain import CalibratedFrame

N_FIELDS = 8
DEFAULT_CAPACITY = 4096
DEFAULT_MAX_ATTEMPTS = 8
BACKOFF_BASE_S = 1.0
BACKOFF_CAP_S = 60.0

# field7 encodes the LED as a numeric alert level.
ALERT_LEVEL = {Led.GREEN: 0, Led.YELLOW: 1, Led.RED: 2}


class TelemetryRecord(NamedTuple):
    created_at: float
    client_seq: int
    fields: tuple  # 8 optional numerics, field1..field8


def make_record(frame: CalibratedFrame, cs: ControllerState, rate_hz: float,
                client_seq: int) -> TelemetryRecord:
    """Apply the fixed field mapping to one frame + controller snapshot."""
    return TelemetryRecord(
        created_at=frame.t,
        client_seq=client_seq,
        fields=(
            frame.temp_c,
            frame.humidity_pct,
            frame.soil_moisture_pct,
            frame.water_level_cm,
            frame.nutrient_temp_c,
            1.0 if cs.pump_on else 0.0,
            float(ALERT_LEVEL[cs.led]),
            rate_hz,
        ),
    )


class TransportError(Exception):
    """Network-level failure: nothing reached the service."""


@dataclass
class UploadStats:
    attempted: int = 0
    succeeded: int = 0
    retried: int = 0
    rejected: int = 0        # service answered 0 (auth/rate-limit)
    transport_down: int = 0  # request never reached the service
    remaining: int = 0

    def merge(self, other: "UploadStats") -> None:
        self.attempted += other.attempted
        self.succeeded += other.succeeded
        self.retried += other.retried
        self.rejected += other.rejected
        self.transport_down += other.transport_down
        self.remaining = other.remaining


class UploadBuffer:
    """Bounded FIFO of pending records; overflow evicts the oldest.

    Safe for one producer (enqueue) and one consumer (peek/pop) running
    concurrently.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.evicted = 0
        self._q: deque[TelemetryRecord] = deque()
        self._next_seq = 1
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._q)

    def enqueue(self, frame: CalibratedFrame, cs: ControllerState,
                rate_hz: float) -> TelemetryRecord:
        with self._lock:
            rec = make_record(frame, cs, rate_hz, self._next_seq)
            self._next_seq += 1
            self._q.append(rec)
            if len(self._q) > self.capacity:
                self._q.popleft()
                self.evicted += 1
        return rec

    def peek(self) -> Optional[TelemetryRecord]:
        with self._lock:
            return self._q[0] if self._q else None

    def pop_head(self, rec: TelemetryRecord) -> None:
        with self._lock:
            if self._q and self._q[0] is rec:
                self._q.popleft()

    def snapshot(self) -> list[TelemetryRecord]:
        with self._lock:
            return list(self._q)


def enqueue_sample(buf: UploadBuffer, frame: CalibratedFrame, cs: ControllerState,
                   rate_hz: float) -> TelemetryRecord:
    return buf.enqueue(frame, cs, rate_hz)


def flush(buf: UploadBuffer, transport, clock=None,
          max_attempts: int = DEFAULT_MAX_ATTEMPTS,
          backoff_base: float = BACKOFF_BASE_S,
          backoff_cap: float = BACKOFF_CAP_S) -> UploadStats:
    """Deliver buffered records oldest-first.

    Each record gets up to max_attempts tries with exponential backoff
    (1 s, 2 s, 4 s ... capped). If the head record exhausts its attempts
    the flush stops and everything stays buffered for the next call:
    order is never reshuffled and nothing is dropped here.
    """
    if clock is None:
        clock = SystemClock()
    stats = UploadStats()
    while True:
        rec = buf.peek()
        if rec is None:
            break
        delivered = False
        for attempt in range(max_attempts):
            if attempt:
                clock.sleep(min(backoff_base * 2.0 ** (attempt - 1), backoff_cap))
                stats.retried += 1
            stats.attempted += 1
            try:
                entry_id = transport.send(rec)
            except TransportError:
                stats.transport_down += 1
                continue
            if entry_id > 0:
                delivered = True
                break
            stats.rejected += 1
        if not delivered:
            break
        buf.pop_head(rec)
        stats.succeeded += 1
    stats.remaining = len(buf)
    return stats


def command_from_payload(payload: dict) -> Optional[RemoteCommand]:
    """Parse a wire command record; None for anything malformed."""
    if not isinstance(payload, dict):
        return None
    try:
        verb = CommandVerb(payload["verb"])
        cmd_id = int(payload["id"])
    except (KeyError, ValueError, TypeError):
        return None
    args = payload.get("args") or {}
    if not isinstance(args, dict):
        return None
    return RemoteCommand(id=cmd_id, verb=verb, args=args)


def command_to_payload(cmd: RemoteCommand) -> dict:
    return {"id": cmd.id, "verb": cmd.verb.value, "args": dict(cmd.args)}


def poll_commands(transport, limit: int = 16) -> list[RemoteCommand]:
    """Drain the service-side command queue, preserving order.

    A transport failure returns what was fetched so far; the rest stays
    queued for the next cycle.
    """
    out: list[RemoteCommand] = []
    try:
        while len(out) < limit:
            payload = transport.fetch_command()
            if payload is None:
                break
            cmd = command_from_payload(payload)
            if cmd is not None:
                out.append(cmd)
    except TransportError:
        pass
    return out


class InProcessTransport:
    """Direct bridge to an in-process ingest service (no sockets)."""

    def __init__(self, service, write_key: str):
        self.service = service
        self.write_key = write_key

    def send(self, rec: TelemetryRecord) -> int:
        fields = {i + 1: v for i, v in enumerate(rec.fields) if v is not None}
        return self.service.update(self.write_key, fields, rec.client_seq,
                                   rec.created_at)

    def fetch_command(self) -> Optional[dict]:
        channel = self.service.channel_by_write_key(self.write_key)
        if channel is None:
            raise TransportError("unknown write key")
        return self.service.execute_command(self.write_key, channel.id)


class FaultInjectingTransport:
    """Deterministic failure wrapper for drills and acceptance runs.

    request_loss drops the call before it reaches the service;
    response_loss delivers it but loses the reply, so the client must
    retry and the service-side dedup is genuinely exercised. Outages are
    [start, end) windows on the supplied clock during which every call
    fails.
    """

    def __init__(self, inner, seed: int = 0, request_loss: float = 0.0,
                 response_loss: float = 0.0,
                 outages: Sequence[tuple[float, float]] = (),
                 clock=None):
        self.inner = inner
        self.rng = random.Random(seed)
        self.request_loss = request_loss
        self.response_loss = response_loss
        self.outages = tuple(outages)
        self.clock = clock if clock is not None else VirtualClock()

    def _down_now(self) -> bool:
        now = self.clock.now()
        return any(start <= now < end for start, end in self.outages)

    def send(self, rec: TelemetryRecord) -> int:
        if self._down_now():
            raise TransportError("scheduled outage")
        if self.request_loss and self.rng.random() < self.request_loss:
            raise TransportError("request lost")
        entry_id = self.inner.send(rec)
        if self.response_loss and self.rng.random() < self.response_loss:
            raise TransportError("response lost")
        return entry_id

    def fetch_command(self) -> Optional[dict]:
        if self._down_now():
            raise TransportError("scheduled outage")
        if self.request_loss and self.rng.random() < self.request_loss:
            raise TransportError("request lost")
        return self.inner.fetch_command()


class HttpTransport:
    """Talks the wire protocol to a remote service over HTTP."""

    def __init__(self, base_url: str, channel_id: int, write_key: str,
                 timeout_s: float = 5.0):
        import requests

        self.base_url = base_url.rstrip("/")
        self.channel_id = channel_id
        self.write_key = write_key
        self.timeout_s = timeout_s
        self._session = requests.Session()
        self._requests = requests

    def send(self, rec: TelemetryRecord) -> int:
        params = {"api_key": self.write_key, "seq": rec.client_seq,
                  "created_at": iso8601(rec.created_at)}
        for i, v in enumerate(rec.fields):
            if v is not None:
                params[f"field{i + 1}"] = repr(float(v))
        try:
            r = self._session.get(f"{self.base_url}/update", params=params,
                                  timeout=self.timeout_s)
            return int(r.text.strip() or 0)
        except (self._requests.RequestException, ValueError) as e:
            raise TransportError(str(e)) from e

    def fetch_command(self) -> Optional[dict]:
        url = f"{self.base_url}/channels/{self.channel_id}/commands/execute"
        try:
            r = self._session.get(url, params={"api_key": self.write_key},
                                  timeout=self.timeout_s)
        except self._requests.RequestException as e:
            raise TransportError(str(e)) from e
        if r.status_code == 204 or not r.text.strip():
            return None
        try:
            return r.json()
        except ValueError as e:
            raise TransportError(f"bad command payload: {e}") from e


class CsvJournalTransport:
    """Offline sink: append records to a local CSV journal.

    Looks like a transport so the same flush path serves connected and
    disconnected operation; 'delivery' is the journal append.
    """

    HEADER = ["created_at", "client_seq"] + [f"field{i}" for i in range(1, 9)]

    def __init__(self, path):
        self.path = path
        self._count = 0
        new = not path.exists() or path.stat().st_size == 0
        self._fh = open(path, "a", newline="")
        self._writer = csv.writer(self._fh)
        if new:
            self._writer.writerow(self.HEADER)
            self._fh.flush()

    def send(self, rec: TelemetryRecord) -> int:
        row = [repr(rec.created_at), rec.client_seq]
        row += ["" if v is None else repr(float(v)) for v in rec.fields]
        self._writer.writerow(row)
        self._fh.flush()
        self._count += 1
        return self._count

    def fetch_command(self) -> Optional[dict]:
        return None

    def close(self) -> None:
        self._fh.close()


def iso8601(t: float) -> str:
    """Seconds (virtual or epoch) to ISO-8601 UTC."""
    from datetime import datetime, timezone

    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_iso8601(s: str) -> float:
    from datetime import datetime, timezone

    return datetime.strptime(s, "%Y-%m-%dT%H:%M:%SZ").replace(
        tzinfo=timezone.utc).timestamp()
