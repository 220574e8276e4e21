"""Channel-based telemetry store with command queue and alert rules.

A channel is one device's stream: eight numeric fields, a write key for
updates and a read key for queries. Entries get a dense per-channel
entry_id starting at 1. Updates carrying a client sequence number are
deduplicated: a retry of an already-stored record returns the original
entry_id instead of appending twice.

Alert rules are edge-triggered threshold comparisons with a rearm
hysteresis gap: a rule fires once when its condition first holds and
stays quiet until the value has returned to the safe side by at least
the gap. Fired alerts go to one of two sinks (email-like, SMS-like) and
every firing lands exactly one terminal entry in the delivery log.

Persistence is an append-only JSONL journal per channel plus a metadata
journal, replayed on startup. A directory lock enforces one writing
service instance per data directory.
"""
from __future__ import annotations

import json
import secrets
import threading
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from filelock import FileLock, Timeout

from .clocks import SystemClock

SINK_EMAIL = "EmailLike"
SINK_SMS = "SmsLike"
SINKS = (SINK_EMAIL, SINK_SMS)

N_FIELDS = 8
DEFAULT_FEED_RESULTS = 100
MAX_FEED_RESULTS = 8000
RATE_LIMIT_S = 15.0

DEFAULT_FIELD_LABELS = (
    "temp_c", "humidity_pct", "soil_moisture_pct", "water_level_cm",
    "nutrient_temp_c", "pump_state", "alert_level", "sampling_rate_hz",
)


class AuthError(Exception):
    """Key does not grant the requested access."""


@dataclass(frozen=True)
class Channel:
    id: int
    name: str
    write_key: str
    read_key: str
    field_labels: tuple
    created_at: float


@dataclass(frozen=True)
class ChannelEntry:
    entry_id: int
    created_at: float
    fields: tuple  # 8 optional numerics
    client_seq: Optional[int] = None


@dataclass(frozen=True)
class AlertRule:
    id: int
    field_index: int          # 1..8
    comparator: str           # '<' or '>'
    threshold: float
    severity: str
    sink: str
    rearm_gap: float = 0.0

    def __post_init__(self) -> None:
        if self.field_index not in range(1, N_FIELDS + 1):
            raise ValueError("field_index must be 1..8")
        if self.comparator not in ("<", ">"):
            raise ValueError("comparator must be '<' or '>'")
        if self.rearm_gap < 0:
            raise ValueError("rearm_gap must be >= 0")
        if self.sink not in SINKS:
            raise ValueError(f"sink must be one of {SINKS}")


@dataclass(frozen=True)
class FiredAlert:
    id: int
    rule_id: int
    channel_id: int
    field_index: int
    comparator: str
    threshold: float
    value: float
    severity: str
    sink: str
    created_at: float


@dataclass(frozen=True)
class DeliveryLogEntry:
    alert_id: int
    sink: str
    enqueued_at: float
    delivered_at: float
    status: str  # 'Delivered' | 'Failed'


def evaluate_rules(entry: ChannelEntry, rules: Sequence[AlertRule],
                   armed: dict, channel_id: int = 0,
                   next_alert_id: int = 1) -> list[FiredAlert]:
    """Edge-triggered rule pass over one entry; mutates the armed map.

    An armed rule whose condition holds fires and disarms; a disarmed
    rule rearms only once the value is on the safe side of the threshold
    by at least the rearm gap. Rules on absent fields are skipped.
    """
    fired: list[FiredAlert] = []
    for rule in rules:
        value = entry.fields[rule.field_index - 1]
        if value is None:
            continue
        violated = value < rule.threshold if rule.comparator == "<" \
            else value > rule.threshold
        if armed.get(rule.id, True):
            if violated:
                armed[rule.id] = False
                fired.append(FiredAlert(
                    id=next_alert_id + len(fired), rule_id=rule.id,
                    channel_id=channel_id, field_index=rule.field_index,
                    comparator=rule.comparator, threshold=rule.threshold,
                    value=value, severity=rule.severity, sink=rule.sink,
                    created_at=entry.created_at))
        elif not violated:
            safe_by = rule.threshold - value if rule.comparator == ">" \
                else value - rule.threshold
            if safe_by >= rule.rearm_gap:
                armed[rule.id] = True
    return fired


class CollectingSink:
    """In-process sink: records everything, succeeds unless scripted."""

    def __init__(self, name: str, fail_on: Optional[set] = None):
        self.name = name
        self.delivered: list[dict] = []
        self.fail_on = fail_on or set()

    def deliver(self, alert: dict) -> bool:
        if alert["id"] in self.fail_on:
            return False
        self.delivered.append(alert)
        return True


class FileSink:
    """Appends each alert as one JSON line; the file is the outbox."""

    def __init__(self, path: Path):
        self.path = Path(path)

    def deliver(self, alert: dict) -> bool:
        with open(self.path, "a") as fh:
            fh.write(json.dumps(alert, sort_keys=True) + "\n")
        return True


@dataclass
class _ChannelState:
    channel: Channel
    entries: list = field(default_factory=list)
    seq_index: dict = field(default_factory=dict)       # client_seq -> entry_id
    commands: deque = field(default_factory=deque)      # pending payloads
    next_command_id: int = 1
    rules: list = field(default_factory=list)
    armed: dict = field(default_factory=dict)           # rule_id -> bool
    alerts: list = field(default_factory=list)
    delivery_log: list = field(default_factory=list)
    last_store_wall: float = float("-inf")
    lock: threading.Lock = field(default_factory=threading.Lock)
    journal_fh: Optional[object] = None


class IngestService:
    """The service instance: channels, storage, commands, alerts.

    live_mode=True enforces the 15 s per-channel rate limit against the
    wall clock; virtual-time runs leave it off and trust client
    timestamps.
    """

    def __init__(self, data_dir: Optional[Path] = None, clock=None,
                 live_mode: bool = False, rate_limit_s: float = RATE_LIMIT_S,
                 sinks: Optional[dict] = None):
        self.clock = clock if clock is not None else SystemClock()
        self.live_mode = live_mode
        self.rate_limit_s = rate_limit_s
        self.sinks = sinks if sinks is not None else {
            SINK_EMAIL: CollectingSink(SINK_EMAIL),
            SINK_SMS: CollectingSink(SINK_SMS),
        }
        self._channels: dict[int, _ChannelState] = {}
        self._by_write_key: dict[str, int] = {}
        self._meta_lock = threading.Lock()
        self._data_dir: Optional[Path] = None
        self._dir_lock = None
        self._meta_fh = None
        if data_dir is not None:
            self._open_data_dir(Path(data_dir))

    # -- persistence ----------------------------------------------------

    def _open_data_dir(self, data_dir: Path) -> None:
        data_dir.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(data_dir / ".lock"))
        try:
            lock.acquire(timeout=0.2)
        except Timeout:
            raise RuntimeError(
                f"data dir {data_dir} is already served by another instance")
        self._dir_lock = lock
        self._data_dir = data_dir
        meta_path = data_dir / "meta.jsonl"
        if meta_path.exists():
            self._replay_meta(meta_path)
        self._meta_fh = open(meta_path, "a")
        for st in self._channels.values():
            path = data_dir / f"channel_{st.channel.id}.jsonl"
            if path.exists():
                self._replay_channel(st, path)
            st.journal_fh = open(path, "a")

    def _replay_meta(self, path: Path) -> None:
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                if rec["type"] == "channel":
                    ch = Channel(id=rec["id"], name=rec["name"],
                                 write_key=rec["write_key"],
                                 read_key=rec["read_key"],
                                 field_labels=tuple(rec["field_labels"]),
                                 created_at=rec["created_at"])
                    self._channels[ch.id] = _ChannelState(channel=ch)
                    self._by_write_key[ch.write_key] = ch.id
                elif rec["type"] == "rule":
                    st = self._channels[rec["channel_id"]]
                    st.rules.append(AlertRule(
                        id=rec["id"], field_index=rec["field_index"],
                        comparator=rec["comparator"], threshold=rec["threshold"],
                        severity=rec["severity"], sink=rec["sink"],
                        rearm_gap=rec["rearm_gap"]))

    def _replay_channel(self, st: _ChannelState, path: Path) -> None:
        with open(path) as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                kind = rec["type"]
                if kind == "entry":
                    entry = ChannelEntry(
                        entry_id=rec["entry_id"], created_at=rec["created_at"],
                        fields=tuple(rec["fields"]), client_seq=rec["client_seq"])
                    st.entries.append(entry)
                    if entry.client_seq is not None:
                        st.seq_index[entry.client_seq] = entry.entry_id
                elif kind == "command_enq":
                    st.commands.append(rec["payload"])
                    st.next_command_id = max(st.next_command_id,
                                             rec["payload"]["id"] + 1)
                elif kind == "command_exec":
                    if st.commands and st.commands[0]["id"] == rec["id"]:
                        st.commands.popleft()
                elif kind == "alert":
                    st.alerts.append(FiredAlert(**rec["alert"]))
                elif kind == "delivery":
                    st.delivery_log.append(DeliveryLogEntry(**rec["delivery"]))
                elif kind == "arm":
                    st.armed[rec["rule_id"]] = rec["armed"]

    def _journal(self, st: _ChannelState, record: dict) -> None:
        if st.journal_fh is not None:
            st.journal_fh.write(json.dumps(record, sort_keys=True) + "\n")
            st.journal_fh.flush()

    def _journal_meta(self, record: dict) -> None:
        if self._meta_fh is not None:
            self._meta_fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._meta_fh.flush()

    def close(self) -> None:
        for st in self._channels.values():
            if st.journal_fh is not None:
                st.journal_fh.close()
                st.journal_fh = None
        if self._meta_fh is not None:
            self._meta_fh.close()
            self._meta_fh = None
        if self._dir_lock is not None:
            self._dir_lock.release()
            self._dir_lock = None

    # -- channel management ----------------------------------------------

    def create_channel(self, name: str, write_key: Optional[str] = None,
                       read_key: Optional[str] = None,
                       field_labels: Sequence[str] = DEFAULT_FIELD_LABELS) -> Channel:
        with self._meta_lock:
            write_key = write_key or secrets.token_hex(8)
            read_key = read_key or secrets.token_hex(8)
            if write_key == read_key:
                raise ValueError("write_key must differ from read_key")
            if write_key in self._by_write_key:
                raise ValueError("write_key already in use")
            labels = tuple(field_labels)
            if len(labels) != N_FIELDS:
                raise ValueError("exactly eight field labels required")
            cid = max(self._channels, default=0) + 1
            ch = Channel(id=cid, name=name, write_key=write_key,
                         read_key=read_key, field_labels=labels,
                         created_at=self.clock.now())
            st = _ChannelState(channel=ch)
            if self._data_dir is not None:
                st.journal_fh = open(self._data_dir / f"channel_{cid}.jsonl", "a")
            self._channels[cid] = st
            self._by_write_key[write_key] = cid
            self._journal_meta({"type": "channel", "id": cid, "name": name,
                                "write_key": write_key, "read_key": read_key,
                                "field_labels": list(labels),
                                "created_at": ch.created_at})
            return ch

    def channel_by_write_key(self, write_key: str) -> Optional[Channel]:
        cid = self._by_write_key.get(write_key)
        return self._channels[cid].channel if cid is not None else None

    def get_channel(self, channel_id: int) -> Optional[Channel]:
        st = self._channels.get(channel_id)
        return st.channel if st else None

    def channels(self) -> list[Channel]:
        return [st.channel for st in self._channels.values()]

    def add_rule(self, channel_id: int, field_index: int, comparator: str,
                 threshold: float, severity: str = "warning",
                 sink: str = SINK_EMAIL, rearm_gap: float = 0.0) -> AlertRule:
        st = self._channels[channel_id]
        with st.lock:
            rule = AlertRule(id=len(st.rules) + 1, field_index=field_index,
                             comparator=comparator, threshold=threshold,
                             severity=severity, sink=sink, rearm_gap=rearm_gap)
            st.rules.append(rule)
            self._journal_meta({"type": "rule", "channel_id": channel_id,
                                **asdict(rule)})
            return rule

    # -- ingestion --------------------------------------------------------

    def update(self, write_key: str, fields: dict, client_seq: Optional[int],
               created_at: Optional[float] = None) -> int:
        """Store one entry; 0 means rejected (bad key or rate-limited)."""
        cid = self._by_write_key.get(write_key)
        if cid is None:
            return 0
        st = self._channels[cid]
        with st.lock:
            if client_seq is not None and client_seq in st.seq_index:
                return st.seq_index[client_seq]  # duplicate: original id
            now = self.clock.now()
            if self.live_mode and now - st.last_store_wall < self.rate_limit_s:
                return 0
            # Fallback stamps are floored to the whole second so every
            # stored time is expressible in the wire format; otherwise a
            # range query ending at an entry's displayed timestamp could
            # exclude the entry itself.
            t = created_at if created_at is not None else float(int(now))
            values = tuple(
                None if fields.get(i) is None else float(fields[i])
                for i in range(1, N_FIELDS + 1))
            entry = ChannelEntry(entry_id=len(st.entries) + 1, created_at=t,
                                 fields=values, client_seq=client_seq)
            st.entries.append(entry)
            if client_seq is not None:
                st.seq_index[client_seq] = entry.entry_id
            st.last_store_wall = now
            self._journal(st, {"type": "entry", "entry_id": entry.entry_id,
                               "created_at": t, "fields": list(values),
                               "client_seq": client_seq})
            self._run_rules(st, entry)
            return entry.entry_id

    def _run_rules(self, st: _ChannelState, entry: ChannelEntry) -> None:
        before = dict(st.armed)
        fired = evaluate_rules(entry, st.rules, st.armed,
                               channel_id=st.channel.id,
                               next_alert_id=len(st.alerts) + 1)
        for rule_id, armed in st.armed.items():
            if before.get(rule_id, True) != armed:
                self._journal(st, {"type": "arm", "rule_id": rule_id,
                                   "armed": armed})
        for alert in fired:
            st.alerts.append(alert)
            self._journal(st, {"type": "alert", "alert": asdict(alert)})
            self._dispatch(st, alert)

    def _dispatch(self, st: _ChannelState, alert: FiredAlert) -> None:
        enqueued = self.clock.now()
        sink = self.sinks.get(alert.sink)
        ok = False
        if sink is not None:
            try:
                ok = bool(sink.deliver(asdict(alert)))
            except Exception:
                ok = False
        log = DeliveryLogEntry(alert_id=alert.id, sink=alert.sink,
                               enqueued_at=enqueued,
                               delivered_at=self.clock.now(),
                               status="Delivered" if ok else "Failed")
        st.delivery_log.append(log)
        self._journal(st, {"type": "delivery", "delivery": asdict(log)})

    # -- queries ----------------------------------------------------------

    def _read_state(self, read_key: str, channel_id: int) -> _ChannelState:
        st = self._channels.get(channel_id)
        if st is None or read_key != st.channel.read_key:
            raise AuthError("invalid read key for channel")
        return st

    @staticmethod
    def _select(entries: list, results: Optional[int],
                start: Optional[float], end: Optional[float]) -> list:
        n = len(entries)
        chosen = entries[:n]
        if start is not None:
            chosen = [e for e in chosen if e.created_at >= start]
        if end is not None:
            chosen = [e for e in chosen if e.created_at <= end]
        if results is not None:
            results = max(0, min(int(results), MAX_FEED_RESULTS))
            chosen = chosen[len(chosen) - results:] if results else []
        return chosen

    def read_feed(self, read_key: str, channel_id: int,
                  results: Optional[int] = DEFAULT_FEED_RESULTS,
                  start: Optional[float] = None,
                  end: Optional[float] = None) -> tuple:
        st = self._read_state(read_key, channel_id)
        return st.channel, self._select(st.entries, results, start, end)

    def read_field(self, read_key: str, channel_id: int, field_index: int,
                   results: Optional[int] = DEFAULT_FEED_RESULTS,
                   start: Optional[float] = None,
                   end: Optional[float] = None) -> tuple:
        if field_index not in range(1, N_FIELDS + 1):
            raise ValueError("field index must be 1..8")
        channel, entries = self.read_feed(read_key, channel_id, results,
                                          start, end)
        series = [(e.entry_id, e.created_at, e.fields[field_index - 1])
                  for e in entries]
        return channel, series

    def export_csv(self, read_key: str, channel_id: int,
                   start: Optional[float] = None,
                   end: Optional[float] = None) -> str:
        import csv as _csv
        import io

        from .telemetry import iso8601

        st = self._read_state(read_key, channel_id)
        buf = io.StringIO()
        w = _csv.writer(buf, lineterminator="\n")
        w.writerow(["entry_id", "created_at"]
                   + [f"field{i}" for i in range(1, N_FIELDS + 1)])
        for e in self._select(st.entries, None, start, end):
            w.writerow([e.entry_id, iso8601(e.created_at)]
                       + ["" if v is None else repr(v) for v in e.fields])
        return buf.getvalue()

    def alerts_payload(self, read_key: str, channel_id: int) -> dict:
        st = self._read_state(read_key, channel_id)
        with st.lock:
            return {
                "channel_id": channel_id,
                "rules": [asdict(r) for r in st.rules],
                "alerts": [asdict(a) for a in st.alerts],
                "delivery_log": [asdict(d) for d in st.delivery_log],
            }

    # -- command queue ----------------------------------------------------

    def enqueue_command(self, write_key: str, channel_id: int,
                        payload: dict) -> int:
        st = self._channels.get(channel_id)
        if st is None or write_key != st.channel.write_key:
            raise AuthError("invalid write key for channel")
        if not isinstance(payload, dict) or "verb" not in payload:
            raise ValueError("command payload must carry a verb")
        with st.lock:
            cmd = {"id": st.next_command_id, "verb": payload["verb"],
                   "args": payload.get("args") or {}}
            st.next_command_id += 1
            st.commands.append(cmd)
            self._journal(st, {"type": "command_enq", "payload": cmd})
            return cmd["id"]

    def execute_command(self, write_key: str, channel_id: int) -> Optional[dict]:
        """Dequeue the oldest pending command; None when empty."""
        st = self._channels.get(channel_id)
        if st is None or write_key != st.channel.write_key:
            raise AuthError("invalid write key for channel")
        with st.lock:
            if not st.commands:
                return None
            cmd = st.commands.popleft()
            self._journal(st, {"type": "command_exec", "id": cmd["id"]})
            return cmd

    def pending_commands(self, read_key: str, channel_id: int) -> list:
        st = self._read_state(read_key, channel_id)
        with st.lock:
            return list(st.commands)
