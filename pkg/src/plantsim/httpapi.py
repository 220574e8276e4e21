"""HTTP front end for the ingest service.

A thin translation layer: routes follow the public ThingSpeak REST shape
(update by write key, channel feeds/fields/export by read key, a
talkback-style command queue) so a hosted account could stand in for the
local service. All decisions live in IngestService; handlers only parse,
authenticate by delegation and serialize. JSON timestamps are ISO-8601
UTC; `/update` answers plain text like the real thing: the entry id, or
0 for a rejected write.

Beyond the protocol surface the server also exposes `/bootstrap.json`
(channel id and keys for a freshly provisioned dashboard) and serves
static assets from an optional directory.
"""
from __future__ import annotations

import json
import mimetypes
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlsplit

from .ingest import AuthError, Channel, ChannelEntry, IngestService
from .telemetry import iso8601, parse_iso8601

_CHANNEL_ROUTE = re.compile(
    r"^/channels/(\d+)/"
    r"(feeds\.json|fields/([1-8])\.json|commands|commands/execute|"
    r"export\.csv|alerts\.json)$")


def channel_json(ch: Channel) -> dict:
    doc = {"id": ch.id, "name": ch.name, "created_at": iso8601(ch.created_at)}
    for i, label in enumerate(ch.field_labels, start=1):
        doc[f"field{i}"] = label
    return doc


def entry_json(e: ChannelEntry) -> dict:
    doc = {"created_at": iso8601(e.created_at), "entry_id": e.entry_id}
    for i, value in enumerate(e.fields, start=1):
        doc[f"field{i}"] = value
    return doc


class ApiServer(ThreadingHTTPServer):
    """Holds the service plus static-asset and bootstrap configuration."""

    daemon_threads = True

    def __init__(self, service: IngestService, bind=("127.0.0.1", 0),
                 assets_dir: Optional[str] = None,
                 bootstrap: Optional[dict] = None):
        super().__init__(bind, ApiHandler)
        self.service = service
        self.assets_dir = Path(assets_dir).resolve() if assets_dir else None
        self.bootstrap = bootstrap or {}

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


def make_server(service: IngestService, bind=("127.0.0.1", 0),
                assets_dir: Optional[str] = None,
                bootstrap: Optional[dict] = None) -> ApiServer:
    return ApiServer(service, bind, assets_dir, bootstrap)


def serve_background(server: ApiServer) -> threading.Thread:
    """Run the server loop on a daemon thread; caller owns shutdown().

    The tight poll interval keeps shutdown latency negligible; the cost
    while idle is one select() wakeup per interval.
    """
    thread = threading.Thread(
        target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
    thread.start()
    return thread


class ApiHandler(BaseHTTPRequestHandler):
    server_version = "plantsim"
    protocol_version = "HTTP/1.1"

    # -- plumbing ----------------------------------------------------------

    def log_message(self, fmt, *args):  # requests are not worth a log line
        pass

    def _send(self, code: int, body: bytes, content_type: str) -> None:
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _text(self, code: int, text: str,
              content_type: str = "text/plain; charset=utf-8") -> None:
        self._send(code, text.encode("utf-8"), content_type)

    def _json(self, code: int, payload) -> None:
        body = json.dumps(payload).encode("utf-8")
        self._send(code, body, "application/json")

    def _error(self, code: int, message: str) -> None:
        self._json(code, {"error": message})

    def _empty(self, code: int) -> None:
        self.send_response(code)
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _query(self) -> dict:
        return parse_qs(urlsplit(self.path).query, keep_blank_values=True)

    def _param(self, qs: dict, name: str) -> Optional[str]:
        values = qs.get(name)
        return values[0] if values else None

    def _time_range(self, qs: dict):
        start = self._param(qs, "start")
        end = self._param(qs, "end")
        return (parse_iso8601(start) if start else None,
                parse_iso8601(end) if end else None)

    def _body_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        payload = json.loads(raw.decode("utf-8")) if raw else {}
        if not isinstance(payload, dict):
            raise ValueError("request body must be a JSON object")
        return payload

    # -- routing -----------------------------------------------------------

    def do_GET(self) -> None:
        path = urlsplit(self.path).path
        try:
            if path == "/update":
                self._handle_update()
            elif path == "/bootstrap.json":
                self._json(200, self.server.bootstrap)
            elif (m := _CHANNEL_ROUTE.match(path)) and m.group(2) != "commands":
                self._handle_channel(int(m.group(1)), m.group(2), m.group(3))
            else:
                self._handle_static(path)
        except AuthError:
            self._error(401, "unauthorized")
        except (ValueError, KeyError) as exc:
            self._error(400, f"bad request: {exc}")

    def do_POST(self) -> None:
        path = urlsplit(self.path).path
        m = _CHANNEL_ROUTE.match(path)
        if not m or m.group(2) != "commands":
            self._error(404, "not found")
            return
        qs = self._query()
        try:
            payload = self._body_json()
            cmd_id = self.server.service.enqueue_command(
                self._param(qs, "api_key") or "", int(m.group(1)), payload)
            self._json(200, {"id": cmd_id})
        except AuthError:
            self._error(401, "unauthorized")
        except (ValueError, KeyError) as exc:
            self._error(400, f"bad request: {exc}")

    # -- endpoint bodies ----------------------------------------------------

    def _handle_update(self) -> None:
        qs = self._query()
        fields = {}
        for i in range(1, 9):
            raw = self._param(qs, f"field{i}")
            if raw:
                fields[i] = float(raw)
        seq_raw = self._param(qs, "seq")
        if seq_raw is None:
            raise ValueError("seq parameter is required")
        created_raw = self._param(qs, "created_at")
        created_at = parse_iso8601(created_raw) if created_raw else None
        entry_id = self.server.service.update(
            self._param(qs, "api_key") or "", fields,
            client_seq=int(seq_raw), created_at=created_at)
        self._text(200, str(entry_id))

    def _handle_channel(self, channel_id: int, route: str,
                        field_no: Optional[str]) -> None:
        service = self.server.service
        qs = self._query()
        api_key = self._param(qs, "api_key") or ""
        if route == "feeds.json":
            results = int(self._param(qs, "results") or 100)
            start, end = self._time_range(qs)
            ch, entries = service.read_feed(api_key, channel_id,
                                            results=results,
                                            start=start, end=end)
            self._json(200, {"channel": channel_json(ch),
                             "feeds": [entry_json(e) for e in entries]})
        elif route == "export.csv":
            start, end = self._time_range(qs)
            doc = service.export_csv(api_key, channel_id, start=start, end=end)
            self._text(200, doc, "text/csv; charset=utf-8")
        elif route == "alerts.json":
            self._json(200, self._alerts_doc(service, api_key, channel_id))
        elif route == "commands/execute":
            cmd = service.execute_command(api_key, channel_id)
            if cmd is None:
                self._empty(204)
            else:
                self._json(200, cmd)
        else:  # fields/<n>.json
            n = int(field_no)
            results = int(self._param(qs, "results") or 100)
            ch, points = service.read_field(api_key, channel_id, n,
                                            results=results)
            feeds = [{"created_at": iso8601(t), "entry_id": entry_id,
                      f"field{n}": value}
                     for entry_id, t, value in points]
            self._json(200, {"channel": channel_json(ch), "feeds": feeds})

    def _alerts_doc(self, service: IngestService, api_key: str,
                    channel_id: int) -> dict:
        doc = service.alerts_payload(api_key, channel_id)
        for alert in doc["alerts"]:
            alert["created_at"] = iso8601(alert["created_at"])
        for entry in doc["delivery_log"]:
            entry["enqueued_at"] = iso8601(entry["enqueued_at"])
            entry["delivered_at"] = iso8601(entry["delivered_at"])
        return doc

    def _handle_static(self, path: str) -> None:
        root = self.server.assets_dir
        if root is None or self.command != "GET":
            self._error(404, "not found")
            return
        name = path.lstrip("/") or "index.html"
        target = (root / name).resolve()
        # resolve() collapses any ../ the client smuggled in; everything
        # served must stay under the assets root.
        if root not in target.parents and target != root:
            self._error(404, "not found")
            return
        if not target.is_file():
            self._error(404, "not found")
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), ctype)
