"""Live mission service.

One background thread steps the mission; a threading HTTP server exposes
read endpoints, a resumable server-sent event stream, and a command inbox:

    GET  /state             full snapshot (single lock acquisition)
    GET  /rasters/{name}    ESRI ASCII grid text
    GET  /clusters          GeoJSON FeatureCollection
    GET  /plan              harvest plan JSON
    GET  /events?since=s    SSE stream: replay seq > s from the log, then live
    POST /command           {"command": ..., "payload": {...}}

Readers copy what they need under the mission lock and serialize outside it,
so a slow or stalled client can never hold up the stepper; a client that
stops draining its socket is dropped on a send timeout. Real-time pacing is
controlled by ``rtf`` (simulated seconds per wall second); ``rtf=0`` runs
free, pausing only at the approval gate.
"""

from __future__ import annotations

import json
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from . import events as ev
from . import planner as pl
from .errors import ConfigError
from .mission import (
    PHASE_AWAITING_APPROVAL,
    PHASE_DONE,
    MissionConfig,
    new_mission,
    operator_command,
    step,
    write_run_dir,
)
from .pipeline import clusters_to_geojson
from .raster import asc_dumps

CLIENT_SEND_TIMEOUT_S = 5.0
SSE_POLL_S = 0.25
MAX_COMMAND_BYTES = 1 << 20


class MissionService:
    """A mission, its stepper thread, and the HTTP server around them."""

    def __init__(
        self,
        config: MissionConfig,
        port: int = 0,
        rtf: float = 1.0,
        auto_approve: bool = False,
        run_dir: str | None = None,
        host: str = "127.0.0.1",
    ):
        if rtf < 0:
            raise ConfigError(f"rtf must be non-negative, got {rtf}")
        self.config = config
        self.rtf = rtf
        self.auto_approve = auto_approve
        self.run_dir = run_dir
        self.host = host
        self.state = new_mission(config)
        self.lock = threading.Lock()
        self.changed = threading.Condition(self.lock)
        self._stop = threading.Event()
        self._run_dir_written = False

        handler = type("_BoundHandler", (_Handler,), {"service": self})
        self.httpd = ThreadingHTTPServer((host, port), handler)
        self.httpd.daemon_threads = True
        self._stepper = threading.Thread(
            target=self._step_loop, name="mission-stepper", daemon=True
        )
        self._http_thread = threading.Thread(
            target=self.httpd.serve_forever,
            kwargs={"poll_interval": 0.1},
            name="mission-http",
            daemon=True,
        )

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.host}:{self.port}"

    def start(self) -> "MissionService":
        self._http_thread.start()
        self._stepper.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        with self.changed:
            self.changed.notify_all()
        self.httpd.shutdown()
        self.httpd.server_close()
        self._stepper.join(timeout=10.0)

    def wait_done(self, timeout: float | None = None) -> bool:
        """Block until the mission reaches Done. True on completion."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self.changed:
            while self.state.phase != PHASE_DONE:
                budget = None if deadline is None else deadline - time.monotonic()
                if budget is not None and budget <= 0:
                    return False
                self.changed.wait(timeout=budget if budget is not None else 1.0)
                if self._stop.is_set() and self.state.phase != PHASE_DONE:
                    return False
        return True

    def _step_loop(self) -> None:
        dt = self.config.dt
        with self.changed:
            operator_command(self.state, "start")
            self.changed.notify_all()
        while not self._stop.is_set():
            t0 = time.monotonic()
            with self.changed:
                if self.state.phase == PHASE_AWAITING_APPROVAL:
                    if self.auto_approve:
                        operator_command(self.state, "approve_plan")
                    elif self.rtf == 0:
                        # free-run: don't burn simulated time at the gate
                        self.changed.wait(timeout=SSE_POLL_S)
                        continue
                step(self.state, dt)
                if self.state.phase == PHASE_DONE:
                    # persist before waking waiters so wait_done implies files
                    if self.run_dir and not self._run_dir_written:
                        write_run_dir(self.state, self.run_dir)
                        self._run_dir_written = True
                    self.changed.notify_all()
                    return
                self.changed.notify_all()
            if self.rtf > 0:
                budget = dt / self.rtf - (time.monotonic() - t0)
                if budget > 0:
                    self._stop.wait(budget)


class _Handler(BaseHTTPRequestHandler):
    service: MissionService
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    # -- plumbing -------------------------------------------------------

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", "*")

    def _send_body(self, code: int, body: bytes, content_type: str) -> None:
        self.send_response(code)
        self._cors()
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, code: int, obj) -> None:
        self._send_body(
            code, json.dumps(obj, sort_keys=True).encode("utf-8"), "application/json"
        )

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    # -- reads ----------------------------------------------------------

    def do_GET(self):
        parsed = urlparse(self.path)
        route = parsed.path.rstrip("/") or "/"
        if route == "/state":
            self._send_json(200, self._snapshot())
        elif route.startswith("/rasters/"):
            self._get_raster(route[len("/rasters/"):])
        elif route == "/clusters":
            with self.service.lock:
                doc = clusters_to_geojson(self.service.state.clusters)
            self._send_json(200, doc)
        elif route == "/plan":
            with self.service.lock:
                plan = self.service.state.plan
                doc = None if plan is None else pl.plan_to_json(plan)
                version = self.service.state.plan_version
            if doc is None:
                self._send_json(404, {"error": "no plan yet"})
            else:
                doc["version"] = version
                self._send_json(200, doc)
        elif route == "/events":
            query = parse_qs(parsed.query)
            try:
                since = int(query.get("since", ["0"])[0])
            except ValueError:
                self._send_json(400, {"error": "since must be an integer"})
                return
            self._stream_events(since)
        else:
            self._send_json(404, {"error": f"no such endpoint {route}"})

    def _snapshot(self) -> dict:
        svc = self.service
        with svc.lock:
            st = svc.state
            return {
                "phase": st.phase,
                "clock": st.clock,
                "seq": st.events.last_seq,
                "usv": [st.usv_pose.position.east, st.usv_pose.position.north,
                        st.usv_pose.heading],
                "harvester": [st.harvester_pose.position.east,
                              st.harvester_pose.position.north,
                              st.harvester_pose.heading],
                "load": st.current_load,
                "capacity": st.planner_config.capacity,
                "plan_version": st.plan_version,
                "cluster_count": len(st.clusters),
                "area": list(st.config.area),
                "cell_size": st.config.cell_size,
                "rasters": sorted(st.rasters),
                "report": st.report,
                "dt": svc.config.dt,
                "rtf": svc.rtf,
                "auto_approve": svc.auto_approve,
            }

    def _get_raster(self, name: str) -> None:
        if name.endswith(".asc"):
            name = name[: -len(".asc")]
        with self.service.lock:
            raster = self.service.state.rasters.get(name)
        if raster is None:
            self._send_json(404, {"error": f"no raster named {name!r}"})
            return
        text = asc_dumps(raster, integer=(name == "classification"))
        self._send_body(200, text.encode("ascii"), "text/plain")

    def _stream_events(self, since: int) -> None:
        svc = self.service
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        self.close_connection = True
        self.connection.settimeout(CLIENT_SEND_TIMEOUT_S)

        sent = since
        try:
            while True:
                with svc.changed:
                    batch = list(svc.state.events.since(sent))
                    if not batch:
                        if svc.state.phase == PHASE_DONE or svc._stop.is_set():
                            return
                        svc.changed.wait(timeout=SSE_POLL_S)
                        batch = list(svc.state.events.since(sent))
                for event in batch:
                    obj = ev.event_to_json(event)
                    frame = f"id: {event.seq}\ndata: {json.dumps(obj, sort_keys=True)}\n\n"
                    self.wfile.write(frame.encode("utf-8"))
                if batch:
                    self.wfile.flush()
                    sent = batch[-1].seq
        except (BrokenPipeError, ConnectionResetError, socket.timeout, OSError):
            return

    # -- commands ---------------------------------------------------------

    def do_POST(self):
        route = urlparse(self.path).path.rstrip("/")
        if route != "/command":
            self._send_json(404, {"error": f"no such endpoint {route}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            self._send_json(400, {"applied": False, "reason": "bad Content-Length"})
            return
        if not 0 < length <= MAX_COMMAND_BYTES:
            self._send_json(400, {"applied": False, "reason": "missing or oversized body"})
            return
        try:
            doc = json.loads(self.rfile.read(length))
        except json.JSONDecodeError as exc:
            self._send_json(400, {"applied": False, "reason": f"body is not JSON: {exc}"})
            return
        command = doc.get("command") if isinstance(doc, dict) else None
        payload = doc.get("payload", {}) if isinstance(doc, dict) else {}
        if not isinstance(command, str) or not isinstance(payload, dict):
            self._send_json(
                400,
                {"applied": False, "reason": "body must be {command: str, payload: object}"},
            )
            return
        svc = self.service
        try:
            with svc.changed:
                applied, reason = operator_command(svc.state, command, payload)
                seq = svc.state.events.last_seq
                if applied:
                    svc.changed.notify_all()
        except ConfigError as exc:
            self._send_json(400, {"applied": False, "reason": str(exc)})
            return
        code = 200 if applied else 409
        self._send_json(code, {"applied": applied, "reason": reason, "seq": seq})


def serve(
    config: MissionConfig,
    port: int = 0,
    rtf: float = 1.0,
    auto_approve: bool = False,
    run_dir: str | None = None,
    host: str = "127.0.0.1",
) -> MissionService:
    """Start a mission service; returns once listening (non-blocking)."""
    return MissionService(
        config, port=port, rtf=rtf, auto_approve=auto_approve, run_dir=run_dir, host=host
    ).start()
