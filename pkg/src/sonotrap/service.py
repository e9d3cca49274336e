"""Live steering service: newline-delimited JSON commands over TCP plus
plain HTTP GET snapshots.

Protocol (schema version v:1). Requests are JSON lines:

    {"v": 1, "seq": <int, strictly increasing per connection>,
     "verb": "MoveFocus" | "SetTemperature" | "StartTrajectory" | "Stop"
           | "QueryField" | "QueryParticle" | "Subscribe" | "Unsubscribe",
     "payload": {...}}

Every request gets one response line {"v":1, "seq", "kind": "response" |
"error", "payload", "ts"}. A Subscribe starts periodic telemetry events
{"v":1, "seq": <per-subscription counter>, "kind": "telemetry" | "gap",
"payload", "ts"} on the same connection; backpressure drops the oldest
queued events and surfaces a "gap" marker instead of silently skipping.

One writer mutates the session under a lock; telemetry readers take
consistent snapshots per event. Frames are recomputed before an event
whenever the temperature or the trajectory waypoint changed, so the
served frame always matches the advertised medium and last command.
"""

from __future__ import annotations

import json
import queue
import socket
import socketserver
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .errors import (
    InvalidArgumentError,
    OutOfVolumeError,
    SessionLoadError,
    SessionVersionError,
    SonotrapError,
)
from .field_sim import ParticleState, sample_slice, spl
from .geometry import ArrayLayout, flat_8x8
from .medium import MediumState
from .phase_engine import (
    ControllerTiming,
    FocalCommand,
    PhaseFrame,
    QuantizationConfig,
    compute_frame,
)
from .trajectory import TrajectorySpec, plan_steps
from .upac import UpacEmulator

PROTOCOL_VERSION = 1
SESSION_VERSION = 1
MAX_HISTORY = 10_000
MAX_SLICE_CELLS = 64
TELEMETRY_QUEUE = 64

VERBS = (
    "MoveFocus",
    "SetTemperature",
    "StartTrajectory",
    "Stop",
    "QueryField",
    "QueryParticle",
    "Subscribe",
    "Unsubscribe",
)


@dataclass
class SessionState:
    """Mutable service state; guard with the service lock."""

    layout: ArrayLayout
    medium: MediumState
    quant: QuantizationConfig
    current_frame: PhaseFrame
    source_amplitude: float
    particle: ParticleState | None = None
    trajectory: dict | None = None  # {"plan": [...], "dwell": s, "t0": monotonic}
    history: list = field(default_factory=list)
    history_seq: int = 0


class SteeringService:
    """Session owner: applies command envelopes, streams telemetry."""

    def __init__(
        self,
        layout: ArrayLayout | None = None,
        medium: MediumState | None = None,
        source_amplitude: float = 1.0,
        initial_target=(0.0, 0.0, 100.0),
        particle: ParticleState | None = None,
    ):
        layout = flat_8x8() if layout is None else layout
        medium = MediumState.from_temperature(20.0) if medium is None else medium
        quant = QuantizationConfig(carrier_hz=layout.emitter_carrier())
        frame = compute_frame(layout, FocalCommand(initial_target), medium, quant)
        self._lock = threading.RLock()
        self.state = SessionState(
            layout=layout,
            medium=medium,
            quant=quant,
            current_frame=frame,
            source_amplitude=source_amplitude,
            particle=particle,
        )
        self.upac = UpacEmulator(len(layout.emitters), quant)
        self.upac.load_frame(frame)

    # -- events ---------------------------------------------------------------

    def _record(self, kind: str, payload: dict) -> dict:
        self.state.history_seq += 1
        event = {"seq": self.state.history_seq, "kind": kind, "payload": payload, "ts": time.time()}
        self.state.history.append(event)
        if len(self.state.history) > 4 * MAX_HISTORY:
            del self.state.history[: -MAX_HISTORY]
        return event

    # -- command handlers -------------------------------------------------------

    def handle_move_focus(self, target) -> dict:
        """Recompute the frame for a new focus and load the registers."""
        target = np.asarray(target, dtype=float).reshape(3)
        with self._lock:
            volume = self.state.layout.working_volume()
            if not volume.contains(target):
                raise OutOfVolumeError(
                    f"target {target.tolist()} outside x{volume.x_range} y{volume.y_range} z{volume.z_range}"
                )
            t0 = time.perf_counter()
            frame = compute_frame(
                self.state.layout, FocalCommand(target), self.state.medium, self.state.quant
            )
            self.upac.load_frame(frame)
            latency = time.perf_counter() - t0
            self.state.current_frame = frame
            self.state.trajectory = None
            payload = {
                "target": target.tolist(),
                "latency_s": latency,
                "delays_cycles": frame.delays_cycles.tolist(),
            }
            self._record("move_focus", {"target": target.tolist(), "latency_s": latency})
            return payload

    def handle_set_temperature(self, temperature_c: float) -> dict:
        with self._lock:
            self.state.medium = MediumState.from_temperature(float(temperature_c))
            # recompute immediately: the served frame must match the medium
            frame = compute_frame(
                self.state.layout,
                self.state.current_frame.command,
                self.state.medium,
                self.state.quant,
            )
            self.state.current_frame = frame
            self.upac.load_frame(frame)
            self._record("set_temperature", {"temperature_c": temperature_c})
            return {
                "temperature_c": self.state.medium.temperature,
                "speed_of_sound": self.state.medium.speed_of_sound,
            }

    def handle_start_trajectory(self, payload: dict) -> dict:
        spec = TrajectorySpec(
            shape=payload["shape"],
            size_mm=float(payload["size_mm"]),
            speed=float(payload["speed"]),
            step_size=float(payload["step_size"]),
            height=float(payload["height"]),
        )
        refresh = spec.speed / spec.step_size if spec.speed > 0 else 1000.0
        timing = ControllerTiming.from_refresh_rate(refresh)
        plan = plan_steps(spec, timing)
        with self._lock:
            volume = self.state.layout.working_volume()
            for command in (plan[0], plan[len(plan) // 2]):
                if not volume.contains(command.target):
                    raise OutOfVolumeError("trajectory leaves the working volume")
            self.state.trajectory = {
                "plan": plan,
                "dwell": timing.latency,
                "t0": time.monotonic(),
                "spec": payload,
            }
            self._record("start_trajectory", payload)
            return {"waypoints": len(plan), "dwell_s": timing.latency}

    def handle_stop(self) -> dict:
        with self._lock:
            self._refresh_trajectory_frame()
            self.state.trajectory = None
            self._record("stop", {})
            return {"focus": self.state.current_frame.command.target.tolist()}

    def _refresh_trajectory_frame(self):
        """Advance the commanded focus to the active waypoint (lock held)."""
        traj = self.state.trajectory
        if traj is None:
            return
        idx = int((time.monotonic() - traj["t0"]) / traj["dwell"]) % len(traj["plan"])
        command = traj["plan"][idx]
        if not np.array_equal(command.target, self.state.current_frame.command.target):
            frame = compute_frame(self.state.layout, command, self.state.medium, self.state.quant)
            self.state.current_frame = frame
            self.upac.load_frame(frame)

    def handle_query_field(self, payload: dict) -> dict:
        plane = payload.get("plane", "xz")
        offset = float(payload.get("offset", 0.0))
        extent = float(payload.get("extent", 60.0))
        cells = min(int(payload.get("cells", 32)), MAX_SLICE_CELLS)
        with self._lock:
            self._refresh_trajectory_frame()
            frame = self.state.current_frame
            center = frame.command.target
            axes = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}[plane]
            u0, v0 = center[axes[0]], center[axes[1]]
            pitch = 2 * extent / max(cells - 1, 1)
            sl = sample_slice(
                self.state.layout,
                frame,
                self.state.medium,
                plane,
                offset,
                (u0 - extent, u0 + extent),
                (v0 - extent, v0 + extent),
                pitch,
                self.state.source_amplitude,
            )
            levels = [[spl(p) for p in row] for row in sl.pressure]
            return {
                "plane": plane,
                "offset": offset,
                "u0": float(sl.u_coords[0]),
                "v0": float(sl.v_coords[0]),
                "pitch": sl.pitch,
                "shape": list(sl.pressure.shape),
                "spl_db": levels,
                "focus": center.tolist(),
            }

    def handle_query_particle(self) -> dict:
        with self._lock:
            p = self.state.particle
            if p is None:
                return {"particle": None}
            return {
                "particle": {
                    "position": p.position.tolist(),
                    "velocity": p.velocity.tolist(),
                    "radius": p.radius,
                    "density": p.density,
                }
            }

    def telemetry_snapshot(self) -> dict:
        with self._lock:
            self._refresh_trajectory_frame()
            frame = self.state.current_frame
            snap = {
                "focus": frame.command.target.tolist(),
                "temperature_c": self.state.medium.temperature,
                "trajectory_active": self.state.trajectory is not None,
                "particle": None,
            }
            if self.state.particle is not None:
                snap["particle"] = {
                    "position": self.state.particle.position.tolist(),
                    "velocity": self.state.particle.velocity.tolist(),
                }
            return snap

    def apply(self, envelope: dict) -> dict:
        """Dispatch a command envelope; returns the response payload."""
        verb = envelope.get("verb")
        payload = envelope.get("payload", {})
        if envelope.get("v", PROTOCOL_VERSION) != PROTOCOL_VERSION:
            raise InvalidArgumentError(f"unsupported protocol version {envelope.get('v')}")
        if verb == "MoveFocus":
            return self.handle_move_focus(payload["target"])
        if verb == "SetTemperature":
            return self.handle_set_temperature(payload["temperature_c"])
        if verb == "StartTrajectory":
            return self.handle_start_trajectory(payload)
        if verb == "Stop":
            return self.handle_stop()
        if verb == "QueryField":
            return self.handle_query_field(payload)
        if verb == "QueryParticle":
            return self.handle_query_particle()
        raise InvalidArgumentError(f"unknown verb {verb!r}; expected one of {VERBS}")

    # -- persistence --------------------------------------------------------------

    def persist_session(self, path) -> None:
        with self._lock:
            doc = {
                "v": SESSION_VERSION,
                "layout": self.state.layout.to_json_dict(),
                "medium": {
                    "temperature_c": self.state.medium.temperature,
                    "density_air": self.state.medium.density_air,
                },
                "command": {"target": self.state.current_frame.command.target.tolist()},
                "source_amplitude": self.state.source_amplitude,
                "trajectory_spec": (
                    self.state.trajectory["spec"] if self.state.trajectory else None
                ),
                "particle": (
                    {
                        "position": self.state.particle.position.tolist(),
                        "velocity": self.state.particle.velocity.tolist(),
                        "radius": self.state.particle.radius,
                        "density": self.state.particle.density,
                    }
                    if self.state.particle
                    else None
                ),
                "history": self.state.history[-MAX_HISTORY:],
            }
        text = json.dumps(doc)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")

    @classmethod
    def load_session(cls, path) -> "SteeringService":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise SessionLoadError(f"corrupt session file {path}: {exc}") from exc
        if doc.get("v") != SESSION_VERSION:
            raise SessionVersionError(SESSION_VERSION, doc.get("v"))
        layout = ArrayLayout.from_json_dict(doc["layout"])
        medium = MediumState.from_temperature(
            doc["medium"]["temperature_c"], doc["medium"].get("density_air", 1.204)
        )
        particle = None
        if doc.get("particle"):
            p = doc["particle"]
            particle = ParticleState(p["position"], p["velocity"], p["radius"], p["density"])
        service = cls(
            layout=layout,
            medium=medium,
            source_amplitude=doc.get("source_amplitude", 1.0),
            initial_target=doc["command"]["target"],
            particle=particle,
        )
        service.state.history = list(doc.get("history", []))[-MAX_HISTORY:]
        service.state.history_seq = max((e["seq"] for e in service.state.history), default=0)
        if doc.get("trajectory_spec"):
            service.handle_start_trajectory(doc["trajectory_spec"])
        return service


class _Subscription:
    def __init__(self, rate_hz: float, want_particle: bool, slice_req: dict | None):
        self.rate = rate_hz
        self.want_particle = want_particle
        self.slice_req = slice_req
        self.queue: queue.Queue = queue.Queue(maxsize=TELEMETRY_QUEUE)
        self.dropped = 0
        self.seq = 0
        self.stop = threading.Event()

    def offer(self, event: dict) -> None:
        while True:
            try:
                self.queue.put_nowait(event)
                return
            except queue.Full:
                try:
                    self.queue.get_nowait()  # drop-oldest
                    self.dropped += 1
                except queue.Empty:
                    pass


class _CommandHandler(socketserver.StreamRequestHandler):
    def handle(self):
        service: SteeringService = self.server.service  # type: ignore[attr-defined]
        last_seq = None
        subscription: _Subscription | None = None
        pump: threading.Thread | None = None
        write_lock = threading.Lock()

        def send(obj: dict) -> None:
            line = json.dumps(obj) + "\n"
            with write_lock:
                self.wfile.write(line.encode("utf-8"))
                self.wfile.flush()

        def telemetry_pump(sub: _Subscription):
            period = 1.0 / sub.rate
            while not sub.stop.is_set():
                snap = service.telemetry_snapshot()
                if sub.slice_req is not None:
                    snap["slice"] = service.handle_query_field(sub.slice_req)
                if not sub.want_particle:
                    snap.pop("particle", None)
                sub.seq += 1
                event = {
                    "v": PROTOCOL_VERSION,
                    "seq": sub.seq,
                    "kind": "telemetry",
                    "payload": snap,
                    "ts": time.time(),
                }
                sub.offer(event)
                if sub.dropped:
                    sub.seq += 1
                    sub.offer(
                        {
                            "v": PROTOCOL_VERSION,
                            "seq": sub.seq,
                            "kind": "gap",
                            "payload": {"dropped": sub.dropped},
                            "ts": time.time(),
                        }
                    )
                    sub.dropped = 0
                # drain queue to the socket
                try:
                    while True:
                        item = sub.queue.get_nowait()
                        send(item)
                except queue.Empty:
                    pass
                except OSError:
                    return
                sub.stop.wait(period)

        try:
            for raw in self.rfile:
                raw = raw.strip()
                if not raw:
                    continue
                try:
                    envelope = json.loads(raw)
                except json.JSONDecodeError as exc:
                    send({"v": PROTOCOL_VERSION, "seq": -1, "kind": "error",
                          "payload": {"message": f"bad json: {exc}"}, "ts": time.time()})
                    continue
                seq = envelope.get("seq", -1)
                if last_seq is not None and seq <= last_seq:
                    send({"v": PROTOCOL_VERSION, "seq": seq, "kind": "error",
                          "payload": {"message": f"seq {seq} not increasing (last {last_seq})"},
                          "ts": time.time()})
                    continue
                last_seq = seq
                verb = envelope.get("verb")
                try:
                    start_sub = None
                    if verb == "Subscribe":
                        payload = envelope.get("payload", {})
                        rate = float(payload.get("rate", 10.0))
                        if rate <= 0 or rate > 60.0:
                            raise InvalidArgumentError("rate must be in (0, 60] Hz")
                        if subscription is not None:
                            subscription.stop.set()
                        start_sub = _Subscription(
                            rate, bool(payload.get("particle", True)), payload.get("field_slice")
                        )
                        result = {"subscribed": True, "rate": rate}
                    elif verb == "Unsubscribe":
                        if subscription is not None:
                            subscription.stop.set()
                            subscription = None
                        result = {"subscribed": False}
                    else:
                        result = service.apply(envelope)
                    send({"v": PROTOCOL_VERSION, "seq": seq, "kind": "response",
                          "payload": result, "ts": time.time()})
                    if start_sub is not None:
                        # pump starts only after the ack is on the wire
                        subscription = start_sub
                        pump = threading.Thread(
                            target=telemetry_pump, args=(subscription,), daemon=True
                        )
                        pump.start()
                except SonotrapError as exc:
                    send({"v": PROTOCOL_VERSION, "seq": seq, "kind": "error",
                          "payload": {"message": str(exc), "type": type(exc).__name__},
                          "ts": time.time()})
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            if subscription is not None:
                subscription.stop.set()


class _SnapshotHandler(BaseHTTPRequestHandler):
    def do_GET(self):  # noqa: N802  (stdlib naming)
        service: SteeringService = self.server.service  # type: ignore[attr-defined]
        if self.path == "/healthz":
            body = b"ok\n"
            self.send_response(200)
            self.send_header("Content-Type", "text/plain")
        elif self.path == "/snapshot":
            body = (json.dumps(service.telemetry_snapshot()) + "\n").encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
        else:
            body = b"not found\n"
            self.send_response(404)
            self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):  # quiet
        pass


class ServiceServer:
    """TCP command listener plus HTTP snapshot listener."""

    def __init__(self, service: SteeringService, host: str = "127.0.0.1",
                 port: int = 0, http_port: int | None = None):
        self.service = service
        self.tcp = socketserver.ThreadingTCPServer((host, port), _CommandHandler,
                                                   bind_and_activate=True)
        self.tcp.daemon_threads = True
        self.tcp.allow_reuse_address = True
        self.tcp.service = service  # type: ignore[attr-defined]
        http_bind = 0 if http_port is None else http_port
        self.http = ThreadingHTTPServer((host, http_bind), _SnapshotHandler)
        self.http.daemon_threads = True
        self.http.service = service  # type: ignore[attr-defined]
        self._threads: list[threading.Thread] = []

    @property
    def port(self) -> int:
        return self.tcp.server_address[1]

    @property
    def http_port(self) -> int:
        return self.http.server_address[1]

    def start(self) -> None:
        for srv in (self.tcp, self.http):
            t = threading.Thread(target=srv.serve_forever, daemon=True)
            t.start()
            self._threads.append(t)

    def stop(self) -> None:
        self.tcp.shutdown()
        self.http.shutdown()
        self.tcp.server_close()
        self.http.server_close()


def connect_client(host: str, port: int, timeout: float = 5.0) -> socket.socket:
    """Convenience dialer for tests and scripts."""
    sock = socket.create_connection((host, port), timeout=timeout)
    return sock
