"""Session front door: configuration intake, static calculation, the live
prediction pipeline, and fan-out of JSON messages to clients.

Transport is one bidirectional channel per client carrying length-prefixed
JSON messages (4-byte big-endian length, UTF-8 payload); the schema is
documented field-by-field in docs/message_schema.md and versioned with a
top-level "v" field.  An HTTP/WebSocket adapter with the same schema lives
in httpapi.py.
"""

from __future__ import annotations

import json
import socket
import struct
import threading
from collections import deque

from .dynamics import (PRE_APPROACH_CEILING_M, STOPPED_SPEED, Confidence,
                       LandingSession, PredictionSnapshot, Stage,
                       TakeoffSession)
from .forces import AtmosphereParams, RunwayParams
from .fsm import (LandingEvent, LandingMachine, Severity, SeverityFilter,
                  TakeoffEvent, TakeoffMachine, TakeoffState, classify,
                  classify_braking, color_of)
from .presets import AUTOBRAKE_TABLE, FLAP_TABLE, aircraft_preset, autobrake_decel
from .statics import (IntegratorConfig, LandingConfig, NonConvergence,
                      TakeoffConfig, compute_asdr, compute_ldr)
from .telemetry import FrameQueue, TelemetryFrame, UdpListener

SCHEMA_VERSION = 1
CLIENT_BUFFER = 256


class ValidationError(Exception):
    """Config payload violates a type invariant; carries field messages."""

    def __init__(self, fields: dict):
        super().__init__("; ".join(f"{k}: {v}" for k, v in fields.items()))
        self.fields = fields


class InfeasibleConfig(Exception):
    """Config is well-formed but the static calculation cannot converge."""


# -- config intake -------------------------------------------------------------


def _field_errors(checks) -> None:
    errors = {}
    for name, fn in checks:
        try:
            fn()
        except (ValueError, KeyError, TypeError) as e:
            errors[name] = str(e)
    if errors:
        raise ValidationError(errors)


def _number(payload, name, errors, default=None):
    val = payload.get(name, default)
    if val is None:
        errors[name] = "required"
        return 0.0
    try:
        return float(val)
    except (TypeError, ValueError):
        errors[name] = f"not a number: {val!r}"
        return 0.0


def _common_parts(payload: dict, errors: dict):
    runway_raw = payload.get("runway", {})
    atmo_raw = payload.get("atmosphere", {})
    aircraft_raw = dict(payload.get("aircraft", {}))
    flap = str(aircraft_raw.pop("flap_setting", "5"))
    preset = aircraft_raw.pop("preset", "narrowbody")

    runway = atmosphere = aircraft = None
    try:
        runway = RunwayParams(**{k: float(v) for k, v in runway_raw.items()})
    except (ValueError, TypeError) as e:
        errors["runway"] = str(e)
    try:
        atmosphere = AtmosphereParams(**{k: float(v) for k, v in atmo_raw.items()})
    except (ValueError, TypeError) as e:
        errors["atmosphere"] = str(e)
    if flap not in FLAP_TABLE:
        errors["aircraft.flap_setting"] = \
            f"unknown detent {flap!r}; one of {sorted(FLAP_TABLE)}"
    else:
        try:
            aircraft = aircraft_preset(preset, flap, **{
                k: float(v) for k, v in aircraft_raw.items()})
        except (ValueError, TypeError, KeyError) as e:
            errors["aircraft"] = str(e)
    return aircraft, runway, atmosphere


def build_takeoff_config(payload: dict) -> tuple[TakeoffConfig, IntegratorConfig]:
    errors: dict = {}
    aircraft, runway, atmosphere = _common_parts(payload, errors)
    v1 = _number(payload, "v1", errors)
    vr = _number(payload, "vr", errors)
    v2 = _number(payload, "v2", errors)
    reaction = _number(payload, "reaction_time", errors, default=2.0)
    if not errors:
        if not (0 < v1 <= vr <= v2):
            errors["v1"] = f"need 0 < v1 <= vr <= v2, got {v1}, {vr}, {v2}"
    if errors:
        raise ValidationError(errors)
    try:
        integrator = IntegratorConfig(reaction_time_at_v1=reaction)
        config = TakeoffConfig(aircraft, runway, atmosphere, v1=v1, vr=vr, v2=v2)
    except ValueError as e:
        raise ValidationError({"config": str(e)})
    return config, integrator


def build_landing_config(payload: dict) -> LandingConfig:
    errors: dict = {}
    aircraft, runway, atmosphere = _common_parts(payload, errors)
    vref = _number(payload, "vref", errors)
    vapp = _number(payload, "vapp", errors, default=vref + 2.5 if vref else 0.0)
    decel = payload.get("autobrake_decel")
    if decel is None:
        detent = payload.get("autobrake", "AB3")
        if detent not in AUTOBRAKE_TABLE:
            errors["autobrake"] = \
                f"unknown detent {detent!r}; one of {sorted(AUTOBRAKE_TABLE)}"
        else:
            decel = autobrake_decel(detent)
    if errors:
        raise ValidationError(errors)
    kwargs = {}
    for opt in ("glide_path", "flare_duration", "free_roll_duration"):
        if opt in payload:
            kwargs[opt] = float(payload[opt])
    try:
        return LandingConfig(aircraft, runway, atmosphere, vref=vref, vapp=vapp,
                             autobrake_decel=float(decel), **kwargs)
    except ValueError as e:
        raise ValidationError({"config": str(e)})


# -- session -------------------------------------------------------------------


def _snapshot_fields(snap: PredictionSnapshot, frame: TelemetryFrame) -> dict:
    return {
        "t": frame.timestamp,
        "stage": snap.procedure_stage.value,
        "dynamic_required_m": round(snap.dynamic_required_distance, 2),
        "stop_position_m": round(snap.stop_position, 2),
        "stop_margin_m": round(snap.stop_margin, 2),
        "delta_from_static": round(snap.delta_from_static, 5),
        "bdr_m": None if snap.bdr is None else round(snap.bdr, 2),
        "confidence": snap.confidence.name.capitalize(),
        "position_m": round(frame.distance_along_runway, 2),
        "ground_speed_ms": round(frame.ground_speed, 3),
    }


class ProcedureSession:
    """One configured procedure: static result, dynamic pipeline, FSM."""

    def __init__(self, procedure: str, payload: dict):
        if procedure not in ("takeoff", "landing"):
            raise ValidationError({"procedure": f"unknown: {procedure!r}"})
        self.procedure = procedure
        self.seq = 0
        self._severity = SeverityFilter()
        self._stopped_sent = False
        self._braking_evt_sent = False

        try:
            if procedure == "takeoff":
                self.config, self.integrator = build_takeoff_config(payload)
                self.static = compute_asdr(self.config, self.integrator)
                self.session = TakeoffSession(self.config, self.integrator,
                                              self.static)
                self.machine = TakeoffMachine()
            else:
                self.config = build_landing_config(payload)
                self.integrator = None
                self.static = compute_ldr(self.config)
                self.session = LandingSession(self.config, self.static)
                self.machine = LandingMachine()
        except NonConvergence as e:
            raise InfeasibleConfig(str(e))
        self.runway_length = self.config.runway.length

    # messages ------------------------------------------------------------

    def static_message(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "type": "static_result",
            "procedure": self.procedure,
            "segments": [{"label": label, "distance_m": round(d, 2)}
                         for label, d in self.static.segments],
            "total_m": round(self.static.total, 2),
            "runway_length_m": self.runway_length,
            "exceeds_runway": self.static.exceeds_runway,
        }

    def state_message(self) -> dict:
        state = self.machine.state
        return {
            "v": SCHEMA_VERSION,
            "type": "session_state",
            "procedure": self.procedure,
            "state": state.value,
            "color": color_of(state).value,
            "last_seq": self.seq - 1,
        }

    def _state_change(self, before, reason: str) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "type": "state_change",
            "from": before.value,
            "to": self.machine.state.value,
            "reason": reason,
            "color": color_of(self.machine.state).value,
        }

    # event derivation ------------------------------------------------------

    def _apply(self, messages: list, event, severity=None):
        before = self.machine.state
        if self.machine.apply(event, severity):
            messages.append(self._state_change(before, event.value))

    def _takeoff_events(self, frame: TelemetryFrame, snap: PredictionSnapshot,
                        messages: list):
        m = self.machine
        if m.state is TakeoffState.STANDBY and self.session.started:
            self._apply(messages, TakeoffEvent.THROTTLE_UP)

        in_rto = snap.procedure_stage is Stage.RTO_BRAKING
        if in_rto and m.state not in (TakeoffState.RTO_INITIATED,
                                      TakeoffState.RTO_AS_EXPECTED,
                                      TakeoffState.RTO_BRAKE_MORE,
                                      TakeoffState.RTO_MAX_BRAKE):
            if m.state is not TakeoffState.STANDBY:
                self._apply(messages, TakeoffEvent.RTO_DETECTED)

        if not in_rto and self.session.v1_reached \
                and m.state in (TakeoffState.CALCULATING, TakeoffState.AS_EXPECTED,
                                TakeoffState.WARNING, TakeoffState.REJECT_TAKEOFF):
            self._apply(messages, TakeoffEvent.V1_REACHED)

        if snap.confidence < Confidence.CONVERGING:
            return
        if in_rto:
            sev = self._severity.feed(
                classify_braking(snap, self.static.total, self.runway_length))
        else:
            sev = self._severity.feed(
                classify(snap, self.static.total, self.runway_length))
        if m.state is TakeoffState.CALCULATING and not in_rto:
            self._apply(messages, TakeoffEvent.SEED_COMPLETE, sev)
        elif m.state in (TakeoffState.AS_EXPECTED, TakeoffState.WARNING,
                         TakeoffState.REJECT_TAKEOFF) and not in_rto:
            self._apply(messages, TakeoffEvent.SEVERITY, sev)
        elif m.state in (TakeoffState.RTO_INITIATED, TakeoffState.RTO_AS_EXPECTED,
                         TakeoffState.RTO_BRAKE_MORE, TakeoffState.RTO_MAX_BRAKE):
            self._apply(messages, TakeoffEvent.SEVERITY, sev)
            if frame.ground_speed <= STOPPED_SPEED and not self._stopped_sent:
                self._stopped_sent = True
                self.machine.apply(TakeoffEvent.STOPPED)

    def _landing_events(self, frame: TelemetryFrame, snap: PredictionSnapshot,
                        messages: list):
        from .fsm import LandingState
        m = self.machine
        on_ground_stage = snap.procedure_stage in (Stage.FREE_ROLL,
                                                   Stage.LANDING_BRAKING)
        gated = snap.confidence >= Confidence.CONVERGING
        sev = None
        if gated:
            if on_ground_stage:
                sev = self._severity.feed(classify_braking(
                    snap, self.static.total, self.runway_length))
            else:
                sev = self._severity.feed(classify(
                    snap, self.static.total, self.runway_length))

        if m.state is LandingState.SYSTEM_READY:
            below_gate = (not frame.on_ground
                          and frame.height_agl <= PRE_APPROACH_CEILING_M)
            if below_gate and sev is not None:
                self._apply(messages, LandingEvent.BELOW_300FT, sev)
            return

        airborne_states = (LandingState.WITHIN_LIMITS, LandingState.WARNING,
                           LandingState.GO_AROUND)
        if m.state in airborne_states:
            if frame.on_ground:
                self._apply(messages, LandingEvent.TOUCHDOWN,
                            sev if sev is not None else Severity.NOMINAL)
            elif sev is not None:
                self._apply(messages, LandingEvent.SEVERITY, sev)
            return

        if frame.brakes_applied and not self._braking_evt_sent:
            self._braking_evt_sent = True
            self._apply(messages, LandingEvent.BRAKING_STARTED)
        if sev is not None:
            self._apply(messages, LandingEvent.SEVERITY, sev)
        if frame.ground_speed <= STOPPED_SPEED and not self._stopped_sent:
            self._stopped_sent = True
            self.machine.apply(LandingEvent.STOPPED)

    # frame processing --------------------------------------------------------

    def process_frame(self, frame: TelemetryFrame) -> list[dict]:
        snap = self.session.step(frame)
        messages: list[dict] = []
        if self.procedure == "takeoff":
            self._takeoff_events(frame, snap, messages)
        else:
            self._landing_events(frame, snap, messages)
        update = {
            "v": SCHEMA_VERSION,
            "type": "dynamic_update",
            "seq": self.seq,
            "state": self.machine.state.value,
            "color": color_of(self.machine.state).value,
            **_snapshot_fields(snap, frame),
        }
        self.seq += 1
        messages.append(update)
        return messages


# -- client fan-out -------------------------------------------------------------


class _Client:
    def __init__(self, conn: socket.socket | None):
        self.conn = conn  # None for non-TCP adapters (WebSocket relay)
        self.buffer: deque = deque()
        self.dropped = 0
        self.lock = threading.Lock()
        self.ready = threading.Condition(self.lock)
        self.alive = True

    def enqueue(self, message: dict):
        with self.ready:
            if len(self.buffer) >= CLIENT_BUFFER:
                self.buffer.popleft()
                self.dropped += 1
            self.buffer.append(message)
            self.ready.notify()

    def next_batch(self, timeout=0.5):
        with self.ready:
            if not self.buffer:
                self.ready.wait(timeout)
            batch = []
            if self.dropped:
                batch.append({"v": SCHEMA_VERSION, "type": "gap_notice",
                              "dropped": self.dropped})
                self.dropped = 0
            while self.buffer:
                batch.append(self.buffer.popleft())
            return batch


def send_message(conn: socket.socket, message: dict):
    payload = json.dumps(message, separators=(",", ":")).encode()
    conn.sendall(struct.pack(">I", len(payload)) + payload)


def recv_message(conn: socket.socket) -> dict | None:
    header = _recv_exact(conn, 4)
    if header is None:
        return None
    (length,) = struct.unpack(">I", header)
    if length > 1 << 20:
        raise ValueError(f"message of {length} bytes exceeds the 1 MiB cap")
    body = _recv_exact(conn, length)
    if body is None:
        return None
    return json.loads(body.decode())


def _recv_exact(conn: socket.socket, n: int) -> bytes | None:
    chunks = b""
    while len(chunks) < n:
        part = conn.recv(n - len(chunks))
        if not part:
            return None
        chunks += part
    return chunks


class GatewayServer:
    """UDP telemetry in, prediction pipeline, TCP message stream out."""

    def __init__(self, tcp_port: int = 0, udp_port: int = 0,
                 mapping=None, host: str = "127.0.0.1"):
        self.host = host
        self.session: ProcedureSession | None = None
        self._session_lock = threading.Lock()
        self._clients: list[_Client] = []
        self._clients_lock = threading.Lock()
        self._last_static: dict | None = None
        self.frames = FrameQueue()
        self.listener = UdpListener(udp_port, self.frames, mapping, host=host)
        self.udp_port = self.listener.port
        self._tcp = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._tcp.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._tcp.bind((host, tcp_port))
        self._tcp.listen(8)
        self._tcp.settimeout(0.2)
        self.tcp_port = self._tcp.getsockname()[1]
        self._stop = threading.Event()
        self._threads = [
            threading.Thread(target=self._pipeline, name="pipeline", daemon=True),
            threading.Thread(target=self._accept, name="tcp-accept", daemon=True),
        ]

    # lifecycle ---------------------------------------------------------------

    def start(self):
        self.listener.start()
        for t in self._threads:
            t.start()
        return self

    def stop(self):
        self._stop.set()
        self.listener.stop()
        self.frames.close()
        for t in self._threads:
            t.join(timeout=2.0)
        self._tcp.close()
        with self._clients_lock:
            for c in self._clients:
                c.alive = False
                if c.conn is not None:
                    try:
                        c.conn.close()
                    except OSError:
                        pass

    # config ------------------------------------------------------------------

    def submit_config(self, procedure: str, payload: dict) -> dict:
        """Start a session; returns the StaticResult message (or raises)."""
        session = ProcedureSession(procedure, payload)
        with self._session_lock:
            self.session = session   # a new submit tears down the previous one
            self._last_static = session.static_message()
        self._broadcast(self._last_static)
        return self._last_static

    def health(self) -> dict:
        c = self.listener.counters
        with self._session_lock:
            state = None if self.session is None else self.session.machine.state.value
            seq = None if self.session is None else self.session.seq
        return {
            "alive": not self._stop.is_set(),
            "session_state": state,
            "dynamic_updates": seq,
            "clients": len(self._clients),
            "telemetry": {
                "datagrams": c.datagrams, "frames": c.frames,
                "bad_magic": c.bad_magic, "bad_length": c.bad_length,
                "duplicate_timestamp": c.duplicate_timestamp,
                "dropped_frames": self.frames.dropped,
            },
        }

    # internals -----------------------------------------------------------

    def _broadcast(self, *messages: dict):
        with self._clients_lock:
            clients = list(self._clients)
        for m in messages:
            for c in clients:
                c.enqueue(m)

    def _pipeline(self):
        while not self._stop.is_set():
            frame = self.frames.get(timeout=0.2)
            if frame is None:
                continue
            with self._session_lock:
                session = self.session
            if session is None:
                continue
            try:
                messages = session.process_frame(frame)
            except Exception:  # a pipeline wreck must not kill the server
                continue
            self._broadcast(*messages)

    def _accept(self):
        while not self._stop.is_set():
            try:
                conn, _ = self._tcp.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            client = _Client(conn)
            with self._clients_lock:
                self._clients.append(client)
            with self._session_lock:
                snapshot = []
                if self._last_static is not None:
                    snapshot.append(self._last_static)
                if self.session is not None:
                    snapshot.append(self.session.state_message())
            for m in snapshot:
                client.enqueue(m)
            threading.Thread(target=self._client_writer, args=(client,),
                             daemon=True).start()
            threading.Thread(target=self._client_reader, args=(client,),
                             daemon=True).start()

    def _client_writer(self, client: _Client):
        try:
            while client.alive and not self._stop.is_set():
                for m in client.next_batch():
                    send_message(client.conn, m)
        except OSError:
            pass
        finally:
            self._drop_client(client)

    def _client_reader(self, client: _Client):
        try:
            while client.alive and not self._stop.is_set():
                msg = recv_message(client.conn)
                if msg is None:
                    break
                if msg.get("type") == "config_submit":
                    try:
                        self.submit_config(msg.get("procedure", ""),
                                           msg.get("config", {}))
                    except ValidationError as e:
                        client.enqueue({"v": SCHEMA_VERSION, "type": "error",
                                        "code": "validation", "fields": e.fields})
                    except InfeasibleConfig as e:
                        client.enqueue({"v": SCHEMA_VERSION, "type": "error",
                                        "code": "infeasible", "detail": str(e)})
        except (OSError, ValueError, json.JSONDecodeError):
            pass
        finally:
            self._drop_client(client)

    def _drop_client(self, client: _Client):
        client.alive = False
        with self._clients_lock:
            if client in self._clients:
                self._clients.remove(client)
        if client.conn is not None:
            try:
                client.conn.close()
            except OSError:
                pass
