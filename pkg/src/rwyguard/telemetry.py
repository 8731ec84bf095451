"""Flight-data datagram ingestion.

Wire format (bit-exact, little-endian): a 5-byte prologue of ASCII "DATA"
plus one pad byte, then N records of 36 bytes each, an int32 channel index
followed by eight float32 values.  Any pad byte is accepted on decode; 0x00
is emitted.  See docs/wire_format.md.
"""

from __future__ import annotations

import collections
import json
import socket
import struct
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

MAGIC = b"DATA"
RECORD_BYTES = 36
_RECORD = struct.Struct("<i8f")

KT_TO_MS = 0.514444
FT_TO_M = 0.3048
FPM_TO_MS = 0.00508

QUEUE_CAPACITY = 64


class BadMagic(Exception):
    """Datagram does not begin with the DATA prologue."""


class BadLength(Exception):
    """Payload after the prologue is not a whole number of records."""


class NoPriorValue(Exception):
    """A mapped channel is missing and no earlier frame can back-fill it."""


@dataclass(frozen=True)
class DataRecord:
    index: int
    values: tuple  # 8 floats

    def __post_init__(self):
        if len(self.values) != 8:
            raise ValueError("a record carries exactly 8 values")


def parse_datagram(data: bytes) -> list[DataRecord]:
    """Decode one datagram into records; total over all byte strings."""
    if len(data) < 5 or data[:4] != MAGIC:
        raise BadMagic(f"prologue {data[:4]!r} != {MAGIC!r}")
    payload = data[5:]
    if len(payload) % RECORD_BYTES != 0:
        raise BadLength(f"payload of {len(payload)} bytes is not a multiple of {RECORD_BYTES}")
    records = []
    for off in range(0, len(payload), RECORD_BYTES):
        fields = _RECORD.unpack_from(payload, off)
        records.append(DataRecord(index=fields[0], values=tuple(fields[1:])))
    return records


def encode_datagram(records) -> bytes:
    """Inverse of parse_datagram; pad byte emitted as 0x00."""
    out = bytearray(MAGIC + b"\x00")
    for rec in records:
        out += _RECORD.pack(rec.index, *rec.values)
    return bytes(out)


@dataclass(frozen=True)
class ChannelSlot:
    index: int   # record channel id
    slot: int    # 0..7 within the record
    scale: float = 1.0  # multiplier into SI units


# Default indices follow common simulator data-output conventions for the
# low groups (speeds, vertical speed, position, throttle); the high custom
# group carries runway-frame quantities a stock output does not provide.
# All of it is overridable from a JSON mapping file.
DEFAULT_CHANNELS = {
    "ground_speed": ChannelSlot(3, 3, KT_TO_MS),        # knots
    "vertical_speed": ChannelSlot(4, 2, FPM_TO_MS),     # ft/min
    "height_agl": ChannelSlot(20, 3, FT_TO_M),          # feet
    "throttle_fraction": ChannelSlot(25, 0, 1.0),
    "distance_along_runway": ChannelSlot(64, 0, 1.0),   # metres from threshold
    "acceleration": ChannelSlot(64, 1, 1.0),            # m/s^2
    "on_ground": ChannelSlot(64, 2, 1.0),               # flag
    "brakes_applied": ChannelSlot(64, 3, 1.0),          # flag
    "sim_time": ChannelSlot(64, 4, 1.0),                # s, optional timestamp source
}

FRAME_FIELDS = ("ground_speed", "vertical_speed", "height_agl",
                "distance_along_runway", "acceleration", "throttle_fraction",
                "on_ground", "brakes_applied")


@dataclass(frozen=True)
class ChannelMapping:
    channels: dict = field(default_factory=lambda: dict(DEFAULT_CHANNELS))

    def __post_init__(self):
        missing = [f for f in FRAME_FIELDS if f not in self.channels]
        if missing:
            raise ValueError(f"mapping lacks source slots for: {missing}")

    @classmethod
    def from_json(cls, path: str | Path) -> "ChannelMapping":
        with open(path) as f:
            raw = json.load(f)
        channels = dict(DEFAULT_CHANNELS)
        for name, spec in raw.items():
            channels[name] = ChannelSlot(int(spec["index"]), int(spec["slot"]),
                                         float(spec.get("scale", 1.0)))
        return cls(channels)

    def to_json(self, path: str | Path):
        raw = {name: {"index": ch.index, "slot": ch.slot, "scale": ch.scale}
               for name, ch in self.channels.items()}
        Path(path).write_text(json.dumps(raw, indent=2) + "\n")


@dataclass(frozen=True)
class TelemetryFrame:
    """One timestamped sample of aircraft state, SI units."""
    timestamp: float               # s, strictly increasing within a session
    ground_speed: float            # m/s
    vertical_speed: float          # m/s, negative descending
    height_agl: float              # m
    distance_along_runway: float   # m from threshold
    acceleration: float            # m/s^2
    throttle_fraction: float       # 0..1
    on_ground: bool
    brakes_applied: bool
    stale_channels: int = 0        # channels back-filled from the prior frame


def assemble_frame(records, mapping: ChannelMapping, arrival_time: float,
                   prev: TelemetryFrame | None = None) -> TelemetryFrame:
    """Build a frame from one datagram's records.

    Missing channels carry the previous frame's value forward (counted in
    stale_channels); on the very first frame that raises NoPriorValue.
    When the mapping defines a sim_time channel and the datagram carries
    it, that value becomes the frame timestamp instead of arrival_time.
    """
    by_index = {}
    for rec in records:
        by_index[rec.index] = rec.values  # last record wins per index

    def read(name):
        ch = mapping.channels[name]
        values = by_index.get(ch.index)
        if values is None:
            return None
        return values[ch.slot] * ch.scale

    fields = {}
    stale = 0
    for name in FRAME_FIELDS:
        val = read(name)
        if val is None:
            if prev is None:
                raise NoPriorValue(f"channel {name!r} absent on first frame")
            val = getattr(prev, name)
            stale += 1
        fields[name] = val

    timestamp = arrival_time
    if "sim_time" in mapping.channels:
        t = read("sim_time")
        if t is not None:
            timestamp = t

    return TelemetryFrame(
        timestamp=timestamp,
        ground_speed=max(fields["ground_speed"], 0.0),
        vertical_speed=fields["vertical_speed"],
        height_agl=fields["height_agl"],
        distance_along_runway=fields["distance_along_runway"],
        acceleration=fields["acceleration"],
        throttle_fraction=min(max(fields["throttle_fraction"], 0.0), 1.0),
        on_ground=bool(round(float(fields["on_ground"]))),
        brakes_applied=bool(round(float(fields["brakes_applied"]))),
        stale_channels=stale,
    )


def frame_to_records(frame: TelemetryFrame, mapping: ChannelMapping) -> list[DataRecord]:
    """Encode a frame back into records under the same mapping."""
    slots: dict[int, list[float]] = collections.defaultdict(lambda: [0.0] * 8)
    values = {
        "ground_speed": frame.ground_speed,
        "vertical_speed": frame.vertical_speed,
        "height_agl": frame.height_agl,
        "distance_along_runway": frame.distance_along_runway,
        "acceleration": frame.acceleration,
        "throttle_fraction": frame.throttle_fraction,
        "on_ground": 1.0 if frame.on_ground else 0.0,
        "brakes_applied": 1.0 if frame.brakes_applied else 0.0,
        "sim_time": frame.timestamp,
    }
    for name, val in values.items():
        ch = mapping.channels.get(name)
        if ch is not None:
            slots[ch.index][ch.slot] = val / ch.scale
    return [DataRecord(index=i, values=tuple(v)) for i, v in sorted(slots.items())]


class FrameQueue:
    """Bounded hand-off between the receive thread and the pipeline.

    Never blocks the producer: beyond capacity the oldest frame is dropped
    and counted.
    """

    def __init__(self, capacity: int = QUEUE_CAPACITY):
        self.capacity = capacity
        self._q = collections.deque()
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)
        self.dropped = 0
        self.closed = False

    def put(self, frame):
        with self._ready:
            if len(self._q) >= self.capacity:
                self._q.popleft()
                self.dropped += 1
            self._q.append(frame)
            self._ready.notify()

    def get(self, timeout: float | None = None):
        """Next frame in arrival order, or None on timeout/close."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._ready:
            while not self._q:
                if self.closed:
                    return None
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return None
                self._ready.wait(remaining)
            return self._q.popleft()

    def close(self):
        with self._ready:
            self.closed = True
            self._ready.notify_all()

    def __len__(self):
        with self._lock:
            return len(self._q)


@dataclass
class ListenerCounters:
    datagrams: int = 0
    frames: int = 0
    bad_magic: int = 0
    bad_length: int = 0
    duplicate_timestamp: int = 0
    assembly_errors: int = 0


class UdpListener:
    """Receives datagrams on a dedicated thread and feeds a frame sink.

    The sink is either a FrameQueue (preferred; saturation drops oldest) or
    any callable taking a TelemetryFrame.  Malformed datagrams and
    non-monotonic timestamps are counted and skipped, never fatal.
    """

    def __init__(self, port: int, sink, mapping: ChannelMapping | None = None,
                 host: str = "127.0.0.1"):
        self.mapping = mapping or ChannelMapping()
        self.sink = sink
        self.counters = ListenerCounters()
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.bind((host, port))
        except OSError as e:
            self._sock.close()
            raise OSError(f"cannot bind udp {host}:{port}: {e}") from e
        self._sock.settimeout(0.2)
        self.port = self._sock.getsockname()[1]
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="udp-listener",
                                        daemon=True)
        self._epoch = time.monotonic()
        self._prev_frame: TelemetryFrame | None = None

    def start(self):
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        self._thread.join(timeout=2.0)
        self._sock.close()
        if isinstance(self.sink, FrameQueue):
            self.sink.close()

    def _deliver(self, frame):
        if isinstance(self.sink, FrameQueue):
            self.sink.put(frame)
        else:
            self.sink(frame)

    def _run(self):
        while not self._stop.is_set():
            try:
                data, _ = self._sock.recvfrom(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            self.counters.datagrams += 1
            try:
                records = parse_datagram(data)
            except BadMagic:
                self.counters.bad_magic += 1
                continue
            except BadLength:
                self.counters.bad_length += 1
                continue
            try:
                frame = assemble_frame(records, self.mapping,
                                       time.monotonic() - self._epoch,
                                       self._prev_frame)
            except NoPriorValue:
                self.counters.assembly_errors += 1
                continue
            if self._prev_frame is not None and frame.timestamp <= self._prev_frame.timestamp:
                self.counters.duplicate_timestamp += 1
                continue
            self._prev_frame = frame
            self.counters.frames += 1
            self._deliver(frame)
