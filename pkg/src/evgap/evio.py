"""Event stream (EVT1) and telemetry CSV parsing, plus telemetry alignment.

EVT1 layout, little-endian::

    header  magic b"EVT1" | width u16 | height u16 | count u64     (16 bytes)
    record  t u64 (us) | x u16 | y u16 | polarity u8 (0=OFF, 1=ON) (13 bytes)
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

MAGIC = b"EVT1"
HEADER = struct.Struct("<4sHHQ")
HEADER_SIZE = HEADER.size
RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])
RECORD_SIZE = RECORD_DTYPE.itemsize

DEFAULT_WIDTH = 346
DEFAULT_HEIGHT = 260
OFF, ON = 0, 1

TELEMETRY_HEADER = ["t_us", "steering_deg", "speed_kmh"]
MAX_ALIGN_GAP_US = 100_000


class EvtError(ValueError):
    pass


class EvtFormatError(EvtError):
    pass


class EvtTruncationError(EvtError):
    pass


class EvtValidationError(EvtError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class TelemetryError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class Event(NamedTuple):
    t: int
    x: int
    y: int
    polarity: int


@dataclass(eq=False)
class EventStream:
    """Columnar event storage; ``t`` int64 microseconds, ``polarity`` 0/1."""

    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    t: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    x: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint16))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint16))
    polarity: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint8))

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.uint16)
        self.y = np.asarray(self.y, dtype=np.uint16)
        self.polarity = np.asarray(self.polarity, dtype=np.uint8)

    def __len__(self):
        return len(self.t)

    def __eq__(self, other):
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.polarity, other.polarity)
        )

    @classmethod
    def from_events(cls, events: Sequence[Event], width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT):
        if len(events) == 0:
            return cls(width, height)
        t, x, y, p = zip(*events)
        return cls(width, height, np.array(t), np.array(x), np.array(y), np.array(p))

    @property
    def events(self) -> list[Event]:
        return [
            Event(int(t), int(x), int(y), int(p))
            for t, x, y, p in zip(self.t, self.x, self.y, self.polarity)
        ]

    def validate(self):
        """Raise EvtValidationError naming the first offending record."""
        if not (0 < self.width < 1 << 16 and 0 < self.height < 1 << 16):
            raise EvtValidationError(f"invalid sensor size {self.width}x{self.height}")
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.polarity) == n):
            raise EvtValidationError("column lengths differ")
        if n == 0:
            return
        bad = (self.t < 0) | (self.x >= self.width) | (self.y >= self.height) | (self.polarity > 1)
        if bad.any():
            i = int(np.argmax(bad))
            raise EvtValidationError(
                f"record {i}: invalid event (t={self.t[i]}, x={self.x[i]}, y={self.y[i]}, "
                f"polarity={self.polarity[i]}) for {self.width}x{self.height} sensor",
                index=i,
            )
        dec = np.diff(self.t) < 0
        if dec.any():
            i = int(np.argmax(dec)) + 1
            raise EvtValidationError(
                f"record {i}: timestamp {self.t[i]} decreases from {self.t[i - 1]}", index=i
            )


def parse_evt(data: bytes) -> EventStream:
    if bytes(data[:4]) != MAGIC:
        raise EvtFormatError(f"bad magic {bytes(data[:4])!r}, expected {MAGIC!r}")
    if len(data) < HEADER_SIZE:
        raise EvtTruncationError(f"header truncated: {len(data)} of {HEADER_SIZE} bytes")
    _, width, height, count = HEADER.unpack_from(data)
    payload = len(data) - HEADER_SIZE
    if payload != count * RECORD_SIZE:
        raise EvtTruncationError(
            f"header declares {count} records ({count * RECORD_SIZE} bytes) "
            f"but payload holds {payload} bytes"
        )
    rec = np.frombuffer(data, dtype=RECORD_DTYPE, count=count, offset=HEADER_SIZE)
    t = rec["t"]
    if count and t.max() > np.iinfo(np.int64).max:
        i = int(np.argmax(t > np.iinfo(np.int64).max))
        raise EvtValidationError(f"record {i}: timestamp out of range", index=i)
    stream = EventStream(width, height, t.astype(np.int64), rec["x"].copy(), rec["y"].copy(),
                         rec["p"].copy())
    stream.validate()
    return stream


def write_evt(stream: EventStream) -> bytes:
    stream.validate()
    rec = np.empty(len(stream), dtype=RECORD_DTYPE)
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.polarity
    return HEADER.pack(MAGIC, stream.width, stream.height, len(stream)) + rec.tobytes()


def read_evt(path) -> EventStream:
    with open(path, "rb") as f:
        return parse_evt(f.read())


def save_evt(path, stream: EventStream):
    with open(path, "wb") as f:
        f.write(write_evt(stream))


class TelemetryRecord(NamedTuple):
    t: int
    steering_deg: float
    speed_kmh: float


def parse_telemetry(text: str) -> list[TelemetryRecord]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != TELEMETRY_HEADER:
        raise TelemetryError(f"line 1: expected header {','.join(TELEMETRY_HEADER)}", line=1)
    records = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != 3:
            raise TelemetryError(f"line {line}: expected 3 fields, got {len(row)}", line=line)
        try:
            rec = TelemetryRecord(int(row[0]), float(row[1]), float(row[2]))
        except ValueError as e:
            raise TelemetryError(f"line {line}: {e}", line=line) from None
        if not (np.isfinite(rec.steering_deg) and np.isfinite(rec.speed_kmh)):
            raise TelemetryError(f"line {line}: non-finite value", line=line)
        if rec.t < 0 or rec.speed_kmh < 0:
            raise TelemetryError(f"line {line}: negative timestamp or speed", line=line)
        if records and rec.t <= records[-1].t:
            raise TelemetryError(
                f"line {line}: timestamp {rec.t} not greater than {records[-1].t}", line=line
            )
        records.append(rec)
    return records


def format_telemetry(records: Sequence[TelemetryRecord]) -> str:
    lines = [",".join(TELEMETRY_HEADER)]
    lines += [f"{r.t},{r.steering_deg!r},{r.speed_kmh!r}" for r in records]
    return "\n".join(lines) + "\n"


@dataclass
class Alignment:
    steering_deg: np.ndarray
    speed_kmh: np.ndarray
    index: np.ndarray
    aligned: np.ndarray


def align_telemetry(frame_ts, telemetry: Sequence[TelemetryRecord],
                    max_gap_us: int = MAX_ALIGN_GAP_US) -> Alignment:
    """Nearest telemetry record per frame timestamp; ties go to the earlier record.

    Frames whose nearest record is more than ``max_gap_us`` away are marked
    ``aligned=False`` (values are still filled from the nearest record).
    """
    if len(telemetry) == 0:
        raise TelemetryError("telemetry is empty")
    ts = np.asarray(frame_ts, dtype=np.int64)
    tel_t = np.array([r.t for r in telemetry], dtype=np.int64)
    right = np.searchsorted(tel_t, ts, side="left").clip(0, len(tel_t) - 1)
    left = (right - 1).clip(0)
    d_left = np.abs(ts - tel_t[left])
    d_right = np.abs(tel_t[right] - ts)
    idx = np.where(d_left <= d_right, left, right)
    gap = np.abs(ts - tel_t[idx])
    steer = np.array([r.steering_deg for r in telemetry], dtype=np.float64)
    speed = np.array([r.speed_kmh for r in telemetry], dtype=np.float64)
    return Alignment(steer[idx], speed[idx], idx, gap <= max_gap_us)
