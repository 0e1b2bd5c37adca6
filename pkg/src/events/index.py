from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, List, Sequence, Union

import numpy as np

from src.config.logging import get_logger
from src.exceptions import EventValidationError
from src.models.index import EventFormat

logger = get_logger(__name__)

T_DTYPE = np.int64
XY_DTYPE = np.int32
P_DTYPE = np.int8


@dataclass(frozen=True)
class SensorGeometry:
    width: int = 1280
    height: int = 720

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"geometry must be at least 1x1, got {self.width}x{self.height}")

    @property
    def shape(self) -> "tuple[int, int]":
        # numpy (rows, cols)
        return (self.height, self.width)


@dataclass(frozen=True)
class Event:
    t: int
    x: int
    y: int
    p: int

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.t}")
        if self.p not in (1, -1):
            raise ValueError(f"polarity must be +1 or -1, got {self.p}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"pixel coordinates must be >= 0, got ({self.x}, {self.y})")

    def inside(self, geometry: SensorGeometry) -> bool:
        return self.x < geometry.width and self.y < geometry.height


@dataclass(frozen=True)
class Roi:
    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"ROI origin must be >= 0, got ({self.x0}, {self.y0})")
        if self.w < 1 or self.h < 1:
            raise ValueError(f"ROI extent must be at least 1x1, got {self.w}x{self.h}")

    @classmethod
    def full(cls, geometry: SensorGeometry) -> "Roi":
        return cls(0, 0, geometry.width, geometry.height)

    @classmethod
    def parse(cls, text: str) -> "Roi":
        """Parse `x0,y0,w,h`."""
        parts = [part.strip() for part in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"ROI must be 'x0,y0,w,h', got {text!r}")
        try:
            return cls(*(int(part) for part in parts))
        except ValueError as e:
            raise ValueError(f"Invalid ROI {text!r}: {e}") from e

    def fits(self, geometry: SensorGeometry) -> bool:
        return self.x0 + self.w <= geometry.width and self.y0 + self.h <= geometry.height

    def overlaps(self, other: "Roi") -> bool:
        return (
            self.x0 < other.x0 + other.w
            and other.x0 < self.x0 + self.w
            and self.y0 < other.y0 + other.h
            and other.y0 < self.y0 + self.h
        )

    def intersect(self, other: "Roi"):
        """Intersection in shared coordinates, or None when disjoint."""
        if not self.overlaps(other):
            return None
        x0, y0 = max(self.x0, other.x0), max(self.y0, other.y0)
        x1 = min(self.x0 + self.w, other.x0 + other.w)
        y1 = min(self.y0 + self.h, other.y0 + other.h)
        return Roi(x0, y0, x1 - x0, y1 - y0)

    def geometry(self) -> SensorGeometry:
        return SensorGeometry(self.w, self.h)

    def __str__(self) -> str:
        return f"{self.x0},{self.y0},{self.w},{self.h}"


class EventStream:
    """
    Time-ordered events plus the sensor geometry they were recorded on.
    Stored column-wise; arrays are read-only so streams can be shared freely.
    """

    __slots__ = ("geometry", "t", "x", "y", "p")

    def __init__(self, geometry: SensorGeometry, t, x, y, p, validate: bool = True):
        self.geometry = geometry
        self.t = _readonly(t, T_DTYPE)
        self.x = _readonly(x, XY_DTYPE)
        self.y = _readonly(y, XY_DTYPE)
        self.p = _readonly(p, P_DTYPE)
        if not (self.t.size == self.x.size == self.y.size == self.p.size):
            raise ValueError("event columns must have equal length")
        if validate:
            validate_stream(self)

    @classmethod
    def empty(cls, geometry: SensorGeometry) -> "EventStream":
        return cls(geometry, [], [], [], [], validate=False)

    @classmethod
    def from_events(cls, geometry: SensorGeometry, events: Iterable[Event]) -> "EventStream":
        events = list(events)
        return cls(
            geometry,
            [e.t for e in events],
            [e.x for e in events],
            [e.y for e in events],
            [e.p for e in events],
        )

    @property
    def events(self) -> List[Event]:
        return list(self)

    @property
    def duration_us(self) -> int:
        """Span covered by the stream: last timestamp + 1, or 0 when empty."""
        return int(self.t[-1]) + 1 if len(self) else 0

    def __len__(self) -> int:
        return int(self.t.size)

    def __iter__(self) -> Iterator[Event]:
        for t, x, y, p in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(t, x, y, p)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return EventStream(
                self.geometry, self.t[index], self.x[index], self.y[index], self.p[index], validate=False
            )
        return Event(int(self.t[index]), int(self.x[index]), int(self.y[index]), int(self.p[index]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.p, other.p)
        )

    def __repr__(self) -> str:
        return f"EventStream({self.geometry.width}x{self.geometry.height}, {len(self)} events)"


def _readonly(values, dtype) -> np.ndarray:
    # read-only arrays of the right dtype are already immutable and can be shared
    if isinstance(values, np.ndarray) and values.dtype == dtype and values.ndim == 1 and not values.flags.writeable:
        return values
    array = np.array(values, dtype=dtype).reshape(-1)
    array.setflags(write=False)
    return array


def validate_stream(stream: EventStream) -> EventStream:
    """Check sortedness, polarity and geometry. Errors name the first offending record (1-based)."""
    n = len(stream)
    if n == 0:
        return stream
    geometry = stream.geometry

    bad = np.flatnonzero(stream.t < 0)
    if bad.size:
        raise EventValidationError(f"negative timestamp {int(stream.t[bad[0]])}", record=int(bad[0]) + 1)

    bad = np.flatnonzero(np.diff(stream.t) < 0)
    if bad.size:
        i = int(bad[0]) + 1
        raise EventValidationError(
            f"timestamp {int(stream.t[i])} precedes previous timestamp {int(stream.t[i - 1])}", record=i + 1
        )

    bad = np.flatnonzero((stream.p != 1) & (stream.p != -1))
    if bad.size:
        raise EventValidationError(f"polarity {int(stream.p[bad[0]])} not in {{1, -1}}", record=int(bad[0]) + 1)

    outside = (stream.x < 0) | (stream.x >= geometry.width) | (stream.y < 0) | (stream.y >= geometry.height)
    bad = np.flatnonzero(outside)
    if bad.size:
        i = int(bad[0])
        raise EventValidationError(
            f"pixel ({int(stream.x[i])}, {int(stream.y[i])}) outside geometry {geometry.width}x{geometry.height}",
            record=i + 1,
        )
    return stream


def read_events(path: Union[str, Path], format: Union[str, EventFormat] = EventFormat.CSV) -> EventStream:
    from src.events.utils import decode_binary, decode_csv

    path = Path(path)
    event_format = EventFormat(format)
    try:
        payload = path.read_bytes()
    except OSError as e:
        raise OSError(f"Failed to read events from {path}: {e}") from e

    if event_format is EventFormat.CSV:
        geometry, columns = decode_csv(payload.decode("ascii", errors="replace"))
    else:
        geometry, columns = decode_binary(payload)
    stream = EventStream(geometry, *columns)
    logger.info("events_read", path=str(path), format=event_format.value, event_count=len(stream))
    return stream


def write_events(stream: EventStream, path: Union[str, Path], format: Union[str, EventFormat] = EventFormat.CSV) -> None:
    from src.events.utils import encode_binary, encode_csv

    path = Path(path)
    event_format = EventFormat(format)
    payload = encode_csv(stream) if event_format is EventFormat.CSV else encode_binary(stream)
    try:
        path.write_bytes(payload)
    except OSError as e:
        raise OSError(f"Failed to write events to {path}: {e}") from e
    logger.info("events_written", path=str(path), format=event_format.value, event_count=len(stream))


def crop_roi(stream: EventStream, roi: Roi) -> EventStream:
    if not roi.fits(stream.geometry):
        raise ValueError(
            f"ROI {roi} outside geometry {stream.geometry.width}x{stream.geometry.height}"
        )
    keep = (
        (stream.x >= roi.x0)
        & (stream.x < roi.x0 + roi.w)
        & (stream.y >= roi.y0)
        & (stream.y < roi.y0 + roi.h)
    )
    return EventStream(
        roi.geometry(),
        stream.t[keep],
        stream.x[keep] - roi.x0,
        stream.y[keep] - roi.y0,
        stream.p[keep],
        validate=False,
    )


def time_slice(stream: EventStream, t_start: float, t_end: float) -> EventStream:
    """Events with t_start <= t < t_end. Either bound may be infinite."""
    if t_start > t_end:
        raise ValueError(f"t_start {t_start} > t_end {t_end}")
    lo = int(np.searchsorted(stream.t, t_start, side="left")) if np.isfinite(t_start) else (0 if t_start < 0 else len(stream))
    hi = int(np.searchsorted(stream.t, t_end, side="left")) if np.isfinite(t_end) else (len(stream) if t_end > 0 else 0)
    return stream[lo:max(lo, hi)]


def concatenate(streams: Sequence[EventStream]) -> EventStream:
    """Join consecutive, already-ordered streams on one geometry (inverse of adjacent time slices)."""
    if not streams:
        raise ValueError("nothing to concatenate")
    geometry = streams[0].geometry
    if any(s.geometry != geometry for s in streams):
        raise ValueError("streams have different geometries")
    return EventStream(
        geometry,
        np.concatenate([s.t for s in streams]),
        np.concatenate([s.x for s in streams]),
        np.concatenate([s.y for s in streams]),
        np.concatenate([s.p for s in streams]),
    )


def merge(streams: Sequence[EventStream], geometry: SensorGeometry = None) -> EventStream:
    """Merge-sort streams by timestamp. Ties keep the input order (stream order, then event order)."""
    if not streams:
        raise ValueError("nothing to merge")
    geometry = geometry or streams[0].geometry
    t = np.concatenate([s.t for s in streams])
    order = np.argsort(t, kind="stable")
    return EventStream(
        geometry,
        t[order],
        np.concatenate([s.x for s in streams])[order],
        np.concatenate([s.y for s in streams])[order],
        np.concatenate([s.p for s in streams])[order],
    )


def offset(stream: EventStream, roi: Roi, geometry: SensorGeometry) -> EventStream:
    """Place a stream recorded on `roi.geometry()` into `geometry` at the ROI origin."""
    if not roi.fits(geometry):
        raise ValueError(f"ROI {roi} outside geometry {geometry.width}x{geometry.height}")
    return EventStream(geometry, stream.t, stream.x + roi.x0, stream.y + roi.y0, stream.p)
