import io
import struct
from typing import Tuple

import numpy as np

from src.exceptions import EventFormatError

BINARY_MAGIC = b"EVS1"
BINARY_HEADER = struct.Struct("<4sIIQ")
# u64 t_us, u16 x, u16 y, i8 p, 3 pad bytes
BINARY_RECORD = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1"), ("pad", "V3")])
CSV_GEOMETRY_PREFIX = "# geometry,"
BINARY_COORD_LIMIT = 65535

Columns = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


def encode_csv(stream) -> bytes:
    buffer = io.StringIO(newline="")
    buffer.write(f"{CSV_GEOMETRY_PREFIX}{stream.geometry.width},{stream.geometry.height}\n")
    if len(stream):
        table = np.column_stack([stream.t, stream.x, stream.y, stream.p]).astype(np.int64)
        np.savetxt(buffer, table, fmt="%d", delimiter=",", newline="\n")
    return buffer.getvalue().encode("ascii")


def decode_csv(text: str):
    from src.events.index import SensorGeometry

    lines = text.split("\n")
    header = lines[0].rstrip("\r") if lines else ""
    if not header.startswith(CSV_GEOMETRY_PREFIX):
        raise EventFormatError(f"expected '{CSV_GEOMETRY_PREFIX}<width>,<height>' header, got {header!r}", line=1)
    try:
        width, height = (int(part) for part in header[len(CSV_GEOMETRY_PREFIX):].split(","))
        geometry = SensorGeometry(width, height)
    except ValueError as e:
        raise EventFormatError(f"invalid geometry header {header!r}: {e}", line=1) from e

    body = lines[1:]
    # a trailing LF leaves one empty string behind
    if body and body[-1] == "":
        body = body[:-1]
    if not body:
        empty = np.empty(0, np.int64)
        return geometry, (empty, empty, empty, empty)

    try:
        table = np.loadtxt(io.StringIO("\n".join(body)), delimiter=",", dtype=np.int64, ndmin=2)
        if table.shape[1] != 4 or table.shape[0] != len(body):
            raise ValueError("shape")
    except ValueError:
        # slow path, only to name the offending line
        _raise_first_bad_line(body)
    return geometry, (table[:, 0], table[:, 1], table[:, 2], table[:, 3])


def _raise_first_bad_line(body) -> None:
    for offset, line in enumerate(body):
        fields = line.rstrip("\r").split(",")
        line_number = offset + 2
        if len(fields) != 4:
            raise EventFormatError(f"expected 4 fields 't_us,x,y,p', got {len(fields)}: {line!r}", line=line_number)
        try:
            [int(field) for field in fields]
        except ValueError:
            raise EventFormatError(f"non-integer field in {line!r}", line=line_number) from None
    raise EventFormatError("unparseable event body")


def encode_binary(stream) -> bytes:
    width, height = stream.geometry.width, stream.geometry.height
    if width > BINARY_COORD_LIMIT or height > BINARY_COORD_LIMIT:
        raise ValueError(
            f"binary records hold u16 coordinates; geometry {width}x{height} exceeds {BINARY_COORD_LIMIT}"
        )
    records = np.zeros(len(stream), dtype=BINARY_RECORD)
    records["t"] = stream.t
    records["x"] = stream.x
    records["y"] = stream.y
    records["p"] = stream.p
    header = BINARY_HEADER.pack(BINARY_MAGIC, stream.geometry.width, stream.geometry.height, len(stream))
    return header + records.tobytes()


def decode_binary(payload: bytes):
    from src.events.index import SensorGeometry

    if len(payload) < BINARY_HEADER.size:
        raise EventFormatError(f"file too short for header ({len(payload)} bytes)", line=0)
    magic, width, height, count = BINARY_HEADER.unpack_from(payload, 0)
    if magic != BINARY_MAGIC:
        raise EventFormatError(f"bad magic {magic!r}, expected {BINARY_MAGIC!r}", line=0)
    try:
        geometry = SensorGeometry(width, height)
    except ValueError as e:
        raise EventFormatError(str(e), line=0) from e

    body = payload[BINARY_HEADER.size:]
    expected = count * BINARY_RECORD.itemsize
    if len(body) != expected:
        complete = len(body) // BINARY_RECORD.itemsize
        raise EventFormatError(
            f"header declares {count} records ({expected} bytes) but body has {len(body)} bytes",
            line=min(complete, count) + 1,
        )
    records = np.frombuffer(body, dtype=BINARY_RECORD, count=count)
    if count and records["t"].max() > np.iinfo(np.int64).max:
        bad = int(np.flatnonzero(records["t"] > np.iinfo(np.int64).max)[0])
        raise EventFormatError("timestamp exceeds int64 range", line=bad + 1)
    return geometry, (
        records["t"].astype(np.int64),
        records["x"].astype(np.int64),
        records["y"].astype(np.int64),
        records["p"].astype(np.int64),
    )
