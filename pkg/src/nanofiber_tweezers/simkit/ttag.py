"""Photon time-tag streams and their binary / CSV serialization.

Binary layout (little endian): b"TTAG", u16 version (1), u32 resolution in
femtoseconds, then packed records of (u8 channel, u64 timestamp).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"TTAG"
VERSION = 1
_HEADER = struct.Struct("<4sHI")
_RECORD = np.dtype([("channel", "u1"), ("timestamp", "<u8")])


class TagFormatError(ValueError):
    pass


@dataclass
class TimeTagStream:
    channels: np.ndarray
    timestamps: np.ndarray  # integer multiples of ``resolution``
    resolution: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if self.channels.shape != self.timestamps.shape or self.channels.ndim != 1:
            raise ValueError("channels and timestamps must be 1D arrays of equal length")
        if not self.resolution > 0:
            raise ValueError("resolution must be > 0")
        if np.any(self.channels > 1):
            raise ValueError("channels must be 0 or 1")
        if np.any(self.timestamps < 0):
            raise ValueError("timestamps must be >= 0")
        for c in (0, 1):
            if np.any(np.diff(self.timestamps[self.channels == c]) < 0):
                raise ValueError(f"timestamps on channel {c} are not nondecreasing")

    def __len__(self):
        return int(self.timestamps.size)

    @classmethod
    def from_times(cls, channels, times, resolution: float, metadata=None) -> "TimeTagStream":
        """Digitize float times (s) and sort by (timestamp, channel)."""
        ticks = np.floor(np.asarray(times, dtype=float) / resolution).astype(np.int64)
        channels = np.asarray(channels, dtype=np.uint8)
        order = np.lexsort((channels, ticks))
        return cls(channels[order], ticks[order], resolution, dict(metadata or {}))

    def channel_times(self, channel: int) -> np.ndarray:
        return self.timestamps[self.channels == channel]

    def seconds(self) -> np.ndarray:
        return self.timestamps * self.resolution

    @staticmethod
    def merge(streams, metadata=None) -> "TimeTagStream":
        streams = list(streams)
        if not streams:
            raise ValueError("nothing to merge")
        res = streams[0].resolution
        if any(s.resolution != res for s in streams):
            raise ValueError("cannot merge streams with different resolutions")
        ch = np.concatenate([s.channels for s in streams])
        ts = np.concatenate([s.timestamps for s in streams])
        order = np.lexsort((ch, ts))
        return TimeTagStream(ch[order], ts[order], res, dict(metadata or {}))


def _resolution_fs(resolution: float) -> int:
    fs = int(round(resolution * 1e15))
    if fs <= 0 or fs >= 2 ** 32:
        raise TagFormatError(f"resolution {resolution} s does not fit the u32 femtosecond field")
    return fs


def to_ttag_bytes(stream: TimeTagStream) -> bytes:
    rec = np.empty(len(stream), dtype=_RECORD)
    rec["channel"] = stream.channels
    rec["timestamp"] = stream.timestamps.astype(np.uint64)
    return _HEADER.pack(MAGIC, VERSION, _resolution_fs(stream.resolution)) + rec.tobytes()


def from_ttag_bytes(data: bytes) -> TimeTagStream:
    if len(data) < _HEADER.size:
        raise TagFormatError("file shorter than the TTAG header")
    magic, version, fs = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TagFormatError("bad magic bytes, not a TTAG file")
    if version != VERSION:
        raise TagFormatError(f"unsupported TTAG version {version}")
    body = data[_HEADER.size:]
    if len(body) % _RECORD.itemsize:
        raise TagFormatError("truncated record at end of file")
    rec = np.frombuffer(body, dtype=_RECORD)
    if np.any(rec["timestamp"] >= 2 ** 63):
        raise TagFormatError("timestamp exceeds the supported range")
    return TimeTagStream(rec["channel"].copy(), rec["timestamp"].astype(np.int64), fs * 1e-15)


def write_ttag(path, stream: TimeTagStream) -> None:
    with open(path, "wb") as fh:
        fh.write(to_ttag_bytes(stream))


def read_ttag(path) -> TimeTagStream:
    with open(path, "rb") as fh:
        return from_ttag_bytes(fh.read())


def write_csv(path, stream: TimeTagStream) -> None:
    buf = io.StringIO()
    buf.write("channel,timestamp\n")
    for c, t in zip(stream.channels.tolist(), stream.timestamps.tolist()):
        buf.write(f"{c},{t}\n")
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path, resolution: float) -> TimeTagStream:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "channel,timestamp":
            raise TagFormatError(f"unexpected CSV header {header!r}")
        body = fh.read()
    if not body.strip():
        return TimeTagStream(np.empty(0), np.empty(0), resolution)
    data = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)
    return TimeTagStream(data[:, 0], data[:, 1], resolution)
