"""Event streams, file formats and event-frame accumulation.

Events are kept column-wise in numpy arrays. Timestamps are integer
microseconds; all window arithmetic below stays in integers.

Count grids are indexed ``counts[v, u]`` (row = vertical coordinate), so a
series of ``K`` frames is an array of shape ``(K, H, W)``.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np

from .errors import (
    EmptyStream,
    MalformedRecord,
    OutOfBounds,
    UnsortedInput,
)

logger = logging.getLogger(__name__)

DEFAULT_WIDTH = 346
DEFAULT_HEIGHT = 260
US_PER_S = 1_000_000

BINARY_MAGIC = b"EVST"
BINARY_HEADER_SIZE = 16
BINARY_RECORD = np.dtype([("t", "<u8"), ("u", "<u2"), ("v", "<u2"), ("p", "i1")])
assert BINARY_RECORD.itemsize == 13


class Event(NamedTuple):
    t: int
    u: int
    v: int
    p: int


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    # read-only view; no copy when the dtype already matches
    view = np.ascontiguousarray(a, dtype=dtype).view()
    view.flags.writeable = False
    return view


@dataclass(frozen=True, eq=False)
class EventStream:
    """Time-ordered events from a ``width`` x ``height`` sensor.

    Validates on construction: timestamps non-negative and non-decreasing,
    coordinates inside the sensor, polarity in {-1, +1}.
    """

    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p: np.ndarray
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid sensor geometry {self.width}x{self.height}")
        t = _frozen(self.t, np.int64)
        u = _frozen(self.u, np.int32)
        v = _frozen(self.v, np.int32)
        p = _frozen(self.p, np.int8)
        if not (t.ndim == u.ndim == v.ndim == p.ndim == 1):
            raise ValueError("event columns must be one-dimensional")
        if not (len(t) == len(u) == len(v) == len(p)):
            raise ValueError("event columns differ in length")
        if len(t):
            if t[0] < 0:
                raise MalformedRecord("negative timestamp")
            if np.any(np.diff(t) < 0):
                raise UnsortedInput("timestamps must be non-decreasing")
            bad = (u < 0) | (u >= self.width) | (v < 0) | (v >= self.height)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise OutOfBounds(
                    f"event {i} at ({u[i]}, {v[i]}) outside {self.width}x{self.height}"
                )
            if np.any((p != 1) & (p != -1)):
                raise MalformedRecord("polarity must be -1 or +1")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "p", p)

    @classmethod
    def empty(cls, width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT) -> "EventStream":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, width, height)

    @classmethod
    def from_events(cls, events, width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT):
        arr = np.asarray(list(events), dtype=np.int64).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], width, height)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for row in zip(self.t.tolist(), self.u.tolist(), self.v.tolist(), self.p.tolist()):
            yield Event(*row)

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            return Event(int(self.t[index]), int(self.u[index]), int(self.v[index]), int(self.p[index]))
        return self.take(index)

    def take(self, index) -> "EventStream":
        """Sub-stream selected by a slice, boolean mask or sorted index array."""
        return EventStream(
            self.t[index], self.u[index], self.v[index], self.p[index], self.width, self.height
        )

    @property
    def shape(self) -> tuple[int, int]:
        """Frame grid shape ``(H, W)``."""
        return (self.height, self.width)

    @property
    def flat_index(self) -> np.ndarray:
        return self.v.astype(np.int64) * self.width + self.u

    def pixel_counts(self) -> np.ndarray:
        """Total events per pixel as an ``(H, W)`` grid."""
        return np.bincount(self.flat_index, minlength=self.width * self.height).reshape(self.shape)

    def same_events(self, other: "EventStream") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.p, other.p)
        )


# ---------------------------------------------------------------------------
# file formats


def _locate_bad_csv_row(lines: list[str], first: int) -> str:
    for n, line in enumerate(lines[first:], start=first + 1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            return f"line {n}: expected 4 fields, got {len(parts)}"
        try:
            [int(x) for x in parts]
        except ValueError:
            return f"line {n}: non-integer field in {line!r}"
    return "unparseable record"


def _parse_csv(source: bytes) -> np.ndarray:
    text = source.decode("utf-8")
    lines = text.splitlines()
    first = 0
    while first < len(lines) and not lines[first].strip():
        first += 1
    if first < len(lines):
        head = lines[first].lstrip()
        if head and not (head[0].isdigit() or head[0] in "+-"):
            first += 1  # header row
    body = "\n".join(lines[first:])
    if not body.strip():
        return np.zeros((0, 4), dtype=np.int64)
    try:
        rows = np.loadtxt(io.StringIO(body), delimiter=",", dtype=np.int64, ndmin=2)
    except ValueError:
        raise MalformedRecord(_locate_bad_csv_row(lines, first)) from None
    if rows.shape[1] != 4:
        raise MalformedRecord(f"expected 4 fields per row, got {rows.shape[1]}")
    return rows


def _parse_binary(source: bytes) -> tuple[np.ndarray, int, int]:
    if len(source) < BINARY_HEADER_SIZE or source[:4] != BINARY_MAGIC:
        raise MalformedRecord("missing EVST header")
    width, height = np.frombuffer(source, dtype="<u2", count=2, offset=4)
    body = source[BINARY_HEADER_SIZE:]
    if len(body) % BINARY_RECORD.itemsize:
        raise MalformedRecord(
            f"record area of {len(body)} bytes is not a multiple of {BINARY_RECORD.itemsize}"
        )
    rec = np.frombuffer(body, dtype=BINARY_RECORD)
    if np.any(rec["t"] > np.iinfo(np.int64).max):
        raise MalformedRecord("timestamp overflows int64")
    rows = np.empty((len(rec), 4), dtype=np.int64)
    rows[:, 0] = rec["t"]
    rows[:, 1] = rec["u"]
    rows[:, 2] = rec["v"]
    rows[:, 3] = rec["p"]
    return rows, int(width), int(height)


def parse_event_stream(
    source: bytes,
    format: str = "csv",
    width: int = DEFAULT_WIDTH,
    height: int = DEFAULT_HEIGHT,
    slack_us: int = 0,
) -> EventStream:
    """Parse a CSV (``t_us,u,v,p``) or binary ``EVST`` byte buffer.

    The binary header's geometry takes precedence over ``width``/``height``.
    Timestamps that step backwards by at most ``slack_us`` are re-sorted
    (stable); larger regressions raise :class:`UnsortedInput`.
    """
    if format == "csv":
        rows = _parse_csv(source)
    elif format in ("bin", "binary", "evst"):
        rows, width, height = _parse_binary(source)
    else:
        raise ValueError(f"unknown event format {format!r}")

    if len(rows) == 0:
        return EventStream.empty(width, height)

    t, u, v, p = rows.T
    if np.any(t < 0):
        raise MalformedRecord(f"negative timestamp in row {int(np.flatnonzero(t < 0)[0])}")
    if format == "csv" and np.any(p == 0):
        if np.any(p == -1):
            raise MalformedRecord("polarity column mixes 0 and -1")
        logger.warning("polarity given as {0,1}; mapping 0 to -1")
        p = np.where(p == 0, -1, p)
    if np.any((p != 1) & (p != -1)):
        raise MalformedRecord(f"bad polarity in row {int(np.flatnonzero((p != 1) & (p != -1))[0])}")
    oob = (u < 0) | (u >= width) | (v < 0) | (v >= height)
    if oob.any():
        i = int(np.flatnonzero(oob)[0])
        raise OutOfBounds(f"row {i}: ({u[i]}, {v[i]}) outside {width}x{height}")

    running_max = np.maximum.accumulate(t)
    lag = running_max - t
    if lag.max() > slack_us:
        i = int(np.argmax(lag > slack_us))
        raise UnsortedInput(f"row {i}: timestamp {t[i]} is {lag[i]} us behind the stream")
    if lag.any():
        order = np.argsort(t, kind="stable")
        t, u, v, p = t[order], u[order], v[order], p[order]
    return EventStream(t, u, v, p, width, height)


def format_csv(stream: EventStream) -> bytes:
    buf = io.StringIO()
    buf.write("t_us,u,v,p\n")
    if len(stream):
        np.savetxt(
            buf, np.column_stack([stream.t, stream.u, stream.v, stream.p]), fmt="%d", delimiter=","
        )
    return buf.getvalue().encode("utf-8")


def format_binary(stream: EventStream) -> bytes:
    header = BINARY_MAGIC + np.array([stream.width, stream.height], dtype="<u2").tobytes() + bytes(8)
    rec = np.empty(len(stream), dtype=BINARY_RECORD)
    rec["t"] = stream.t
    rec["u"] = stream.u
    rec["v"] = stream.v
    rec["p"] = stream.p
    return header + rec.tobytes()


def format_for_path(path: Union[str, Path]) -> str:
    return "csv" if Path(path).suffix.lower() in (".csv", ".txt") else "bin"


def read_events(
    path: Union[str, Path], width: int = DEFAULT_WIDTH, height: int = DEFAULT_HEIGHT, slack_us: int = 0
) -> EventStream:
    """Read an event file; ``.csv``/``.txt`` is CSV, anything else binary."""
    return parse_event_stream(Path(path).read_bytes(), format_for_path(path), width, height, slack_us)


def write_events(path: Union[str, Path], stream: EventStream) -> None:
    fmt = format_for_path(path)
    data = format_csv(stream) if fmt == "csv" else format_binary(stream)
    Path(path).write_bytes(data)


# ---------------------------------------------------------------------------
# frames


@dataclass(frozen=True)
class FixedTime:
    tau_us: int

    def __post_init__(self):
        if self.tau_us <= 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class FixedCount:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("N must be >= 1")


Regime = Union[FixedTime, FixedCount]


@dataclass(frozen=True, eq=False)
class EventFrame:
    counts: np.ndarray  # (H, W)
    t_start: int
    t_end: int


@dataclass(frozen=True, eq=False)
class FrameSeries:
    """Ordered event frames with their time intervals.

    ``partial_last`` marks a trailing fixed-time window that extends past the
    end of the data; ``remainder`` is the number of trailing events dropped
    by fixed-count accumulation.
    """

    counts: np.ndarray  # (K, H, W)
    t_start: np.ndarray
    t_end: np.ndarray
    regime: Regime
    partial_last: bool = False
    remainder: int = 0

    def __post_init__(self):
        object.__setattr__(self, "counts", _frozen_grid(self.counts))
        object.__setattr__(self, "t_start", _frozen(self.t_start, np.int64))
        object.__setattr__(self, "t_end", _frozen(self.t_end, np.int64))
        if self.counts.ndim != 3:
            raise ValueError("counts must have shape (K, H, W)")
        if not (len(self.counts) == len(self.t_start) == len(self.t_end)):
            raise ValueError("frame intervals do not match frame count")

    def __len__(self) -> int:
        return len(self.counts)

    def __getitem__(self, k: int) -> EventFrame:
        return EventFrame(self.counts[k], int(self.t_start[k]), int(self.t_end[k]))

    def __iter__(self) -> Iterator[EventFrame]:
        for k in range(len(self)):
            yield self[k]

    @property
    def frames(self) -> list[EventFrame]:
        return list(self)

    @property
    def width(self) -> int:
        return self.counts.shape[2]

    @property
    def height(self) -> int:
        return self.counts.shape[1]

    @property
    def midpoints(self) -> np.ndarray:
        """Window midpoints in (float) microseconds."""
        return (self.t_start + self.t_end) / 2.0

    @property
    def durations(self) -> np.ndarray:
        return self.t_end - self.t_start

    def with_counts(self, counts: np.ndarray) -> "FrameSeries":
        return FrameSeries(counts, self.t_start, self.t_end, self.regime, self.partial_last, self.remainder)

    def drop_partial(self) -> "FrameSeries":
        if not self.partial_last:
            return self
        return FrameSeries(self.counts[:-1], self.t_start[:-1], self.t_end[:-1], self.regime, False, 0)

    def to_triplets_csv(self) -> str:
        """Sparse ``frame_idx,u,v,count`` export of all non-zero cells."""
        k, v, u = np.nonzero(self.counts)
        buf = io.StringIO()
        buf.write("frame_idx,u,v,count\n")
        if len(k):
            np.savetxt(buf, np.column_stack([k, u, v, self.counts[k, v, u]]), fmt="%d", delimiter=",")
        return buf.getvalue()


def _frozen_grid(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype.kind not in "iu":
        raise ValueError("frame counts must be integers")
    return _frozen(a, a.dtype)


def _accumulate(stream: EventStream, bounds: np.ndarray) -> np.ndarray:
    """Count events per pixel for each index range ``bounds[k]:bounds[k+1]``."""
    n_pix = stream.width * stream.height
    flat = stream.flat_index
    counts = np.empty((len(bounds) - 1, n_pix), dtype=np.int32)
    for k in range(len(bounds) - 1):
        counts[k] = np.bincount(flat[bounds[k] : bounds[k + 1]], minlength=n_pix)
    return counts.reshape(-1, stream.height, stream.width)


def build_frames_fixed_time(
    stream: EventStream,
    tau_us: int = US_PER_S,
    t0: Optional[int] = None,
    t_stop: Optional[int] = None,
) -> FrameSeries:
    """Accumulate events into consecutive windows ``[t0 + k*tau, t0 + (k+1)*tau)``.

    Args:
        stream: input events.
        tau_us: window length in microseconds.
        t0: start of the first window, defaults to the first event time.
        t_stop: exclusive end of the data span, defaults to one past the
            last event. Windows up to and including the one containing
            ``t_stop - 1`` are emitted; the last is flagged partial when it
            reaches beyond ``t_stop``. Empty windows are all-zero frames.
    """
    if len(stream) == 0:
        raise EmptyStream("cannot build frames from an empty stream")
    tau_us = int(tau_us)
    regime = FixedTime(tau_us)
    t = stream.t
    t0 = int(t[0]) if t0 is None else int(t0)
    if t0 > t[0]:
        raise ValueError(f"t0={t0} is after the first event at {int(t[0])}")
    t_stop = int(t[-1]) + 1 if t_stop is None else int(t_stop)
    if t_stop <= t0:
        raise ValueError("t_stop must be after t0")
    n_frames = (t_stop - t0 + tau_us - 1) // tau_us
    edges = t0 + tau_us * np.arange(n_frames + 1, dtype=np.int64)
    bounds = np.searchsorted(t, edges, side="left")
    counts = _accumulate(stream, bounds)
    return FrameSeries(
        counts,
        edges[:-1],
        edges[1:],
        regime,
        partial_last=bool(edges[-1] > t_stop),
    )


def build_frames_fixed_count(stream: EventStream, n: int) -> FrameSeries:
    """Split the stream into consecutive blocks of exactly ``n`` events.

    A trailing block of fewer than ``n`` events is dropped and its size kept
    in ``remainder``. Frame ``k`` spans from its first event to the first
    event of frame ``k + 1`` (one microsecond past its last event for the
    final frame), so intervals are contiguous.
    """
    if len(stream) == 0:
        raise EmptyStream("cannot build frames from an empty stream")
    regime = FixedCount(int(n))
    n = regime.n
    n_frames = len(stream) // n
    remainder = len(stream) - n_frames * n
    if remainder:
        logger.debug("fixed-count framing dropped %d trailing events", remainder)
    bounds = n * np.arange(n_frames + 1, dtype=np.int64)
    counts = _accumulate(stream, bounds)
    t = stream.t
    starts = t[bounds[:-1]]
    ends = np.empty(n_frames, dtype=np.int64)
    if n_frames:
        ends[:-1] = starts[1:]
        last = bounds[-1]
        ends[-1] = t[last] if last < len(t) else t[-1] + 1
        ends[-1] = max(ends[-1], starts[-1] + 1)
    return FrameSeries(counts, starts, ends, regime, remainder=remainder)


def build_frames(stream: EventStream, regime: Regime, **kwargs) -> FrameSeries:
    if isinstance(regime, FixedTime):
        return build_frames_fixed_time(stream, regime.tau_us, **kwargs)
    return build_frames_fixed_count(stream, regime.n)


def split_polarity(stream: EventStream) -> tuple[EventStream, EventStream]:
    """Partition into (positive, negative) polarity streams, order preserved."""
    pos = stream.p > 0
    return stream.take(pos), stream.take(~pos)


def merge_streams(a: EventStream, b: EventStream) -> EventStream:
    """Stable time-merge of two streams on the same sensor."""
    if a.shape != b.shape:
        raise ValueError("cannot merge streams from different sensors")
    t = np.concatenate([a.t, b.t])
    order = np.argsort(t, kind="stable")
    cat = lambda x, y: np.concatenate([x, y])[order]  # noqa: E731
    return EventStream(t[order], cat(a.u, b.u), cat(a.v, b.v), cat(a.p, b.p), a.width, a.height)
