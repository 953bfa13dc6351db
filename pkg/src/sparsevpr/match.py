"""Sparse descriptors, sum-of-absolute-differences distance matrices and
diagonal sequence aggregation."""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import (
    BadSequenceLength,
    GeometryMismatch,
    LengthMismatch,
    MalformedRecord,
)
from .events import EventFrame, FrameSeries
from .selection import PixelSet

DEFAULT_L = 5
DMAT_MAGIC = b"DMAT"

# Upper bound on elements of the (rows, R, J) temporary in distance_matrix.
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True, eq=False)
class SparseDescriptor:
    counts: np.ndarray
    frame_idx: int = -1

    def __len__(self) -> int:
        return len(self.counts)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Query x reference distances.

    ``kind`` is ``"raw"`` for frame-to-frame distances or ``"sequence"`` after
    aggregation, in which case ``L`` and ``mode`` record how.
    """

    D: np.ndarray
    kind: str = "raw"
    L: Optional[int] = None
    mode: Optional[str] = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.D.shape

    def to_csv(self) -> str:
        buf = io.StringIO()
        fmt = "%d" if self.D.dtype.kind in "iu" else "%.17g"
        np.savetxt(buf, self.D, fmt=fmt, delimiter=",")
        return buf.getvalue()

    def to_bytes(self) -> bytes:
        q, r = self.D.shape
        return DMAT_MAGIC + struct.pack("<II", q, r) + np.ascontiguousarray(self.D, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, kind: str = "raw") -> "DistanceMatrix":
        if data[:4] != DMAT_MAGIC or len(data) < 12:
            raise MalformedRecord("missing DMAT header")
        q, r = struct.unpack("<II", data[4:12])
        if len(data) != 12 + 8 * q * r:
            raise MalformedRecord(f"DMAT body size does not match {q}x{r}")
        D = np.frombuffer(data, dtype="<f8", offset=12).reshape(q, r).astype(np.float64)
        return cls(D, kind)

    def save(self, path: Union[str, Path]) -> None:
        path = Path(path)
        if path.suffix.lower() == ".csv":
            path.write_text(self.to_csv())
        else:
            path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DistanceMatrix":
        path = Path(path)
        if path.suffix.lower() == ".csv":
            D = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
            return cls(D)
        return cls.from_bytes(path.read_bytes())


def sparse_descriptor(frame: EventFrame, pixels: PixelSet, frame_idx: int = -1) -> SparseDescriptor:
    return SparseDescriptor(np.asarray(frame.counts)[pixels.v, pixels.u], frame_idx)


def descriptor_matrix(frames: FrameSeries, pixels: PixelSet) -> np.ndarray:
    """All frame descriptors as a ``(K, J)`` integer array."""
    return frames.counts[:, pixels.v, pixels.u]


def _as_matrix(descs) -> np.ndarray:
    if isinstance(descs, np.ndarray):
        m = descs
    else:
        rows = [d.counts if isinstance(d, SparseDescriptor) else d for d in descs]
        lengths = {len(r) for r in rows}
        if len(lengths) > 1:
            raise LengthMismatch(f"descriptors of differing lengths {sorted(lengths)}")
        m = np.asarray(rows)
    if m.ndim != 2:
        m = m.reshape(len(m), -1)
    return m.astype(np.int64, copy=False)


def sad_distance(a, b) -> int:
    """Sum of absolute differences between two count vectors."""
    a = np.asarray(a.counts if isinstance(a, SparseDescriptor) else a, dtype=np.int64)
    b = np.asarray(b.counts if isinstance(b, SparseDescriptor) else b, dtype=np.int64)
    if a.shape != b.shape:
        raise LengthMismatch(f"descriptor lengths {a.shape} and {b.shape} differ")
    return int(np.abs(a - b).sum())


def distance_matrix(queries, refs) -> DistanceMatrix:
    """Pairwise SAD between query and reference descriptors.

    Accepts sequences of :class:`SparseDescriptor` or ``(n, J)`` arrays.
    """
    Q = _as_matrix(queries)
    R = _as_matrix(refs)
    if Q.shape[1] != R.shape[1]:
        raise LengthMismatch(f"query length {Q.shape[1]} != reference length {R.shape[1]}")
    D = np.empty((len(Q), len(R)), dtype=np.int64)
    rows = max(1, _CHUNK_ELEMS // max(1, R.size))
    for j0 in range(0, len(Q), rows):
        block = Q[j0 : j0 + rows, None, :] - R[None, :, :]
        D[j0 : j0 + rows] = np.abs(block).sum(axis=2)
    return DistanceMatrix(D, "raw")


def dense_sad_row(query_counts: np.ndarray, ref_flat: np.ndarray) -> np.ndarray:
    """SAD of one full frame against every row of ``ref_flat`` ``(R, H*W)``."""
    diff = ref_flat - query_counts.reshape(1, -1)
    return np.abs(diff, out=diff).sum(axis=1, dtype=np.int64)


def dense_sad_matrix(query_frames: FrameSeries, ref_frames: FrameSeries) -> DistanceMatrix:
    """Baseline: SAD over all pixels of each frame pair."""
    if query_frames.counts.shape[1:] != ref_frames.counts.shape[1:]:
        raise GeometryMismatch(
            f"query frames {query_frames.counts.shape[1:]} vs reference {ref_frames.counts.shape[1:]}"
        )
    R = ref_frames.counts.reshape(len(ref_frames), -1).astype(np.int32, copy=False)
    Qc = query_frames.counts.reshape(len(query_frames), -1).astype(np.int32, copy=False)
    D = np.empty((len(Qc), len(R)), dtype=np.int64)
    for j in range(len(Qc)):
        D[j] = dense_sad_row(Qc[j], R)
    return DistanceMatrix(D, "raw")


def sequence_convolve(dm: DistanceMatrix, L: int = DEFAULT_L, mode: str = "centered") -> DistanceMatrix:
    """Average ``D`` along slope-one diagonals over a window of ``L`` frames.

    ``mode="centered"`` uses offsets ``-(L-1)/2 .. (L-1)/2``; ``"trailing"``
    uses ``-(L-1) .. 0``. Each output is divided by the number of window
    terms that fall inside the matrix.
    """
    if not isinstance(L, (int, np.integer)) or L < 1 or L % 2 == 0:
        raise BadSequenceLength(f"sequence length must be a positive odd integer, got {L!r}")
    if dm.kind != "raw":
        raise ValueError("sequence aggregation expects a raw distance matrix")
    if mode == "centered":
        offsets = range(-(L - 1) // 2, (L - 1) // 2 + 1)
    elif mode == "trailing":
        offsets = range(-(L - 1), 1)
    else:
        raise ValueError(f"unknown sequence mode {mode!r}")
    D = dm.D
    q, r = D.shape
    total = np.zeros((q, r), dtype=np.int64 if D.dtype.kind in "iu" else np.float64)
    terms = np.zeros((q, r), dtype=np.int64)
    for i in offsets:
        # out[j, k] += D[j + i, k + i] where both indices are in range
        j0, j1 = max(0, -i), min(q, q - i)
        k0, k1 = max(0, -i), min(r, r - i)
        if j0 >= j1 or k0 >= k1:
            continue
        total[j0:j1, k0:k1] += D[j0 + i : j1 + i, k0 + i : k1 + i]
        terms[j0:j1, k0:k1] += 1
    return DistanceMatrix(total / terms, "sequence", int(L), mode)


def best_match(dm: DistanceMatrix, j: int) -> tuple[int, float]:
    """Reference index with the smallest distance for query ``j`` (lowest index on ties)."""
    row = dm.D[j]
    k = int(np.argmin(row))
    return k, float(row[k])


def best_matches(dm: DistanceMatrix) -> tuple[np.ndarray, np.ndarray]:
    k = np.argmin(dm.D, axis=1)
    return k, dm.D[np.arange(len(k)), k].astype(np.float64)


def shift_pixels(frames: FrameSeries, du: int, dv: int) -> FrameSeries:
    """Move every count by ``(du, dv)``; counts leaving the sensor are lost."""
    src = frames.counts
    _, H, W = src.shape
    out = np.zeros_like(src)
    if abs(du) < W and abs(dv) < H:
        out[:, max(0, dv) : H + min(0, dv), max(0, du) : W + min(0, du)] = src[
            :, max(0, -dv) : H - max(0, dv), max(0, -du) : W - max(0, du)
        ]
    return frames.with_counts(out)
