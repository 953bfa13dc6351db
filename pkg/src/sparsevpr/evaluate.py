"""Ground-truth association and precision-recall evaluation."""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from .errors import DimensionMismatch, MalformedRecord, TrackCoverageGap
from .events import FrameSeries
from .match import DistanceMatrix, best_matches

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True, eq=False)
class PoseTrack:
    """Time-stamped positions: ``(n, d)`` metres, or ``(n, 1)`` arc length."""

    t: np.ndarray
    pos: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        pos = np.asarray(self.pos, dtype=np.float64)
        if pos.ndim == 1:
            pos = pos[:, None]
        if len(t) != len(pos):
            raise ValueError("timestamps and positions differ in length")
        if len(t) < 1:
            raise ValueError("empty pose track")
        if np.any(np.diff(t) <= 0):
            raise ValueError("pose timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "pos", pos)

    @classmethod
    def from_latlon(cls, t, lat, lon, origin=None) -> "PoseTrack":
        """Project GPS onto a local tangent plane (equirectangular, metres)."""
        lat = np.radians(np.asarray(lat, dtype=np.float64))
        lon = np.radians(np.asarray(lon, dtype=np.float64))
        lat0, lon0 = (lat[0], lon[0]) if origin is None else map(math.radians, origin)
        x = EARTH_RADIUS_M * (lon - lon0) * math.cos(lat0)
        y = EARTH_RADIUS_M * (lat - lat0)
        return cls(t, np.column_stack([x, y]))

    def interpolate(self, t_query) -> np.ndarray:
        """Linear interpolation at ``t_query`` (microseconds); ``(m, d)``."""
        tq = np.asarray(t_query, dtype=np.float64)
        lo, hi = self.t[0], self.t[-1]
        out = (tq < lo) | (tq > hi)
        if np.any(out):
            bad = float(tq[out][0])
            raise TrackCoverageGap(f"time {bad:.0f} us outside track span [{lo}, {hi}]")
        return np.column_stack([np.interp(tq, self.t, self.pos[:, d]) for d in range(self.pos.shape[1])])

    def to_csv(self) -> str:
        cols = ["x_m", "y_m", "z_m"][: self.pos.shape[1]] if self.pos.shape[1] > 1 else ["s_m"]
        buf = io.StringIO()
        buf.write(",".join(["t_us"] + cols) + "\n")
        for t, row in zip(self.t.tolist(), self.pos.tolist()):
            buf.write(",".join([str(t)] + [repr(x) for x in row]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PoseTrack":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if lines and not lines[0].lstrip()[0].isdigit():
            lines = lines[1:]
        try:
            rows = np.array([[float(x) for x in ln.split(",")] for ln in lines], dtype=np.float64)
        except ValueError as exc:
            raise MalformedRecord(f"bad pose row: {exc}") from None
        if rows.ndim != 2 or rows.shape[1] < 2:
            raise MalformedRecord("pose rows need t_us and at least one coordinate")
        return cls(rows[:, 0].astype(np.int64), rows[:, 1:])

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PoseTrack":
        return cls.from_csv(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class GroundTruth:
    correct: np.ndarray  # (Q, R) bool
    tolerance: float

    @classmethod
    def from_band(cls, n_query: int, n_ref: int, half_width: int) -> "GroundTruth":
        """Index-based relation ``|j - k| <= half_width`` for aligned traverses."""
        j = np.arange(n_query)[:, None]
        k = np.arange(n_ref)[None, :]
        return cls(np.abs(j - k) <= half_width, float(half_width))


def associate_ground_truth(
    ref_track: PoseTrack,
    query_track: PoseTrack,
    ref_frames: FrameSeries,
    query_frames: FrameSeries,
    tolerance: float,
) -> GroundTruth:
    """Mark ``(j, k)`` correct when the frames' midpoint positions are within
    ``tolerance`` metres (Euclidean, or along the route for arc length)."""
    if ref_track.pos.shape[1] != query_track.pos.shape[1]:
        raise ValueError("pose tracks have different dimensionality")
    pr = ref_track.interpolate(ref_frames.midpoints)
    pq = query_track.interpolate(query_frames.midpoints)
    d2 = ((pq[:, None, :] - pr[None, :, :]) ** 2).sum(axis=2)
    return GroundTruth(d2 <= tolerance * tolerance, float(tolerance))


class PRPoint(NamedTuple):
    threshold: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True, eq=False)
class PRCurve:
    points: list[PRPoint]
    p_at_100r: float
    r_at_99p: float
    n_queries: int = 0

    @property
    def precision(self) -> np.ndarray:
        return np.array([p.precision for p in self.points])

    @property
    def recall(self) -> np.ndarray:
        return np.array([p.recall for p in self.points])

    def to_csv(self) -> str:
        lines = ["threshold,precision,recall,tp,fp,fn"]
        for p in self.points:
            lines.append(f"{p.threshold!r},{p.precision!r},{p.recall!r},{p.tp},{p.fp},{p.fn}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {"p_at_100r": self.p_at_100r, "r_at_99p": self.r_at_99p, "n_queries": self.n_queries}

    def save(self, csv_path: Union[str, Path], json_path: Union[str, Path, None] = None) -> None:
        Path(csv_path).write_text(self.to_csv())
        if json_path is not None:
            Path(json_path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def precision_at_100_recall(curve: PRCurve) -> float:
    """Precision of the most permissive point, where every query is matched."""
    if not curve.points:
        raise ValueError("empty PR curve")
    return curve.points[-1].precision


def recall_at_99_precision(curve: PRCurve, min_precision: float = 0.99) -> float:
    if not curve.points:
        raise ValueError("empty PR curve")
    return max((p.recall for p in curve.points if p.precision >= min_precision), default=0.0)


def pr_curve(dm: DistanceMatrix, gt: GroundTruth) -> PRCurve:
    """Sweep an acceptance threshold over the per-query best-match scores.

    A query is accepted when its best score is at most the threshold; it is a
    true positive if its best reference is marked correct. Rejected queries
    count as false negatives (every query is assumed to have a true match).
    Thresholds are the distinct best scores followed by ``+inf``.
    """
    if dm.D.shape != gt.correct.shape:
        raise DimensionMismatch(f"distance matrix {dm.D.shape} vs ground truth {gt.correct.shape}")
    n_q = dm.D.shape[0]
    if n_q == 0:
        raise DimensionMismatch("no queries")
    k, score = best_matches(dm)
    hit = gt.correct[np.arange(n_q), k]

    order = np.argsort(score, kind="stable")
    s_sorted = score[order]
    tp_cum = np.cumsum(hit[order])
    # index of the last query with score <= each distinct threshold
    thresholds, first = np.unique(s_sorted, return_index=True)
    last = np.append(first[1:], n_q) - 1

    points = []
    for th, i in zip(thresholds.tolist() + [math.inf], last.tolist() + [n_q - 1]):
        accepted = i + 1
        tp = int(tp_cum[i])
        fp = accepted - tp
        fn = n_q - accepted
        points.append(PRPoint(float(th), tp / accepted, tp / (tp + fn) if tp + fn else 0.0, tp, fp, fn))
    curve = PRCurve(points, 0.0, 0.0, n_q)
    return PRCurve(points, precision_at_100_recall(curve), recall_at_99_precision(curve), n_q)
