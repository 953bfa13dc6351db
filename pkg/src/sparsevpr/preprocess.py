"""Sensor artifact removal: hot pixels and bias-generator bursts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import EmptyStream, MalformedRecord, OutOfBounds
from .events import EventStream

DEFAULT_K_SIGMA = 5.0
DEFAULT_BURST_BIN_US = 1_000
DEFAULT_BURST_RATIO = 10.0


@dataclass(frozen=True, eq=False)
class PixelMask:
    """Pixels excluded from all downstream processing, as an ``(H, W)`` bool grid."""

    grid: np.ndarray

    def __post_init__(self):
        g = np.array(self.grid, dtype=bool)
        if g.ndim != 2:
            raise ValueError("mask grid must be 2-D")
        g.flags.writeable = False
        object.__setattr__(self, "grid", g)

    @classmethod
    def empty(cls, width: int, height: int) -> "PixelMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_coords(cls, coords, width: int, height: int) -> "PixelMask":
        g = np.zeros((height, width), dtype=bool)
        for u, v in coords:
            if not (0 <= u < width and 0 <= v < height):
                raise OutOfBounds(f"mask pixel ({u}, {v}) outside {width}x{height}")
            g[v, u] = True
        return cls(g)

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def masked(self) -> frozenset:
        v, u = np.nonzero(self.grid)
        return frozenset(zip(u.tolist(), v.tolist()))

    def __len__(self) -> int:
        return int(self.grid.sum())

    def __contains__(self, uv) -> bool:
        u, v = uv
        return bool(self.grid[v, u])

    def apply(self, stream: EventStream) -> EventStream:
        """Drop events that fall on masked pixels."""
        if stream.shape != self.grid.shape:
            raise ValueError("mask and stream geometry differ")
        if not self.grid.any():
            return stream
        return stream.take(~self.grid[stream.v, stream.u])

    def to_csv(self) -> str:
        lines = ["u,v"] + [f"{u},{v}" for u, v in sorted(self.masked)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, width: int, height: int) -> "PixelMask":
        coords = []
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#") or line == "u,v":
                continue
            try:
                u, v = (int(x) for x in line.split(","))
            except ValueError:
                raise MalformedRecord(f"mask line {n}: {line!r}") from None
            coords.append((u, v))
        return cls.from_coords(coords, width, height)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path: Union[str, Path], width: int, height: int) -> "PixelMask":
        return cls.from_csv(Path(path).read_text(), width, height)


def detect_hot_pixels(
    stream: EventStream, k_sigma: float = DEFAULT_K_SIGMA, mask: Optional[PixelMask] = None
) -> PixelMask:
    """Mask pixels whose total event count exceeds ``mean + k_sigma * std``.

    Statistics are taken once over the per-pixel totals of all pixels not
    already in ``mask``; previously masked pixels stay masked.
    """
    if len(stream) == 0:
        raise EmptyStream("hot-pixel detection needs events")
    if k_sigma <= 0:
        raise ValueError("k_sigma must be positive")
    counts = stream.pixel_counts().astype(np.float64)
    prior = np.zeros(counts.shape, dtype=bool) if mask is None else mask.grid
    if math.isinf(k_sigma):
        return PixelMask(prior.copy())
    live = counts[~prior]
    threshold = live.mean() + k_sigma * live.std()
    return PixelMask(prior | ((counts > threshold) & ~prior))


def remove_bursts(
    stream: EventStream,
    bin_us: int = DEFAULT_BURST_BIN_US,
    ratio: float = DEFAULT_BURST_RATIO,
) -> EventStream:
    """Drop every event in time bins holding more than ``ratio`` x the median
    non-empty bin count. Bins start at the first event."""
    if len(stream) == 0:
        raise EmptyStream("burst removal needs events")
    if bin_us <= 0:
        raise ValueError("bin must be positive")
    if ratio <= 1:
        raise ValueError("ratio must exceed 1")
    bins = (stream.t - stream.t[0]) // int(bin_us)
    _, inverse, per_bin = np.unique(bins, return_inverse=True, return_counts=True)
    limit = ratio * np.median(per_bin)
    burst = per_bin > limit
    if not burst.any():
        return stream
    return stream.take(~burst[inverse])


def preprocess(
    reference: EventStream,
    queries: list[EventStream],
    k_sigma: float = DEFAULT_K_SIGMA,
    bin_us: int = DEFAULT_BURST_BIN_US,
    ratio: float = DEFAULT_BURST_RATIO,
) -> tuple[EventStream, list[EventStream], PixelMask]:
    """Burst-filter every traverse, learn the hot-pixel mask on the reference
    and apply it to all of them."""
    reference = remove_bursts(reference, bin_us, ratio)
    queries = [remove_bursts(q, bin_us, ratio) for q in queries]
    mask = detect_hot_pixels(reference, k_sigma)
    return mask.apply(reference), [mask.apply(q) for q in queries], mask
