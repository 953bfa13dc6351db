"""Variance-driven sparse pixel selection with surround suppression.

The reference frames give a per-pixel temporal variance of event counts.
Normalized, that variance is a sampling distribution over pixels. Pixels are
drawn one at a time; after each draw the working distribution is multiplied
by ``1 - exp(-r^2 / (2 sigma^2))`` around the drawn pixel and renormalized,
which removes the drawn pixel and discourages its neighbours.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import DegenerateVariance, MalformedRecord, MassExhausted, TooFewFrames
from .events import FrameSeries
from .preprocess import PixelMask

DEFAULT_J = 150
DEFAULT_SIGMA = 7.0

# Beyond this many sigmas exp(-r^2/2s^2) < 2**-53, so the kernel is exactly 1.0.
_KERNEL_RADIUS_SIGMAS = 9.0


@dataclass(frozen=True, eq=False)
class VarianceMap:
    S: np.ndarray  # (H, W) per-pixel variance
    mu: np.ndarray  # (H, W) per-pixel temporal mean
    K: int

    def to_csv(self) -> str:
        h, w = self.S.shape
        v, u = np.mgrid[0:h, 0:w]
        buf = io.StringIO()
        buf.write("u,v,S\n")
        np.savetxt(buf, np.column_stack([u.ravel(), v.ravel(), self.S.ravel()]), fmt=["%d", "%d", "%.17g"], delimiter=",")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class SelectionPmf:
    p: np.ndarray  # (H, W), sums to 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape


@dataclass(frozen=True, eq=False)
class PixelSet:
    """Ordered distinct pixel coordinates, stored as ``u`` and ``v`` arrays."""

    u: np.ndarray
    v: np.ndarray
    seed: Optional[int] = None
    sigma: Optional[float] = None
    strategy: str = "variance"

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.intp).copy()
        v = np.asarray(self.v, dtype=np.intp).copy()
        if u.shape != v.shape or u.ndim != 1:
            raise ValueError("u and v must be 1-D arrays of equal length")
        if len(set(zip(u.tolist(), v.tolist()))) != len(u):
            raise ValueError("pixel coordinates must be distinct")
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_pixels(cls, pixels: Sequence[tuple[int, int]], **kw) -> "PixelSet":
        arr = np.asarray(list(pixels), dtype=np.intp).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1], **kw)

    @classmethod
    def all_pixels(cls, width: int, height: int) -> "PixelSet":
        v, u = np.divmod(np.arange(width * height), width)
        return cls(u, v, strategy="all")

    @property
    def pixels(self) -> list[tuple[int, int]]:
        return list(zip(self.u.tolist(), self.v.tolist()))

    @property
    def J(self) -> int:
        return len(self.u)

    def __len__(self) -> int:
        return len(self.u)

    def to_csv(self) -> str:
        lines = [
            f"# J={self.J} sigma={self.sigma} seed={self.seed} strategy={self.strategy}",
            "u,v",
        ]
        lines += [f"{u},{v}" for u, v in self.pixels]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "PixelSet":
        meta: dict[str, str] = {}
        coords = []
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if line.startswith("#"):
                for item in line[1:].split():
                    if "=" in item:
                        key, value = item.split("=", 1)
                        meta[key] = value
                continue
            if not line or line == "u,v":
                continue
            try:
                u, v = (int(x) for x in line.split(","))
            except ValueError:
                raise MalformedRecord(f"pixel line {n}: {line!r}") from None
            coords.append((u, v))
        seed = meta.get("seed")
        sigma = meta.get("sigma")
        return cls.from_pixels(
            coords,
            seed=None if seed in (None, "None") else int(seed),
            sigma=None if sigma in (None, "None") else float(sigma),
            strategy=meta.get("strategy", "variance"),
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PixelSet":
        return cls.from_csv(Path(path).read_text())


def variance_map(frames: FrameSeries, mask: Optional[PixelMask] = None) -> VarianceMap:
    """Population variance (1/K) of each pixel's count across frames.

    The mean is taken per pixel over time. Masked pixels get zero variance.
    """
    K = len(frames)
    if K < 2:
        raise TooFewFrames(f"variance needs at least 2 frames, got {K}")
    counts = frames.counts
    mu = counts.mean(axis=0, dtype=np.float64)
    S = np.zeros(counts.shape[1:], dtype=np.float64)
    # chunked over rows to bound the float64 temporary
    rows = max(1, (1 << 24) // max(1, K * counts.shape[2]))
    for r0 in range(0, counts.shape[1], rows):
        block = counts[:, r0 : r0 + rows].astype(np.float64)
        S[r0 : r0 + rows] = ((block - mu[r0 : r0 + rows]) ** 2).mean(axis=0)
    if mask is not None:
        S[mask.grid] = 0.0
    return VarianceMap(S, mu, K)


def selection_pmf(varmap: VarianceMap) -> SelectionPmf:
    S = varmap.S
    if np.any(S < 0):
        raise ValueError("variance map has negative entries")
    A = S.sum()
    if A <= 0:
        raise DegenerateVariance("all pixel variances are zero")
    return SelectionPmf(S / A)


def suppression_weight(du, dv, sigma: float):
    """Multiplicative surround-suppression factor at offset ``(du, dv)``.

    Zero at the centre, tending to one far away. Works element-wise on arrays.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r2 = np.asarray(du, dtype=np.float64) ** 2 + np.asarray(dv, dtype=np.float64) ** 2
    w = 1.0 - np.exp(-r2 / (2.0 * sigma * sigma))
    return float(w) if w.ndim == 0 else w


def _draw(cdf: np.ndarray, x: float) -> int:
    i = int(np.searchsorted(cdf, x, side="right"))
    if i >= len(cdf):
        # x rounded up to the total; take the last cell that carries mass
        i = int(np.flatnonzero(np.diff(cdf, prepend=0.0) > 0)[-1])
    return i


def select_pixels(
    pmf: SelectionPmf,
    J: int = DEFAULT_J,
    sigma: float = DEFAULT_SIGMA,
    seed: int = 0,
    rng: Optional[np.random.Generator] = None,
) -> PixelSet:
    """Draw ``J`` distinct pixels sequentially with surround suppression.

    Suppression accumulates: the working pmf after ``j`` draws is the
    original pmf times the kernels around all ``j`` drawn pixels, renormalized.

    Raises:
        MassExhausted: the working pmf has no mass left before ``J`` draws.
    """
    if J < 0:
        raise ValueError("J must be non-negative")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if rng is None:
        rng = np.random.default_rng(seed)
    H, W = pmf.shape
    work = np.array(pmf.p, dtype=np.float64).ravel()
    radius = int(math.ceil(_KERNEL_RADIUS_SIGMAS * sigma))
    offs = np.arange(-radius, radius + 1)
    kernel = suppression_weight(offs[:, None], offs[None, :], sigma)
    grid = work.reshape(H, W)

    us = np.empty(J, dtype=np.intp)
    vs = np.empty(J, dtype=np.intp)
    for j in range(J):
        cdf = np.cumsum(work)
        total = cdf[-1]
        if not total > 0:
            raise MassExhausted(f"no selectable mass left after {j} of {J} draws")
        idx = _draw(cdf, rng.random() * total)
        v, u = divmod(idx, W)
        us[j], vs[j] = u, v
        v0, v1 = max(0, v - radius), min(H, v + radius + 1)
        u0, u1 = max(0, u - radius), min(W, u + radius + 1)
        grid[v0:v1, u0:u1] *= kernel[v0 - v + radius : v1 - v + radius, u0 - u + radius : u1 - u + radius]
        grid[v, u] = 0.0
        remaining = work.sum()
        if remaining > 0:
            work /= remaining
    return PixelSet(us, vs, seed=seed, sigma=sigma, strategy="variance")


def bottom_third(height: int) -> tuple[int, int]:
    """Row range ``[v_start, height)`` covering the bottom third of the frame."""
    return (2 * height) // 3, height


def select_random_pixels(
    width: int,
    height: int,
    J: int,
    seed: int = 0,
    exclusion: Optional[tuple[int, int, int, int]] = None,
    mask: Optional[PixelMask] = None,
) -> PixelSet:
    """Uniform sampling of ``J`` pixels without replacement.

    ``exclusion`` is a rectangle ``(u0, u1, v0, v1)`` (half-open) whose pixels
    are never chosen; masked pixels are never chosen either.
    """
    allowed = np.ones((height, width), dtype=bool)
    if exclusion is not None:
        u0, u1, v0, v1 = exclusion
        allowed[v0:v1, u0:u1] = False
    if mask is not None:
        allowed &= ~mask.grid
    pool = np.flatnonzero(allowed.ravel())
    if J > len(pool):
        raise MassExhausted(f"only {len(pool)} selectable pixels for J={J}")
    rng = np.random.default_rng(seed)
    idx = rng.choice(pool, size=J, replace=False)
    v, u = np.divmod(idx, width)
    return PixelSet(u, v, seed=seed, sigma=None, strategy="random" if exclusion is None else "random_excl")
