"""Synthetic traverses with planted ground truth.

A route is split into equal-length places. Each place owns a latent activity
map: the expected number of events each pixel emits while the vehicle
crosses that place. Events are drawn in the distance domain and mapped to
time through the speed profile, so driving faster compresses timestamps but
leaves the per-place counts, and the event order, untouched.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError
from .evaluate import PoseTrack
from .events import EventStream, merge_streams

US_PER_S = 1_000_000


@dataclass(frozen=True)
class SynthWorld:
    """Parameters of a synthetic route.

    ``kind="smooth"`` gives every pixel a spatially correlated log-normal
    activity with a quiet bottom third (the "bonnet"). ``kind="planted"``
    keeps all pixels at a constant, faint ``background`` rate except
    ``n_planted`` pixels whose activity changes strongly from place to place.
    """

    width: int = 64
    height: int = 48
    n_places: int = 120
    place_length_m: float = 10.0
    speed_mps: float = 10.0
    speed_variation: float = 0.0
    speed_period_m: float = 250.0
    events_per_place: float = 3.0
    correlation_px: float = 2.5
    place_correlation: float = 0.0
    contrast: float = 1.0
    gain_spread: float = 0.0
    noise_rate: float = 0.0
    kind: str = "smooth"
    n_planted: int = 10
    background: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.n_places <= 0:
            raise ConfigError("world geometry must be positive")
        if self.place_length_m <= 0 or self.speed_mps <= 0:
            raise ConfigError("place length and speed must be positive")
        if not 0 <= self.speed_variation < 1:
            raise ConfigError("speed_variation must be in [0, 1)")
        if self.events_per_place < 0 or self.noise_rate < 0 or self.background < 0:
            raise ConfigError("rates must be non-negative")
        if self.kind not in ("smooth", "planted"):
            raise ConfigError(f"unknown world kind {self.kind!r}")
        if self.kind == "planted" and not 0 <= self.n_planted <= self.width * self.height:
            raise ConfigError("n_planted exceeds the number of pixels")

    @property
    def route_length_m(self) -> float:
        return self.n_places * self.place_length_m

    def as_dict(self) -> dict:
        return asdict(self)

    def planted_pixels(self) -> np.ndarray:
        """Flat indices (``v * W + u``) of the informative pixels of a planted world."""
        rng = np.random.default_rng([self.seed, 2])
        return np.sort(rng.choice(self.width * self.height, size=self.n_planted, replace=False))

    def activity(self) -> np.ndarray:
        """Expected events per pixel per place, shape ``(n_places, H, W)``."""
        rng = np.random.default_rng([self.seed, 1])
        P, H, W = self.n_places, self.height, self.width
        if self.kind == "planted":
            act = np.full((P, H * W), self.background, dtype=np.float64)
            idx = self.planted_pixels()
            act[:, idx] = rng.uniform(0.0, 2.0 * self.events_per_place, size=(P, len(idx)))
            return act.reshape(P, H, W)
        g = rng.standard_normal((P, H, W))
        g = gaussian_filter(g, sigma=(self.place_correlation, self.correlation_px, self.correlation_px), mode="wrap")
        g /= g.std(axis=(1, 2), keepdims=True)
        act = np.exp(self.contrast * g)
        if self.gain_spread > 0:
            gain = gaussian_filter(rng.standard_normal(P), sigma=self.place_correlation, mode="wrap")
            gain /= gain.std()
            act *= np.exp(self.gain_spread * gain)[:, None, None]
        profile = np.ones(H)
        profile[(2 * H) // 3 :] = 0.15
        act *= profile[None, :, None]
        return act * (self.events_per_place / act.mean())

    def seconds_at(self, s) -> np.ndarray:
        """Elapsed time (s) to reach arc length ``s`` at unit speed scale."""
        s = np.asarray(s, dtype=np.float64)
        if self.speed_variation == 0:
            return s / self.speed_mps
        # d t / d s = 1 / v(s), v(s) = v0 (1 + a sin(2 pi s / period))
        grid = np.linspace(0.0, self.route_length_m, max(2, int(self.route_length_m / 0.05) + 1))
        pace = 1.0 / (self.speed_mps * (1 + self.speed_variation * np.sin(2 * math.pi * grid / self.speed_period_m)))
        t = np.concatenate([[0.0], np.cumsum((pace[1:] + pace[:-1]) * np.diff(grid) / 2)])
        return np.interp(s, grid, t)


def _route_events(world: SynthWorld, rng: np.random.Generator):
    act = world.activity()
    counts = rng.poisson(act).ravel()
    cells = np.repeat(np.arange(counts.size), counts)
    place, pix = np.divmod(cells, world.width * world.height)
    v, u = np.divmod(pix, world.width)
    s = (place + rng.random(len(cells))) * world.place_length_m
    p = rng.choice(np.array([-1, 1], dtype=np.int8), size=len(cells))
    order = np.argsort(s, kind="stable")
    return s[order], u[order], v[order], p[order]


def _to_us(seconds: np.ndarray, scale: float) -> np.ndarray:
    return np.floor(seconds / scale * US_PER_S).astype(np.int64)


def synth_generate(
    world: SynthWorld, traversal_speed_scale: float = 1.0, traverse_seed: int = 0
) -> tuple[EventStream, PoseTrack]:
    """Generate one traverse of ``world`` and its arc-length pose track.

    The same ``(world, traverse_seed)`` always yields the same signal events;
    ``traversal_speed_scale`` only divides their timestamps. Sensor noise is
    added in the time domain at ``world.noise_rate`` events/s/pixel.
    """
    if not traversal_speed_scale > 0:
        raise ConfigError("traversal speed scale must be positive")
    rng = np.random.default_rng([world.seed, 3, traverse_seed])
    s, u, v, p = _route_events(world, rng)
    t = _to_us(world.seconds_at(s), traversal_speed_scale)
    stream = EventStream(t, u, v, p, world.width, world.height)

    duration_s = float(world.seconds_at(world.route_length_m)) / traversal_speed_scale
    if world.noise_rate > 0:
        n_pix = world.width * world.height
        n_noise = rng.poisson(world.noise_rate * duration_s * n_pix)
        tn = np.sort(rng.integers(0, int(duration_s * US_PER_S) + 1, size=n_noise))
        pix = rng.integers(0, n_pix, size=n_noise)
        noise = EventStream(
            tn,
            pix % world.width,
            pix // world.width,
            rng.choice(np.array([-1, 1], dtype=np.int8), size=n_noise),
            world.width,
            world.height,
        )
        stream = merge_streams(stream, noise)

    s_grid = np.linspace(0.0, world.route_length_m, 10 * world.n_places + 1)
    t_grid = _to_us(world.seconds_at(s_grid), traversal_speed_scale)
    t_grid[-1] = max(t_grid[-1], int(stream.t[-1]) if len(stream) else 0) + 1
    keep = np.concatenate([[True], np.diff(t_grid) > 0])
    return stream, PoseTrack(t_grid[keep], s_grid[keep])


def place_of(world: SynthWorld, s) -> np.ndarray:
    """Place index containing arc length ``s``."""
    idx = np.floor(np.asarray(s, dtype=np.float64) / world.place_length_m).astype(np.int64)
    return np.clip(idx, 0, world.n_places - 1)
