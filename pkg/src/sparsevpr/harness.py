"""Experiment configuration, the end-to-end pipeline and experiment runners.

Every runner returns a :class:`Report`: a JSON-serialisable summary plus
named CSV tables. Anything wall-clock dependent lives under the report's
``timing`` key so the rest is reproducible byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import statistics
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .errors import ConfigError, TooFewFrames
from .evaluate import GroundTruth, PoseTrack, associate_ground_truth, pr_curve
from .events import (
    DEFAULT_HEIGHT,
    DEFAULT_WIDTH,
    BINARY_MAGIC,
    EventStream,
    FixedCount,
    FixedTime,
    FrameSeries,
    build_frames_fixed_count,
    build_frames_fixed_time,
    read_events,
)
from .match import (
    DistanceMatrix,
    dense_sad_matrix,
    dense_sad_row,
    descriptor_matrix,
    distance_matrix,
    sequence_convolve,
    shift_pixels,
)
from .preprocess import PixelMask, detect_hot_pixels, remove_bursts
from .selection import (
    PixelSet,
    SelectionPmf,
    VarianceMap,
    bottom_third,
    select_pixels,
    select_random_pixels,
    selection_pmf,
    variance_map,
)
from .synth import SynthWorld, synth_generate

logger = logging.getLogger(__name__)

STRATEGIES = ("variance", "random", "random_excl", "all")


# ---------------------------------------------------------------------------
# configuration


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_list(item: Callable[[str], Any]) -> Callable[[str], list]:
    def parse(raw: str) -> list:
        return [item(x.strip()) for x in raw.split(",") if x.strip()]

    return parse


def _parse_shift(raw: str) -> tuple[int, int]:
    du, dv = raw.split(":")
    return int(du), int(dv)


def _fmt_item(v) -> str:
    if isinstance(v, tuple):
        return f"{v[0]}:{v[1]}"
    return str(v)


def _opt(default, parse=None, help=""):
    if isinstance(default, list):
        return field(default_factory=lambda: list(default), metadata={"parse": parse, "help": help})
    return field(default=default, metadata={"parse": parse, "help": help})


def _default_shifts() -> list[tuple[int, int]]:
    return [(du, dv) for dv in (-10, -5, 0, 5, 10) for du in (-10, -5, 0, 5, 10)]


@dataclass
class ExperimentConfig:
    """Flat experiment settings; keys double as config-file keys and CLI flags.

    When ``reference`` is empty both traverses come from the synthetic world
    described by the ``synth_*`` keys.
    """

    reference: str = _opt("", help="reference event file (.csv or binary)")
    query: str = _opt("", help="query event file")
    reference_poses: str = _opt("", help="reference pose CSV")
    query_poses: str = _opt("", help="query pose CSV")
    width: int = _opt(DEFAULT_WIDTH, help="sensor width for CSV input")
    height: int = _opt(DEFAULT_HEIGHT, help="sensor height for CSV input")
    slack_us: int = _opt(0, help="tolerated timestamp regression when parsing")

    regime: str = _opt("time", help="'time' (fixed tau) or 'count' (fixed N)")
    tau_us: int = _opt(1_000_000)
    n_events: int = _opt(0, help="events per frame for the count regime")
    n_sweep: list = _opt([], _parse_list(int), "extra N values for exp-velocity")
    keep_partial: bool = _opt(False, _parse_bool, "keep a trailing partial time window")

    J: int = _opt(150)
    sigma: float = _opt(7.0)
    L: int = _opt(5)
    sequence_mode: str = _opt("centered", help="'centered' or 'trailing'")
    strategy: str = _opt("variance", help="variance | random | random_excl | all")
    seed: int = _opt(0)
    trials: int = _opt(5)
    dense: bool = _opt(False, _parse_bool, "also run the all-pixel SAD baseline")

    tolerance: float = _opt(70.0, help="ground-truth tolerance in metres")
    frame_tolerance: int = _opt(0, help="index band used when no poses are given")

    preprocess: bool = _opt(False, _parse_bool)
    hot_pixel_sigma: float = _opt(5.0)
    burst_bin_us: int = _opt(1_000)
    burst_ratio: float = _opt(10.0)
    mask: str = _opt("", help="hot-pixel mask CSV to apply")
    pixels: str = _opt("", help="pixel set CSV to reuse instead of selecting")

    j_grid: list = _opt([5, 10, 25, 50, 100, 150], _parse_list(int))
    strategies: list = _opt(["variance", "random", "random_excl"], _parse_list(str))
    shifts: list = field(default_factory=_default_shifts, metadata={"parse": _parse_list(_parse_shift), "help": "du:dv,..."})
    speed_scales: list = _opt([1.0, 1.7], _parse_list(float))

    bench_frames: int = _opt(500)
    bench_runs: int = _opt(10)
    bench_width: int = _opt(DEFAULT_WIDTH)
    bench_height: int = _opt(DEFAULT_HEIGHT)

    query_speed_scale: float = _opt(1.0)
    ref_traverse: int = _opt(0)
    query_traverse: int = _opt(1)
    synth: SynthWorld = field(default_factory=SynthWorld)

    workers: int = _opt(1)
    out_dir: str = _opt("out")

    # ------------------------------------------------------------------
    @classmethod
    def keys(cls) -> list[str]:
        names = [f.name for f in fields(cls) if f.name != "synth"]
        return names + [f"synth_{f.name}" for f in fields(SynthWorld)]

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: Optional["ExperimentConfig"] = None) -> "ExperimentConfig":
        """Build a config from raw string values (config file or CLI)."""
        cfg = base if base is not None else cls()
        own = {f.name: f for f in fields(cls)}
        world = {f.name: f for f in fields(SynthWorld)}
        updates: dict[str, Any] = {}
        synth_updates: dict[str, Any] = {}
        for key, raw in values.items():
            key = key.replace("-", "_")
            try:
                if key.startswith("synth_") and key[6:] in world:
                    name = key[6:]
                    synth_updates[name] = _coerce(raw, getattr(cfg.synth, name), None)
                elif key in own and key != "synth":
                    f = own[key]
                    updates[key] = _coerce(raw, getattr(cfg, key), f.metadata.get("parse"))
                else:
                    raise ConfigError(f"unknown config key {key!r}")
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
        if synth_updates:
            updates["synth"] = replace(cfg.synth, **synth_updates)
        return replace(cfg, **updates)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_mapping(parse_config_text(text))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ExperimentConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls.from_text(p.read_text())

    def to_text(self) -> str:
        lines = []
        for key in self.keys():
            value = getattr(self.synth, key[6:]) if key.startswith("synth_") else getattr(self, key)
            if isinstance(value, list):
                value = ",".join(_fmt_item(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "synth":
                continue
            value = getattr(self, f.name)
            out[f.name] = [list(v) if isinstance(v, tuple) else v for v in value] if isinstance(value, list) else value
        for k, v in self.synth.as_dict().items():
            out[f"synth_{k}"] = v
        return out

    @property
    def uses_files(self) -> bool:
        return bool(self.reference)

    def sensor_shape(self) -> tuple[int, int]:
        """``(W, H)`` of the data this config will load, without loading it."""
        if not self.uses_files:
            return self.synth.width, self.synth.height
        p = Path(self.reference)
        if p.suffix.lower() not in (".csv", ".txt"):
            with open(p, "rb") as fh:
                head = fh.read(8)
            if head[:4] == BINARY_MAGIC:
                w, h = np.frombuffer(head, dtype="<u2", count=2, offset=4)
                return int(w), int(h)
        return self.width, self.height

    def validate(self, need_query: bool = True) -> None:
        """Check parameters and referenced files before any computation."""
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.L < 1 or self.L % 2 == 0:
            raise ConfigError(f"L must be a positive odd integer, got {self.L}")
        if self.J < 1:
            raise ConfigError("J must be >= 1")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.regime not in ("time", "count"):
            raise ConfigError(f"regime must be 'time' or 'count', got {self.regime!r}")
        if self.regime == "time" and self.tau_us <= 0:
            raise ConfigError("tau_us must be positive")
        if self.regime == "count" and self.n_events < 1:
            raise ConfigError("the count regime needs n_events >= 1")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}")
        if self.sequence_mode not in ("centered", "trailing"):
            raise ConfigError(f"unknown sequence mode {self.sequence_mode!r}")
        if self.tolerance < 0 or self.frame_tolerance < 0:
            raise ConfigError("tolerances must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if any(s <= 0 for s in self.speed_scales) or self.query_speed_scale <= 0:
            raise ConfigError("speed scales must be positive")
        paths = [("reference", self.reference), ("reference_poses", self.reference_poses),
                 ("mask", self.mask), ("pixels", self.pixels)]
        if need_query:
            paths += [("query", self.query), ("query_poses", self.query_poses)]
        for name, path in paths:
            if path and not Path(path).is_file():
                raise ConfigError(f"{name} file not found: {path}")
        if self.uses_files and need_query and not self.query:
            raise ConfigError("a reference file needs a query file")
        if bool(self.reference_poses) != bool(self.query_poses) and need_query:
            raise ConfigError("give pose files for both traverses or for neither")


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        values[key] = value
    return values


def _coerce(raw, current, parse):
    if not isinstance(raw, str):
        return raw
    if parse is not None:
        return parse(raw)
    if isinstance(current, bool):
        return _parse_bool(raw)
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


# ---------------------------------------------------------------------------
# reports


@dataclass
class Report:
    name: str
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_json(self, include_timing: bool = True) -> str:
        doc = {"name": self.name, "summary": self.summary, "warnings": self.warnings,
               "tables": sorted(self.tables)}
        if include_timing:
            doc["timing"] = self.timing
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"

    def table_csv(self, name: str) -> str:
        rows = self.tables[name]
        buf = io.StringIO()
        if rows:
            writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _csv_value(v) for k, v in row.items()})
        return buf.getvalue()

    def write(self, out_dir: str | os.PathLike) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in self.tables:
            atomic_write(out / f"{self.name}_{name}.csv", self.table_csv(name))
        path = out / f"{self.name}.json"
        atomic_write(path, self.to_json())
        return path


def _csv_value(v):
    return repr(v) if isinstance(v, float) else v


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def atomic_write(path: Path, data: str | bytes) -> None:
    """Write through a temp file in the same directory, then rename."""
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _map(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _mean_std(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    return float(statistics.fmean(values)), float(statistics.pstdev(values)) if len(values) > 1 else 0.0


# ---------------------------------------------------------------------------
# pipeline stages


@dataclass
class Traverses:
    reference: EventStream
    query: EventStream
    ref_track: Optional[PoseTrack]
    query_track: Optional[PoseTrack]


@dataclass
class Prepared:
    """Frames and ground truth for a reference/query pair, ready for matching."""

    ref_frames: FrameSeries
    query_frames: FrameSeries
    mask: PixelMask
    gt: GroundTruth
    varmap: Optional[VarianceMap] = None
    _pmf: Optional[SelectionPmf] = None

    def pmf(self) -> SelectionPmf:
        if self._pmf is None:
            self.varmap = variance_map(self.ref_frames, self.mask)
            self._pmf = selection_pmf(self.varmap)
        return self._pmf


def load_traverses(cfg: ExperimentConfig, query_scale: Optional[float] = None) -> Traverses:
    if cfg.uses_files:
        ref = read_events(cfg.reference, cfg.width, cfg.height, cfg.slack_us)
        qry = read_events(cfg.query, cfg.width, cfg.height, cfg.slack_us)
        rt = PoseTrack.load(cfg.reference_poses) if cfg.reference_poses else None
        qt = PoseTrack.load(cfg.query_poses) if cfg.query_poses else None
        return Traverses(ref, qry, rt, qt)
    scale = cfg.query_speed_scale if query_scale is None else query_scale
    ref, rt = synth_generate(cfg.synth, 1.0, cfg.ref_traverse)
    qry, qt = synth_generate(cfg.synth, scale, cfg.query_traverse)
    return Traverses(ref, qry, rt, qt)


def clean_traverses(cfg: ExperimentConfig, tr: Traverses) -> tuple[EventStream, EventStream, PixelMask]:
    ref, qry = tr.reference, tr.query
    mask = PixelMask.empty(ref.width, ref.height)
    if cfg.preprocess:
        ref = remove_bursts(ref, cfg.burst_bin_us, cfg.burst_ratio)
        qry = remove_bursts(qry, cfg.burst_bin_us, cfg.burst_ratio)
        mask = detect_hot_pixels(ref, cfg.hot_pixel_sigma)
    if cfg.mask:
        extra = PixelMask.load(cfg.mask, ref.width, ref.height)
        mask = PixelMask(mask.grid | extra.grid)
    return mask.apply(ref), mask.apply(qry), mask


def make_frames(cfg: ExperimentConfig, stream: EventStream, regime=None) -> FrameSeries:
    regime = regime or (FixedTime(cfg.tau_us) if cfg.regime == "time" else FixedCount(cfg.n_events))
    if isinstance(regime, FixedTime):
        frames = build_frames_fixed_time(stream, regime.tau_us)
        return frames if cfg.keep_partial else frames.drop_partial()
    return build_frames_fixed_count(stream, regime.n)


def ground_truth(cfg: ExperimentConfig, tr: Traverses, ref_frames: FrameSeries, query_frames: FrameSeries) -> GroundTruth:
    if tr.ref_track is not None and tr.query_track is not None:
        return associate_ground_truth(tr.ref_track, tr.query_track, ref_frames, query_frames, cfg.tolerance)
    return GroundTruth.from_band(len(query_frames), len(ref_frames), cfg.frame_tolerance)


def prepare(cfg: ExperimentConfig, tr: Optional[Traverses] = None, regime=None) -> Prepared:
    tr = tr or load_traverses(cfg)
    ref, qry, mask = clean_traverses(cfg, tr)
    rf = make_frames(cfg, ref, regime)
    qf = make_frames(cfg, qry, regime)
    if len(rf) < 2 or len(qf) < 1:
        raise TooFewFrames(f"reference has {len(rf)} frames, query {len(qf)}")
    return Prepared(rf, qf, mask, ground_truth(cfg, tr, rf, qf))


def choose_pixels(prep: Prepared, strategy: str, J: int, sigma: float, seed: int) -> PixelSet:
    H, W = prep.ref_frames.counts.shape[1:]
    if strategy == "variance":
        return select_pixels(prep.pmf(), J, sigma, seed)
    if strategy == "random":
        return select_random_pixels(W, H, J, seed, mask=prep.mask)
    if strategy == "random_excl":
        v0, v1 = bottom_third(H)
        return select_random_pixels(W, H, J, seed, exclusion=(0, W, v0, v1), mask=prep.mask)
    if strategy == "all":
        return PixelSet.all_pixels(W, H)
    raise ConfigError(f"unknown strategy {strategy!r}")


def match_sparse(prep: Prepared, pixels: PixelSet, L: int, mode: str = "centered",
                 query_frames: Optional[FrameSeries] = None) -> tuple[DistanceMatrix, DistanceMatrix]:
    qf = prep.query_frames if query_frames is None else query_frames
    raw = distance_matrix(descriptor_matrix(qf, pixels), descriptor_matrix(prep.ref_frames, pixels))
    return raw, sequence_convolve(raw, L, mode)


def match_dense(prep: Prepared, L: int, mode: str = "centered",
                query_frames: Optional[FrameSeries] = None) -> tuple[DistanceMatrix, DistanceMatrix]:
    qf = prep.query_frames if query_frames is None else query_frames
    raw = dense_sad_matrix(qf, prep.ref_frames)
    return raw, sequence_convolve(raw, L, mode)


def run_pipeline(cfg: ExperimentConfig, write: bool = True) -> Report:
    """Load, clean, frame, select on the reference, match and evaluate."""
    cfg.validate()
    prep = prepare(cfg)
    if cfg.pixels:
        pixels = PixelSet.load(cfg.pixels)
    else:
        pixels = choose_pixels(prep, cfg.strategy, cfg.J, cfg.sigma, cfg.seed)
    raw, seq = match_sparse(prep, pixels, cfg.L, cfg.sequence_mode)
    curve = pr_curve(seq, prep.gt)

    report = Report("pipeline")
    report.summary = {
        "config": _report_config(cfg),
        "n_reference_frames": len(prep.ref_frames),
        "n_query_frames": len(prep.query_frames),
        "n_masked": len(prep.mask),
        "J": pixels.J,
        "sparse": curve.summary(),
    }
    report.tables["pr_sparse"] = [p._asdict() for p in curve.points]
    dense_curve = None
    if cfg.dense:
        draw, dseq = match_dense(prep, cfg.L, cfg.sequence_mode)
        dense_curve = pr_curve(dseq, prep.gt)
        report.summary["dense"] = dense_curve.summary()
        report.tables["pr_dense"] = [p._asdict() for p in dense_curve.points]

    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / "pixels.csv", pixels.to_csv())
        atomic_write(out / "mask.csv", prep.mask.to_csv())
        if prep.varmap is not None:
            atomic_write(out / "variance.csv", prep.varmap.to_csv())
        atomic_write(out / "distance_raw.dmat", raw.to_bytes())
        atomic_write(out / "distance_seq.dmat", seq.to_bytes())
        atomic_write(out / "pr.csv", curve.to_csv())
        atomic_write(out / "pr_summary.json", json.dumps(curve.summary(), indent=2, sort_keys=True) + "\n")
        report.write(out)
    return report


def _report_config(cfg: ExperimentConfig) -> dict:
    d = cfg.as_dict()
    d.pop("out_dir")
    d.pop("workers")
    return d


# ---------------------------------------------------------------------------
# experiments


def experiment_selection_compare(cfg: ExperimentConfig, write: bool = True) -> Report:
    """P@100R / R@99P across a grid of J for several selection strategies."""
    cfg.validate()
    prep = prepare(cfg)
    H, W = prep.ref_frames.counts.shape[1:]
    for J in cfg.j_grid:
        if not 1 <= J <= W * H:
            raise ConfigError(f"J={J} outside 1..{W * H}")
    cells = [(s, J, cfg.seed + t) for s in cfg.strategies for J in cfg.j_grid for t in range(cfg.trials)]
    if "variance" in cfg.strategies:
        prep.pmf()  # build once, before jobs share it

    def job(cell):
        strategy, J, seed = cell
        pixels = choose_pixels(prep, strategy, J, cfg.sigma, seed)
        _, seq = match_sparse(prep, pixels, cfg.L, cfg.sequence_mode)
        c = pr_curve(seq, prep.gt)
        return {"strategy": strategy, "J": J, "seed": seed, "p_at_100r": c.p_at_100r, "r_at_99p": c.r_at_99p}

    samples = _map(job, cells, cfg.workers)
    summary_rows = []
    for s in cfg.strategies:
        for J in cfg.j_grid:
            rows = [r for r in samples if r["strategy"] == s and r["J"] == J]
            p_mean, p_std = _mean_std([r["p_at_100r"] for r in rows])
            r_mean, r_std = _mean_std([r["r_at_99p"] for r in rows])
            summary_rows.append({"strategy": s, "J": J, "n_samples": len(rows),
                                 "p_at_100r_mean": p_mean, "p_at_100r_std": p_std,
                                 "r_at_99p_mean": r_mean, "r_at_99p_std": r_std})
    report = Report("exp_select", tables={"samples": samples, "summary": summary_rows})
    report.summary = {"config": _report_config(cfg), "points": summary_rows}
    if write:
        report.write(cfg.out_dir)
    return report


def experiment_pixel_shift(cfg: ExperimentConfig, write: bool = True) -> Report:
    """Shift every query pixel by each configured offset; sparse vs dense P@100R."""
    cfg.validate()
    W, H = cfg.sensor_shape()
    for du, dv in cfg.shifts:
        if abs(du) >= W or abs(dv) >= H:
            raise ConfigError(f"shift ({du}, {dv}) exceeds the {W}x{H} sensor")
    prep = prepare(cfg)
    pixel_sets = [choose_pixels(prep, cfg.strategy, cfg.J, cfg.sigma, cfg.seed + t) for t in range(cfg.trials)]

    def job(offset):
        du, dv = offset
        qf = shift_pixels(prep.query_frames, du, dv)
        sparse = []
        for px in pixel_sets:
            _, seq = match_sparse(prep, px, cfg.L, cfg.sequence_mode, qf)
            sparse.append(pr_curve(seq, prep.gt).p_at_100r)
        row = {"du": du, "dv": dv}
        row["sparse_p_at_100r_mean"], row["sparse_p_at_100r_std"] = _mean_std(sparse)
        if cfg.dense:
            _, dseq = match_dense(prep, cfg.L, cfg.sequence_mode, qf)
            row["dense_p_at_100r"] = pr_curve(dseq, prep.gt).p_at_100r
        return row, [{"du": du, "dv": dv, "seed": cfg.seed + t, "p_at_100r": p} for t, p in enumerate(sparse)]

    results = _map(job, list(cfg.shifts), cfg.workers)
    grid = [r for r, _ in results]
    samples = [s for _, ss in results for s in ss]
    report = Report("exp_shift", tables={"grid": grid, "samples": samples})
    report.summary = {"config": _report_config(cfg), "grid": grid}
    if write:
        report.write(cfg.out_dir)
    return report


def experiment_velocity_warp(cfg: ExperimentConfig, write: bool = True) -> Report:
    """Fixed-N against fixed-tau frames on speed-varied queries.

    For each speed scale and N, tau is set to the mean fixed-N frame duration
    over both traverses; both regimes share the pixel subsets (selected on
    the reference fixed-N frames) and all other settings.
    """
    cfg.validate()
    if cfg.n_events < 1:
        raise ConfigError("exp-velocity needs n_events (fixed N) >= 1")
    n_values = [cfg.n_events] + [n for n in cfg.n_sweep if n != cfg.n_events]
    scales = cfg.speed_scales if not cfg.uses_files else [1.0]
    rows, samples = [], []
    for scale in scales:
        tr = load_traverses(cfg, query_scale=scale)
        ref, qry, mask = clean_traverses(cfg, tr)
        for n in n_values:
            rf = build_frames_fixed_count(ref, n)
            qf = build_frames_fixed_count(qry, n)
            if min(len(rf), len(qf)) < cfg.L or len(rf) < 2:
                raise TooFewFrames(
                    f"N={n} leaves {len(rf)} reference / {len(qf)} query frames; need at least L={cfg.L}"
                )
            tau = int(round(float(np.concatenate([rf.durations, qf.durations]).mean())))
            rft = build_frames_fixed_time(ref, tau).drop_partial()
            qft = build_frames_fixed_time(qry, tau).drop_partial()
            if min(len(rft), len(qft)) < cfg.L:
                raise TooFewFrames(f"tau={tau} us leaves fewer than L={cfg.L} frames")
            prep_n = Prepared(rf, qf, mask, ground_truth(cfg, tr, rf, qf))
            prep_t = Prepared(rft, qft, mask, ground_truth(cfg, tr, rft, qft))
            fixed_n, fixed_t = [], []
            for t in range(cfg.trials):
                px = choose_pixels(prep_n, cfg.strategy, cfg.J, cfg.sigma, cfg.seed + t)
                pn = pr_curve(match_sparse(prep_n, px, cfg.L, cfg.sequence_mode)[1], prep_n.gt).p_at_100r
                pt = pr_curve(match_sparse(prep_t, px, cfg.L, cfg.sequence_mode)[1], prep_t.gt).p_at_100r
                fixed_n.append(pn)
                fixed_t.append(pt)
                samples.append({"speed_scale": scale, "N": n, "tau_us": tau, "seed": cfg.seed + t,
                                "fixed_n_p_at_100r": pn, "fixed_tau_p_at_100r": pt})
            row = {"speed_scale": scale, "N": n, "tau_us": tau,
                   "n_ref_frames_fixed_n": len(rf), "n_query_frames_fixed_n": len(qf),
                   "n_ref_frames_fixed_tau": len(rft), "n_query_frames_fixed_tau": len(qft)}
            row["fixed_n_mean"], row["fixed_n_std"] = _mean_std(fixed_n)
            row["fixed_tau_mean"], row["fixed_tau_std"] = _mean_std(fixed_t)
            rows.append(row)
    report = Report("exp_velocity", tables={"summary": rows, "samples": samples})
    report.summary = {"config": _report_config(cfg), "points": rows}
    if write:
        report.write(cfg.out_dir)
    return report


def bench_runtime(cfg: ExperimentConfig, write: bool = True) -> Report:
    """Time one query row of sparse vs all-pixel SAD on a random frame fixture.

    Reference descriptors and reference frames are precomputed (they form
    the database); each timed run reads the query descriptor from its frame
    and computes distances to every reference frame.
    """
    if cfg.bench_frames < 1 or cfg.bench_runs < 1:
        raise ConfigError("bench_frames and bench_runs must be >= 1")
    W, H = cfg.bench_width, cfg.bench_height
    n_pix = W * H
    J = min(cfg.J, n_pix)
    rng = np.random.default_rng(cfg.seed)
    frames = rng.poisson(0.5, size=(cfg.bench_frames, n_pix)).astype(np.int32)
    pixels = PixelSet.all_pixels(W, H) if J == n_pix else select_random_pixels(W, H, J, cfg.seed)
    flat_idx = (pixels.v * W + pixels.u).astype(np.intp)
    ref_desc = frames[:, flat_idx].astype(np.int64)
    query = frames[0]

    def sparse_row():
        q = query[flat_idx].astype(np.int64)
        return np.abs(ref_desc - q).sum(axis=1)

    def dense_row():
        return dense_sad_row(query, frames)

    if J == n_pix and not np.array_equal(sparse_row(), dense_row()):
        raise RuntimeError("sparse and dense rows disagree on the full pixel set")
    sparse_t, dense_t = [], []
    for _ in range(cfg.bench_runs):
        t0 = time.perf_counter()
        sparse_row()
        sparse_t.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        dense_row()
        dense_t.append(time.perf_counter() - t0)
    s_med, d_med = statistics.median(sparse_t), statistics.median(dense_t)
    report = Report("bench")
    report.summary = {"J": J, "n_pixels": n_pix, "n_frames": cfg.bench_frames, "runs": cfg.bench_runs}
    report.timing = {"sparse_median_s": s_med, "dense_median_s": d_med, "speedup": d_med / s_med,
                     "sparse_runs_s": sparse_t, "dense_runs_s": dense_t}
    if cfg.bench_frames == 1:
        report.warnings.append("single-frame fixture: timings are near timer resolution")
    if write:
        report.write(cfg.out_dir)
    return report
