"""Command-line entry point: ``sparsevpr <command> [--config FILE] [--key value ...]``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import ConfigError, DataError
from .evaluate import pr_curve
from .events import read_events, write_events
from .harness import ExperimentConfig, atomic_write
from .match import DistanceMatrix, sequence_convolve
from .preprocess import PixelMask, detect_hot_pixels, remove_bursts
from .selection import PixelSet
from .synth import synth_generate

logger = logging.getLogger("sparsevpr")

EXIT_CONFIG = 2
EXIT_DATA = 3


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    group = p.add_argument_group("config keys (override the config file)")
    for key in ExperimentConfig.keys():
        names = [f"--{key}"]
        if "_" in key:
            names.append(f"--{key.replace('_', '-')}")
        group.add_argument(*names, dest=f"cfg:{key}", default=argparse.SUPPRESS, metavar="VALUE")


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg:")}
    return ExperimentConfig.from_mapping(overrides, base=cfg)


def _input(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"input file not found: {p}")
    return p


def cmd_convert(args) -> None:
    stream = read_events(_input(args.input), args.width, args.height, args.slack_us)
    write_events(args.output, stream)
    logger.info("wrote %d events to %s", len(stream), args.output)


def cmd_preprocess(args) -> None:
    stream = read_events(_input(args.input), args.width, args.height)
    stream = remove_bursts(stream, args.burst_bin_us, args.burst_ratio)
    if args.mask:
        mask = PixelMask.load(_input(args.mask), stream.width, stream.height)
    else:
        mask = detect_hot_pixels(stream, args.hot_pixel_sigma)
    write_events(args.output, mask.apply(stream))
    if args.mask_out:
        mask.save(args.mask_out)
    logger.info("masked %d pixels", len(mask))


def cmd_select(args) -> None:
    cfg = _config(args)
    cfg.validate(need_query=False)
    tr = harness.Traverses(*_reference_only(cfg))
    ref, _, mask = harness.clean_traverses(cfg, tr)
    frames = harness.make_frames(cfg, ref)
    prep = harness.Prepared(frames, frames, mask, None)
    pixels = harness.choose_pixels(prep, cfg.strategy, cfg.J, cfg.sigma, cfg.seed)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "pixels.csv", pixels.to_csv())
    if prep.varmap is not None:
        atomic_write(out / "variance.csv", prep.varmap.to_csv())
    atomic_write(out / "mask.csv", mask.to_csv())


def _reference_only(cfg: ExperimentConfig):
    if cfg.uses_files:
        ref = read_events(cfg.reference, cfg.width, cfg.height, cfg.slack_us)
        return ref, ref, None, None
    ref, track = synth_generate(cfg.synth, 1.0, cfg.ref_traverse)
    return ref, ref, track, track


def cmd_match(args) -> None:
    cfg = _config(args)
    cfg.validate()
    prep = harness.prepare(cfg)
    pixels = PixelSet.load(cfg.pixels) if cfg.pixels else harness.choose_pixels(prep, cfg.strategy, cfg.J, cfg.sigma, cfg.seed)
    raw, seq = harness.match_sparse(prep, pixels, cfg.L, cfg.sequence_mode)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, dm in (("distance_raw", raw), ("distance_seq", seq)):
        atomic_write(out / f"{name}.dmat", dm.to_bytes())
        atomic_write(out / f"{name}.csv", dm.to_csv())
    atomic_write(out / "pixels.csv", pixels.to_csv())
    if cfg.dense:
        draw, dseq = harness.match_dense(prep, cfg.L, cfg.sequence_mode)
        atomic_write(out / "dense_raw.dmat", draw.to_bytes())
        atomic_write(out / "dense_seq.dmat", dseq.to_bytes())


def cmd_eval(args) -> None:
    cfg = _config(args)
    cfg.validate()
    dm = DistanceMatrix.load(_input(args.dmat))
    if args.raw:
        dm = sequence_convolve(dm, cfg.L, cfg.sequence_mode)
    prep = harness.prepare(cfg)
    curve = pr_curve(dm, prep.gt)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "pr.csv", curve.to_csv())
    atomic_write(out / "pr_summary.json", json.dumps(curve.summary(), indent=2, sort_keys=True) + "\n")
    print(json.dumps(curve.summary(), sort_keys=True))


def cmd_synth(args) -> None:
    cfg = _config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ref, rt = synth_generate(cfg.synth, 1.0, cfg.ref_traverse)
    qry, qt = synth_generate(cfg.synth, cfg.query_speed_scale, cfg.query_traverse)
    ext = args.format
    write_events(out / f"reference.{ext}", ref)
    write_events(out / f"query.{ext}", qry)
    rt.save(out / "reference_poses.csv")
    qt.save(out / "query_poses.csv")
    logger.info("reference %d events, query %d events", len(ref), len(qry))


def _experiment(fn):
    def run(args) -> None:
        report = fn(_config(args))
        print(report.to_json(include_timing=True), end="")

    return run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsevpr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert event files between CSV and binary")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--width", type=int, default=346)
    p.add_argument("--height", type=int, default=260)
    p.add_argument("--slack_us", "--slack-us", type=int, default=0)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("preprocess", help="remove bursts and hot pixels from an event file")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--width", type=int, default=346)
    p.add_argument("--height", type=int, default=260)
    p.add_argument("--hot_pixel_sigma", "--hot-pixel-sigma", type=float, default=5.0)
    p.add_argument("--burst_bin_us", "--burst-bin-us", type=int, default=1000)
    p.add_argument("--burst_ratio", "--burst-ratio", type=float, default=10.0)
    p.add_argument("--mask", help="apply this mask CSV instead of detecting one")
    p.add_argument("--mask_out", "--mask-out", help="write the mask CSV here")
    p.set_defaults(func=cmd_preprocess)

    for name, func, help in (
        ("select", cmd_select, "select sparse pixels on the reference traverse"),
        ("match", cmd_match, "compute raw and sequence distance matrices"),
        ("run", _experiment(harness.run_pipeline), "full pipeline with PR evaluation"),
        ("synth", cmd_synth, "write a synthetic reference/query pair"),
        ("exp-select", _experiment(harness.experiment_selection_compare), "selection strategy comparison"),
        ("exp-shift", _experiment(harness.experiment_pixel_shift), "pixel-shift robustness"),
        ("exp-velocity", _experiment(harness.experiment_velocity_warp), "fixed-N vs fixed-tau under speed change"),
        ("bench", _experiment(harness.bench_runtime), "sparse vs dense runtime"),
    ):
        p = sub.add_parser(name, help=help)
        _add_config_flags(p)
        if name == "synth":
            p.add_argument("--format", choices=("bin", "csv"), default="bin")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="PR curve for a stored distance matrix")
    p.add_argument("dmat", help="distance matrix (.dmat or .csv)")
    p.add_argument("--raw", action="store_true", help="apply sequence aggregation first")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
