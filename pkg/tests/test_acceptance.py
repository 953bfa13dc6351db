"""Acceptance suite: one test per criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per
criterion in the terminal summary.
"""

import os
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from oracles import bucket_fixed_count, bucket_fixed_time, ordered_draw_probs, pr_recount, series_of
from sparsevpr.evaluate import GroundTruth, pr_curve
from sparsevpr.events import EventStream, build_frames_fixed_count, build_frames_fixed_time
from sparsevpr.harness import (
    ExperimentConfig,
    bench_runtime,
    experiment_pixel_shift,
    experiment_selection_compare,
    experiment_velocity_warp,
    run_pipeline,
)
from sparsevpr.match import DistanceMatrix, dense_sad_matrix, sad_distance
from sparsevpr.selection import SelectionPmf, select_pixels, variance_map
from sparsevpr.synth import synth_generate
from worlds import WARP_N, WARP_SCALE, WARP_WORLD, planted_config, shift_config, warp_config

criterion = pytest.mark.criterion


def dense_from_cells(n_frames, cells, H, W):
    out = np.zeros((n_frames, H, W), dtype=np.int64)
    for (k, v, u), c in cells.items():
        out[k, v, u] = c
    return out


@criterion(1, "frame builders match brute-force bucketing on 100 random streams")
def test_frame_builder_oracle(record_property):
    rng = np.random.default_rng(2024)
    spent = 0.0
    n_events = 0
    for i in range(100):
        W, H = int(rng.integers(1, 65)), int(rng.integers(1, 49))
        n = int(rng.integers(1, 50_001))
        t = np.sort(rng.integers(0, int(rng.integers(1, 10**8)), size=n))
        s = EventStream(t, rng.integers(0, W, n), rng.integers(0, H, n), rng.choice([-1, 1], n), W, H)
        n_events += n
        # aim for at most about 50 frames in either regime
        tau = max(1, int(t[-1] - t[0] + 1) // int(rng.integers(1, 51)))
        t0 = int(t[0]) - int(rng.integers(0, tau)) if i % 2 else None
        N = max(1, n // int(rng.integers(1, 51)))

        start = time.perf_counter()
        ft = build_frames_fixed_time(s, tau, t0=t0)
        fn = build_frames_fixed_count(s, N)
        spent += time.perf_counter() - start

        k, cells = bucket_fixed_time(t.tolist(), s.u.tolist(), s.v.tolist(), tau,
                                     int(t[0]) if t0 is None else t0, int(t[-1]) + 1)
        assert len(ft) == k
        assert np.array_equal(ft.counts, dense_from_cells(k, cells, H, W)), f"fixed-tau stream {i}"
        k, cells = bucket_fixed_count(s.u.tolist(), s.v.tolist(), N)
        assert len(fn) == k and fn.remainder == n - k * N
        assert np.array_equal(fn.counts, dense_from_cells(k, cells, H, W)), f"fixed-N stream {i}"
    record_property("detail", f"{n_events} events, builders took {spent:.2f} s")
    assert spent < 10.0


@criterion(2, "sampler frequencies match exhaustive enumeration (5x5, J=3, sigma=2, 100k runs)")
def test_sampler_matches_enumeration(record_property):
    W = H = 5
    J, sigma, runs = 3, 2.0, 100_000
    w = np.random.default_rng(7).uniform(0.1, 1.0, size=(H, W))
    pmf = SelectionPmf(w / w.sum())
    probs = ordered_draw_probs(pmf.p.ravel().tolist(), W, J, sigma)
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)

    start = time.perf_counter()
    seen = Counter(tuple(v * W + u for u, v in select_pixels(pmf, J, sigma, seed).pixels) for seed in range(runs))
    spent = time.perf_counter() - start
    assert set(seen) <= set(probs)

    keys = sorted(probs)
    observed = np.array([seen[k] for k in keys], dtype=float)
    expected = np.array([probs[k] for k in keys]) * runs
    max_diff = float(np.max(np.abs(observed - expected)) / runs)
    # pool sparse cells so the chi-square approximation holds
    small = expected < 5
    obs = np.append(observed[~small], observed[small].sum())
    exp = np.append(expected[~small], expected[small].sum())
    p = stats.chisquare(obs, exp).pvalue
    record_property("detail", f"chi2 p={p:.3f} over {len(obs)} cells, max |diff|={max_diff:.5f}, {spent:.1f} s")
    assert p > 0.01
    assert max_diff <= 0.01
    assert spent < 60.0


@criterion(3, "variance and SAD hand cases")
def test_hand_cases(record_property):
    counts = np.array([2, 4, 6]).reshape(3, 1, 1)
    S = variance_map(series_of(counts)).S[0, 0]
    sad = sad_distance([3, 0, 5], [1, 2, 5])
    record_property("detail", f"variance={float(S)!r} SAD={sad}")
    assert S == 8 / 3
    assert sad == 4


@criterion(4, "velocity invariance of fixed-N frames under a 1.7x time warp")
def test_velocity_invariance(record_property):
    ref, _ = synth_generate(WARP_WORLD, 1.0, 1)
    warped, _ = synth_generate(WARP_WORLD, WARP_SCALE, 1)
    a = build_frames_fixed_count(ref, WARP_N)
    b = build_frames_fixed_count(warped, WARP_N)
    assert np.array_equal(a.counts, b.counts)
    D = dense_sad_matrix(b, a).D
    assert np.all(np.diag(D) == 0)

    report = experiment_velocity_warp(warp_config(trials=5), write=False)
    (row,) = report.summary["points"]
    samples = report.tables["samples"]
    record_property("detail", f"fixed-N {row['fixed_n_mean']:.3f}, fixed-tau {row['fixed_tau_mean']:.3f}"
                              f"+-{row['fixed_tau_std']:.3f}")
    assert all(s["fixed_n_p_at_100r"] == 1.0 for s in samples)
    assert row["fixed_tau_mean"] <= 0.7


@criterion(5, "variance selection beats random by >= 0.15 P@100R on the planted world")
def test_selection_advantage(record_property):
    start = time.perf_counter()
    report = experiment_selection_compare(planted_config(trials=5), write=False)
    spent = time.perf_counter() - start
    means = {r["strategy"]: r["p_at_100r_mean"] for r in report.summary["points"]}
    record_property("detail", f"variance {means['variance']:.3f} vs random {means['random']:.3f}, {spent:.1f} s")
    assert means["variance"] - means["random"] >= 0.15
    assert spent < 120.0


@criterion(6, "P@100R decays monotonically with horizontal pixel shift")
def test_pixel_shift_decay(record_property):
    report = experiment_pixel_shift(shift_config(trials=5), write=False)
    grid = {r["du"]: r for r in report.summary["grid"]}
    mean = {du: r["sparse_p_at_100r_mean"] for du, r in grid.items()}
    std = {du: r["sparse_p_at_100r_std"] for du, r in grid.items()}
    violations = []
    for sign in (1, -1):
        for d in range(10):
            a, b = sign * d, sign * (d + 1)
            if mean[b] > mean[a] + std[b]:
                violations.append((a, b))
    curve = " ".join(f"{mean[du]:.2f}" for du in sorted(mean))
    record_property("detail", f"P@100R over du=-10..10: {curve}")
    assert mean[0] == 1.0
    assert not violations, violations


@criterion(7, "PR curve and summary metrics equal an exhaustive recount")
def test_pr_metric_oracle(record_property):
    rng = np.random.default_rng(99)
    n = 200
    for i in range(n):
        # small integer range so ties in the best score are common
        D = rng.integers(0, 8, size=(10, 10))
        correct = rng.random((10, 10)) < rng.uniform(0.05, 0.5)
        c = pr_curve(DistanceMatrix(D), GroundTruth(correct, 0.0))
        oracle = pr_recount(D.tolist(), correct.tolist())
        assert [tuple(p) for p in c.points] == oracle, f"matrix {i}"
        assert c.p_at_100r == oracle[-1][1]
        assert c.r_at_99p == max([r for _, p, r, *_ in oracle if p >= 0.99], default=0.0)
    record_property("detail", f"{n} matrices")


@criterion(8, "sparse J=150 distances at least 20x faster than all-pixel SAD")
def test_runtime_speedup(record_property):
    report = bench_runtime(ExperimentConfig(), write=False)
    speedup = report.timing["speedup"]
    record_property("detail", f"speedup {speedup:.0f}x (median of {report.summary['runs']} runs, "
                              f"{report.summary['n_frames']} frames)")
    assert report.summary["J"] == 150 and report.summary["n_pixels"] == 89_960
    assert speedup >= 20


DATA_DIR = os.environ.get("SPARSEVPR_BRISBANE_DIR", "")
DATA_FILES = ["sunset1.bin", "morning.bin", "sunset1_poses.csv", "morning_poses.csv"]


@criterion(9, "Brisbane-Event-VPR Sunset1 -> Morning: sparse within 10 points of dense")
@pytest.mark.skipif(not DATA_DIR or not all((Path(DATA_DIR) / f).exists() for f in DATA_FILES),
                    reason="set SPARSEVPR_BRISBANE_DIR to a directory holding " + ", ".join(DATA_FILES))
def test_brisbane_sparse_vs_dense(record_property):
    root = Path(DATA_DIR)
    cfg = ExperimentConfig(reference=str(root / "sunset1.bin"), query=str(root / "morning.bin"),
                           reference_poses=str(root / "sunset1_poses.csv"),
                           query_poses=str(root / "morning_poses.csv"),
                           tau_us=1_000_000, J=150, L=5, tolerance=70.0, dense=True, preprocess=True)
    s = run_pipeline(cfg, write=False).summary
    sparse, dense = s["sparse"]["p_at_100r"], s["dense"]["p_at_100r"]
    record_property("detail", f"sparse {sparse:.3f} vs dense {dense:.3f}")
    assert sparse >= dense - 0.10
