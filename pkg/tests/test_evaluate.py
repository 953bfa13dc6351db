import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import pr_recount, series_of
from sparsevpr.errors import DimensionMismatch, TrackCoverageGap
from sparsevpr.evaluate import (
    GroundTruth,
    PRCurve,
    PRPoint,
    PoseTrack,
    associate_ground_truth,
    pr_curve,
    precision_at_100_recall,
    recall_at_99_precision,
)
from sparsevpr.match import DistanceMatrix


def frames_at(starts_us, tau_us):
    starts = np.asarray(starts_us, dtype=np.int64)
    s = series_of(np.zeros((len(starts), 1, 1), int), tau_us)
    return type(s)(s.counts, starts, starts + tau_us, s.regime)


def as_tuples(curve):
    return [tuple(p) for p in curve.points]


class TestPoseTrack:
    def test_interpolation(self):
        tr = PoseTrack([0, 10, 20], np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 5.0]]))
        np.testing.assert_allclose(tr.interpolate([5, 15]), [[5.0, 0.0], [10.0, 2.5]])

    def test_coverage_gap(self):
        tr = PoseTrack([0, 10], [0.0, 1.0])
        with pytest.raises(TrackCoverageGap):
            tr.interpolate([11])

    def test_strictly_increasing(self):
        with pytest.raises(ValueError):
            PoseTrack([0, 0], [0.0, 1.0])

    def test_csv_round_trip(self, tmp_path):
        xy = PoseTrack([0, 5, 9], np.array([[0.0, 1.5], [2.25, 3.0], [4.0, -1.0]]))
        xy.save(tmp_path / "xy.csv")
        assert (tmp_path / "xy.csv").read_text().splitlines()[0] == "t_us,x_m,y_m"
        back = PoseTrack.load(tmp_path / "xy.csv")
        assert np.array_equal(back.t, xy.t) and np.array_equal(back.pos, xy.pos)

        arc = PoseTrack([0, 1_000_000], [0.0, 12.5])
        assert arc.to_csv().splitlines()[0] == "t_us,s_m"
        assert np.array_equal(PoseTrack.from_csv(arc.to_csv()).pos, arc.pos)

    def test_latlon_projection(self):
        # 0.001 degrees of latitude is about 111 m anywhere
        tr = PoseTrack.from_latlon([0, 1], [-27.47, -27.469], [153.02, 153.02])
        assert tr.pos[1, 1] == pytest.approx(111.19, abs=0.05)
        assert tr.pos[1, 0] == pytest.approx(0.0, abs=1e-9)


class TestAssociate:
    def test_identical_tracks(self):
        tr = PoseTrack([0, 20_000_000], [0.0, 200.0])
        f = frames_at(np.arange(0, 20_000_000, 1_000_000), 1_000_000)
        gt = associate_ground_truth(tr, tr, f, f, 25.0)
        assert np.all(np.diag(gt.correct))
        assert gt.correct.sum() == GroundTruth.from_band(20, 20, 2).correct.sum()

    def test_zero_tolerance(self):
        tr = PoseTrack([0, 10_000_000], [0.0, 10.0])
        rf = frames_at([0, 2_000_000, 4_000_000], 1_000_000)
        qf = frames_at([2_000_000, 7_000_000], 1_000_000)
        gt = associate_ground_truth(tr, tr, rf, qf, 0.0)
        assert gt.correct.tolist() == [[False, True, False], [False, False, False]]

    def test_constant_velocity_band(self):
        # 1 m/s, 1 s frames, 3 m tolerance -> |j - k| <= 3
        tr = PoseTrack([0, 60_000_000], [0.0, 60.0])
        f = frames_at(np.arange(0, 59_000_000, 1_000_000), 1_000_000)
        gt = associate_ground_truth(tr, tr, f, f, 3.0)
        mid = (f.t_start + f.t_end) / 2e6
        oracle = [[abs(a - b) <= 3.0 for b in mid] for a in mid]
        assert gt.correct.tolist() == oracle
        assert np.array_equal(gt.correct, GroundTruth.from_band(59, 59, 3).correct)

    def test_coverage_gap(self):
        tr = PoseTrack([0, 1_000_000], [0.0, 1.0])
        f = frames_at([0, 1_000_000], 1_000_000)
        with pytest.raises(TrackCoverageGap):
            associate_ground_truth(tr, tr, f, f, 1.0)


class TestPRCurve:
    def test_perfect_matcher(self):
        D = np.full((5, 5), 10.0)
        np.fill_diagonal(D, np.arange(5))
        c = pr_curve(DistanceMatrix(D), GroundTruth.from_band(5, 5, 0))
        assert np.all(c.precision == 1.0)
        assert c.p_at_100r == 1.0 and c.r_at_99p == 1.0

    def test_all_wrong(self):
        D = np.ones((4, 4))
        np.fill_diagonal(D, 5.0)
        c = pr_curve(DistanceMatrix(D), GroundTruth.from_band(4, 4, 0))
        assert np.all(c.precision == 0.0)
        assert c.r_at_99p == 0.0 and c.p_at_100r == 0.0

    def test_four_query_hand_case(self):
        # queries 0, 1 match correctly with scores 1, 2; queries 2, 3 match wrongly with 3, 4
        D = np.full((4, 4), 9.0)
        for j, s in enumerate([1.0, 2.0, 3.0, 4.0]):
            D[j, j if j < 2 else (j + 1) % 4] = s
        c = pr_curve(DistanceMatrix(D), GroundTruth.from_band(4, 4, 0))
        at = {p.threshold: p for p in c.points}
        assert (at[2.0].precision, at[2.0].recall) == (1.0, 0.5)
        # fn counts rejected queries, so with every query accepted recall is 1
        assert (at[math.inf].precision, at[math.inf].recall) == (0.5, 1.0)
        assert (at[math.inf].tp, at[math.inf].fp, at[math.inf].fn) == (2, 2, 0)
        assert c.p_at_100r == 0.5
        assert c.r_at_99p == 0.5

    def test_half_correct(self):
        D = np.array([[0.0, 1.0], [0.0, 1.0]])
        assert precision_at_100_recall(pr_curve(DistanceMatrix(D), GroundTruth.from_band(2, 2, 0))) == 0.5

    def test_random_matcher_expectation(self):
        # each query has exactly 5 correct references out of 100
        rng = np.random.default_rng(0)
        Q, R, m = 4000, 100, 5
        correct = np.zeros((Q, R), bool)
        for j in range(Q):
            correct[j, rng.choice(R, m, replace=False)] = True
        D = rng.random((Q, R))
        p = pr_curve(DistanceMatrix(D), GroundTruth(correct, 0.0)).p_at_100r
        se = math.sqrt(0.05 * 0.95 / Q)
        assert abs(p - m / R) < 4 * se

    def test_recall_at_99_hand_curve(self):
        pts = [PRPoint(1.0, 1.0, 0.3, 3, 0, 7), PRPoint(2.0, 0.95, 0.6, 6, 1, 3)]
        assert recall_at_99_precision(PRCurve(pts, 0.0, 0.0, 10)) == 0.3
        assert recall_at_99_precision(PRCurve(pts[1:], 0.0, 0.0, 10)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            pr_curve(DistanceMatrix(np.zeros((3, 4))), GroundTruth.from_band(4, 3, 1))

    def test_exports(self, tmp_path):
        D = np.random.default_rng(1).integers(0, 9, size=(6, 6))
        c = pr_curve(DistanceMatrix(D), GroundTruth.from_band(6, 6, 1))
        c.save(tmp_path / "pr.csv", tmp_path / "pr.json")
        lines = (tmp_path / "pr.csv").read_text().splitlines()
        assert lines[0] == "threshold,precision,recall,tp,fp,fn"
        assert len(lines) == len(c.points) + 1
        assert lines[-1].startswith("inf,")
        summary = json.loads((tmp_path / "pr.json").read_text())
        assert summary == {"p_at_100r": c.p_at_100r, "r_at_99p": c.r_at_99p, "n_queries": 6}

    @given(
        arrays(np.int64, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.integers(0, 6)),
        st.integers(0, 2**32 - 1),
    )
    def test_recount_oracle_and_invariants(self, D, seed):
        correct = np.random.default_rng(seed).random(D.shape) < 0.4
        c = pr_curve(DistanceMatrix(D), GroundTruth(correct, 0.0))
        assert as_tuples(c) == pr_recount(D.tolist(), correct.tolist())
        assert np.all(np.diff(c.recall) >= 0)
        for p in c.points:
            assert p.tp + p.fp + p.fn == D.shape[0]
            assert p.precision == p.tp / (p.tp + p.fp)

    @given(
        arrays(np.int64, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.integers(0, 50)),
        st.sampled_from([0.5, 3.0, 7.25, 1000.0]),
    )
    def test_scale_invariance(self, D, scale):
        correct = np.eye(*D.shape, dtype=bool)
        a = pr_curve(DistanceMatrix(D), GroundTruth(correct, 0.0))
        b = pr_curve(DistanceMatrix(D * scale), GroundTruth(correct, 0.0))
        strip = lambda c: [p[1:] for p in c.points]  # noqa: E731
        assert strip(a) == strip(b)
        assert (a.p_at_100r, a.r_at_99p) == (b.p_at_100r, b.r_at_99p)
