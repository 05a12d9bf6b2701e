import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import MultiPoint, Point

from hybridloc.calibration import RssMeasurement
from hybridloc.localizer import (
    InsufficientOverlapError,
    LocalizerConfig,
    NoEligiblePointsError,
    PositionEstimate,
    localize,
    map_distances,
    signature_distance,
    smooth,
)
from hybridloc.radiomap import RadioMap, RadioMapPoint


def make_map(positions, levels, anchors):
    return RadioMap(
        spacing=1.0,
        anchor_ids=list(anchors),
        positions=np.asarray(positions, dtype=float),
        room_ids=["r"] * len(positions),
        levels=np.asarray(levels, dtype=float),
        provenance={},
    )


def random_map(rng, n_points, n_anchors, integer=False):
    anchors = [f"A{i}" for i in range(n_anchors)]
    pos = rng.uniform(0, 10, (n_points, 2))
    lv = rng.uniform(-95, -35, (n_points, n_anchors))
    if integer:
        lv = np.round(lv)
    return make_map(pos, lv, anchors)


class TestSignatureDistance:
    def test_identical(self):
        meas = RssMeasurement(0, {"A": -50.0, "B": -60.0})
        assert signature_distance(meas, RadioMapPoint((0, 0), "r", {"A": -50.0, "B": -60.0})) == 0.0

    def test_hand_value(self):
        meas = RssMeasurement(0, {"A": -50.0, "B": -60.0})
        d = signature_distance(meas, RadioMapPoint((0, 0), "r", {"A": -54.0, "B": -57.0}))
        assert d == pytest.approx(math.sqrt(12.5), abs=1e-12)
        assert d == pytest.approx(3.5355339059327378, abs=1e-12)

    def test_single_common_anchor(self):
        meas = RssMeasurement(0, {"A": -50.0})
        point = RadioMapPoint((0, 0), "r", {"A": -47.0, "B": -60.0})
        assert signature_distance(meas, point, min_common_anchors=1) == 3.0
        with pytest.raises(InsufficientOverlapError):
            signature_distance(meas, point, min_common_anchors=2)

    def test_vectorized_matches_pointwise(self):
        rng = np.random.default_rng(0)
        rmap = random_map(rng, 50, 4)
        meas = RssMeasurement(0, {"A0": -60.0, "A2": -71.5, "A3": -44.0})
        vec = map_distances(meas, rmap, 2)
        for i, p in enumerate(rmap.points):
            assert vec[i] == pytest.approx(signature_distance(meas, p, 2), abs=1e-12)


class TestLocalize:
    def test_exact_match_k1(self):
        rng = np.random.default_rng(1)
        rmap = random_map(rng, 30, 4)
        target = rmap.point(17)
        est = localize(RssMeasurement(2.5, dict(target.predicted)), rmap, LocalizerConfig(k=1))
        assert est.position == target.position
        assert est.neighbor_ids == (17,)
        assert est.distances == (0.0,)
        assert est.timestamp == 2.5

    def test_exact_match_dominates_with_k5(self):
        rng = np.random.default_rng(2)
        rmap = random_map(rng, 30, 4)
        target = rmap.point(3)
        est = localize(RssMeasurement(0, dict(target.predicted)), rmap)
        assert est.position == pytest.approx(target.position, abs=1e-6)

    def test_inverse_distance_weighting(self):
        rmap = make_map([(0, 0), (4, 0), (9, 9)], [[-51.0], [-53.0], [-70.0]], ["A"])
        est = localize(RssMeasurement(0, {"A": -50.0}), rmap, LocalizerConfig(k=2, min_common_anchors=1))
        assert est.distances == (1.0, 3.0)
        assert est.position[0] == pytest.approx(1.0, abs=1e-12)
        assert est.position[1] == pytest.approx(0.0, abs=1e-12)

    def test_equal_distances_give_centroid(self):
        rmap = make_map([(0, 0), (2, 2), (9, 0)], [[-52.0], [-48.0], [-80.0]], ["A"])
        est = localize(RssMeasurement(0, {"A": -50.0}), rmap, LocalizerConfig(k=2, min_common_anchors=1))
        assert est.position == pytest.approx((1.0, 1.0), abs=1e-12)

    def test_tie_at_kth_neighbor_goes_to_earlier_point(self):
        rmap = make_map([(0, 0), (5, 5), (1, 1)], [[-50.0], [-52.0], [-48.0]], ["A"])
        est = localize(RssMeasurement(0, {"A": -50.0}), rmap, LocalizerConfig(k=2, min_common_anchors=1))
        assert est.neighbor_ids == (0, 1)

    def test_no_eligible_points(self):
        rmap = make_map([(0, 0)], [[-50.0, -60.0]], ["A", "B"])
        with pytest.raises(NoEligiblePointsError):
            localize(RssMeasurement(0, {"A": -50.0}), rmap)
        with pytest.raises(NoEligiblePointsError):
            localize(RssMeasurement(0, {"A": -50.0}), make_map(np.zeros((0, 2)), np.zeros((0, 2)), ["A", "B"]))

    def test_unknown_anchor_rejected(self):
        rmap = make_map([(0, 0)], [[-50.0, -60.0]], ["A", "B"])
        with pytest.raises(ValueError):
            localize(RssMeasurement(0, {"A": -50.0, "Q": -1.0}), rmap)

    def test_missing_anchor_renormalizes(self):
        rmap = make_map([(0, 0), (1, 0)], [[-50.0, -60.0, -70.0], [-40.0, -60.0, -90.0]], ["A", "B", "C"])
        meas = RssMeasurement(0, {"A": -50.0, "B": -62.0})
        assert map_distances(meas, rmap).tolist() == pytest.approx([math.sqrt(2.0), math.sqrt(52.0)])

    def test_config_validation(self):
        for bad in ({"k": 0}, {"smoothing_window": 0}, {"distance_epsilon": 0.0}, {"min_common_anchors": 0}):
            with pytest.raises(ValueError):
                LocalizerConfig(**bad)


def brute_force_neighbors(meas, rmap, k, min_common):
    scored = []
    for i, p in enumerate(rmap.points):
        try:
            scored.append((signature_distance(meas, p, min_common), i))
        except InsufficientOverlapError:
            continue
    scored.sort()
    return [i for _, i in scored[:k]]


def test_neighbor_selection_matches_full_sort_oracle():
    rng = np.random.default_rng(123)
    for trial in range(1000):
        rmap = random_map(rng, int(rng.integers(5, 60)), 4, integer=trial % 2 == 0)
        k = int(rng.integers(1, 8))
        anchors = [a for a in rmap.anchor_ids if rng.random() < 0.8] or ["A0"]
        meas = RssMeasurement(0, {a: float(np.round(rng.uniform(-90, -40))) for a in anchors})
        min_common = 1 if len(anchors) < 2 else 2
        est = localize(meas, rmap, LocalizerConfig(k=k, min_common_anchors=min_common))
        assert list(est.neighbor_ids) == brute_force_neighbors(meas, rmap, k, min_common)
        assert list(est.distances) == sorted(est.distances)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_estimate_in_convex_hull_of_neighbors(seed, k):
    rng = np.random.default_rng(seed)
    rmap = random_map(rng, 40, 4)
    meas = RssMeasurement(0, {a: float(rng.uniform(-90, -40)) for a in rmap.anchor_ids})
    est = localize(meas, rmap, LocalizerConfig(k=k))
    hull = MultiPoint([tuple(rmap.positions[i]) for i in est.neighbor_ids]).convex_hull
    assert hull.distance(Point(est.position)) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_anchor_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    rmap = random_map(rng, 40, 5)
    meas = RssMeasurement(0, {a: float(rng.uniform(-90, -40)) for a in rmap.anchor_ids if rng.random() < 0.9})
    perm = rng.permutation(len(rmap.anchor_ids))
    permuted = make_map(rmap.positions, rmap.levels[:, perm], [rmap.anchor_ids[i] for i in perm])
    meas_perm = RssMeasurement(0, dict(reversed(list(meas.levels.items()))))
    if len(meas.levels) < 2:
        return
    a, b = localize(meas, rmap), localize(meas_perm, permuted)
    d_a, d_b = map_distances(meas, rmap), map_distances(meas_perm, permuted)
    assert np.allclose(d_a, d_b, rtol=0, atol=1e-12)
    assert a.position == pytest.approx(b.position, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-30, 30))
def test_constant_offset_leaves_distance_unchanged(seed, c):
    rng = np.random.default_rng(seed)
    rmap = random_map(rng, 30, 4, integer=True)
    meas = RssMeasurement(0, {a: float(np.round(rng.uniform(-90, -40))) for a in rmap.anchor_ids})
    shifted_map = make_map(rmap.positions, rmap.levels + c, rmap.anchor_ids)
    shifted_meas = RssMeasurement(0, {a: v + c for a, v in meas.levels.items()})
    # integer-valued levels keep the shifted differences exact
    assert np.array_equal(map_distances(meas, rmap), map_distances(shifted_meas, shifted_map))


def test_k1_returns_argmin_point():
    rng = np.random.default_rng(9)
    for _ in range(100):
        rmap = random_map(rng, 25, 3)
        meas = RssMeasurement(0, {a: float(rng.uniform(-90, -40)) for a in rmap.anchor_ids})
        best = int(np.argmin(map_distances(meas, rmap)))
        est = localize(meas, rmap, LocalizerConfig(k=1))
        assert est.neighbor_ids == (best,)
        assert est.position == pytest.approx(tuple(rmap.positions[best]), abs=1e-12)


def _stream(xs, ys=None):
    ys = ys if ys is not None else [0.0] * len(xs)
    return [PositionEstimate(float(i), (float(x), float(y))) for i, (x, y) in enumerate(zip(xs, ys))]


class TestSmooth:
    def test_constant_unchanged(self):
        est = _stream([2.0] * 8, [3.0] * 8)
        assert [e.position for e in smooth(est, 5)] == [(2.0, 3.0)] * 8

    def test_window_one_is_identity(self):
        est = _stream([0.0, 5.0, 1.0, 7.0])
        assert smooth(est, 1) == est

    def test_trailing_mean(self):
        out = smooth(_stream([0.0, 3.0, 6.0]), 3)
        assert [e.position[0] for e in out] == [0.0, 1.5, 3.0]

    def test_timestamps_and_length_preserved(self):
        est = _stream(list(range(12)))
        out = smooth(est, 5)
        assert len(out) == len(est)
        assert [e.timestamp for e in out] == [e.timestamp for e in est]
        assert out[-1].position[0] == pytest.approx(np.mean(range(7, 12)))

    def test_rejects_bad_window(self):
        with pytest.raises(ValueError):
            smooth(_stream([1.0]), 0)

    @settings(max_examples=100)
    @given(
        st.lists(st.tuples(st.integers(-100, 100), st.integers(-100, 100)), min_size=1, max_size=30),
        st.integers(1, 7),
    )
    def test_linear(self, pairs, window):
        a = _stream([p[0] for p in pairs], [p[1] for p in pairs])
        b = _stream([p[1] for p in pairs], [p[0] for p in pairs])
        total = _stream([p[0] + p[1] for p in pairs], [p[1] + p[0] for p in pairs])
        sa, sb, st_ = smooth(a, window), smooth(b, window), smooth(total, window)
        for x, y, z in zip(sa, sb, st_):
            assert z.position == pytest.approx((x.position[0] + y.position[0], x.position[1] + y.position[1]), abs=1e-9)
