import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import LineString, Point

from hybridloc.localizer import PositionEstimate
from hybridloc.metrics import (
    ReferencePath,
    distance_to_polyline,
    ecdf,
    ecdf_at,
    lower_quantile,
    save_stats,
    trajectory_error,
    write_ecdf_table,
)

L_PATH = ReferencePath([(0, 0), (10, 0), (10, 5)])
coord = st.floats(-50, 50, allow_nan=False)


def test_hand_distances():
    d = distance_to_polyline([(5, 2), (12, 0), (10, 2.5), (0, 0)], L_PATH.waypoints)
    assert d.tolist() == [2.0, 2.0, 0.0, 0.0]


@settings(max_examples=300, deadline=None)
@given(coord, coord)
def test_matches_shapely_oracle(x, y):
    wp = [(0, 0), (3, 4), (-2, 7), (-2, -1)]
    got = distance_to_polyline([(x, y)], wp)[0]
    assert got == pytest.approx(LineString(wp).distance(Point(x, y)), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1))
def test_points_on_path_have_zero_error(frac):
    pt = LineString(L_PATH.waypoints).interpolate(frac, normalized=True)
    assert distance_to_polyline([(pt.x, pt.y)], L_PATH.waypoints)[0] <= 1e-12


@settings(max_examples=100, deadline=None)
@given(coord, coord, coord, coord)
def test_translation_invariant(x, y, dx, dy):
    moved = [(a + dx, b + dy) for a, b in L_PATH.waypoints]
    base = distance_to_polyline([(x, y)], L_PATH.waypoints)[0]
    shifted = distance_to_polyline([(x + dx, y + dy)], moved)[0]
    assert shifted == pytest.approx(base, abs=1e-9)


class TestEcdf:
    def test_hand_values(self):
        table = ecdf([3.0, 1.0, 2.0])
        assert table == [(1.0, 1 / 3), (2.0, 2 / 3), (3.0, 1.0)]
        assert ecdf_at(table, 2.0) == pytest.approx(2 / 3)
        assert ecdf_at(table, 0.5) == 0.0
        assert ecdf_at(table, 1.999) == pytest.approx(1 / 3)
        assert ecdf_at(table, 99.0) == 1.0

    def test_all_equal(self):
        assert ecdf([0.4] * 7) == [(0.4, 1.0)]

    @settings(max_examples=100)
    @given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=200))
    def test_monotone_ending_at_one(self, errors):
        table = ecdf(errors)
        values, fracs = zip(*table)
        assert all(a < b for a, b in zip(values, values[1:]))
        assert all(a < b for a, b in zip(fracs, fracs[1:]))
        assert fracs[-1] == 1.0
        for v, f in table:
            assert f == pytest.approx(np.mean(np.asarray(errors) <= v))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ecdf([])


def test_lower_median():
    assert lower_quantile([4.0, 1.0, 3.0, 2.0], 0.5) == 2.0
    assert lower_quantile([5.0, 1.0, 3.0], 0.5) == 3.0


def test_trajectory_error_stats():
    est = [PositionEstimate(float(i), p) for i, p in enumerate([(5, 2), (12, 0), (10, 2.5), (1, -1)])]
    stats = trajectory_error(est, L_PATH)
    assert stats.errors.tolist() == [2.0, 2.0, 0.0, 1.0]
    assert stats.median == 1.0
    assert stats.max == 2.0
    assert stats.mean == 1.25
    assert stats.ecdf[-1] == (2.0, 1.0)
    assert trajectory_error([(5, 2)], L_PATH).median == 2.0


def test_trajectory_error_rejects_empty():
    with pytest.raises(ValueError):
        trajectory_error([], L_PATH)


def test_reference_path_validation(tmp_path):
    with pytest.raises(ValueError):
        ReferencePath([(0, 0)])
    with pytest.raises(ValueError):
        ReferencePath([(0, 0), (0, 0), (1, 1)])
    path = tmp_path / "ref.json"
    path.write_text('{"waypoints": [[0, 0], [1, 0]]}')
    assert ReferencePath.load(path).waypoints == ((0.0, 0.0), (1.0, 0.0))


def test_outputs_written(tmp_path):
    stats = trajectory_error([(5, 2), (1, 0.5)], L_PATH)
    write_ecdf_table(stats.ecdf, tmp_path / "ecdf.tsv")
    lines = (tmp_path / "ecdf.tsv").read_text().splitlines()
    assert lines == ["# error_m\tfraction", "0.5\t0.5", "2.0\t1.0"]
    save_stats(stats, tmp_path / "stats.json", {"k": 5})
    doc = json.loads((tmp_path / "stats.json").read_text())
    assert doc["median"] == 0.5 and doc["max"] == 2.0 and doc["count"] == 2 and doc["meta"] == {"k": 5}
