import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weldid.detect import WeldEvent, cluster_detections, match_events
from weldid.exceptions import ConfigError, NotSorted
from weldid.preprocess import PipeTally


def ev(position):
    return WeldEvent(position, position, position, 1.0, 1)


def test_cluster_centroid():
    events = cluster_detections([(10.0, "S", 1.0), (10.1, "S", 1.0), (10.2, "S", 1.0)], 0.5)
    assert len(events) == 1
    assert events[0].position == pytest.approx(10.1)
    assert (events[0].first, events[0].last, events[0].n_records) == (10.0, 10.2, 3)


def test_cluster_empty_and_split():
    assert cluster_detections([(1.0, "N", 0.1), (2.0, "N", 0.2)], 0.5) == []
    preds = [(10.0, "S", 0.9), (10.2, "S", 0.8), (12.0, "N", 0.1),
             (15.0, "S", 0.7), (15.1, "S", 0.6)]
    events = cluster_detections(preds, 0.5)
    assert [round(e.position) for e in events] == [10, 15]


def test_cluster_weights_and_fallback():
    events = cluster_detections([(0.0, "S", 3.0), (1.0, "S", 1.0)], 2.0)
    assert events[0].position == pytest.approx(0.25)
    assert events[0].peak_score == 3.0
    events = cluster_detections([(0.0, "S", None), (1.0, "S", None)], 2.0)
    assert events[0].position == pytest.approx(0.5)
    events = cluster_detections([(0.0, "S", -1.0), (1.0, "S", 2.0)], 2.0)
    assert events[0].position == pytest.approx(0.5)


def test_cluster_min_records_and_sorting():
    preds = [(0.0, "S", 1.0), (5.0, "S", 1.0), (5.1, "S", 1.0)]
    assert len(cluster_detections(preds, 0.5, min_records=2)) == 1
    with pytest.raises(NotSorted):
        cluster_detections([(2.0, "S", 1.0), (1.0, "S", 1.0)])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 0.4), st.booleans(), st.floats(0.01, 5)),
                min_size=1, max_size=60), st.floats(-100, 100))
def test_cluster_translation_invariant(steps, shift):
    od = np.cumsum([s[0] for s in steps]) + 200.0
    preds = [(o, "S" if s[1] else "N", s[2]) for o, s in zip(od, steps)]
    moved = [(o + shift, lab, sc) for o, lab, sc in preds]
    a, b = cluster_detections(preds, 0.25), cluster_detections(moved, 0.25)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert x.position + shift == pytest.approx(y.position, abs=1e-9)
        assert x.first <= x.position <= x.last and x.n_records >= 1


def test_match_examples():
    report = match_events([ev(10.1)], PipeTally([10.0], 20.0), 0.6)
    assert len(report.matches) == 1 and report.detection_rate == 1.0
    assert report.matches[0][2] == pytest.approx(0.1)
    report = match_events([], PipeTally([10.0], 20.0), 0.6)
    assert report.misses == [10.0] and report.detection_rate == 0.0
    report = match_events([ev(10.1), ev(10.3)], PipeTally([10.0], 20.0), 0.6)
    assert len(report.matches) == 1 and report.matches[0][0].position == 10.1
    assert [e.position for e in report.false_events] == [10.3]
    with pytest.raises(ConfigError):
        match_events([], [1.0], 0.0)


def test_match_equal_distance_prefers_lower_od():
    report = match_events([ev(10.5), ev(9.5)], [10.0], 1.0)
    assert report.matches[0][0].position == 9.5


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 100), max_size=20, unique=True),
       st.lists(st.floats(0, 100), max_size=20, unique=True), st.floats(0.1, 5))
def test_match_invariants(events, welds, tol):
    report = match_events([ev(p) for p in events], sorted(welds), tol)
    assert len(report.matches) + len(report.misses) == len(welds)
    assert len(report.matches) + len(report.false_events) == len(events)
    assert 0.0 <= report.detection_rate <= 1.0
    assert report.mean_error <= tol
    assert len({m[1] for m in report.matches}) == len(report.matches)
    reversed_report = match_events([ev(p) for p in reversed(events)], sorted(welds), tol)
    assert len(reversed_report.matches) == len(report.matches)


def test_report_csv_columns():
    report = match_events([ev(10.1), ev(30.0)], [10.0, 20.0], 1.2)
    lines = report.to_csv().splitlines()
    assert lines[0] == "position_m,peak_score,n_records,matched,tally_position_m,error_m"
    assert len(lines) == 4
