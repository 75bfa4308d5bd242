import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weldid.exceptions import (
    ConfigError,
    InsufficientNegatives,
    NotSorted,
    OverlapWithTraining,
    WindowTooWide,
)
from weldid.ingest import SCHEMA, RecordTable
from weldid.preprocess import (
    Dataset,
    PipeTally,
    accel_magnitude,
    build_balanced_sets,
    filter_out_of_range,
    format_tally,
    independent_test_set,
    label_records,
    parse_tally,
    trim_stationary_head,
)


def od_table(od, labels=None):
    return RecordTable(("Od",), np.asarray(od, dtype=float)[:, None], labels)


def grid_run(n_welds, spacing=2.0, step=0.25, half_window=0.3):
    """Coarse labeled line: welds every ``spacing`` m, a record every ``step`` m."""
    length = n_welds * spacing
    welds = (np.arange(n_welds) + 0.5) * spacing
    tally = PipeTally(welds, length)
    od = np.arange(0.0, length + step / 2, step)
    return label_records(od_table(od), tally, half_window), tally


# -- cleaning -----------------------------------------------------------------

def test_filter_out_of_range_logs_first_violation():
    values = np.zeros((3, 12))
    values[1, SCHEMA.names.index("Ghz")] = 6001
    kept, log = filter_out_of_range(RecordTable(SCHEMA.names, values))
    assert len(kept) == 2 and log.retained == 2
    assert log.by_family() == {"Gh": 1}
    assert log.dropped + log.retained == log.input_rows


def test_filter_counts_double_violation_once():
    values = np.zeros((2, 12))
    values[0, SCHEMA.names.index("Ahx")] = 9999
    values[0, SCHEMA.names.index("Ghy")] = -9999
    _, log = filter_out_of_range(RecordTable(SCHEMA.names, values))
    assert dict(log.out_of_range) == {"Ghy": 1}


def test_filter_identity_when_in_range():
    table = RecordTable(SCHEMA.names, np.zeros((4, 12)), list("SNSN"))
    kept, log = filter_out_of_range(table)
    assert kept == table and log.dropped == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_filter_idempotent(seed):
    rng = np.random.default_rng(seed)
    lo, hi = SCHEMA.bounds
    values = rng.uniform(1.2 * lo - 1, 1.2 * hi + 1, (20, 12))
    once, _ = filter_out_of_range(RecordTable(SCHEMA.names, values))
    twice, log = filter_out_of_range(once)
    assert twice == once and log.dropped == 0


def test_trim_hand_trace():
    table = od_table([0, 0, 0, 0.5, 1.2, 2.0])
    kept, log = trim_stationary_head(table, eps_m=0.1, window=2)
    assert kept.column("Od").tolist() == [0.5, 1.2, 2.0]
    assert log.stationary_head == 3


def test_trim_identity_when_moving():
    table = od_table(np.arange(30) * 0.05)
    kept, log = trim_stationary_head(table)
    assert kept == table and log.stationary_head == 0


def test_trim_all_stationary():
    kept, log = trim_stationary_head(od_table(np.zeros(25)))
    assert len(kept) == 0 and log.stationary_head == 25 and log.retained == 0


def test_trim_rejects_unsorted():
    with pytest.raises(NotSorted):
        trim_stationary_head(od_table([0, 1, 0.5]))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 0.2), min_size=0, max_size=60), st.integers(2, 6),
       st.floats(0.01, 0.3))
def test_trim_idempotent(steps, window, eps):
    od = np.cumsum([0.0] + steps)
    once, _ = trim_stationary_head(od_table(od), eps, window)
    twice, log = trim_stationary_head(once, eps, window)
    assert twice == once and log.stationary_head == 0


def test_accel_magnitude_examples():
    assert accel_magnitude(3, 4, 0) == 5
    assert accel_magnitude(0, 0, 0) == 0
    assert accel_magnitude(1, 2, 2) == 3


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5454, 5454), min_size=3, max_size=3),
       st.lists(st.floats(0, 1), min_size=3, max_size=3))
def test_accel_magnitude_monotone(b, shrink):
    a = [x * s for x, s in zip(b, shrink)]
    assert accel_magnitude(*a) <= accel_magnitude(*b) + 1e-9


# -- tally and labels -----------------------------------------------------------

def test_tally_text_round_trip():
    tally = PipeTally([1.25, 13.0, 24.875], 30.0)
    back = parse_tally(format_tally(tally))
    assert back.positions.tolist() == tally.positions.tolist() and back.length == 30.0
    assert parse_tally("# welds\n5.0\n\n7.5 # second\n").positions.tolist() == [5.0, 7.5]


def test_tally_rejects_unsorted():
    with pytest.raises(ConfigError):
        PipeTally([3.0, 2.0], 10.0)


def test_label_records_window():
    tally = PipeTally([100.0, 112.0], 200.0)
    labeled = label_records(od_table([100.2, 100.4, 99.7, 111.8]), tally, 0.3)
    assert list(labeled.labels) == ["S", "N", "S", "S"]


def test_label_records_window_too_wide():
    with pytest.raises(WindowTooWide):
        label_records(od_table([10.0]), PipeTally([10.0, 10.5], 20.0), 0.3)


def test_every_weld_labels_a_record():
    labeled, tally = grid_run(30)
    od = labeled.column("Od")
    s_od = od[labeled.labels == "S"]
    for w in tally.positions:
        assert np.any(np.abs(s_od - w) <= 0.3)


# -- levels -------------------------------------------------------------------

def test_sized_levels_have_requested_counts(pipeline):
    sizes = {lv.name: len(lv.table) for lv in pipeline.levels}
    assert sizes == {"148": 148, "642": 642, "1464": 1464, "1838": 1838}
    first = pipeline.level(148)
    assert first.counts == (74, 74)


def test_levels_balanced_and_nested(pipeline):
    prev_s = set()
    for lv in pipeline.levels:
        data = lv.dataset()
        n_s, n_n = data.counts
        assert n_s == n_n
        s_od = set(data.od[data.y == 1].tolist())
        assert prev_s <= s_od
        prev_s = s_od
        od = data.od
        assert od.min() >= lv.span[0] and od.max() < lv.span[1]


def test_twenty_levels_cover_half_the_welds():
    labeled, tally = grid_run(3000)
    levels = build_balanced_sets(labeled, tally, n_levels=20, seed=3)
    assert len(levels) == 20
    assert levels[0].n_welds == 75
    assert levels[-1].n_welds == 1500
    sizes = [len(lv.table) for lv in levels]
    assert sizes == sorted(sizes)
    for lv in levels:
        labels = list(lv.table.labels)
        assert labels.count("S") == labels.count("N")


def test_levels_deterministic_per_seed():
    labeled, tally = grid_run(200)
    a = build_balanced_sets(labeled, tally, n_levels=4, seed=9)
    b = build_balanced_sets(labeled, tally, n_levels=4, seed=9)
    assert all(x.table == y.table for x, y in zip(a, b))


def test_levels_insufficient_negatives():
    tally = PipeTally([1.0, 3.0], 4.0)
    labeled = label_records(od_table([0.8, 0.9, 1.0, 1.1, 1.5]), tally, 0.3)
    with pytest.raises(InsufficientNegatives):
        build_balanced_sets(labeled, tally, n_levels=1)


def test_independent_test_set(pipeline):
    test = pipeline.test_level
    labels = list(test.table.labels)
    assert len(labels) == 600 and labels.count("S") == 300
    for span in pipeline.levels.spans():
        assert test.span[0] >= span[1] or test.span[1] <= span[0]


def test_independent_test_set_minimal_and_overlap():
    labeled, tally = grid_run(40)
    levels = build_balanced_sets(labeled, tally, n_levels=4, seed=0)
    two = independent_test_set(labeled, tally, 2, seed=0, training_spans=levels.spans())
    assert sorted(two.table.labels) == ["N", "S"]
    with pytest.raises(OverlapWithTraining):
        independent_test_set(labeled, tally, 2, seed=0, training_spans=levels.spans(),
                             span=(levels[3].span[1] - 1.0, 80.0))


def test_dataset_from_table_and_select():
    table = RecordTable(("Ahy", "Od"), [[1, 2], [3, 4]], ["S", "N"])
    data = Dataset.from_table(table)
    assert data.feature_names == ("Ahy", "Od")
    assert data.y.tolist() == [1, 0]
    assert data.select(["Od"]).X.tolist() == [[2.0], [4.0]]
