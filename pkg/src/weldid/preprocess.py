"""Cleaning, labeling and balanced level-file construction."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    ConfigError,
    InsufficientNegatives,
    NotSorted,
    OverlapWithTraining,
    WindowTooWide,
)
from .ingest import (
    NEGATIVE,
    ODOMETER,
    POSITIVE,
    SCHEMA,
    RecordTable,
    Schema,
    validate_schema,
)


@dataclass(frozen=True, eq=False)
class PipeTally:
    """Ground-truth weld positions along the line, in meters."""

    positions: np.ndarray
    length: float

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).ravel()
        if pos.size and np.any(np.diff(pos) <= 0):
            raise ConfigError("tally positions must be strictly increasing")
        if pos.size and (pos[0] < 0 or pos[-1] > self.length):
            raise ConfigError("tally positions must lie within [0, length]")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "length", float(self.length))

    def __len__(self):
        return self.positions.size

    @property
    def min_spacing(self) -> float:
        return float(np.diff(self.positions).min()) if len(self) > 1 else math.inf

    def nearest(self, od):
        """Index of and distance to the nearest weld for each odometer value."""
        od = np.asarray(od, dtype=float)
        pos = self.positions
        right = np.clip(np.searchsorted(pos, od), 0, len(pos) - 1)
        left = np.clip(right - 1, 0, len(pos) - 1)
        d_left = np.abs(od - pos[left])
        d_right = np.abs(od - pos[right])
        idx = np.where(d_left <= d_right, left, right)
        return idx, np.minimum(d_left, d_right)

    def within(self, lo, hi) -> np.ndarray:
        return self.positions[(self.positions >= lo) & (self.positions <= hi)]


def parse_tally(text: str) -> PipeTally:
    """One position per line; ``#`` starts a comment.

    A ``# length_m <value>`` comment sets the line length, otherwise the last
    position is used.
    """
    positions = []
    length = None
    for raw in text.splitlines():
        line, _, comment = raw.partition("#")
        words = comment.split()
        if len(words) == 2 and words[0] == "length_m":
            length = float(words[1])
        line = line.strip()
        if line:
            positions.append(float(line))
    if length is None:
        length = positions[-1] if positions else 0.0
    return PipeTally(np.array(positions), length)


def format_tally(tally: PipeTally) -> str:
    lines = [f"# length_m {tally.length!r}"]
    lines += [repr(float(p)) for p in tally.positions]
    return "\n".join(lines) + "\n"


@dataclass
class CleaningLog:
    input_rows: int = 0
    out_of_range: Counter = field(default_factory=Counter)
    stationary_head: int = 0
    retained: int = 0

    @property
    def dropped(self) -> int:
        return sum(self.out_of_range.values()) + self.stationary_head

    def by_family(self) -> dict:
        out = Counter()
        for name, n in self.out_of_range.items():
            out[SCHEMA[name].family if name in SCHEMA.names else name] += n
        return dict(out)

    def then(self, other: "CleaningLog") -> "CleaningLog":
        """Log of applying ``self``'s step followed by ``other``'s."""
        return CleaningLog(self.input_rows, self.out_of_range + other.out_of_range,
                           self.stationary_head + other.stationary_head, other.retained)

    def to_text(self) -> str:
        lines = [f"input_rows = {self.input_rows}"]
        for name in SCHEMA.names:
            if self.out_of_range.get(name):
                lines.append(f"out_of_range.{name} = {self.out_of_range[name]}")
        lines.append(f"stationary_head = {self.stationary_head}")
        lines.append(f"dropped = {self.dropped}")
        lines.append(f"retained = {self.retained}")
        return "\n".join(lines) + "\n"


def filter_out_of_range(table: RecordTable, schema: Schema = SCHEMA):
    """Drop rows outside the accepted ranges; returns ``(table, log)``."""
    report = validate_schema(table, schema)
    counts = Counter(v.column for v in report.first_violation if v is not None)
    kept = table.take(report.passed)
    return kept, CleaningLog(len(table), counts, 0, len(kept))


def trim_stationary_head(table: RecordTable, eps_m: float = 0.05, window: int = 10):
    """Drop the launch-site segment recorded before the tool starts moving.

    A prefix of at least ``window`` rows is stationary when every run of
    ``window`` consecutive rows inside it advances the odometer by less than
    ``eps_m``. The longest such prefix is removed, repeatedly, so the result
    starts at motion onset and trimming again is a no-op.
    """
    if window < 2:
        raise ConfigError("window must be >= 2")
    od = table.column(ODOMETER)
    steps = np.diff(od)
    if np.any(steps < 0):
        raise NotSorted(int(np.argmax(steps < 0)) + 1)
    start = 0
    n = len(od)
    while n - start >= window:
        adv = od[start + window - 1:] - od[start:n - window + 1]
        moving = np.flatnonzero(adv >= eps_m)
        if moving.size == 0:
            start = n
            break
        if moving[0] == 0:
            break
        start += int(moving[0]) + window - 1
    kept = table.take(slice(start, None))
    return kept, CleaningLog(len(table), Counter(), start, len(kept))


def accel_magnitude(ax, ay, az):
    """Euclidean norm of the three acceleration axes (elementwise)."""
    return np.sqrt(np.square(ax) + np.square(ay) + np.square(az))


def label_records(table: RecordTable, tally: PipeTally,
                  half_window_m: float = 0.3) -> RecordTable:
    """Label rows ``S`` within ``half_window_m`` of a tally weld, else ``N``."""
    if half_window_m <= 0:
        raise ConfigError("half_window_m must be positive")
    if half_window_m >= tally.min_spacing / 2:
        raise WindowTooWide(
            f"half window {half_window_m} m overlaps adjacent welds "
            f"(minimum spacing {tally.min_spacing} m)")
    od = table.column(ODOMETER)
    if len(tally) == 0:
        return table.with_labels([NEGATIVE] * len(table))
    _, dist = tally.nearest(od)
    labels = np.where(dist <= half_window_m, POSITIVE, NEGATIVE)
    return table.with_labels(labels.tolist())


# -- datasets ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with named columns and a binary weld label (1 = S)."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    od: np.ndarray | None = None
    level: str | None = None
    span: tuple[float, float] | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        y = np.array(self.y, dtype=int).ravel()
        if X.ndim != 2 or X.shape[0] != y.size or X.shape[1] != len(self.feature_names):
            raise ValueError("inconsistent dataset shapes")
        if not np.isin(y, (0, 1)).all():
            raise ValueError("labels must be 0 (N) or 1 (S)")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self):
        return self.y.size

    @classmethod
    def from_table(cls, table: RecordTable, features=None, level=None, span=None):
        if not table.labeled:
            raise ValueError("table is unlabeled")
        if features is None:
            features = [c for c in SCHEMA.names if c in table.columns]
        X = np.column_stack([table.column(f) for f in features]) if features else \
            np.empty((len(table), 0))
        y = np.array([lab == POSITIVE for lab in table.labels], dtype=int)
        od = table.column(ODOMETER) if ODOMETER in table.columns else None
        return cls(X, y, tuple(features), od, level, span)

    def select(self, features) -> "Dataset":
        idx = [self.feature_names.index(f) for f in features]
        return Dataset(self.X[:, idx], self.y, tuple(features), self.od,
                       self.level, self.span)

    def subset(self, index) -> "Dataset":
        od = None if self.od is None else self.od[index]
        return Dataset(self.X[index], self.y[index], self.feature_names, od,
                       self.level, self.span)

    @property
    def counts(self) -> tuple[int, int]:
        """``(n_S, n_N)``."""
        n_pos = int(self.y.sum())
        return n_pos, self.y.size - n_pos


@dataclass(frozen=True)
class Level:
    """One balanced level file: the records plus how they were chosen."""

    name: str
    table: RecordTable
    n_welds: int
    span: tuple[float, float]

    def dataset(self, features=None) -> Dataset:
        return Dataset.from_table(self.table, features, self.name, self.span)


class LevelSeries(list):
    """Ordered list of :class:`Level` objects."""

    def spans(self):
        return [lv.span for lv in self]

    def by_name(self, name) -> Level:
        for lv in self:
            if lv.name == str(name):
                return lv
        raise KeyError(name)


def _span_end(tally: PipeTally, n_welds: int, od_max: float) -> float:
    if n_welds < len(tally):
        return float((tally.positions[n_welds - 1] + tally.positions[n_welds]) / 2)
    return float(od_max)


def _balanced_level(table, od, pos_mask, n_pos_rows, n_welds, span, rng, name):
    in_span = (od >= span[0]) & (od < span[1])
    neg = np.flatnonzero(in_span & ~pos_mask)
    if neg.size < n_pos_rows.size:
        raise InsufficientNegatives(
            f"level {name}: {n_pos_rows.size} S records but only {neg.size} N "
            f"records in span {span}")
    chosen_neg = rng.choice(neg, size=n_pos_rows.size, replace=False)
    rows = np.sort(np.concatenate([n_pos_rows, chosen_neg]))
    return Level(name, table.take(rows), n_welds, span)


def build_balanced_sets(table: RecordTable, tally: PipeTally, n_levels: int = 20,
                        seed: int = 0, sizes=None) -> LevelSeries:
    """Nested, class-balanced training levels over a growing share of welds.

    By default level ``k`` holds every ``S`` record of the first
    ``ceil(0.025 * k * len(tally))`` welds in odometer order plus as many
    ``N`` records, sampled without replacement from the same odometer span.

    With ``sizes`` (even record counts, non-decreasing) each level instead
    takes the first ``size / 2`` ``S`` records in odometer order, so level
    sizes can be fixed exactly.
    """
    if not table.labeled:
        raise ValueError("table must be labeled")
    od = table.column(ODOMETER)
    if np.any(np.diff(od) < 0):
        raise NotSorted(int(np.argmax(np.diff(od) < 0)) + 1)
    pos_mask = np.array([lab == POSITIVE for lab in table.labels])
    pos_rows = np.flatnonzero(pos_mask)
    weld_idx, _ = tally.nearest(od[pos_rows]) if len(tally) else (np.zeros(0, int), None)
    od_lo = float(od[0]) if od.size else 0.0
    od_max = float(od[-1]) if od.size else 0.0

    plans = []
    if sizes is None:
        if n_levels < 1:
            raise ConfigError("n_levels must be >= 1")
        for k in range(1, n_levels + 1):
            n_welds = min(len(tally), math.ceil(0.025 * k * len(tally) - 1e-9))
            plans.append((str(k), n_welds, pos_rows[weld_idx < n_welds]))
    else:
        sizes = [int(s) for s in sizes]
        if any(s < 2 or s % 2 for s in sizes) or sizes != sorted(sizes):
            raise ConfigError("sizes must be even, >= 2 and non-decreasing")
        for s in sizes:
            half = s // 2
            if half > pos_rows.size:
                raise InsufficientNegatives(f"only {pos_rows.size} S records for level {s}")
            rows = pos_rows[:half]
            n_welds = int(weld_idx[half - 1]) + 1
            plans.append((str(s), n_welds, rows))

    seeds = np.random.SeedSequence(seed).spawn(len(plans))
    series = LevelSeries()
    for (name, n_welds, rows), ss in zip(plans, seeds):
        span = (od_lo, _span_end(tally, max(n_welds, 1), od_max))
        series.append(_balanced_level(table, od, pos_mask, rows, n_welds, span,
                                      np.random.default_rng(ss), name))
    return series


def _overlaps(a, b) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def independent_test_set(table: RecordTable, tally: PipeTally, size: int = 600,
                         seed: int = 0, training_spans=(), span=None) -> Level:
    """Balanced hold-out set from the trailing part of the run.

    Unless ``span`` is given, the span is the shortest tail (cut halfway
    between welds) holding at least ``size / 2`` ``S`` records. Raises
    :class:`OverlapWithTraining` if it intersects any training span.
    """
    if size < 2 or size % 2:
        raise ConfigError("size must be even and >= 2")
    half = size // 2
    od = table.column(ODOMETER)
    pos_mask = np.array([lab == POSITIVE for lab in table.labels])
    if span is None:
        pos_od = od[pos_mask]
        if pos_od.size < half:
            raise InsufficientNegatives(f"only {pos_od.size} S records in the run")
        cut_od = pos_od[-half]
        w, _ = tally.nearest(np.array([cut_od]))
        w = int(w[0])
        lo = float((tally.positions[w - 1] + tally.positions[w]) / 2) if w > 0 \
            else float(od[0])
        span = (lo, float(np.nextafter(od[-1], np.inf)))
    span = (float(span[0]), float(span[1]))
    for t in training_spans:
        if _overlaps(span, t):
            raise OverlapWithTraining(f"test span {span} overlaps training span {tuple(t)}")
    in_span = (od >= span[0]) & (od < span[1])
    pos = np.flatnonzero(in_span & pos_mask)
    neg = np.flatnonzero(in_span & ~pos_mask)
    if pos.size < half or neg.size < half:
        raise InsufficientNegatives(f"span {span} cannot supply {half} S and {half} N")
    rng = np.random.default_rng(seed)
    rows = np.sort(np.concatenate([rng.choice(pos, half, replace=False),
                                   rng.choice(neg, half, replace=False)]))
    n_welds = len(tally.within(*span))
    return Level(f"test{size}", table.take(rows), n_welds, span)
