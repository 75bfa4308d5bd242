"""Inspection data schema and the CSV / ARFF interchange formats."""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .exceptions import (
    ArityMismatch,
    DuplicateAttribute,
    MissingColumn,
    MissingDataSection,
    NonNumericCell,
    UnknownColumn,
    UnknownNominalValue,
    UnlabeledRow,
    UnsupportedArff,
)

LABEL_COLUMN = "weld"
POSITIVE = "S"
NEGATIVE = "N"
LABEL_VALUES = (POSITIVE, NEGATIVE)


@dataclass(frozen=True)
class VariableSpec:
    name: str
    unit: str
    min: float
    max: float

    def __post_init__(self):
        if not self.min < self.max:
            raise ValueError(f"{self.name}: min must be < max")
        if self.unit not in ("lsb", "m"):
            raise ValueError(f"{self.name}: unit must be 'lsb' or 'm'")

    @property
    def family(self) -> str:
        """Channel family symbol, e.g. ``Gh`` for ``Ghz``."""
        return self.name.rstrip("xyz12") or self.name

    def contains(self, value) -> bool:
        return self.min <= value <= self.max


def _family(symbol, axes, bound):
    return [VariableSpec(symbol + a, "lsb", -bound, bound) for a in axes]


@dataclass(frozen=True)
class Schema:
    """Ordered input variables plus the binary ``weld`` output."""

    variables: tuple[VariableSpec, ...]
    label: str = LABEL_COLUMN
    label_values: tuple[str, ...] = LABEL_VALUES

    def __post_init__(self):
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ValueError("schema variable names must be unique")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def __len__(self):
        return len(self.variables)

    def __getitem__(self, name) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def lookup(self, name: str) -> VariableSpec | None:
        """Case-insensitive name lookup."""
        low = name.lower()
        for v in self.variables:
            if v.name.lower() == low:
                return v
        return None

    def select(self, names: Iterable[str]) -> "Schema":
        """Sub-schema with the given variables, kept in schema order."""
        wanted = set(names)
        unknown = wanted - set(self.names)
        if unknown:
            raise UnknownColumn(sorted(unknown)[0])
        return Schema(tuple(v for v in self.variables if v.name in wanted),
                      self.label, self.label_values)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array([v.min for v in self.variables], dtype=float)
        hi = np.array([v.max for v in self.variables], dtype=float)
        return lo, hi


SCHEMA = Schema(tuple(
    _family("Gh", "xyz", 6000)
    + _family("Ah", "xyz", 5454)
    + _family("Mh", "xyz", 2500)
    + _family("Vh", "12", 32000)
    + [VariableSpec("Od", "m", 0, 50000)]
))

ODOMETER = "Od"


class InspectionRecord(NamedTuple):
    values: dict
    label: str | None

    @property
    def od(self):
        return self.values.get(ODOMETER)


@dataclass(frozen=True, eq=False)
class RecordTable:
    """Immutable table of inspection rows.

    ``values`` holds one float column per entry in ``columns``; ``labels`` is
    ``None`` for an unlabeled table, otherwise an object array of ``"S"``,
    ``"N"`` or ``None`` per row.
    """

    columns: tuple[str, ...]
    values: np.ndarray
    labels: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise DuplicateAttribute(next(c for c in self.columns
                                          if self.columns.count(c) > 1))
        values = np.array(self.values, dtype=float, copy=True)
        if values.size == 0:
            values = values.reshape(0, len(self.columns))
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise ArityMismatch(None, len(self.columns),
                                values.shape[1] if values.ndim == 2 else values.ndim)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = np.empty(len(values), dtype=object)
            labels[:] = list(self.labels)
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RecordTable):
            return NotImplemented
        if self.columns != other.columns or not np.array_equal(self.values, other.values):
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return self.labels is None or list(self.labels) == list(other.labels)

    __hash__ = None

    @property
    def labeled(self) -> bool:
        return self.labels is not None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def records(self) -> Iterator[InspectionRecord]:
        for i, row in enumerate(self.values):
            label = self.labels[i] if self.labels is not None else None
            yield InspectionRecord(dict(zip(self.columns, row.tolist())), label)

    def take(self, index) -> "RecordTable":
        """Row subset (boolean mask or integer index), order as given."""
        labels = None if self.labels is None else self.labels[index]
        return RecordTable(self.columns, self.values[index], labels, self.source)

    def with_labels(self, labels) -> "RecordTable":
        return RecordTable(self.columns, self.values, labels, self.source)


# -- validation --------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    column: str
    value: float
    min: float
    max: float


@dataclass(frozen=True)
class ValidationReport:
    passed: np.ndarray
    first_violation: tuple

    @property
    def n_failed(self) -> int:
        return int((~self.passed).sum())

    @property
    def ok(self) -> bool:
        return bool(self.passed.all())


def _violation_matrix(table: RecordTable, schema: Schema):
    # schema order, so the first violation is the first in schema order
    sub = schema.select(c for c in schema.names if c in table.columns)
    lo, hi = sub.bounds
    block = table.values[:, [table.columns.index(n) for n in sub.names]]
    bad = (block < lo) | (block > hi) | np.isnan(block)
    return sub, block, bad


def validate_schema(table: RecordTable, schema: Schema = SCHEMA) -> ValidationReport:
    """Check every row against the inclusive variable bounds."""
    sub, block, bad = _violation_matrix(table, schema)
    passed = ~bad.any(axis=1)
    first = []
    for i in range(len(table)):
        if passed[i]:
            first.append(None)
            continue
        j = int(np.argmax(bad[i]))
        spec = sub.variables[j]
        first.append(Violation(spec.name, float(block[i, j]), spec.min, spec.max))
    passed.setflags(write=False)
    return ValidationReport(passed, tuple(first))


# -- CSV ---------------------------------------------------------------------

def _read_text(stream) -> str:
    if isinstance(stream, (str, bytes)):
        data = stream
    else:
        data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def _parse_label(text, row):
    text = text.strip()
    if text == "" or text == "?":
        return None
    if text not in LABEL_VALUES:
        raise UnknownNominalValue(row, text)
    return text


def _parse_float(text, row, column):
    try:
        return float(text)
    except ValueError:
        raise NonNumericCell(row, column, text) from None


def _build_table(header, rows, schema, label_pos, source):
    """Map parsed string rows onto schema order."""
    positions = {}
    for pos, name in enumerate(header):
        if pos == label_pos:
            continue
        spec = schema.lookup(name)
        if spec is None:
            raise UnknownColumn(name)
        if spec.name in positions:
            raise DuplicateAttribute(spec.name)
        positions[spec.name] = pos
    columns = tuple(n for n in schema.names if n in positions)
    order = [positions[c] for c in columns]
    values = np.empty((len(rows), len(columns)))
    labels = [] if label_pos is not None else None
    for r, (lineno, fields) in enumerate(rows):
        if len(fields) != len(header):
            raise ArityMismatch(lineno, len(header), len(fields))
        for j, pos in enumerate(order):
            values[r, j] = _parse_float(fields[pos].strip(), lineno, header[pos])
        if labels is not None:
            labels.append(_parse_label(fields[label_pos], lineno))
    return RecordTable(columns, values, labels, source)


def parse_csv(stream, schema: Schema = SCHEMA, source: str = "") -> RecordTable:
    """Parse comma-separated inspection data whose first row names the columns.

    Every variable of ``schema`` must be present. Pass ``SCHEMA.select(...)``
    to read files that carry only some channels. The ``weld`` column is
    optional; empty cells in it are unlabeled rows. Row numbers in errors are
    1-based file lines.
    """
    text = _read_text(stream)
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = [(n, r) for n, r in enumerate(reader, start=1) if r]
    if not rows:
        raise MissingColumn(schema.names[0] if len(schema) else LABEL_COLUMN)
    header = [h.strip() for h in rows[0][1]]
    label_pos = None
    for pos, name in enumerate(header):
        if name.lower() == schema.label.lower():
            if label_pos is not None:
                raise DuplicateAttribute(schema.label)
            label_pos = pos
    known = {schema.lookup(h).name for h in header
             if schema.lookup(h) is not None}
    for name in schema.names:
        if name not in known:
            raise MissingColumn(name)
    return _build_table(header, rows[1:], schema, label_pos, source)


def format_number(x: float) -> str:
    """Shortest decimal string that parses back to the same float."""
    return repr(float(x))


def write_csv(table: RecordTable) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    header = list(table.columns)
    if table.labeled:
        header.append(LABEL_COLUMN)
    writer.writerow(header)
    for i, row in enumerate(table.values):
        fields = [format_number(v) for v in row]
        if table.labeled:
            fields.append(table.labels[i] or "")
        writer.writerow(fields)
    return out.getvalue()


def read_csv(path, schema: Schema = SCHEMA) -> RecordTable:
    with open(path, "rb") as fh:
        return parse_csv(fh, schema, source=str(path))


# -- ARFF --------------------------------------------------------------------

_ATTR = re.compile(r"@attribute\s+('[^']*'|\"[^\"]*\"|\S+)\s+(.+)$", re.IGNORECASE)


def _unquote(name):
    if len(name) >= 2 and name[0] == name[-1] and name[0] in "'\"":
        return name[1:-1]
    return name


def parse_arff(stream, schema: Schema = SCHEMA, source: str = "") -> RecordTable:
    """Parse the dense numeric ARFF subset with one nominal ``weld {S,N}``."""
    text = _read_text(stream)
    header = []
    label_pos = None
    data_start = None
    lines = text.splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if low.startswith("@relation"):
            continue
        if low.startswith("@attribute"):
            m = _ATTR.match(line)
            if m is None:
                raise UnsupportedArff(f"line {lineno}: malformed attribute")
            name, kind = _unquote(m.group(1)), m.group(2).strip()
            if name.lower() in (h.lower() for h in header):
                raise DuplicateAttribute(name)
            if kind.startswith("{"):
                values = [v.strip().strip("'\"") for v in kind.strip("{} ").split(",")]
                if name.lower() != schema.label.lower() or label_pos is not None:
                    raise UnsupportedArff(f"line {lineno}: unexpected nominal attribute {name!r}")
                if not set(values) <= set(LABEL_VALUES):
                    raise UnknownNominalValue(lineno, next(v for v in values
                                                           if v not in LABEL_VALUES))
                label_pos = len(header)
            elif kind.lower() not in ("numeric", "real", "integer"):
                raise UnsupportedArff(f"line {lineno}: attribute type {kind!r} not supported")
            header.append(name)
            continue
        if low.startswith("@data"):
            data_start = lineno
            break
        raise UnsupportedArff(f"line {lineno}: unexpected header line")
    if data_start is None:
        raise MissingDataSection("no @data section")
    rows = []
    for lineno in range(data_start + 1, len(lines) + 1):
        line = lines[lineno - 1].strip()
        if not line or line.startswith("%"):
            continue
        if line.startswith("{"):
            raise UnsupportedArff(f"line {lineno}: sparse rows are not supported")
        rows.append((lineno, line.split(",")))
    return _build_table(header, rows, schema, label_pos, source)


def write_arff(table: RecordTable, relation_name: str = "weld",
               labeled: bool = True) -> str:
    """Serialize to ARFF; ``labeled`` adds the ``weld {S,N}`` attribute."""
    lines = [f"@relation {relation_name}", ""]
    lines += [f"@attribute {c} numeric" for c in table.columns]
    if labeled:
        lines.append(f"@attribute {LABEL_COLUMN} {{{POSITIVE},{NEGATIVE}}}")
        if not table.labeled:
            raise UnlabeledRow(0)
    lines += ["", "@data"]
    for i, row in enumerate(table.values):
        fields = [format_number(v) for v in row]
        if labeled:
            label = table.labels[i]
            if label is None:
                raise UnlabeledRow(i)
            fields.append(label)
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def read_arff(path, schema: Schema = SCHEMA) -> RecordTable:
    with open(path, "rb") as fh:
        return parse_arff(fh, schema, source=str(path))
