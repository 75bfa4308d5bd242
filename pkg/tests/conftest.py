import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from weldid.ingest import SCHEMA, RecordTable  # noqa: E402
from weldid.preprocess import (  # noqa: E402
    build_balanced_sets,
    filter_out_of_range,
    independent_test_set,
    label_records,
    trim_stationary_head,
)
from weldid.synth import SynthConfig, generate_run  # noqa: E402

LEVEL_SIZES = [148, 642, 1464, 1838]


class Pipeline:
    """Default synthetic run pushed through cleaning, labeling and level building."""

    def __init__(self, seed=0):
        self.run = generate_run(SynthConfig(seed=seed))
        table, _ = filter_out_of_range(self.run.table)
        self.clean, self.trim_log = trim_stationary_head(table)
        self.labeled = label_records(self.clean, self.run.tally, 0.3)
        self.levels = build_balanced_sets(self.labeled, self.run.tally, seed=seed,
                                          sizes=LEVEL_SIZES)
        self.test_level = independent_test_set(self.labeled, self.run.tally, 600, seed,
                                               self.levels.spans())
        self.test = self.test_level.dataset()

    def level(self, name):
        return self.levels.by_name(str(name)).dataset()


@pytest.fixture(scope="session")
def pipeline():
    return Pipeline()


def random_table(rng, n_rows, labeled=True, columns=None):
    """In-range table with a mix of integers, long decimals and bound values."""
    names = list(columns or SCHEMA.names)
    spec = SCHEMA.select(names)
    lo, hi = spec.bounds
    values = rng.uniform(lo, hi, size=(n_rows, len(names)))
    if n_rows:
        mask = rng.random(values.shape) < 0.2
        values[mask] = np.round(values[mask])
        edge = rng.random(values.shape) < 0.05
        values[edge] = np.where(rng.random(edge.sum()) < 0.5, np.broadcast_to(lo, values.shape)[edge],
                                np.broadcast_to(hi, values.shape)[edge])
    labels = list(rng.choice(["S", "N"], n_rows)) if labeled else None
    return RecordTable(tuple(spec.names), values, labels)


def random_cfs_data(rng, n_rows=120, n_features=12):
    """Mixed informative, redundant and noise columns for CFS search tests."""
    y = rng.integers(0, 2, n_rows)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    X = np.empty((n_rows, n_features))
    for j in range(n_features):
        kind = rng.integers(0, 3)
        if kind == 0 or j == 0:
            X[:, j] = rng.uniform(0.2, 2.0) * y + rng.normal(0, 1, n_rows)
        elif kind == 1:
            src = rng.integers(0, j)
            X[:, j] = X[:, src] + rng.normal(0, rng.uniform(0.05, 1.0), n_rows)
        else:
            X[:, j] = rng.normal(0, 1, n_rows)
    return X, y


def random_mlp_draw(rng):
    """Seeded small network with a random batch, for gradient checks."""
    from weldid.mlp import init_network

    n_in = int(rng.integers(1, 6))
    n_hidden = int(rng.integers(1, 6))
    n = int(rng.integers(2, 12))
    model = init_network(n_in, n_hidden, seed=int(rng.integers(2**31)))
    model.W1 *= rng.uniform(1, 4)
    model.W2 *= rng.uniform(1, 4)
    model.b1[:] = rng.uniform(-1, 1, n_hidden)
    model.b2[:] = rng.uniform(-1, 1, 2)
    X = rng.uniform(0, 1, (n, n_in))
    y = rng.integers(0, 2, n)
    from weldid.preprocess import Dataset

    return model, Dataset(X, y, tuple(f"x{i}" for i in range(n_in)))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
