"""Group per-record weld predictions into located events and score them."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, NotSorted
from .ingest import POSITIVE


@dataclass(frozen=True)
class WeldEvent:
    position: float
    first: float
    last: float
    peak_score: float
    n_records: int


def _centroid(od, scores):
    c = float(np.mean(od))
    if scores is not None:
        w = np.asarray(scores, dtype=float)
        if np.all(np.isfinite(w)) and np.all(w > 0):
            c = float(np.sum(w * od) / np.sum(w))
    # rounding can push the centroid just past the cluster ends
    return min(max(c, float(od[0])), float(od[-1]))


def cluster_detections(predictions, max_gap: float = 0.25,
                       min_records: int = 1) -> list[WeldEvent]:
    """Merge runs of S-labeled records whose odometer gaps are <= ``max_gap``.

    ``predictions`` is a sequence of ``(od, label, score)`` sorted by od;
    ``score`` may be ``None``. Each event sits at the score-weighted centroid
    of its records, or the plain mean when scores are missing or not all
    positive. Events with fewer than ``min_records`` records are dropped.
    """
    preds = list(predictions)
    prev = -np.inf
    for i, (od, _, _) in enumerate(preds):
        if od < prev:
            raise NotSorted(i)
        prev = od
    hits = [(od, s) for od, lab, s in preds if lab == POSITIVE or lab is True or lab == 1]
    events = []
    group = []

    def close():
        if len(group) >= min_records:
            od = np.array([g[0] for g in group], dtype=float)
            sc = [g[1] for g in group]
            scores = None if any(s is None for s in sc) else np.array(sc, dtype=float)
            peak = float(np.max(scores)) if scores is not None else float("nan")
            events.append(WeldEvent(_centroid(od, scores), float(od[0]), float(od[-1]),
                                    peak, len(group)))

    for od, s in hits:
        if group and od - group[-1][0] > max_gap:
            close()
            group = []
        group.append((od, s))
    if group:
        close()
    return sorted(events, key=lambda e: e.position)


@dataclass
class MatchReport:
    matches: list  # (event, tally position, abs error)
    misses: list
    false_events: list
    tally_size: int

    @property
    def detection_rate(self) -> float:
        return len(self.matches) / self.tally_size if self.tally_size else 0.0

    @property
    def mean_error(self) -> float:
        return float(np.mean([m[2] for m in self.matches])) if self.matches else 0.0

    @property
    def max_error(self) -> float:
        return float(max(m[2] for m in self.matches)) if self.matches else 0.0

    def summary(self) -> str:
        return (f"tally_welds = {self.tally_size}\nmatched = {len(self.matches)}\n"
                f"missed = {len(self.misses)}\nfalse_events = {len(self.false_events)}\n"
                f"detection_rate = {self.detection_rate!r}\n"
                f"mean_error_m = {self.mean_error!r}\nmax_error_m = {self.max_error!r}\n")

    def to_csv(self) -> str:
        """One row per event, then one per missed weld."""
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["position_m", "peak_score", "n_records", "matched",
                    "tally_position_m", "error_m"])
        rows = [(e.position, e.peak_score, e.n_records, 1, t, err)
                for e, t, err in self.matches]
        rows += [(e.position, e.peak_score, e.n_records, 0, "", "")
                 for e in self.false_events]
        rows.sort(key=lambda r: r[0])
        for r in rows:
            w.writerow([repr(r[0]), repr(r[1]), r[2], r[3],
                        repr(r[4]) if r[4] != "" else "", repr(r[5]) if r[5] != "" else ""])
        for t in self.misses:
            w.writerow(["", "", 0, 0, repr(t), ""])
        return out.getvalue()


def match_events(events, tally, tol_m: float = 1.2) -> MatchReport:
    """One-to-one matching, closest pairs first, within ``tol_m``.

    ``tally`` is a PipeTally or a sequence of weld positions. Equal distances
    are resolved toward the lower event position, then the lower weld.
    """
    if tol_m <= 0:
        raise ConfigError("tol_m must be positive")
    welds = np.asarray(getattr(tally, "positions", tally), dtype=float)
    events = list(events)
    pairs = []
    for i, e in enumerate(events):
        lo, hi = np.searchsorted(welds, [e.position - tol_m, e.position + tol_m])
        for j in range(max(lo - 1, 0), min(hi + 1, welds.size)):
            d = abs(e.position - welds[j])
            if d <= tol_m:
                pairs.append((d, e.position, welds[j], i, j))
    pairs.sort()
    used_e, used_t = set(), set()
    matches = []
    for d, _, t, i, j in pairs:
        if i in used_e or j in used_t:
            continue
        used_e.add(i)
        used_t.add(j)
        matches.append((events[i], float(t), float(d)))
    matches.sort(key=lambda m: m[1])
    misses = [float(welds[j]) for j in range(welds.size) if j not in used_t]
    false = [events[i] for i in range(len(events)) if i not in used_e]
    return MatchReport(matches, misses, false, int(welds.size))
