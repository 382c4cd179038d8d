"""Community-level travel flows from chained origin-destination pairs.

Each OD pair lands in one of three buckets: intra (both stops in the same
community), inter (different communities), or unassigned (either stop missing
from the community assignment, e.g. outside the giant component). Counts are
kept per day class in an origin-by-destination matrix over community labels;
percentages are always taken over the assigned pairs only.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DataError
from .records import DAY_CLASSES, OdPair, day_class_of

INTRA = "intra"
INTER = "inter"
UNASSIGNED = "unassigned"


@dataclass(frozen=True)
class FlowMatrix:
    day_class: str
    counts: np.ndarray          # (k, k) int64, origin row -> destination col
    unassigned: int
    day_count: int              # distinct calendar days aggregated

    def __post_init__(self):
        self.counts.setflags(write=False)

    @property
    def community_count(self) -> int:
        return int(self.counts.shape[0])

    @property
    def intra_total(self) -> int:
        return int(np.trace(self.counts))

    @property
    def inter_total(self) -> int:
        return int(self.counts.sum() - np.trace(self.counts))

    @property
    def assigned_total(self) -> int:
        return int(self.counts.sum())

    @property
    def od_total(self) -> int:
        return self.assigned_total + self.unassigned

    def pair_flow(self, a: int, b: int) -> int:
        """Undirected flow between two distinct communities."""
        if a == b:
            raise DataError("pair flow is defined for distinct communities")
        return int(self.counts[a, b] + self.counts[b, a])


def classify_od(pair: OdPair, assignment: Dict[str, int]) -> str:
    ca = assignment.get(pair.origin_stop_id)
    cb = assignment.get(pair.destination_stop_id)
    if ca is None or cb is None:
        return UNASSIGNED
    return INTRA if ca == cb else INTER


def build_flow_matrices(pairs: Sequence[OdPair], assignment: Dict[str, int],
                        holidays: frozenset = frozenset()) -> Dict[str, FlowMatrix]:
    """Aggregate OD pairs into per-day-class community flow matrices.

    Day classes with no observed pairs are absent from the result; the
    summary reports them as notes rather than zero-filled tables.
    """
    if not assignment:
        raise DataError("empty community assignment")
    k = max(assignment.values()) + 1
    counts = {dc: np.zeros((k, k), dtype=np.int64) for dc in DAY_CLASSES}
    unassigned = {dc: 0 for dc in DAY_CLASSES}
    days_seen = {dc: set() for dc in DAY_CLASSES}
    for p in pairs:
        dc = day_class_of(p.day, holidays)
        days_seen[dc].add(p.day)
        ca = assignment.get(p.origin_stop_id)
        cb = assignment.get(p.destination_stop_id)
        if ca is None or cb is None:
            unassigned[dc] += 1
        else:
            counts[dc][ca, cb] += 1
    out = {}
    for dc in DAY_CLASSES:
        if not days_seen[dc]:
            continue
        out[dc] = FlowMatrix(dc, counts[dc], unassigned[dc],
                             len(days_seen[dc]))
    return out


def top_inter_pairs(fm: FlowMatrix, k: int) -> List[Tuple[int, int, int]]:
    """Strongest community pairs by combined two-way flow, largest first.

    Ties break toward the smaller community ids. Asking for more pairs than
    exist returns everything with positive flow.
    """
    if k < 1:
        raise DataError("k must be positive")
    flows = []
    for a in range(fm.community_count):
        for b in range(a + 1, fm.community_count):
            f = fm.pair_flow(a, b)
            if f > 0:
                flows.append((a, b, f))
    flows.sort(key=lambda t: (-t[2], t[0], t[1]))
    return flows[:k]


def flow_summary(matrices: Dict[str, FlowMatrix],
                 top_k: int = 5) -> dict:
    """JSON-ready accounting per day class, with shares over assigned pairs."""
    classes = {}
    notes = []
    for dc in DAY_CLASSES:
        fm = matrices.get(dc)
        if fm is None:
            notes.append(f"no OD pairs observed for day class {dc}")
            continue
        assigned = fm.assigned_total
        entry = {
            "od_pairs": fm.od_total,
            "days": fm.day_count,
            "intra": fm.intra_total,
            "inter": fm.inter_total,
            "unassigned": fm.unassigned,
        }
        if assigned:
            entry["pct_intra"] = 100.0 * fm.intra_total / assigned
            entry["pct_inter"] = 100.0 * fm.inter_total / assigned
        else:
            notes.append(f"all OD pairs unassigned for day class {dc}")
        entry["top_inter_pairs"] = [
            {"communities": [a, b], "flow": f}
            for a, b, f in top_inter_pairs(fm, top_k)
        ]
        classes[dc] = entry
    return {"day_classes": classes, "notes": notes}


# --------------------------------------------------------------------- io

FLOW_HEADER = ["day_class", "origin_community", "destination_community", "count"]


def write_flow_matrices(path, matrices: Dict[str, FlowMatrix]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FLOW_HEADER)
        for dc in DAY_CLASSES:
            fm = matrices.get(dc)
            if fm is None:
                continue
            # dense on purpose: the loader recovers the community count from
            # the largest index, so zero cells must be present
            for a in range(fm.community_count):
                for b in range(fm.community_count):
                    w.writerow([dc, a, b, int(fm.counts[a, b])])
            w.writerow([dc, -1, -1, fm.unassigned])


def load_flow_matrices(path) -> Dict[str, FlowMatrix]:
    rows = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != FLOW_HEADER:
            raise DataError(f"{path}: unexpected header {r.fieldnames}")
        for row in r:
            rows.append((row["day_class"], int(row["origin_community"]),
                         int(row["destination_community"]), int(row["count"])))
    if not rows:
        return {}
    real = [(a, b) for _, a, b, _ in rows if a >= 0]
    k = max(max(a, b) for a, b in real) + 1 if real else 1
    out: Dict[str, FlowMatrix] = {}
    by_class: Dict[str, List[Tuple[int, int, int]]] = {}
    for dc, a, b, c in rows:
        by_class.setdefault(dc, []).append((a, b, c))
    for dc, items in by_class.items():
        counts = np.zeros((k, k), dtype=np.int64)
        unassigned = 0
        for a, b, c in items:
            if a < 0:
                unassigned = c
            else:
                counts[a, b] = c
        # day_count is not round-tripped through the CSV; the JSON summary
        # carries it for reporting
        out[dc] = FlowMatrix(dc, counts, unassigned, 0)
    return out


def write_flow_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
