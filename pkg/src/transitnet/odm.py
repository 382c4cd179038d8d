"""Per-user daily trip chaining into stop-level OD pairs.

The pipeline per user-day: resolve each validation to a boarding stop
(GPS match + snap for on-bus taps, direct stop for terminal taps), apply the
recurring-user corrections across days (missing-intermediate repair, origin
snap), then close the day's chain: boardings P1..Pn yield pairs Pi->Pi+1 and
Pn->P1. Every per-record failure lands in diagnostics, never in an exception.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from datetime import date
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .geo import haversine_m, haversine_m_vec
from .records import (
    Boarding,
    Dataset,
    OdPair,
    PingTable,
    RouteDef,
    SOURCE_GPS,
    SOURCE_INFERRED,
    SOURCE_TERMINAL,
    Stop,
    Terminal,
    Validation,
    ValidationTable,
    day_class_of,
    day_from_index,
)

DEFAULT_MAX_GAP_S = 120.0       # ~4 ping intervals at 30 s cadence
DEFAULT_SNAP_RADIUS_M = 300.0


@dataclass
class OdmConfig:
    max_gap_s: float = DEFAULT_MAX_GAP_S
    snap_radius_m: float = DEFAULT_SNAP_RADIUS_M
    recurrence_min_days: int = 2
    recurrence_fraction: float = 0.5


OUTCOMES = ("chained", "dropped_single_boarding", "dropped_unreachable",
            "corrected_intermediate", "corrected_origin_snap")


@dataclass
class ChainDiagnostics:
    """Per-user-day outcomes plus record-level failure counters."""

    outcomes: Dict[str, int] = field(default_factory=lambda: {o: 0 for o in OUTCOMES})
    unlocatable: int = 0
    unsnappable: int = 0
    missing_route: int = 0
    degenerate_pairs_dropped: int = 0
    repairs_inserted: int = 0
    snaps_applied: int = 0

    def merge(self, other: "ChainDiagnostics") -> "ChainDiagnostics":
        for k, v in other.outcomes.items():
            self.outcomes[k] += v
        self.unlocatable += other.unlocatable
        self.unsnappable += other.unsnappable
        self.missing_route += other.missing_route
        self.degenerate_pairs_dropped += other.degenerate_pairs_dropped
        self.repairs_inserted += other.repairs_inserted
        self.snaps_applied += other.snaps_applied
        return self

    def as_rows(self) -> List[Tuple[str, int]]:
        rows = [(f"outcome_{k}", v) for k, v in self.outcomes.items()]
        rows += [("validations_unlocatable", self.unlocatable),
                 ("validations_unsnappable", self.unsnappable),
                 ("validations_missing_route", self.missing_route),
                 ("degenerate_pairs_dropped", self.degenerate_pairs_dropped),
                 ("repairs_inserted", self.repairs_inserted),
                 ("origin_snaps_applied", self.snaps_applied)]
        return rows


# ------------------------------------------------------------ locate / snap

def locate_validation(v: Validation, pings: PingTable,
                      max_gap_s: float = DEFAULT_MAX_GAP_S) -> Optional[Tuple[float, float]]:
    """Coordinate of the vehicle's ping nearest in time to the validation.

    Ties break toward the earlier ping. None when no ping of that vehicle
    falls within max_gap_s.
    """
    if v.vehicle_id is None:
        return None
    try:
        vcode = pings.vehicle_ids.index(v.vehicle_id)
    except ValueError:
        return None
    sl = pings.vehicle_slice(vcode)
    ts = pings.ts[sl]
    if ts.size == 0:
        return None
    i = int(np.searchsorted(ts, v.ts))
    best = None
    for j in (i - 1, i):
        if 0 <= j < ts.size:
            gap = abs(float(ts[j]) - v.ts)
            if best is None or gap < best[0]:   # strict: earlier ping wins ties
                best = (gap, j)
    if best is None or best[0] > max_gap_s:
        return None
    j = sl.start + best[1]
    return float(pings.lat[j]), float(pings.lon[j])


def snap_to_stop(coord: Tuple[float, float], route: RouteDef,
                 stops: Dict[str, Stop],
                 max_radius_m: float = DEFAULT_SNAP_RADIUS_M) -> Optional[str]:
    """Itinerary stop nearest to coord; ties break to the earlier position."""
    lat = np.array([stops[s].lat for s in route.itinerary])
    lon = np.array([stops[s].lon for s in route.itinerary])
    d = haversine_m_vec(coord[0], coord[1], lat, lon)
    k = int(np.argmin(d))        # argmin returns the first minimum
    if float(d[k]) > max_radius_m:
        return None
    return route.itinerary[k]


# ------------------------------------------------------------------ chaining

def chain_daily_trips(boardings: Sequence[Boarding]) -> List[OdPair]:
    """Close one user-day: n >= 2 boardings at P1..Pn give Pi->Pi+1 and Pn->P1.

    Degenerate pairs (origin == destination after snapping) are skipped;
    leg indices stay contiguous. Single boardings yield nothing.
    """
    if len(boardings) < 2:
        return []
    day = day_from_index(int(boardings[0].ts // 86400))
    pairs: List[OdPair] = []
    n = len(boardings)
    leg = 0
    for i, b in enumerate(boardings):
        dest = boardings[(i + 1) % n].stop_id
        if dest == b.stop_id:
            continue
        leg += 1
        pairs.append(OdPair(b.user_id, day, leg, b.stop_id, dest, b.ts))
    return pairs


# -------------------------------------------------- recurring-user corrections

class _RoutePositions:
    """First-occurrence itinerary position per stop, per route."""

    def __init__(self, routes: Dict[str, RouteDef]):
        self.pos: Dict[str, Dict[str, int]] = {}
        for rid, r in routes.items():
            d: Dict[str, int] = {}
            for p, s in enumerate(r.itinerary):
                if s not in d:
                    d[s] = p
            self.pos[rid] = d

    def reaches(self, route_id: Optional[str], origin: str, dest: str) -> bool:
        if route_id is None or route_id not in self.pos:
            return False
        d = self.pos[route_id]
        po = d.get(origin)
        pd = d.get(dest)
        return po is not None and pd is not None and pd > po


def _modal_sequence(seqs: List[Tuple[str, ...]]) -> Tuple[Tuple[str, ...], int]:
    counts = Counter(seqs)
    top = max(counts.values())
    # deterministic tie-break: lexicographically smallest among the most common
    cands = sorted(seq for seq, c in counts.items() if c == top)
    return cands[0], top


def _missing_index(day_seq: Tuple[str, ...], modal: Tuple[str, ...]) -> Optional[int]:
    """Smallest interior j with day_seq == modal minus element j."""
    if len(day_seq) != len(modal) - 1 or len(modal) < 3:
        return None
    for j in range(1, len(modal) - 1):
        if day_seq == modal[:j] + modal[j + 1:]:
            return j
    return None


def recurring_pattern_correction(
        history: Dict[date, List[Boarding]],
        routes: Dict[str, RouteDef],
        cfg: OdmConfig = OdmConfig(),
        holidays: frozenset = frozenset(),
        positions: Optional[_RoutePositions] = None,
) -> Tuple[Dict[date, List[Boarding]], ChainDiagnostics]:
    """Apply both recurring-user corrections to one user's day history.

    Day sequences are grouped by day class; a route-id sequence observed on
    at least max(min_days, ceil(fraction x class days)) days is the user's
    recurring pattern for that class. Days showing the pattern minus one
    interior boarding get the reachability treatment: keep if the boarded
    route covers the hop, insert the usual intermediate if that is reachable
    instead, otherwise drop the day. Then all origins of pattern days snap to
    the earliest itinerary position observed for their leg.
    """
    diag = ChainDiagnostics()
    pos = positions if positions is not None else _RoutePositions(routes)
    out: Dict[date, List[Boarding]] = {d: list(bs) for d, bs in history.items()}

    by_class: Dict[str, List[date]] = defaultdict(list)
    for d in sorted(out):
        by_class[day_class_of(d, holidays)].append(d)

    day_state: Dict[date, str] = {}

    for cls, days in by_class.items():
        if len(days) < 2:
            continue
        seqs = {d: tuple(b.route_id or "" for b in out[d]) for d in days}
        modal, support = _modal_sequence([seqs[d] for d in days])
        threshold = max(cfg.recurrence_min_days,
                        math.ceil(cfg.recurrence_fraction * len(days)))
        if support < threshold or len(modal) == 0:
            continue

        # representative stop per modal leg: the most common boarding stop on
        # days that match the pattern exactly
        match_days = [d for d in days if seqs[d] == modal]
        leg_stop_counts: List[Counter] = [Counter() for _ in modal]
        for d in match_days:
            for i, b in enumerate(out[d]):
                leg_stop_counts[i][b.stop_id] += 1

        # (a) missing-intermediate repair on near-miss days
        for d in days:
            j = _missing_index(seqs[d], modal)
            if j is None:
                continue
            bs = out[d]
            p1 = bs[j - 1]
            p3 = bs[j]
            if pos.reaches(p1.route_id, p1.stop_id, p3.stop_id):
                continue                      # direct ride is plausible; keep
            if not leg_stop_counts[j]:
                continue
            p2_stop = max(leg_stop_counts[j].items(), key=lambda kv: (kv[1], kv[0]))[0]
            if pos.reaches(p1.route_id, p1.stop_id, p2_stop):
                inserted = Boarding(p1.user_id, (p1.ts + p3.ts) / 2.0,
                                    modal[j] or None, p2_stop, SOURCE_INFERRED)
                out[d] = bs[:j] + [inserted] + bs[j:]
                seqs[d] = modal
                match_days.append(d)
                diag.repairs_inserted += 1
                day_state[d] = "corrected_intermediate"
            else:
                out[d] = []
                day_state[d] = "dropped_unreachable"

        # (b) origin snap: earliest-in-itinerary stop observed per pattern leg
        snap_targets: List[Optional[str]] = []
        for i, rid in enumerate(modal):
            observed = Counter()
            for d in match_days:
                if d in out and len(out[d]) == len(modal):
                    observed[out[d][i].stop_id] += 1
            route_pos = pos.pos.get(rid)
            if not route_pos:
                snap_targets.append(None)
                continue
            ranked = [(route_pos[s], s) for s in observed if s in route_pos]
            if len(ranked) <= 1 or len(ranked) != len(observed):
                snap_targets.append(None)
                continue
            snap_targets.append(min(ranked)[1])
        for d in match_days:
            bs = out.get(d)
            if not bs or len(bs) != len(modal):
                continue
            changed = False
            for i, target in enumerate(snap_targets):
                if target is not None and bs[i].stop_id != target:
                    b = bs[i]
                    bs[i] = Boarding(b.user_id, b.ts, b.route_id, target, b.source)
                    changed = True
                    diag.snaps_applied += 1
            if changed and day_state.get(d) != "corrected_intermediate":
                day_state[d] = "corrected_origin_snap"

    # per-day outcome bookkeeping (priority: drop > repair > snap > plain)
    for d in sorted(out):
        state = day_state.get(d)
        if state == "dropped_unreachable":
            diag.outcomes["dropped_unreachable"] += 1
        elif state == "corrected_intermediate":
            diag.outcomes["corrected_intermediate"] += 1
        elif state == "corrected_origin_snap":
            diag.outcomes["corrected_origin_snap"] += 1
        elif len(out[d]) >= 2:
            diag.outcomes["chained"] += 1
        elif len(out[d]) == 1:
            diag.outcomes["dropped_single_boarding"] += 1
    return out, diag


# -------------------------------------------------------------- bulk pipeline

def _bulk_locate(validations: ValidationTable, pings: PingTable,
                 max_gap_s: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized nearest-ping lookup for all on-bus validations.

    Returns (ok mask, lat, lon) aligned with the validation table.
    """
    n = len(validations)
    ok = np.zeros(n, dtype=bool)
    lat = np.full(n, np.nan)
    lon = np.full(n, np.nan)
    ping_vcode = {vid: i for i, vid in enumerate(pings.vehicle_ids)}

    order = np.argsort(validations.vehicle_code, kind="stable")
    vcodes = validations.vehicle_code[order]
    starts = np.flatnonzero(np.r_[True, vcodes[1:] != vcodes[:-1]])
    bounds = np.r_[starts, len(vcodes)]
    for s, e in zip(bounds[:-1], bounds[1:]):
        vc = int(vcodes[s])
        if vc < 0:
            continue
        pc = ping_vcode.get(validations.vehicle_ids[vc])
        if pc is None:
            continue
        sl = pings.vehicle_slice(pc)
        pts = pings.ts[sl]
        if pts.size == 0:
            continue
        rows = order[s:e]
        vts = validations.ts[rows]
        i = np.searchsorted(pts, vts)
        left = np.clip(i - 1, 0, pts.size - 1)
        right = np.clip(i, 0, pts.size - 1)
        gap_l = np.abs(pts[left] - vts)
        gap_r = np.abs(pts[right] - vts)
        pick = np.where(gap_l <= gap_r, left, right)   # earlier ping wins ties
        gap = np.minimum(gap_l, gap_r)
        hit = gap <= max_gap_s
        ok[rows[hit]] = True
        lat[rows[hit]] = pings.lat[sl][pick[hit]]
        lon[rows[hit]] = pings.lon[sl][pick[hit]]
    return ok, lat, lon


def resolve_boardings(validations: ValidationTable, pings: PingTable,
                      routes: Dict[str, RouteDef], stops: Dict[str, Stop],
                      terminals: Dict[str, Terminal],
                      cfg: OdmConfig = OdmConfig()):
    """Resolve every validation to a boarding stop where possible.

    Returns (stop_of, stop_ids, source, diag): stop_of[i] indexes stop_ids
    (-1 when unresolvable), source[i] is 1 for terminal taps and 0 for
    GPS-matched rows, and diag counts the failures.
    """
    diag = ChainDiagnostics()
    n = len(validations)
    if n == 0:
        return np.empty(0, dtype=np.int64), [], np.empty(0, dtype=np.int8), diag

    term_stop = {t.terminal_id: t.stop_id for t in terminals.values()}

    ok, lat, lon = _bulk_locate(validations, pings, cfg.max_gap_s)

    # resolve to stops
    stop_of = np.full(n, -1, dtype=np.int64)
    stop_ids: List[str] = []
    stop_index: Dict[str, int] = {}

    def _sid_code(sid: str) -> int:
        c = stop_index.get(sid)
        if c is None:
            c = len(stop_ids)
            stop_index[sid] = c
            stop_ids.append(sid)
        return c

    source = np.zeros(n, dtype=np.int8)      # 0 gps, 1 terminal
    tmask = validations.terminal_code >= 0
    for i in np.flatnonzero(tmask):
        tid = validations.terminal_ids[validations.terminal_code[i]]
        sid = term_stop.get(tid)
        if sid is not None:
            stop_of[i] = _sid_code(sid)
            source[i] = 1

    # snap on-bus validations per route
    onbus = (~tmask) & ok
    no_route = onbus & (validations.route_code < 0)
    diag.missing_route = int(no_route.sum())
    onbus &= validations.route_code >= 0
    diag.unlocatable = int(((~tmask) & ~ok).sum())

    for rc in np.unique(validations.route_code[onbus]):
        rid = validations.route_ids[rc]
        route = routes.get(rid)
        rows = np.flatnonzero(onbus & (validations.route_code == rc))
        if route is None:
            diag.unsnappable += rows.size
            continue
        it_lat = np.array([stops[s].lat for s in route.itinerary])
        it_lon = np.array([stops[s].lon for s in route.itinerary])
        d = haversine_m_vec(lat[rows, None], lon[rows, None],
                            it_lat[None, :], it_lon[None, :])
        k = np.argmin(d, axis=1)
        dist = d[np.arange(rows.size), k]
        good = dist <= cfg.snap_radius_m
        diag.unsnappable += int((~good).sum())
        for r, kk in zip(rows[good], k[good]):
            stop_of[r] = _sid_code(route.itinerary[int(kk)])

    return stop_of, stop_ids, source, diag


def stop_boarding_counts(ds: Dataset,
                         cfg: OdmConfig = OdmConfig()) -> Dict[str, int]:
    """Total resolved boardings per stop, before any chaining or filtering."""
    stop_of, stop_ids, _, _ = resolve_boardings(
        ds.validations, ds.pings, ds.routes, ds.stops, ds.terminals, cfg)
    counts: Dict[str, int] = {}
    for code in stop_of[stop_of >= 0]:
        sid = stop_ids[int(code)]
        counts[sid] = counts.get(sid, 0) + 1
    return counts


def build_odm(validations: ValidationTable, pings: PingTable,
              routes: Dict[str, RouteDef], stops: Dict[str, Stop],
              terminals: Dict[str, Terminal],
              cfg: OdmConfig = OdmConfig(),
              holidays: frozenset = frozenset()) -> Tuple[List[OdPair], ChainDiagnostics]:
    """Full OD-matrix construction: locate -> snap -> correct -> chain."""
    n = len(validations)
    if n == 0:
        return [], ChainDiagnostics()

    positions = _RoutePositions(routes)
    stop_of, stop_ids, source, diag = resolve_boardings(
        validations, pings, routes, stops, terminals, cfg)

    # group by user and correct day histories
    resolved = stop_of >= 0
    pairs: List[OdPair] = []
    ucodes = validations.user_code
    starts = np.flatnonzero(np.r_[True, ucodes[1:] != ucodes[:-1]])
    bounds = np.r_[starts, n]
    day_idx_all = validations.day_indices()

    for s, e in zip(bounds[:-1], bounds[1:]):
        rows = np.arange(s, e)[resolved[s:e]]
        if rows.size == 0:
            continue
        uid = validations.user_ids[ucodes[s]]
        history: Dict[date, List[Boarding]] = defaultdict(list)
        for i in rows:
            rc = validations.route_code[i]
            b = Boarding(uid, float(validations.ts[i]),
                         validations.route_ids[rc] if rc >= 0 else None,
                         stop_ids[stop_of[i]],
                         SOURCE_TERMINAL if source[i] else SOURCE_GPS)
            history[day_from_index(int(day_idx_all[i]))].append(b)
        corrected, udiag = recurring_pattern_correction(
            history, routes, cfg, holidays, positions=positions)
        diag.merge(udiag)
        for d in sorted(corrected):
            bs = corrected[d]
            got = chain_daily_trips(bs)
            diag.degenerate_pairs_dropped += max(0, len(bs) - len(got)) if len(bs) >= 2 else 0
            pairs.extend(got)
    return pairs, diag


def build_odm_for_dataset(ds: Dataset, cfg: OdmConfig = OdmConfig()):
    return build_odm(ds.validations, ds.pings, ds.routes, ds.stops,
                     ds.terminals, cfg, ds.holidays)


# ------------------------------------------------------------------- file io

ODPAIR_HEADER = ["user_id", "day", "leg_index", "origin_stop_id",
                 "destination_stop_id", "origin_time"]


def write_odpairs(path, pairs: Iterable[OdPair]) -> None:
    import csv

    from .records import format_iso
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ODPAIR_HEADER)
        for p in pairs:
            w.writerow([p.user_id, p.day.isoformat(), p.leg_index,
                        p.origin_stop_id, p.destination_stop_id,
                        format_iso(p.origin_ts)])


def load_odpairs(path) -> List[OdPair]:
    import csv

    from .errors import DataError
    from .records import parse_iso
    pairs: List[OdPair] = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != ODPAIR_HEADER:
            raise DataError(f"{path}: unexpected header {r.fieldnames}")
        for row in r:
            pairs.append(OdPair(row["user_id"], date.fromisoformat(row["day"]),
                                int(row["leg_index"]), row["origin_stop_id"],
                                row["destination_stop_id"],
                                parse_iso(row["origin_time"])))
    return pairs


def write_diagnostics(path, diag: ChainDiagnostics) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "count"])
        for name, count in diag.as_rows():
            w.writerow([name, count])
