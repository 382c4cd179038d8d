"""Dataset loading, validation, and anomalous-day filtering.

Five CSV kinds make up an input bundle: stops, routes, terminals, pings,
validations. Rows that violate type invariants are collected into a rejects
report, never silently dropped; a reject rate above the threshold aborts the
load. Writers round-trip every loaded dataset byte-for-byte on reload.
"""

from __future__ import annotations

import csv
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import DataError
from .records import (
    Dataset,
    DayReport,
    GpsPing,
    PingTable,
    RouteDef,
    Stop,
    Terminal,
    Validation,
    ValidationTable,
    day_class_of,
    day_from_index,
    format_iso,
    parse_iso,
)

CSV_HEADERS = {
    "stops": ["stop_id", "lat", "lon", "is_terminal"],
    "routes": ["route_id", "direction", "seq", "stop_id"],
    "terminals": ["terminal_id", "stop_id"],
    "pings": ["vehicle_id", "route_id", "timestamp_iso8601", "lat", "lon"],
    "validations": ["user_id", "timestamp_iso8601", "route_id", "vehicle_id", "terminal_id"],
}

DIRECTIONS = ("outbound", "inbound")
DEFAULT_REJECT_THRESHOLD = 0.01
BBOX_MARGIN_DEG = 0.1


@dataclass(frozen=True)
class RejectedRow:
    line_no: int
    reason: str
    raw: str


@dataclass
class LoadResult:
    kind: str
    records: object  # dict or table, by kind
    rejects: List[RejectedRow] = field(default_factory=list)
    row_count: int = 0

    @property
    def reject_rate(self) -> float:
        return len(self.rejects) / self.row_count if self.row_count else 0.0


def _open_rows(path, kind):
    path = Path(path)
    if not path.exists():
        raise DataError(f"{kind} file not found: {path}")
    f = open(path, newline="")
    reader = csv.reader(f)
    try:
        header = next(reader)
    except StopIteration:
        f.close()
        raise DataError(f"{kind} file is empty: {path}")
    if header != CSV_HEADERS[kind]:
        f.close()
        raise DataError(f"malformed {kind} header: expected {CSV_HEADERS[kind]}, got {header}")
    return f, reader


def _check_threshold(result: LoadResult, threshold: float) -> LoadResult:
    if result.row_count and result.reject_rate > threshold:
        raise DataError(
            f"{result.kind}: reject rate {result.reject_rate:.2%} exceeds "
            f"threshold {threshold:.2%} ({len(result.rejects)}/{result.row_count} rows)"
        )
    return result


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1"):
        return True
    if t in ("false", "0", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_stops(path, reject_threshold: float = DEFAULT_REJECT_THRESHOLD) -> LoadResult:
    f, reader = _open_rows(path, "stops")
    stops: Dict[str, Stop] = {}
    rejects: List[RejectedRow] = []
    n = 0
    with f:
        for line_no, row in enumerate(reader, start=2):
            n += 1
            if len(row) != 4:
                rejects.append(RejectedRow(line_no, "wrong field count", ",".join(row)))
                continue
            sid, lat_s, lon_s, term_s = row
            try:
                lat = float(lat_s)
                lon = float(lon_s)
                is_term = _parse_bool(term_s)
            except ValueError as e:
                rejects.append(RejectedRow(line_no, str(e), ",".join(row)))
                continue
            if not sid:
                rejects.append(RejectedRow(line_no, "empty stop_id", ",".join(row)))
            elif not -90.0 <= lat <= 90.0:
                rejects.append(RejectedRow(line_no, "lat out of range", ",".join(row)))
            elif not -180.0 <= lon <= 180.0:
                rejects.append(RejectedRow(line_no, "lon out of range", ",".join(row)))
            elif sid in stops:
                rejects.append(RejectedRow(line_no, "duplicate stop_id", ",".join(row)))
            else:
                stops[sid] = Stop(sid, lat, lon, is_term)
    return _check_threshold(LoadResult("stops", stops, rejects, n), reject_threshold)


def load_routes(path, stops: Optional[Dict[str, Stop]] = None,
                reject_threshold: float = DEFAULT_REJECT_THRESHOLD) -> LoadResult:
    f, reader = _open_rows(path, "routes")
    rows_by_route: Dict[str, List[Tuple[int, str, int, str]]] = defaultdict(list)
    rejects: List[RejectedRow] = []
    n = 0
    with f:
        for line_no, row in enumerate(reader, start=2):
            n += 1
            if len(row) != 4:
                rejects.append(RejectedRow(line_no, "wrong field count", ",".join(row)))
                continue
            rid, direction, seq_s, sid = row
            if direction not in DIRECTIONS:
                rejects.append(RejectedRow(line_no, f"unknown direction {direction!r}", ",".join(row)))
                continue
            try:
                seq = int(seq_s)
            except ValueError:
                rejects.append(RejectedRow(line_no, "seq not an integer", ",".join(row)))
                continue
            if seq < 0 or not rid or not sid:
                rejects.append(RejectedRow(line_no, "bad seq or empty id", ",".join(row)))
                continue
            if stops is not None and sid not in stops:
                rejects.append(RejectedRow(line_no, f"unknown stop_id {sid!r}", ",".join(row)))
                continue
            rows_by_route[rid].append((seq, direction, line_no, sid))

    routes: Dict[str, RouteDef] = {}
    for rid, rows in rows_by_route.items():
        rows.sort(key=lambda r: r[0])
        first_line = rows[0][2]
        seqs = [r[0] for r in rows]
        directions = {r[1] for r in rows}
        itinerary = tuple(r[3] for r in rows)
        if seqs != list(range(len(rows))):
            rejects.append(RejectedRow(first_line, f"route {rid}: seq not contiguous from 0", rid))
        elif len(directions) != 1:
            rejects.append(RejectedRow(first_line, f"route {rid}: inconsistent direction", rid))
        elif len(itinerary) < 2:
            rejects.append(RejectedRow(first_line, f"route {rid}: itinerary shorter than 2", rid))
        elif any(a == b for a, b in zip(itinerary, itinerary[1:])):
            rejects.append(RejectedRow(first_line, f"route {rid}: consecutive duplicate stop", rid))
        else:
            routes[rid] = RouteDef(rid, rows[0][1], itinerary)
    return _check_threshold(LoadResult("routes", routes, rejects, n), reject_threshold)


def load_terminals(path, stops: Optional[Dict[str, Stop]] = None,
                   reject_threshold: float = DEFAULT_REJECT_THRESHOLD) -> LoadResult:
    f, reader = _open_rows(path, "terminals")
    terminals: Dict[str, Terminal] = {}
    rejects: List[RejectedRow] = []
    n = 0
    with f:
        for line_no, row in enumerate(reader, start=2):
            n += 1
            if len(row) != 2:
                rejects.append(RejectedRow(line_no, "wrong field count", ",".join(row)))
                continue
            tid, sid = row
            if not tid or not sid:
                rejects.append(RejectedRow(line_no, "empty id", ",".join(row)))
            elif tid in terminals:
                rejects.append(RejectedRow(line_no, "duplicate terminal_id", ",".join(row)))
            elif stops is not None and sid not in stops:
                rejects.append(RejectedRow(line_no, f"unknown stop_id {sid!r}", ",".join(row)))
            else:
                terminals[tid] = Terminal(tid, sid)
    return _check_threshold(LoadResult("terminals", terminals, rejects, n), reject_threshold)


def _bbox(stops: Dict[str, Stop]):
    lats = [s.lat for s in stops.values()]
    lons = [s.lon for s in stops.values()]
    return (min(lats) - BBOX_MARGIN_DEG, max(lats) + BBOX_MARGIN_DEG,
            min(lons) - BBOX_MARGIN_DEG, max(lons) + BBOX_MARGIN_DEG)


def load_pings(path, stops: Optional[Dict[str, Stop]] = None,
               routes: Optional[Dict[str, RouteDef]] = None,
               reject_threshold: float = DEFAULT_REJECT_THRESHOLD) -> LoadResult:
    f, reader = _open_rows(path, "pings")
    box = _bbox(stops) if stops else None
    vbook: Dict[str, int] = {}
    rbook: Dict[str, int] = {}
    vc: List[int] = []
    rc: List[int] = []
    ts: List[float] = []
    lat: List[float] = []
    lon: List[float] = []
    rejects: List[RejectedRow] = []
    n = 0
    with f:
        for line_no, row in enumerate(reader, start=2):
            n += 1
            if len(row) != 5:
                rejects.append(RejectedRow(line_no, "wrong field count", ",".join(row)))
                continue
            vid, rid, ts_s, lat_s, lon_s = row
            if not vid or not rid:
                rejects.append(RejectedRow(line_no, "empty id", ",".join(row)))
                continue
            if routes is not None and rid not in routes:
                rejects.append(RejectedRow(line_no, f"unknown route_id {rid!r}", ",".join(row)))
                continue
            try:
                t = parse_iso(ts_s)
                la = float(lat_s)
                lo = float(lon_s)
            except ValueError as e:
                rejects.append(RejectedRow(line_no, str(e), ",".join(row)))
                continue
            if box is not None and not (box[0] <= la <= box[1] and box[2] <= lo <= box[3]):
                rejects.append(RejectedRow(line_no, "coordinate outside stop bounding box", ",".join(row)))
                continue
            if not (-90.0 <= la <= 90.0 and -180.0 <= lo <= 180.0):
                rejects.append(RejectedRow(line_no, "coordinate out of range", ",".join(row)))
                continue
            vc.append(vbook.setdefault(vid, len(vbook)))
            rc.append(rbook.setdefault(rid, len(rbook)))
            ts.append(t)
            lat.append(la)
            lon.append(lo)
    table = PingTable(
        list(vbook), list(rbook),
        np.array(vc, dtype=np.int32), np.array(rc, dtype=np.int32),
        np.array(ts, dtype=np.float64), np.array(lat, dtype=np.float64),
        np.array(lon, dtype=np.float64),
    )
    return _check_threshold(LoadResult("pings", table, rejects, n), reject_threshold)


def load_validations(path, routes: Optional[Dict[str, RouteDef]] = None,
                     terminals: Optional[Dict[str, Terminal]] = None,
                     reject_threshold: float = DEFAULT_REJECT_THRESHOLD) -> LoadResult:
    f, reader = _open_rows(path, "validations")
    ubook: Dict[str, int] = {}
    rbook: Dict[str, int] = {}
    vbook: Dict[str, int] = {}
    tbook: Dict[str, int] = {}
    uc: List[int] = []
    rc: List[int] = []
    vc: List[int] = []
    tc: List[int] = []
    ts: List[float] = []
    rejects: List[RejectedRow] = []
    n = 0
    with f:
        for line_no, row in enumerate(reader, start=2):
            n += 1
            if len(row) != 5:
                rejects.append(RejectedRow(line_no, "wrong field count", ",".join(row)))
                continue
            uid, ts_s, rid, vid, tid = row
            if not uid:
                rejects.append(RejectedRow(line_no, "empty user_id", ",".join(row)))
                continue
            # exactly one of vehicle/terminal: on-bus vs terminal validation
            if bool(vid) == bool(tid):
                rejects.append(RejectedRow(line_no, "need exactly one of vehicle_id/terminal_id", ",".join(row)))
                continue
            if routes is not None and rid and rid not in routes:
                rejects.append(RejectedRow(line_no, f"unknown route_id {rid!r}", ",".join(row)))
                continue
            if terminals is not None and tid and tid not in terminals:
                rejects.append(RejectedRow(line_no, f"unknown terminal_id {tid!r}", ",".join(row)))
                continue
            try:
                t = parse_iso(ts_s)
            except ValueError as e:
                rejects.append(RejectedRow(line_no, str(e), ",".join(row)))
                continue
            uc.append(ubook.setdefault(uid, len(ubook)))
            rc.append(rbook.setdefault(rid, len(rbook)) if rid else -1)
            vc.append(vbook.setdefault(vid, len(vbook)) if vid else -1)
            tc.append(tbook.setdefault(tid, len(tbook)) if tid else -1)
            ts.append(t)
    table = ValidationTable(
        list(ubook), list(rbook), list(vbook), list(tbook),
        np.array(uc, dtype=np.int32), np.array(rc, dtype=np.int32),
        np.array(vc, dtype=np.int32), np.array(tc, dtype=np.int32),
        np.array(ts, dtype=np.float64),
    )
    return _check_threshold(LoadResult("validations", table, rejects, n), reject_threshold)


_LOADERS = {
    "stops": load_stops,
    "routes": load_routes,
    "terminals": load_terminals,
    "pings": load_pings,
    "validations": load_validations,
}


def load_dataset(path, kind: str, reject_threshold: float = DEFAULT_REJECT_THRESHOLD,
                 **context) -> LoadResult:
    """Load one dataset file. Context kwargs (stops=, routes=, terminals=)
    enable cross-referential checks when the referenced collections are known.
    """
    if kind not in _LOADERS:
        raise DataError(f"unknown dataset kind: {kind!r}")
    return _LOADERS[kind](path, reject_threshold=reject_threshold, **context)


def load_holidays(path) -> frozenset:
    """Optional calendar file: one ISO date per line, '#' comments allowed."""
    days = set()
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        days.add(date.fromisoformat(line))
    return frozenset(days)


def load_bundle(data_dir, holidays_path=None,
                reject_threshold: float = DEFAULT_REJECT_THRESHOLD) -> Tuple[Dataset, Dict[str, LoadResult]]:
    """Load all five datasets with cross-referential validation."""
    data_dir = Path(data_dir)
    results: Dict[str, LoadResult] = {}
    results["stops"] = load_stops(data_dir / "stops.csv", reject_threshold)
    stops = results["stops"].records
    results["routes"] = load_routes(data_dir / "routes.csv", stops, reject_threshold)
    routes = results["routes"].records
    results["terminals"] = load_terminals(data_dir / "terminals.csv", stops, reject_threshold)
    terminals = results["terminals"].records
    results["pings"] = load_pings(data_dir / "pings.csv", stops, routes, reject_threshold)
    results["validations"] = load_validations(
        data_dir / "validations.csv", routes, terminals, reject_threshold)
    holidays = load_holidays(holidays_path) if holidays_path else frozenset()
    dataset = Dataset(stops, routes, terminals,
                      results["pings"].records, results["validations"].records,
                      holidays=holidays)
    return dataset, results


# ---------------------------------------------------------------- writers

def write_stops(stops: Iterable[Stop], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADERS["stops"])
        for s in stops:
            # str() is the shortest round-tripping float form, so
            # write -> reload preserves records exactly
            w.writerow([s.stop_id, str(s.lat), str(s.lon),
                        "true" if s.is_terminal else "false"])


def write_routes(routes: Iterable[RouteDef], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADERS["routes"])
        for r in routes:
            for seq, sid in enumerate(r.itinerary):
                w.writerow([r.route_id, r.direction, seq, sid])


def write_terminals(terminals: Iterable[Terminal], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADERS["terminals"])
        for t in terminals:
            w.writerow([t.terminal_id, t.stop_id])


def write_pings(pings: Iterable[GpsPing], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADERS["pings"])
        for p in pings:
            w.writerow([p.vehicle_id, p.route_id, format_iso(p.ts),
                        str(p.lat), str(p.lon)])


def write_validations(validations: Iterable[Validation], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADERS["validations"])
        for v in validations:
            w.writerow([v.user_id, format_iso(v.ts), v.route_id or "",
                        v.vehicle_id or "", v.terminal_id or ""])


def write_day_reports(reports: Iterable[DayReport], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["day", "day_class", "validation_count", "kept", "reason"])
        for r in reports:
            w.writerow([r.day.isoformat(), r.day_class, r.validation_count,
                        "true" if r.kept else "false", r.reason])


# ------------------------------------------------------- anomalous days

def filter_anomalous_days(validations: ValidationTable,
                          low_factor: float = 0.5, high_factor: float = 2.0,
                          holidays: frozenset = frozenset()) -> Tuple[ValidationTable, List[DayReport]]:
    """Drop whole days whose validation count is anomalous for their day class.

    A day is dropped when its count falls below low_factor x (median count of
    days in the same class) or above high_factor x that median. Feed errors
    show up as order-of-magnitude outliers, so multiplicative factors around
    a robust center catch them without tripping on weekday/weekend level
    differences.
    """
    if not 0.0 < low_factor < 1.0 < high_factor:
        raise DataError(f"day filter factors must satisfy 0 < low < 1 < high, "
                        f"got ({low_factor}, {high_factor})")
    if len(validations) == 0:
        raise DataError("no validations to filter")

    day_idx = validations.day_indices()
    days, counts = np.unique(day_idx, return_counts=True)
    by_class: Dict[str, List[int]] = defaultdict(list)
    day_dates = {}
    for d, c in zip(days, counts):
        dd = day_from_index(d)
        day_dates[int(d)] = dd
        by_class[day_class_of(dd, holidays)].append(int(c))
    medians = {cls: statistics.median(v) for cls, v in by_class.items()}

    reports: List[DayReport] = []
    kept_days = set()
    for d, c in zip(days, counts):
        dd = day_dates[int(d)]
        cls = day_class_of(dd, holidays)
        med = medians[cls]
        lo, hi = low_factor * med, high_factor * med
        if c < lo:
            reports.append(DayReport(dd, cls, int(c), False,
                                     f"count {c} below {low_factor} x {cls} median {med:g}"))
        elif c > hi:
            reports.append(DayReport(dd, cls, int(c), False,
                                     f"count {c} above {high_factor} x {cls} median {med:g}"))
        else:
            kept_days.add(int(d))
            reports.append(DayReport(dd, cls, int(c), True))
    if not kept_days:
        raise DataError("all days dropped by the anomaly filter; feed looks corrupt")
    mask = np.isin(day_idx, np.array(sorted(kept_days), dtype=np.int64))
    return validations.select(mask), reports
