"""Core record types and timestamp/day helpers.

Every loader and pipeline stage trades in these types. Timestamps are float
epoch seconds (UTC) internally; ISO-8601 strings with an explicit offset only
at the file boundary.

Pings and validations arrive in the millions, so their collections are
columnar (numpy arrays + string dictionaries) rather than lists of objects;
both tables still yield per-row records for code that wants them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

WEEKDAY = "weekday"
SATURDAY = "saturday"
SUNDAY_HOLIDAY = "sunday_holiday"
DAY_CLASSES = (WEEKDAY, SATURDAY, SUNDAY_HOLIDAY)

SOURCE_GPS = "gps_match"
SOURCE_TERMINAL = "terminal"
SOURCE_INFERRED = "inferred"


def parse_iso(text: str) -> float:
    """ISO-8601 with explicit offset -> epoch seconds. Accepts a Z suffix."""
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {text!r}")
    return dt.timestamp()


def format_iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def day_of(ts: float) -> date:
    """Calendar day of an epoch timestamp, in UTC."""
    return datetime.fromtimestamp(ts, tz=timezone.utc).date()


def day_class_of(day: date, holidays: frozenset = frozenset()) -> str:
    if day in holidays or day.weekday() == 6:
        return SUNDAY_HOLIDAY
    if day.weekday() == 5:
        return SATURDAY
    return WEEKDAY


def date_range(start: date, days: int) -> List[date]:
    return [start + timedelta(days=i) for i in range(days)]


@dataclass(frozen=True)
class Stop:
    stop_id: str
    lat: float
    lon: float
    is_terminal: bool = False


@dataclass(frozen=True)
class RouteDef:
    """One directed route record: an ordered itinerary of stops.

    A two-way line appears as two RouteDefs with opposite directions and
    distinct route_ids. seq positions are implicit in itinerary order.
    """

    route_id: str
    direction: str  # "outbound" | "inbound"
    itinerary: Tuple[str, ...]

    def position_of(self, stop_id: str) -> Optional[int]:
        """Earliest itinerary position of a stop, or None if not served."""
        try:
            return self.itinerary.index(stop_id)
        except ValueError:
            return None

    def reaches(self, origin_stop: str, dest_stop: str) -> bool:
        """True when dest appears strictly after origin on this itinerary."""
        opos = self.position_of(origin_stop)
        if opos is None:
            return False
        return dest_stop in self.itinerary[opos + 1 :]


@dataclass(frozen=True)
class Terminal:
    terminal_id: str
    stop_id: str


@dataclass(frozen=True)
class GpsPing:
    vehicle_id: str
    route_id: str
    ts: float
    lat: float
    lon: float


@dataclass(frozen=True)
class Validation:
    """One smart-card tap. Exactly one of vehicle_id/terminal_id is set."""

    user_id: str
    ts: float
    route_id: Optional[str]
    vehicle_id: Optional[str]
    terminal_id: Optional[str]


@dataclass(frozen=True)
class Boarding:
    """A validation resolved to a physical stop."""

    user_id: str
    ts: float
    route_id: Optional[str]
    stop_id: str
    source: str  # SOURCE_GPS | SOURCE_TERMINAL | SOURCE_INFERRED


@dataclass(frozen=True)
class OdPair:
    user_id: str
    day: date
    leg_index: int
    origin_stop_id: str
    destination_stop_id: str
    origin_ts: float


@dataclass
class DayReport:
    day: date
    day_class: str
    validation_count: int
    kept: bool
    reason: str = ""


def _encode(values: List[str], codebook: Dict[str, int], absent_ok: bool = False) -> np.ndarray:
    out = np.empty(len(values), dtype=np.int32)
    for i, v in enumerate(values):
        if absent_ok and v is None:
            out[i] = -1
        else:
            out[i] = codebook.setdefault(v, len(codebook))
    return out


class PingTable:
    """GPS pings, columnar, sorted by (vehicle, timestamp).

    vehicle_code/route_code index into the id lists; ts/lat/lon are float64.
    """

    __slots__ = ("vehicle_ids", "route_ids", "vehicle_code", "route_code", "ts", "lat", "lon")

    def __init__(self, vehicle_ids, route_ids, vehicle_code, route_code, ts, lat, lon):
        order = np.lexsort((ts, vehicle_code))
        self.vehicle_ids: List[str] = vehicle_ids
        self.route_ids: List[str] = route_ids
        self.vehicle_code = vehicle_code[order]
        self.route_code = route_code[order]
        self.ts = ts[order]
        self.lat = lat[order]
        self.lon = lon[order]

    @classmethod
    def from_records(cls, pings: Iterable[GpsPing]) -> "PingTable":
        rows = list(pings)
        vbook: Dict[str, int] = {}
        rbook: Dict[str, int] = {}
        vc = _encode([p.vehicle_id for p in rows], vbook)
        rc = _encode([p.route_id for p in rows], rbook)
        return cls(
            list(vbook),
            list(rbook),
            vc,
            rc,
            np.array([p.ts for p in rows], dtype=np.float64),
            np.array([p.lat for p in rows], dtype=np.float64),
            np.array([p.lon for p in rows], dtype=np.float64),
        )

    def __len__(self) -> int:
        return len(self.ts)

    def row(self, i: int) -> GpsPing:
        return GpsPing(
            self.vehicle_ids[self.vehicle_code[i]],
            self.route_ids[self.route_code[i]],
            float(self.ts[i]),
            float(self.lat[i]),
            float(self.lon[i]),
        )

    def __iter__(self) -> Iterator[GpsPing]:
        return (self.row(i) for i in range(len(self)))

    def vehicle_slice(self, vehicle_code: int) -> slice:
        """Row range of one vehicle (rows are time-sorted within it)."""
        lo = int(np.searchsorted(self.vehicle_code, vehicle_code, side="left"))
        hi = int(np.searchsorted(self.vehicle_code, vehicle_code, side="right"))
        return slice(lo, hi)


class ValidationTable:
    """Smart-card validations, columnar, sorted by (user, timestamp).

    Code -1 marks an absent optional field (route/vehicle/terminal).
    """

    __slots__ = ("user_ids", "route_ids", "vehicle_ids", "terminal_ids",
                 "user_code", "route_code", "vehicle_code", "terminal_code", "ts")

    def __init__(self, user_ids, route_ids, vehicle_ids, terminal_ids,
                 user_code, route_code, vehicle_code, terminal_code, ts):
        order = np.lexsort((ts, user_code))
        self.user_ids: List[str] = user_ids
        self.route_ids: List[str] = route_ids
        self.vehicle_ids: List[str] = vehicle_ids
        self.terminal_ids: List[str] = terminal_ids
        self.user_code = user_code[order]
        self.route_code = route_code[order]
        self.vehicle_code = vehicle_code[order]
        self.terminal_code = terminal_code[order]
        self.ts = ts[order]

    @classmethod
    def from_records(cls, validations: Iterable[Validation]) -> "ValidationTable":
        rows = list(validations)
        ubook: Dict[str, int] = {}
        rbook: Dict[str, int] = {}
        vbook: Dict[str, int] = {}
        tbook: Dict[str, int] = {}
        uc = _encode([v.user_id for v in rows], ubook)
        rc = _encode([v.route_id for v in rows], rbook, absent_ok=True)
        vc = _encode([v.vehicle_id for v in rows], vbook, absent_ok=True)
        tc = _encode([v.terminal_id for v in rows], tbook, absent_ok=True)
        return cls(
            list(ubook), list(rbook), list(vbook), list(tbook),
            uc, rc, vc, tc,
            np.array([v.ts for v in rows], dtype=np.float64),
        )

    def __len__(self) -> int:
        return len(self.ts)

    def row(self, i: int) -> Validation:
        rc = self.route_code[i]
        vc = self.vehicle_code[i]
        tc = self.terminal_code[i]
        return Validation(
            self.user_ids[self.user_code[i]],
            float(self.ts[i]),
            self.route_ids[rc] if rc >= 0 else None,
            self.vehicle_ids[vc] if vc >= 0 else None,
            self.terminal_ids[tc] if tc >= 0 else None,
        )

    def __iter__(self) -> Iterator[Validation]:
        return (self.row(i) for i in range(len(self)))

    def select(self, mask: np.ndarray) -> "ValidationTable":
        """New table with only the masked rows (codebooks shared)."""
        return ValidationTable(
            self.user_ids, self.route_ids, self.vehicle_ids, self.terminal_ids,
            self.user_code[mask], self.route_code[mask],
            self.vehicle_code[mask], self.terminal_code[mask], self.ts[mask],
        )

    def day_indices(self) -> np.ndarray:
        """UTC epoch-day number per row (vectorized day_of)."""
        return np.floor_divide(self.ts, 86400.0).astype(np.int64)


def day_from_index(day_index: int) -> date:
    return date(1970, 1, 1) + timedelta(days=int(day_index))


@dataclass
class Dataset:
    """A fully loaded and cross-validated input bundle."""

    stops: Dict[str, Stop]
    routes: Dict[str, RouteDef]
    terminals: Dict[str, Terminal]
    pings: PingTable
    validations: ValidationTable
    holidays: frozenset = field(default_factory=frozenset)
