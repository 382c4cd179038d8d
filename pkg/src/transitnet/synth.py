"""Synthetic city generator.

Builds a five-dataset bundle (stops, routes, terminals, pings, validations)
plus ground truth, deterministically from (config, seed). The city is k
spatial stop clusters; routes are mostly intra-cluster ring lines with a few
inter-cluster trunks, every two-way line emitted as two directed records.
Users follow home->work->home (optionally with a third place) so trip
chaining has a known answer; vehicles run fixed loop schedules whose ping
ticks align with stop arrivals.

Injection knobs exist for the two recurring-user corrections: a fraction of
users can skip a middle leg on some weekdays (modal gap), and a fraction can
board late along their usual route (origin jitter). Ground truth always
records the true movement.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .ingest import (
    write_pings,
    write_routes,
    write_stops,
    write_terminals,
    write_validations,
)
from .records import (
    PingTable,
    RouteDef,
    Stop,
    Terminal,
    Validation,
    ValidationTable,
    date_range,
    day_class_of,
    format_iso,
    SATURDAY,
    SUNDAY_HOLIDAY,
    WEEKDAY,
)

GRID_CELL_DEG = 0.004          # ~440 m; keeps itinerary-neighbor stops well apart
DEG_LAT_M = 111320.0


@dataclass
class SynthConfig:
    """Documented keys for the synth config file (key = value lines)."""

    stops: int = 600
    communities: int = 4
    routes: int = 44                 # directed route records in total
    trunk_routes: int = 8            # of which inter-community trunks
    users: int = 500
    days: int = 7
    start_date: date = date(2026, 3, 2)   # a Monday
    vehicles_per_route: int = 2
    completions_per_vehicle: int = 4
    pings_per_minute: float = 2.0
    hop_seconds: int = 90
    route_length_min: int = 10
    route_length_max: int = 26
    service_start_hour: int = 6
    turnaround_s: int = 300
    gps_noise_m: float = 12.0
    terminals: int = 4
    p_active_weekday: float = 0.9
    p_active_saturday: float = 0.55
    p_active_sunday: float = 0.35
    p_cross_weekday: float = 0.75
    p_cross_sunday: float = 0.2
    p_third_place: float = 0.3
    p_terminal_validation: float = 0.5
    gap_user_fraction: float = 0.0
    jitter_user_fraction: float = 0.0
    isolated_stops: int = 0

    @property
    def ping_interval_s(self) -> int:
        return int(round(60.0 / self.pings_per_minute))

    def validate(self) -> None:
        if self.communities < 1 or self.stops < self.communities * 4:
            raise ConfigError("need >= 4 stops per community")
        if self.routes < 1 or self.users < 0 or self.days < 1:
            raise ConfigError("routes, users, days must be positive")
        if self.trunk_routes >= self.routes and self.communities > 1:
            raise ConfigError("trunk_routes must leave room for intra-community routes")
        if self.route_length_min < 2:
            raise ConfigError("route_length_min must be >= 2")
        min_cluster = self.stops // self.communities
        if self.route_length_min > min_cluster:
            raise ConfigError(
                f"route itinerary (min {self.route_length_min}) longer than "
                f"cluster stop count ({min_cluster})")
        if self.hop_seconds % self.ping_interval_s != 0:
            raise ConfigError("hop_seconds must be a multiple of the ping interval")
        if self.terminals > self.stops:
            raise ConfigError("more terminals than stops")

    @classmethod
    def from_file(cls, path) -> "SynthConfig":
        values: Dict[str, str] = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"bad config line (want key = value): {raw!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
        kwargs = {}
        by_name = {f.name: f for f in dataclasses.fields(cls)}
        for key, val in values.items():
            if key not in by_name:
                raise ConfigError(f"unknown synth config key: {key!r}")
            ftype = by_name[key].type
            try:
                if ftype == "int":
                    kwargs[key] = int(val)
                elif ftype == "float":
                    kwargs[key] = float(val)
                elif ftype == "date":
                    kwargs[key] = date.fromisoformat(val)
                else:
                    kwargs[key] = val
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {e}")
        return cls(**kwargs)


@dataclass(frozen=True)
class TruthOd:
    user_id: str
    day: date
    leg_index: int
    origin_stop_id: str
    destination_stop_id: str
    origin_ts: float
    flags: str = ""


@dataclass
class SynthBundle:
    stops: List[Stop]
    routes: List[RouteDef]
    terminals: List[Terminal]
    pings: PingTable
    validations: ValidationTable
    truth_od: List[TruthOd]
    truth_communities: Dict[str, int]
    config: SynthConfig
    seed: int


def _day_start_ts(d: date) -> float:
    return datetime.combine(d, time(0, 0), tzinfo=timezone.utc).timestamp()


class _Layout:
    """Stop placement and per-community ring ordering."""

    def __init__(self, cfg: SynthConfig, rng: np.random.Generator):
        self.stops: List[Stop] = []
        self.community_of: Dict[str, int] = {}
        self.rings: List[List[str]] = []          # stop ids sorted by angle, per community
        self.centers: List[Tuple[float, float]] = []
        self.coords: Dict[str, Tuple[float, float]] = {}

        k = cfg.communities
        sizes = [cfg.stops // k] * k
        for i in range(cfg.stops - sum(sizes)):
            sizes[i] += 1
        patch = GRID_CELL_DEG * math.ceil(math.sqrt(max(sizes)))
        radius = 0.0 if k == 1 else 1.5 * patch / (2.0 * math.sin(math.pi / k))

        idx = 0
        for c in range(k):
            ang = 2.0 * math.pi * c / k
            cy, cx = radius * math.sin(ang), radius * math.cos(ang)
            self.centers.append((cy, cx))
            side = math.ceil(math.sqrt(sizes[c]))
            cells = [(r, col) for r in range(side) for col in range(side)][: sizes[c]]
            ring: List[Tuple[float, str]] = []
            for r, col in cells:
                jy, jx = rng.uniform(-0.3, 0.3, size=2)
                lat = cy + (r - side / 2.0 + 0.5 + jy) * GRID_CELL_DEG
                lon = cx + (col - side / 2.0 + 0.5 + jx) * GRID_CELL_DEG
                lat, lon = round(lat, 6), round(lon, 6)
                sid = f"S{idx:05d}"
                idx += 1
                self.stops.append(Stop(sid, lat, lon, False))
                self.community_of[sid] = c
                self.coords[sid] = (lat, lon)
                ring.append((math.atan2(lat - cy, lon - cx), sid))
            ring.sort()
            self.rings.append([sid for _, sid in ring])

        # optional far-away patch that stays disconnected from the city
        self.isolated: List[str] = []
        if cfg.isolated_stops:
            base = 3.0 * (radius + patch)
            for j in range(cfg.isolated_stops):
                sid = f"S{idx:05d}"
                idx += 1
                lat = round(base + (j // 8) * GRID_CELL_DEG, 6)
                lon = round(base + (j % 8) * GRID_CELL_DEG, 6)
                self.stops.append(Stop(sid, lat, lon, False))
                self.community_of[sid] = -1
                self.coords[sid] = (lat, lon)
                self.isolated.append(sid)

    def nearest_to(self, community: int, target: Tuple[float, float], n: int) -> List[str]:
        ty, tx = target
        scored = sorted(
            (abs(self.coords[s][0] - ty) + abs(self.coords[s][1] - tx), s)
            for s in self.rings[community]
        )
        return [s for _, s in scored[:n]]


def _build_routes(cfg: SynthConfig, lay: _Layout, rng: np.random.Generator) -> List[RouteDef]:
    routes: List[RouteDef] = []
    ridx = 0

    def emit(itin: Sequence[str], direction: str) -> None:
        nonlocal ridx
        routes.append(RouteDef(f"R{ridx:04d}", direction, tuple(itin)))
        ridx += 1

    def emit_pair(itin: Sequence[str]) -> None:
        emit(itin, "outbound")
        emit(list(reversed(itin)), "inbound")

    k = cfg.communities
    isolated_records = 1 if cfg.isolated_stops else 0
    trunk_records = cfg.trunk_routes if k > 1 else 0
    intra_records = cfg.routes - trunk_records - isolated_records
    if intra_records < k:
        raise ConfigError("not enough route records for one line per community")

    # intra-community lines. The first few are stride-1 arcs that tile the
    # ring, so every community is covered and strongly connected on its own.
    # The rest visit a random subset in random order: those long chords keep
    # the community from decomposing into arc segments under clustering.
    per_comm = [intra_records // k] * k
    for i in range(intra_records - sum(per_comm)):
        per_comm[i] += 1
    for c in range(k):
        ring = lay.rings[c]
        n = len(ring)
        budget = per_comm[c]
        length = min(cfg.route_length_max, n)
        cover = max(1, math.ceil(n / max(1, length - 1)))
        # A tight budget gets fewer, longer arcs: ring closure (and with it
        # strong connectivity) takes precedence over route_length_max.
        lines = (budget + 1) // 2
        if lines < cover:
            cover = max(1, lines)
            length = min(n, math.ceil(n / cover) + 1)
        li = 0
        while budget > 0:
            if li < cover:
                start = round(li * n / cover) % n
                itin = [ring[(start + j) % n] for j in range(min(length, n))]
            else:
                lo = min(cfg.route_length_min, n)
                L = max(2, int(rng.integers(lo, min(cfg.route_length_max, n) + 1)))
                picks = rng.choice(n, size=min(L, n), replace=False)
                itin = [ring[int(p)] for p in picks]
            if len(set(itin)) != len(itin):
                li += 1
                continue
            if budget >= 2:
                emit_pair(itin)
                budget -= 2
            else:
                # odd allocation: close the line into a one-way loop
                emit(itin + [itin[0]], "outbound")
                budget -= 1
            li += 1

    # trunks: bidirected gate-to-gate links over the community circle, then
    # random extra pairs
    if trunk_records:
        pairs = [(c, (c + 1) % k) for c in range(k)]
        while len(pairs) * 2 < trunk_records + 1:
            a, b = sorted(rng.choice(k, size=2, replace=False).tolist())
            pairs.append((a, b))
        budget = trunk_records
        pi = 0
        while budget > 0:
            a, b = pairs[pi % len(pairs)]
            gate_a = lay.nearest_to(a, lay.centers[b], 3)
            gate_b = lay.nearest_to(b, lay.centers[a], 3)
            itin = list(reversed(gate_a)) + gate_b
            if budget >= 2:
                emit_pair(itin)
                budget -= 2
            else:
                emit(itin + [itin[0]], "outbound")
                budget -= 1
            pi += 1

    if isolated_records:
        emit(lay.isolated + [lay.isolated[0]], "outbound")
    return routes


def _pick_terminals(cfg: SynthConfig, lay: _Layout,
                    stops: List[Stop]) -> Tuple[List[Stop], List[Terminal]]:
    chosen: List[str] = []
    c = 0
    while len(chosen) < cfg.terminals:
        cands = lay.nearest_to(c % cfg.communities, lay.centers[c % cfg.communities],
                               1 + c // cfg.communities)
        for s in cands:
            if s not in chosen:
                chosen.append(s)
                break
        c += 1
    terminal_set = set(chosen[: cfg.terminals])
    out_stops = [Stop(s.stop_id, s.lat, s.lon, s.stop_id in terminal_set) for s in stops]
    terminals = [Terminal(f"T{i:02d}", sid) for i, sid in enumerate(sorted(terminal_set))]
    return out_stops, terminals


class _Schedule:
    """Deterministic loop timetable for every (route record, vehicle, day)."""

    def __init__(self, cfg: SynthConfig, routes: List[RouteDef]):
        self.cfg = cfg
        self.routes = routes
        iv = cfg.ping_interval_s
        self.turnaround = math.ceil(cfg.turnaround_s / iv) * iv
        self.loop_dur = [
            (len(r.itinerary) - 1) * cfg.hop_seconds + self.turnaround for r in routes
        ]
        self.stagger = [
            [(v * (self.loop_dur[ri] // cfg.vehicles_per_route) // iv) * iv
             for v in range(cfg.vehicles_per_route)]
            for ri in range(len(routes))
        ]

    def vehicle_id(self, ri: int, v: int) -> str:
        return f"V{ri:04d}-{v}"

    def loop_start(self, ri: int, v: int, day_ts: float, c: int) -> float:
        return (day_ts + self.cfg.service_start_hour * 3600.0
                + self.stagger[ri][v] + c * self.loop_dur[ri])

    def arrival(self, ri: int, v: int, day_ts: float, c: int, pos: int) -> float:
        return self.loop_start(ri, v, day_ts, c) + pos * self.cfg.hop_seconds

    def arrivals_at(self, ri: int, pos: int, day_ts: float) -> List[Tuple[float, int, int]]:
        """All (arrival_ts, vehicle, loop) serving itinerary position pos that day."""
        out = []
        for v in range(self.cfg.vehicles_per_route):
            for c in range(self.cfg.completions_per_vehicle):
                out.append((self.arrival(ri, v, day_ts, c, pos), v, c))
        out.sort()
        return out


def _generate_pings(cfg: SynthConfig, routes: List[RouteDef], sched: _Schedule,
                    lay: _Layout, day_ts_list: List[float],
                    rng: np.random.Generator) -> PingTable:
    iv = cfg.ping_interval_s
    per_hop = cfg.hop_seconds // iv
    vbook: Dict[str, int] = {}
    rbook: Dict[str, int] = {}
    vc_parts, rc_parts, ts_parts, lat_parts, lon_parts = [], [], [], [], []

    for ri, route in enumerate(routes):
        rcode = rbook.setdefault(route.route_id, len(rbook))
        lats = np.array([lay.coords[s][0] for s in route.itinerary])
        lons = np.array([lay.coords[s][1] for s in route.itinerary])
        # interpolate one loop's ping positions once per route
        npings = (len(route.itinerary) - 1) * per_hop + 1
        frac = np.arange(npings) / per_hop          # itinerary position per tick
        seg = np.minimum(frac.astype(np.int64), len(route.itinerary) - 2)
        t_in_seg = frac - seg
        base_lat = lats[seg] * (1.0 - t_in_seg) + lats[seg + 1] * t_in_seg
        base_lon = lons[seg] * (1.0 - t_in_seg) + lons[seg + 1] * t_in_seg
        tick = np.arange(npings) * float(iv)

        for v in range(cfg.vehicles_per_route):
            vcode = vbook.setdefault(sched.vehicle_id(ri, v), len(vbook))
            for day_ts in day_ts_list:
                for c in range(cfg.completions_per_vehicle):
                    t0 = sched.loop_start(ri, v, day_ts, c)
                    noise = rng.normal(0.0, cfg.gps_noise_m, size=(2, npings))
                    nlat = np.round(base_lat + noise[0] / DEG_LAT_M, 6)
                    nlon = np.round(
                        base_lon + noise[1] / (DEG_LAT_M * np.cos(np.radians(base_lat))), 6)
                    ts_parts.append(t0 + tick)
                    lat_parts.append(nlat)
                    lon_parts.append(nlon)
                    vc_parts.append(np.full(npings, vcode, dtype=np.int32))
                    rc_parts.append(np.full(npings, rcode, dtype=np.int32))

    return PingTable(
        list(vbook), list(rbook),
        np.concatenate(vc_parts), np.concatenate(rc_parts),
        np.concatenate(ts_parts), np.concatenate(lat_parts), np.concatenate(lon_parts),
    )


class _JourneyPlanner:
    """Boarding-chain planner over the directed route records.

    Same-community trips use direct or one-transfer plans; cross-community
    trips go through trunk gate stops (intra line -> trunk -> intra line),
    which keeps planning to a handful of dict lookups per query.
    """

    def __init__(self, routes: List[RouteDef], usable: Sequence[int],
                 community_of: Dict[str, int]):
        self.routes = routes
        self.community_of = community_of
        # reach[A][B] = (route index, pos of A, pos of B) for the first record
        # that serves A strictly before B
        self.reach: Dict[str, Dict[str, Tuple[int, int, int]]] = {}
        for ri in usable:
            itin = routes[ri].itinerary
            seen: Dict[str, int] = {}
            for pos, s in enumerate(itin):
                if s not in seen:
                    seen[s] = pos
            for s, pos in seen.items():
                row = self.reach.setdefault(s, {})
                for pos2 in range(pos + 1, len(itin)):
                    b = itin[pos2]
                    if b != s and b not in row:
                        row[b] = (ri, pos, pos2)
        # trunk crossings: (comm a, comm b) -> [(gate in a, ri, pos_a, gate in b, pos_b)]
        self.crossings: Dict[Tuple[int, int], List[Tuple[str, int, int, str, int]]] = {}
        for ri in usable:
            itin = routes[ri].itinerary
            comms = [community_of.get(s, -1) for s in itin]
            if len(set(comms)) < 2:
                continue
            for p in range(len(itin)):
                for q in range(p + 1, len(itin)):
                    ca, cb = comms[p], comms[q]
                    if ca != cb and itin[p] != itin[q]:
                        self.crossings.setdefault((ca, cb), []).append(
                            (itin[p], ri, p, itin[q], q))
        self._plan_cache: Dict[Tuple[str, str], Optional[List[Tuple[str, int, int]]]] = {}

    def _plan_local(self, a: str, b: str) -> Optional[List[Tuple[str, int, int]]]:
        row = self.reach.get(a, {})
        if b in row:
            ri, pa, _ = row[b]
            return [(a, ri, pa)]
        for x, (ri1, pa, _) in row.items():
            row2 = self.reach.get(x, {})
            if b in row2:
                ri2, px2, _ = row2[b]
                return [(a, ri1, pa), (x, ri2, px2)]
        return None

    def plan(self, a: str, b: str) -> Optional[List[Tuple[str, int, int]]]:
        """Boarding chain from a to b: list of (stop, route index, position)."""
        if a == b:
            return None
        key = (a, b)
        if key in self._plan_cache:
            return self._plan_cache[key]
        out = self._plan_local(a, b)
        ca = self.community_of.get(a, -1)
        cb = self.community_of.get(b, -1)
        if out is None and ca != cb:
            row_a = self.reach.get(a, {})
            for xa, tri, tp, xb, _ in self.crossings.get((ca, cb), []):
                if xb == b:
                    tail = []
                elif b in self.reach.get(xb, {}):
                    ri3, p3, _ = self.reach[xb][b]
                    tail = [(xb, ri3, p3)]
                else:
                    continue
                if xa == a:
                    out = [(a, tri, tp)] + tail
                    break
                if xa in row_a:
                    ri1, pa, _ = row_a[xa]
                    out = [(a, ri1, pa), (xa, tri, tp)] + tail
                    break
        self._plan_cache[key] = out
        return out


@dataclass
class _User:
    uid: str
    home: str
    work: str
    third: Optional[str]
    leisure: str
    plans: Dict[str, Optional[List[Tuple[str, int, int]]]]
    gap_days: List[int] = field(default_factory=list)
    jitter_days: List[int] = field(default_factory=list)
    jitter_shift: int = 0


def generate_synthetic_city(cfg: SynthConfig, seed: int) -> SynthBundle:
    cfg.validate()
    rng = np.random.default_rng(seed)

    lay = _Layout(cfg, rng)
    routes = _build_routes(cfg, lay, rng)
    stops, terminals = _pick_terminals(cfg, lay, lay.stops)
    terminal_of_stop = {t.stop_id: t.terminal_id for t in terminals}
    sched = _Schedule(cfg, routes)
    day_list = date_range(cfg.start_date, cfg.days)
    day_ts_list = [_day_start_ts(d) for d in day_list]

    pings = _generate_pings(cfg, routes, sched, lay, day_ts_list, rng)

    usable = [ri for ri, r in enumerate(routes)
              if lay.community_of.get(r.itinerary[0], -1) >= 0]
    planner = _JourneyPlanner(routes, usable, lay.community_of)

    users = _make_users(cfg, lay, planner, rng)
    _assign_injections(cfg, users, routes, day_list, rng)

    validations, truth = _emit_travel(cfg, users, routes, sched,
                                      terminal_of_stop, day_list, day_ts_list, rng)

    truth_comm = {s: c for s, c in lay.community_of.items() if c >= 0}
    return SynthBundle(stops, routes, terminals, pings, validations,
                       truth, truth_comm, cfg, seed)


def _make_users(cfg: SynthConfig, lay: _Layout, planner: _JourneyPlanner,
                rng: np.random.Generator) -> List[_User]:
    k = cfg.communities
    sizes = np.array([len(r) for r in lay.rings], dtype=np.float64)
    probs = sizes / sizes.sum()
    users: List[_User] = []
    for u in range(cfg.users):
        uid = f"U{u:06d}"
        home_c = int(rng.choice(k, p=probs))
        ring = lay.rings[home_c]
        home = ring[int(rng.integers(0, len(ring)))]

        cross = k > 1 and rng.random() < cfg.p_cross_weekday
        plans: Dict[str, Optional[List[Tuple[str, int, int]]]] = {}
        work = None
        for attempt in range(40):
            wc = home_c
            if cross and attempt < 20:
                wc = int(rng.choice([c for c in range(k) if c != home_c]))
            wring = lay.rings[wc]
            cand = wring[int(rng.integers(0, len(wring)))]
            if cand == home:
                continue
            if planner.plan(home, cand) and planner.plan(cand, home):
                work = cand
                break
        if work is None:
            # last resort: any directly reachable stop with a way back
            for cand in planner.reach.get(home, {}):
                if cand != home and planner.plan(cand, home):
                    work = cand
                    break
        if work is None:
            continue
        plans["out"] = planner.plan(home, work)
        plans["back"] = planner.plan(work, home)

        third = None
        if rng.random() < cfg.p_third_place:
            tring = lay.rings[home_c]
            for _ in range(20):
                cand = tring[int(rng.integers(0, len(tring)))]
                if cand in (home, work):
                    continue
                if planner.plan(work, cand) and planner.plan(cand, home):
                    third = cand
                    break
        if third is not None:
            plans["mid"] = planner.plan(work, third)
            plans["third_home"] = planner.plan(third, home)

        leisure = home
        lring = lay.rings[home_c] if not (k > 1 and rng.random() < cfg.p_cross_sunday) \
            else lay.rings[int(rng.integers(0, k))]
        for _ in range(20):
            cand = lring[int(rng.integers(0, len(lring)))]
            if cand != home and planner.plan(home, cand) and planner.plan(cand, home):
                leisure = cand
                break
        if leisure != home:
            plans["fun"] = planner.plan(home, leisure)
            plans["fun_back"] = planner.plan(leisure, home)

        users.append(_User(uid, home, work, third, leisure, plans))
    return users


def _assign_injections(cfg: SynthConfig, users: List[_User], routes: List[RouteDef],
                       day_list: List[date], rng: np.random.Generator) -> None:
    weekday_idx = [i for i, d in enumerate(day_list) if day_class_of(d) == WEEKDAY]
    if len(weekday_idx) < 4:
        return
    n_gap = int(round(cfg.gap_user_fraction * len(users)))
    n_jit = int(round(cfg.jitter_user_fraction * len(users)))
    for u in users:
        if n_gap <= 0:
            break
        # a repairable gap needs single-boarding out/mid legs and an out route
        # that misses the third place (otherwise the chain is kept as-is by
        # the reachability rule)
        out_plan = u.plans.get("out")
        mid_plan = u.plans.get("mid")
        if (u.third is None or not out_plan or not mid_plan
                or len(out_plan) != 1 or len(mid_plan) != 1):
            continue
        out_route = routes[out_plan[0][1]]
        if out_route.reaches(u.home, u.third):
            continue
        if not out_route.reaches(u.home, u.work):
            continue
        u.gap_days = sorted(rng.choice(weekday_idx, size=2, replace=False).tolist())
        n_gap -= 1
    for u in users:
        if n_jit <= 0:
            break
        out_plan = u.plans.get("out")
        if not out_plan or len(out_plan) != 1 or u.gap_days:
            continue
        stop, ri, pos = out_plan[0]
        itin = routes[ri].itinerary
        # board late but still strictly before the leg's destination stop
        dest_pos = itin.index(u.work) if u.work in itin else len(itin) - 1
        room = dest_pos - pos - 1
        if room < 1:
            continue
        u.jitter_days = sorted(rng.choice(weekday_idx, size=2, replace=False).tolist())
        u.jitter_shift = int(min(rng.integers(1, 4), room))
        n_jit -= 1


def _emit_travel(cfg, users, routes, sched, terminal_of_stop,
                 day_list, day_ts_list, rng):
    p_active = {WEEKDAY: cfg.p_active_weekday, SATURDAY: cfg.p_active_saturday,
                SUNDAY_HOLIDAY: cfg.p_active_sunday}
    # leg targets as fractions of the service span, so any completions /
    # loop-duration combination leaves candidates for every slot
    span = cfg.completions_per_vehicle * (sum(sched.loop_dur) / len(sched.loop_dur))
    svc0 = cfg.service_start_hour * 3600.0
    slots = {"out": 0.12, "mid": 0.45, "back": 0.7, "third_home": 0.88,
             "fun": 0.3, "fun_back": 0.75}

    v_rows: List[Validation] = []
    truth: List[TruthOd] = []

    for di, (day, day_ts) in enumerate(zip(day_list, day_ts_list)):
        cls = day_class_of(day)
        for u in users:
            if rng.random() >= p_active[cls]:
                continue
            if cls == SUNDAY_HOLIDAY:
                slot_names = ["fun", "fun_back"] if "fun" in u.plans else []
            elif u.third is not None and "mid" in u.plans and "third_home" in u.plans:
                slot_names = ["out", "mid", "third_home"]
            else:
                slot_names = ["out", "back"]
            if not slot_names:
                continue

            drop_idx = None
            if di in u.gap_days and len(slot_names) == 3:
                drop_idx = 1
            jitter = di in u.jitter_days

            # boarding = (stop, ts, route idx, vehicle idx, dropped, jittered)
            boardings: List[Tuple[str, float, int, int, bool, bool]] = []
            prev_ts = -math.inf
            ok = True
            for si, slot in enumerate(slot_names):
                plan = u.plans.get(slot)
                if not plan:
                    ok = False
                    break
                target = (day_ts + svc0 + slots[slot] * span
                          + float(rng.normal(0.0, 0.07 * span)))
                for bi, (stop, ri, pos) in enumerate(plan):
                    use_pos = pos
                    use_stop = stop
                    jittered = False
                    if jitter and slot == "out" and bi == 0:
                        itin = routes[ri].itinerary
                        shift = min(u.jitter_shift, len(itin) - 2 - pos)
                        if shift > 0:
                            use_pos = pos + shift
                            use_stop = itin[use_pos]
                            jittered = True
                    cands = [a for a in sched.arrivals_at(ri, use_pos, day_ts)
                             if a[0] > prev_ts + 120.0]
                    if not cands:
                        ok = False
                        break
                    if bi == 0:
                        t_arr, veh, _ = min(cands, key=lambda a: abs(a[0] - target))
                    else:
                        t_arr, veh, _ = cands[0]
                    ts = t_arr + float(rng.integers(0, 11))
                    dropped = drop_idx is not None and si == drop_idx and bi == 0
                    boardings.append((use_stop, ts, ri, veh, dropped, jittered))
                    prev_ts = ts
                if not ok:
                    break
            if not ok or len(boardings) < 2:
                continue

            for stop, ts, ri, veh, dropped, _ in boardings:
                if dropped:
                    continue
                rid = routes[ri].route_id
                tid = terminal_of_stop.get(stop)
                if tid is not None and rng.random() < cfg.p_terminal_validation:
                    v_rows.append(Validation(u.uid, ts, rid, None, tid))
                else:
                    v_rows.append(Validation(u.uid, ts, rid,
                                             sched.vehicle_id(ri, veh), None))

            # ground truth = true movement (pre-drop, jitter resolved to the
            # true origin), closed cyclically, renumbered after degenerate skips
            true_seq = [(u.home if jittered else stop, ts)
                        for (stop, ts, _, _, _, jittered) in boardings]
            flags_day = []
            if drop_idx is not None:
                flags_day.append("gap")
            if any(b[5] for b in boardings):
                flags_day.append("jitter")
            flags = ";".join(flags_day)
            n = len(true_seq)
            leg = 0
            for i, (stop, ts) in enumerate(true_seq):
                dest = true_seq[(i + 1) % n][0]
                if stop == dest:
                    continue
                leg += 1
                truth.append(TruthOd(u.uid, day, leg, stop, dest, ts, flags))

    return ValidationTable.from_records(v_rows), truth


# ---------------------------------------------------------------- output

TRUTH_OD_HEADER = ["user_id", "day", "leg_index", "origin_stop_id",
                   "destination_stop_id", "origin_time", "flags"]
TRUTH_COMM_HEADER = ["stop_id", "community_id"]


def write_bundle(bundle: SynthBundle, out_dir) -> None:
    """Write the five datasets plus ground truth; byte-stable per seed."""
    import csv

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_stops(bundle.stops, out_dir / "stops.csv")
    write_routes(bundle.routes, out_dir / "routes.csv")
    write_terminals(bundle.terminals, out_dir / "terminals.csv")
    write_pings(bundle.pings, out_dir / "pings.csv")
    write_validations(bundle.validations, out_dir / "validations.csv")

    with open(out_dir / "ground_truth.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRUTH_OD_HEADER)
        for t in bundle.truth_od:
            w.writerow([t.user_id, t.day.isoformat(), t.leg_index,
                        t.origin_stop_id, t.destination_stop_id,
                        format_iso(t.origin_ts), t.flags])
    with open(out_dir / "ground_truth_communities.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRUTH_COMM_HEADER)
        for sid in sorted(bundle.truth_communities):
            w.writerow([sid, bundle.truth_communities[sid]])
