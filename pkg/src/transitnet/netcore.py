"""Supply graph construction and structural metrics.

The graph's nodes are stops and its directed edges carry service supply in
vehicle-completions per day. All distance metrics count unweighted hops along
edge directions; weights only matter for community detection and export.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from datetime import date
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import DataError
from .geo import haversine_m_vec
from .records import PingTable, RouteDef, Stop, day_from_index

EXACT_NODE_THRESHOLD = 20_000
SAMPLE_SOURCE_COUNT = 1_000
COMPLETION_RADIUS_M = 300.0     # same spatial tolerance as boarding snaps


@dataclass(frozen=True)
class RouteSupply:
    route_id: str
    vehicles: int                  # distinct vehicles observed that day
    completions_per_vehicle: float
    weight: float                  # vehicles * completions_per_vehicle


@dataclass
class GraphMetrics:
    avg_path_length: float
    avg_eccentricity: float
    diameter: int
    node_count: int
    edge_count: int
    reachable_pairs: int = 0
    sampled: bool = False
    degenerate: bool = False

    def as_dict(self) -> Dict[str, object]:
        return {
            "avg_path_length": self.avg_path_length,
            "avg_eccentricity": self.avg_eccentricity,
            "diameter": self.diameter,
            "node_count": self.node_count,
            "edge_count": self.edge_count,
            "reachable_pairs": self.reachable_pairs,
            "sampled": self.sampled,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class ComponentReport:
    component_count: int
    giant_size: int
    coverage: float


@dataclass(frozen=True)
class LocalStats:
    density: float
    avg_clustering: float
    avg_weighted_degree: float
    degenerate: bool = False


class SupplyGraph:
    """Immutable directed weighted graph in canonical CSR form.

    Edges are stored sorted by (source, destination), so two graphs with the
    same edge set compare equal array-for-array. All mutation-style methods
    return new instances.
    """

    __slots__ = ("node_ids", "indptr", "indices", "weights", "_pos")

    def __init__(self, node_ids: Sequence[str], indptr, indices, weights):
        self.node_ids: List[str] = list(node_ids)
        self.indptr = indptr
        self.indices = indices
        self.weights = weights
        for a in (self.indptr, self.indices, self.weights):
            a.setflags(write=False)
        self._pos: Optional[Dict[str, int]] = None

    @classmethod
    def from_weighted_edges(cls, node_ids: Sequence[str],
                            edges: Dict[Tuple[int, int], float]) -> "SupplyGraph":
        n = len(node_ids)
        items = []
        for (u, v), w in edges.items():
            if u == v:
                raise DataError(f"self-loop on node {node_ids[u]}")
            if w <= 0:
                raise DataError(f"non-positive edge weight {w} on "
                                f"{node_ids[u]}->{node_ids[v]}")
            if not (0 <= u < n and 0 <= v < n):
                raise DataError("edge endpoint outside node set")
            items.append((u, v, w))
        items.sort(key=lambda t: (t[0], t[1]))
        src = np.array([t[0] for t in items], dtype=np.int32)
        dst = np.array([t[1] for t in items], dtype=np.int32)
        wts = np.array([t[2] for t in items], dtype=np.float64)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, src + 1, 1)
        np.cumsum(indptr, out=indptr)
        return cls(node_ids, indptr, dst, wts)

    # ---------------------------------------------------------- inspection

    @property
    def n(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return int(self.indices.size)

    def index_of(self, node_id: str) -> int:
        if self._pos is None:
            self._pos = {nid: i for i, nid in enumerate(self.node_ids)}
        return self._pos[node_id]

    def out_slice(self, u: int) -> slice:
        return slice(int(self.indptr[u]), int(self.indptr[u + 1]))

    def has_edge(self, u: int, v: int) -> bool:
        sl = self.out_slice(u)
        k = np.searchsorted(self.indices[sl], v)
        return k < sl.stop - sl.start and int(self.indices[sl.start + k]) == v

    def edge_dict(self) -> Dict[Tuple[int, int], float]:
        src = np.repeat(np.arange(self.n, dtype=np.int32), np.diff(self.indptr))
        return {(int(u), int(v)): float(w)
                for u, v, w in zip(src, self.indices, self.weights)}

    def edge_arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.n, dtype=np.int32), np.diff(self.indptr))
        return src, self.indices, self.weights

    def max_weight(self) -> float:
        return float(self.weights.max()) if self.weights.size else 0.0

    def to_sparse(self, *, ones: bool = False) -> sparse.csr_matrix:
        data = np.ones_like(self.weights) if ones else self.weights
        return sparse.csr_matrix((data, self.indices, self.indptr),
                                 shape=(self.n, self.n))

    def symmetrized_edges(self) -> Dict[Tuple[int, int], float]:
        """Undirected weights: w{u,v} = w(u->v) + w(v->u), keyed u < v."""
        out: Dict[Tuple[int, int], float] = {}
        src, dst, wts = self.edge_arrays()
        for u, v, w in zip(src.tolist(), dst.tolist(), wts.tolist()):
            key = (u, v) if u < v else (v, u)
            out[key] = out.get(key, 0.0) + w
        return out

    # ----------------------------------------------------------- variation

    def with_added_edges(self, additions: Iterable[Tuple[int, int, float]]) -> "SupplyGraph":
        edges = self.edge_dict()
        for u, v, w in additions:
            edges[(u, v)] = edges.get((u, v), 0.0) + w
        return SupplyGraph.from_weighted_edges(self.node_ids, edges)

    def without_edges(self, removals: Iterable[Tuple[int, int, float]]) -> "SupplyGraph":
        edges = self.edge_dict()
        for u, v, w in removals:
            if (u, v) not in edges:
                raise DataError(f"edge {u}->{v} not present")
            left = edges[(u, v)] - w
            if left < -1e-9:
                raise DataError(f"removing more weight than edge {u}->{v} carries")
            if left <= 1e-12:
                del edges[(u, v)]
            else:
                edges[(u, v)] = left
        return SupplyGraph.from_weighted_edges(self.node_ids, edges)

    def subgraph(self, keep: Sequence[int]) -> "SupplyGraph":
        keep_arr = np.asarray(sorted(keep), dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[keep_arr] = np.arange(keep_arr.size)
        src, dst, wts = self.edge_arrays()
        mask = (remap[src] >= 0) & (remap[dst] >= 0)
        edges = {(int(remap[u]), int(remap[v])): float(w)
                 for u, v, w in zip(src[mask], dst[mask], wts[mask])}
        ids = [self.node_ids[i] for i in keep_arr]
        return SupplyGraph.from_weighted_edges(ids, edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SupplyGraph):
            return NotImplemented
        return (self.node_ids == other.node_ids
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((tuple(self.node_ids), self.indices.tobytes(),
                     self.weights.tobytes()))


# ------------------------------------------------------------- route supply

def compute_route_supply(route: RouteDef, pings: PingTable,
                         stops: Dict[str, Stop],
                         radius_m: float = COMPLETION_RADIUS_M) -> RouteSupply:
    """Supply of one route from one day of its pings.

    A completion is counted each time a vehicle enters the end-stop zone
    while armed, where arming happens at the start-stop zone. Start and end
    may be the same stop (circular itineraries); re-entry both completes a
    lap and arms the next one.
    """
    if len(pings) == 0:
        return RouteSupply(route.route_id, 0, 0.0, 0.0)
    first = stops[route.itinerary[0]]
    last = stops[route.itinerary[-1]]
    near_first = haversine_m_vec(pings.lat, pings.lon, first.lat, first.lon) <= radius_m
    near_last = haversine_m_vec(pings.lat, pings.lon, last.lat, last.lon) <= radius_m
    vehicles = 0
    total = 0
    for vcode in range(len(pings.vehicle_ids)):
        sl = pings.vehicle_slice(vcode)
        if sl.stop <= sl.start:
            continue
        vehicles += 1
        total += _scan_completions(near_first[sl], near_last[sl])
    if vehicles == 0:
        return RouteSupply(route.route_id, 0, 0.0, 0.0)
    c = total / vehicles
    return RouteSupply(route.route_id, vehicles, c, vehicles * c)


def _scan_completions(near_first: np.ndarray, near_last: np.ndarray) -> int:
    enter_last = near_last & ~np.r_[False, near_last[:-1]]
    count = 0
    armed = False
    for k in np.flatnonzero(enter_last | near_first):
        if armed and enter_last[k]:
            count += 1
            armed = False
        if near_first[k]:
            armed = True
    return count


def daily_route_supplies(routes: Dict[str, RouteDef], pings: PingTable,
                         stops: Dict[str, Stop],
                         radius_m: float = COMPLETION_RADIUS_M,
                         ) -> Dict[date, Dict[str, RouteSupply]]:
    """Per-day, per-route supply over a full ping table."""
    out: Dict[date, Dict[str, RouteSupply]] = {}
    if len(pings) == 0:
        return out
    day_idx = np.floor_divide(pings.ts, 86400.0).astype(np.int64)

    # endpoint coordinates gathered per row through the route codebook
    n_routes = len(pings.route_ids)
    known = np.zeros(n_routes, dtype=bool)
    ends = np.full((n_routes, 4), np.nan)     # first lat/lon, last lat/lon
    for rc, rid in enumerate(pings.route_ids):
        route = routes.get(rid)
        if route is None:
            continue
        known[rc] = True
        first = stops[route.itinerary[0]]
        last = stops[route.itinerary[-1]]
        ends[rc] = (first.lat, first.lon, last.lat, last.lon)
    row_ends = ends[pings.route_code]
    row_known = known[pings.route_code]
    near_first = np.zeros(len(pings), dtype=bool)
    near_last = np.zeros(len(pings), dtype=bool)
    near_first[row_known] = haversine_m_vec(
        pings.lat[row_known], pings.lon[row_known],
        row_ends[row_known, 0], row_ends[row_known, 1]) <= radius_m
    near_last[row_known] = haversine_m_vec(
        pings.lat[row_known], pings.lon[row_known],
        row_ends[row_known, 2], row_ends[row_known, 3]) <= radius_m

    # tallies[(day, route_code)] = [vehicle count, completion total]
    tallies: Dict[Tuple[int, int], List[int]] = {}
    breaks = np.flatnonzero(
        np.r_[True,
              (pings.vehicle_code[1:] != pings.vehicle_code[:-1])
              | (pings.route_code[1:] != pings.route_code[:-1])
              | (day_idx[1:] != day_idx[:-1])])
    bounds = np.r_[breaks, len(pings)]
    for s, e in zip(bounds[:-1], bounds[1:]):
        rc = int(pings.route_code[s])
        if not known[rc]:
            continue
        key = (int(day_idx[s]), rc)
        got = _scan_completions(near_first[s:e], near_last[s:e])
        t = tallies.setdefault(key, [0, 0])
        t[0] += 1
        t[1] += got
    for (di, rc), (veh, total) in sorted(tallies.items()):
        rid = pings.route_ids[rc]
        c = total / veh
        out.setdefault(day_from_index(di), {})[rid] = RouteSupply(rid, veh, c, veh * c)
    return out


def average_route_weights(daily: Dict[date, Dict[str, RouteSupply]]) -> Dict[str, float]:
    """Mean daily supply per route; days without service count as zero."""
    n_days = len(daily)
    if n_days == 0:
        return {}
    totals: Dict[str, float] = {}
    for per_route in daily.values():
        for rid, rs in per_route.items():
            totals[rid] = totals.get(rid, 0.0) + rs.weight
    return {rid: t / n_days for rid, t in totals.items()}


def build_supply_graph(routes: Dict[str, RouteDef],
                       route_weights: Dict[str, float],
                       stops: Optional[Dict[str, Stop]] = None) -> SupplyGraph:
    """Sum each serving route's supply onto its consecutive stop pairs."""
    if stops is not None:
        node_ids = sorted(stops)
    else:
        node_ids = sorted({s for r in routes.values() for s in r.itinerary})
    pos = {nid: i for i, nid in enumerate(node_ids)}
    edges: Dict[Tuple[int, int], float] = {}
    for rid, route in routes.items():
        w = route_weights.get(rid, 0.0)
        if w <= 0:
            continue
        for a, b in zip(route.itinerary, route.itinerary[1:]):
            key = (pos[a], pos[b])
            if key[0] == key[1]:
                continue
            edges[key] = edges.get(key, 0.0) + w
    return SupplyGraph.from_weighted_edges(node_ids, edges)


# ------------------------------------------------------------------ metrics

def giant_component(g: SupplyGraph) -> Tuple[SupplyGraph, ComponentReport]:
    """Largest weakly connected component; size ties break to the component
    holding the smallest node id."""
    if g.n == 0:
        raise DataError("empty graph")
    n_comp, labels = csgraph.connected_components(
        g.to_sparse(ones=True), directed=True, connection="weak")
    best_label = None
    best_key = None
    for label in range(n_comp):
        members = np.flatnonzero(labels == label)
        key = (-members.size, min(g.node_ids[i] for i in members))
        if best_key is None or key < best_key:
            best_key = key
            best_label = label
    keep = np.flatnonzero(labels == best_label)
    report = ComponentReport(int(n_comp), int(keep.size), keep.size / g.n)
    return g.subgraph(keep.tolist()), report


def distances_from(g: SupplyGraph, source: int) -> np.ndarray:
    """Directed hop counts from source; -1 where unreachable."""
    if not 0 <= source < g.n:
        raise DataError(f"unknown source index {source}")
    dist = np.full(g.n, -1, dtype=np.int64)
    dist[source] = 0
    q = deque([source])
    indptr, indices = g.indptr, g.indices
    while q:
        v = q.popleft()
        for w in indices[indptr[v]:indptr[v + 1]]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                q.append(int(w))
    return dist


def graph_metrics(g: SupplyGraph, *,
                  exact_threshold: int = EXACT_NODE_THRESHOLD,
                  sample_count: int = SAMPLE_SOURCE_COUNT,
                  seed: int = 0,
                  mode: Optional[str] = None,
                  chunk: int = 512) -> GraphMetrics:
    """Hop-based path length, eccentricity, and diameter summaries.

    Averages run over ordered reachable pairs (u != v); eccentricity averages
    over sources that reach at least one other node. Graphs above the exact
    threshold are sampled over seeded random sources unless mode forces it.
    """
    if mode not in (None, "exact", "sampled"):
        raise ValueError(f"bad metrics mode {mode!r}")
    n = g.n
    if n == 0 or g.edge_count == 0:
        return GraphMetrics(0.0, 0.0, 0, n, g.edge_count, degenerate=True)
    if mode is None:
        mode = "exact" if n <= exact_threshold else "sampled"
    if mode == "sampled" and sample_count < n:
        rng = np.random.default_rng(seed)
        sources = np.sort(rng.choice(n, size=sample_count, replace=False))
        sampled = True
    else:
        sources = np.arange(n)
        sampled = False
    adj = g.to_sparse(ones=True)
    total = 0.0
    pairs = 0
    ecc_sum = 0.0
    ecc_count = 0
    diameter = 0
    for lo in range(0, sources.size, chunk):
        idx = sources[lo:lo + chunk]
        d = csgraph.dijkstra(adj, indices=idx, unweighted=True)
        d[np.arange(idx.size), idx] = np.inf      # drop the self pairs
        finite = np.isfinite(d)
        total += float(d[finite].sum())
        pairs += int(finite.sum())
        has_target = finite.any(axis=1)
        if has_target.any():
            eccs = np.where(finite, d, -np.inf).max(axis=1)[has_target]
            ecc_sum += float(eccs.sum())
            ecc_count += int(has_target.sum())
            diameter = max(diameter, int(eccs.max()))
    if pairs == 0:
        return GraphMetrics(0.0, 0.0, 0, n, g.edge_count, degenerate=True)
    return GraphMetrics(total / pairs, ecc_sum / ecc_count, diameter,
                        n, g.edge_count, reachable_pairs=pairs, sampled=sampled)


def betweenness(g: SupplyGraph) -> np.ndarray:
    """Unnormalized directed betweenness over ordered node pairs.

    Level-synchronous form of the usual two-pass accumulation: the forward
    sweep propagates path counts one BFS level per sparse matvec, and the
    backward sweep folds dependencies down the levels the same way.
    """
    n = g.n
    b = np.zeros(n)
    if n == 0 or g.edge_count == 0:
        return b
    fwd = g.to_sparse(ones=True)        # fwd[u, v] = 1 for edge u->v
    rev = fwd.T.tocsr()
    for s in range(n):
        dist = np.full(n, -1, dtype=np.int32)
        sigma = np.zeros(n)
        dist[s] = 0
        sigma[s] = 1.0
        frontier = np.zeros(n, dtype=bool)
        frontier[s] = True
        level = 0
        while True:
            contrib = rev @ np.where(frontier, sigma, 0.0)
            new = (contrib > 0.0) & (dist < 0)
            if not new.any():
                break
            level += 1
            dist[new] = level
            sigma[new] = contrib[new]
            frontier = new
        delta = np.zeros(n)
        for lev in range(level, 0, -1):
            wmask = dist == lev
            coeff = np.zeros(n)
            coeff[wmask] = (1.0 + delta[wmask]) / sigma[wmask]
            spread = fwd @ coeff
            vmask = dist == lev - 1
            delta[vmask] += sigma[vmask] * spread[vmask]
        delta[s] = 0.0
        b += delta
    return b


def local_stats(g: SupplyGraph, nodes: Sequence[int]) -> LocalStats:
    """Density, average clustering, and average weighted degree of the
    subgraph induced by the given nodes."""
    sub = g.subgraph(nodes)
    n = sub.n
    if n < 2:
        return LocalStats(0.0, 0.0, 0.0, degenerate=True)
    density = sub.edge_count / (n * (n - 1))
    neighbors: List[set] = [set() for _ in range(n)]
    for (u, v) in sub.symmetrized_edges():
        neighbors[u].add(v)
        neighbors[v].add(u)
    clustering = 0.0
    for u in range(n):
        nbrs = sorted(neighbors[u])
        k = len(nbrs)
        if k < 2:
            continue
        links = 0
        for i, a in enumerate(nbrs):
            na = neighbors[a]
            links += sum(1 for c in nbrs[i + 1:] if c in na)
        clustering += links / (k * (k - 1) / 2)
    src, dst, wts = sub.edge_arrays()
    wdeg = np.zeros(n)
    np.add.at(wdeg, src, wts)
    np.add.at(wdeg, dst, wts)
    return LocalStats(density, clustering / n, float(wdeg.mean()))


# --------------------------------------------------------------------- io

EDGES_HEADER = ["src", "dst", "weight"]


def write_edges(path, g: SupplyGraph) -> None:
    import csv

    src, dst, wts = g.edge_arrays()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EDGES_HEADER)
        for u, v, wt in zip(src.tolist(), dst.tolist(), wts.tolist()):
            w.writerow([g.node_ids[u], g.node_ids[v], str(wt)])


def load_edges(path) -> SupplyGraph:
    """Rebuild a supply graph from its edge list.

    Nodes are inferred from edge endpoints, so stops that carried no
    service are not represented; downstream consumers all work on the
    giant component, where that cannot matter.
    """
    import csv

    nodes = set()
    raw: List[Tuple[str, str, float]] = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header != EDGES_HEADER:
            raise DataError(f"bad edge file header: {header!r}")
        for row in r:
            if len(row) != 3:
                raise DataError(f"bad edge row: {row!r}")
            nodes.add(row[0])
            nodes.add(row[1])
            raw.append((row[0], row[1], float(row[2])))
    node_ids = sorted(nodes)
    pos = {nid: i for i, nid in enumerate(node_ids)}
    return SupplyGraph.from_weighted_edges(
        node_ids, {(pos[u], pos[v]): w for u, v, w in raw})
