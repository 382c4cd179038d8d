"""Supply graph construction, metrics, and centrality against the oracles."""

import numpy as np
import pytest

from oracles import (
    betweenness_reference,
    hop_matrix,
    metrics_reference,
    random_digraph,
)
from transitnet.errors import DataError
from transitnet.netcore import (
    ComponentReport,
    GraphMetrics,
    LocalStats,
    RouteSupply,
    SupplyGraph,
    average_route_weights,
    betweenness,
    build_supply_graph,
    compute_route_supply,
    daily_route_supplies,
    distances_from,
    giant_component,
    graph_metrics,
    load_edges,
    local_stats,
    write_edges,
)
from transitnet.records import GpsPing, PingTable, RouteDef, Stop, parse_iso


def make_graph(n, edges, weight=1.0):
    ids = [f"n{i:03d}" for i in range(n)]
    return SupplyGraph.from_weighted_edges(ids, {(u, v): weight for u, v in edges})


def bidirected(pairs):
    return [(u, v) for u, v in pairs] + [(v, u) for u, v in pairs]


PATH5 = bidirected([(0, 1), (1, 2), (2, 3), (3, 4)])


# ------------------------------------------------------------- graph object

def test_graph_canonical_and_lookup():
    g = make_graph(3, [(2, 0), (0, 1), (1, 2)])
    assert g.n == 3 and g.edge_count == 3
    src, dst, w = g.edge_arrays()
    assert src.tolist() == [0, 1, 2]
    assert dst.tolist() == [1, 2, 0]
    assert g.has_edge(0, 1) and not g.has_edge(1, 0)
    assert g.index_of("n001") == 1


def test_graph_rejects_invalid_edges():
    with pytest.raises(DataError):
        make_graph(2, [(0, 0)])
    with pytest.raises(DataError):
        SupplyGraph.from_weighted_edges(["a", "b"], {(0, 1): 0.0})
    with pytest.raises(DataError):
        SupplyGraph.from_weighted_edges(["a", "b"], {(0, 2): 1.0})


def test_added_edges_sum_and_removal_restores_exactly():
    g = make_graph(3, [(0, 1), (1, 2)], weight=2.0)
    g2 = g.with_added_edges([(2, 0, 5.0)])
    assert g2.has_edge(2, 0) and not g.has_edge(2, 0)
    restored = g2.without_edges([(2, 0, 5.0)])
    assert restored == g

    stacked = g.with_added_edges([(0, 1, 3.0)])
    src, dst, w = stacked.edge_arrays()
    assert w[0] == 5.0 and stacked.edge_count == g.edge_count


def test_without_edges_error_paths():
    g = make_graph(3, [(0, 1)], weight=2.0)
    with pytest.raises(DataError):
        g.without_edges([(1, 0, 1.0)])
    with pytest.raises(DataError):
        g.without_edges([(0, 1, 3.0)])


def test_subgraph_induces_and_relabels():
    g = make_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    sub = g.subgraph([1, 2])
    assert sub.node_ids == ["n001", "n002"]
    assert sub.edge_count == 1
    assert sub.has_edge(0, 1)


def test_symmetrized_edges_sum_directions():
    g = SupplyGraph.from_weighted_edges(["a", "b"], {(0, 1): 2.0, (1, 0): 3.0})
    assert g.symmetrized_edges() == {(0, 1): 5.0}


# ------------------------------------------------------------- route supply

STOPS_ABC = {
    "A": Stop("A", 0.000, 0.0, False),
    "B": Stop("B", 0.004, 0.0, False),
    "C": Stop("C", 0.008, 0.0, False),
}
T0 = parse_iso("2026-03-02T06:00:00+00:00")


def _pings(rows):
    return PingTable.from_records(
        [GpsPing(v, "RZ", T0 + dt, STOPS_ABC[s].lat, STOPS_ABC[s].lon)
         for v, dt, s in rows])


ROUTE_ABC = RouteDef("RZ", "outbound", ("A", "B", "C"))


def test_supply_two_vehicles_three_laps():
    rows = []
    for v in ("V1", "V2"):
        for lap in range(3):
            rows += [(v, 600 * lap, "A"), (v, 600 * lap + 300, "C")]
    s = compute_route_supply(ROUTE_ABC, _pings(rows), STOPS_ABC)
    assert s == RouteSupply("RZ", 2, 3.0, 6.0)


def test_supply_single_vehicle_two_traversals():
    rows = [("V1", 0, "A"), ("V1", 300, "C"), ("V1", 600, "A"), ("V1", 900, "C")]
    s = compute_route_supply(ROUTE_ABC, _pings(rows), STOPS_ABC)
    assert (s.vehicles, s.completions_per_vehicle, s.weight) == (1, 2.0, 2.0)


def test_supply_never_reaching_last_stop():
    rows = [("V1", 0, "A"), ("V1", 300, "B"), ("V1", 600, "A")]
    s = compute_route_supply(ROUTE_ABC, _pings(rows), STOPS_ABC)
    assert (s.vehicles, s.completions_per_vehicle, s.weight) == (1, 0.0, 0.0)


def test_supply_no_pings():
    s = compute_route_supply(ROUTE_ABC, PingTable.from_records([]), STOPS_ABC)
    assert s == RouteSupply("RZ", 0, 0.0, 0.0)


def test_supply_dwell_counts_once():
    rows = [("V1", 0, "A"), ("V1", 60, "A"), ("V1", 300, "C"), ("V1", 360, "C")]
    s = compute_route_supply(ROUTE_ABC, _pings(rows), STOPS_ABC)
    assert s.weight == 1.0


def test_supply_circular_route_laps():
    loop = RouteDef("RZ", "outbound", ("A", "B", "C", "A"))
    rows = [("V1", 0, "A"), ("V1", 100, "B"), ("V1", 200, "C"), ("V1", 300, "A"),
            ("V1", 360, "A"), ("V1", 400, "B"), ("V1", 500, "C"), ("V1", 600, "A")]
    s = compute_route_supply(loop, _pings(rows), STOPS_ABC)
    assert (s.vehicles, s.completions_per_vehicle) == (1, 2.0)


def test_daily_supplies_group_by_day_and_average():
    day = 86400
    rows = [("V1", 0, "A"), ("V1", 300, "C"),
            ("V1", day, "A"), ("V1", day + 300, "C"),
            ("V2", day, "A"), ("V2", day + 300, "C")]
    daily = daily_route_supplies({"RZ": ROUTE_ABC}, _pings(rows), STOPS_ABC)
    assert len(daily) == 2
    days = sorted(daily)
    assert daily[days[0]]["RZ"].weight == 1.0
    assert daily[days[1]]["RZ"].weight == 2.0
    weights = average_route_weights(daily)
    assert weights == {"RZ": 1.5}


def test_average_weight_counts_idle_days_as_zero():
    day = 86400
    other = RouteDef("RY", "outbound", ("C", "B", "A"))
    rows = [("V1", 0, "A"), ("V1", 300, "C")]
    rows = [("V1", 0, "A"), ("V1", 300, "C"),
            ("V3", day + 0, "C"), ("V3", day + 300, "A")]
    pings = PingTable.from_records(
        [GpsPing(v, "RZ" if v == "V1" else "RY", T0 + dt,
                 STOPS_ABC[s].lat, STOPS_ABC[s].lon) for v, dt, s in rows])
    daily = daily_route_supplies({"RZ": ROUTE_ABC, "RY": other}, pings, STOPS_ABC)
    weights = average_route_weights(daily)
    assert weights == {"RZ": 0.5, "RY": 0.5}


# -------------------------------------------------------------- graph build

def test_build_graph_consecutive_pairs_only():
    g = build_supply_graph({"R": RouteDef("R", "outbound", ("A", "B", "C"))},
                           {"R": 6.0})
    assert g.node_ids == ["A", "B", "C"]
    assert g.edge_dict() == {(0, 1): 6.0, (1, 2): 6.0}


def test_build_graph_sums_over_routes():
    routes = {
        "R1": RouteDef("R1", "outbound", ("A", "B")),
        "R2": RouteDef("R2", "outbound", ("A", "B")),
    }
    g = build_supply_graph(routes, {"R1": 6.0, "R2": 4.0})
    assert g.edge_dict() == {(0, 1): 10.0}


def test_build_graph_total_weight_identity():
    rng = np.random.default_rng(17)
    routes = {}
    weights = {}
    names = [f"S{i}" for i in range(30)]
    for r in range(12):
        length = int(rng.integers(2, 8))
        itin = rng.choice(30, size=length, replace=False)
        routes[f"R{r}"] = RouteDef(f"R{r}", "outbound",
                                   tuple(names[i] for i in itin))
        weights[f"R{r}"] = float(rng.integers(1, 9))
    g = build_supply_graph(routes, weights)
    expected = sum(w * (len(routes[rid].itinerary) - 1)
                   for rid, w in weights.items())
    assert np.isclose(g.weights.sum(), expected)


def test_build_graph_drops_zero_weight_routes():
    routes = {"R1": RouteDef("R1", "outbound", ("A", "B")),
              "R2": RouteDef("R2", "outbound", ("B", "C"))}
    g = build_supply_graph(routes, {"R1": 2.0, "R2": 0.0})
    assert g.edge_dict() == {(0, 1): 2.0}
    assert g.node_ids == ["A", "B", "C"]


# --------------------------------------------------------------- components

def test_giant_component_identity_when_connected():
    g = make_graph(4, bidirected([(0, 1), (1, 2), (2, 3)]))
    giant, report = giant_component(g)
    assert giant == g
    assert report == ComponentReport(1, 4, 1.0)


def test_giant_component_tie_breaks_on_smallest_id():
    # two triangles of equal size plus an isolated bidirected pair
    edges = bidirected([(0, 1), (1, 2), (0, 2),
                        (3, 4), (4, 5), (3, 5),
                        (6, 7)])
    g = make_graph(8, edges)
    giant, report = giant_component(g)
    assert giant.node_ids == ["n000", "n001", "n002"]
    assert report.component_count == 3
    assert report.giant_size == 3
    assert np.isclose(report.coverage, 3 / 8)


def test_giant_component_empty_graph():
    with pytest.raises(DataError):
        giant_component(SupplyGraph.from_weighted_edges([], {}))


# ---------------------------------------------------------------- distances

def test_distances_respect_direction():
    g = make_graph(3, [(0, 1), (1, 2)])
    assert distances_from(g, 0).tolist() == [0, 1, 2]
    assert distances_from(g, 2).tolist() == [-1, -1, 0]


def test_distances_on_ring():
    g = make_graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert distances_from(g, 1).tolist() == [3, 0, 1, 2]
    with pytest.raises(DataError):
        distances_from(g, 9)


# ------------------------------------------------------------------ metrics

def test_metrics_path_of_five():
    m = graph_metrics(make_graph(5, PATH5))
    assert abs(m.avg_path_length - 2.0) < 1e-12
    assert abs(m.avg_eccentricity - 3.2) < 1e-12
    assert m.diameter == 4
    assert m.reachable_pairs == 20
    assert not m.sampled and not m.degenerate


def test_metrics_degenerate_graphs():
    lonely = SupplyGraph.from_weighted_edges(["x"], {})
    m = graph_metrics(lonely)
    assert m.degenerate and m.diameter == 0 and m.avg_path_length == 0.0
    empty_edges = SupplyGraph.from_weighted_edges(["x", "y"], {})
    assert graph_metrics(empty_edges).degenerate


def test_metrics_frozen_seeded_digraph():
    # frozen from the dense-distance oracle before this module existed
    edges = random_digraph(np.random.default_rng(101), 12, 0.3)
    assert len(edges) == 35
    m = graph_metrics(make_graph(12, edges))
    assert abs(m.avg_path_length - 2.008928571429) < 1e-9
    assert abs(m.avg_eccentricity - 3.25) < 1e-9
    assert m.diameter == 5


def test_metrics_match_oracle_on_random_digraphs():
    rng = np.random.default_rng(23)
    for _ in range(12):
        n = int(rng.integers(2, 60))
        edges = random_digraph(rng, n, float(rng.uniform(0.02, 0.4)))
        got = graph_metrics(make_graph(n, edges))
        apl, ecc, diam, degenerate = metrics_reference(n, edges)
        assert got.degenerate == degenerate
        assert abs(got.avg_path_length - apl) < 1e-9
        assert abs(got.avg_eccentricity - ecc) < 1e-9
        assert got.diameter == int(diam)


def test_sampled_mode_close_to_exact():
    rng = np.random.default_rng(31)
    edges = random_digraph(rng, 2000, 0.002)
    g = make_graph(2000, edges)
    exact = graph_metrics(g)
    sampled = graph_metrics(g, mode="sampled", seed=5)
    assert not exact.sampled and sampled.sampled
    assert abs(sampled.avg_path_length - exact.avg_path_length) \
        <= 0.05 * exact.avg_path_length
    assert sampled.diameter <= exact.diameter


def test_forced_exact_above_threshold_flag():
    g = make_graph(30, bidirected([(i, i + 1) for i in range(29)]))
    m = graph_metrics(g, exact_threshold=10, sample_count=8, seed=1)
    assert m.sampled
    m2 = graph_metrics(g, exact_threshold=10, mode="exact")
    assert not m2.sampled
    with pytest.raises(ValueError):
        graph_metrics(g, mode="quick")


# -------------------------------------------------------------- betweenness

def test_betweenness_small_fixtures():
    assert betweenness(make_graph(3, bidirected([(0, 1), (1, 2)]))).tolist() == \
        [0.0, 2.0, 0.0]
    star = betweenness(make_graph(5, bidirected([(0, 1), (0, 2), (0, 3), (0, 4)])))
    assert star.tolist() == [12.0, 0.0, 0.0, 0.0, 0.0]
    assert betweenness(make_graph(5, PATH5)).tolist() == [0.0, 6.0, 8.0, 6.0, 0.0]


def test_betweenness_complete_graph_zero():
    edges = [(u, v) for u in range(5) for v in range(5) if u != v]
    assert np.allclose(betweenness(make_graph(5, edges)), 0.0)


def test_betweenness_frozen_seeded_digraph():
    edges = random_digraph(np.random.default_rng(101), 12, 0.3)
    frozen = [5.95, 6.7, 4.5, 2.4, 11.666666667, 1.083333333, 8.0,
              4.733333333, 27.066666667, 8.833333333, 7.816666667, 24.25]
    assert np.allclose(betweenness(make_graph(12, edges)), frozen, atol=2e-9)


def test_betweenness_matches_oracle():
    rng = np.random.default_rng(29)
    for _ in range(15):
        n = int(rng.integers(2, 50))
        edges = random_digraph(rng, n, float(rng.uniform(0.05, 0.5)))
        got = betweenness(make_graph(n, edges))
        want = betweenness_reference(n, edges)
        assert np.allclose(got, want, atol=1e-9)


# -------------------------------------------------------------- local stats

def test_local_stats_triangle():
    g = make_graph(3, bidirected([(0, 1), (1, 2), (0, 2)]), weight=2.0)
    s = local_stats(g, [0, 1, 2])
    assert s.density == 1.0
    assert s.avg_clustering == 1.0
    assert np.isclose(s.avg_weighted_degree, 8.0)   # 4 incident arcs x 2.0
    assert not s.degenerate


def test_local_stats_star():
    g = make_graph(4, bidirected([(0, 1), (0, 2), (0, 3)]))
    s = local_stats(g, [0, 1, 2, 3])
    assert np.isclose(s.density, 6 / 12)
    assert s.avg_clustering == 0.0


def test_local_stats_subset_and_degenerate():
    g = make_graph(4, bidirected([(0, 1), (1, 2), (0, 2), (2, 3)]))
    s = local_stats(g, [0, 1, 2])
    assert s.density == 1.0
    assert local_stats(g, [3]).degenerate


# ------------------------------------------------- edge-addition monotonicity

def strongly_connected_digraph(rng, n, p):
    """Random digraph plus a full ring, so every pair stays reachable."""
    ring = [(i, (i + 1) % n) for i in range(n)]
    extra = random_digraph(rng, n, p)
    return sorted(set(ring) | set(extra))


def test_edge_addition_never_lengthens_paths():
    # On strongly connected graphs reachability is fixed, so shrinking
    # pairwise distances forces every aggregate metric down too. (Without
    # strong connectivity an added edge can surface new, longer reachable
    # pairs and legitimately raise the averages.)
    rng = np.random.default_rng(37)
    checked = 0
    while checked < 100:
        n = int(rng.integers(3, 40))
        edges = strongly_connected_digraph(rng, n, float(rng.uniform(0.02, 0.2)))
        existing = set(edges)
        u, v = int(rng.integers(n)), int(rng.integers(n))
        if u == v or (u, v) in existing:
            continue
        checked += 1
        g = make_graph(n, edges)
        g2 = g.with_added_edges([(u, v, 1.0)])
        before = hop_matrix(n, edges)
        after = hop_matrix(n, edges + [(u, v)])
        assert np.all(after <= before + 1e-12)
        m1, m2 = graph_metrics(g), graph_metrics(g2)
        assert m2.avg_path_length <= m1.avg_path_length + 1e-12
        assert m2.avg_eccentricity <= m1.avg_eccentricity + 1e-12
        assert m2.diameter <= m1.diameter


# ------------------------------------------------------- synthetic city run

def test_city_graph_end_to_end(small_city):
    stops = {s.stop_id: s for s in small_city.stops}
    routes = {r.route_id: r for r in small_city.routes}
    daily = daily_route_supplies(routes, small_city.pings, stops)
    assert len(daily) == 7
    weights = average_route_weights(daily)
    assert all(w >= 0 for w in weights.values())
    assert sum(1 for w in weights.values() if w > 0) > len(routes) * 0.9
    g = build_supply_graph(routes, weights, stops)
    assert g.n == len(stops)
    giant, report = giant_component(g)
    assert report.coverage > 0.95
    m = graph_metrics(giant)
    assert not m.degenerate
    assert m.avg_path_length <= m.avg_eccentricity <= m.diameter


# ------------------------------------------------------------ edge list io

def test_edges_roundtrip(tmp_path):
    rng = np.random.default_rng(31)
    g = make_graph(25, strongly_connected_digraph(rng, 25, 0.1), weight=2.5)
    path = tmp_path / "edges.csv"
    write_edges(path, g)
    back = load_edges(path)
    assert back.node_ids == g.node_ids
    s1, d1, w1 = g.edge_arrays()
    s2, d2, w2 = back.edge_arrays()
    assert {(a, b, c) for a, b, c in zip(s1.tolist(), d1.tolist(), w1.tolist())} \
        == {(a, b, c) for a, b, c in zip(s2.tolist(), d2.tolist(), w2.tolist())}
    m1, m2 = graph_metrics(g), graph_metrics(back)
    assert m1.as_dict() == m2.as_dict()


def test_load_edges_rejects_bad_header(tmp_path):
    path = tmp_path / "edges.csv"
    path.write_text("from,to,w\na,b,1.0\n")
    with pytest.raises(DataError, match="header"):
        load_edges(path)
