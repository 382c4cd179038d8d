"""Community detection on the supply graph and per-community structure.

Louvain-style modularity optimization, written out in full: seeded local
moves followed by aggregation with self-loops, repeated until a pass yields
no improvement. Directed supply weights are symmetrized first. The reported
modularity comes from the optimizer's own accumulators; `modularity` below
recomputes it from the raw graph so the two paths check each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DataError
from .netcore import SupplyGraph, graph_metrics, local_stats


@dataclass(frozen=True)
class Partition:
    assignment: Dict[str, int]      # node id -> dense community label
    modularity: float
    levels: int

    @property
    def community_count(self) -> int:
        return len(set(self.assignment.values()))

    def members(self) -> Dict[int, List[str]]:
        out: Dict[int, List[str]] = {}
        for nid, c in self.assignment.items():
            out.setdefault(c, []).append(nid)
        return {c: sorted(ids) for c, ids in out.items()}


@dataclass(frozen=True)
class CommunityStats:
    community_id: int
    node_count: int
    diameter: int
    density: float
    avg_clustering: float
    avg_weighted_degree: float          # intra-community edges only
    avg_weighted_degree_full: float     # all incident edges in the host graph
    degenerate: bool = False

    @property
    def normalized_diameter(self) -> float:
        return self.diameter / self.node_count


# ----------------------------------------------------------------- modularity

def _symmetrized_lists(g: SupplyGraph) -> Tuple[List[List[Tuple[int, float]]], np.ndarray]:
    nbrs: List[Dict[int, float]] = [{} for _ in range(g.n)]
    src, dst, wts = g.edge_arrays()
    for u, v, w in zip(src.tolist(), dst.tolist(), wts.tolist()):
        nbrs[u][v] = nbrs[u].get(v, 0.0) + w
        nbrs[v][u] = nbrs[v].get(u, 0.0) + w
    out = [sorted(d.items()) for d in nbrs]
    self_w = np.zeros(g.n)
    return out, self_w


def modularity(g: SupplyGraph, assignment: Dict[str, int],
               resolution: float = 1.0) -> float:
    """Weighted modularity of an assignment, from the raw edges.

    Directions are ignored by summing both orientations; the value is
    Q = sum_c [ in_c/2m - resolution * (tot_c/2m)^2 ].
    """
    if set(assignment) != set(g.node_ids):
        raise DataError("assignment does not cover the node set exactly")
    src, dst, wts = g.edge_arrays()
    two_m = 2.0 * float(wts.sum())
    if two_m == 0:
        raise DataError("graph carries no weight")
    labels = np.array([assignment[nid] for nid in g.node_ids])
    deg = np.zeros(g.n)
    np.add.at(deg, src, wts)
    np.add.at(deg, dst, wts)
    q = 0.0
    internal = (labels[src] == labels[dst])
    # each directed edge contributes w to both endpoints' degrees, and 2w to
    # its community's internal sum when it stays inside one community
    in_by_comm: Dict[int, float] = {}
    for u, w in zip(src[internal].tolist(), wts[internal].tolist()):
        c = int(labels[u])
        in_by_comm[c] = in_by_comm.get(c, 0.0) + 2.0 * w
    tot_by_comm: Dict[int, float] = {}
    for i, c in enumerate(labels.tolist()):
        tot_by_comm[c] = tot_by_comm.get(c, 0.0) + deg[i]
    for c, tot in tot_by_comm.items():
        q += in_by_comm.get(c, 0.0) / two_m - resolution * (tot / two_m) ** 2
    return q


# -------------------------------------------------------------------- louvain

class _Level:
    """One aggregation level: symmetrized weighted graph plus move state."""

    def __init__(self, nbrs: List[List[Tuple[int, float]]], self_w: np.ndarray):
        self.nbrs = nbrs
        self.self_w = self_w
        n = len(nbrs)
        self.k = np.array([sum(w for _, w in nbrs[i]) + 2.0 * self_w[i]
                           for i in range(n)])
        self.m2 = float(self.k.sum())
        self.comm = np.arange(n)
        self.tot = self.k.copy()
        self.inw = 2.0 * self_w.copy()

    def one_pass(self, order: np.ndarray, resolution: float) -> int:
        moves = 0
        for i in order.tolist():
            ci = int(self.comm[i])
            links: Dict[int, float] = {}
            for j, w in self.nbrs[i]:
                if j != i:
                    links[int(self.comm[j])] = links.get(int(self.comm[j]), 0.0) + w
            w_old = links.get(ci, 0.0)
            self.tot[ci] -= self.k[i]
            self.inw[ci] -= 2.0 * w_old + 2.0 * self.self_w[i]
            base = w_old - resolution * self.tot[ci] * self.k[i] / self.m2
            best_c, best_score = ci, base
            for j, _ in self.nbrs[i]:
                c = int(self.comm[j])
                if c == ci or c == best_c:
                    continue
                wc = links.get(c)
                if wc is None:
                    continue
                score = wc - resolution * self.tot[c] * self.k[i] / self.m2
                if score > best_score:
                    best_c, best_score = c, score
            self.comm[i] = best_c
            self.tot[best_c] += self.k[i]
            self.inw[best_c] += 2.0 * links.get(best_c, 0.0) + 2.0 * self.self_w[i]
            if best_c != ci:
                moves += 1
        return moves

    def refresh_accumulators(self) -> None:
        """Rebuild tot/in sums exactly from current labels (no move drift)."""
        self.tot = np.zeros_like(self.tot)
        self.inw = np.zeros_like(self.inw)
        for i, c in enumerate(self.comm.tolist()):
            self.tot[c] += self.k[i]
            self.inw[c] += 2.0 * self.self_w[i]
        for i in range(len(self.nbrs)):
            for j, w in self.nbrs[i]:
                if i < j and self.comm[i] == self.comm[j]:
                    self.inw[self.comm[i]] += 2.0 * w
            # i > j pairs are covered by symmetry; equal indices cannot occur

    def quality(self, resolution: float) -> float:
        used = np.unique(self.comm)
        return float(np.sum(self.inw[used] / self.m2
                            - resolution * (self.tot[used] / self.m2) ** 2))

    def aggregate(self) -> Tuple["_Level", np.ndarray]:
        used = np.unique(self.comm)
        remap = {int(c): i for i, c in enumerate(used.tolist())}
        mapping = np.array([remap[int(c)] for c in self.comm.tolist()])
        k = used.size
        agg: List[Dict[int, float]] = [{} for _ in range(k)]
        self_w = np.zeros(k)
        for i, c in enumerate(mapping.tolist()):
            self_w[c] += self.self_w[i]
        for i in range(len(self.nbrs)):
            ci = int(mapping[i])
            for j, w in self.nbrs[i]:
                if i < j:
                    cj = int(mapping[j])
                    if ci == cj:
                        self_w[ci] += w
                    else:
                        agg[ci][cj] = agg[ci].get(cj, 0.0) + w
                        agg[cj][ci] = agg[cj].get(ci, 0.0) + w
        nbrs = [sorted(d.items()) for d in agg]
        return _Level(nbrs, self_w), mapping


def louvain(g: SupplyGraph, seed: int = 0, resolution: float = 1.0) -> Partition:
    """Seeded two-phase modularity optimization on the symmetrized graph.

    Deterministic for a fixed (graph, seed, resolution): node visit order is
    the only randomized ingredient. Labels in the result are dense, ordered
    by community size (largest first) with ties on the smallest member id.
    """
    if g.n == 0:
        raise DataError("empty graph")
    if g.edge_count == 0:
        raise DataError("graph has no edges")
    rng = np.random.default_rng(seed)
    nbrs, self_w = _symmetrized_lists(g)
    level = _Level(nbrs, self_w)
    mappings: List[np.ndarray] = []
    levels = 0
    while True:
        order = rng.permutation(len(level.nbrs))
        moved_total = 0
        while True:
            moved = level.one_pass(order, resolution)
            moved_total += moved
            if moved == 0:
                break
        level.refresh_accumulators()
        if moved_total == 0 and levels > 0:
            break
        levels += 1
        nxt, mapping = level.aggregate()
        mappings.append(mapping)
        if len(nxt.nbrs) == len(level.nbrs):
            level = nxt
            break
        level = nxt

    flat = np.arange(g.n)
    for mapping in mappings:
        flat = mapping[flat]
    level.refresh_accumulators()
    q = level.quality(resolution)

    # dense labels: big communities first, ties to the smallest member id
    groups: Dict[int, List[int]] = {}
    for i, c in enumerate(flat.tolist()):
        groups.setdefault(int(c), []).append(i)
    ordered = sorted(groups.values(),
                     key=lambda ids: (-len(ids), min(g.node_ids[i] for i in ids)))
    assignment: Dict[str, int] = {}
    for label, ids in enumerate(ordered):
        for i in ids:
            assignment[g.node_ids[i]] = label
    return Partition(assignment, q, levels)


# ------------------------------------------------------------------- reports

def community_stats(g: SupplyGraph, partition: Partition) -> List[CommunityStats]:
    """Structural profile of each community's induced subgraph."""
    src, dst, wts = g.edge_arrays()
    wdeg_full = np.zeros(g.n)
    np.add.at(wdeg_full, src, wts)
    np.add.at(wdeg_full, dst, wts)
    out: List[CommunityStats] = []
    for c, ids in sorted(partition.members().items()):
        idx = [g.index_of(nid) for nid in ids]
        stats = local_stats(g, idx)
        metrics = graph_metrics(g.subgraph(idx))
        out.append(CommunityStats(
            community_id=c,
            node_count=len(idx),
            diameter=metrics.diameter,
            density=stats.density,
            avg_clustering=stats.avg_clustering,
            avg_weighted_degree=stats.avg_weighted_degree,
            avg_weighted_degree_full=float(wdeg_full[idx].mean()),
            degenerate=stats.degenerate or metrics.degenerate,
        ))
    return out


COMMUNITIES_HEADER = ["node_id", "community_id"]
STATS_HEADER = ["community_id", "node_count", "diameter", "normalized_diameter",
                "density", "avg_clustering", "avg_weighted_degree",
                "avg_weighted_degree_full"]


def write_communities(path, partition: Partition) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMMUNITIES_HEADER)
        for nid in sorted(partition.assignment):
            w.writerow([nid, partition.assignment[nid]])


def load_communities(path) -> Dict[str, int]:
    import csv
    out: Dict[str, int] = {}
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != COMMUNITIES_HEADER:
            raise DataError(f"{path}: unexpected header {r.fieldnames}")
        for row in r:
            out[row["node_id"]] = int(row["community_id"])
    return out


def write_community_stats(path, rows: Sequence[CommunityStats]) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATS_HEADER)
        for s in rows:
            w.writerow([s.community_id, s.node_count, s.diameter,
                        str(s.normalized_diameter), str(s.density),
                        str(s.avg_clustering), str(s.avg_weighted_degree),
                        str(s.avg_weighted_degree_full)])
