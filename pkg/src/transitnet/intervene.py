"""Express-link interventions between community centers.

A plan ranks community pairs by their combined weekday flow, picks one
representative node per community (highest betweenness inside the giant
component, ties to the smallest id), and adds a bidirectional express edge
between the two centers at each step. Application is cumulative; the metric
trajectory is recomputed after every step and can only improve, since adding
an edge never lengthens a shortest path.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .communities import Partition
from .errors import DataError
from .flows import FlowMatrix, top_inter_pairs
from .netcore import GraphMetrics, SupplyGraph, betweenness, graph_metrics
from .records import WEEKDAY


@dataclass(frozen=True)
class InterventionStep:
    index: int                      # 1-based position in the plan
    communities: Tuple[int, int]
    flow: int
    centers: Tuple[str, str]
    weight: float

    def directed_edges(self) -> List[Tuple[str, str, float]]:
        a, b = self.centers
        return [(a, b, self.weight), (b, a, self.weight)]


@dataclass(frozen=True)
class InterventionPlan:
    steps: Tuple[InterventionStep, ...]
    center_of: Dict[int, str]

    def all_directed_edges(self) -> List[Tuple[str, str, float]]:
        out: List[Tuple[str, str, float]] = []
        for s in self.steps:
            out.extend(s.directed_edges())
        return out


@dataclass(frozen=True)
class TrajectoryPoint:
    step: int                       # 0 = baseline
    metrics: GraphMetrics
    delta_apl: float = 0.0
    delta_ecc: float = 0.0
    delta_diam: int = 0
    duplicates: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class MetricsTrajectory:
    points: Tuple[TrajectoryPoint, ...]

    def largest_drop_step(self, metric: str) -> int:
        """1-based step with the biggest single-step improvement."""
        deltas = {"apl": [p.delta_apl for p in self.points],
                  "avg_ecc": [p.delta_ecc for p in self.points],
                  "diameter": [p.delta_diam for p in self.points]}
        if metric not in deltas:
            raise DataError(f"unknown metric {metric!r}")
        series = deltas[metric][1:]
        if not series:
            raise DataError("trajectory has no intervention steps")
        return 1 + min(range(len(series)), key=lambda i: series[i])


def community_center(g: SupplyGraph, partition: Partition, community_id: int,
                     bw: Optional[np.ndarray] = None) -> str:
    """Most central member of a community, judged on the whole graph."""
    members = [nid for nid, c in partition.assignment.items()
               if c == community_id]
    if not members:
        raise DataError(f"community {community_id} has no members")
    if bw is None:
        bw = betweenness(g)
    return min(members, key=lambda nid: (-bw[g.index_of(nid)], nid))


def plan_interventions(g: SupplyGraph, matrices: Dict[str, FlowMatrix],
                       partition: Partition, k: int,
                       weight: Optional[float] = None) -> InterventionPlan:
    """Rank weekday community pairs by flow and join their centers.

    Centers come from one betweenness pass over the baseline graph and stay
    fixed for the whole plan. The express-edge weight defaults to the
    heaviest existing edge so exports stay on the same scale; hop metrics
    never look at it.
    """
    wk = matrices.get(WEEKDAY)
    if wk is None:
        raise DataError("weekday flow matrix required for planning")
    if k < 1:
        raise DataError("k must be positive")
    top = top_inter_pairs(wk, k)
    if len(top) < k:
        raise DataError(f"asked for {k} steps but only {len(top)} "
                        "community pairs carry inter flow")
    if weight is None:
        weight = g.max_weight()
    bw = betweenness(g)
    center_of: Dict[int, str] = {}
    for a, b, _ in top:
        for c in (a, b):
            if c not in center_of:
                center_of[c] = community_center(g, partition, c, bw)
    steps = tuple(
        InterventionStep(i + 1, (a, b), f, (center_of[a], center_of[b]),
                         float(weight))
        for i, (a, b, f) in enumerate(top)
    )
    return InterventionPlan(steps, center_of)


def apply_interventions(g: SupplyGraph, plan: InterventionPlan,
                        mode: Optional[str] = None,
                        seed: int = 0) -> Tuple[SupplyGraph, MetricsTrajectory]:
    """Add each step's edge pair cumulatively, measuring after every step.

    Returns the final graph and the trajectory from baseline (step 0)
    onward. An express edge that already exists gets its weight bumped and
    the step is flagged, but it still counts as a step.
    """
    for c, nid in plan.center_of.items():
        try:
            g.index_of(nid)
        except KeyError:
            raise DataError(f"center {nid} (community {c}) not in graph")
    cur = g
    base = graph_metrics(cur, mode=mode, seed=seed)
    points = [TrajectoryPoint(0, base)]
    prev = base
    for step in plan.steps:
        dupes = tuple((u, v) for u, v, _ in step.directed_edges()
                      if cur.has_edge(cur.index_of(u), cur.index_of(v)))
        cur = cur.with_added_edges(
            (cur.index_of(u), cur.index_of(v), w)
            for u, v, w in step.directed_edges())
        m = graph_metrics(cur, mode=mode, seed=seed)
        points.append(TrajectoryPoint(
            step.index, m,
            delta_apl=m.avg_path_length - prev.avg_path_length,
            delta_ecc=m.avg_eccentricity - prev.avg_eccentricity,
            delta_diam=m.diameter - prev.diameter,
            duplicates=dupes,
        ))
        prev = m
    return cur, MetricsTrajectory(tuple(points))


def revert_interventions(g_after: SupplyGraph,
                         plan: InterventionPlan) -> SupplyGraph:
    """Take a plan's edges back out; hop metrics return to baseline."""
    return g_after.without_edges(
        (g_after.index_of(u), g_after.index_of(v), w)
        for u, v, w in plan.all_directed_edges())


# --------------------------------------------------------------------- io

TRAJECTORY_HEADER = ["step", "apl", "avg_ecc", "diameter",
                     "delta_apl", "delta_ecc", "delta_diam"]


def write_trajectory(path, traj: MetricsTrajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for p in traj.points:
            w.writerow([p.step, str(p.metrics.avg_path_length),
                        str(p.metrics.avg_eccentricity), p.metrics.diameter,
                        str(p.delta_apl), str(p.delta_ecc), p.delta_diam])


def load_trajectory(path) -> List[dict]:
    out = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        if r.fieldnames != TRAJECTORY_HEADER:
            raise DataError(f"{path}: unexpected header {r.fieldnames}")
        for row in r:
            out.append({
                "step": int(row["step"]),
                "apl": float(row["apl"]),
                "avg_ecc": float(row["avg_ecc"]),
                "diameter": int(row["diameter"]),
                "delta_apl": float(row["delta_apl"]),
                "delta_ecc": float(row["delta_ecc"]),
                "delta_diam": int(row["delta_diam"]),
            })
    return out


def plan_to_dict(plan: InterventionPlan) -> dict:
    return {
        "centers": {str(c): nid for c, nid in sorted(plan.center_of.items())},
        "steps": [
            {
                "step": s.index,
                "communities": list(s.communities),
                "flow": s.flow,
                "centers": list(s.centers),
                "weight": s.weight,
                "edges": [[u, v] for u, v, _ in s.directed_edges()],
            }
            for s in plan.steps
        ],
    }


def plan_from_dict(data: dict) -> InterventionPlan:
    try:
        steps = tuple(
            InterventionStep(int(s["step"]),
                             (int(s["communities"][0]), int(s["communities"][1])),
                             int(s["flow"]),
                             (str(s["centers"][0]), str(s["centers"][1])),
                             float(s["weight"]))
            for s in data["steps"]
        )
        center_of = {int(c): str(nid) for c, nid in data["centers"].items()}
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise DataError(f"malformed intervention plan: {exc}")
    return InterventionPlan(steps, center_of)


def write_plan(path, plan: InterventionPlan) -> None:
    with open(path, "w") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(path) -> InterventionPlan:
    with open(path) as fh:
        return plan_from_dict(json.load(fh))
