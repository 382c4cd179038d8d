"""HTTP read model over a finished workspace, plus stateless previews.

The app loads one immutable snapshot (graph, partition, flows, committed
plan if any) when it starts and serves every request from it, so all
responses describe the same workspace state and carry its manifest digest.
Previews compute on copies of the snapshot graph and never write anything;
committing a plan happens through the command line, after which the
service must be restarted to pick the new artifacts up.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .communities import Partition, load_communities
from .errors import DataError
from .flows import FlowMatrix, load_flow_matrices
from .intervene import (
    InterventionPlan,
    InterventionStep,
    MetricsTrajectory,
    apply_interventions,
    community_center,
    load_trajectory,
)
from .netcore import SupplyGraph, betweenness, giant_component, load_edges
from .records import WEEKDAY
from .workspace import Workspace, load_json


@dataclass(frozen=True)
class Snapshot:
    """Everything a request handler may touch, loaded once, never mutated."""

    digest: str
    giant: SupplyGraph
    partition: Partition
    matrices: Dict[str, FlowMatrix]
    centers: Dict[int, str]         # fixed at baseline, like CLI plans
    metrics_doc: dict
    partition_doc: dict
    graph_geo: dict
    communities_geo: dict
    community_stats: List[dict]
    flow_summary: dict
    plan_doc: Optional[dict]
    trajectory_rows: Optional[List[dict]]


def load_snapshot(workspace) -> Snapshot:
    ws = Workspace(workspace)
    for artifact in ("graph", "partition", "flows"):
        ws.require(artifact)
    giant, _ = giant_component(load_edges(ws.path("edges.csv")))
    meta = load_json(ws.path("partition.json"))
    partition = Partition(load_communities(ws.path("communities.csv")),
                          meta["modularity"], meta["levels"])
    matrices = load_flow_matrices(ws.path("flows.csv"))
    bw = betweenness(giant)
    centers = {c: community_center(giant, partition, c, bw)
               for c in range(partition.community_count)}
    with open(ws.path("community_stats.csv"), newline="") as fh:
        stats = []
        for row in csv.DictReader(fh):
            stats.append({
                "community_id": int(row["community_id"]),
                "node_count": int(row["node_count"]),
                "diameter": int(row["diameter"]),
                "normalized_diameter": float(row["normalized_diameter"]),
                "density": float(row["density"]),
                "avg_clustering": float(row["avg_clustering"]),
                "avg_weighted_degree": float(row["avg_weighted_degree"]),
                "avg_weighted_degree_full":
                    float(row["avg_weighted_degree_full"]),
            })
    plan_doc = None
    trajectory_rows = None
    if ws.has("trajectory"):
        plan_doc = load_json(ws.path("plan.json"))
        trajectory_rows = load_trajectory(ws.path("trajectory.csv"))
    return Snapshot(
        digest=ws.manifest_digest(),
        giant=giant,
        partition=partition,
        matrices=matrices,
        centers=centers,
        metrics_doc=load_json(ws.path("metrics.json")),
        partition_doc=meta,
        graph_geo=load_json(ws.path("graph.geojson")),
        communities_geo=load_json(ws.path("communities.geojson")),
        community_stats=stats,
        flow_summary=load_json(ws.path("flow_summary.json")),
        plan_doc=plan_doc,
        trajectory_rows=trajectory_rows,
    )


class PreviewRequest(BaseModel):
    pairs: List[List[int]]


def _validated_pairs(snap: Snapshot,
                     pairs: List[List[int]]) -> List[Tuple[int, int]]:
    if not pairs:
        raise HTTPException(422, "at least one community pair is required")
    k = snap.partition.community_count
    seen = set()
    out = []
    for p in pairs:
        if len(p) != 2:
            raise HTTPException(422, f"pair {p} must have exactly two "
                                     "community ids")
        a, b = p
        if a == b:
            raise HTTPException(422, f"pair {p} joins a community to itself")
        if not (0 <= a < k and 0 <= b < k):
            raise HTTPException(422, f"pair {p} is out of range for "
                                     f"{k} communities")
        key = (min(a, b), max(a, b))
        if key in seen:
            raise HTTPException(422, f"pair {p} is staged twice")
        seen.add(key)
        out.append((a, b))
    return out


def _preview_plan(snap: Snapshot,
                  pairs: List[Tuple[int, int]]) -> InterventionPlan:
    """Same construction the CLI planner uses, for caller-chosen pairs."""
    weight = snap.giant.max_weight()
    wk = snap.matrices.get(WEEKDAY)
    steps = []
    for i, (a, b) in enumerate(pairs):
        flow = 0
        if wk is not None and a < wk.community_count and b < wk.community_count:
            flow = wk.pair_flow(a, b)
        steps.append(InterventionStep(
            i + 1, (a, b), flow, (snap.centers[a], snap.centers[b]), weight))
    center_of = {c: snap.centers[c] for a, b in pairs for c in (a, b)}
    return InterventionPlan(tuple(steps), center_of)


def _trajectory_payload(traj: MetricsTrajectory) -> List[dict]:
    return [
        {
            "step": p.step,
            "apl": p.metrics.avg_path_length,
            "avg_ecc": p.metrics.avg_eccentricity,
            "diameter": p.metrics.diameter,
            "delta_apl": p.delta_apl,
            "delta_ecc": p.delta_ecc,
            "delta_diam": p.delta_diam,
            "duplicates": [list(d) for d in p.duplicates],
        }
        for p in traj.points
    ]


def _flow_entry(snap: Snapshot, day_class: str) -> dict:
    fm = snap.matrices[day_class]
    entry = dict(snap.flow_summary["day_classes"].get(day_class, {}))
    entry.update({
        "day_class": day_class,
        "community_count": fm.community_count,
        "matrix": fm.counts.tolist(),
        "unassigned": fm.unassigned,
    })
    return entry


def create_app(workspace) -> FastAPI:
    snap = load_snapshot(workspace)
    app = FastAPI(title="transitnet planner API")

    @app.get("/api/graph/summary")
    def graph_summary() -> dict:
        return {"manifest_digest": snap.digest, **snap.metrics_doc}

    @app.get("/api/graph/geojson")
    def graph_geojson() -> dict:
        return {"manifest_digest": snap.digest, **snap.graph_geo}

    @app.get("/api/communities")
    def communities() -> dict:
        meta = snap.partition_doc
        return {
            "manifest_digest": snap.digest,
            "community_count": meta["community_count"],
            "modularity": meta["modularity"],
            "levels": meta["levels"],
            "seed": meta["seed"],
            "resolution": meta["resolution"],
            "centers": {str(c): nid for c, nid in sorted(snap.centers.items())},
            "stats": snap.community_stats,
            "geojson": snap.communities_geo,
        }

    @app.get("/api/flows")
    def flows(day_class: Optional[str] = None) -> dict:
        if day_class is not None:
            if day_class not in snap.matrices:
                raise HTTPException(404, f"no flows for day class "
                                         f"{day_class!r}")
            return {"manifest_digest": snap.digest,
                    **_flow_entry(snap, day_class)}
        return {
            "manifest_digest": snap.digest,
            "day_classes": {dc: _flow_entry(snap, dc)
                            for dc in sorted(snap.matrices)},
            "notes": snap.flow_summary["notes"],
        }

    @app.get("/api/interventions/plan")
    def plan() -> dict:
        if snap.plan_doc is None:
            raise HTTPException(404, "no committed intervention plan in "
                                     "this workspace")
        return {"manifest_digest": snap.digest, "plan": snap.plan_doc,
                "trajectory": snap.trajectory_rows}

    @app.post("/api/interventions/preview")
    def preview(req: PreviewRequest) -> dict:
        pairs = _validated_pairs(snap, req.pairs)
        plan = _preview_plan(snap, pairs)
        try:
            _, traj = apply_interventions(snap.giant, plan)
        except DataError as e:
            raise HTTPException(422, str(e))
        return {
            "manifest_digest": snap.digest,
            "steps": [
                {
                    "step": s.index,
                    "communities": list(s.communities),
                    "centers": list(s.centers),
                    "flow": s.flow,
                    "weight": s.weight,
                }
                for s in plan.steps
            ],
            "trajectory": _trajectory_payload(traj),
        }

    return app
