"""Command-line pipeline driver.

Subcommands build one artifact each inside a workspace directory:

    ingest | synth -> odm -> graph -> communities -> flows -> intervene

plus validate-sample (sampling-bias statistics), report (summary document),
and serve (HTTP API for the planner UI). Exit codes: 0 ok, 2 bad config,
3 missing or stale artifact, 4 bad data.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from . import communities as communities_mod
from . import flows as flows_mod
from . import intervene as intervene_mod
from . import stats as stats_mod
from .errors import ConfigError, DataError, MissingArtifactError
from .ingest import (
    filter_anomalous_days,
    load_bundle,
    load_holidays,
    load_stops,
    write_day_reports,
    write_pings,
    write_routes,
    write_stops,
    write_terminals,
    write_validations,
)
from .netcore import (
    SupplyGraph,
    average_route_weights,
    build_supply_graph,
    daily_route_supplies,
    giant_component,
    graph_metrics,
    load_edges,
    write_edges,
)
from .odm import (
    OdmConfig,
    build_odm_for_dataset,
    load_odpairs,
    stop_boarding_counts,
    write_diagnostics,
    write_odpairs,
)
from .records import Dataset
from .synth import SynthConfig, generate_synthetic_city, write_bundle
from .workspace import (
    PipelineConfig,
    Workspace,
    communities_geojson,
    graph_geojson,
    load_json,
    write_json,
)


def _config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return PipelineConfig.from_file(args.config)
    return PipelineConfig()


def _load_dataset(ws: Workspace, force: bool = False) -> Dataset:
    ws.require("dataset", force)
    holidays = ws.path("holidays.txt")
    ds, _ = load_bundle(ws.root,
                        holidays_path=holidays if holidays.exists() else None)
    return ds


def _odm_config(cfg: PipelineConfig) -> OdmConfig:
    return OdmConfig(max_gap_s=cfg.max_gap_s,
                     snap_radius_m=cfg.snap_radius_m,
                     recurrence_min_days=cfg.recurrence_min_days,
                     recurrence_fraction=cfg.recurrence_fraction)


def _filtered_dataset(ds: Dataset, cfg: PipelineConfig):
    kept, reports = filter_anomalous_days(ds.validations, cfg.day_filter_low,
                                          cfg.day_filter_high, ds.holidays)
    return Dataset(ds.stops, ds.routes, ds.terminals, ds.pings, kept,
                   ds.holidays), reports


def _metric_mode(args) -> Optional[str]:
    if getattr(args, "exact", False):
        return "exact"
    if getattr(args, "sampled", False):
        return "sampled"
    return None


def _load_giant(ws: Workspace) -> SupplyGraph:
    giant, _ = giant_component(load_edges(ws.path("edges.csv")))
    return giant


def _load_partition(ws: Workspace) -> communities_mod.Partition:
    assignment = communities_mod.load_communities(ws.path("communities.csv"))
    meta = load_json(ws.path("partition.json"))
    return communities_mod.Partition(assignment, meta["modularity"],
                                     meta["levels"])


# ------------------------------------------------------------- subcommands

def cmd_ingest(args) -> int:
    ws = Workspace(args.workspace)
    data_dir = Path(args.data)
    holidays = data_dir / "holidays.txt"
    ds, results = load_bundle(data_dir,
                              holidays_path=holidays if holidays.exists() else None)
    write_stops(ds.stops.values(), ws.path("stops.csv"))
    write_routes(ds.routes.values(), ws.path("routes.csv"))
    write_terminals(ds.terminals.values(), ws.path("terminals.csv"))
    write_pings(ds.pings, ws.path("pings.csv"))
    write_validations(ds.validations, ws.path("validations.csv"))
    extra = []
    if holidays.exists():
        ws.path("holidays.txt").write_text(holidays.read_text())
        extra.append("holidays.txt")
    ws.record("dataset", extra_files=extra)
    rejected = sum(len(r.rejects) for r in results.values())
    print(f"ingested {len(ds.stops)} stops, {len(ds.routes)} routes, "
          f"{len(ds.pings)} pings, {len(ds.validations)} validations "
          f"({rejected} rows rejected)")
    return 0


def cmd_synth(args) -> int:
    ws = Workspace(args.workspace)
    cfg = SynthConfig.from_file(args.config) if args.config else SynthConfig()
    bundle = generate_synthetic_city(cfg, seed=args.seed)
    write_bundle(bundle, ws.root)
    ws.record("dataset", extra_files=["ground_truth.csv",
                                      "ground_truth_communities.csv"])
    print(f"synthesized city: {len(bundle.stops)} stops, "
          f"{len(bundle.routes)} routes, {len(bundle.validations)} "
          f"validations over {cfg.days} days (seed {args.seed})")
    return 0


def cmd_odm(args) -> int:
    ws = Workspace(args.workspace)
    cfg = _config(args)
    ds = _load_dataset(ws, args.force)
    filtered, day_reports = _filtered_dataset(ds, cfg)
    pairs, diag = build_odm_for_dataset(filtered, _odm_config(cfg))
    write_odpairs(ws.path("odpairs.csv"), pairs)
    write_diagnostics(ws.path("diagnostics.csv"), diag)
    write_day_reports(day_reports, ws.path("day_report.csv"))
    ws.record("odpairs", cfg)
    dropped_days = sum(1 for r in day_reports if not r.kept)
    print(f"chained {len(pairs)} OD pairs "
          f"({diag.outcomes['chained']} user-days chained, "
          f"{dropped_days} anomalous days dropped)")
    return 0


def cmd_validate_sample(args) -> int:
    ws = Workspace(args.workspace)
    cfg = _config(args)
    ws.require("odpairs", args.force)
    ds = _load_dataset(ws, args.force)
    filtered, _ = _filtered_dataset(ds, cfg)
    totals = stop_boarding_counts(filtered, _odm_config(cfg))
    pairs = load_odpairs(ws.path("odpairs.csv"))
    sampled: Dict[str, int] = {}
    for p in pairs:
        sampled[p.origin_stop_id] = sampled.get(p.origin_stop_id, 0) + 1
    both = sorted(sid for sid in totals if sampled.get(sid, 0) > 0)
    excluded = len(totals) - len(both)
    if len(both) < 5:
        raise DataError("too few stops with sampled boardings to validate")
    x = np.array([float(totals[s]) for s in both])
    y = np.array([float(sampled[s]) for s in both])
    try:
        fit = stats_mod.fit_power_law(x, y)
        grid = np.geomspace(x.min(), x.max(), cfg.grid_size)
        h = stats_mod.select_bandwidth(x, y, cfg.bandwidth_count)
        lo, est, hi = stats_mod.bootstrap_band(
            x, y, grid, h, n_boot=cfg.bootstrap_resamples,
            seed=cfg.stats_seed)
    except ValueError as e:
        raise DataError(f"sample validation failed: {e}")
    with open(ws.path("regression.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["exponent", "prefactor", "r2", "exponent_stderr",
                    "bandwidth", "resamples", "seed", "stops_used",
                    "stops_excluded"])
        w.writerow([str(fit.exponent), str(fit.prefactor), str(fit.r2),
                    str(fit.exponent_stderr), str(h),
                    cfg.bootstrap_resamples, cfg.stats_seed, len(both),
                    excluded])
    with open(ws.path("curve.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grid", "smoothed", "ci_low", "ci_high"])
        for gx, m, a, b in zip(grid, est, lo, hi):
            w.writerow([str(gx), str(m), str(a), str(b)])
    ws.record("sample_validation", cfg)
    print(f"sampling fit over {len(both)} stops: exponent "
          f"{fit.exponent:.4f} (stderr {fit.exponent_stderr:.4f}), "
          f"r2 {fit.r2:.4f}, bandwidth {h:.3g}")
    return 0


def cmd_graph(args) -> int:
    ws = Workspace(args.workspace)
    cfg = _config(args)
    ds = _load_dataset(ws, args.force)
    daily = daily_route_supplies(ds.routes, ds.pings, ds.stops,
                                 cfg.completion_radius_m)
    weights = average_route_weights(daily)
    g = build_supply_graph(ds.routes, weights, ds.stops)
    giant, comp = giant_component(g)
    metrics = graph_metrics(giant, exact_threshold=cfg.exact_node_threshold,
                            sample_count=cfg.sample_source_count,
                            seed=cfg.metrics_seed, mode=_metric_mode(args))
    write_edges(ws.path("edges.csv"), g)
    giant_ids = set(giant.node_ids)
    write_json(ws.path("graph.geojson"), graph_geojson(g, ds.stops, giant_ids))
    write_json(ws.path("metrics.json"), {
        "node_count": g.n,
        "edge_count": g.edge_count,
        "total_weight": float(g.edge_arrays()[2].sum()),
        "component_count": comp.component_count,
        "giant_size": comp.giant_size,
        "coverage": comp.coverage,
        "giant_metrics": metrics.as_dict(),
    })
    ws.record("graph", cfg)
    print(f"supply graph: {g.n} nodes, {g.edge_count} edges; giant component "
          f"{comp.giant_size} nodes ({comp.coverage:.1%}); "
          f"apl {metrics.avg_path_length:.2f}, avg ecc "
          f"{metrics.avg_eccentricity:.2f}, diameter {metrics.diameter}")
    return 0


def cmd_communities(args) -> int:
    ws = Workspace(args.workspace)
    cfg = _config(args)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, louvain_seed=args.seed)
    ws.require("graph", args.force)
    ws.require("dataset", args.force)
    giant = _load_giant(ws)
    part = communities_mod.louvain(giant, seed=cfg.louvain_seed,
                                   resolution=cfg.resolution)
    q_check = communities_mod.modularity(giant, part.assignment,
                                         cfg.resolution)
    if abs(part.modularity - q_check) > 1e-9:
        raise DataError(
            f"modularity bookkeeping mismatch: optimizer reported "
            f"{part.modularity!r}, independent evaluation {q_check!r}")
    rows = communities_mod.community_stats(giant, part)
    communities_mod.write_communities(ws.path("communities.csv"), part)
    communities_mod.write_community_stats(ws.path("community_stats.csv"), rows)
    stops = load_stops(ws.path("stops.csv")).records
    write_json(ws.path("communities.geojson"),
               communities_geojson(stops, part.assignment))
    write_json(ws.path("partition.json"), {
        "community_count": part.community_count,
        "modularity": part.modularity,
        "modularity_independent": q_check,
        "levels": part.levels,
        "seed": cfg.louvain_seed,
        "resolution": cfg.resolution,
        "sizes": {str(c): len(ids) for c, ids in part.members().items()},
    })
    ws.record("partition", cfg)
    print(f"{part.community_count} communities on {giant.n} nodes, "
          f"modularity {part.modularity:.4f} "
          f"(independent check {q_check:.4f}, seed {cfg.louvain_seed})")
    return 0


def cmd_flows(args) -> int:
    ws = Workspace(args.workspace)
    cfg = _config(args)
    ws.require("odpairs", args.force)
    ws.require("partition", args.force)
    pairs = load_odpairs(ws.path("odpairs.csv"))
    assignment = communities_mod.load_communities(ws.path("communities.csv"))
    holidays_file = ws.path("holidays.txt")
    holidays = load_holidays(holidays_file) if holidays_file.exists() \
        else frozenset()
    matrices = flows_mod.build_flow_matrices(pairs, assignment, holidays)
    summary = flows_mod.flow_summary(matrices)
    flows_mod.write_flow_matrices(ws.path("flows.csv"), matrices)
    write_json(ws.path("flow_summary.json"), summary)
    ws.record("flows", cfg)
    lines = []
    for dc, entry in summary["day_classes"].items():
        pct = entry.get("pct_inter")
        pct_txt = f"{pct:.1f}% inter" if pct is not None else "all unassigned"
        lines.append(f"{dc}: {entry['od_pairs']} pairs, {pct_txt}")
    print("flows by day class -> " + "; ".join(lines))
    return 0


def cmd_intervene(args) -> int:
    ws = Workspace(args.workspace)
    cfg = _config(args)
    if args.k is not None:
        cfg = dataclasses.replace(cfg, intervention_k=args.k)
    ws.require("graph", args.force)
    ws.require("partition", args.force)
    ws.require("flows", args.force)
    giant = _load_giant(ws)
    part = _load_partition(ws)
    matrices = flows_mod.load_flow_matrices(ws.path("flows.csv"))
    weight = cfg.express_weight if cfg.express_weight > 0 else None
    plan = intervene_mod.plan_interventions(giant, matrices, part,
                                            cfg.intervention_k, weight)
    _, traj = intervene_mod.apply_interventions(giant, plan,
                                                mode=_metric_mode(args),
                                                seed=cfg.metrics_seed)
    intervene_mod.write_plan(ws.path("plan.json"), plan)
    intervene_mod.write_trajectory(ws.path("trajectory.csv"), traj)
    ws.record("trajectory", cfg)
    base = traj.points[0].metrics
    last = traj.points[-1].metrics
    print(f"{len(plan.steps)} express links: apl "
          f"{base.avg_path_length:.2f} -> {last.avg_path_length:.2f}, "
          f"avg ecc {base.avg_eccentricity:.2f} -> "
          f"{last.avg_eccentricity:.2f}, diameter {base.diameter} -> "
          f"{last.diameter}")
    return 0


def cmd_report(args) -> int:
    ws = Workspace(args.workspace)
    sections = ["# Transit network analysis", ""]

    def have(name: str) -> bool:
        return ws.has(name)

    if have("dataset"):
        stops = load_stops(ws.path("stops.csv")).records
        sections += ["## Dataset", "", f"- stops: {len(stops)}", ""]
    if have("odpairs"):
        pairs = load_odpairs(ws.path("odpairs.csv"))
        days = len({p.day for p in pairs})
        sections += ["## OD pairs", "",
                     f"- pairs: {len(pairs)} over {days} days", ""]
    if have("graph"):
        m = load_json(ws.path("metrics.json"))
        gm = m["giant_metrics"]
        sections += [
            "## Supply graph", "",
            f"- nodes: {m['node_count']}, edges: {m['edge_count']}",
            f"- giant component: {m['giant_size']} nodes "
            f"({100 * m['coverage']:.1f}% coverage, "
            f"{m['component_count']} components)",
            f"- average path length: {gm['avg_path_length']:.2f} hops"
            + (" (sampled)" if gm["sampled"] else ""),
            f"- average eccentricity: {gm['avg_eccentricity']:.2f} hops",
            f"- diameter: {gm['diameter']} hops", "",
        ]
    if have("partition"):
        meta = load_json(ws.path("partition.json"))
        sections += ["## Communities", "",
                     f"- count: {meta['community_count']}, modularity "
                     f"{meta['modularity']:.4f} (levels {meta['levels']})",
                     ""]
        with open(ws.path("community_stats.csv"), newline="") as fh:
            rows = list(csv.DictReader(fh))
        sections.append("| community | stops | diameter | normalized "
                        "diameter | density | clustering |")
        sections.append("|---|---|---|---|---|---|")
        for r in rows:
            sections.append(
                f"| {r['community_id']} | {r['node_count']} "
                f"| {r['diameter']} | {float(r['normalized_diameter']):.3f} "
                f"| {float(r['density']):.4f} "
                f"| {float(r['avg_clustering']):.4f} |")
        sections.append("")
    if have("flows"):
        summary = load_json(ws.path("flow_summary.json"))
        sections += ["## Flows", ""]
        for dc, entry in summary["day_classes"].items():
            pct = entry.get("pct_inter")
            pct_txt = (f"{pct:.1f}% inter-community"
                       if pct is not None else "all unassigned")
            sections.append(f"- {dc}: {entry['od_pairs']} OD pairs, {pct_txt} "
                            f"({entry['unassigned']} unassigned)")
        for note in summary["notes"]:
            sections.append(f"- note: {note}")
        sections.append("")
    if have("sample_validation"):
        with open(ws.path("regression.csv"), newline="") as fh:
            row = next(csv.DictReader(fh))
        sections += ["## Sampling validation", "",
                     f"- power-law exponent {float(row['exponent']):.4f} "
                     f"(stderr {float(row['exponent_stderr']):.4f}), "
                     f"r2 {float(row['r2']):.4f}",
                     f"- kernel bandwidth {float(row['bandwidth']):.4g} over "
                     f"{row['stops_used']} stops", ""]
    if have("trajectory"):
        rows = intervene_mod.load_trajectory(ws.path("trajectory.csv"))
        sections += ["## Express-link interventions", "",
                     "| step | apl | avg ecc | diameter |", "|---|---|---|---|"]
        for r in rows:
            sections.append(f"| {r['step']} | {r['apl']:.3f} "
                            f"| {r['avg_ecc']:.3f} | {r['diameter']} |")
        drops = [r["delta_apl"] for r in rows[1:]]
        if drops:
            best = 1 + int(np.argmin(drops))
            sections.append("")
            sections.append(f"Largest single-step path-length drop: "
                            f"step {best}.")
        sections.append("")
    text = "\n".join(sections)
    ws.path("report.md").write_text(text)
    ws.record("report")
    print(f"report written to {ws.path('report.md')} "
          f"({len(text.splitlines())} lines)")
    return 0


def cmd_serve(args) -> int:
    ws = Workspace(args.workspace)
    for artifact in ("graph", "partition", "flows"):
        ws.require(artifact, args.force)
    import uvicorn

    from .service import create_app
    app = create_app(args.workspace)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except OSError as e:
        raise ConfigError(f"cannot bind {args.host}:{args.port}: {e}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transitnet",
        description="bus OD-matrix and supply-network analysis pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        p.add_argument("--workspace", default="workspace",
                       help="analysis directory (default: ./workspace)")
        p.add_argument("--force", action="store_true",
                       help="ignore stale-artifact checks")
        if config:
            p.add_argument("--config", help="pipeline config file (key = value)")

    p = sub.add_parser("ingest", help="validate and normalize a dataset")
    common(p, config=False)
    p.add_argument("--data", required=True, help="directory with input CSVs")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", help="generate a synthetic city dataset")
    common(p, config=False)
    p.add_argument("--config", help="synth config file (key = value)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("odm", help="reconstruct OD pairs from validations")
    common(p)
    p.set_defaults(func=cmd_odm)

    p = sub.add_parser("validate-sample",
                       help="power-law and kernel check of sampling bias")
    common(p)
    p.set_defaults(func=cmd_validate_sample)

    p = sub.add_parser("graph", help="build the supply graph and metrics")
    common(p)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true",
                      help="force exact metrics")
    mode.add_argument("--sampled", action="store_true",
                      help="force sampled metrics")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("communities", help="detect communities on the giant "
                                           "component")
    common(p)
    p.add_argument("--seed", type=int, default=None,
                   help="override the partition seed")
    p.set_defaults(func=cmd_communities)

    p = sub.add_parser("flows", help="aggregate OD pairs into community flows")
    common(p)
    p.set_defaults(func=cmd_flows)

    p = sub.add_parser("intervene", help="simulate express links between "
                                         "community centers")
    common(p)
    p.add_argument("-k", type=int, default=None,
                   help="number of express links (default from config)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--sampled", action="store_true")
    p.set_defaults(func=cmd_intervene)

    p = sub.add_parser("report", help="write a human-readable summary")
    common(p, config=False)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="serve the planner HTTP API")
    common(p, config=False)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MissingArtifactError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
