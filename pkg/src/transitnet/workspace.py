"""Workspace directories, artifact manifests, and pipeline configuration.

One directory holds one analysis: the normalized dataset, every derived
artifact, and a manifest recording content digests. Each artifact remembers
the digests of the inputs it was built from, so editing an upstream file
(or rebuilding an upstream artifact) marks everything downstream stale.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from .errors import ConfigError, MissingArtifactError

MANIFEST_NAME = "manifest.json"

# artifact name -> (files, upstream artifact names)
ARTIFACTS: Dict[str, Dict] = {
    "dataset": {
        "files": ["stops.csv", "routes.csv", "terminals.csv", "pings.csv",
                  "validations.csv"],
        "inputs": [],
    },
    "odpairs": {
        "files": ["odpairs.csv", "diagnostics.csv", "day_report.csv"],
        "inputs": ["dataset"],
    },
    "sample_validation": {
        "files": ["regression.csv", "curve.csv"],
        "inputs": ["dataset", "odpairs"],
    },
    "graph": {
        "files": ["edges.csv", "graph.geojson", "metrics.json"],
        "inputs": ["dataset"],
    },
    "partition": {
        "files": ["communities.csv", "community_stats.csv",
                  "communities.geojson", "partition.json"],
        "inputs": ["graph", "dataset"],
    },
    "flows": {
        "files": ["flows.csv", "flow_summary.json"],
        "inputs": ["odpairs", "partition"],
    },
    "trajectory": {
        "files": ["plan.json", "trajectory.csv"],
        "inputs": ["graph", "partition", "flows"],
    },
    "report": {
        "files": ["report.md"],
        "inputs": [],
    },
}


@dataclass(frozen=True)
class PipelineConfig:
    """Tunables for every pipeline stage, in one flat record."""

    # anomalous-day filter (relative to the day-class median)
    day_filter_low: float = 0.5
    day_filter_high: float = 2.0
    # OD reconstruction
    max_gap_s: float = 120.0
    snap_radius_m: float = 300.0
    recurrence_min_days: int = 2
    recurrence_fraction: float = 0.5
    # supply graph and metrics
    completion_radius_m: float = 300.0
    exact_node_threshold: int = 20000
    sample_source_count: int = 1000
    metrics_seed: int = 0
    # community detection
    louvain_seed: int = 0
    resolution: float = 1.0
    # sample validation statistics
    bootstrap_resamples: int = 500
    stats_seed: int = 0
    grid_size: int = 100
    bandwidth_count: int = 30
    # interventions
    intervention_k: int = 5
    express_weight: float = 0.0        # 0 means "heaviest existing edge"

    def validate(self) -> None:
        positive = ["day_filter_low", "day_filter_high", "max_gap_s",
                    "snap_radius_m", "recurrence_fraction",
                    "completion_radius_m", "resolution"]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.day_filter_low >= self.day_filter_high:
            raise ConfigError("day_filter_low must be below day_filter_high")
        at_least = {"recurrence_min_days": 1, "exact_node_threshold": 1,
                    "sample_source_count": 1, "bootstrap_resamples": 100,
                    "grid_size": 2, "bandwidth_count": 2, "intervention_k": 1}
        for name, floor in at_least.items():
            if getattr(self, name) < floor:
                raise ConfigError(f"{name} must be >= {floor}")
        if self.express_weight < 0:
            raise ConfigError("express_weight must be >= 0")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
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
                raise ConfigError(f"unknown config key: {key!r}")
            caster = int if by_name[key].type == "int" else float
            try:
                kwargs[key] = caster(val)
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {e}")
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def section(self, *names: str) -> Dict[str, object]:
        return {n: getattr(self, n) for n in sorted(names)}


# digest-relevant config keys per artifact
CONFIG_SECTIONS: Dict[str, Sequence[str]] = {
    "odpairs": ("day_filter_low", "day_filter_high", "max_gap_s",
                "snap_radius_m", "recurrence_min_days", "recurrence_fraction"),
    "sample_validation": ("bootstrap_resamples", "stats_seed", "grid_size",
                          "bandwidth_count", "day_filter_low",
                          "day_filter_high", "max_gap_s", "snap_radius_m"),
    "graph": ("completion_radius_m", "exact_node_threshold",
              "sample_source_count", "metrics_seed"),
    "partition": ("louvain_seed", "resolution"),
    "flows": (),
    "trajectory": ("intervention_k", "express_weight", "exact_node_threshold",
                   "sample_source_count", "metrics_seed"),
}


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


class Workspace:
    """An analysis directory plus its manifest of artifact digests."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._manifest = self._load_manifest()

    # ------------------------------------------------------------ manifest

    def _load_manifest(self) -> Dict:
        path = self.root / MANIFEST_NAME
        if not path.exists():
            return {"artifacts": {}}
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"unreadable manifest at {path}: {e}")
        data.setdefault("artifacts", {})
        return data

    def _save_manifest(self) -> None:
        path = self.root / MANIFEST_NAME
        path.write_text(json.dumps(self._manifest, indent=2, sort_keys=True)
                        + "\n")

    def path(self, filename: str) -> Path:
        return self.root / filename

    def manifest_digest(self) -> str:
        """Content digest of the whole workspace; timestamps excluded."""
        essence = {
            name: {"files": entry["files"], "inputs": entry["inputs"]}
            for name, entry in sorted(self._manifest["artifacts"].items())
        }
        return _sha256_text(json.dumps(essence, sort_keys=True))

    # ------------------------------------------------------------ queries

    def has(self, artifact: str) -> bool:
        entry = self._manifest["artifacts"].get(artifact)
        if entry is None:
            return False
        return all((self.root / f).exists() for f in entry["files"])

    def current_digest(self, artifact: str) -> str:
        """Combined digest of the artifact's files as they sit on disk."""
        entry = self._manifest["artifacts"].get(artifact)
        if entry is None:
            raise MissingArtifactError(f"missing artifact: {artifact}")
        parts = []
        for f in sorted(entry["files"]):
            p = self.root / f
            if not p.exists():
                raise MissingArtifactError(f"missing artifact: {artifact}")
            parts.append(f"{f}:{_sha256_file(p)}")
        return _sha256_text("\n".join(parts))

    def require(self, artifact: str, force: bool = False) -> None:
        """Assert an input artifact is present and fresh, transitively."""
        if not self.has(artifact):
            raise MissingArtifactError(f"missing artifact: {artifact}")
        if force:
            return
        entry = self._manifest["artifacts"][artifact]
        for f, digest in entry["files"].items():
            if _sha256_file(self.root / f) != digest:
                raise MissingArtifactError(
                    f"stale artifact: {artifact} ({f} changed on disk; "
                    "rebuild it or pass --force)")
        for inp, digest in entry["inputs"].items():
            if inp == "config":
                continue
            if self.current_digest(inp) != digest:
                raise MissingArtifactError(
                    f"stale artifact: {artifact} (input {inp} changed; "
                    "rebuild it or pass --force)")
            self.require(inp, force)

    # ------------------------------------------------------------ recording

    def record(self, artifact: str, config: Optional[PipelineConfig] = None,
               extra_files: Iterable[str] = ()) -> None:
        """Register an artifact after its files have been written."""
        spec = ARTIFACTS[artifact]
        files = list(spec["files"]) + list(extra_files)
        file_digests = {}
        for f in files:
            p = self.root / f
            if not p.exists():
                raise MissingArtifactError(
                    f"missing artifact: {artifact} (expected file {f})")
            file_digests[f] = _sha256_file(p)
        inputs = {inp: self.current_digest(inp) for inp in spec["inputs"]}
        if config is not None and artifact in CONFIG_SECTIONS:
            section = config.section(*CONFIG_SECTIONS[artifact])
            inputs["config"] = _sha256_text(json.dumps(section, sort_keys=True))
        self._manifest["artifacts"][artifact] = {
            "files": file_digests,
            "inputs": inputs,
            "created": datetime.now(timezone.utc).isoformat(),
        }
        self._save_manifest()


# ------------------------------------------------------------- geo exports

def graph_geojson(g, stops: Dict[str, object],
                  giant_ids: Optional[set] = None) -> dict:
    """Stops as points, supply edges as line segments."""
    features = []
    for nid in g.node_ids:
        s = stops[nid]
        props = {"stop_id": nid, "kind": "stop"}
        if giant_ids is not None:
            props["in_giant"] = nid in giant_ids
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [s.lon, s.lat]},
            "properties": props,
        })
    src, dst, wts = g.edge_arrays()
    for u, v, w in zip(src.tolist(), dst.tolist(), wts.tolist()):
        a, b = stops[g.node_ids[u]], stops[g.node_ids[v]]
        features.append({
            "type": "Feature",
            "geometry": {"type": "LineString",
                         "coordinates": [[a.lon, a.lat], [b.lon, b.lat]]},
            "properties": {"kind": "edge", "src": g.node_ids[u],
                           "dst": g.node_ids[v], "weight": w},
        })
    return {"type": "FeatureCollection", "features": features}


def communities_geojson(stops: Dict[str, object], assignment: Dict[str, int],
                        centers: Optional[Dict[int, str]] = None) -> dict:
    """Community-colored stop overlay for the planner map."""
    centers = centers or {}
    center_ids = set(centers.values())
    features = []
    for nid in sorted(assignment):
        s = stops[nid]
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [s.lon, s.lat]},
            "properties": {"stop_id": nid, "community": assignment[nid],
                           "is_center": nid in center_ids},
        })
    return {"type": "FeatureCollection", "features": features}


def write_json(path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
