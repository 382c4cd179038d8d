import json

import pytest

from transitnet.errors import ConfigError, MissingArtifactError
from transitnet.netcore import SupplyGraph
from transitnet.records import Stop
from transitnet.workspace import (
    CONFIG_SECTIONS,
    PipelineConfig,
    Workspace,
    communities_geojson,
    graph_geojson,
)


# ----------------------------------------------------------------- config

def test_config_defaults_validate():
    PipelineConfig().validate()


def test_config_from_file(tmp_path):
    f = tmp_path / "pipeline.cfg"
    f.write_text(
        "# tighter day filter\n"
        "day_filter_low = 0.6\n"
        "louvain_seed = 3\n"
        "intervention_k = 2   # fewer links\n"
        "\n"
    )
    cfg = PipelineConfig.from_file(f)
    assert cfg.day_filter_low == 0.6
    assert cfg.louvain_seed == 3
    assert isinstance(cfg.louvain_seed, int)
    assert cfg.intervention_k == 2
    # untouched keys keep their defaults
    assert cfg.max_gap_s == 120.0


@pytest.mark.parametrize("text", [
    "no_such_knob = 1\n",
    "day_filter_low\n",
    "max_gap_s = banana\n",
    "day_filter_low = 3.0\nday_filter_high = 2.0\n",
    "bootstrap_resamples = 10\n",
    "intervention_k = 0\n",
])
def test_config_rejects_bad_files(tmp_path, text):
    f = tmp_path / "bad.cfg"
    f.write_text(text)
    with pytest.raises(ConfigError):
        PipelineConfig.from_file(f)


def test_config_sections_are_scoped():
    cfg = PipelineConfig()
    part = cfg.section(*CONFIG_SECTIONS["partition"])
    assert part == {"louvain_seed": 0, "resolution": 1.0}
    # every section key must be a real config field
    for keys in CONFIG_SECTIONS.values():
        for k in keys:
            assert hasattr(cfg, k)


# --------------------------------------------------------------- manifest

def _seed_dataset(ws: Workspace, salt: str = "") -> None:
    for name in ("stops.csv", "routes.csv", "terminals.csv", "pings.csv",
                 "validations.csv"):
        ws.path(name).write_text(f"{name}{salt}\n")
    ws.record("dataset")


def _seed_odpairs(ws: Workspace) -> None:
    for name in ("odpairs.csv", "diagnostics.csv", "day_report.csv"):
        ws.path(name).write_text(f"{name}\n")
    ws.record("odpairs", PipelineConfig())


def test_record_then_require(tmp_path):
    ws = Workspace(tmp_path / "w")
    _seed_dataset(ws)
    ws.require("dataset")
    assert ws.has("dataset")


def test_require_missing_artifact(tmp_path):
    ws = Workspace(tmp_path / "w")
    with pytest.raises(MissingArtifactError, match="missing artifact: partition"):
        ws.require("partition")


def test_require_detects_edited_file(tmp_path):
    ws = Workspace(tmp_path / "w")
    _seed_dataset(ws)
    ws.path("stops.csv").write_text("edited afterwards\n")
    with pytest.raises(MissingArtifactError, match="stale artifact: dataset"):
        ws.require("dataset")
    # --force waives the check
    ws.require("dataset", force=True)


def test_require_detects_stale_input(tmp_path):
    ws = Workspace(tmp_path / "w")
    _seed_dataset(ws)
    _seed_odpairs(ws)
    ws.require("odpairs")
    ws.path("stops.csv").write_text("rebuilt dataset\n")
    with pytest.raises(MissingArtifactError,
                       match=r"stale artifact: odpairs \(input dataset"):
        ws.require("odpairs")


def test_require_missing_file_counts_as_missing(tmp_path):
    ws = Workspace(tmp_path / "w")
    _seed_dataset(ws)
    ws.path("pings.csv").unlink()
    with pytest.raises(MissingArtifactError, match="missing artifact: dataset"):
        ws.require("dataset")


def test_record_requires_files_on_disk(tmp_path):
    ws = Workspace(tmp_path / "w")
    with pytest.raises(MissingArtifactError, match="expected file"):
        ws.record("dataset")


def test_manifest_digest_ignores_timestamps(tmp_path):
    ws = Workspace(tmp_path / "w")
    _seed_dataset(ws)
    d1 = ws.manifest_digest()
    created1 = ws._manifest["artifacts"]["dataset"]["created"]
    ws.record("dataset")  # identical bytes, later timestamp
    assert ws._manifest["artifacts"]["dataset"]["created"] >= created1
    assert ws.manifest_digest() == d1


def test_manifest_digest_tracks_content_and_config(tmp_path):
    ws = Workspace(tmp_path / "w")
    _seed_dataset(ws)
    _seed_odpairs(ws)
    d1 = ws.manifest_digest()
    # same odpairs bytes, different relevant config -> different digest
    ws.record("odpairs", PipelineConfig(max_gap_s=90.0))
    d2 = ws.manifest_digest()
    assert d2 != d1
    # config outside the odpairs section leaves the digest alone
    ws.record("odpairs", PipelineConfig(max_gap_s=90.0, louvain_seed=11))
    assert ws.manifest_digest() == d2


def test_manifest_survives_reload(tmp_path):
    ws = Workspace(tmp_path / "w")
    _seed_dataset(ws)
    again = Workspace(tmp_path / "w")
    assert again.has("dataset")
    assert again.manifest_digest() == ws.manifest_digest()


def test_corrupt_manifest_is_config_error(tmp_path):
    root = tmp_path / "w"
    root.mkdir()
    (root / "manifest.json").write_text("{not json")
    with pytest.raises(ConfigError, match="unreadable manifest"):
        Workspace(root)


# ---------------------------------------------------------------- geojson

def _two_stop_graph():
    stops = {
        "s1": Stop("s1", -23.50, -46.60),
        "s2": Stop("s2", -23.51, -46.61),
    }
    g = SupplyGraph.from_weighted_edges(["s1", "s2"], {(0, 1): 4.0})
    return g, stops


def test_graph_geojson_shapes():
    g, stops = _two_stop_graph()
    doc = graph_geojson(g, stops, giant_ids={"s1", "s2"})
    assert doc["type"] == "FeatureCollection"
    points = [f for f in doc["features"]
              if f["geometry"]["type"] == "Point"]
    lines = [f for f in doc["features"]
             if f["geometry"]["type"] == "LineString"]
    assert len(points) == 2 and len(lines) == 1
    assert all(p["properties"]["in_giant"] for p in points)
    edge = lines[0]["properties"]
    assert (edge["src"], edge["dst"], edge["weight"]) == ("s1", "s2", 4.0)
    assert lines[0]["geometry"]["coordinates"] == [[-46.60, -23.50],
                                                   [-46.61, -23.51]]
    # must be serializable as-is
    json.dumps(doc)


def test_communities_geojson_marks_centers():
    _, stops = _two_stop_graph()
    doc = communities_geojson(stops, {"s1": 0, "s2": 1}, centers={1: "s2"})
    by_id = {f["properties"]["stop_id"]: f["properties"]
             for f in doc["features"]}
    assert by_id["s1"]["community"] == 0 and not by_id["s1"]["is_center"]
    assert by_id["s2"]["community"] == 1 and by_id["s2"]["is_center"]
    json.dumps(doc)
