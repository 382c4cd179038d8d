import csv
import shutil

import pytest

from transitnet import cli
from transitnet.workspace import Workspace

def _copy_ws(pipeline_ws, tmp_path) -> str:
    dest = tmp_path / "workspace"
    shutil.copytree(pipeline_ws, dest)
    return str(dest)


def test_pipeline_produces_all_artifacts(pipeline_ws):
    ws = Workspace(pipeline_ws)
    for artifact in ("dataset", "odpairs", "graph", "partition", "flows"):
        ws.require(artifact)


def test_intervene_writes_monotone_trajectory(pipeline_ws, tmp_path):
    ws_path = _copy_ws(pipeline_ws, tmp_path)
    assert cli.main(["intervene", "--workspace", ws_path, "-k", "2"]) == 0
    ws = Workspace(ws_path)
    ws.require("trajectory")
    with open(ws.path("trajectory.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3  # baseline plus two links
    apl = [float(r["apl"]) for r in rows]
    ecc = [float(r["avg_ecc"]) for r in rows]
    diam = [int(r["diameter"]) for r in rows]
    assert all(b <= a for a, b in zip(apl, apl[1:]))
    assert all(b <= a for a, b in zip(ecc, ecc[1:]))
    assert all(b <= a for a, b in zip(diam, diam[1:]))


def test_intervene_before_communities_reports_missing(pipeline_ws, tmp_path,
                                                      capsys):
    ws_path = _copy_ws(pipeline_ws, tmp_path)
    ws = Workspace(ws_path)
    for f in ("communities.csv", "community_stats.csv",
              "communities.geojson", "partition.json"):
        ws.path(f).unlink()
    del ws._manifest["artifacts"]["partition"]
    ws._save_manifest()
    assert cli.main(["intervene", "--workspace", ws_path]) == 3
    assert "missing artifact: partition" in capsys.readouterr().err


def test_edited_input_aborts_until_forced(pipeline_ws, tmp_path, capsys):
    ws_path = _copy_ws(pipeline_ws, tmp_path)
    stops = Workspace(ws_path).path("stops.csv")
    with open(stops, newline="") as fh:
        header = next(csv.reader(fh))
    with open(stops, "a", newline="") as fh:
        row = {"stop_id": "Z9999", "lat": "-23.4", "lon": "-46.5",
               "is_terminal": "false"}
        csv.writer(fh).writerow([row[h] for h in header])
    assert cli.main(["odm", "--workspace", ws_path]) == 3
    assert "stale artifact: dataset" in capsys.readouterr().err
    assert cli.main(["odm", "--workspace", ws_path, "--force"]) == 0


def test_rerun_is_digest_idempotent(pipeline_ws, tmp_path):
    ws_path = _copy_ws(pipeline_ws, tmp_path)
    before = Workspace(ws_path).manifest_digest()
    assert cli.main(["odm", "--workspace", ws_path]) == 0
    assert cli.main(["flows", "--workspace", ws_path]) == 0
    assert Workspace(ws_path).manifest_digest() == before


def test_seed_override_changes_partition_digest(pipeline_ws, tmp_path):
    ws_path = _copy_ws(pipeline_ws, tmp_path)
    before = Workspace(ws_path).manifest_digest()
    assert cli.main(["communities", "--workspace", ws_path,
                     "--seed", "5"]) == 0
    after = Workspace(ws_path)
    assert after.manifest_digest() != before
    meta_inputs = after._manifest["artifacts"]["partition"]["inputs"]
    assert "config" in meta_inputs


def test_bad_config_exits_two(pipeline_ws, tmp_path, capsys):
    ws_path = _copy_ws(pipeline_ws, tmp_path)
    bad = tmp_path / "bad.cfg"
    bad.write_text("no_such_knob = 1\n")
    assert cli.main(["odm", "--workspace", ws_path,
                     "--config", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err


def test_validate_sample_outputs(pipeline_ws, tmp_path):
    ws_path = _copy_ws(pipeline_ws, tmp_path)
    assert cli.main(["validate-sample", "--workspace", ws_path]) == 0
    ws = Workspace(ws_path)
    ws.require("sample_validation")
    with open(ws.path("regression.csv"), newline="") as fh:
        row = next(csv.DictReader(fh))
    assert 0.0 < float(row["exponent"]) < 2.0
    assert 0.0 < float(row["r2"]) <= 1.0
    assert float(row["bandwidth"]) > 0
    with open(ws.path("curve.csv"), newline="") as fh:
        curve = list(csv.DictReader(fh))
    assert len(curve) == 100
    grid = [float(r["grid"]) for r in curve]
    assert grid == sorted(grid)


def test_report_collects_sections(pipeline_ws, tmp_path):
    ws_path = _copy_ws(pipeline_ws, tmp_path)
    assert cli.main(["intervene", "--workspace", ws_path, "-k", "2"]) == 0
    assert cli.main(["report", "--workspace", ws_path]) == 0
    text = Workspace(ws_path).path("report.md").read_text()
    for heading in ("## Supply graph", "## Communities", "## Flows",
                    "## Express-link interventions"):
        assert heading in text


def test_ingest_roundtrips_a_bundle(pipeline_ws, tmp_path):
    # the synthetic workspace doubles as a raw data directory
    ws_path = str(tmp_path / "ingested")
    assert cli.main(["ingest", "--workspace", ws_path,
                     "--data", pipeline_ws]) == 0
    ws = Workspace(ws_path)
    ws.require("dataset")
    with open(ws.path("stops.csv"), newline="") as fh:
        n = sum(1 for _ in fh) - 1
    assert n == 120
