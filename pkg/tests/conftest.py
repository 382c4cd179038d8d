import pytest

from transitnet.synth import SynthConfig, generate_synthetic_city, write_bundle


SMALL_CFG = dict(stops=200, communities=4, routes=28, trunk_routes=8,
                 users=60, days=7)


@pytest.fixture(scope="session")
def small_city():
    return generate_synthetic_city(SynthConfig(**SMALL_CFG), seed=7)


@pytest.fixture(scope="session")
def small_city_dir(small_city, tmp_path_factory):
    d = tmp_path_factory.mktemp("bundle")
    write_bundle(small_city, d)
    return d


TINY_CITY_CFG = """\
stops = 120
communities = 3
routes = 24
trunk_routes = 6
users = 50
days = 4
"""


@pytest.fixture(scope="session")
def pipeline_ws(tmp_path_factory):
    """A workspace carried through synth -> odm -> graph -> communities
    -> flows. Shared by CLI and service tests; mutating tests must work
    on a copy."""
    from transitnet import cli

    root = tmp_path_factory.mktemp("pipeline")
    cfg = root / "city.cfg"
    cfg.write_text(TINY_CITY_CFG)
    ws = str(root / "workspace")
    for argv in (
        ["synth", "--workspace", ws, "--config", str(cfg), "--seed", "7"],
        ["odm", "--workspace", ws],
        ["graph", "--workspace", ws],
        ["communities", "--workspace", ws],
        ["flows", "--workspace", ws],
    ):
        assert cli.main(argv) == 0, argv
    return ws
