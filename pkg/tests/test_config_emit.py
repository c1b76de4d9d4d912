import json

import numpy as np
import pytest

from uavsim import mobility as mob
from uavsim.config import params_from_section, parse_config, read_config, section
from uavsim.emit import cdf_rows, manifest_hash, write_csv, write_json, write_manifest
from uavsim.exceptions import ConfigError
from uavsim.u2u import U2uParams


def test_parse_and_coerce():
    cp = parse_config("[u2u]\nuav_height = 150  # metres\nbs_antenna = omni\n[run]\nseed=3\n")
    p = params_from_section(U2uParams, section(cp, "u2u"))
    assert p.uav_height == 150.0 and p.bs_antenna == "omni"
    assert section(cp, "missing") == {}


def test_nested_tuples_and_overrides():
    cp = parse_config("[mobility]\nweights = 0/1, 2/8\nn_routes = 10\n")
    hyper = mob.QHyper(episodes=5)
    p = params_from_section(mob.MobilityParams, section(cp, "mobility"), hyper=hyper)
    assert p.weights == ((0.0, 1.0), (2.0, 8.0)) and p.n_routes == 10 and p.hyper is hyper


@pytest.mark.parametrize("text", ["[u2u]\nfoo = 1\n", "[u2u]\nn_prb = lots\n", "[u2u]\nn_prb = 0\n",
                                  "[mobility]\nhyper = 1\n", "no header\n"])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        cp = parse_config(text)
        name = cp.sections()[0]
        cls = U2uParams if name == "u2u" else mob.MobilityParams
        params_from_section(cls, section(cp, name))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        read_config(tmp_path / "nope.ini")


def test_hash_ignores_nothing_but_wall_clock():
    a = manifest_hash("thz", "[thz]\n", 1, "0.1.0")
    assert a == manifest_hash("thz", "[thz]\n", 1, "0.1.0")
    assert a != manifest_hash("thz", "[thz]\n", 2, "0.1.0")
    assert a != manifest_hash("u2u", "[thz]\n", 1, "0.1.0")


def test_outputs_carry_hash(tmp_path):
    h = manifest_hash("x", "", 0, "v")
    c = write_csv(tmp_path / "a.csv", ("p", "v"), [(0.5, 1.25), (1, np.float64(2.0))], h)
    j = write_json(tmp_path / "a.json", {"x": np.float32(1.5), "bad": np.inf}, h)
    lines = c.read_text().splitlines()
    assert lines[0] == f"# schema_version=1 manifest_hash={h}"
    assert lines[2:] == ["0.5,1.25", "1,2.0"]
    body = json.loads(j.read_text())
    assert body["manifest_hash"] == h and body["bad"] is None
    m = write_manifest(tmp_path, "x", None, "", 0, "v", [c, j], 1)
    man = json.loads(m.read_text())
    assert man["manifest_hash"] == h and set(man["outputs"]) == {"a.csv", "a.json"}
    assert not list(tmp_path.glob(".*"))


def test_cdf_rows():
    rows = cdf_rows(("curve",), np.arange(10.0), n_points=5)
    assert [r[1] for r in rows] == [0.1, 0.3, 0.5, 0.7, 0.9]
    assert all(r[0] == "curve" for r in rows)
    assert cdf_rows(("x",), []) == []
