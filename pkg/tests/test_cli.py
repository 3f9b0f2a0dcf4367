import io
import json

import numpy as np
import pytest

from choidiv.channels import choi_from_kraus, depolarizing, identity, load_channel
from choidiv.cli import EXAMPLES, SCHEMA, emit_examples, parse_report, run


@pytest.fixture(scope="module")
def specs(tmp_path_factory):
    d = tmp_path_factory.mktemp("specs")
    emit_examples(d)
    return d


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def test_bounds_identical(specs):
    code, out, _ = call(["bounds", "--n", specs / "identity.json", "--m", specs / "identity.json",
                         "--epsilon", "1e-3"])
    rep = parse_report(out)
    assert code == 0 and rep["schema"] == SCHEMA
    assert abs(rep["lower"]) <= 1e-6 and abs(rep["upper"]) <= 1e-6
    assert "timings" in rep


def test_bounds_infinite(specs):
    code, out, _ = call(["bounds", "--n", specs / "identity.json",
                         "--m", specs / "amplitude_damping_0.5.json"])
    assert code == 2
    assert json.loads(out)["lambda"] == "inf"


def test_resource_replacer(specs):
    code, out, _ = call(["resource", "--n", specs / "identity.json", "--free", "replacer",
                         "--epsilon", "1e-2", "--no-meta"])
    assert code == 0
    assert abs(parse_report(out)["upper"] - 1.3863) <= 1e-2


def test_dmax_and_bits(specs):
    code, out, _ = call(["dmax", "--n", specs / "identity.json",
                         "--m", specs / "depolarizing_0.5.json", "--bits", "--no-meta"])
    rep = parse_report(out)
    assert code == 0 and rep["units"] == "bits"
    assert np.isclose(rep["dmax"], np.log2(1.6), atol=1e-9)
    assert np.isclose(rep["dmax_sdp"], np.log2(1.6), atol=1e-6)


def test_oracle_command(specs):
    code, out, _ = call(["oracle", "--n", specs / "identity.json",
                         "--m", specs / "depolarizing_0.5.json", "--seed", "3", "--no-meta"])
    assert code == 0 and abs(parse_report(out)["value"] - 0.4700036) <= 1e-4


def test_csv_output(specs):
    code, out, _ = call(["bounds", "--n", specs / "identity.json", "--m",
                         specs / "depolarizing_0.25.json", "--format", "csv", "--no-meta"])
    header, row = out.strip().splitlines()
    assert code == 0 and "witness" not in header
    fields = dict(zip(header.split(","), row.split(",")))
    assert float(fields["lower"]) <= 0.2076393 + 1e-6 <= float(fields["upper"]) + 2e-6


def test_deterministic_reports(specs):
    argv = ["bounds", "--n", specs / "identity.json", "--m", specs / "depolarizing_0.5.json",
            "--no-meta"]
    assert call(argv)[1] == call(argv)[1]


def test_input_errors(specs, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "kraus",\n  "ops": [[[1, 0]]')
    code, _, err = call(["bounds", "--n", bad, "--m", specs / "identity.json"])
    assert code == 1 and "line" in err
    code, _, err = call(["bounds", "--n", tmp_path / "missing.json", "--m", specs / "identity.json"])
    assert code == 1
    code, _, _ = call(["bounds", "--n", specs / "identity.json", "--m", specs / "identity.json",
                       "--epsilon", "-1"])
    assert code == 1
    code, _, err = call(["resource", "--n", specs / "identity.json", "--free", "separable"])
    assert code == 1 and "SDP" in err
    code, _, _ = call(["frobnicate"])
    assert code == 1


def test_energy_flags(specs, tmp_path):
    h = tmp_path / "h.json"
    h.write_text(json.dumps({"H": [[0, 0], [0, 1]]}))
    code, out, _ = call(["bounds", "--n", specs / "dephasing_0.3.json",
                         "--m", specs / "depolarizing_0.5.json", "--energy", h, "--E", "0",
                         "--no-meta"])
    rep = parse_report(out)
    assert code == 0 and abs(rep["lower"] - np.log(4 / 3)) <= 1e-2
    code, _, _ = call(["bounds", "--n", specs / "identity.json", "--m", specs / "identity.json",
                       "--energy", h])
    assert code == 1


def test_emit_examples(tmp_path):
    files = emit_examples(tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted([f"{e[0]}.json" for e in EXAMPLES] + ["README.md"])
    assert len(files) == len(names)
    g = load_channel(tmp_path / "identity.json")
    assert np.abs(g.op - choi_from_kraus(identity(2)).op).max() <= 1e-12
    dep = load_channel(tmp_path / "depolarizing_0.5.json")
    assert dep.trace_preserving
    assert np.abs(dep.op - choi_from_kraus(depolarizing(0.5)).op).max() <= 1e-12
    table = (tmp_path / "README.md").read_text()
    assert "0.4700036" in table and "DERIVED" in table


def test_examples_command(tmp_path):
    code, out, _ = call(["examples", tmp_path / "ex"])
    assert code == 0 and "identity.json" in parse_report(out)["files"]


def test_report_schema_round_trip(specs):
    _, out, _ = call(["bounds", "--n", specs / "identity.json", "--m",
                      specs / "amplitude_damping_0.5.json"])
    rep = parse_report(out)
    assert rep["upper"] == float("inf")
    with pytest.raises(ValueError):
        parse_report(json.dumps({"schema": "other/0"}))
