import json
import math
import subprocess
import sys

import numpy as np
import pytest

from spacelike.cli import EXIT_BUILD, EXIT_OK, EXIT_VERIFY, RunConfig, main, make_config
from spacelike.io import content_hash, dumps


def load(path):
    return json.loads(path.read_text())


def test_grassmann_subprocess(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "spacelike", "grassmann", "--theta", "0.9", "--out", str(tmp_path)],
        capture_output=True, text=True, check=True,
    )
    w, d = (float(t.split("=")[1]) for t in out.stdout.split())
    assert w == pytest.approx(math.cosh(0.9), rel=1e-14)
    assert d == pytest.approx(0.9, abs=1e-14)
    rep = load(tmp_path / "grassmann_report.json")
    assert rep["pass"] and len(rep["config_hash"]) == 40


def test_grassmann_two_angles(tmp_path, capsys):
    assert main(["grassmann", "--theta", "0.5,1.2", "--out", str(tmp_path)]) == EXIT_OK
    text = capsys.readouterr().out
    assert f"{math.cosh(0.5) * math.cosh(1.2):.10g}"[:10] in text


def test_verify_filtered_suite(tmp_path):
    assert main(["verify", "--n", "1", "--m", "1", "--samples", "10", "--out", str(tmp_path)]) == EXIT_OK
    rep = load(tmp_path / "identity_report.json")
    assert rep["pass"] and {r["manifold"] for r in rep["results"]} == {"curve"}
    assert len(rep["results"]) == 10


def test_verify_below_numerical_floor(tmp_path, capsys):
    code = main(["verify", "--n", "1", "--m", "1", "--samples", "5", "--tol-identity", "1e-15", "--out", str(tmp_path)])
    assert code == EXIT_VERIFY
    assert "(tolerance floor)" in capsys.readouterr().out
    rep = load(tmp_path / "identity_report.json")
    assert any(r.get("tolerance_floor") for r in rep["results"])


def test_verify_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["verify", "--n", "1", "--m", "1", "--samples", "5", "--out", str(tmp_path / "same")])
        (tmp_path / "same" / "identity_report.json").rename(tmp_path / f"{d.name}.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_no_matching_manifold(tmp_path):
    assert main(["verify", "--n", "3", "--out", str(tmp_path)]) == EXIT_BUILD
    assert load(tmp_path / "verify_error.json")["error"]["type"] == "ValueError"


def test_config_file_and_flag_precedence(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# run settings\nsamples = 7\ntol-identity = 1e-7\nseed = 3  # trailing\n")
    cfg = make_config(["verify", "--config", str(cfg_path), "--seed", "9"])
    assert cfg.samples == 7 and cfg.tol_identity == 1e-7 and cfg.seed == 9
    cfg_path.write_text("bogus = 1\n")
    assert main(["verify", "--config", str(cfg_path)]) == EXIT_BUILD


def test_config_hash_tracks_content():
    a, b = RunConfig(), RunConfig(seed=1)
    assert content_hash(a.canonical()) != content_hash(b.canonical())
    assert content_hash(a.canonical()) == content_hash(RunConfig().canonical())


def test_curve_outputs(tmp_path):
    assert main(["curve", "--out", str(tmp_path)]) == EXIT_OK
    rep = load(tmp_path / "curve_report.json")
    assert rep["pass"]
    assert (tmp_path / "curve.csv").read_text().startswith("s,gamma1,gamma2,phi,residual2")


def test_flow_outputs(tmp_path):
    assert main(["flow", "--n", "1", "--grid", "16", "--out", str(tmp_path)]) == EXIT_OK
    rep = load(tmp_path / "flow_report.json")
    assert rep["converged"] and rep["pass"]
    assert (tmp_path / "flow_log.csv").exists() and (tmp_path / "flow_state.csv").exists()


def test_flow_rejects_non_spacelike(tmp_path):
    # an amplitude this large gives slopes beyond the light cone
    assert main(["flow", "--n", "1", "--eps", "3.0", "--out", str(tmp_path)]) == EXIT_BUILD
    assert load(tmp_path / "flow_error.json")["error"]["type"] == "NotSpacelikeError"


def test_volume_plane(tmp_path):
    assert main(["volume", "--manifold", "plane", "--out", str(tmp_path)]) == EXIT_OK
    rep = load(tmp_path / "volume_report.json")
    assert rep["pass"]
    assert (tmp_path / "growth_plane.csv").exists()


def test_dumps_format():
    text = dumps({"a": 0.1, "b": [1, 2.0], "c": float("nan"), "d": np.float64(1e-20), "e": True, "f": None})
    data = json.loads(text)
    assert data == {"a": 0.1, "b": [1, 2.0], "c": None, "d": 1e-20, "e": True, "f": None}
    assert '"a": 0.10000000000000001' in text
    assert text.endswith("\n")
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_content_hash_is_git_blob_hash():
    # `printf 'hello\n' | git hash-object --stdin`
    assert content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"
