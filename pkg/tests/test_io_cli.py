import json

import numpy as np
import pytest

from vortexlab.cli import main
from vortexlab.euler import gaussian_state
from vortexlab.fields import WaveField
from vortexlab.io import (RunManifest, csv_text, dump_json, fmt, load_field, load_vorticity,
                          read_csv, save_field, save_vorticity)


def test_fmt_roundtrip():
    x = 0.1 + 0.2
    assert float(fmt(x)) == x
    assert fmt(np.int64(3)) == "3"
    text = csv_text(["a", "b"], [[1.0 / 3, 2]])
    assert text.splitlines()[1] == "0.33333333333333331,2"


def test_read_csv(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text(csv_text(["a", "b"], [[1.5, 2.0], [3.0, 4.25]]))
    head, data = read_csv(p)
    assert head == ["a", "b"] and data[1, 1] == 4.25


def test_dump_json_handles_numpy():
    doc = json.loads(dump_json({"a": np.arange(3), "b": np.float64(1.5), "c": float("inf")}))
    assert doc == {"a": [0, 1, 2], "b": 1.5, "c": "inf"}


def test_field_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    v = rng.normal(size=(40, 40)) + 1j * rng.normal(size=(40, 40))
    f = WaveField(v, 1.5, 0.2, degree=2, center=(0.1, -0.3))
    binp, jp = save_field(f, tmp_path / "ck" / "field_00000", {"time": 0.5})
    assert binp.stat().st_size == 40 * 40 * 16
    g, side = load_field(tmp_path / "ck" / "field_00000")
    assert np.array_equal(g.values, f.values)
    assert g.center == f.center and g.degree == 2 and side["provenance"]["time"] == 0.5
    raw = bytearray(binp.read_bytes())
    raw[0] ^= 1
    binp.write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        load_field(tmp_path / "ck" / "field_00000")


def test_vorticity_roundtrip(tmp_path):
    st = gaussian_state(128, 8.0)
    save_vorticity(st, tmp_path / "w")
    back, side = load_vorticity(tmp_path / "w")
    assert np.array_equal(back.omega, st.omega) and back.origin == pytest.approx(st.origin)


def test_manifest_roundtrip(tmp_path):
    m = RunManifest("pv_trajectory", {"seed": 1}, results={"x": np.float64(2.0)})
    (tmp_path / "a.txt").write_text("hi")
    m.add_file(tmp_path / "a.txt", root=tmp_path)
    m.write(tmp_path)
    r = RunManifest.read(tmp_path / "manifest.json")
    assert r.results == {"x": 2.0} and "a.txt" in r.files


def _write(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


def test_cli_pv_run_and_report(tmp_path, capsys):
    cfg = _write(tmp_path, {"scenario": "pv_trajectory", "params": {"T": 1.0, "samples": 11}})
    out = str(tmp_path / "run")
    assert main(["pv", "run", "--config", cfg, "--out", out, "--seed", "5"]) == 0
    capsys.readouterr()
    assert main(["report", "--out", out]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["scenario"] == "pv_trajectory" and summary["hash_mismatches"] == []
    with open(tmp_path / "run" / "trajectory.csv", "a") as fh:
        fh.write("tamper\n")
    assert main(["report", "--out", out]) == 1


def test_cli_bad_config_lists_all_errors(tmp_path, caplog):
    cfg = _write(tmp_path, {"scenario": "gp_vs_ode", "params": {"eps": -1, "bogus": 3, "N": "x"}})
    assert main(["gp", "run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    text = caplog.text
    assert "bogus" in text and "eps" in text and "N" in text


def test_cli_wrong_scenario_for_command(tmp_path):
    cfg = _write(tmp_path, {"scenario": "norms_suite"})
    assert main(["gp", "run", "--config", cfg]) == 1


def test_cli_rejects_bad_seed():
    with pytest.raises(SystemExit):
        main(["pv", "run", "--seed", "-3"])


def test_cli_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["sample", "--config", str(p)]) == 1
