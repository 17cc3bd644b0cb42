import json
import os
import subprocess
import sys

import pytest

from dflysim.cli import main
from dflysim.manifest import CSV_HEADER, parse_manifest
from dflysim.errors import ManifestError
from dflysim.routing import parse_fabric_dump

TINY_MANIFEST = """\
version=1

params=2,1,1
engine=dla
voq=on
buffer=4
pattern=uniform
loads=0.2,0.6
seeds=1
warmup_ms=0.05
measure_ms=0.2

params=2,1,1
engine=updn
voq=off
buffer=2
pattern=uniform
loads=0.4
seeds=3,4
warmup_ms=0.05
measure_ms=0.2
"""


def test_build_prints_shape_and_flows(capsys):
    assert main(["build", "--params", "4,2,2"]) == 0
    out = capsys.readouterr().out
    assert "N=72 groups=9" in out
    assert "ft=71 fg=64 fl=68" in out


def test_build_large_size(capsys):
    assert main(["build", "--params", "10,5,5"]) == 0
    assert "N=2550" in capsys.readouterr().out


def test_build_invalid_params_exits_2(capsys):
    assert main(["build", "--params", "0,1,1"]) == 2
    assert "error" in capsys.readouterr().err


def test_build_writes_topology_dump(tmp_path, capsys):
    out = tmp_path / "topo.txt"
    assert main(["build", "--params", "1,1,1,2", "--out", str(out)]) == 0
    text = out.read_text()
    assert "s0:1 -> s1:1 kind=gc group=0" in text


def test_route_dump_round_trips(tmp_path, capsys):
    dump = tmp_path / "fabric.txt"
    assert main(["route", "--engine", "d3r", "--params", "2,1,1", "--dump", str(dump)]) == 0
    assert "engine=d3r sls=2 vls=2" in capsys.readouterr().out
    config = parse_fabric_dump(dump.read_text())
    assert config.engine == "d3r"
    assert config.resources == (2, 2)


def test_verify_exit_codes(capsys):
    assert main(["verify", "--engine", "dla", "--params", "4,2,2"]) == 0
    assert "ACYCLIC" in capsys.readouterr().out
    assert main(["verify", "--engine", "dla", "--params", "4,2,2",
                 "--disable-vl-shift"]) == 1
    out = capsys.readouterr().out
    assert "CYCLE" in out and "vl=0" in out
    assert main(["verify", "--engine", "updn", "--params", "2,1,1"]) == 0


def test_verify_usage_error_is_2(capsys):
    assert main(["verify", "--engine", "lash", "--params", "4,2,2"]) == 2
    assert main(["verify", "--engine", "dla", "--params", "nope"]) == 2


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "dflysim.cli", "verify", "--engine", "updn",
         "--params", "1,1,1,2"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "ACYCLIC" in proc.stdout


# -- sweep ---------------------------------------------------------------------

def _write_manifest(tmp_path, text=TINY_MANIFEST):
    path = tmp_path / "exp.manifest"
    path.write_text(text)
    return path


def test_sweep_produces_one_file_pair_per_row(tmp_path, capsys):
    manifest = _write_manifest(tmp_path)
    out_dir = tmp_path / "out"
    assert main(["sweep", str(manifest), "--out-dir", str(out_dir)]) == 0
    csvs = sorted(p.name for p in out_dir.glob("*.csv"))
    jsons = sorted(p.name for p in out_dir.glob("*.json"))
    assert len(csvs) == 2 and len(jsons) == 2
    text = (out_dir / csvs[0]).read_text()
    lines = text.splitlines()
    assert lines[0].startswith("# manifest=") and "tool=dflysim/" in lines[0]
    assert lines[1] == CSV_HEADER
    assert len(lines) == 2 + 2  # two load points, one seed
    doc = json.loads((out_dir / jsons[0]).read_text())
    assert doc["row"]["engine"] == "dla"
    assert len(doc["runs"]) == 2
    # the document embeds the full simulator configuration
    for key in ("link_rate", "mtu", "flit_size", "data_vls", "voq",
                "buffer_depth", "warmup_s", "measure_s", "pattern",
                "link_latency_s", "pipeline_latency_s", "credit_latency_s"):
        assert key in doc["sim_config"], key
    assert doc["sim_config"]["link_rate"] == 32_000_000_000
    assert doc["manifest_hash"] and doc["tool"].startswith("dflysim/")
    # second row: one load, two seeds
    doc2 = json.loads((out_dir / jsons[1]).read_text())
    assert doc2["row"]["engine"] == "updn"
    assert len(doc2["runs"]) == 2
    assert [r["seed"] for r in doc2["runs"]] == [3, 4]


def test_sweep_rerun_is_noop_and_force_is_identical(tmp_path, capsys):
    manifest = _write_manifest(tmp_path)
    out_dir = tmp_path / "out"
    assert main(["sweep", str(manifest), "--out-dir", str(out_dir)]) == 0
    files = {p.name: p.read_bytes() for p in out_dir.iterdir()}
    assert main(["sweep", str(manifest), "--out-dir", str(out_dir)]) == 0
    assert "skipped" in capsys.readouterr().out
    assert {p.name: p.read_bytes() for p in out_dir.iterdir()} == files
    assert main(["sweep", str(manifest), "--out-dir", str(out_dir), "--force"]) == 0
    assert {p.name: p.read_bytes() for p in out_dir.iterdir()} == files


def test_sweep_empty_manifest_is_ok(tmp_path):
    manifest = _write_manifest(tmp_path, "version=1\n")
    out_dir = tmp_path / "out"
    assert main(["sweep", str(manifest), "--out-dir", str(out_dir)]) == 0
    assert list(out_dir.glob("*.csv")) == []


def test_sweep_unknown_engine_names_the_row(tmp_path, capsys):
    bad = TINY_MANIFEST.replace("engine=updn", "engine=lash")
    manifest = _write_manifest(tmp_path, bad)
    assert main(["sweep", str(manifest), "--out-dir", str(tmp_path / "o")]) == 2
    assert "row 2" in capsys.readouterr().err


def test_sweep_rejects_bad_version(tmp_path, capsys):
    manifest = _write_manifest(tmp_path, "version=9\n")
    assert main(["sweep", str(manifest)]) == 2


def test_sweep_reports_partially_failed_rows(tmp_path, capsys):
    # hotspot on a 6-endnode fabric has no hot sources: that row fails at run
    # time while the healthy row still completes
    text = TINY_MANIFEST.replace("pattern=uniform\nloads=0.4", "pattern=hotspot\nloads=0.4")
    manifest = _write_manifest(tmp_path, text)
    out_dir = tmp_path / "out"
    assert main(["sweep", str(manifest), "--out-dir", str(out_dir)]) == 1
    err = capsys.readouterr().err
    assert "row 02" in err and "1 of 2 rows failed" in err
    assert len(list(out_dir.glob("*.csv"))) == 1  # the good row's output exists


def test_sweep_honors_env_output_dir(tmp_path, monkeypatch, capsys):
    manifest = _write_manifest(tmp_path, TINY_MANIFEST.split("\n\n")[0] + "\n\n" +
                               TINY_MANIFEST.split("\n\n")[1] + "\n")
    env_dir = tmp_path / "envout"
    monkeypatch.setenv("DFLYSIM_OUTPUT_DIR", str(env_dir))
    monkeypatch.chdir(tmp_path)
    assert main(["sweep", str(manifest)]) == 0
    assert len(list(env_dir.glob("*.csv"))) == 1


def test_sweep_gates_large_fabrics(tmp_path, capsys):
    big = TINY_MANIFEST.replace("params=2,1,1", "params=8,4,4")
    manifest = _write_manifest(tmp_path, big)
    assert main(["sweep", str(manifest), "--out-dir", str(tmp_path / "o")]) == 2
    assert "--large" in capsys.readouterr().err


def test_manifest_parser_rejects_garbage():
    with pytest.raises(ManifestError):
        parse_manifest("")
    with pytest.raises(ManifestError):
        parse_manifest("version=1\n\nparams=2,1,1\n")  # missing row keys
    with pytest.raises(ManifestError):
        parse_manifest("version=1\n\nnonsense line\n")
    with pytest.raises(ManifestError):
        parse_manifest(TINY_MANIFEST.replace("voq=on", "voq=maybe"))
    with pytest.raises(ManifestError):
        parse_manifest(TINY_MANIFEST.replace("loads=0.2,0.6", "loads=0.6,0.2"))


def test_shipped_desk_manifest_parses():
    here = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    text = open(os.path.join(here, "manifests", "desk72.manifest")).read()
    m = parse_manifest(text)
    assert len(m.rows) == 36  # 3 engines x voq on/off x 6 buffer depths
    assert {r.engine for r in m.rows} == {"dla", "d3r", "updn"}
    assert {r.buffer_depth for r in m.rows} == {1, 2, 4, 8, 16, 32}
    assert all(r.params.num_endnodes == 72 for r in m.rows)
    assert all(len(r.loads) == 10 for r in m.rows)


# -- plot-data -------------------------------------------------------------------

def test_plot_data_merges_and_sorts(tmp_path, capsys):
    manifest = _write_manifest(tmp_path)
    out_dir = tmp_path / "out"
    assert main(["sweep", str(manifest), "--out-dir", str(out_dir)]) == 0
    capsys.readouterr()  # drain sweep status lines
    csvs = [str(p) for p in sorted(out_dir.glob("*.csv"))]
    assert main(["plot-data", *csvs]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[0] == CSV_HEADER == "load,accepted,engine,voq,buffer,seed"
    assert len(lines) == 1 + 4  # 2 + 2 data rows
    # sorted by engine, voq, buffer, load, seed
    keys = [tuple(l.split(",")[2:5]) + (l.split(",")[0],) for l in lines[1:]]
    assert keys == sorted(keys)
    merged = tmp_path / "merged.csv"
    assert main(["plot-data", *csvs, "--out", str(merged)]) == 0
    assert merged.read_text().splitlines()[0] == CSV_HEADER


def test_plot_data_reads_json_documents_too(tmp_path, capsys):
    manifest = _write_manifest(tmp_path)
    out_dir = tmp_path / "out"
    assert main(["sweep", str(manifest), "--out-dir", str(out_dir)]) == 0
    capsys.readouterr()
    csvs = sorted(out_dir.glob("*.csv"))
    jsons = sorted(out_dir.glob("*.json"))
    assert main(["plot-data", str(csvs[0])]) == 0
    from_csv = capsys.readouterr().out
    assert main(["plot-data", str(jsons[0])]) == 0
    from_json = capsys.readouterr().out
    assert from_csv == from_json
