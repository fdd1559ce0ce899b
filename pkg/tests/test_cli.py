import csv
import io
import json

import pytest

from nilgeo.cli import RunConfig, main, run
from nilgeo.errors import ConfigError
from nilgeo.structure import builtin_text

CHEAP = ["--theta-nodes", "16", "--r-nodes", "8", "--target", "0.1", "--max-refinements", "0"]


def table(text):
    lines = text.splitlines()
    assert lines[0].startswith("# nilgeo-")
    return list(csv.reader(io.StringIO("\n".join(lines[1:]))))


def test_spectrum_table(capsys):
    assert main(["spectrum", "--builtin", "F_commuting", "--theta-grid", "64"]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[0] == ["theta", "w1", "w2", "top_gap", "top_multiplicity"]
    assert len(rows) == 65
    # moduli |cos| +- |sin|: double exactly at multiples of pi / 2
    doubles = [k for k, r in enumerate(rows[1:]) if r[-1] == "2"]
    assert doubles == [0, 16, 32, 48]
    assert len(rows[5][1].split("e")[0].replace(".", "")) == 17


def test_codim_report(capsys):
    assert main(["codim-report", "--n", "3"]) == 0
    rows = table(capsys.readouterr().out)
    byk = {r[0]: r for r in rows[1:]}
    assert byk["double"][-1] == "3"
    assert byk["triple"][-1] == "8"
    assert byk["triple"][3] == "9"


def test_exit_codes(tmp_path, capsys):
    assert main(["volume", "--family", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"format": "nilgeo-family/1",\n "p": }')
    assert main(["spectrum", "--family", str(bad)]) == 3
    assert "line 2" in capsys.readouterr().err
    assert main(["resonance", "--builtin", "F_noresonance", "--start", "0.2,0"]) == 5
    assert main(["cut-time", "--builtin", "F_generic", "--xi", "1,2"]) == 2
    assert main(["volume", "--builtin", "F_generic", "--theta-nodes", "8", "--r-nodes", "4",
                 "--target", "1e-9", "--max-refinements", "0"]) == 4
    assert main(["codim-report", "--n", "9"]) == 2


def test_artifacts_are_reproducible(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["volume", "--builtin", "F_generic", "--xi=0.3,0.2,0.1", *CHEAP, "--output-dir", str(d)]) == 0
        outs.append(d)
    a, b = outs
    names = sorted(f.name for f in a.iterdir())
    assert names == ["manifest.json", "slices.csv", "slices.svg", "volume.csv", "volume.json"]
    for fname in names:
        assert (a / fname).read_bytes() == (b / fname).read_bytes(), fname
    manifest = json.loads((a / "manifest.json").read_text())
    assert set(manifest) == {"format", "versions", "config", "artifacts"}
    assert "volume.csv" in manifest["artifacts"]
    assert manifest["config"]["quad"]["theta_nodes"] == 16
    assert "output_dir" not in manifest["config"]


def test_manifest_reproduces_run(tmp_path, capsys):
    d = tmp_path / "first"
    assert main(["cut-time", "--builtin", "F_generic", "--theta", "0,0.5", "--output-dir", str(d)]) == 0
    cfg = json.loads((d / "manifest.json").read_text())["config"]
    cfg["output_dir"] = str(tmp_path / "second")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path)]) == 0
    assert (d / "cut-time.csv").read_bytes() == (tmp_path / "second" / "cut-time.csv").read_bytes()


def test_run_config_is_strict(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "volume", "colour": "red"})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "fly"})
    with pytest.raises(ConfigError):
        RunConfig(command="volume", format="xml")
    assert RunConfig(command="volume").seed == 20240917
    path = tmp_path / "cfg.json"
    path.write_text('{"command": "volume", "quad": {"nodes": 3}}')
    assert main(["run", "--config", str(path)]) == 2


def test_structured_doc_to_stdout(capsys):
    assert run(RunConfig(command="versal", input="F_degenerate", format="structured-doc")) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["format"] == "nilgeo-versal/1"
    assert doc["result"]["rank_check"]["rank"] == 1


def test_versal_generic6(capsys):
    assert main(["versal", "--builtin", "F_generic6", "--z", "0,0,0,0"]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[1][3] == "3"


def test_resonance_command(capsys):
    assert main(["resonance", "--builtin", "F_generic", "--start", "0.3,0.1,0.2,-0.1"]) == 0
    rows = table(capsys.readouterr().out)
    assert float(rows[1][4]) <= 1e-9


def test_geodesic_and_jacobian(capsys):
    assert main(["geodesic", "--builtin", "F_generic", "--t", "0,0.5,1", "--px0=1,0,0,0"]) == 0
    rows = table(capsys.readouterr().out)
    assert len(rows) == 4
    assert main(["jacobian", "--builtin", "F_commuting", "--theta", "0", "--r", "6.283185307179586"]) == 0
    assert table(capsys.readouterr().out)[0][0] == "det"


def test_density_field_line_and_cache(tmp_path, capsys):
    args = ["density-field", "--builtin", "F_generic", "--line=-0.1,0,0:0.1,0,0:3", *CHEAP,
            "--cache-dir", str(tmp_path / "cache")]
    assert main(args + ["--output-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--output-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "density-field.csv").read_bytes() == (tmp_path / "b" / "density-field.csv").read_bytes()
    rows = table((tmp_path / "a" / "density-field.csv").read_text())
    assert len(rows) == 4
    assert main(["density-field", "--builtin", "F_generic", "--line", "0,0,0:1"]) == 2


def test_scaffold_exports_builtins(tmp_path, capsys):
    assert main(["scaffold", "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "F_generic.json").read_text() == builtin_text("F_generic")
    assert main(["spectrum", "--family", str(tmp_path / "F_generic.json"), "--theta-grid", "4"]) == 0


def test_input_files_are_not_modified(tmp_path, capsys):
    path = tmp_path / "fam.json"
    path.write_text(builtin_text("F_generic"))
    before = path.read_bytes()
    assert main(["versal", "--family", str(path), "--z=-0.5467,0,0.5297,0"]) == 0
    assert path.read_bytes() == before


def test_probe_rank_drop(capsys):
    assert main(["probe", "--kind", "rank-drop", "--builtin", "F_commuting", "--theta", "0"]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[1][-1] == "true"
