import json

import pytest

from dplab.cli import ConfigError, config_from_dict, expand_sweep, main, run, validate


def _write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def _manifest(out_dir):
    with open(out_dir / "manifest.json") as fh:
        return json.load(fh)


SHOCK = {"scenario": "shock", "grid": {"length": 40.0, "n": 2048},
         "time": {"T": 0.5, "out_every": 50}, "profile": {"k": 1.0}}
SINGLE = {"scenario": "single_peakon", "grid": {"length": 40.0, "n": 4096},
          "time": {"T": 0.5, "out_every": 50},
          "profile": {"n_moll": 16, "delta": 0.01}}


def test_default_config_is_valid():
    assert validate(config_from_dict({})) == []


def test_unknown_key_names_its_path():
    with pytest.raises(ConfigError, match="grid.size"):
        config_from_dict({"grid": {"size": 3}})


@pytest.mark.parametrize("patch, field", [
    ({"grid": {"n": 1000}}, "grid.n"),
    ({"time": {"T": -1.0}}, "time.T"),
    ({"time": {"cfl": 0.0}}, "time.cfl"),
    ({"profile": {"c": -1.0}}, "profile.c"),
    ({"scenario": "nonsense"}, "scenario"),
])
def test_static_problems_name_the_field(patch, field):
    problems = validate(config_from_dict(patch))
    assert any(p.startswith(field) for p in problems), problems


def test_close_train_rejected_with_admissibility_condition():
    cfg = config_from_dict({"scenario": "train", "grid": {"length": 120.0, "n": 16384},
                            "profile": {"shifts": [-5.0, 5.0], "separation": 30.0}})
    assert any("(z_j - z_q >= L)" in p for p in validate(cfg))


def test_unreachable_distance_reported():
    cfg = config_from_dict({"grid": {"length": 40.0, "n": 4096},
                            "profile": {"n_moll": 4, "delta": 1e-6}})
    assert any(p.startswith("profile.delta") for p in validate(cfg))


def test_several_problems_reported_together():
    cfg = config_from_dict({"scenario": "train", "grid": {"n": 1000}, "time": {"T": -1.0},
                            "profile": {"shifts": [-5.0, 5.0]}})
    problems = validate(cfg)
    assert len(problems) >= 3


def test_sweep_expansion(tmp_path):
    cfg = config_from_dict({"scenario": "sweep", "output_dir": str(tmp_path),
                            "sweep": {"base": SHOCK, "vary": {"profile.k": [1.0, 2.0],
                                                              "time.cfl": [0.2, 0.3]}}})
    runs = expand_sweep(cfg)
    assert len(runs) == 4
    assert {(r.profile.k, r.time.cfl) for r in runs} == {(1.0, 0.2), (1.0, 0.3), (2.0, 0.2), (2.0, 0.3)}
    assert len({r.output_dir for r in runs}) == 4


def test_shock_run_is_deterministic(tmp_path):
    hashes = []
    for name in ("a", "b"):
        m = run(config_from_dict(dict(SHOCK, output_dir=str(tmp_path / name))))
        assert m.rollup
        hashes.append({f["path"]: f["sha256"] for f in m.files})
    assert hashes[0] == hashes[1]


def test_manifest_lists_every_file(tmp_path):
    out = tmp_path / "single"
    m = run(config_from_dict(dict(SINGLE, output_dir=str(out))))
    assert m.rollup
    listed = {f["path"] for f in m.files}
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert listed == on_disk
    data = _manifest(out)
    assert data["config"]["profile"]["delta"] == 0.01
    assert data["schema_version"] and data["checks"]


def test_identities_command(tmp_path, capsys):
    path = _write(tmp_path, {"scenario": "identities", "suite": {"count": 2}, "seed": 7,
                             "grid": {"length": 30.0, "n": 4096}})
    assert main(["identities", "--config", path, "--output-dir", str(tmp_path / "ids")]) == 0
    text = capsys.readouterr().out
    assert "rollup=true" in text and "FAIL" not in text
    assert (tmp_path / "ids" / "identities.csv").exists()


def test_validate_command_exit_codes(tmp_path, capsys):
    assert main(["validate", "--config", _write(tmp_path, {})]) == 0
    assert main(["validate", "--config", _write(tmp_path, {"grid": {"n": 1000}}, "bad.json")]) == 1
    assert "grid.n" in capsys.readouterr().out


def test_subcommand_must_match_scenario(tmp_path):
    assert main(["simulate", "--config", _write(tmp_path, {"scenario": "identities"})]) == 2
    assert main(["identities", "--config", _write(tmp_path, {"typo": 1}, "t.json")]) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DP_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["simulate", "--config", _write(tmp_path, SHOCK)]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_sweep_command_parallel(tmp_path):
    data = {"scenario": "sweep", "sweep": {"base": SHOCK, "vary": {"profile.k": [1.0, 2.0]}}}
    out = tmp_path / "sw"
    assert main(["sweep", "--config", _write(tmp_path, data), "--output-dir", str(out), "--jobs", "2"]) == 0
    m = _manifest(out)
    assert len(m["children"]) == 2 and m["rollup"]
    assert (out / "run_001" / "manifest.json").exists()


def test_blowup_is_recorded(tmp_path):
    data = {"scenario": "single_peakon", "grid": {"length": 40.0, "n": 4096},
            "time": {"T": 0.5}, "profile": {"c": 1e9, "n_moll": 16, "delta": None},
            "output_dir": str(tmp_path / "boom")}
    m = run(config_from_dict(data))
    assert not m.rollup
    assert m.blowup is not None and "t" in m.blowup
