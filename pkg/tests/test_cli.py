import hashlib
import json
import subprocess
import sys

import pytest

from minsurf import __version__, cli, config
from minsurf import criteria as C
from minsurf.errors import ConfigInvalid, NewtonDiverged

SMALL_FORWARD = """
forward:
  scherk: {resolutions: [33, 65, 129]}
  zero: {n: 17}
  affine: {n: 17}
  duality: {pairs: 2, n: 17, dn_n: 65}
  samples: {n: 17, data: 1}
"""


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_csv_writer_is_deterministic_and_lossless():
    rows = [{"a": 0.1, "b": True}, {"b": None, "c": 1 + 2j, "a": float("nan")}]
    text = cli.to_csv(rows)
    assert text == "a,b,c\n0.1,true,\n,,1.0;2.0\n"
    x = 0.1 + 0.2
    assert float(cli.to_csv([{"x": x}]).splitlines()[1]) == x


def test_json_writer_sorts_keys():
    assert cli.dumps({"b": 1, "a": [1.5, None]}) == '{\n  "a": [\n    1.5,\n    null\n  ],\n  "b": 1\n}\n'


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


@pytest.mark.parametrize("text,fragment", [
    ("forward: [unclosed", "YAML"),
    ("forwrd: {}", "forwrd"),
    ("seed: -1", "seed"),
    ("recover: {n: 257, steps: [K, c]}", "does not resolve"),
    ("forward: {scherk: {resolutions: [129, 65, 257]}}", "must increase"),
])
def test_config_errors_write_manifest_only(tmp_path, text, fragment):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(text)
    out = tmp_path / "out"
    assert cli.main(["forward", "--config", str(cfg), "--out", str(out)]) == 2
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json"]
    m = manifest(out)
    assert m["status"] == "config-error" and m["exit_code"] == 2
    assert m["errors"][0]["code"] == "ConfigInvalid"
    assert fragment.lower() in m["errors"][0]["message"].lower()


def test_preset_and_config_conflict(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "forward", "quick", "--config", "defaults", "--out", str(out)]) == 2
    assert manifest(out)["status"] == "config-error"


def test_presets_load_and_hash_stably():
    for name in config.PRESETS:
        cfg = config.load(name)
        assert config.config_hash(cfg) == config.config_hash(config.load(name))
        assert config.config_hash(cfg).startswith("sha256:")
    assert config.load("defaults", seed=7)["seed"] == 7
    with pytest.raises(ConfigInvalid):
        config.load("no-such-file.yaml")


def test_forward_stage_run(tmp_path):
    cfg = tmp_path / "small.yaml"
    cfg.write_text(SMALL_FORWARD)
    out = tmp_path / "out"
    code = cli.main(["forward", "--config", str(cfg), "--out", str(out), "--seed", "5"])
    m = manifest(out)
    assert code == 0 and m["status"] == "pass"
    assert [c["id"] for c in m["criteria"]] == [1, 2, 3]
    assert m["seed"] == 5 and m["config"]["seed"] == 5
    assert m["config_hash"] == config.config_hash(m["config"])
    for rel, digest in m["artifacts"].items():
        assert digest == "sha256:" + hashlib.sha256((out / rel).read_bytes()).hexdigest()
    for rel in ("criteria.csv", "forward/scherk.csv", "forward/areas.csv", "forward/dn_samples.csv"):
        assert rel in m["artifacts"]
    assert "grid" in m and m["grid"]["forward"]["scherk"] == [33, 65, 129]


def test_numerical_error_exit_code(tmp_path, monkeypatch):
    def boom(cfg):
        raise NewtonDiverged("no convergence in 0 iterations")

    monkeypatch.setattr(C, "criterion_5", boom)
    out = tmp_path / "out"
    assert cli.main(["identities", "quick", "--out", str(out)]) == 3
    m = manifest(out)
    assert m["status"] == "numerical-error"
    assert m["errors"][0]["code"] == "NewtonDiverged" and m["errors"][0]["criterion"] == 5
    assert m["criteria"][0]["status"] == "ERROR"


def test_strict_promotes_warnings(tmp_path, monkeypatch):
    import warnings

    def warns(cfg):
        warnings.warn("slope fit used only two points")
        return C.CriterionResult(4, C.CRITERIA_NAMES[4], True, 0.0, "< 1")

    monkeypatch.setattr(C, "criterion_4", warns)
    assert cli.main(["linearize", "quick", "--out", str(tmp_path / "a")]) == 0
    a = manifest(tmp_path / "a")["criteria"][0]
    assert a["status"] == "PASS" and a["warnings"] == ["UserWarning: slope fit used only two points"]
    assert cli.main(["linearize", "quick", "--strict", "--out", str(tmp_path / "b")]) == 1
    assert manifest(tmp_path / "b")["criteria"][0]["status"] == "FAIL"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "minsurf", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "recover" in res.stdout
