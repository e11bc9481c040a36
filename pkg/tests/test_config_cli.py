import json
import os
import time
from pathlib import Path

import pytest

from supercritical_lab.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main
from supercritical_lab.config import ConfigError, load_config, parse_config, serialize

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

BASE = """\
ambient.N = 4
ambient.m = 1
ambient.mode = axial
domain.shape = ball
domain.center_height = 2.0
domain.radius = 1.0
schedule.delta = 0.1, 0.0
schedule.p = 6.5, 6.0
schedule.mesh_h = 0.1, 0.08
"""


@pytest.mark.parametrize("name", ["smoke.cfg", "flagship.cfg", "steering.cfg"])
def test_golden_configs_parse(name):
    cfg = load_config(CONFIGS / name)
    assert parse_config(serialize(cfg)) == cfg
    assert len(cfg.schedule()) >= 4


def test_round_trip_and_hash():
    cfg = parse_config(BASE)
    text = serialize(cfg)
    assert parse_config(text) == cfg and serialize(parse_config(text)) == text
    shuffled = "\n".join(reversed(BASE.splitlines()))
    assert parse_config(shuffled).hash() == cfg.hash()
    assert parse_config(BASE + "rng_seed = 5\n").hash() != cfg.hash()
    # defaults are echoed back
    assert "solver.restarts" in text and "symmetry.preset = trivial" in text


def test_unknown_key_has_line():
    with pytest.raises(ConfigError) as e:
        parse_config(BASE + "solver.restart = 3\n")
    assert e.value.line == len(BASE.splitlines()) + 1 and e.value.key == "solver.restart"


def test_planar_alpha_rejected():
    text = BASE.replace("axial", "planar") + "ambient.alpha = 1.0\n"
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.key == "ambient.mode"


def test_character_checked_at_parse_time():
    text = (BASE.replace("axial", "planar").replace("domain.shape = ball", "domain.shape = annulus")
            + "domain.center = 2.0, 3.0\ndomain.r_inner = 0.4\ndomain.r_outer = 1.0\n"
            + "symmetry.preset = cyclic-3\nsymmetry.center = 2.0, 3.0\nsymmetry.character = -1\n")
    with pytest.raises(ConfigError) as e:
        parse_config(text)
    assert e.value.key == "symmetry.character"
    assert parse_config(text.replace("character = -1", "character = 1"))


def test_axial_rejects_symmetry():
    with pytest.raises(ConfigError):
        parse_config(BASE + "symmetry.preset = mirror\nsymmetry.center = 0.0, 2.0\n")


def test_bad_schedule():
    with pytest.raises(ConfigError):
        parse_config(BASE.replace("0.1, 0.08", "0.1, 0.2"))


def test_run_outputs_and_refusal(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(BASE)
    out = tmp_path / "out"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    names = set(os.listdir(out))
    assert {"manifest.json", "stages.jsonl", "summary.csv", "descriptors.csv",
            "config.resolved", "profile_stage0.csv", "profile_stage1.csv"} <= names
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "complete" and len(man["stages"]) == 2
    assert man["config_hash"] == load_config(cfg).hash()
    assert "ell_infinity_n3" in man["constants"]
    lines = (out / "stages.jsonl").read_text().splitlines()
    assert [json.loads(x)["stage"] for x in lines] == [0, 1]
    header = (out / "summary.csv").read_text().splitlines()[0]
    assert header == "stage,delta,p,level,epsilon,zeta_s,zeta_t,profile_error,interiority_ratio"
    first = (out / "summary.csv").read_bytes()
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_CONFIG
    assert main(["run", str(cfg), "--out", str(out), "--force"]) == EXIT_OK
    assert (out / "summary.csv").read_bytes() == first


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(BASE + "nonsense = 1\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_dump_mesh(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(BASE)
    assert main(["dump-mesh", str(cfg), "--stage", "1", "--out", str(tmp_path / "m.txt")]) == EXIT_OK
    assert (tmp_path / "m.txt").stat().st_size > 0
    assert main(["dump-mesh", str(cfg), "--stage", "7"]) == EXIT_CONFIG


def test_verify_all_pass(capsys):
    assert main(["verify"]) == EXIT_OK
    assert "all checks passed" in capsys.readouterr().out


def test_verify_forced_failure(capsys):
    assert main(["verify", "bubble", "--tol", "1e-15"]) == EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out


def test_verify_unknown_suite():
    assert main(["verify", "nope"]) == EXIT_CONFIG


def test_bubble_suite_is_fast():
    t0 = time.perf_counter()
    assert main(["verify", "bubble"]) == EXIT_OK
    assert time.perf_counter() - t0 < 10.0
