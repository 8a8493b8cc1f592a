import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from cycsync.cli import (RunConfig, main, parse_float, parse_floats, resolve_config,
                         workers, ConfigError)
from cycsync.orbit import save_orbit

DATA = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(scope="module")
def orbit_file(ref_orbit, tmp_path_factory):
    p = tmp_path_factory.mktemp("orbit") / "orbit.txt"
    save_orbit(ref_orbit, p)
    return str(p)


def _files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "config.json"}


@pytest.mark.parametrize("text,value", [("0.5", 0.5), ("0.4625pi", 0.4625 * math.pi),
                                        ("pi", math.pi), ("-pi", -math.pi),
                                        ("2*pi", 2 * math.pi), ("1e-3", 1e-3)])
def test_parse_float(text, value):
    assert parse_float(text) == value


def test_parse_floats_list():
    assert parse_floats("1, 0,0.5pi") == (1.0, 0.0, 0.5 * math.pi)
    assert parse_floats([1, "2"]) == (1.0, 2.0)


def test_usage_errors_exit_1(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["orbit", "--alpha", "abc"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["nonsense"])
    assert exc.value.code == 1
    assert main(["rays", "--resolution", "50", "--out", str(tmp_path)]) == 1


def test_region_a_exits_2(tmp_path):
    assert main(["orbit", "--alpha", "2.0", "--out", str(tmp_path)]) == 2


def test_region_c_exits_3(tmp_path):
    assert main(["orbit", "--alpha", "2.5", "--out", str(tmp_path)]) == 3


def test_missing_file_exits_4(tmp_path):
    assert main(["spectral", "--matrix", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path)]) == 4


def test_row_sum_violation_exits_4(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("-1,1\n1,-0.5\n")
    assert main(["spectral", "--matrix", str(bad), "--out", str(tmp_path / "o")]) == 4


def test_no_onset_exits_5(tmp_path, orbit_file):
    assert main(["critical-alpha", "--alpha-lo", "2.25", "--alpha-hi", "2.28",
                 "--out", str(tmp_path)]) == 5


def test_orbit_command(tmp_path):
    assert main(["orbit", "--alpha", "2.3427", "--gamma", "0.5", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "orbit.json").read_text())
    assert doc["region"] == "B"
    assert doc["period"] == pytest.approx(39.26642181, abs=1e-6)
    assert (tmp_path / "orbit.txt").is_file()


def test_spectral_three_node(tmp_path, orbit_file):
    assert main(["spectral", "--matrix", str(DATA / "three_node.csv"),
                 "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "spectral.json").read_text())
    re = sorted(round(z[0], 9) for z in doc["eigenvalues"])
    assert re == [-5, -3, 0]


def test_spectral_edge_list(tmp_path):
    assert main(["spectral", "--edges", str(DATA / "cycle4_edges.txt"), "--complete-diagonal",
                 "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "spectral.json").read_text())
    assert len(doc["eigenvalues"]) == 4


def test_reruns_are_byte_identical(tmp_path, orbit_file):
    argv = ["spectral", "--matrix", str(DATA / "three_node.csv"), "--orbit", orbit_file,
            "--D", "0.08,0,0"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    argv = ["msf", "--orbit", orbit_file, "--n-r", "6", "--n-theta", "4"]
    assert main(argv + ["--out", str(tmp_path / "c"), "--workers", "1"]) == 0
    assert main(argv + ["--out", str(tmp_path / "d"), "--workers", "2"]) == 0
    assert _files(tmp_path / "c") == _files(tmp_path / "d")


def test_config_echo_reproduces_run(tmp_path, orbit_file):
    argv = ["spectral", "--matrix", str(DATA / "three_node.csv"), "--orbit", orbit_file,
            "--D", "0.08,0,0", "--out", str(tmp_path / "a")]
    assert main(argv) == 0
    echo = tmp_path / "a" / "config.json"
    assert main(["spectral", "--config", str(echo), "--out", str(tmp_path / "b")]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")


def test_config_file_and_override_precedence(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"alpha": 2.35, "theta": ["0.4pi"], "n_r": 10}))
    cfg = resolve_config(str(cfg_file), {"alpha": 2.31})
    assert cfg.alpha == 2.31 and cfg.n_r == 10 and cfg.theta == (0.4 * math.pi,)
    round_trip = tmp_path / "echo.json"
    round_trip.write_text(cfg.to_json())
    assert resolve_config(str(round_trip), {}) == cfg


def test_config_rejects_unknown_keys(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"alpah": 2.35}))
    with pytest.raises(ConfigError):
        resolve_config(str(cfg_file), {})
    assert main(["orbit", "--config", str(cfg_file), "--out", str(tmp_path)]) == 1


def test_worker_precedence(monkeypatch):
    monkeypatch.setenv("FLOQUET_WORKERS", "3")
    assert workers(RunConfig()) == 3
    assert workers(RunConfig(workers=2)) == 2
    monkeypatch.delenv("FLOQUET_WORKERS")
    assert workers(RunConfig()) >= 1


def test_rays_profile(tmp_path, orbit_file):
    assert main(["rays", "--orbit", orbit_file, "--theta", "0", "--resolution", "200",
                 "--profile-n", "20", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "rays.csv").read_text().splitlines()
    assert rows[0] == "theta,R_lo,R_hi" and len(rows) == 2
    lo, hi = map(float, rows[1].split(",")[1:])
    assert lo == pytest.approx(0.3777, abs=1e-3) and hi == pytest.approx(0.3975, abs=1e-3)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cycsync", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "reproduce" in res.stdout


def test_reproduce_rejects_unknown_figure(tmp_path):
    assert main(["reproduce", "--figure", "1", "--out", str(tmp_path)]) == 1
