import csv
import math

import numpy as np
import pytest

from sdd_sim.cli import main
from sdd_sim.config import ConfigError, ScenarioConfig, preset_names, preset_text, resolve_key
from sdd_sim.integrator import read_trajectory_csv

SMALL = """
domain.L = 3.141592653589793
spectral.N = 8
spectral.grid = 32
d = 0.5
r = 1.0
delay.variant = point
delay.a = 0.2
delay.b = 0.3
delay.r_k = 0.5
b.variant = nicholson
b.p = 2
kernel.variant = gaussian
phi.preset = parabola
solver.h = 0.05
T = 2
output.delta_list = 0, 0.25
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def test_presets_bundled():
    assert preset_names() == ["decay.cfg", "nicholson.cfg", "oracle.cfg"]
    for name in preset_names():
        spec, opts, T = ScenarioConfig.load(name).build()
        assert T > 0 and spec.op.n_modes <= 32
    assert "nicholson" in preset_text("nicholson")


def test_unknown_key_is_named():
    with pytest.raises(ConfigError, match="spectral.NN"):
        ScenarioConfig.from_text("spectral.NN = 4\n")
    with pytest.raises(ConfigError, match="solver.h"):
        ScenarioConfig.from_text("solver.h = fast\n")


def test_bad_value_names_key():
    cfg = ScenarioConfig.from_text(SMALL + "delay.eta_ign = 0.6\n")
    with pytest.raises(ConfigError, match="delay.r_k"):
        cfg.build()
    with pytest.raises(ConfigError, match="phi.mode"):
        ScenarioConfig.from_text(SMALL.replace("parabola", "mode") + "phi.mode = 99\n").build()


def test_aliases():
    assert resolve_key("p") == "b.p" and resolve_key("eta_ign") == "delay.eta_ign"
    with pytest.raises(ConfigError):
        resolve_key("nope")


def test_print_config_round_trip(small_cfg):
    cfg = ScenarioConfig.load(small_cfg)
    again = ScenarioConfig.from_text(cfg.to_text())
    s1, o1, T1 = cfg.build()
    s2, o2, T2 = again.build()
    assert (o1, T1) == (o2, T2)
    assert s1.eta == s2.eta and s1.b == s2.b and s1.f == s2.f and s1.d == s2.d
    np.testing.assert_array_equal(s1.phi.values, s2.phi.values)


def test_run_writes_csv(small_cfg, tmp_path, capsys):
    out = tmp_path / "run.csv"
    assert main(["run", "--config", str(small_cfg), "--out", str(out)]) == 0
    line = capsys.readouterr().out
    assert "final ||u||" in line and "wall" in line and "clamps" in line
    data = read_trajectory_csv(out)
    assert list(data) == ["t", "norm", "frac_norm_0", "frac_norm_0.25", "eta"]
    assert np.all(np.diff(data["t"]) > 0)


def test_run_is_deterministic(small_cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["run", "--config", str(small_cfg), "--out", str(a)])
    main(["run", "--config", str(small_cfg), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_decay_config_norms_strictly_decrease(tmp_path):
    out = tmp_path / "decay.csv"
    assert main(["run", "--config", "decay", "--out", str(out)]) == 0
    assert np.all(np.diff(read_trajectory_csv(out)["norm"]) < 0)


def test_print_config_cli(small_cfg, tmp_path, capsys):
    assert main(["run", "--config", str(small_cfg), "--print-config"]) == 0
    echoed = tmp_path / "echo.cfg"
    echoed.write_text(capsys.readouterr().out)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["run", "--config", str(small_cfg), "--out", str(a)])
    main(["run", "--config", str(echoed), "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(SMALL.replace("delay.r_k = 0.5", "delay.r_k = 0.3\ndelay.eta_ign = 0.5"))
    assert main(["run", "--config", str(bad)]) == 2
    assert "delay.r_k" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["verify", "nope"]) == 2
    boom = tmp_path / "boom.cfg"
    boom.write_text("r = 0.5\ndelay.tau = 0.01\nb.variant = linear\nb.c = 1e4\nspectral.N = 4\n"
                    "solver.h = 0.01\nT = 5\n")
    assert main(["run", "--config", str(boom), "--out", str(tmp_path / "x.csv")]) == 3
    assert "non-finite" in capsys.readouterr().err


def test_sweep(small_cfg, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SDD_SIM_THREADS", "3")
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(small_cfg), "--param", "p", "--values", "1,2,4", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["b.p=1.csv", "b.p=2.csv", "b.p=4.csv", "summary.csv"]
    with open(out / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["1", "2", "4"]
    assert all(r["entry_time_delta0"] != "" for r in rows)
    finals = [float(r["final_norm"]) for r in rows]
    assert finals[0] < finals[1] < finals[2]


def test_sweep_single_value_matches_run(small_cfg, tmp_path):
    run_csv = tmp_path / "run.csv"
    main(["run", "--config", str(small_cfg), "--out", str(run_csv)])
    main(["sweep", "--config", str(small_cfg), "--param", "b.p", "--values", "2", "--out", str(tmp_path / "sw")])
    assert (tmp_path / "sw" / "b.p=2.csv").read_bytes() == run_csv.read_bytes()


def test_sweep_eta_ign_valid_and_unknown_key(small_cfg, tmp_path):
    assert main(["sweep", "--config", str(small_cfg), "--param", "eta_ign", "--values", "0.2,0.4",
                 "--out", str(tmp_path / "e")]) == 0
    assert main(["sweep", "--config", str(small_cfg), "--param", "bogus", "--values", "1",
                 "--out", str(tmp_path / "f")]) == 2


def test_verify_H(capsys, tmp_path):
    assert main(["verify", "H", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[FAIL]" not in out and "max discrepancy 0 " in out
    assert (tmp_path / "verify_H.json").exists()


def test_verify_oracle(capsys):
    assert main(["verify", "oracle"]) == 0
    assert "[PASS] oracle" in capsys.readouterr().out


def test_presets_command(capsys):
    assert main(["presets"]) == 0
    assert "nicholson.cfg" in capsys.readouterr().out
    assert main(["presets", "decay"]) == 0
    assert "b.variant = zero" in capsys.readouterr().out


def test_csv_phi_preset(tmp_path):
    lines = ["theta,modal_1,modal_2", "-1,0.5,0", "0,1,0.1"]
    (tmp_path / "phi.csv").write_text("\n".join(lines) + "\n")
    cfg = tmp_path / "c.cfg"
    cfg.write_text(SMALL.replace("phi.preset = parabola", "phi.preset = csv\nphi.csv = phi.csv"))
    spec, _, _ = ScenarioConfig.load(cfg).build()
    assert spec.phi.at_zero[:3].tolist() == [1.0, 0.1, 0.0]
    assert math.isclose(spec.phi.r, 1.0)
