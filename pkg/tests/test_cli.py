import csv
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from ioncool import __version__
from ioncool.cli import main
from ioncool.config import load, loads, shipped_configs
from ioncool.errors import ConfigError

TINY_QMC = {
    "nu_units": True,
    "modes": {"n_com_max": 6, "n_rel_max": 4},
    "lamb_dicke": {"eta_com": 0.3},
    "laser": {"omega_1": 0.04, "detuning": -1.0, "gamma": 0.2},
    "initial": {"kind": "flat", "cutoff": 3.0},
    "solver": "qmc",
    "qmc": {"n_traj": 70, "t_final": 10.0, "n_out": 5, "master_seed": 17},
}


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return header, rows


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return str(p)


def test_shipped_configs_validate():
    names = shipped_configs()
    assert names == sorted(f"fig{i}" for i in range(1, 11))
    for n in names:
        run = load(n)
        assert run.data["nu_units"] is True


def test_dos_total_matches_enumeration(tmp_path):
    assert main(["dos", "--grid", "0.3333", "--emax", "20", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "dos.csv")
    total = sum(float(r["value"]) for r in rows)
    top = len(rows) * 0.3333
    brute = sum(1 for a in range(40) for b in range(40) if a + math.sqrt(3) * b < top)
    assert total == brute
    assert header[0] == f"# ioncool {__version__}"


def test_header_echoes_resolved_config(tmp_path):
    assert main(["rate", "--config", "fig2", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "rate_trajectory.csv")
    assert header[1].startswith("# config ")
    echoed = json.loads(header[1][len("# config "):])
    assert echoed == load("fig2").data
    last = rows[-1]
    assert float(last["time_tF"]) == 600 and float(last["mean_n_com"]) < 0.1
    assert (tmp_path / "rate_snapshot_t600.csv").exists()


def test_qmc_outputs_reproducible_across_runs_and_threads(tmp_path):
    cfg = write_config(tmp_path, TINY_QMC)
    outs = []
    for i, threads in enumerate(("1", "1", "2")):
        d = tmp_path / f"run{i}"
        assert main(["qmc", "--config", cfg, "--threads", threads, "--out", str(d), "--jump-log"]) == 0
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert set(outs[0]) == {"qmc_ensemble.csv", "qmc_population.csv", "qmc_jumps.csv"}
    assert outs[0] == outs[1] == outs[2]
    d = tmp_path / "seeded"
    assert main(["qmc", "--config", cfg, "--seed", "18", "--out", str(d)]) == 0
    assert (d / "qmc_ensemble.csv").read_bytes() != outs[0]["qmc_ensemble.csv"]
    assert "# master_seed 18" in (d / "qmc_ensemble.csv").read_text()


def test_full_precision_values(tmp_path):
    cfg = write_config(tmp_path, TINY_QMC)
    main(["qmc", "--config", cfg, "--out", str(tmp_path)])
    _, rows = read_csv(tmp_path / "qmc_ensemble.csv")
    v = rows[-1]["mean_n_com"]
    assert float(v) == float(f"{float(v):.17g}")


def test_invalid_config_reports_field_and_line(tmp_path, capsys):
    bad = '{\n  "nu_units": true,\n  "laser": {\n    "gamma": -1\n  }\n}\n'
    p = tmp_path / "bad.json"
    p.write_text(bad)
    assert main(["rate", "--config", str(p)]) == 2
    err = capsys.readouterr().err
    assert "laser/gamma" in err and "bad.json:4" in err
    with pytest.raises(ConfigError):
        loads('{"modes": {"n_com_max": 5}}')   # units flag missing


def test_missing_config_and_bad_flags(tmp_path, capsys):
    assert main(["rate", "--config", str(tmp_path / "nope.json")]) == 2
    assert main(["qmc", "--config", "fig5", "--seed", "-1"]) == 2
    assert main(["rate", "--threads", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["bogus"])


def test_thermal_needs_its_parameter():
    with pytest.raises(ConfigError):
        loads('{"nu_units": true, "initial": {"kind": "thermal"}}')


def test_leakage_breach_exits_numerically(tmp_path, capsys):
    doc = {"nu_units": True, "modes": {"n_com_max": 6, "n_rel_max": 4}, "lamb_dicke": {"eta_com": 0.6},
           "laser": {"omega_1": 0.034, "detuning": 2.0, "gamma": 0.2},
           "initial": {"kind": "flat", "cutoff": 4.0}, "rate": {"t_final": 200.0, "n_out": 3}}
    assert main(["rate", "--config", write_config(tmp_path, doc), "--out", str(tmp_path)]) == 3
    assert "leakage" in capsys.readouterr().err


def test_diagnose_json_carries_meta(tmp_path):
    doc = {"nu_units": True, "lamb_dicke": {"eta_com": 0.6},
           "laser": {"omega_1": 0.0034, "detuning": -2.0, "gamma": 0.02},
           "diagnose": {"trap": {"mass_amu": 40.0, "trap_freq_hz": 1e6, "charge_e": 1.0, "j": 100}}}
    assert main(["diagnose", "--config", write_config(tmp_path, doc), "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "diagnose.json").read_text())
    assert out["meta"]["version"] == __version__
    assert {6, 7} <= {e["n_rel"] for e in out["trapping"]["entries"]}
    assert out["anharmonicity"]["valid"] is True


def test_spectrum_subcommand(tmp_path):
    assert main(["spectrum", "--config", "fig2", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "spectrum.csv")
    centers = np.array([float(r["bin_center"]) for r in rows])
    values = np.array([float(r["value"]) for r in rows])
    # carrier dominates in the Lamb-Dicke regime
    assert abs(centers[np.argmax(values)]) < 0.1


def test_console_entry_point_and_log_env(tmp_path):
    env = dict(os.environ, IONCOOL_LOG="INFO")
    proc = subprocess.run([sys.executable, "-m", "ioncool.cli", "dos", "--out", str(tmp_path)],
                          capture_output=True, text=True, env=env, timeout=120)
    assert proc.returncode == 0
    assert "wrote" in proc.stderr


@pytest.mark.slow
def test_shipped_configs_reproduce_bytewise(tmp_path):
    """Cheap shipped runs verbatim; QMC configs shrunk to a few short trajectories."""
    jobs = [("dos", "fig1"), ("rate", "fig2"), ("spectrum", "fig4")]
    for name in ("fig3", "fig5", "fig6", "fig8", "fig9", "fig10"):
        data = load(name).data
        data["qmc"].update(n_traj=4, t_final=5.0, n_out=3)
        data["rate"].update(t_final=5.0, n_out=3, single_ion_control=False)
        data["outputs"]["snapshot_times"] = []
        jobs.append(("qmc", write_config(tmp_path, data, f"{name}.json")))
    for cmd, cfg in jobs:
        runs = []
        for k in range(2):
            d = tmp_path / f"{os.path.basename(cfg)}-{k}"
            assert main([cmd, "--config", cfg, "--out", str(d)]) == 0, cfg
            runs.append({p.name: p.read_bytes() for p in d.iterdir()})
        assert runs[0] and runs[0] == runs[1], cfg
