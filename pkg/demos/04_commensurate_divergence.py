"""When do rate equations fail?

For mode frequencies (1, sqrt 3) coherences between motional states
dephase and the rate equations agree with quantum jumps.  For (1, 2) the
two modes are degenerate and coherent superpositions survive, so the two
descriptions part ways.

Run: python3 demos/04_commensurate_divergence.py   (a few minutes)
"""
from ioncool.config import load
from ioncool.qmc import QMCConfig, commensurate_control_run, compare_with_rate

run = load("fig8")
sec = run.section("qmc")
cfg = QMCConfig(run.modes, run.lds, run.laser, run.initial, 300.0, 11)

inc = compare_with_rate(cfg, 64, master_seed=sec["master_seed"])
com = commensurate_control_run(cfg, 64, master_seed=sec["master_seed"], freqs=(1.0, 2.0))

for name, res in (("(1, sqrt 3)", inc), ("(1, 2)", com)):
    print(f"{name:12s} QMC {res.qmc.mean_n_com[-1]:.3f} +- {res.qmc.se_n_com[-1]:.3f}"
          f"   rate {res.rate.mean_n_com[-1]:.3f}   terminal z {res.terminal_z:+.1f}   {res.verdict}")
