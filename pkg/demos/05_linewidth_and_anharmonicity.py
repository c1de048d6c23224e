"""Cooling time against linewidth, and how harmonic the stretch mode is.

Run: python3 demos/05_linewidth_and_anharmonicity.py
"""
import math

import numpy as np
from scipy import constants

from ioncool.config import load
from ioncool.diagnostics import CALCIUM_40_MASS, anharmonicity_check, cooling_time_summary
from ioncool.rate import build_rate_matrix, evolve_populations

run = load("fig7")
sec = run.section("diagnose")
grid = np.linspace(0, 3000, 3001)

runs = []
for g in sec["gammas"]:
    las = run.laser.replace(gamma=g, omega_1=sec["omega_over_gamma"] * g)
    runs.append((las, evolve_populations(build_rate_matrix(run.modes, run.lds, las), run.initial, grid)))

print("gamma   cycles to <n_com> < 0.5")
for row in cooling_time_summary(runs, sec["target"]):
    print(f"{row.gamma:5.2f}   {row.crossing:8.1f}")

# two calcium ions in a 1 MHz trap
for j in (10, 50, 100):
    rep = anharmonicity_check(CALCIUM_40_MASS, 2 * math.pi * 1e6, constants.elementary_charge, j)
    print(f"j={j:3d}: x0={rep.x0 * 1e6:.2f} um  j_max={rep.j_max:.0f}  "
          f"cubic correction={rep.correction_at_j:.3g} h nu_r  valid={rep.valid}")
