"""Rate-equation cooling in the Lamb-Dicke regime.

With eta_com = 0.1 and the laser one trap quantum to the red, the COM mode
is cooled to the ground state while the stretch mode barely moves.  The
single-ion model with the same eta follows the COM curve at early times.

Run: python3 demos/02_lamb_dicke_cooling.py
"""
import numpy as np

from ioncool.config import load
from ioncool.rate import build_rate_matrix, evolve_populations, single_ion_rate_model, steady_state

run = load("fig2")
times = np.linspace(0, 600, 13)

r = build_rate_matrix(run.modes, run.lds, run.laser)
two = evolve_populations(r, run.initial, times)

single = single_ion_rate_model(run.lds.eta_com, run.laser, run.modes.n_com_max)
one = evolve_populations(single, run.initial.com_marginal(), times)

print(" t/t_F   <n_com>   <n_rel>   single ion")
for t, a, b, c in zip(times, two.mean_n_com, two.mean_n_rel, one.mean_n_com):
    print(f"{t:6.0f}  {a:8.4f}  {b:8.4f}  {c:8.4f}")

print("worst truncation leakage:", f"{two.leakage.max():.2e}")

# the long-time limit from the null space of the generator
ss = steady_state(r)
print("steady state <n_com>, <n_rel>:", tuple(round(x, 4) for x in ss.mean_n()))
