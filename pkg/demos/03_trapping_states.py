"""Trapping states outside the Lamb-Dicke regime.

At eta_com = 0.6, two quanta to the red and a narrow line, states with
n_rel = 6 or 7 have almost no resonant coupling: the stretch carrier
nearly vanishes there.  A broad line washes the effect out.

Run: python3 demos/03_trapping_states.py   (about a minute)
"""

from ioncool.config import load
from ioncool.diagnostics import find_trapping_states
from ioncool.qmc import QMCConfig, ensemble_run

narrow = load("fig5")
broad = load("fig6")

rep = find_trapping_states(narrow.modes, narrow.lds, narrow.laser)
print(f"narrow line: {len(rep.entries)} trapping states below {rep.threshold:.2e}")
for e in rep.entries[:8]:
    tgt = ", ".join(f"({t.n_com},{t.n_rel})" for t in e.targets)
    print(f"  ({e.state.n_com:2d},{e.state.n_rel:2d})  coupling {e.coupling:.2e}  -> {tgt}")

rep_b = find_trapping_states(broad.modes, broad.lds, broad.laser, threshold=rep.threshold)
print(f"broad line, same threshold: {len(rep_b.entries)} entries")

# quantum-jump runs show the stalled population directly (small ensembles, coarse output)
for run, t_final in ((narrow, 1000.0), (broad, 300.0)):
    cfg = QMCConfig(run.modes, run.lds, run.laser, run.initial, t_final, 6)
    res = ensemble_run(cfg, 24, master_seed=1)
    tail = res.population[:, 6:8].sum()
    print(f"gamma={run.laser.gamma}: <n_com>={res.mean_n_com[-1]:.2f}  weight at n_rel in (6,7): {tail:.3f}")
