"""Trapping-state search, cooling-time tables and the harmonic-validity check."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import constants

from .errors import InputError
from .fock import FockIndex, LambDickeSet, ModeSpec, equilibrium_distance, kick_operator
from .rate import LaserConfig

log = logging.getLogger(__name__)

# Resonance sets stop being sharp once the line covers a sizeable part of a trap quantum.
BROAD_LINE = 0.5
DEFAULT_RELATIVE_THRESHOLD = 1e-2


@dataclass(frozen=True)
class TrappingEntry:
    state: FockIndex
    targets: tuple
    coupling: float


@dataclass(frozen=True, eq=False)
class TrappingReport:
    entries: list
    threshold: float
    mean_coupling: float
    warnings: list = field(default_factory=list)

    def states(self) -> set:
        return {(e.state.n_com, e.state.n_rel) for e in self.entries}

    def to_json(self) -> str:
        doc = {
            "threshold": self.threshold,
            "mean_coupling": self.mean_coupling,
            "warnings": list(self.warnings),
            "entries": [{"n_com": e.state.n_com, "n_rel": e.state.n_rel, "coupling": e.coupling,
                         "targets": [[t.n_com, t.n_rel] for t in e.targets]} for e in self.entries],
        }
        return json.dumps(doc, indent=2)


def resonant_targets(modes: ModeSpec, laser: LaserConfig) -> np.ndarray:
    """Boolean (size, size) table: [n, l] is True when |n> -> |l> absorbs within gamma of resonance.

    Absorbing a photon of detuning delta (red is negative) while going
    n -> l needs (l - n).v = delta, so the test is |(l - n).v - delta| < gamma.
    """
    e = modes.energies()
    return np.abs(e[None, :] - e[:, None] - laser.detuning) < laser.gamma


def find_trapping_states(modes: ModeSpec, lds: LambDickeSet, laser: LaserConfig,
                         threshold: float | None = None) -> TrappingReport:
    """States whose summed near-resonant coupling nearly vanishes.

    States in the ground band are skipped: those with no resonant target
    that lowers one mode without raising the other, so there is nothing to
    be trapped out of. Without an explicit ``threshold`` the cutoff is 1% of the mean coupling
    over the states that do have targets.
    """
    warnings = []
    if laser.gamma > BROAD_LINE:
        msg = f"linewidth {laser.gamma:g} exceeds {BROAD_LINE} trap quanta; resonance sets are broad"
        log.warning(msg)
        warnings.append(msg)
    res = resonant_targets(modes, laser)
    kick = kick_operator(modes, lds, 1, lds.cos_theta)
    # coupling[n] = sum_l |<l|K|n>|^2 over resonant l
    prob = kick.probabilities.T
    coupling = np.where(res, prob, 0.0).sum(axis=1)
    n0, nr = modes.indices()
    lower = (n0[None, :] <= n0[:, None]) & (nr[None, :] <= nr[:, None])
    has = (res & lower).any(axis=1)
    if not has.any():
        msg = "no state has a resonant cooling transition; check detuning and linewidth"
        log.warning(msg)
        warnings.append(msg)
        return TrappingReport([], float(threshold or 0.0), 0.0, warnings)
    mean = float(coupling[has].mean())
    cut = DEFAULT_RELATIVE_THRESHOLD * mean if threshold is None else float(threshold)
    if cut < 0:
        raise InputError("threshold must be non-negative")
    entries = []
    for i in np.flatnonzero(has & (coupling < cut)):
        targets = tuple(FockIndex(int(n0[j]), int(nr[j])) for j in np.flatnonzero(res[i]))
        entries.append(TrappingEntry(FockIndex(int(n0[i]), int(nr[i])), targets, float(coupling[i])))
    return TrappingReport(entries, cut, mean, warnings)


@dataclass(frozen=True)
class CoolingTime:
    gamma: float
    crossing: float
    reached: bool
    final_value: float


def first_crossing(times, values, target: float) -> float:
    """First time the curve is at or below ``target`` (linear interpolation); nan if never."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    below = np.flatnonzero(v <= target)
    if below.size == 0:
        return math.nan
    i = int(below[0])
    if i == 0:
        return float(t[0])
    frac = (v[i - 1] - target) / (v[i - 1] - v[i])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def cooling_time_summary(runs, target: float, ratio_tol: float = 1e-6) -> list:
    """Crossing time of <n_com> below ``target`` for each (LaserConfig, trajectory) pair.

    Trajectories carry ``times`` (in units of their own t_F) and
    ``mean_n_com``. All runs must share Omega/gamma; the table is sorted by gamma.
    """
    runs = list(runs)
    if not runs:
        raise InputError("no trajectories given")
    ratios = [las.omega_max / las.gamma for las, _ in runs]
    if max(ratios) - min(ratios) > ratio_tol * max(ratios):
        raise InputError(f"runs must share Omega/gamma, got {sorted(set(ratios))}")
    out = []
    for las, traj in sorted(runs, key=lambda r: r[0].gamma):
        t = first_crossing(traj.times, traj.mean_n_com, target)
        out.append(CoolingTime(las.gamma, t, not math.isnan(t), float(traj.mean_n_com[-1])))
    return out


def summary_csv_rows(table) -> list:
    return [asdict(row) for row in table]


@dataclass(frozen=True)
class AnharmonicityReport:
    """Size of the leading Coulomb anharmonicity of the stretch mode.

    ``correction_at_j`` is in units of h-bar nu_r; ``x0`` and ``length`` in metres.
    """

    x0: float
    length: float
    psi: float
    m0: int
    j: int
    j_max: float
    correction_at_j: float

    @property
    def valid(self) -> bool:
        return self.psi < 1.0 and self.j < self.j_max


def anharmonicity_check(mass: float, trap_freq: float, charge: float, j: int,
                        m0: int | None = None) -> AnharmonicityReport:
    """Compare the cubic Coulomb term with h-bar nu_r at stretch occupation ``j``.

    SI inputs: single-ion mass (kg), angular axial frequency (rad/s), charge (C).
    ``m0`` is the largest occupation the geometric bound must cover (default ``j``).
    A vanishing charge gives the harmonic limit (no correction, infinite j_max).
    """
    if j < 0:
        raise InputError("j must be non-negative")
    if not (mass > 0 and trap_freq > 0):
        raise InputError("mass and trap frequency must be positive")
    m0 = j if m0 is None else int(m0)
    mu = mass / 2.0
    nu_r = math.sqrt(3.0) * trap_freq
    length = math.sqrt(constants.hbar / (2.0 * mu * nu_r))
    if charge == 0:
        return AnharmonicityReport(0.0, length, math.inf, m0, j, math.inf, 0.0)
    x0 = equilibrium_distance(mass, trap_freq, charge)
    coulomb = charge ** 2 / (4.0 * math.pi * constants.epsilon_0)
    quantum = constants.hbar * nu_r
    j_max = (quantum / (coulomb / x0)) ** (2.0 / 3.0) * (x0 / length) ** 2
    correction = coulomb / x0 ** 4 * length ** 3 * j ** 1.5 / quantum
    psi = length / x0 * math.sqrt(m0)
    return AnharmonicityReport(x0, length, psi, m0, j, j_max, correction)


CALCIUM_40_MASS = 39.962591 * constants.atomic_mass
