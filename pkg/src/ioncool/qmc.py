"""Quantum-jump (Monte Carlo wavefunction) unraveling of the cooling master equation.

Between jumps a trajectory evolves under the non-Hermitian effective
Hamiltonian

    H_eff = -delta sum_j |e><e|_j + nu a0^+ a0 + nu_r ar^+ ar + V - i gamma/2 sum_j sigma_j^+ sigma_j,

with V = sum_j Omega_j/2 [sigma_j^+ K_j^+ + sigma_j K_j] and K_j the kick
exp(i k cos(theta) x_j). A jump on ion j applies sigma_j followed by the recoil
exp(i k u x_j) with u drawn from the emission pattern.

Propagation is exact: exp(-i H_eff h) is tabulated for h = dt 2^k, k = 0..K,
and the waiting time is located by bisection on that ladder (the squared
norm is monotone between jumps). Trajectories in a batch march in lockstep so
the propagator acts on many state vectors per matrix product.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import multiprocessing

import numpy as np
from scipy import linalg, optimize

from . import emission
from .errors import InputError, StepError, TrajectoryError
from .fock import FockIndex, LambDickeSet, ModeSpec, displacement_matrix, kick_operator
from .rate import CoolingTrajectory, LaserConfig
from .spectrum import StateDistribution

log = logging.getLogger(__name__)

BATCH_SIZE = 64
MAX_NORM_DROP = 0.1
# top ladder step in units of t_F; balances lockstep products against bisection depth
COARSE_STEP = 1.0

# internal-state labels; ion 1 first
TWO_LEVEL = ("g", "e")
FOUR_LEVEL = ("gg", "eg", "ge", "ee")


@dataclass(frozen=True)
class JointBasis:
    """Internal (x) COM (x) stretch basis, flattened internal-major."""

    modes: ModeSpec
    internal: tuple[str, ...]

    @classmethod
    def for_laser(cls, modes: ModeSpec, laser: LaserConfig) -> "JointBasis":
        return cls(modes, FOUR_LEVEL if laser.omega_2 > 0 else TWO_LEVEL)

    @property
    def n_internal(self) -> int:
        return len(self.internal)

    @property
    def dim(self) -> int:
        return self.n_internal * self.modes.size

    def index(self, internal: str, n: FockIndex) -> int:
        return self.internal.index(internal) * self.modes.size + self.modes.index(n.n_com, n.n_rel)

    def unflatten(self, i: int) -> tuple[str, FockIndex]:
        s, m = divmod(int(i), self.modes.size)
        n0, nr = divmod(m, self.modes.n_rel_max)
        return self.internal[s], FockIndex(n0, nr)

    def excited_count(self) -> np.ndarray:
        return np.array([label.count("e") for label in self.internal])

    def transitions(self, ion: int) -> list[tuple[int, int]]:
        """(ground, excited) internal index pairs connected by sigma_ion."""
        pos = ion - 1
        pairs = []
        for gi, label in enumerate(self.internal):
            if label[pos] == "g":
                up = label[:pos] + "e" + label[pos + 1:]
                pairs.append((gi, self.internal.index(up)))
        return pairs


@dataclass(frozen=True, eq=False)
class EffectiveHamiltonian:
    matrix: np.ndarray = field(repr=False)
    basis: JointBasis
    lds: LambDickeSet
    laser: LaserConfig

    @property
    def hermitian_part(self) -> np.ndarray:
        return 0.5 * (self.matrix + self.matrix.conj().T)

    @property
    def antihermitian_part(self) -> np.ndarray:
        return 0.5 * (self.matrix - self.matrix.conj().T)


def build_effective_hamiltonian(modes: ModeSpec, lds: LambDickeSet, laser: LaserConfig) -> EffectiveHamiltonian:
    """Dense H_eff on the joint basis; energy zero at |g, (0, 0)>."""
    basis = JointBasis.for_laser(modes, laser)
    m = modes.size
    ne = basis.excited_count()
    diag = (np.repeat(-laser.detuning * ne - 0.5j * laser.gamma * ne, m)
            + np.tile(modes.energies(), basis.n_internal))
    h = np.diag(diag.astype(complex))
    for ion, omega in ((1, laser.omega_1), (2, laser.omega_2)):
        if omega == 0:
            continue
        k = kick_operator(modes, lds, ion, laser.cos_theta).matrix
        for g, e in basis.transitions(ion):
            h[e * m:(e + 1) * m, g * m:(g + 1) * m] += 0.5 * omega * k.conj().T
            h[g * m:(g + 1) * m, e * m:(e + 1) * m] += 0.5 * omega * k
    h.flags.writeable = False
    return EffectiveHamiltonian(h, basis, lds, laser)


def default_dt(modes: ModeSpec, laser: LaserConfig) -> float:
    """Finest time resolution for locating jumps."""
    cands = [0.02 / laser.gamma, 0.05 / max(modes.freq_com, modes.freq_rel)]
    if laser.omega_max > 0:
        cands.append(0.02 / laser.omega_max)
    return min(cands)


class Propagator:
    """exp(-i H_eff dt 2^k) for k = 0..levels, built by repeated squaring."""

    def __init__(self, h_eff: EffectiveHamiltonian, dt: float, levels: int):
        if dt <= 0 or levels < 0:
            raise InputError("need dt > 0 and levels >= 0")
        self.dt = float(dt)
        self.levels = int(levels)
        u = linalg.expm(-1j * dt * np.asarray(h_eff.matrix))
        mats = [u]
        for _ in range(levels):
            u = u @ u
            mats.append(u)
        self.mats = mats

    def step(self, level: int) -> float:
        return self.dt * 2 ** level


@dataclass
class JumpRecord:
    time: float
    ion: int
    u: float


@dataclass
class TrajectoryTrace:
    """Observables of one trajectory at the output ticks (times in 1/nu)."""

    times: np.ndarray
    n_com: np.ndarray
    n_rel: np.ndarray
    jumps: list
    final_state: np.ndarray = field(repr=False)  # normalised conditional state


class _Jumper:
    """Applies sigma_j then the recoil kick exp(i k u x_j) to single state vectors."""

    def __init__(self, basis: JointBasis, lds: LambDickeSet, pattern: str, ions, gamma: float):
        self.basis = basis
        self.lds = lds
        self.pattern = pattern
        self.ions = tuple(ions)
        self.gamma = gamma
        self.excited = basis.excited_count().astype(float)
        self.maps = {ion: basis.transitions(ion) for ion in range(1, len(basis.internal[0]) + 1)}

    def excited_weights(self, psi: np.ndarray) -> np.ndarray:
        blocks = psi.reshape(self.basis.n_internal, -1)
        pops = np.einsum("ij,ij->i", blocks.conj(), blocks).real
        return np.array([sum(pops[e] for _, e in self.maps.get(ion, ())) for ion in (1, 2)])

    def decay_rate(self, psi: np.ndarray) -> float:
        """-d|psi|^2/dt = gamma <psi|P_e|psi>, P_e counting excited ions."""
        blocks = psi.reshape(self.basis.n_internal, -1)
        pops = np.einsum("ij,ij->i", blocks.conj(), blocks).real
        return self.gamma * float(self.excited @ pops)

    def crossing(self, psi_a, norm_a, psi_b, norm_b, r, dt) -> float:
        """Fraction of the finest step at which |psi|^2 falls to ``r``.

        Cubic Hermite interpolation of the norm from its end values and slopes;
        the resulting time error is O(dt^4).
        """
        da, db = -self.decay_rate(psi_a) * dt, -self.decay_rate(psi_b) * dt

        def f(s):
            s2, s3 = s * s, s * s * s
            return ((2 * s3 - 3 * s2 + 1) * norm_a + (s3 - 2 * s2 + s) * da
                    + (-2 * s3 + 3 * s2) * norm_b + (s3 - s2) * db - r)

        if f(0.0) <= 0:
            return 0.0
        if f(1.0) >= 0:
            return 1.0
        return float(optimize.brentq(f, 0.0, 1.0, xtol=1e-12))

    def apply(self, psi: np.ndarray, rng: np.random.Generator, t: float) -> tuple[np.ndarray, JumpRecord]:
        w = self.excited_weights(psi)
        if w.sum() <= 0:
            raise StepError(f"jump requested at t={t} but no excited-state weight remains")
        ion = 1 if rng.random() * w.sum() < w[0] else 2
        u = float(emission.sample(self.pattern, rng))
        modes = self.basis.modes
        n0, nr = modes.shape
        sign = 1.0 if ion == 1 else -1.0
        d0 = displacement_matrix(u * self.lds.eta_com, n0).entries
        dr = displacement_matrix(sign * u * self.lds.eta_rel, nr).entries
        blocks = psi.reshape(self.basis.n_internal, n0, nr)
        out = np.zeros_like(blocks)
        for g, e in self.maps[ion]:
            out[g] = d0 @ blocks[e] @ dr.T
        out = out.reshape(-1)
        out /= np.linalg.norm(out)
        return out, JumpRecord(t, ion, u)


def _run_batch(h_eff: EffectiveHamiltonian, prop: Propagator, psi0: np.ndarray,
               rngs: list, n_coarse: int, record_every: int, jumper: _Jumper):
    """March a batch of trajectories; returns per-trajectory traces.

    ``psi0`` has shape (dim, B). The march covers ``n_coarse`` steps of the top
    ladder level, recording observables every ``record_every`` steps.
    """
    basis = h_eff.basis
    K = prop.levels
    top = 2 ** K
    psi = np.array(psi0, dtype=complex, order="F")
    nb = psi.shape[1]
    thresholds = np.array([rng.random() for rng in rngs])
    ticks = np.zeros(nb, dtype=np.int64)
    caps = np.full(nb, K)
    n0_idx, nr_idx = basis.modes.indices()
    n0_full = np.tile(n0_idx, basis.n_internal).astype(float)
    nr_full = np.tile(nr_idx, basis.n_internal).astype(float)
    n_rec = n_coarse // record_every + 1
    rec_n0 = np.empty((n_rec, nb))
    rec_nr = np.empty((n_rec, nb))
    jumps = [[] for _ in range(nb)]

    def record(slot):
        w = np.abs(psi) ** 2
        norm = w.sum(axis=0)
        rec_n0[slot] = n0_full @ w / norm
        rec_nr[slot] = nr_full @ w / norm

    record(0)
    for step in range(1, n_coarse + 1):
        target = step * top
        active = np.arange(nb)
        while active.size:
            rem = target - ticks[active]
            # largest power of two that fits; a failed step lowers the cap (bisection)
            lvl = np.minimum(np.frexp(rem.astype(float))[1] - 1, caps[active])
            for k in np.unique(lvl)[::-1]:
                idx = active[lvl == k]
                trial = prop.mats[k] @ psi[:, idx]
                norms = np.einsum("ij,ij->j", trial.conj(), trial).real
                ok = norms > thresholds[idx]
                good = idx[ok]
                psi[:, good] = trial[:, ok]
                ticks[good] += 2 ** k
                caps[good] = K
                bad = idx[~ok]
                if k > 0:
                    caps[bad] = k - 1
                    continue
                for j, b in zip(np.flatnonzero(~ok), bad):
                    before = np.vdot(psi[:, b], psi[:, b]).real
                    if (before - norms[j]) > MAX_NORM_DROP * before:
                        raise StepError(f"norm fell by {(before - norms[j]) / before:.3g} in one step "
                                        f"of {prop.dt:g}; reduce dt")
                    t_jump = (ticks[b] + jumper.crossing(psi[:, b], before, trial[:, j], norms[j],
                                                         thresholds[b], prop.dt)) * prop.dt
                    ticks[b] += 1
                    new, rec = jumper.apply(trial[:, j], rngs[b], t_jump)
                    psi[:, b] = new
                    jumps[b].append(rec)
                    thresholds[b] = rngs[b].random()
                    caps[b] = K
            active = active[ticks[active] < target]
        if step % record_every == 0:
            record(step // record_every)
    return rec_n0, rec_nr, jumps, psi


def run_trajectory(h_eff: EffectiveHamiltonian, psi0: np.ndarray, t_final: float, dt: float,
                   seed, n_out: int = 2, pattern: str | None = None) -> TrajectoryTrace:
    """One quantum-jump trajectory from ``psi0`` up to ``t_final`` (units of 1/nu).

    Observables are recorded on ``n_out`` equally spaced times including 0
    and ``t_final``. The waiting time is located to within one step of at
    most ``dt`` and the recorded jump time is refined inside that step.
    """
    return run_trajectories(h_eff, [psi0], t_final, dt, [seed], n_out, pattern)[0]


def run_trajectories(h_eff: EffectiveHamiltonian, psi0s, t_final: float, dt: float, seeds,
                     n_out: int = 2, pattern: str | None = None) -> list[TrajectoryTrace]:
    """Many independent trajectories sharing one propagator ladder; ``seeds[i]`` drives trajectory i."""
    psi0s = np.atleast_2d(np.asarray(psi0s, dtype=complex))
    if psi0s.shape[1] != h_eff.basis.dim or len(seeds) != psi0s.shape[0]:
        raise InputError("need one seed per initial state, each matching the joint basis")
    if np.any(np.abs(np.linalg.norm(psi0s, axis=1) - 1.0) > 1e-10):
        raise InputError("initial states must be normalised")
    plan = _TimePlan.make(t_final, n_out, dt, coarse_target=None)
    prop = Propagator(h_eff, plan.dt, plan.levels)
    jumper = _Jumper(h_eff.basis, h_eff.lds, pattern or h_eff.laser.pattern, _ions(h_eff.laser),
                     h_eff.laser.gamma)
    out = []
    for a in range(0, len(seeds), BATCH_SIZE):
        rngs = [np.random.default_rng(sd) for sd in seeds[a:a + BATCH_SIZE]]
        n0, nr, jumps, psi = _run_batch(h_eff, prop, psi0s[a:a + BATCH_SIZE].T, rngs, plan.n_coarse,
                                        plan.record_every, jumper)
        psi = psi / np.linalg.norm(psi, axis=0)
        out += [TrajectoryTrace(plan.out_times, n0[:, c], nr[:, c], jumps[c], psi[:, c])
                for c in range(len(rngs))]
    return out


def _ions(laser: LaserConfig):
    return tuple(j for j, om in ((1, laser.omega_1), (2, laser.omega_2)) if om > 0)


@dataclass(frozen=True)
class _TimePlan:
    dt: float
    levels: int
    n_coarse: int
    record_every: int
    out_times: np.ndarray

    @classmethod
    def make(cls, t_final: float, n_out: int, dt: float, coarse_target: float | None):
        if not t_final > 0:
            raise InputError("t_final must be positive")
        if n_out < 2:
            raise InputError("need at least two output times")
        spacing = t_final / (n_out - 1)
        per = 1 if coarse_target is None else max(1, math.ceil(spacing / coarse_target))
        coarse = spacing / per
        levels = max(0, math.ceil(math.log2(coarse / dt)))
        return cls(coarse / 2 ** levels, levels, per * (n_out - 1), per,
                   np.linspace(0.0, t_final, n_out))


@dataclass(frozen=True)
class QMCConfig:
    """Everything an ensemble run needs; times in units of t_F."""

    modes: ModeSpec
    lds: LambDickeSet
    laser: LaserConfig
    initial: StateDistribution
    t_final: float
    n_out: int = 31
    dt: float | None = None

    def __post_init__(self):
        if self.initial.modes.shape != self.modes.shape:
            raise InputError("initial distribution basis differs from the mode basis")

    @property
    def t_fluorescence(self) -> float:
        return self.laser.t_fluorescence


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Ensemble averages; ``times`` in units of t_F, ``population`` over ``modes.shape``."""

    times: np.ndarray
    mean_n_com: np.ndarray
    se_n_com: np.ndarray
    mean_n_rel: np.ndarray
    se_n_rel: np.ndarray
    population: np.ndarray = field(repr=False)
    n_traj: int
    master_seed: int
    modes: ModeSpec
    jumps: list = field(default_factory=list, repr=False)
    samples_n_com: np.ndarray | None = field(default=None, repr=False)

    @property
    def boundary_weight(self) -> float:
        p = self.population
        return float(p[-1, :].sum() + p[:, -1].sum() - p[-1, -1])

    def jump_log(self) -> np.ndarray:
        """Rows (trajectory, time [1/nu], ion, u) over the whole ensemble."""
        rows = [(i, j.time, j.ion, j.u) for i, js in enumerate(self.jumps) for j in js]
        return np.array(rows, dtype=float).reshape(-1, 4)


# Set in the parent before forking workers so children inherit the propagator.
_SHARED = {}


def _chunk_worker(args):
    start, stop = args
    s = _SHARED
    return _simulate_chunk(s["h"], s["prop"], s["config"], s["plan"], s["seeds"], start, stop)


def _simulate_chunk(h_eff, prop, config: QMCConfig, plan, seeds, start, stop):
    basis = h_eff.basis
    rngs = [np.random.default_rng(seeds[i]) for i in range(start, stop)]
    psi0 = np.zeros((basis.dim, stop - start), dtype=complex)
    for col, rng in enumerate(rngs):
        psi0[int(config.initial.sample(rng)), col] = 1.0  # ground internal state is index 0
    jumper = _Jumper(basis, config.lds, config.laser.pattern, _ions(config.laser), config.laser.gamma)
    try:
        n0, nr, jumps, psi = _run_batch(h_eff, prop, psi0, rngs, plan.n_coarse, plan.record_every, jumper)
    except Exception as exc:  # noqa: BLE001 - re-raised with the trajectory range
        raise TrajectoryError(f"trajectories {start}..{stop - 1}: {exc}", trajectory=start) from exc
    w = (np.abs(psi) ** 2).reshape(basis.n_internal, basis.modes.size, -1).sum(axis=0)
    w /= w.sum(axis=0)
    return n0, nr, jumps, w


def ensemble_run(config: QMCConfig, n_traj: int, master_seed: int, threads: int = 1,
                 batch_size: int = BATCH_SIZE) -> EnsembleResult:
    """Average ``n_traj`` trajectories whose initial Fock states are drawn from ``config.initial``.

    Trajectory i uses the i-th child of ``SeedSequence(master_seed)``, and
    trajectories are grouped into fixed chunks of ``batch_size``, so results
    do not depend on ``threads``.
    """
    if n_traj < 2:
        raise InputError("need at least two trajectories for error bars")
    tf = config.t_fluorescence
    if not math.isfinite(tf):
        raise InputError("ensemble runs need a nonzero Rabi frequency to define t_F")
    h_eff = build_effective_hamiltonian(config.modes, config.lds, config.laser)
    dt = config.dt or default_dt(config.modes, config.laser)
    plan = _TimePlan.make(config.t_final * tf, config.n_out, dt, coarse_target=COARSE_STEP * tf)
    prop = Propagator(h_eff, plan.dt, plan.levels)
    seeds = np.random.SeedSequence(master_seed).spawn(n_traj)
    chunks = [(s, min(s + batch_size, n_traj)) for s in range(0, n_traj, batch_size)]
    log.info("QMC: %d trajectories, dim %d, %d ladder levels, dt %.3g", n_traj, h_eff.basis.dim,
             plan.levels, plan.dt)
    if threads > 1 and len(chunks) > 1:
        _SHARED.update(h=h_eff, prop=prop, config=config, plan=plan, seeds=seeds)
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=threads, mp_context=ctx) as pool:
                parts = list(pool.map(_chunk_worker, chunks))
        finally:
            _SHARED.clear()
    else:
        parts = [_simulate_chunk(h_eff, prop, config, plan, seeds, a, b) for a, b in chunks]
    n0 = np.concatenate([p[0] for p in parts], axis=1)
    nr = np.concatenate([p[1] for p in parts], axis=1)
    jumps = [j for p in parts for j in p[2]]
    pops = np.concatenate([p[3] for p in parts], axis=1)
    root = math.sqrt(n_traj)
    return EnsembleResult(
        times=plan.out_times / tf,
        mean_n_com=n0.mean(axis=1), se_n_com=n0.std(axis=1, ddof=1) / root,
        mean_n_rel=nr.mean(axis=1), se_n_rel=nr.std(axis=1, ddof=1) / root,
        population=pops.mean(axis=1).reshape(config.modes.shape),
        n_traj=n_traj, master_seed=master_seed, modes=config.modes, jumps=jumps,
        samples_n_com=n0,
    )


DIVERGENCE_SIGMAS = 5.0
CONSISTENCY_SIGMAS = 3.0


@dataclass(frozen=True, eq=False)
class ControlComparison:
    """Paired quantum-jump and rate-equation runs on one configuration."""

    qmc: EnsembleResult
    rate: CoolingTrajectory
    z_scores: np.ndarray
    terminal_z: float

    @property
    def max_abs_z(self) -> float:
        return float(np.max(np.abs(self.z_scores)))

    @property
    def verdict(self) -> str:
        if self.terminal_z > DIVERGENCE_SIGMAS:
            return "DIVERGENT"
        if self.max_abs_z <= CONSISTENCY_SIGMAS:
            return "CONSISTENT"
        return "INCONCLUSIVE"


def compare_with_rate(config: QMCConfig, n_traj: int, master_seed: int, threads: int = 1) -> ControlComparison:
    """Run both solvers and express their COM gap in ensemble standard errors."""
    from .rate import build_rate_matrix, evolve_populations

    ens = ensemble_run(config, n_traj, master_seed, threads=threads)
    r = build_rate_matrix(config.modes, config.lds, config.laser)
    traj = evolve_populations(r, config.initial, ens.times)
    gap = ens.mean_n_com - traj.mean_n_com
    se = np.where(ens.se_n_com > 0, ens.se_n_com, np.inf)
    z = np.where(gap == 0, 0.0, gap / se)
    return ControlComparison(ens, traj, z, float(z[-1]))


def commensurate_control_run(config: QMCConfig, n_traj: int, master_seed: int,
                             freqs: tuple[float, float] = (1.0, 2.0), threads: int = 1) -> ControlComparison:
    """Rerun ``config`` with the mode frequencies replaced by ``freqs``.

    The COM Lamb-Dicke parameter is kept; the stretch parameter follows the
    new frequency ratio. Truncations are kept, so the initial distribution
    is rebuilt from its own parameters.
    """
    from .fock import lamb_dicke_from_com

    ratio = freqs[1] / freqs[0]
    modes = ModeSpec(config.modes.n_com_max, config.modes.n_rel_max, float(freqs[0]), float(freqs[1]))
    lds = lamb_dicke_from_com(config.lds.eta_com, config.lds.cos_theta, freq_rel=ratio)
    init = config.initial
    if init.kind == "flat":
        init = StateDistribution.flat(modes, init.params["cutoff"])
    elif init.kind == "thermal":
        init = StateDistribution.thermal(modes, **init.params)
    else:
        init = StateDistribution(init.kind, init.params, modes, init.weights)
    cfg = QMCConfig(modes, lds, config.laser, init, config.t_final, config.n_out, config.dt)
    return compare_with_rate(cfg, n_traj, master_seed, threads)


@dataclass(frozen=True)
class DarkOverlap:
    """|<l|K|alpha(t)>| per target and the quarter-period of the relative phase."""

    overlaps: dict
    t_half_pi: float

    @property
    def never_rotates(self) -> bool:
        return math.isinf(self.t_half_pi)


def _dark_operator(modes: ModeSpec, lds: LambDickeSet, illumination: str) -> np.ndarray:
    k1 = kick_operator(modes, lds, 1, lds.cos_theta).matrix
    if illumination == "one":
        return k1
    if illumination == "both":
        return k1 + kick_operator(modes, lds, 2, lds.cos_theta).matrix
    raise InputError(f"illumination must be 'one' or 'both', got {illumination!r}")


def dark_overlap(modes: ModeSpec, lds: LambDickeSet, n: FockIndex, m: FockIndex,
                 a1: float, a2: float, phi: float, targets, t: float = 0.0,
                 illumination: str = "one") -> DarkOverlap:
    """Coupling of |alpha(t)> = a1 e^{-i E_n t}|n> + a2 e^{i phi} e^{-i E_m t}|m> to each target."""
    if n == m:
        raise InputError("superposition needs two distinct Fock states")
    if abs(a1 * a1 + a2 * a2 - 1.0) > 1e-9:
        raise InputError("amplitudes must satisfy a1^2 + a2^2 = 1")
    k = _dark_operator(modes, lds, illumination)
    en = n.n_com * modes.freq_com + n.n_rel * modes.freq_rel
    em = m.n_com * modes.freq_com + m.n_rel * modes.freq_rel
    i, j = modes.index(n.n_com, n.n_rel), modes.index(m.n_com, m.n_rel)
    out = {}
    for l in targets:
        row = k[modes.index(l.n_com, l.n_rel)]
        amp = a1 * np.exp(-1j * en * t) * row[i] + a2 * np.exp(1j * (phi - em * t)) * row[j]
        out[l] = float(abs(amp))
    gap = abs(en - em)
    never = a1 == 0 or a2 == 0 or gap == 0
    return DarkOverlap(out, math.inf if never else math.pi / (2.0 * gap))


def darkest_superposition(modes: ModeSpec, lds: LambDickeSet, n: FockIndex, m: FockIndex,
                          target: FockIndex, illumination: str = "one") -> tuple[float, float, float]:
    """(a1, a2, phi) that makes |alpha(0)> exactly dark to ``target``."""
    k = _dark_operator(modes, lds, illumination)
    row = k[modes.index(target.n_com, target.n_rel)]
    a = row[modes.index(n.n_com, n.n_rel)]
    b = row[modes.index(m.n_com, m.n_rel)]
    norm = math.hypot(abs(a), abs(b))
    if norm == 0:
        return 1.0, 0.0, 0.0
    phi = float(np.angle(a) - np.angle(b) + math.pi)
    return abs(b) / norm, abs(a) / norm, math.remainder(phi, 2 * math.pi)
