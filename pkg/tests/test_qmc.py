import math

import numpy as np
import pytest
from scipy import linalg, optimize

from ioncool.errors import InputError, StepError
from ioncool.fock import FockIndex, ModeSpec, lamb_dicke_from_com
from ioncool.qmc import (
    JointBasis, Propagator, QMCConfig, build_effective_hamiltonian, compare_with_rate,
    dark_overlap, darkest_superposition, default_dt, ensemble_run, run_trajectories, run_trajectory,
)
from ioncool.rate import LaserConfig
from ioncool.spectrum import StateDistribution

SMALL = ModeSpec.two_ion(6, 4)
LASER = LaserConfig(0.034, -1.0, 0.2)


def ground_state(basis, n=FockIndex(0, 0)):
    psi = np.zeros(basis.dim, dtype=complex)
    psi[basis.index(basis.internal[0], n)] = 1.0
    return psi


def test_heff_carrier_element():
    lds = lamb_dicke_from_com(0.1)
    h = build_effective_hamiltonian(SMALL, lds, LASER)
    b = h.basis
    z = FockIndex(0, 0)
    val = h.matrix[b.index("e", z), b.index("g", z)]
    expect = 0.5 * 0.034 * math.exp(-(lds.eta_com ** 2 + lds.eta_rel ** 2) / 2)
    assert abs(val - expect) < 1e-15
    assert h.hermitian_part[b.index("g", z), b.index("g", z)] == 0


def test_heff_antihermitian_part_is_decay_only():
    h = build_effective_hamiltonian(SMALL, lamb_dicke_from_com(0.4), LASER.replace(omega_2=0.02))
    a = h.antihermitian_part / 1j
    ev = np.linalg.eigvalsh(a)
    assert ev.max() < 1e-14
    # -gamma/2 per excited ion on the diagonal, nothing else
    ne = np.repeat(h.basis.excited_count(), SMALL.size)
    assert np.allclose(a, np.diag(-0.1 * ne), atol=1e-15)


def test_heff_without_drive_is_block_diagonal():
    h = build_effective_hamiltonian(SMALL, lamb_dicke_from_com(0.4), LASER.replace(omega_1=0.0))
    assert np.count_nonzero(h.matrix - np.diag(np.diag(h.matrix))) == 0


def test_four_level_basis_transitions():
    b = JointBasis.for_laser(SMALL, LASER.replace(omega_2=0.01))
    assert b.internal == ("gg", "eg", "ge", "ee")
    assert b.transitions(1) == [(0, 1), (2, 3)]
    assert b.transitions(2) == [(0, 2), (1, 3)]
    i = b.index("ge", FockIndex(3, 2))
    assert b.unflatten(i) == ("ge", FockIndex(3, 2))


def test_propagator_ladder_matches_direct_exponential():
    h = build_effective_hamiltonian(SMALL, lamb_dicke_from_com(0.3), LASER)
    p = Propagator(h, 0.05, 6)
    direct = linalg.expm(-1j * 0.05 * 64 * h.matrix)
    assert np.abs(p.mats[6] - direct).max() < 1e-10
    assert p.step(3) == pytest.approx(0.4)


def test_norm_decays_monotonically_between_jumps():
    h = build_effective_hamiltonian(SMALL, lamb_dicke_from_com(0.3), LASER)
    u = Propagator(h, 0.5, 0).mats[0]
    rng = np.random.default_rng(1)
    psi = rng.normal(size=h.basis.dim) + 1j * rng.normal(size=h.basis.dim)
    psi /= np.linalg.norm(psi)
    norms = []
    for _ in range(200):
        psi = u @ psi
        norms.append(np.linalg.norm(psi))
    assert np.all(np.diff(norms) <= 1e-15)


def test_trajectory_final_state_normalised_and_deterministic():
    h = build_effective_hamiltonian(SMALL, lamb_dicke_from_com(0.3), LaserConfig(0.3, -1.0, 0.2))
    psi0 = ground_state(h.basis, FockIndex(3, 1))
    a = run_trajectory(h, psi0, 200.0, 0.05, seed=5, n_out=5)
    b = run_trajectory(h, psi0, 200.0, 0.05, seed=5, n_out=5)
    assert abs(np.linalg.norm(a.final_state) - 1) < 1e-12
    assert len(a.jumps) > 0
    assert np.array_equal(a.n_com, b.n_com) and [j.time for j in a.jumps] == [j.time for j in b.jumps]
    assert all(0 < j.time <= 200.0 for j in a.jumps)
    assert all(-1 <= j.u <= 1 for j in a.jumps)


def test_too_coarse_step_is_rejected():
    h = build_effective_hamiltonian(SMALL, lamb_dicke_from_com(0.3), LaserConfig(0.5, 0.0, 1.0))
    with pytest.raises(StepError):
        run_trajectory(h, ground_state(h.basis), 20.0, 5.0, seed=0)


def test_trajectory_input_validation():
    h = build_effective_hamiltonian(SMALL, lamb_dicke_from_com(0.3), LASER)
    with pytest.raises(InputError):
        run_trajectory(h, 2 * ground_state(h.basis), 10.0, 0.1, seed=0)
    with pytest.raises(InputError):
        run_trajectories(h, [ground_state(h.basis)], 10.0, 0.1, seeds=[0, 1])


def test_no_recoil_leaves_motion_unchanged():
    modes = ModeSpec.two_ion(5, 4)
    init = StateDistribution.flat(modes, 4.0)
    cfg = QMCConfig(modes, lamb_dicke_from_com(0.0), LaserConfig(0.1, -1.0, 0.2), init, 20.0, 5)
    res = ensemble_run(cfg, 40, master_seed=11)
    assert np.allclose(res.samples_n_com, res.samples_n_com[:1], atol=1e-12)
    assert np.allclose(res.mean_n_com, res.mean_n_com[0], atol=1e-12)
    assert len(res.jump_log()) > 0


def small_config(t_final=60.0, dt=None):
    modes = ModeSpec.two_ion(8, 5)
    init = StateDistribution.flat(modes, 5.0)
    return QMCConfig(modes, lamb_dicke_from_com(0.3), LaserConfig(0.04, -1.0, 0.2), init, t_final, 7, dt)


def test_ensemble_reproducible_and_thread_independent():
    cfg = small_config(t_final=30.0)
    a = ensemble_run(cfg, 70, master_seed=3, threads=1, batch_size=16)
    b = ensemble_run(cfg, 70, master_seed=3, threads=1, batch_size=16)
    c = ensemble_run(cfg, 70, master_seed=3, threads=2, batch_size=16)
    for r in (b, c):
        assert np.array_equal(a.mean_n_com, r.mean_n_com)
        assert np.array_equal(a.population, r.population)
        assert np.array_equal(a.jump_log(), r.jump_log())
    d = ensemble_run(cfg, 70, master_seed=4, threads=1, batch_size=16)
    assert not np.array_equal(a.mean_n_com, d.mean_n_com)


def test_ensemble_population_is_normalised():
    res = ensemble_run(small_config(t_final=30.0), 20, master_seed=1)
    assert res.population.shape == (8, 5)
    assert abs(res.population.sum() - 1) < 1e-12
    assert res.times[0] == 0 and res.times[-1] == pytest.approx(30.0)


@pytest.mark.slow
def test_halving_dt_changes_nothing_beyond_noise():
    cfg = small_config()
    dt = default_dt(cfg.modes, cfg.laser)
    a = ensemble_run(cfg, 300, master_seed=21)
    b = ensemble_run(small_config(dt=dt / 2), 300, master_seed=22)
    se = np.hypot(a.se_n_com, b.se_n_com)[1:]
    assert np.all(np.abs(a.mean_n_com - b.mean_n_com)[1:] < 3 * se)
    assert abs(a.mean_n_com[-1] - b.mean_n_com[-1]) < 2 * se[-1]


def test_compare_without_recoil_is_flat_and_consistent():
    modes = ModeSpec.two_ion(5, 4)
    cfg = QMCConfig(modes, lamb_dicke_from_com(0.0), LaserConfig(0.1, -1.0, 0.2),
                    StateDistribution.flat(modes, 4.0), 10.0, 4)
    cmp = compare_with_rate(cfg, 60, master_seed=2)
    assert np.allclose(cmp.rate.mean_n_com, cmp.rate.mean_n_com[0], atol=1e-12)
    assert np.allclose(cmp.qmc.mean_n_com, cmp.qmc.mean_n_com[0], atol=1e-12)
    assert cmp.verdict == "CONSISTENT"


def excited_weight(traces, basis):
    ne = np.repeat(basis.excited_count(), basis.modes.size)
    return np.mean([np.sum(ne * np.abs(t.final_state) ** 2) for t in traces])


def test_weaker_drive_keeps_more_weight_in_ground_manifold():
    lds = lamb_dicke_from_com(0.3)
    out = {}
    for ratio in (0.17, 0.05):
        h = build_effective_hamiltonian(SMALL, lds, LaserConfig(ratio, -1.0, 1.0))
        psi0 = ground_state(h.basis, FockIndex(2, 1))
        traces = run_trajectories(h, [psi0] * 64, 100.0, 0.02, seeds=list(range(64)))
        out[ratio] = 1 - excited_weight(traces, h.basis)
    assert out[0.05] > out[0.17]
    assert out[0.05] > 0.99


# dark superpositions

def test_dark_phase_quarter_period():
    modes = ModeSpec(10, 6, 1.0, 1.7325)   # 4 v_r - 7 v = 0.07
    lds = lamb_dicke_from_com(0.6, freq_rel=1.7325)
    d = dark_overlap(modes, lds, FockIndex(7, 0), FockIndex(0, 4), 0.6, 0.8, 0.0, [FockIndex(5, 0)])
    assert d.t_half_pi == pytest.approx(math.pi / 0.14, rel=1e-9)
    assert d.t_half_pi == pytest.approx(22.44, abs=0.005)


def test_single_component_never_rotates():
    lds = lamb_dicke_from_com(0.6)
    modes = ModeSpec.two_ion(10, 6)
    d = dark_overlap(modes, lds, FockIndex(7, 0), FockIndex(0, 4), 1.0, 0.0, 0.0, [FockIndex(5, 0)])
    assert d.never_rotates
    with pytest.raises(InputError):
        dark_overlap(modes, lds, FockIndex(7, 0), FockIndex(7, 0), 0.6, 0.8, 0.0, [FockIndex(5, 0)])
    with pytest.raises(InputError):
        dark_overlap(modes, lds, FockIndex(7, 0), FockIndex(0, 4), 0.6, 0.6, 0.0, [FockIndex(5, 0)])


@pytest.mark.parametrize("n,m,l,illum", [
    (FockIndex(7, 0), FockIndex(0, 4), FockIndex(5, 0), "one"),
    (FockIndex(6, 1), FockIndex(4, 2), FockIndex(3, 1), "one"),
    (FockIndex(6, 1), FockIndex(4, 3), FockIndex(3, 1), "both"),
])
def test_darkest_superposition_against_direct_minimisation(n, m, l, illum):
    modes = ModeSpec.two_ion(10, 6)
    lds = lamb_dicke_from_com(0.6)

    def overlap(x):
        return dark_overlap(modes, lds, n, m, math.cos(x[0]), math.sin(x[0]), x[1], [l],
                            illumination=illum).overlaps[l]

    best = min((optimize.minimize(overlap, x0, method="Nelder-Mead",
                                  options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
                for x0 in ([0.3, 0.5], [1.2, 2.5], [0.8, -1.0])), key=lambda r: r.fun)
    a1, a2, phi = darkest_superposition(modes, lds, n, m, l, illumination=illum)
    ours = overlap([math.atan2(a2, a1), phi])
    plain = dark_overlap(modes, lds, n, m, math.sqrt(0.5), math.sqrt(0.5), 0.0, [l],
                         illumination=illum).overlaps[l]
    assert ours <= best.fun + 1e-12
    assert ours < 1e-3 * plain
    # the exact dark state rotates out of darkness after a quarter period of its phase
    d = dark_overlap(modes, lds, n, m, a1, a2, phi, [l], t=overlap_time(modes, n, m), illumination=illum)
    assert d.overlaps[l] > 10 * ours


def overlap_time(modes, n, m):
    gap = abs((n.n_com - m.n_com) * modes.freq_com + (n.n_rel - m.n_rel) * modes.freq_rel)
    return math.pi / gap
