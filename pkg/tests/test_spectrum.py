import math

import numpy as np
import pytest

from ioncool.errors import InputError, TruncationError
from ioncool.fock import FockIndex, ModeSpec, kick_operator, lamb_dicke_from_com
from ioncool.spectrum import StateDistribution, density_of_states, resonance_spectrum


def brute_dos(f0, fr, e_max, width):
    nb = math.ceil(e_max / width - 1e-9)
    counts = np.zeros(nb)
    for n0 in range(int(e_max / f0) + 2):
        for nr in range(int(e_max / fr) + 2):
            e = n0 * f0 + nr * fr
            b = math.floor(e / width + 1e-9)
            if 0 <= b < nb:
                counts[b] += 1
    return counts


def test_ground_bin():
    h = density_of_states(ModeSpec.two_ion(2, 2), 6.0, 1 / 3)
    assert h.values[0] == 1


@pytest.mark.parametrize("e_max,width", [(6.0, 1 / 3), (20.0, 1 / 3), (20.0, 0.3333), (9.0, 0.1)])
def test_dos_matches_enumeration(e_max, width):
    h = density_of_states(ModeSpec.two_ion(2, 2), e_max, width)
    assert np.array_equal(h.values, brute_dos(1.0, math.sqrt(3), e_max, width))
    assert np.all(h.values == np.round(h.values))


def test_commensurate_cluster():
    m = ModeSpec(2, 2, 1.0, 2.0)
    h = density_of_states(m, 6.0, 0.33)
    assert h.value_at(2.0) == 2


def test_dos_rejects_bad_grid():
    with pytest.raises(InputError):
        density_of_states(ModeSpec.two_ion(2, 2), 6.0, 0.0)


def test_distributions():
    m = ModeSpec.two_ion(18, 14)
    flat = StateDistribution.flat(m, 15.0)
    assert flat.weights.sum() == pytest.approx(1, abs=1e-12)
    e = m.energies().reshape(m.shape)
    assert np.all(flat.weights[e > 15 + 1e-9] == 0)
    th = StateDistribution.thermal(m, energy_per_mode=7.5)
    assert th.weights.sum() == pytest.approx(1, abs=1e-12)
    d = StateDistribution.delta(m, FockIndex(3, 2))
    assert d.mean_n() == (3.0, 2.0)
    with pytest.raises(TruncationError):
        StateDistribution.flat(ModeSpec.two_ion(10, 14), 15.0)
    with pytest.raises(InputError):
        StateDistribution.thermal(m)


def test_sampling_follows_weights(rng):
    m = ModeSpec.two_ion(4, 3)
    w = np.arange(1.0, 13.0).reshape(4, 3)
    d = StateDistribution("custom", {}, m, w)
    draws = d.sample(rng, 200000)
    freq = np.bincount(draws, minlength=12) / draws.size
    assert np.max(np.abs(freq - d.flat_weights)) < 5e-3


def brute_spectrum(modes, lds, dist, lo, hi, width):
    k = kick_operator(modes, lds, 1, lds.cos_theta).matrix
    e = modes.energies()
    p = dist.flat_weights
    nb = math.ceil((hi - lo) / width - 1e-9)
    out = np.zeros(nb)
    for n in range(modes.size):
        if p[n] == 0:
            continue
        for l in range(modes.size):
            b = math.floor((e[l] - e[n] - lo) / width + 1e-9)
            if 0 <= b < nb:
                out[b] += abs(k[l, n]) ** 2 * p[n]
    return out


def test_spectrum_matches_double_loop():
    m = ModeSpec.two_ion(18, 14)
    lds = lamb_dicke_from_com(0.6)
    dist = StateDistribution.thermal(m, energy_per_mode=7.5)
    h = resonance_spectrum(m, lds, dist)
    ref = brute_spectrum(m, lds, dist, -6.0, 6.0, 0.1)
    assert np.max(np.abs(h.values - ref)) < 1e-14


def test_lamb_dicke_spectrum_peaks():
    m = ModeSpec.two_ion(30, 20)
    dist = StateDistribution.thermal(m, energy_per_mode=7.5)
    small = resonance_spectrum(m, lamb_dicke_from_com(0.1), dist)
    big = resonance_spectrum(m, lamb_dicke_from_com(0.2), dist)
    carrier = small.value_at(0.0)
    peaks = [small.value_at(x) for x in (1.0, -1.0, math.sqrt(3), -math.sqrt(3))]
    others = np.delete(small.values, [small.values.tolist().index(v) for v in [carrier] + peaks])
    assert min(peaks) > others.max()
    # sideband / carrier grows as eta^2
    r1 = small.value_at(1.0) / small.value_at(0.0)
    r2 = big.value_at(1.0) / big.value_at(0.0)
    assert 3.0 < r2 / r1 < 5.0


def test_zero_eta_single_line():
    m = ModeSpec.two_ion(6, 4)
    dist = StateDistribution.thermal(m, nbar=1.0)
    h = resonance_spectrum(m, lamb_dicke_from_com(0.0), dist)
    assert h.value_at(0.0) == pytest.approx(1.0, abs=1e-14)
    assert h.values.sum() == pytest.approx(1.0, abs=1e-14)


def test_total_weight_and_bin_shift():
    m = ModeSpec.two_ion(18, 14)
    lds = lamb_dicke_from_com(0.6)
    dist = StateDistribution.flat(m, 15.0)
    k = kick_operator(m, lds, 1)
    expect = dist.flat_weights @ k.probabilities.sum(axis=0)
    a = resonance_spectrum(m, lds, dist, (-40.0, 40.0), 0.1)
    b = resonance_spectrum(m, lds, dist, (-40.05, 40.05), 0.1)
    assert a.values.sum() == pytest.approx(expect, rel=1e-12)
    assert b.values.sum() == pytest.approx(expect, rel=1e-12)


def test_commensurate_support_on_integers():
    m = ModeSpec(12, 8, 1.0, 2.0)
    lds = lamb_dicke_from_com(0.6, freq_rel=2.0)
    h = resonance_spectrum(m, lds, StateDistribution.flat(m, 8.0), (-6.0, 6.0), 0.1)
    centers = h.centers[h.values > 0]
    assert np.all(np.abs(centers - np.round(centers)) <= 0.1)
