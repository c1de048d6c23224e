"""Density of states and the binned spectrum of motional resonances."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, TruncationError
from .fock import FockIndex, LambDickeSet, ModeSpec, kick_operator

# Energies landing within this many bin widths of an edge are counted in the upper bin,
# so commensurate spectra are not split by rounding.
_EDGE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StateDistribution:
    """Normalised motional populations P(n) over a :class:`ModeSpec` basis.

    ``weights`` has shape ``modes.shape``.
    """

    kind: str
    params: dict
    modes: ModeSpec
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.modes.shape:
            raise InputError(f"weights shape {w.shape} does not match basis {self.modes.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be finite and non-negative")
        total = w.sum()
        if total <= 0:
            raise InputError("distribution has no weight inside the basis")
        w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def flat(cls, modes: ModeSpec, cutoff: float) -> "StateDistribution":
        """Equal weight on every state with n0 nu + nr nu_r <= cutoff."""
        if modes.n_com_max * modes.freq_com <= cutoff + 1e-9:
            raise TruncationError(f"COM truncation {modes.n_com_max} cannot hold all states with E <= {cutoff}",
                                  index=(modes.n_com_max, 0))
        if modes.n_rel_max * modes.freq_rel <= cutoff + 1e-9:
            raise TruncationError(f"stretch truncation {modes.n_rel_max} cannot hold all states with E <= {cutoff}",
                                  index=(0, modes.n_rel_max))
        e = modes.energies().reshape(modes.shape)
        return cls("flat", {"cutoff": float(cutoff)}, modes, (e <= cutoff + 1e-9).astype(float))

    @classmethod
    def thermal(cls, modes: ModeSpec, energy_per_mode: float | None = None,
                nbar: float | tuple[float, float] | None = None) -> "StateDistribution":
        """Product of geometric (thermal) distributions, truncated to the basis.

        Give either the mean energy per mode (then nbar_j = E / nu_j) or the
        mean occupations directly.
        """
        if (energy_per_mode is None) == (nbar is None):
            raise InputError("thermal distribution needs exactly one of energy_per_mode or nbar")
        if energy_per_mode is not None:
            nb = (energy_per_mode / modes.freq_com, energy_per_mode / modes.freq_rel)
            params = {"energy_per_mode": float(energy_per_mode)}
        else:
            nb = (nbar, nbar) if np.isscalar(nbar) else tuple(nbar)
            params = {"nbar": [float(x) for x in nb]}
        if min(nb) < 0:
            raise InputError("mean occupations must be non-negative")
        p0 = _geometric(nb[0], modes.n_com_max)
        pr = _geometric(nb[1], modes.n_rel_max)
        return cls("thermal", params, modes, np.outer(p0, pr))

    @classmethod
    def delta(cls, modes: ModeSpec, state: FockIndex) -> "StateDistribution":
        w = np.zeros(modes.shape)
        modes.index(state.n_com, state.n_rel)
        w[state.n_com, state.n_rel] = 1.0
        return cls("delta", {"n_com": state.n_com, "n_rel": state.n_rel}, modes, w)

    @property
    def flat_weights(self) -> np.ndarray:
        return self.weights.ravel()

    def mean_n(self) -> tuple[float, float]:
        p0 = self.weights.sum(axis=1)
        pr = self.weights.sum(axis=0)
        return float(p0 @ np.arange(p0.size)), float(pr @ np.arange(pr.size))

    def com_marginal(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw flat basis indices from P(n)."""
        cdf = np.cumsum(self.flat_weights)
        idx = np.searchsorted(cdf, rng.random(size) * cdf[-1], side="right")
        return np.minimum(idx, cdf.size - 1)


def _geometric(nbar: float, n: int) -> np.ndarray:
    if nbar == 0:
        p = np.zeros(n)
        p[0] = 1.0
        return p
    q = nbar / (nbar + 1.0)
    return q ** np.arange(n)


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.bin_edges) <= 0):
            raise InputError("bin edges must be strictly increasing")
        if self.values.shape != (self.bin_edges.size - 1,):
            raise InputError("one value per bin required")

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    def value_at(self, x: float) -> float:
        i = int(math.floor((x - self.bin_edges[0]) / self.bin_width + _EDGE_TOL))
        return float(self.values[i])


def _bin_index(x: np.ndarray, lo: float, width: float) -> np.ndarray:
    return np.floor((x - lo) / width + _EDGE_TOL).astype(np.int64)


def density_of_states(modes: ModeSpec, e_max: float, bin_width: float) -> Histogram:
    """Number of states (n0, nr) with energy in each bin [E, E + dE) below ``e_max``.

    Only the mode frequencies of ``modes`` are used; states are enumerated
    without truncation.
    """
    if not (e_max > 0 and bin_width > 0):
        raise InputError("e_max and bin_width must be positive")
    nbins = max(1, math.ceil(e_max / bin_width - _EDGE_TOL))
    edges = np.arange(nbins + 1) * bin_width
    n0 = np.arange(math.floor(e_max / modes.freq_com) + 1)
    nr = np.arange(math.floor(e_max / modes.freq_rel) + 1)
    e = (n0[:, None] * modes.freq_com + nr[None, :] * modes.freq_rel).ravel()
    idx = _bin_index(e, 0.0, bin_width)
    idx = idx[idx < nbins]
    counts = np.bincount(idx, minlength=nbins).astype(float)
    return Histogram(edges, counts)


def resonance_spectrum(modes: ModeSpec, lds: LambDickeSet, dist: StateDistribution,
                       delta_range: tuple[float, float] = (-6.0, 6.0),
                       bin_width: float = 0.1) -> Histogram:
    """Binned stick spectrum I(delta) for a laser on ion 1.

    Transition n -> l adds |<n|exp(i eta cos(theta) x_1)|l>|^2 P(n) to the bin
    holding the detuning (l - n).v that drives it, where v are the mode
    frequencies: red sidebands (cooling) sit at negative detuning.
    Transitions falling outside ``delta_range`` are dropped.
    """
    lo, hi = map(float, delta_range)
    if not (hi > lo and bin_width > 0):
        raise InputError("need delta_range[1] > delta_range[0] and bin_width > 0")
    if dist.modes != modes:
        raise InputError("distribution basis differs from the spectrum basis")
    nbins = math.ceil((hi - lo) / bin_width - _EDGE_TOL)
    edges = lo + np.arange(nbins + 1) * bin_width
    kick = kick_operator(modes, lds, 1, lds.cos_theta)
    p = dist.flat_weights
    src = np.flatnonzero(p > 0)
    e = modes.energies()
    weight = kick.probabilities[src, :] * p[src, None]
    shift = e[None, :] - e[src, None]
    idx = _bin_index(shift, lo, bin_width).ravel()
    keep = (idx >= 0) & (idx < nbins)
    values = np.bincount(idx[keep], weights=weight.ravel()[keep], minlength=nbins)
    return Histogram(edges, values)
