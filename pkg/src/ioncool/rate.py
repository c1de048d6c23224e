"""Low-saturation rate equations for the populations of |g, n>.

The generator has, for every pair of motional states r -> n,

    gamma Omega^2/4  sum_k  A(n, k) |<k|exp(-i eta cos(theta) x_j)|r>|^2 / ((E_k - E_r - delta)^2 + gamma^2/4)

where A(n, k) = int du N(u) |<n|exp(i u eta x_j)|k>|^2 is the recoil kernel of
spontaneous emission. Intermediate (excited-manifold) states k run over a
buffered basis larger than the population basis; weight scattered beyond the
population basis is reflected onto its boundary and reported as leakage.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp
from scipy.sparse.csgraph import connected_components

from . import emission
from .errors import InputError, IntegrationError, ReducibleGeneratorError, TruncationError
from .fock import LambDickeSet, ModeSpec, displacement_matrix, truncation_buffer
from .spectrum import StateDistribution

log = logging.getLogger(__name__)

QUAD_ORDER = 16
QUAD_RTOL = 1e-8
LEAKAGE_LIMIT = 1e-3
BOUNDARY_LIMIT = 1e-3


@dataclass(frozen=True)
class LaserConfig:
    """Cooling laser; all frequencies in units of the trap frequency."""

    omega_1: float
    detuning: float
    gamma: float
    omega_2: float = 0.0
    cos_theta: float = 1.0
    pattern: str = "dipole-pi"

    def __post_init__(self):
        if not self.gamma > 0:
            raise InputError(f"gamma must be positive, got {self.gamma}")
        if self.omega_1 < 0 or self.omega_2 < 0:
            raise InputError("Rabi frequencies must be non-negative")
        if abs(self.cos_theta) > 1:
            raise InputError(f"|cos_theta| must be <= 1, got {self.cos_theta}")
        emission.density(self.pattern, 0.0)
        if self.saturation_warning:
            log.warning("Omega=%g exceeds 0.3 gamma=%g; low-saturation rate equations are unreliable",
                        self.omega_max, self.gamma)

    @property
    def omegas(self) -> tuple[float, float]:
        return (self.omega_1, self.omega_2)

    @property
    def omega_max(self) -> float:
        return max(self.omegas)

    @property
    def saturation_warning(self) -> bool:
        return self.omega_max > 0.3 * self.gamma

    @property
    def t_fluorescence(self) -> float:
        """Fluorescence cycle time t_F = 2 gamma / Omega^2 (Omega of the brightest ion)."""
        om = self.omega_max
        return math.inf if om == 0 else 2.0 * self.gamma / om ** 2

    def replace(self, **changes) -> "LaserConfig":
        from dataclasses import replace
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Generator of dp/dt = G p on the population basis ``modes``.

    ``leak_rates[r]`` is the rate at which state r scatters out of the basis
    (that weight has been reflected onto the boundary to keep columns summing
    to zero).
    """

    generator: np.ndarray = field(repr=False)
    modes: ModeSpec
    laser: LaserConfig
    leak_rates: np.ndarray = field(repr=False)
    buffer: tuple[int, int] = (0, 0)
    quad_order: int = QUAD_ORDER

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def column_sums(self) -> np.ndarray:
        return self.generator.sum(axis=0)


@dataclass(frozen=True, eq=False)
class PopulationVector:
    p: np.ndarray = field(repr=False)
    modes: ModeSpec

    def __post_init__(self):
        if self.p.shape != (self.modes.size,):
            raise InputError("population vector does not match the basis")

    @property
    def table(self) -> np.ndarray:
        return self.p.reshape(self.modes.shape)

    def mean_n(self) -> tuple[float, float]:
        t = self.table
        return (float(t.sum(axis=1) @ np.arange(t.shape[0])),
                float(t.sum(axis=0) @ np.arange(t.shape[1])))

    @property
    def boundary_weight(self) -> float:
        t = self.table
        edge = np.zeros(t.shape, dtype=bool)
        if t.shape[0] > 1:
            edge[-1, :] = True
        if t.shape[1] > 1:
            edge[:, -1] = True
        return float(t[edge].sum())

    @property
    def reliable(self) -> bool:
        return self.boundary_weight <= BOUNDARY_LIMIT


@dataclass(frozen=True, eq=False)
class CoolingTrajectory:
    """Mean occupations versus time; ``times`` are in units of t_F."""

    times: np.ndarray
    mean_n_com: np.ndarray
    mean_n_rel: np.ndarray
    leakage: np.ndarray
    t_fluorescence: float
    snapshots: dict = field(default_factory=dict, repr=False)

    @property
    def final_leakage(self) -> float:
        return float(self.leakage[-1])


def _buffers(modes: ModeSpec, lds: LambDickeSet, buffer) -> tuple[int, int]:
    need = tuple(0 if eta == 0 else truncation_buffer(eta, n)
                 for eta, n in ((lds.eta_com, modes.n_com_max), (lds.eta_rel, modes.n_rel_max)))
    if buffer is None:
        return need
    buffer = (int(buffer), int(buffer)) if np.isscalar(buffer) else tuple(int(b) for b in buffer)
    for axis, (have, want) in enumerate(zip(buffer, need)):
        if have < want:
            raise TruncationError(f"buffer {have} on mode {axis} is below the required {want}",
                                  index=axis)
    return buffer


def _fc_block(eta: float, rows: int, cols: int) -> np.ndarray:
    return displacement_matrix(eta, max(rows, cols)).probabilities[:rows, :cols]


def emission_kernel(modes: ModeSpec, lds: LambDickeSet, pattern: str, shape_k: tuple[int, int],
                    order: int) -> np.ndarray:
    """A(n, k) = int du N(u) |<n|exp(i u k x)|k>|^2, n in ``modes``, k in the buffered basis."""
    n0, nr = modes.shape
    k0, kr = shape_k
    u, w = emission.quadrature(pattern, order)
    out = np.zeros((n0 * nr, k0 * kr))
    for uq, wq in zip(u, w):
        out += wq * np.kron(_fc_block(uq * lds.eta_com, n0, k0), _fc_block(uq * lds.eta_rel, nr, kr))
    return out


def _converged_kernel(modes, lds, pattern, shape_k, order):
    a = emission_kernel(modes, lds, pattern, shape_k, order)
    while True:
        b = emission_kernel(modes, lds, pattern, shape_k, 2 * order)
        scale = max(np.abs(b).max(), 1e-300)
        if np.abs(a - b).max() <= QUAD_RTOL * scale:
            return a, order
        if order >= 256:
            raise IntegrationError(f"angular quadrature not converged at order {2 * order}")
        a, order = b, 2 * order


def build_rate_matrix(modes: ModeSpec, lds: LambDickeSet, laser: LaserConfig,
                      buffer=None, quad_order: int = QUAD_ORDER) -> RateMatrix:
    """Assemble the rate-equation generator for one or both illuminated ions.

    Ion 2 sees the stretch-mode parameter with flipped sign. Both ions add
    independently (no cross-ion interference).
    """
    buf = _buffers(modes, lds, buffer)
    n0, nr = modes.shape
    k0, kr = n0 + buf[0], nr + buf[1]
    big = modes.resized(k0, kr)
    kernel, order = _converged_kernel(modes, lds, laser.pattern, (k0, kr), quad_order)
    leak = 1.0 - kernel.sum(axis=0)

    # reflection map: buffered state k -> nearest interior state
    kk0, kkr = big.indices()
    clamp = np.minimum(kk0, n0 - 1) * nr + np.minimum(kkr, nr - 1)

    e_k = big.energies()
    e_r = modes.energies()
    lorentz = 1.0 / ((e_k[:, None] - e_r[None, :] - laser.detuning) ** 2 + laser.gamma ** 2 / 4.0)

    c = laser.cos_theta
    feed = np.zeros((modes.size, modes.size))
    leak_rates = np.zeros(modes.size)
    for ion, omega in ((1, laser.omega_1), (2, laser.omega_2)):
        if omega == 0:
            continue
        sign = 1.0 if ion == 1 else -1.0
        absorb = np.kron(_fc_block(c * lds.eta_com, k0, n0), _fc_block(sign * c * lds.eta_rel, kr, nr))
        excite = (laser.gamma * omega ** 2 / 4.0) * absorb * lorentz
        # each ion assembled on its own so equal drives sum to an exact doubling
        part = kernel @ excite
        lost = leak[:, None] * excite
        np.add.at(part, clamp, lost)
        feed += part
        leak_rates += lost.sum(axis=0)

    gen = feed.copy()
    np.fill_diagonal(gen, 0.0)
    np.fill_diagonal(gen, -gen.sum(axis=0))
    gen.flags.writeable = False
    return RateMatrix(gen, modes, laser, leak_rates, buf, order)


def single_ion_rate_model(eta: float, laser: LaserConfig, n_max: int, buffer=None) -> RateMatrix:
    """One ion, one mode at the trap frequency, with Lamb-Dicke parameter ``eta``."""
    modes = ModeSpec(n_max, 1, 1.0, math.sqrt(3.0))
    lds = LambDickeSet(eta_single=eta, eta_com=eta, eta_rel=0.0, cos_theta=laser.cos_theta,
                       recoil_freq=eta * eta)
    if buffer is not None and np.isscalar(buffer):
        buffer = (buffer, 0)
    return build_rate_matrix(modes, lds, laser.replace(omega_2=0.0), buffer=buffer)


def evolve_populations(r: RateMatrix, p0, t_grid, snapshot_times=()) -> CoolingTrajectory:
    """Integrate dp/dt = G p on ``t_grid`` (units of t_F) with an adaptive explicit RK scheme.

    ``p0`` may be a :class:`StateDistribution`, a :class:`PopulationVector` or
    a flat array. ``snapshot_times`` (also in t_F) must be members of ``t_grid``.
    """
    p0 = _as_vector(p0, r.modes)
    if abs(p0.sum() - 1.0) > 1e-9:
        raise InputError(f"initial populations sum to {p0.sum()}, not 1")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1 or np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise InputError("t_grid must be non-negative and strictly increasing")
    tf = r.laser.t_fluorescence
    if not math.isfinite(tf):
        tf = 1.0
    gen = np.asarray(r.generator)
    leak = r.leak_rates

    def rhs(_t, y):
        p = y[:-1]
        return np.concatenate([gen @ p, [leak @ p]])

    y0 = np.concatenate([p0, [0.0]])
    t_abs = t_grid * tf
    if t_abs[-1] == 0.0 or not np.any(gen):
        ys = np.repeat(y0[:, None], t_abs.size, axis=1)
    else:
        t0 = 0.0 if t_abs[0] > 0 else t_abs[0]
        sol = solve_ivp(rhs, (t0, t_abs[-1]), y0, method="DOP853", t_eval=t_abs,
                        rtol=1e-8, atol=1e-13)
        if not sol.success:
            raise IntegrationError(f"rate integration failed: {sol.message}",
                                   last_time=float(sol.t[-1]) / tf if sol.t.size else 0.0)
        ys = sol.y
    p = ys[:-1]
    n0, nr = r.modes.indices()
    snaps = {}
    for ts in snapshot_times:
        hit = np.flatnonzero(np.isclose(t_grid, ts, rtol=0, atol=1e-9 * max(1.0, abs(ts))))
        if hit.size == 0:
            raise InputError(f"snapshot time {ts} is not on the output grid")
        snaps[float(ts)] = PopulationVector(p[:, hit[0]].copy(), r.modes)
    return CoolingTrajectory(t_grid, n0 @ p, nr @ p, ys[-1], r.laser.t_fluorescence, snaps)


def _as_vector(p0, modes: ModeSpec) -> np.ndarray:
    if isinstance(p0, StateDistribution):
        if p0.modes.shape != modes.shape:
            raise InputError("initial distribution basis differs from the generator basis")
        return p0.flat_weights.copy()
    if isinstance(p0, PopulationVector):
        return p0.p.copy()
    p0 = np.asarray(p0, dtype=float).ravel()
    if p0.size != modes.size:
        raise InputError("initial population vector does not match the basis")
    return p0


def closed_classes(gen: np.ndarray, rel_tol: float = 1e-14) -> list[np.ndarray]:
    """Closed communicating classes of the Markov generator ``gen``."""
    off = np.array(gen, copy=True)
    np.fill_diagonal(off, 0.0)
    scale = np.abs(off).max()
    adj = (off.T > rel_tol * scale) if scale > 0 else np.zeros_like(off, dtype=bool)
    # adj[r, n]: edge r -> n
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    leaves = np.ones(ncomp, dtype=bool)
    src, dst = np.nonzero(adj)
    cross = labels[src] != labels[dst]
    leaves[np.unique(labels[src[cross]])] = False
    return [np.flatnonzero(labels == c) for c in np.flatnonzero(leaves)]


def steady_state(r: RateMatrix) -> PopulationVector:
    """Unique stationary distribution of the generator.

    Check :attr:`PopulationVector.reliable`: weight piling up on the basis
    boundary (for instance under blue detuning) means the truncation is too
    small for the answer to be trusted.
    """
    gen = np.asarray(r.generator)
    blocks = closed_classes(gen)
    if len(blocks) != 1:
        n0, nr = r.modes.indices()
        named = [[(int(n0[i]), int(nr[i])) for i in b] for b in blocks]
        raise ReducibleGeneratorError(f"generator has {len(blocks)} closed classes; steady state not unique",
                                      blocks=named)
    ns = linalg.null_space(gen)
    if ns.shape[1] != 1:
        # numerically near-degenerate; take the best-conditioned direction
        _, _, vt = linalg.svd(gen)
        v = vt[-1]
    else:
        v = ns[:, 0]
    v = v / v.sum()
    v = np.where(v < 0, np.maximum(v, 0.0), v)
    v = v / v.sum()
    out = PopulationVector(v, r.modes)
    if not out.reliable:
        log.warning("steady state has %.3g of its weight on the truncation boundary", out.boundary_weight)
    return out
