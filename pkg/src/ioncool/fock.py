"""Two-mode Fock-space model of two trapped ions.

Units are dimensionless throughout: hbar = 1 and the axial trap frequency
nu = 1, so frequencies are in units of nu and times in units of 1/nu.
Physical units appear only in :func:`equilibrium_distance`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import constants

from .errors import InputError, TruncationError

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class ModeSpec:
    """Frequencies and Fock truncations of the COM and stretch modes."""

    n_com_max: int
    n_rel_max: int
    freq_com: float = 1.0
    freq_rel: float = SQRT3

    def __post_init__(self):
        if not (self.freq_com > 0 and self.freq_rel > 0):
            raise InputError(f"mode frequencies must be positive, got ({self.freq_com}, {self.freq_rel})")
        if self.n_com_max < 1 or self.n_rel_max < 1:
            raise InputError(f"truncations must be >= 1, got ({self.n_com_max}, {self.n_rel_max})")
        object.__setattr__(self, "n_com_max", int(self.n_com_max))
        object.__setattr__(self, "n_rel_max", int(self.n_rel_max))

    @classmethod
    def two_ion(cls, n_com_max: int, n_rel_max: int, trap_freq: float = 1.0) -> "ModeSpec":
        """Normal modes of two equal ions in a harmonic well: (nu, sqrt(3) nu)."""
        return cls(n_com_max, n_rel_max, trap_freq, SQRT3 * trap_freq)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_com_max, self.n_rel_max)

    @property
    def size(self) -> int:
        return self.n_com_max * self.n_rel_max

    @property
    def freqs(self) -> np.ndarray:
        return np.array([self.freq_com, self.freq_rel])

    def index(self, n_com: int, n_rel: int) -> int:
        if not (0 <= n_com < self.n_com_max and 0 <= n_rel < self.n_rel_max):
            raise TruncationError(f"Fock index ({n_com}, {n_rel}) outside basis {self.shape}",
                                  index=(n_com, n_rel))
        return n_com * self.n_rel_max + n_rel

    def indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (n_com, n_rel) arrays in basis order."""
        n0, nr = np.meshgrid(np.arange(self.n_com_max), np.arange(self.n_rel_max), indexing="ij")
        return n0.ravel(), nr.ravel()

    def energies(self) -> np.ndarray:
        n0, nr = self.indices()
        return n0 * self.freq_com + nr * self.freq_rel

    def resized(self, n_com_max: int, n_rel_max: int) -> "ModeSpec":
        return ModeSpec(n_com_max, n_rel_max, self.freq_com, self.freq_rel)


@dataclass(frozen=True)
class FockIndex:
    n_com: int
    n_rel: int

    def __post_init__(self):
        if self.n_com < 0 or self.n_rel < 0:
            raise InputError(f"Fock numbers must be non-negative, got ({self.n_com}, {self.n_rel})")


@dataclass(frozen=True)
class LambDickeSet:
    """Lamb-Dicke parameters of the single ion and of both normal modes."""

    eta_single: float
    eta_com: float
    eta_rel: float
    cos_theta: float = 1.0
    recoil_freq: float = 0.0

    def __post_init__(self):
        if abs(self.cos_theta) > 1:
            raise InputError(f"|cos_theta| must be <= 1, got {self.cos_theta}")


def lamb_dicke_from_trap(recoil_freq: float, trap_freq: float = 1.0, cos_theta: float = 1.0,
                         freq_rel: float | None = None) -> LambDickeSet:
    """Lamb-Dicke parameters for two ions from the recoil and trap frequencies.

    ``freq_rel`` is the stretch-mode frequency in units of ``trap_freq``
    (sqrt(3) for a real two-ion crystal). The stretch-mode parameter is
    eta / sqrt(2 freq_rel), which reduces to eta / sqrt(2 sqrt(3)).
    """
    if not trap_freq > 0:
        raise InputError(f"trap frequency must be positive, got {trap_freq}")
    if not recoil_freq >= 0:
        raise InputError(f"recoil frequency must be non-negative, got {recoil_freq}")
    eta = math.sqrt(recoil_freq / trap_freq)
    return _lds(eta, cos_theta, recoil_freq / trap_freq, freq_rel)


def lamb_dicke_from_com(eta_com: float, cos_theta: float = 1.0,
                        freq_rel: float | None = None) -> LambDickeSet:
    """Lamb-Dicke set fixed by the COM parameter eta_0, the value usually quoted."""
    eta = eta_com * math.sqrt(2.0)
    return _lds(eta, cos_theta, eta * eta, freq_rel)


def _lds(eta: float, cos_theta: float, recoil: float, freq_rel: float | None) -> LambDickeSet:
    if not math.isfinite(eta):
        raise InputError("Lamb-Dicke parameter must be finite")
    fr = SQRT3 if freq_rel is None else float(freq_rel)
    return LambDickeSet(eta_single=eta, eta_com=eta / math.sqrt(2.0),
                        eta_rel=eta / math.sqrt(2.0 * fr), cos_theta=cos_theta,
                        recoil_freq=recoil)


def truncation_buffer(eta: float, n: int) -> int:
    """Extra Fock levels needed so displacement by ``eta`` from level < n does not leak.

    Displacement spreads a level over about eta sqrt(n) neighbours; six more
    levels keep the lost weight below 1e-10 for eta up to 3 and n up to 200.
    """
    return max(8, math.ceil(4.0 * abs(eta) * math.sqrt(n)) + 6)


def _real_displacement(eta: float, dim: int) -> np.ndarray:
    # Lower triangle of D(eta) with the i^(m-n) phase stripped:
    #   S[n+k, n] = exp(-x/2) eta^k sqrt(n!/(n+k)!) L_n^(k)(x),  x = eta^2.
    # Forward three-term Laguerre recurrence in n, vectorised over the offset k.
    x = eta * eta
    s = np.zeros((dim, dim))
    k = np.arange(dim)
    if eta == 0.0:
        np.fill_diagonal(s, 1.0)
        return s
    with np.errstate(under="ignore"):
        logmag = -0.5 * x + k * math.log(abs(eta)) - 0.5 * _lgamma(k + 1)
        g_prev = np.exp(logmag) * np.where(k % 2 == 1, math.copysign(1.0, eta), 1.0)
    s[k, 0 * k] = g_prev
    if dim == 1:
        return s
    g = g_prev * (1 + k - x) / np.sqrt(k + 1.0)
    kk = k[: dim - 1]
    s[kk + 1, 1 + 0 * kk] = g[: dim - 1]
    for j in range(1, dim - 1):
        live = dim - 1 - j  # offsets k with j + 1 + k < dim
        kj = k[:live]
        g_next = ((2 * j + 1 + kj - x) * g[:live]
                  - np.sqrt(j * (j + kj)) * g_prev[:live]) / np.sqrt((j + 1.0) * (j + 1.0 + kj))
        s[j + 1 + kj, j + 1] = g_next
        g_prev, g = g[:live], g_next
    return s


def _lgamma(v: np.ndarray) -> np.ndarray:
    from scipy.special import gammaln
    return gammaln(v)


_PHASE = np.array([1, 1j, -1, -1j])


@dataclass(frozen=True, eq=False)
class DisplacementMatrix:
    """Franck-Condon table ``entries[n, m] = <n| exp(i eta (a^+ + a)) |m>``."""

    eta: float
    dim: int
    entries: np.ndarray = field(repr=False)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.entries) ** 2

    def __getitem__(self, idx):
        return self.entries[idx]


def displacement_matrix(eta: float, dim: int) -> DisplacementMatrix:
    """Exact matrix elements of exp(i eta (a^+ + a)) on the first ``dim`` Fock states.

    Entries are exact (no truncation error) because the recurrence never
    references levels >= dim; only products of truncated tables lose weight.
    """
    eta = float(eta)
    if not math.isfinite(eta):
        raise InputError(f"eta must be finite, got {eta}")
    if dim < 1:
        raise InputError(f"dim must be >= 1, got {dim}")
    s = _real_displacement(eta, dim)
    m = np.arange(dim)
    lower = s * _PHASE[(m[:, None] - m[None, :]) % 4]
    d = np.tril(lower) + np.tril(lower, -1).T
    d.flags.writeable = False
    return DisplacementMatrix(eta, dim, d)


@dataclass(frozen=True, eq=False)
class KickOperator:
    """exp(i k x_j) on the two-mode basis as D(s eta_0) (x) D(+-s eta_r)."""

    ion_index: int
    scale: float
    com: DisplacementMatrix = field(repr=False)
    rel: DisplacementMatrix = field(repr=False)

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.kron(self.com.entries, self.rel.entries)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        """Act on a flat motional vector (or a stack of them in the leading axis)."""
        n0, nr = self.com.dim, self.rel.dim
        x = psi.reshape(psi.shape[:-1] + (n0, nr))
        out = self.com.entries @ x @ self.rel.entries.T
        return out.reshape(psi.shape)

    def adjoint_apply(self, psi: np.ndarray) -> np.ndarray:
        n0, nr = self.com.dim, self.rel.dim
        x = psi.reshape(psi.shape[:-1] + (n0, nr))
        out = self.com.entries.conj().T @ x @ self.rel.entries.conj()
        return out.reshape(psi.shape)

    @property
    def probabilities(self) -> np.ndarray:
        """|<n|K|m>|^2 as a (size, size) table."""
        return np.kron(self.com.probabilities, self.rel.probabilities)


def kick_operator(basis: ModeSpec, lds: LambDickeSet, ion_index: int, scale: float = 1.0) -> KickOperator:
    if ion_index not in (1, 2):
        raise InputError(f"ion_index must be 1 or 2, got {ion_index}")
    sign = 1.0 if ion_index == 1 else -1.0
    com = displacement_matrix(scale * lds.eta_com, basis.n_com_max)
    rel = displacement_matrix(sign * scale * lds.eta_rel, basis.n_rel_max)
    return KickOperator(ion_index, float(scale), com, rel)


def equilibrium_distance(mass: float, trap_freq: float, charge: float) -> float:
    """Ion separation x0 = (e^2 / 4 pi eps0 mu nu^2)^(1/3) in SI units.

    ``mass`` is the single-ion mass in kg, ``trap_freq`` the angular axial
    frequency in rad/s and ``charge`` the ion charge in C. The reduced mass
    mu = m/2 enters.
    """
    if not (mass > 0 and trap_freq > 0 and charge > 0):
        raise InputError("mass, trap frequency and charge must all be positive")
    mu = mass / 2.0
    coulomb = charge ** 2 / (4.0 * math.pi * constants.epsilon_0)
    return (coulomb / (mu * trap_freq ** 2)) ** (1.0 / 3.0)
