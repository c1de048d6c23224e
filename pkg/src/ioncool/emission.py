"""Angular distributions N(u) of spontaneous emission along the trap axis.

``u`` is the cosine between the emitted photon and the trap axis. Every
pattern is normalised so that the integral of N over [-1, 1] is one.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import InputError

PATTERNS = ("isotropic", "dipole-pi", "dipole-sigma")


def density(pattern: str, u):
    u = np.asarray(u, dtype=float)
    if pattern == "isotropic":
        return np.full_like(u, 0.5)
    if pattern == "dipole-pi":
        return 0.75 * (1.0 - u * u)
    if pattern == "dipole-sigma":
        return 0.375 * (1.0 + u * u)
    raise InputError(f"unknown emission pattern {pattern!r}; expected one of {PATTERNS}")


def cdf(pattern: str, u):
    u = np.asarray(u, dtype=float)
    if pattern == "isotropic":
        return 0.5 * (u + 1.0)
    if pattern == "dipole-pi":
        return 0.5 + 0.75 * u - 0.25 * u ** 3
    if pattern == "dipole-sigma":
        return 0.5 + 0.375 * u + 0.125 * u ** 3
    raise InputError(f"unknown emission pattern {pattern!r}; expected one of {PATTERNS}")


def inverse_cdf(pattern: str, y):
    """Exact inverse of :func:`cdf` (closed-form roots of the cubic CDFs)."""
    y = np.clip(np.asarray(y, dtype=float), 0.0, 1.0)
    if pattern == "isotropic":
        return 2.0 * y - 1.0
    if pattern == "dipole-pi":
        # u^3 - 3u + (4y - 2) = 0, trigonometric root lying in [-1, 1]
        theta = np.arccos(np.clip(1.0 - 2.0 * y, -1.0, 1.0))
        return np.clip(2.0 * np.cos((theta + 4.0 * math.pi) / 3.0), -1.0, 1.0)
    if pattern == "dipole-sigma":
        # u^3 + 3u - (8y - 4) = 0, single real root
        return np.clip(2.0 * np.sinh(np.arcsinh(4.0 * y - 2.0) / 3.0), -1.0, 1.0)
    raise InputError(f"unknown emission pattern {pattern!r}; expected one of {PATTERNS}")


def sample(pattern: str, rng: np.random.Generator, size=None):
    return inverse_cdf(pattern, rng.random(size))


def quadrature(pattern: str, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes ``u`` and weights already multiplied by N(u)."""
    u, w = np.polynomial.legendre.leggauss(order)
    return u, w * density(pattern, u)
