"""Univariate normal helpers shared by evaluation and EM.

All functions are numpy ufunc-style: they accept scalars or arrays and
broadcast. Probabilities are handled in linear or log domain as indicated
by the function name; -inf encodes zero probability in log domain.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

_LOG_2PI = float(np.log(2.0 * np.pi))


def log_pdf(x, mean, variance):
    """Log density of N(mean, variance) at x."""
    x = np.asarray(x, dtype=np.float64)
    return -0.5 * (_LOG_2PI + np.log(variance) + (x - mean) ** 2 / variance)


def interval_mass(mean, variance, lo, hi):
    """P(lo <= X <= hi) for X ~ N(mean, variance).

    Computed with the reflection ndtr(-b) - ndtr(-a) whenever both
    standardized bounds are positive, which avoids cancellation between
    two values near 1.
    """
    sigma = np.sqrt(variance)
    a = (np.asarray(lo, dtype=np.float64) - mean) / sigma
    b = (np.asarray(hi, dtype=np.float64) - mean) / sigma
    direct = ndtr(b) - ndtr(a)
    reflected = ndtr(-a) - ndtr(-b)
    mass = np.where(a > 0.0, reflected, direct)
    return np.maximum(mass, 0.0)


def log_interval_mass(mean, variance, lo, hi):
    mass = interval_mass(mean, variance, lo, hi)
    with np.errstate(divide="ignore"):
        return np.log(mass)


def _phi(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
    return np.where(np.isinf(z), 0.0, out)


def _z_phi(z):
    # z * pdf(z) with the convention (+-inf) * 0 = 0.
    z = np.asarray(z, dtype=np.float64)
    return np.where(np.isinf(z), 0.0, z * _phi(z))


def truncated_moments(mean, variance, lo, hi):
    """First two raw moments of N(mean, variance) restricted to [lo, hi].

    Returns (E[x], E[x^2], mass) where mass is the interval probability
    under the untruncated normal. Half-infinite and infinite bounds are
    supported. Where mass is zero the moment entries are meaningless
    (filled with the untruncated moments); callers must check mass.
    """
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.sqrt(np.asarray(variance, dtype=np.float64))
    a = (np.asarray(lo, dtype=np.float64) - mean) / sigma
    b = (np.asarray(hi, dtype=np.float64) - mean) / sigma
    mass = interval_mass(mean, sigma**2, lo, hi)
    safe = np.where(mass > 0.0, mass, 1.0)
    # Standardized truncated moments.
    m1 = (_phi(a) - _phi(b)) / safe
    m2 = 1.0 + (_z_phi(a) - _z_phi(b)) / safe
    ex = mean + sigma * m1
    ex2 = mean**2 + 2.0 * mean * sigma * m1 + sigma**2 * m2
    ex = np.where(mass > 0.0, ex, mean)
    ex2 = np.where(mass > 0.0, ex2, mean**2 + sigma**2)
    return ex, ex2, mass
