"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation. Bin classification
must agree bit for bit between the two so that Monte Carlo hit counts do
not depend on which backend is loaded.
"""
import math

import numpy as np
from scipy import special

SQRT2 = math.sqrt(2.0)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _mass(x_lo, x_hi):
    # 0.5*(erf(x_hi) - erf(x_lo)), switching to erfc in a tail to keep digits
    upper = x_lo >= 0.0
    lower = x_hi <= 0.0
    out = 0.5 * (special.erf(x_hi) - special.erf(x_lo))
    if upper.any():
        out[upper] = 0.5 * (special.erfc(x_lo[upper]) - special.erfc(x_hi[upper]))
    if lower.any():
        out[lower] = 0.5 * (special.erfc(-x_hi[lower]) - special.erfc(-x_lo[lower]))
    return out


def interval_mass(mu, a, spacing, half_n):
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    q = np.zeros_like(mu)
    dq = np.zeros_like(mu)
    dq_abs = np.zeros_like(mu)
    for k in range(-half_n, half_n + 1):
        centre = k * spacing
        x_lo = SQRT2 * (centre - a - mu)
        x_hi = SQRT2 * (centre + a - mu)
        q += _mass(x_lo, x_hi)
        g_lo = SQRT_2_OVER_PI * np.exp(-x_lo * x_lo)
        g_hi = SQRT_2_OVER_PI * np.exp(-x_hi * x_hi)
        dq += g_lo - g_hi
        dq_abs += g_lo + g_hi
    return q, dq, dq_abs


def count_hits(z, mu, sigma, a, spacing, half_n):
    z = np.ascontiguousarray(z, dtype=np.float64)
    p = mu + sigma * z
    if half_n == 0:
        k = np.zeros(p.shape, dtype=np.int64)
        d = np.abs(p)
    else:
        kf = np.floor(p / spacing + 0.5)
        d = np.abs(p - kf * spacing)
        k = kf.astype(np.int64)
    hit = (d <= a) & (np.abs(k) <= half_n)
    return np.bincount(k[hit] + half_n, minlength=2 * half_n + 1).astype(np.int64)
