"""Phase-quadrature statistics at the measured interferometer output.

Convention: a coherent state of mean photon number ``N`` is split, picks up
a phase ``phi`` in one arm and is recombined. The measured port's phase
quadrature is Gaussian with

    mean      mu(N, phi) = (sqrt(N) / 2) * sin(phi)
    variance  1/4        (vacuum level)

This is the unique Gaussian convention under which integrating the density
over a vanishing window ``[-a, a]`` and renormalising by ``erf(sqrt(2) a)``
gives ``exp(-N sin(phi)**2 / 2)``: with sigma = 1/2 the density at zero is
``sqrt(2/pi) * exp(-2 mu**2)`` and ``2 mu**2 = N sin(phi)**2 / 2``.

Only the measured port is modelled; the beam splitters and the second port
never enter any downstream quantity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._pykernels import _mass
from .numerics import erf

VACUUM_VARIANCE = 0.25
QUADRATURE_STD = 0.5
# mu +- 12 sigma stands in for the real line; the Gaussian mass outside is
# erfc(12 / sqrt(2)) ~ 1.8e-33
TRUNCATION_SIGMAS = 12.0

_PEAK_DENSITY = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class CoherentSource:
    """Input coherent state, described only by its mean photon number."""

    mean_photon_number: float

    def __post_init__(self):
        n = float(self.mean_photon_number)
        if not math.isfinite(n) or n < 0:
            raise ValueError(f"mean photon number must be finite and >= 0, got {self.mean_photon_number!r}")
        object.__setattr__(self, "mean_photon_number", n)

    @property
    def N(self) -> float:
        return self.mean_photon_number

    def attenuated(self, efficiency: float) -> "CoherentSource":
        """Coherent state after a loss channel of transmission ``efficiency``."""
        if not 0 < efficiency <= 1:
            raise ValueError(f"efficiency must lie in (0, 1], got {efficiency!r}")
        return CoherentSource(self.mean_photon_number * efficiency)


def _photons(source) -> float:
    return source.mean_photon_number if isinstance(source, CoherentSource) else CoherentSource(source).N


def output_mean_p(source, phi):
    """Mean of the measured phase quadrature, ``sqrt(N)/2 * sin(phi)``."""
    return 0.5 * math.sqrt(_photons(source)) * np.sin(phi)


def p_density(p, source, phi):
    """Gaussian density of the quadrature outcome ``p`` (variance 1/4)."""
    mu = output_mean_p(source, phi)
    d = np.asarray(p, dtype=float) - mu
    return _PEAK_DENSITY * np.exp(-2.0 * d * d)


def bin_probability(lo, hi, source, phi):
    """Probability that the quadrature outcome lands in ``[lo, hi]``.

    Uses the complementary error function in the tails so that far-off
    intervals keep their relative precision. Infinite endpoints are allowed.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if np.any(lo > hi):
        raise ValueError("bin_probability requires lo <= hi")
    mu = output_mean_p(source, phi)
    x_lo, x_hi = np.broadcast_arrays(math.sqrt(2.0) * (lo - mu), math.sqrt(2.0) * (hi - mu))
    x_lo = np.array(x_lo, dtype=float, ndmin=1)
    x_hi = np.array(x_hi, dtype=float, ndmin=1)
    out = np.clip(_mass(x_lo, x_hi), 0.0, 1.0)
    if np.ndim(lo) == 0 and np.ndim(hi) == 0 and np.ndim(phi) == 0:
        return float(out[0])
    return out.reshape(np.broadcast(lo, hi, np.asarray(phi, dtype=float)).shape)


def intensity_response(source, phi):
    """Mean photon count at the output port with plain intensity detection."""
    return _photons(source) * np.cos(0.5 * np.asarray(phi, dtype=float)) ** 2


def lambda0(a: float) -> float:
    """Eigenvalue of the accepted outcome, normalising the fringe peak to one."""
    return 1.0 / float(erf(math.sqrt(2.0) * a))
