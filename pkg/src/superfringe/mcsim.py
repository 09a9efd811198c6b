"""Seeded Monte Carlo of the binned homodyne measurement.

Each phase point draws its quadrature samples from its own generator,
``PCG64(SeedSequence(master_seed, spawn_key=(point_index,)))``, so every
curve is a pure function of ``(scheme, source, config)`` no matter how many
worker threads split the grid. Standard normals come from numpy's ziggurat
``Generator.standard_normal``; that sampler is part of the reproducibility
contract.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _backend
from .binning import Scheme, accepted_probability, fringes_of_curve, response, visibility_from_fringes
from .quadmodel import QUADRATURE_STD, CoherentSource, output_mean_p

DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 20130318
CHUNK = 1 << 17


def phase_grid(start: float, stop: float, steps: int) -> np.ndarray:
    """``steps`` points ``start + k (stop - start) / steps``; the end point is excluded."""
    if steps < 1:
        raise ValueError("phase grid needs at least one point")
    if not stop > start:
        raise ValueError("phase grid needs stop > start")
    return start + np.arange(steps) * ((stop - start) / steps)


@dataclass(frozen=True)
class McConfig:
    samples_per_point: int = DEFAULT_SAMPLES
    master_seed: int = DEFAULT_SEED
    phase_grid: np.ndarray = field(default_factory=lambda: phase_grid(-math.pi, math.pi, 256))
    efficiency_eta: float = 1.0
    workers: Optional[int] = None

    def __post_init__(self):
        if int(self.samples_per_point) != self.samples_per_point or self.samples_per_point < 1:
            raise ValueError("samples_per_point must be a positive integer")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if not 0 < self.efficiency_eta <= 1:
            raise ValueError("efficiency_eta must lie in (0, 1]")
        grid = np.asarray(self.phase_grid, dtype=float).ravel()
        if grid.size == 0:
            raise ValueError("phase grid is empty")
        if grid.size > 1 and not (np.all(np.diff(grid) > 0) and grid[-1] - grid[0] < 2 * math.pi):
            raise ValueError("phase grid must be strictly increasing within one period")
        object.__setattr__(self, "phase_grid", grid)
        object.__setattr__(self, "samples_per_point", int(self.samples_per_point))
        object.__setattr__(self, "master_seed", int(self.master_seed))


def point_stream(master_seed: int, point_index: int) -> np.random.Generator:
    """Generator for one phase point; depends only on the seed and the index."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed, spawn_key=(point_index,))))


def sample_quadrature(source, phi: float, stream: np.random.Generator, size=None, efficiency: float = 1.0):
    """Homodyne outcomes of the phase quadrature at phase ``phi``.

    With ``efficiency < 1`` the coherent amplitude is attenuated, i.e. ``N``
    becomes ``efficiency * N``.
    """
    src = source if isinstance(source, CoherentSource) else CoherentSource(source)
    if efficiency != 1.0:
        src = src.attenuated(efficiency)
    mu = output_mean_p(src, phi)
    return mu + QUADRATURE_STD * stream.standard_normal(size)


@dataclass(frozen=True)
class EmpiricalCurve:
    """Monte Carlo response estimate on a phase grid.

    ``bin_hits[i, k]`` counts shots at point ``i`` accepted by window ``k``
    (centre ``k - (n_bins - 1)/2`` spacings from zero).
    """

    phi: np.ndarray
    n_samples: np.ndarray
    bin_hits: np.ndarray
    lam0: float

    @property
    def hits(self) -> np.ndarray:
        return self.bin_hits.sum(axis=1)

    @property
    def q_hat(self) -> np.ndarray:
        return self.hits / self.n_samples

    @property
    def response_hat(self) -> np.ndarray:
        return self.lam0 * self.q_hat

    @property
    def std_err(self) -> np.ndarray:
        q = self.q_hat
        return self.lam0 * np.sqrt(q * (1.0 - q) / self.n_samples)

    @classmethod
    def from_probability(cls, phi, q, n_samples, lam0: float) -> "EmpiricalCurve":
        """Noise-free curve whose hit fractions equal ``q`` (for injecting analytic data)."""
        phi = np.asarray(phi, dtype=float)
        n = np.broadcast_to(np.asarray(n_samples, dtype=float), phi.shape).copy()
        hits = (np.asarray(q, dtype=float) * n)[:, None]
        return cls(phi, n, hits, float(lam0))


def _simulate_point(scheme: Scheme, mu: float, n: int, seed: int, index: int) -> np.ndarray:
    stream = point_stream(seed, index)
    half_n = (scheme.n_bins - 1) // 2
    counts = np.zeros(scheme.n_bins, dtype=np.int64)
    left = n
    while left > 0:
        take = min(left, CHUNK)
        z = stream.standard_normal(take)
        counts += _backend.count_hits(z, mu, QUADRATURE_STD, scheme.a, scheme.spacing, half_n)
        left -= take
    return counts


def simulate_scan(scheme: Scheme, source, config: McConfig) -> EmpiricalCurve:
    """Bin ``samples_per_point`` homodyne shots at every grid phase."""
    src = source if isinstance(source, CoherentSource) else CoherentSource(source)
    if config.efficiency_eta != 1.0:
        src = src.attenuated(config.efficiency_eta)
    grid = config.phase_grid
    mus = np.atleast_1d(output_mean_p(src, grid))
    n = config.samples_per_point
    job = lambda i: _simulate_point(scheme, float(mus[i]), n, config.master_seed, i)
    indices = range(grid.size)
    if config.workers and config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(job, indices))
    else:
        rows = [job(i) for i in indices]
    return EmpiricalCurve(grid.copy(), np.full(grid.size, n, dtype=np.int64), np.vstack(rows), scheme.lam0)


@dataclass(frozen=True)
class EmpiricalSensitivity:
    phi: np.ndarray
    slope: np.ndarray
    slope_noise: np.ndarray
    sensitivity: np.ndarray  # NaN where unreliable
    reliable: np.ndarray


def empirical_sensitivity(curve: EmpiricalCurve, noise_factor: float = 3.0) -> EmpiricalSensitivity:
    """Per-point phase sensitivity from a measured response curve.

    The slope is a central difference (one-sided at the two ends) of
    ``response_hat``; the single-shot spread is ``lam0 sqrt(q (1 - q))``.
    Points whose slope is below ``noise_factor`` times its propagated
    statistical error are flagged unreliable and carry NaN.
    """
    phi = np.asarray(curve.phi, dtype=float)
    if phi.size < 3:
        raise ValueError("empirical sensitivity needs at least 3 points")
    steps = np.diff(phi)
    h = steps[0]
    if not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ValueError("empirical sensitivity needs a uniform phase grid")
    r = curve.response_hat
    se = curve.std_err

    slope = np.empty_like(r)
    noise = np.empty_like(r)
    slope[1:-1] = (r[2:] - r[:-2]) / (2 * h)
    noise[1:-1] = np.sqrt(se[2:] ** 2 + se[:-2] ** 2) / (2 * h)
    slope[0] = (r[1] - r[0]) / h
    noise[0] = math.sqrt(se[1] ** 2 + se[0] ** 2) / h
    slope[-1] = (r[-1] - r[-2]) / h
    noise[-1] = math.sqrt(se[-1] ** 2 + se[-2] ** 2) / h

    q = curve.q_hat
    spread = curve.lam0 * np.sqrt(q * (1.0 - q))
    reliable = (np.abs(slope) > noise_factor * noise) & (np.abs(slope) > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sens = np.where(reliable, spread / np.abs(slope), np.nan)
    return EmpiricalSensitivity(phi, slope, noise, sens, reliable)


@dataclass(frozen=True)
class PullStats:
    mean: float
    variance: float
    count: int
    excluded: int
    coverage_4sigma: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "count": self.count,
            "excluded": self.excluded,
            "coverage_4sigma": self.coverage_4sigma,
        }


def pulls(curve: EmpiricalCurve, scheme: Scheme, source) -> np.ndarray:
    """``(response_hat - analytic) / std_err``; NaN where ``std_err`` is zero."""
    analytic = np.atleast_1d(response(scheme, source, curve.phi))
    se = curve.std_err
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, (curve.response_hat - analytic) / se, np.nan)


def pull_stats(values) -> PullStats:
    v = np.asarray(values, dtype=float).ravel()
    ok = v[np.isfinite(v)]
    if not ok.size:
        return PullStats(math.nan, math.nan, 0, int(v.size), math.nan)
    return PullStats(
        float(ok.mean()),
        float(ok.var()),
        int(ok.size),
        int(v.size - ok.size),
        float(np.mean(np.abs(ok) <= 4.0)),
    )


def empirical_fringes(curve: EmpiricalCurve):
    """Fringes of ``response_hat`` (grid must span one full period)."""
    return fringes_of_curve(curve.phi, curve.response_hat)


def empirical_visibility(curve: EmpiricalCurve):
    return visibility_from_fringes(empirical_fringes(curve))


def empirical_fwhm(curve: EmpiricalCurve) -> float:
    """FWHM of the fringe nearest ``phi = 0`` by linear interpolation of the half-level crossings."""
    phi = np.asarray(curve.phi, dtype=float)
    y = curve.response_hat
    n = phi.size
    period = (phi[-1] - phi[0]) * n / (n - 1)
    top_i = int(np.argmin(np.abs(np.angle(np.exp(1j * phi)))))
    top = y[top_i]
    bottom = float(y.min())
    if top - bottom < 1e-12:
        raise ValueError("curve is flat; FWHM undefined")
    half = bottom + 0.5 * (top - bottom)

    def crossing(direction):
        i = top_i
        for _ in range(n):
            j = (i + direction) % n
            if y[j] < half:
                # interpolate between i (>= half) and j (< half)
                t = (y[i] - half) / (y[i] - y[j])
                return (abs((j - top_i) * direction % n) - 1 + t) * (period / n)
            i = j
        raise ValueError("curve never drops below half maximum")

    return crossing(+1) + crossing(-1)


def analytic_probability(curve: EmpiricalCurve, scheme: Scheme, source) -> np.ndarray:
    return np.atleast_1d(accepted_probability(scheme, source, curve.phi))
