"""Binned-homodyne measurement schemes and their analytic fringe properties.

A scheme accepts quadrature outcomes falling in one window ``[-a, a]``
(binary) or in an odd comb of equal windows centred on ``k * b``
(multi-bin). Accepted outcomes carry the eigenvalue
``lambda0 = 1 / erf(sqrt(2) a)`` and rejected ones carry zero, so with
``q(phi)`` the accepted probability:

    response  <Pi>        = lambda0 * q
    variance  <dPi^2>     = <Pi> * (lambda0 - <Pi>)     (windows disjoint)
    sensitivity dphi      = sqrt(q (1 - q)) / |dq/dphi|

The sensitivity is independent of the eigenvalue normalisation.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _backend
from .numerics import (
    ToleranceSpec,
    erfc,
    find_root,
    golden_section,
    minimize_1d,
    peak_indices,
)
from .quadmodel import CoherentSource, lambda0

TWO_PI = 2.0 * math.pi
LN2 = math.log(2.0)
SUPER_RESOLUTION_THRESHOLD = 2.0 * LN2

# sensitivity at stationary phases: the error-propagation formula diverges
UNDEFINED_SENSITIVITY = math.inf

FRINGE_GRID = 4096
PROMINENCE_FRACTION = 0.01
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class BinaryScheme:
    half_width_a: float

    def __post_init__(self):
        a = float(self.half_width_a)
        if not (math.isfinite(a) and a > 0):
            raise ValueError(f"half-width a must be finite and > 0, got {self.half_width_a!r}")
        object.__setattr__(self, "half_width_a", a)

    @property
    def a(self) -> float:
        return self.half_width_a

    @property
    def n_bins(self) -> int:
        return 1

    @property
    def spacing(self) -> float:
        return 0.0

    @property
    def lam0(self) -> float:
        return lambda0(self.half_width_a)

    @property
    def centers(self) -> np.ndarray:
        return np.zeros(1)

    def intervals(self) -> list[tuple[float, float]]:
        return [(-self.half_width_a, self.half_width_a)]


@dataclass(frozen=True)
class MultiScheme:
    """``n_bins`` windows of half-width ``a`` centred on ``b * k``, ``|k| <= (n-1)/2``."""

    half_width_a: float
    spacing_b: float
    n_bins: int

    def __post_init__(self):
        a, b = float(self.half_width_a), float(self.spacing_b)
        if not (math.isfinite(a) and a > 0):
            raise ValueError(f"half-width a must be finite and > 0, got {self.half_width_a!r}")
        if not math.isfinite(b) or b <= 2 * a:
            raise ValueError(f"bins overlap: spacing b={b!r} must exceed 2a={2 * a!r}")
        n = int(self.n_bins)
        if n != self.n_bins or n < 1 or n % 2 == 0:
            raise ValueError(f"n_bins must be an odd positive integer, got {self.n_bins!r}")
        object.__setattr__(self, "half_width_a", a)
        object.__setattr__(self, "spacing_b", b)
        object.__setattr__(self, "n_bins", n)

    @property
    def a(self) -> float:
        return self.half_width_a

    @property
    def spacing(self) -> float:
        return self.spacing_b

    @property
    def lam0(self) -> float:
        return lambda0(self.half_width_a)

    @property
    def centers(self) -> np.ndarray:
        h = (self.n_bins - 1) // 2
        return self.spacing_b * np.arange(-h, h + 1, dtype=float)

    def intervals(self) -> list[tuple[float, float]]:
        return [(c - self.half_width_a, c + self.half_width_a) for c in self.centers]


Scheme = Union[BinaryScheme, MultiScheme]


def _photons(source) -> float:
    return source.mean_photon_number if isinstance(source, CoherentSource) else CoherentSource(source).N


def _shape_out(values: np.ndarray, shape):
    return float(values[0]) if shape == () else values.reshape(shape)


def _accepted(scheme: Scheme, source, phi):
    """Accepted probability q, dq/dphi and a rounding scale for dq, on flat phi."""
    phi = np.asarray(phi, dtype=float)
    flat = np.atleast_1d(phi).ravel()
    amp = 0.5 * math.sqrt(_photons(source))
    mu = amp * np.sin(flat)
    q, dq_dmu, scale = _backend.interval_mass(mu, scheme.a, scheme.spacing, (scheme.n_bins - 1) // 2)
    return phi.shape, flat, q, dq_dmu, scale, np.cos(flat), amp


def accepted_probability(scheme: Scheme, source, phi):
    """Probability ``q`` that one shot lands in an accepted window."""
    shape, _, q, *_ = _accepted(scheme, source, phi)
    return _shape_out(q, shape)


def response(scheme: Scheme, source, phi):
    shape, _, q, *_ = _accepted(scheme, source, phi)
    return _shape_out(scheme.lam0 * q, shape)


def response_binary(scheme: BinaryScheme, source, phi):
    """Binary-window response ``[erf(sqrt2 (a - mu)) + erf(sqrt2 (a + mu))] / (2 erf(sqrt2 a))``."""
    if not isinstance(scheme, BinaryScheme):
        raise TypeError("response_binary expects a BinaryScheme")
    return response(scheme, source, phi)


def response_multi(scheme: MultiScheme, source, phi):
    if not isinstance(scheme, MultiScheme):
        raise TypeError("response_multi expects a MultiScheme")
    return response(scheme, source, phi)


def response_a0(source, phi):
    """Vanishing-window limit of the binary response, ``exp(-N sin^2(phi) / 2)``."""
    n = _photons(source)
    s = np.sin(np.asarray(phi, dtype=float))
    out = np.exp(-0.5 * n * s * s)
    return float(out) if np.ndim(out) == 0 else out


def response_derivative(scheme: Scheme, source, phi):
    """Closed-form d<Pi>/dphi."""
    shape, _, _, dq_dmu, _, cos, amp = _accepted(scheme, source, phi)
    return _shape_out(scheme.lam0 * dq_dmu * amp * cos, shape)


def variance(scheme: Scheme, source, phi):
    """``<Pi> (lambda0 - <Pi>)``; exact because the accepted windows are disjoint."""
    shape, _, q, *_ = _accepted(scheme, source, phi)
    lam = scheme.lam0
    resp = lam * q
    return _shape_out(resp * (lam - resp), shape)


def _stationary(flat, dq_dmu, scale, cos, amp):
    # derivative indistinguishable from its own rounding noise, or cos(phi) == 0
    flat_mu = np.abs(dq_dmu) <= 16.0 * _EPS * scale
    flat_phase = np.abs(cos) <= 8.0 * _EPS * np.maximum(1.0, np.abs(flat))
    return flat_mu | flat_phase | (dq_dmu == 0.0) | (amp == 0.0)


def sensitivity(scheme: Scheme, source, phi, eigenvalue_scale: float = 1.0):
    """Error-propagation phase uncertainty ``Delta Pi / |d<Pi>/dphi|``.

    Stationary phases (fringe tops and troughs) and phases where no outcome
    can be accepted give ``UNDEFINED_SENSITIVITY`` (``inf``) instead of a
    quotient of rounding noise.

    ``eigenvalue_scale`` multiplies ``lambda0``; it exists to demonstrate that
    the result does not depend on it.
    """
    shape, flat, q, dq_dmu, scale, cos, amp = _accepted(scheme, source, phi)
    lam = eigenvalue_scale * scheme.lam0
    resp = lam * q
    spread = np.sqrt(np.maximum(resp * (lam - resp), 0.0))
    slope = np.abs(lam * dq_dmu * amp * cos)
    bad = _stationary(flat, dq_dmu, scale, cos, amp) | (q <= 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, UNDEFINED_SENSITIVITY, spread / np.where(bad, 1.0, slope))
    return _shape_out(out, shape)


def sensitivity_from_probability(scheme: Scheme, source, phi):
    """Same quantity written in accepted-probability terms, ``sqrt(q(1-q)) / |q'|``."""
    shape, flat, q, dq_dmu, scale, cos, amp = _accepted(scheme, source, phi)
    bad = _stationary(flat, dq_dmu, scale, cos, amp) | (q <= 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, UNDEFINED_SENSITIVITY, np.sqrt(q * (1.0 - q)) / np.abs(dq_dmu * amp * cos))
    return _shape_out(out, shape)


@dataclass(frozen=True)
class ClosedFormMinimum:
    delta_phi_min: float
    phi_min: float


def sensitivity_min_closed_form(source) -> ClosedFormMinimum:
    """Closed-form vanishing-window minimum sensitivity and its phase.

    delta_phi_min = sqrt( sqrt(pi/2) (exp((2 + N - sqrt(4 + N^2)) / 4) - sqrt(2/pi))
                          / (sqrt(4 + N^2) - 2) )
    phi_min       = arccos sqrt(1/2 - 1/N + sqrt(4 + N^2) / (2N))

    Evaluated as written, with the cancelling differences rearranged so large
    ``N`` keeps full precision. ``delta_phi_min * sqrt(N)`` tends to
    ``sqrt(sqrt(e pi / 2) - 1) ~ 1.0326``. This is reported alongside, not in
    place of, :func:`min_sensitivity`.
    """
    n = _photons(source)
    if not n > 0:
        raise ValueError("closed-form minimum needs N > 0")
    root = math.sqrt(4.0 + n * n)
    exponent = 0.5 - 1.0 / (n + root)  # (2 + N - root) / 4
    denom = n * n / (root + 2.0)  # root - 2
    delta = math.sqrt(math.sqrt(math.pi / 2.0) * (math.exp(exponent) - math.sqrt(2.0 / math.pi)) / denom)

    arg_sq = 0.5 - 1.0 / n + root / (2.0 * n)
    if not (-1e-12 <= arg_sq <= 1.0 + 1e-12):
        raise ValueError(f"arccos argument out of domain: {math.sqrt(abs(arg_sq))!r}")
    # 1 - arg_sq written without cancellation; phi = arcsin(sqrt(1 - arg^2)) = arccos(arg)
    gap = 1.0 / n - (2.0 / (n * n)) / (1.0 + math.sqrt(1.0 + 4.0 / (n * n)))
    phi = math.asin(math.sqrt(min(max(gap, 0.0), 1.0)))
    return ClosedFormMinimum(delta, phi)


def sensitivity_finite_a_closed_form(scheme: BinaryScheme, source, phi):
    """Finite-window closed-form sensitivity expression, evaluated term by term.

    Kept for side-by-side output only: it does not agree with
    :func:`sensitivity` and no invariant relies on it.
    """
    a = scheme.a
    n = _photons(source)
    phi = np.asarray(phi, dtype=float)
    s = np.sin(phi)
    c = np.cos(phi)
    g_plus = math.sqrt(2.0) * (a + 0.5 * math.sqrt(n) * s)
    g_minus = math.sqrt(2.0) * (a - 0.5 * math.sqrt(n) * s)
    k = erfc(math.sqrt(2.0) * g_minus) + erfc(math.sqrt(2.0) * g_plus)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        num = np.exp((2.0 * a + math.sqrt(n) * s) ** 2 * (2.0 - k) * k)
        den = n * c * c * (np.exp(4.0 * a * math.sqrt(n) * s) - 1.0) ** 2
        out = np.sqrt(math.pi / 2.0 * num / den)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SensitivityMinimum:
    min_sensitivity: float
    phi_at_min: float


def min_sensitivity(scheme: Scheme, source, n_grid: Optional[int] = None) -> SensitivityMinimum:
    """Smallest sensitivity over one period (dense grid, then golden section)."""
    n = _photons(source)
    grid = n_grid or max(FRINGE_GRID, int(64 * math.sqrt(n)))
    best = minimize_1d(
        lambda p: sensitivity(scheme, source, p),
        0.0,
        TWO_PI,
        ToleranceSpec(abs_tol=1e-12, rel_tol=1e-12, max_iterations=400),
        n_grid=grid,
        vectorized=True,
    )
    return SensitivityMinimum(best.f_min, best.x_min % TWO_PI)


def fwhm_closed_form(source) -> float:
    """``2 arcsin sqrt(2 ln 2 / N)``; defined for ``N >= 2 ln 2``."""
    n = _photons(source)
    if n < SUPER_RESOLUTION_THRESHOLD:
        raise ValueError(f"closed-form FWHM needs N >= 2 ln 2, got N={n!r}")
    return 2.0 * math.asin(math.sqrt(SUPER_RESOLUTION_THRESHOLD / n))


def fwhm_of_curve(func: Callable, n_grid: int = FRINGE_GRID, abs_tol: float = 1e-10) -> float:
    """Width of the fringe centred on ``phi = 0`` of a 2*pi-periodic curve.

    The half level is ``min + (max - min) / 2`` over one period. Crossings on
    both sides of the peak are bracketed on the grid and bisected.
    """
    phi = np.arange(n_grid) * (TWO_PI / n_grid)
    y = np.asarray(func(phi), dtype=float)
    h = TWO_PI / n_grid
    scalar = lambda t: float(np.asarray(func(np.array([t])))[0])

    top = y[0]
    t_peak, neg = golden_section(lambda t: -scalar(t), -h, h, abs_tol)
    top = max(top, -neg)
    i_min = int(np.argmin(y))
    _, bottom = golden_section(scalar, phi[i_min] - h, phi[i_min] + h, abs_tol)
    bottom = min(bottom, y[i_min])
    if top - bottom < 1e-12:
        raise ValueError("curve is flat; FWHM undefined")
    half = bottom + 0.5 * (top - bottom)

    below = np.flatnonzero(y < half)
    if not below.size:
        raise ValueError("curve never drops below half maximum")
    tol = ToleranceSpec(abs_tol=abs_tol, rel_tol=abs_tol, max_iterations=200)
    j = int(below[0])
    right = find_root(lambda t: scalar(t) - half, phi[j - 1], phi[j], tol)
    j = int(below[-1])
    hi = phi[j + 1] if j + 1 < n_grid else TWO_PI
    left = find_root(lambda t: scalar(t) - half, phi[j], hi, tol)
    return right + (TWO_PI - left)


def fwhm(scheme: Optional[Scheme], source, n_grid: int = FRINGE_GRID) -> float:
    """FWHM of the central fringe; ``scheme=None`` selects the a -> 0 closed form."""
    if scheme is None:
        return fwhm_closed_form(source)
    n = _photons(source)
    grid = max(n_grid, int(64 * math.sqrt(n)))
    return fwhm_of_curve(lambda p: response(scheme, source, p), grid)


def fwhm_a0_numeric(source, n_grid: int = FRINGE_GRID) -> float:
    """Numeric FWHM of the vanishing-window response (same rules as :func:`fwhm`)."""
    n = _photons(source)
    return fwhm_of_curve(lambda p: response_a0(source, p), max(n_grid, int(64 * math.sqrt(n))))


@dataclass(frozen=True)
class Fringe:
    phi: float
    peak: float
    trough_left: float
    trough_right: float

    @property
    def visibility(self) -> float:
        deepest = min(self.trough_left, self.trough_right)
        return (self.peak - deepest) / (self.peak + deepest)


def _refine_extremum(scalar, centre, h, maximize, fallback):
    if maximize:
        x, v = golden_section(lambda t: -scalar(t), centre - h, centre + h, 1e-10)
        v = -v
        return (x, v) if v >= fallback else (centre, fallback)
    x, v = golden_section(scalar, centre - h, centre + h, 1e-10)
    return (x, v) if v <= fallback else (centre, fallback)


def fringes_of_curve(
    phi: np.ndarray,
    y: np.ndarray,
    func: Optional[Callable] = None,
    prominence_fraction: float = PROMINENCE_FRACTION,
) -> list[Fringe]:
    """Fringes of a sampled curve on one period ``[phi0, phi0 + 2 pi)``.

    Peaks are local maxima with prominence >= ``prominence_fraction`` of the
    curve's range, found with periodic wrap-around. Each fringe's troughs are
    the minima of the arcs to the neighbouring peaks. With ``func`` (a
    vectorised evaluator of the sampled curve) peak and trough values are
    polished by golden section.
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    span = float(y.max() - y.min())
    if span < 1e-12:
        return []
    idx, _ = peak_indices(y, prominence_fraction * span, periodic=True)
    if not idx.size:
        return []
    h = TWO_PI / n
    scalar = None
    if func is not None:
        scalar = lambda t: float(np.asarray(func(np.array([t])))[0])

    peaks = []
    for i in idx:
        if scalar is None:
            peaks.append((phi[i], y[i]))
        else:
            peaks.append(_refine_extremum(scalar, phi[i], h, True, y[i]))

    troughs = []  # troughs[j] sits between peak j and peak j+1
    m = idx.size
    for j in range(m):
        start = idx[j]
        stop = idx[(j + 1) % m] if m > 1 else idx[j] + n
        if stop <= start:
            stop += n
        arc = np.arange(start, stop + 1) % n
        k = int(arc[np.argmin(y[arc])])
        if scalar is None:
            troughs.append(y[k])
        else:
            troughs.append(_refine_extremum(scalar, phi[k], h, False, y[k])[1])

    return [
        Fringe(float(peaks[j][0]) % TWO_PI, float(peaks[j][1]), float(troughs[j - 1]), float(troughs[j]))
        for j in range(m)
    ]


def fringes(scheme: Scheme, source, n_grid: int = FRINGE_GRID) -> list[Fringe]:
    phi = np.arange(n_grid) * (TWO_PI / n_grid)
    func = lambda p: response(scheme, source, p)
    return fringes_of_curve(phi, func(phi), func)


def count_fringes(scheme: Scheme, source, n_grid: int = FRINGE_GRID) -> int:
    """Number of prominent maxima of the response per 2*pi."""
    phi = np.arange(n_grid) * (TWO_PI / n_grid)
    y = np.asarray(response(scheme, source, phi))
    span = float(y.max() - y.min())
    if span < 1e-12:
        return 0
    idx, _ = peak_indices(y, PROMINENCE_FRACTION * span, periodic=True)
    return int(idx.size)


@dataclass(frozen=True)
class VisibilityResult:
    minimum: float
    mean: float
    per_fringe: tuple = field(default=())
    fringe_count: int = 0


def visibility_from_fringes(found: list[Fringe]) -> VisibilityResult:
    if not found:
        raise ValueError("no fringe detected; visibility undefined")
    v = np.array([f.visibility for f in found])
    return VisibilityResult(float(v.min()), float(v.mean()), tuple(float(x) for x in v), len(found))


def visibility(scheme: Scheme, source, n_grid: int = FRINGE_GRID) -> VisibilityResult:
    """Per-fringe ``(peak - trough) / (peak + trough)`` using the deeper neighbour trough.

    ``minimum`` is the headline figure; ``mean`` is the average over the
    fringes in one period.
    """
    return visibility_from_fringes(fringes(scheme, source, n_grid))


@dataclass(frozen=True)
class ScanSummary:
    fwhm: float
    visibility: float
    visibility_mean: float
    fringe_count: int
    min_sensitivity: float
    phi_at_min: float

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(scheme: Scheme, source) -> ScanSummary:
    width = fwhm(scheme, source)
    vis = visibility(scheme, source)
    best = min_sensitivity(scheme, source)
    return ScanSummary(width, vis.minimum, vis.mean, vis.fringe_count, best.min_sensitivity, best.phi_at_min)


@dataclass(frozen=True)
class SpacingResult:
    b: Optional[float]
    n_bins: int
    M: int
    visibility: float

    def scheme(self, a: float) -> Scheme:
        if self.b is None or self.n_bins == 1:
            return BinaryScheme(a)
        return MultiScheme(a, self.b, self.n_bins)


def _candidate_metrics(a, b, n_bins, source):
    found = fringes(MultiScheme(a, b, n_bins), source)
    if not found:
        return 0, 0.0
    return len(found), min(f.visibility for f in found)


def _bin_counts(top: float, b: float) -> list[int]:
    n0 = 2 * int(math.floor(top / b)) + 1
    return sorted({n for n in (n0 - 2, n0, n0 + 2) if n >= 3})


def spacing_grid(source, a: float = 0.5, n_coarse: int = 160) -> np.ndarray:
    """Coarse spacings covering ``(2a, sqrt(N)/2 + 3a]``."""
    top = 0.5 * math.sqrt(_photons(source))
    lo, hi = 2.0 * a, top + 3.0 * a
    return lo + (hi - lo) * np.arange(1, n_coarse + 1) / n_coarse


def scan_spacings(source, a: float = 0.5, n_coarse: int = 160, workers: Optional[int] = None):
    """``(b, n_bins, M, min visibility)`` for every coarse candidate, in grid order."""
    top = 0.5 * math.sqrt(_photons(source))
    jobs = [(float(b), n) for b in spacing_grid(source, a, n_coarse) for n in _bin_counts(top, b)]
    run = lambda job: _candidate_metrics(a, job[0], job[1], source)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            metrics = list(pool.map(run, jobs))
    else:
        metrics = [run(job) for job in jobs]
    return [(b, n, m, v) for (b, n), (m, v) in zip(jobs, metrics)]


def optimize_spacing(
    source,
    a: float = 0.5,
    visibility_threshold: float = 0.95,
    n_coarse: int = 160,
    workers: Optional[int] = None,
    candidates=None,
) -> SpacingResult:
    """Bin spacing that maximises the fringe count at a minimum visibility.

    Every coarse spacing is tried with the bin count that just covers the
    quadrature sweep ``sqrt(N)/2`` and one ring fewer and more. The smallest
    spacing reaching the best feasible count wins; golden section then moves
    ``b`` inside its feasible run to the highest minimum visibility. Falls
    back to the binary window (two fringes) when no comb qualifies.
    ``candidates`` may carry a precomputed :func:`scan_spacings` table.
    """
    n = _photons(source)
    if not n > 0:
        raise ValueError("optimize_spacing needs N > 0")
    if not 0 < visibility_threshold < 1:
        raise ValueError("visibility threshold must lie in (0, 1)")
    binary = BinaryScheme(a)
    table = candidates if candidates is not None else scan_spacings(source, a, n_coarse, workers)
    feasible = [row for row in table if row[2] > 2 and row[3] >= visibility_threshold]
    if not feasible:
        return SpacingResult(None, 1, 2, visibility(binary, source).minimum)

    best_m = max(row[2] for row in feasible)
    winners = [row for row in feasible if row[2] == best_m]
    b0 = min(row[0] for row in winners)
    at_b0 = [row for row in winners if row[0] == b0]
    b0, n_bins, _, v0 = max(at_b0, key=lambda row: (row[3], -row[1]))

    grid = sorted({row[0] for row in table})
    i = grid.index(b0)
    lo = grid[i - 1] if i > 0 else 2.0 * a * (1 + 1e-9)
    j = i
    while j + 1 < len(grid) and any(
        row[0] == grid[j + 1] and row[1] == n_bins and row[2] == best_m and row[3] >= visibility_threshold
        for row in table
    ):
        j += 1
    hi = grid[j + 1] if j + 1 < len(grid) else grid[j]

    def objective(b):
        if b <= 2.0 * a:
            return 1.0
        m, v = _candidate_metrics(a, b, n_bins, source)
        return -v if m == best_m else 1.0

    b_ref, neg = golden_section(objective, lo, hi, abs_tol=1e-6)
    if -neg >= max(v0, visibility_threshold):
        return SpacingResult(float(b_ref), n_bins, best_m, float(-neg))
    return SpacingResult(float(b0), n_bins, best_m, float(v0))


def fit_power_law(x, y) -> tuple[float, float]:
    """Least-squares fit of ``y = c * x**p`` in log-log space; returns ``(p, c)``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    p, logc = np.polyfit(lx, ly, 1)
    return float(p), float(math.exp(logc))
