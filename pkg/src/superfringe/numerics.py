"""Numeric kernels shared by the analytic and Monte Carlo layers.

Everything here is deterministic and free of global state. The quadrature
routine is an independent oracle: it only ever sees a density, never the
error-function closed forms it is used to check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import heapq
import numpy as np
from scipy import special

__all__ = [
    "ToleranceSpec",
    "ConvergenceError",
    "BracketError",
    "erf",
    "erfc",
    "integrate",
    "find_root",
    "golden_section",
    "minimize_1d",
    "Minimum",
    "peak_indices",
    "find_local_maxima",
]

INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ToleranceSpec:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_iterations: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


class ConvergenceError(RuntimeError):
    """A procedure ran out of iterations before meeting its tolerance.

    The best available estimate and its error bound travel with the error so
    callers can decide whether it is good enough.
    """

    def __init__(self, message: str, estimate: float, error_bound: float):
        super().__init__(f"{message} (estimate={estimate!r}, error_bound={error_bound!r})")
        self.estimate = estimate
        self.error_bound = error_bound


class BracketError(ValueError):
    pass


def erf(x):
    """Error function. Accepts scalars or arrays; odd, saturates at +-1."""
    return special.erf(x)


def erfc(x):
    return special.erfc(x)


# 15-point Kronrod rule with its embedded 7-point Gauss rule on [-1, 1].
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _gk15(f, lo, hi, vectorized):
    centre = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    xs = centre + half * _NODES
    if vectorized:
        fx = np.asarray(f(xs), dtype=float)
    else:
        fx = np.array([f(x) for x in xs], dtype=float)
    if not np.all(np.isfinite(fx)):
        raise ValueError(f"integrand is not finite on [{lo}, {hi}]")
    kronrod = half * float(fx @ _KWEIGHTS)
    gauss = half * float(fx @ _GWEIGHTS)
    return kronrod, abs(kronrod - gauss)


def integrate(
    f: Callable,
    lo: float,
    hi: float,
    tol: Optional[ToleranceSpec] = None,
    vectorized: bool = False,
) -> float:
    """Adaptive Gauss-Kronrod (7/15) quadrature of ``f`` over ``[lo, hi]``.

    The interval with the largest error estimate is bisected until the summed
    estimate is below ``max(abs_tol, rel_tol * |I|)``. ``max_iterations``
    bounds the number of bisections. Pass ``vectorized=True`` when ``f``
    accepts a numpy array of abscissae.

    Raises
    ------
    ConvergenceError
        If the bisection budget runs out; carries the best estimate.
    """
    tol = tol or ToleranceSpec(abs_tol=1e-13, rel_tol=1e-13, max_iterations=2000)
    if lo == hi:
        return 0.0
    sign = 1.0
    if hi < lo:
        lo, hi, sign = hi, lo, -1.0

    value, err = _gk15(f, lo, hi, vectorized)
    heap = [(-err, lo, hi, value)]
    total, total_err = value, err
    iterations = 0
    while total_err > max(tol.abs_tol, tol.rel_tol * abs(total)):
        if iterations >= tol.max_iterations:
            raise ConvergenceError("adaptive quadrature did not converge", sign * total, total_err)
        neg_err, a, b, v = heapq.heappop(heap)
        mid = 0.5 * (a + b)
        if not (a < mid < b):
            raise ConvergenceError("interval collapsed below float resolution", sign * total, total_err)
        left, left_err = _gk15(f, a, mid, vectorized)
        right, right_err = _gk15(f, mid, b, vectorized)
        heapq.heappush(heap, (-left_err, a, mid, left))
        heapq.heappush(heap, (-right_err, mid, b, right))
        # resum rather than update incrementally so cancellation cannot drift
        total = math.fsum(item[3] for item in heap)
        total_err = math.fsum(-item[0] for item in heap)
        iterations += 1
    return sign * total


def find_root(
    f: Callable[[float], float],
    bracket_lo: float,
    bracket_hi: float,
    tol: Optional[ToleranceSpec] = None,
) -> float:
    """Bisection on a sign-changing bracket until its width is <= abs_tol."""
    tol = tol or ToleranceSpec(abs_tol=1e-12, rel_tol=1e-12, max_iterations=200)
    lo, hi = float(bracket_lo), float(bracket_hi)
    f_lo, f_hi = f(lo), f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if not (np.sign(f_lo) * np.sign(f_hi) < 0):
        raise BracketError(f"f does not change sign on [{lo}, {hi}]: f(lo)={f_lo}, f(hi)={f_hi}")
    for _ in range(tol.max_iterations):
        if abs(hi - lo) <= tol.abs_tol:
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            # bracket is one ulp wide; nothing finer exists
            return mid
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    raise ConvergenceError("bisection did not reach abs_tol", 0.5 * (lo + hi), abs(hi - lo))


def golden_section(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    abs_tol: float = 1e-10,
    max_iterations: int = 200,
) -> tuple[float, float]:
    """Golden-section search for a minimum of a unimodal ``f`` on ``[lo, hi]``."""
    a, b = float(lo), float(hi)
    x1 = b - INV_GOLDEN * (b - a)
    x2 = a + INV_GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    it = 0
    while abs(b - a) > abs_tol and it < max_iterations:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_GOLDEN * (b - a)
            f2 = f(x2)
        it += 1
    if abs(b - a) > abs_tol:
        best = x1 if f1 <= f2 else x2
        raise ConvergenceError("golden-section search did not converge", best, abs(b - a))
    return (x1, f1) if f1 <= f2 else (x2, f2)


class Minimum(NamedTuple):
    x_min: float
    f_min: float


def minimize_1d(
    f: Callable,
    lo: float,
    hi: float,
    tol: Optional[ToleranceSpec] = None,
    n_grid: int = 256,
    vectorized: bool = False,
) -> Minimum:
    """Global-ish 1-D minimum: coarse grid scan, then golden-section polish.

    The grid has ``max(n_grid, 256)`` points including both ends. Golden
    section runs on the two cells around the best grid point; the better of
    the polished and the grid value is returned, so the result never regresses
    below the coarse scan. Infinite or NaN grid values are skipped.
    """
    if not lo < hi:
        raise ValueError(f"invalid interval [{lo}, {hi}]")
    tol = tol or ToleranceSpec(abs_tol=1e-12, rel_tol=1e-12, max_iterations=300)
    n = max(int(n_grid), 256)
    xs = np.linspace(lo, hi, n)
    if vectorized:
        fs = np.asarray(f(xs), dtype=float)
    else:
        fs = np.array([f(x) for x in xs], dtype=float)
    finite = np.isfinite(fs)
    if not finite.any():
        raise ValueError("objective is not finite anywhere on the grid")
    i = int(np.argmin(np.where(finite, fs, np.inf)))
    left = xs[max(i - 1, 0)]
    right = xs[min(i + 1, n - 1)]

    scalar = (lambda x: float(f(np.array([x]))[0])) if vectorized else f
    x_ref, f_ref = golden_section(scalar, left, right, tol.abs_tol, tol.max_iterations)
    if np.isfinite(f_ref) and f_ref <= fs[i]:
        return Minimum(float(x_ref), float(f_ref))
    return Minimum(float(xs[i]), float(fs[i]))


def _candidate_maxima(y: np.ndarray, periodic: bool) -> list[int]:
    """Indices of strict local maxima; a flat top reports its middle sample."""
    n = y.size
    if periodic:
        prev = np.roll(y, 1)
        nxt = np.roll(y, -1)
    else:
        prev = np.concatenate([[-np.inf], y[:-1]])
        nxt = np.concatenate([y[1:], [-np.inf]])
    rising = y > prev
    out = []
    for i in np.flatnonzero(rising & (y > nxt)):
        out.append(int(i))
    for i in np.flatnonzero(rising & (y == nxt)):
        j = int(i)
        steps = 0
        while steps < n:
            k = (j + 1) % n if periodic else j + 1
            if k >= n or y[k] != y[i]:
                break
            j = k
            steps += 1
        after = y[(j + 1) % n] if periodic else (y[j + 1] if j + 1 < n else -np.inf)
        if steps < n - 1 and after < y[i]:
            width = steps + 1
            out.append(int((i + (width - 1) // 2) % n))
    return sorted(out)


def peak_indices(y: Sequence[float], prominence: float, periodic: bool = True):
    """Local maxima of ``y`` whose topographic prominence is >= ``prominence``.

    Returns ``(indices, prominences)``. With ``periodic`` the last sample is a
    neighbour of the first. A peak with no higher sample anywhere (a global
    maximum, ties included) takes the global minimum as its reference.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 3:
        return np.array([], dtype=int), np.array([])
    idx, prom = [], []
    for i in _candidate_maxima(y, periodic):
        v = y[i]
        if periodic:
            right = np.roll(y, -i)[1:]
            left = right[::-1]
        else:
            right = y[i + 1:]
            left = y[:i][::-1]
        bases = []
        for side in (left, right):
            if side.size == 0:
                continue
            higher = np.flatnonzero(side > v)
            seg = side[: higher[0]] if higher.size else side
            bases.append(seg.min() if seg.size else v)
        base = max(bases) if bases else v
        p = v - base
        if p >= prominence:
            idx.append(i)
            prom.append(p)
    return np.array(idx, dtype=int), np.array(prom, dtype=float)


def find_local_maxima(
    x: Sequence[float],
    y: Sequence[float],
    prominence: float,
    func: Optional[Callable[[float], float]] = None,
    periodic: bool = True,
    period: Optional[float] = None,
    abs_tol: float = 1e-10,
) -> list[float]:
    """Positions of prominent local maxima of sampled data.

    ``x`` must be strictly increasing. When ``func`` (the function that was
    sampled) is given, every peak is polished by golden-section search on the
    two grid cells around it. For periodic data the period defaults to
    ``n * dx`` of a uniform grid, and refined positions are wrapped back into
    ``[x[0], x[0] + period)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if x.size > 1 and not np.all(np.diff(x) > 0):
        raise ValueError("x must be strictly increasing")
    idx, _ = peak_indices(y, prominence, periodic)
    if not idx.size:
        return []
    n = x.size
    if periodic and period is None:
        period = (x[-1] - x[0]) * n / (n - 1)
    out = []
    for i in idx:
        xi = x[i]
        if func is None:
            out.append(float(xi))
            continue
        if periodic:
            left = x[i - 1] - (period if i == 0 else 0.0)
            right = x[(i + 1) % n] + (period if i == n - 1 else 0.0)
        else:
            left = x[max(i - 1, 0)]
            right = x[min(i + 1, n - 1)]
        xr, neg = golden_section(lambda t: -func(t), left, right, abs_tol)
        if -neg < y[i]:
            xr = xi
        if periodic:
            xr = x[0] + (xr - x[0]) % period
        out.append(float(xr))
    return sorted(out)
