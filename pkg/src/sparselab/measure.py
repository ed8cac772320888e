"""Finite atomic measures and the operations used on spectral measures.

A measure is a sorted list of atoms with non-negative weights. The toolbox:
Fourier-Stieltjes transform, the exact time average of |transform|^2,
restriction to a window, rescaling by theta, convolution (exact or binned),
and the time-domain square-integrability check for Kronecker sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ComputeError, ValidationError

MERGE_TOL = 1e-12
PAIR_BUDGET = 10**8
_CHUNK = 1 << 22


@dataclass(frozen=True)
class AtomicMeasure:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.ascontiguousarray(self.atoms, dtype=float).ravel()
        w = np.ascontiguousarray(self.weights, dtype=float).ravel()
        if a.shape != w.shape:
            raise ValidationError("atoms and weights differ in length", "measure", "weights")
        if a.size and np.any(np.diff(a) <= 0):
            raise ValidationError("atoms must be strictly increasing", "measure", "atoms")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("weights must be finite and non-negative", "measure", "weights")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_unsorted(cls, atoms, weights, merge_tol=MERGE_TOL):
        """Sort and merge atoms closer than ``merge_tol`` (weights add)."""
        a = np.asarray(atoms, dtype=float).ravel()
        w = np.asarray(weights, dtype=float).ravel()
        order = np.argsort(a, kind="stable")
        a, w = a[order], w[order]
        if a.size == 0:
            return cls(a, w)
        new_group = np.concatenate([[True], np.diff(a) > merge_tol])
        gid = np.cumsum(new_group) - 1
        wsum = np.bincount(gid, weights=w)
        first = a[new_group]
        # weight-averaged location; falls back to the first atom for zero-weight groups
        num = np.bincount(gid, weights=w * (a - first[gid]))
        loc = first + np.divide(num, wsum, out=np.zeros_like(wsum), where=wsum > 0)
        return cls(loc, wsum)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self):
        return self.atoms.size

    def moment(self, m: int) -> float:
        return float(np.sum(self.weights * self.atoms ** m))

    @property
    def max_weight(self) -> float:
        return float(self.weights.max()) if self.atoms.size else 0.0


def fs_transform(mu: AtomicMeasure, t):
    """sum_k w_k exp(-i lambda_k t) for scalar or array ``t``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(t_arr.shape, dtype=complex)
    flat_t = t_arr.ravel()
    flat = out.ravel()
    step = max(1, _CHUNK // max(1, mu.atoms.size))
    for i in range(0, flat_t.size, step):
        ph = np.exp(-1j * np.outer(flat_t[i:i + step], mu.atoms))
        flat[i:i + step] = np.sum(ph * mu.weights, axis=1)
    out = flat.reshape(t_arr.shape)
    return complex(out[0]) if np.ndim(t) == 0 else out


def heisenberg_time(mu: AtomicMeasure) -> float:
    """2 pi over the mean gap between atoms (inf for fewer than two atoms)."""
    if mu.atoms.size < 2:
        return math.inf
    gap = (mu.atoms[-1] - mu.atoms[0]) / (mu.atoms.size - 1)
    return 2.0 * math.pi / gap


@dataclass(frozen=True)
class TimeAverage:
    T_grid: np.ndarray
    I_values: np.ndarray
    heis_time: float


def time_average(mu: AtomicMeasure, T):
    """Exact integral of |transform|^2 over [0, T].

    I(T) = T sum_k w_k^2 + 2 sum_{k<l} w_k w_l sin((lambda_k - lambda_l) T)/(lambda_k - lambda_l),
    evaluated as T * w^t S w with S_kl = sinc((lambda_k - lambda_l) T / pi).
    """
    T_arr = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(T_arr <= 0):
        raise ValidationError("T must be positive", "measure", "T")
    a, w = mu.atoms, mu.weights
    K = a.size
    res = np.zeros(T_arr.size)
    if K:
        rows = max(1, _CHUNK // K)
        for j, Tj in enumerate(T_arr):
            acc = 0.0
            for i in range(0, K, rows):
                d = a[i:i + rows, None] - a[None, :]
                acc += float(w[i:i + rows] @ (np.sinc(d * (Tj / math.pi)) @ w))
            res[j] = Tj * acc
    return float(res[0]) if np.ndim(T) == 0 else res


def time_average_curve(mu: AtomicMeasure, T_grid) -> TimeAverage:
    T_grid = np.asarray(T_grid, dtype=float)
    return TimeAverage(T_grid, time_average(mu, T_grid), heisenberg_time(mu))


@dataclass(frozen=True)
class DecayFit:
    exponent_hat: float
    C_hat: float
    window: tuple
    residual: float
    curve: TimeAverage = field(repr=False, default=None)


def check_time_grid(T_grid, heis, min_points=5, t_min=1.0):
    T_grid = np.asarray(T_grid, dtype=float)
    if T_grid.size < min_points:
        raise ValidationError(f"need at least {min_points} times", "measure", "T_grid")
    if np.any(np.diff(T_grid) <= 0):
        raise ValidationError("times must increase", "measure", "T_grid")
    if T_grid[0] <= t_min or T_grid[-1] > heis / 10.0:
        raise ValidationError(
            f"time grid [{T_grid[0]:.4g}, {T_grid[-1]:.4g}] must lie in ({t_min}, heis/10 = {heis / 10:.4g}]",
            "measure",
            "T_grid",
        )
    return T_grid


def dyadic_times(t_lo, heis, factor=10.0):
    """Powers of two strictly above ``t_lo`` and at most heis/factor."""
    k0 = math.floor(math.log2(t_lo)) + 1
    k1 = math.floor(math.log2(heis / factor)) if math.isfinite(heis) else k0 + 10
    return 2.0 ** np.arange(k0, k1 + 1)


def decay_fit(mu: AtomicMeasure, T_grid) -> DecayFit:
    """Slope of log I(T) against log T; about 1 - alpha for a U-alpha-H measure."""
    T_grid = check_time_grid(T_grid, heisenberg_time(mu))
    curve = time_average_curve(mu, T_grid)
    from .spectra import loglog_slope

    slope, icpt, resid = loglog_slope(T_grid, curve.I_values)
    return DecayFit(slope, math.exp(icpt), (float(T_grid[0]), float(T_grid[-1])), resid, curve)


def restrict(mu: AtomicMeasure, window) -> AtomicMeasure:
    """Atoms inside the closed window, weights unchanged."""
    keep = window.contains(mu.atoms)
    return AtomicMeasure(mu.atoms[keep], mu.weights[keep])


def scale(mu: AtomicMeasure, theta: float) -> AtomicMeasure:
    """Push-forward under lambda -> theta lambda."""
    if not (0.0 < theta <= 1.0):
        raise ValidationError(f"theta must lie in (0, 1], got {theta}", "measure", "theta")
    return AtomicMeasure(mu.atoms * theta, mu.weights.copy())


@dataclass(frozen=True)
class ConvolutionResult:
    measure: AtomicMeasure
    n_pairs: int
    theta: float = 1.0
    histogram: "HistogramDensity" = None


def convolve(mu1: AtomicMeasure, mu2: AtomicMeasure, budget=PAIR_BUDGET, merge_tol=MERGE_TOL) -> ConvolutionResult:
    """Exact convolution: atoms lambda_k + lambda'_l, weights w_k w'_l, coincident sums merged."""
    n_pairs = len(mu1) * len(mu2)
    if n_pairs > budget:
        raise ComputeError(
            f"{n_pairs} atom pairs exceed the budget of {budget}; use kronecker_histogram instead"
        )
    a = (mu1.atoms[:, None] + mu2.atoms[None, :]).ravel()
    w = (mu1.weights[:, None] * mu2.weights[None, :]).ravel()
    return ConvolutionResult(AtomicMeasure.from_unsorted(a, w, merge_tol), n_pairs)


def kronecker_measure(mu1: AtomicMeasure, mu2: AtomicMeasure, theta: float, **kw) -> ConvolutionResult:
    """Spectral measure of A x 1 + theta 1 x B for the product of the two cyclic vectors."""
    res = convolve(mu1, scale(mu2, theta), **kw)
    return ConvolutionResult(res.measure, res.n_pairs, float(theta))


@dataclass(frozen=True)
class HistogramDensity:
    edges: np.ndarray
    density: np.ndarray
    fine_density: np.ndarray
    stability: float


def _binned(mu1, mu2, theta, edges):
    """Histogram of the pairwise sums on uniform ``edges`` without materializing them."""
    nb = len(edges) - 1
    lo, width = edges[0], (edges[-1] - edges[0]) / nb
    hist = np.zeros(nb)
    b = mu2.atoms * theta
    rows = max(1, _CHUNK // max(1, b.size))
    for i in range(0, mu1.atoms.size, rows):
        s = (mu1.atoms[i:i + rows, None] + b[None, :]).ravel()
        ww = (mu1.weights[i:i + rows, None] * mu2.weights[None, :]).ravel()
        idx = np.floor((s - lo) / width).astype(np.int64)
        ok = (idx >= 0) & (idx < nb)
        hist += np.bincount(idx[ok], weights=ww[ok], minlength=nb)
    return hist


def _stability(coarse, fine):
    """Largest relative change of a bin's density when it is split in two."""
    parent = np.repeat(coarse, 2)
    nz = parent > 0
    if not np.any(nz):
        return 0.0
    return float(np.max(np.abs(fine[nz] - parent[nz]) / parent[nz]))


def histogram_density(source, bins: int, window=None, theta=None) -> HistogramDensity:
    """Binned density over ``window`` (lo, hi) and its refinement-stability score.

    ``source`` is an :class:`AtomicMeasure`, a :class:`ConvolutionResult`, or a
    pair ``(mu1, mu2)`` convolved on the fly with scaling ``theta`` (histogram
    mode, no pair budget). The score compares each bin with its two halves
    at ``2 * bins``.
    """
    if bins < 16:
        raise ValidationError("need at least 16 bins", "measure", "bins")
    if isinstance(source, ConvolutionResult):
        source = source.measure
    if isinstance(source, AtomicMeasure):
        lo, hi = window if window is not None else (source.atoms[0], source.atoms[-1] + 1e-12)
        fine_edges = np.linspace(lo, hi, 2 * bins + 1)
        fine = np.histogram(source.atoms, bins=fine_edges, weights=source.weights)[0]
    else:
        mu1, mu2 = source
        th = 1.0 if theta is None else theta
        if window is None:
            lo = mu1.atoms[0] + th * mu2.atoms[0]
            hi = mu1.atoms[-1] + th * mu2.atoms[-1] + 1e-12
        else:
            lo, hi = window
        fine_edges = np.linspace(lo, hi, 2 * bins + 1)
        fine = _binned(mu1, mu2, th, fine_edges)
    coarse = fine[0::2] + fine[1::2]
    width = (hi - lo) / bins
    dc = coarse / width
    df = fine / (width / 2)
    return HistogramDensity(fine_edges[0::2], dc, df, _stability(dc, df))


@dataclass(frozen=True)
class L2Diagnostics:
    T_grid: np.ndarray
    integrals: np.ndarray
    tail_slope: float
    theta: float
    dt: float


def l2_criterion(mu1: AtomicMeasure, mu2: AtomicMeasure, theta: float, T_grid, dt=None, tail_from=None):
    """Integral of |f1(t)|^2 |f2(theta t)|^2 over [0, T] for each T in the grid.

    Trapezoid rule on a uniform step ``dt`` (default: 1/8 of the shortest
    period present in the integrand). The tail slope is the log-log slope over
    grid points ``T >= tail_from`` (default: the upper half of the grid); near
    0 the integral saturates, near 1 it grows linearly (atoms in both).
    """
    if not (0.0 < theta <= 1.0):
        raise ValidationError(f"theta must lie in (0, 1], got {theta}", "measure", "theta")
    T_grid = np.asarray(T_grid, dtype=float)
    heis = min(heisenberg_time(mu1), heisenberg_time(mu2) / theta)
    check_time_grid(T_grid, heis, min_points=3, t_min=0.0)
    span = lambda m: (m.atoms[-1] - m.atoms[0]) if m.atoms.size else 0.0  # noqa: E731
    band = 2.0 * (span(mu1) + theta * span(mu2))
    if dt is None:
        dt = 0.05 if band == 0 else min(0.05, 2 * math.pi / band / 8)
    n = int(math.ceil(T_grid[-1] / dt))
    t = np.linspace(0.0, n * dt, n + 1)
    g = np.abs(fs_transform(mu1, t)) ** 2 * np.abs(fs_transform(mu2, theta * t)) ** 2
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * dt)])
    vals = np.interp(T_grid, t, cum)
    if tail_from is None:
        tail = T_grid >= T_grid[len(T_grid) // 2]
    else:
        tail = T_grid >= tail_from
    from .spectra import loglog_slope

    slope = loglog_slope(T_grid[tail], vals[tail])[0] if tail.sum() >= 2 else math.nan
    return L2Diagnostics(T_grid, vals, slope, float(theta), float(dt))


def kronecker_outer_max_atom(mu1: AtomicMeasure, mu2: AtomicMeasure, theta: float, threshold: float):
    """Largest weight among sums lambda_k + theta lambda'_l with |sum| > threshold.

    Only atoms that can reach beyond the threshold are paired, so this stays
    cheap for large spectra.
    """
    best = 0.0
    b_max, b_min = theta * mu2.atoms.max(), theta * mu2.atoms.min()
    for sign in (1.0, -1.0):
        if sign > 0:
            sel = mu1.atoms + b_max > threshold
            a, wa = mu1.atoms[sel], mu1.weights[sel]
            sel2 = mu2.atoms * theta + mu1.atoms.max() > threshold
        else:
            sel = mu1.atoms + b_min < -threshold
            a, wa = mu1.atoms[sel], mu1.weights[sel]
            sel2 = mu2.atoms * theta + mu1.atoms.min() < -threshold
        b, wb = mu2.atoms[sel2] * theta, mu2.weights[sel2]
        if a.size and b.size:
            s = a[:, None] + b[None, :]
            ww = wa[:, None] * wb[None, :]
            hit = sign * s > threshold
            if np.any(hit):
                best = max(best, float(ww[hit].max()))
    return best
