"""Finite truncations, Sturm bisection, and the site-0 spectral measure.

The truncation keeps sites 0..N-1 with diagonal ``tan(phi)`` at site 0 and a
Dirichlet cut at N. For ``phi = pi/2`` site 0 is dropped instead (u_0 = 0),
and the cyclic vector becomes the first remaining site.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ComputeError, ValidationError
from .measure import AtomicMeasure
from .model import JacobiCoefficients, realize
from .parallel import ordered_map
from .theory import ModelParams


@dataclass(frozen=True)
class TridiagonalMatrix:
    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=float)
        e = np.ascontiguousarray(self.offdiag, dtype=float)
        if d.ndim != 1 or e.shape != (max(len(d) - 1, 0),):
            raise ValidationError("offdiag must have length N - 1", "spectra", "offdiag")
        if len(d) == 0:
            raise ValidationError("empty matrix", "spectra", "N")
        if np.any(e <= 0):
            raise ValidationError("off-diagonal entries must be strictly positive", "spectra", "offdiag")
        if not np.all(np.isfinite(d)):
            raise ValidationError("diagonal must be finite", "spectra", "diag")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def N(self) -> int:
        return len(self.diag)

    def gershgorin(self):
        e = np.concatenate([[0.0], self.offdiag, [0.0]])
        r = e[:-1] + e[1:]
        return float(np.min(self.diag - r)), float(np.max(self.diag + r))

    def dense(self):
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, x):
        y = self.diag * x
        y[:-1] += self.offdiag * x[1:]
        y[1:] += self.offdiag * x[:-1]
        return y

    @property
    def _pivmin(self):
        return np.finfo(float).tiny * max(1.0, float(np.max(self.offdiag ** 2, initial=1.0)))


def truncation(coeffs, phi: float = 0.0) -> TridiagonalMatrix:
    """Matrix of J_phi restricted to sites 0..N-1 (Dirichlet cut at N)."""
    off = np.asarray(getattr(coeffs, "offdiag", coeffs), dtype=float)
    N = len(off) + 1
    if phi == math.pi / 2:
        if N < 2:
            raise ValidationError("phi = pi/2 drops site 0 and needs N >= 2", "spectra", "N")
        return TridiagonalMatrix(np.zeros(N - 1), off[1:])
    d = np.zeros(N)
    d[0] = math.tan(phi)
    return TridiagonalMatrix(d, off)


def sturm_count(T: TridiagonalMatrix, x: float) -> int:
    """Number of eigenvalues of ``T`` strictly below ``x``."""
    return int(_kernels.sturm_count(T.diag, T.offdiag ** 2, float(x), T._pivmin))


def eigenvalues(T: TridiagonalMatrix, tol=1e-12, lo=None, hi=None, maxit=200):
    """Eigenvalues by bisection, ascending; optionally only those in [lo, hi)."""
    if tol <= 0:
        raise ValidationError("tol must be positive", "spectra", "tol")
    g_lo, g_hi = T.gershgorin()
    g_lo -= 1e-9 * (1 + abs(g_lo))
    g_hi += 1e-9 * (1 + abs(g_hi))
    e2 = T.offdiag ** 2
    a = g_lo if lo is None else max(g_lo, lo)
    b = g_hi if hi is None else min(g_hi, hi)
    if a >= b:
        return np.empty(0)
    k_lo = 0 if lo is None else sturm_count(T, a)
    k_hi = T.N if hi is None else sturm_count(T, b)
    vals, bad = _kernels.bisect_range(T.diag, e2, k_lo, k_hi, a, b, tol, T._pivmin, maxit)
    if bad >= 0:
        raise ComputeError(f"bisection for eigenvalue {bad} exceeded {maxit} iterations in [{a}, {b}]")
    return vals


def spectral_measure(T: TridiagonalMatrix, tol=1e-12, lo=None, hi=None, refine=True) -> AtomicMeasure:
    """Spectral measure of the first basis vector (restricted to [lo, hi) if given).

    Weights are 1 / sum_n P_n(lambda_k)^2 for the orthonormal polynomials
    P_n of the matrix, evaluated by the twisted (two-sided) form of their
    recurrence so that eigenvectors decaying away from site 0 keep full
    accuracy. ``refine`` adds a Rayleigh-quotient step where the bisection
    error could move a weight by more than 1e-15; without it weights carry
    a relative error of about tol / (level spacing).
    """
    lams = eigenvalues(T, tol, lo, hi)
    w = _kernels.twisted_weights(T.diag, T.offdiag, lams, T._pivmin, 4.0 * tol if refine else 0.0)
    return AtomicMeasure(lams, w)


def inverse_iteration_weights(T: TridiagonalMatrix, lams, iters=3):
    """First eigenvector components squared by shifted inverse iteration (test oracle)."""
    from scipy.linalg import solve_banded

    N = T.N
    out = np.empty(len(lams))
    ab = np.zeros((3, N))
    ab[0, 1:] = T.offdiag
    ab[2, :-1] = T.offdiag
    rng = np.random.default_rng(0)
    for k, lam in enumerate(lams):
        ab[1] = T.diag - lam - 1e-10 * (1 + abs(lam))
        x = rng.standard_normal(N)
        for _ in range(iters):
            x = solve_banded((1, 1), ab, x)
            x /= np.linalg.norm(x)
        out[k] = x[0] ** 2
    return out


def window_mass(mu: AtomicMeasure, lambda0: float, delta: float) -> float:
    """Mass of the atoms strictly inside (lambda0 - delta, lambda0 + delta)."""
    if delta <= 0:
        raise ValidationError("delta must be positive", "spectra", "delta")
    return float(_kernels.window_masses(mu.atoms, mu.weights, float(lambda0), np.array([float(delta)]))[0])


@dataclass(frozen=True)
class DimensionFit:
    lambda0: float
    scales: np.ndarray
    masses: np.ndarray
    alpha_hat: float
    residual: float
    samples: int
    spacing_floor: float
    sample_masses: np.ndarray = field(repr=False, compare=False, default=None)


def spacing_floor(N: int, factor=10.0) -> float:
    """Smallest admissible window half-width: ``factor`` mean level spacings 4/N."""
    return factor * 4.0 / N


def loglog_slope(x, y):
    """Least-squares slope of log y on log x, with RMS residual."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res ** 2)))


def _sample_window_masses(task):
    params, J, seed, stream, N, lambda0, scales, tol, profile = task
    rz = realize(params, J, seed, stream, N, profile)
    T = truncation(rz.coeffs, params.phi)
    dmax = float(np.max(scales))
    # window masses only need relative accuracy far above tol / spacing
    mu = spectral_measure(T, tol, lambda0 - dmax, lambda0 + dmax + 1e-15, refine=False)
    return T.N, _kernels.window_masses(mu.atoms, mu.weights, float(lambda0), np.asarray(scales, dtype=float))


def dimension_fit(params: ModelParams, lambda0: float, J: int, samples: int, scales, seed: int,
                  N=None, workers=1, tol=1e-12, profile=None) -> DimensionFit:
    """Fit the local dimension at ``lambda0`` from disorder-averaged window masses.

    Each sample draws disorder stream ``k`` of ``seed``, builds the auto
    truncation (or length ``N``), and measures the site-0 spectral mass in
    windows of half-width ``scales``. The estimate is the log-log slope of
    the sample-mean mass against the half-width.
    """
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    if scales.size < 2 or np.any(scales <= 0):
        raise ValidationError("need at least two positive scales", "spectra", "scales")
    if samples < 1:
        raise ValidationError("need at least one sample", "spectra", "samples")
    tasks = [(params, J, seed, k, N, float(lambda0), scales, tol, profile) for k in range(samples)]
    results = ordered_map(_sample_window_masses, tasks, workers)
    n_min = min(r[0] for r in results)
    floor = spacing_floor(n_min)
    if scales.min() < floor:
        raise ValidationError(
            f"scale {scales.min():.3g} is below the level-spacing floor {floor:.3g} (N={n_min})",
            "spectra",
            "scales",
        )
    m = np.array([r[1] for r in results])
    mean = m.mean(axis=0)
    if np.any(mean <= 0):
        raise ComputeError("a window carries no spectral mass in any sample; enlarge the scales")
    alpha, _, resid = loglog_slope(scales, mean)
    return DimensionFit(
        lambda0=float(lambda0), scales=scales, masses=mean, alpha_hat=alpha, residual=resid,
        samples=samples, spacing_floor=floor, sample_masses=m,
    )


def dyadic_scales(lo_exp: int, hi_exp: int, N=None, factor=10.0):
    """Half-widths 2^hi_exp ... 2^lo_exp (descending); drop those under the floor if N given."""
    s = 2.0 ** np.arange(hi_exp, lo_exp - 1, -1)
    if N is not None:
        s = s[s >= spacing_floor(N, factor)]
    return s
