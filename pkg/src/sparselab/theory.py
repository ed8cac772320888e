"""Closed-form quantities of the sparse random Jacobi model.

Everything here is a pure function of ``(p, beta)`` (equivalently the
effective coupling ``v``) and, where relevant, the energy ``lambda``:

    v(p)       = (1 - p^2) / p
    v_c(beta)  = 2 sqrt(beta - 1)
    r(lambda)  = 1 + v^2 / (4 - lambda^2)
    alpha      = 1 - log r / log beta
    lambda^pm  = pm 2 sqrt(1 - v^2 / v_c^2)

plus the partition of the singular-continuous interval into cells of small
dimension oscillation and the parameter chooser that produces the inner
window ``[-lt, lt]`` on which the dimension stays above 1/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ComputeError, InadmissibleParameters, ValidationError

#: |phi - pi/2| below this (but nonzero) makes tan(phi) unusable.
PHI_GUARD = 1e-3


@dataclass(frozen=True)
class ModelParams:
    p: float
    beta: int
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValidationError(f"p must lie in (0, 1], got {self.p}", "theory", "p")
        if int(self.beta) != self.beta or self.beta < 2:
            raise ValidationError(f"beta must be an integer >= 2, got {self.beta}", "theory", "beta")
        object.__setattr__(self, "beta", int(self.beta))
        if not (0.0 <= self.phi < math.pi):
            raise ValidationError(f"phi must lie in [0, pi), got {self.phi}", "theory", "phi")
        if self.phi != math.pi / 2 and abs(self.phi - math.pi / 2) < PHI_GUARD:
            raise ValidationError(
                f"phi={self.phi} is inside the guard band |phi - pi/2| < {PHI_GUARD}; "
                "use phi = pi/2 exactly for the Dirichlet form",
                "theory",
                "phi",
            )

    @property
    def v(self) -> float:
        return coupling_v(self.p)

    def derived(self) -> "DerivedCouplings":
        v_c, p_c = critical_couplings(self.beta)
        return DerivedCouplings(v=self.v, v_c=v_c, p_c=p_c)


@dataclass(frozen=True)
class DerivedCouplings:
    v: float
    v_c: float
    p_c: float

    @property
    def ratio(self) -> float:
        """v / v_c, the abscissa of the phase diagram."""
        return self.v / self.v_c


@dataclass(frozen=True)
class SpectralWindow:
    lo: float
    hi: float
    kind: str = "custom"
    empty: bool = False

    KINDS = ("sc_interval_I", "pp_complement_Ic", "ac_window_I0", "full_band", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown window kind {self.kind!r}", "theory", "kind")
        if self.empty:
            return
        if self.lo > self.hi:
            raise ValidationError(f"window lo={self.lo} > hi={self.hi}", "theory", "window")
        if self.kind != "custom" and not (-2.0 <= self.lo and self.hi <= 2.0):
            raise ValidationError("one-dimensional windows must lie in [-2, 2]", "theory", "window")

    @classmethod
    def empty_window(cls, kind="sc_interval_I"):
        return cls(math.nan, math.nan, kind, empty=True)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        if self.empty:
            return np.zeros(x.shape, dtype=bool)
        return (x >= self.lo) & (x <= self.hi)

    @property
    def width(self) -> float:
        return 0.0 if self.empty else self.hi - self.lo


def coupling_v(p):
    """Effective coupling (1 - p^2) / p of a single bump."""
    if not (0.0 < p <= 1.0):
        raise ValidationError(f"p must lie in (0, 1], got {p}", "theory", "p")
    return (1.0 - p * p) / p


def critical_couplings(beta):
    """Return ``(v_c, p_c)`` for sparsity base ``beta``.

    ``p_c`` is the closed form sqrt(2 beta - 1 - 2 sqrt(beta^2 - beta)),
    which is the positive root of p^2 + v_c p - 1 = 0.
    """
    if beta < 2:
        raise ValidationError(f"beta must be >= 2, got {beta}", "theory", "beta")
    v_c = 2.0 * math.sqrt(beta - 1.0)
    p_c = math.sqrt(2.0 * beta - 1.0 - 2.0 * math.sqrt(beta * beta - beta))
    return v_c, p_c


def p_for_coupling(v):
    """Inverse of :func:`coupling_v` on (0, 1]: positive root of p^2 + v p - 1."""
    if v < 0:
        raise ValidationError("coupling must be non-negative", "theory", "v")
    # 2 / (v + sqrt(v^2 + 4)) avoids cancellation for small v
    return 2.0 / (v + math.sqrt(v * v + 4.0))


def _four_minus_sq(lam):
    return (2.0 - lam) * (2.0 + lam)


def r_factor(lam, v):
    """Per-bump growth factor 1 + v^2/(4 - lambda^2); scalar or array."""
    lam_a = np.asarray(lam, dtype=float)
    if np.any(np.abs(lam_a) >= 2.0):
        raise ValidationError("r(lambda) diverges for |lambda| >= 2", "theory", "lambda")
    out = 1.0 + v * v / _four_minus_sq(lam_a)
    return float(out) if out.ndim == 0 else out


def local_dimension(lam, v, beta, return_flag=False):
    """Local Hausdorff dimension 1 - log r(lambda) / log beta.

    Total function: energies outside the singular-continuous interval give
    values <= 0 (``-inf`` for |lambda| >= 2). With ``return_flag`` a boolean
    ``inside`` mask (True on the interval) is returned alongside.
    """
    lam_a = np.asarray(lam, dtype=float)
    alpha = np.full(lam_a.shape, -np.inf)
    ok = np.abs(lam_a) < 2.0
    alpha[ok] = 1.0 - np.log1p(v * v / _four_minus_sq(lam_a[ok])) / math.log(beta)
    inside = ok & (alpha >= 0.0)
    if alpha.ndim == 0:
        alpha, inside = float(alpha), bool(inside)
    if return_flag:
        return alpha, inside
    return alpha


def inverse_local_dimension(a, v, beta):
    """Non-negative energy at which the dimension equals ``a`` (0 <= a <= alpha(0))."""
    if v == 0:
        raise ValidationError("dimension is constant for v = 0", "theory", "v")
    a = np.asarray(a, dtype=float)
    rm1 = np.expm1((1.0 - a) * math.log(beta))
    return np.sqrt(np.maximum(4.0 - v * v / rm1, 0.0))


def mobility_edges(v, beta):
    """``(lambda_minus, lambda_plus)`` for v < v_c, otherwise ``None``."""
    v_c = 2.0 * math.sqrt(beta - 1.0)
    if v >= v_c:
        return None
    lp = 2.0 * math.sqrt(1.0 - (v / v_c) ** 2)
    return -lp, lp


def sc_interval(v, beta) -> SpectralWindow:
    """The set {lambda in [-2,2] : (beta-1)(4-lambda^2) >= v^2} as a window."""
    d = 4.0 - v * v / (beta - 1.0)
    if d < 0:
        return SpectralWindow.empty_window("sc_interval_I")
    e = math.sqrt(d)
    return SpectralWindow(-e, e, "sc_interval_I")


def pp_complement(v, beta):
    """I^c = [-2, 2] minus I as a list of windows (two outer bands or the full band)."""
    inner = sc_interval(v, beta)
    if inner.empty:
        return [SpectralWindow(-2.0, 2.0, "pp_complement_Ic")]
    if inner.hi >= 2.0:
        return []
    return [
        SpectralWindow(-2.0, inner.lo, "pp_complement_Ic"),
        SpectralWindow(inner.hi, 2.0, "pp_complement_Ic"),
    ]


# --------------------------------------------------------------------------
# partition of I


@dataclass(frozen=True)
class PartitionSpec:
    centers: np.ndarray
    half_widths: np.ndarray
    epsilon: float
    v: float
    beta: int

    @property
    def N_eps(self) -> int:
        return len(self.centers)

    @property
    def delta_bar(self) -> float:
        return float(np.max(self.half_widths))

    @property
    def edges(self):
        """Cell boundaries, length N_eps + 1."""
        return np.concatenate([self.centers - self.half_widths, self.centers[-1:] + self.half_widths[-1:]])

    def cell_of(self, lam):
        """Index of the half-open cell containing ``lam`` (last cell closed)."""
        e = self.edges
        if lam < e[0] or lam > e[-1]:
            raise ValidationError(f"{lam} is outside the partitioned interval", "theory", "lambda")
        return int(min(np.searchsorted(e, lam, side="right") - 1, self.N_eps - 1))


def build_partition(v, beta, epsilon, max_half_width=0.5, max_cells=100_000) -> PartitionSpec:
    """Cover I by disjoint cells whose dimension oscillation is at most ``epsilon``.

    Boundaries start as the preimages of ``alpha(0) - k h`` on each half of I
    (``h = alpha(0)/M <= epsilon``, symmetric central cell straddling 0), so
    the oscillation bound holds by construction. Cells wider than
    ``min(max_half_width, epsilon)`` in half-width are then split evenly,
    which keeps every half-width below 1 and drives delta_bar to 0 with
    epsilon.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive", "theory", "epsilon")
    if not (0 < max_half_width < 1):
        raise ValidationError("max_half_width must lie in (0, 1)", "theory", "max_half_width")
    window = sc_interval(v, beta)
    v_c = 2.0 * math.sqrt(beta - 1.0)
    if window.empty or v >= v_c:
        raise ValidationError(f"partition needs v < v_c (v={v}, v_c={v_c})", "theory", "v")
    edge = window.hi
    cap = min(max_half_width, epsilon)

    if v == 0:
        coarse = np.array([-edge, edge])
    else:
        alpha0 = float(local_dimension(0.0, v, beta))
        M = max(1, math.ceil(alpha0 / epsilon))
        if 2 * M - 1 > max_cells:
            raise ComputeError(f"epsilon={epsilon} needs more than {max_cells} cells; raise max_cells")
        x = inverse_local_dimension(alpha0 - alpha0 * np.arange(M + 1) / M, v, beta)
        x[0] = 0.0
        x[-1] = edge
        x = np.maximum.accumulate(x)
        coarse = np.concatenate([-x[:0:-1], x[1:]])

    pieces = np.maximum(1, np.ceil(np.diff(coarse) / (2.0 * cap) - 1e-12)).astype(int)
    if pieces.sum() > max_cells:
        raise ComputeError(f"epsilon={epsilon} needs {pieces.sum()} cells > cap {max_cells}")
    parts = [np.linspace(a, b, n + 1)[:-1] for a, b, n in zip(coarse[:-1], coarse[1:], pieces)]
    edges = np.concatenate(parts + [coarse[-1:]])
    lo, hi = edges[:-1], edges[1:]
    return PartitionSpec(
        centers=(lo + hi) / 2.0,
        half_widths=(hi - lo) / 2.0,
        epsilon=float(epsilon),
        v=float(v),
        beta=int(beta),
    )


def cell_oscillation(part: PartitionSpec, samples=201):
    """max - min of the dimension over each cell, by dense sampling."""
    out = np.empty(part.N_eps)
    for i, (c, h) in enumerate(zip(part.centers, part.half_widths)):
        grid = np.linspace(c - h, c + h, samples)
        a = local_dimension(grid, part.v, part.beta)
        out[i] = a.max() - a.min()
    return out


# --------------------------------------------------------------------------
# parameter chooser


class AdmissibilityCheck(NamedTuple):
    name: str
    lhs: float
    rhs: float
    ok: bool


def admissibility(p, beta, a):
    """The three inequalities v^2 < a(sqrt(beta)-1), a(sqrt(beta)-1) < v_c^2, a < 4."""
    v = coupling_v(p)
    v_c, _ = critical_couplings(beta)
    mid = a * (math.sqrt(beta) - 1.0)
    return [
        AdmissibilityCheck("v^2 < a(sqrt(beta)-1)", v * v, mid, v * v < mid),
        AdmissibilityCheck("a(sqrt(beta)-1) < v_c^2", mid, v_c * v_c, mid < v_c * v_c),
        AdmissibilityCheck("a < 4", a, 4.0, a < 4.0),
    ]


@dataclass(frozen=True)
class AppendixParams:
    p: float
    beta: int
    a: float
    v: float
    epsilon: float
    epsilon_1: float
    epsilon_0: float
    delta_bar: float
    r_star: float
    lambda_tilde_plus: float
    lambda_plus: float
    alpha_min: float
    alpha_cells: float
    partition: PartitionSpec = field(repr=False, compare=False)

    @property
    def window(self) -> SpectralWindow:
        return SpectralWindow(-self.lambda_tilde_plus, self.lambda_tilde_plus, "ac_window_I0")

    def as_dict(self):
        return {
            k: getattr(self, k)
            for k in (
                "p", "beta", "a", "v", "epsilon", "epsilon_1", "epsilon_0", "delta_bar",
                "r_star", "lambda_tilde_plus", "lambda_plus", "alpha_min", "alpha_cells",
            )
        }


def _epsilon_1(v, beta, a, max_half_width, alpha0, tol=1e-6):
    """Largest epsilon with delta_bar(epsilon)^2 < 4 - a, by bisection (inf if every epsilon works)."""

    def good(eps):
        return build_partition(v, beta, eps, max_half_width).delta_bar ** 2 < 4.0 - a

    if good(alpha0):
        return math.inf
    lo, hi = 0.0, alpha0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if good(mid):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise ComputeError("no epsilon satisfies delta_bar^2 < 4 - a")
    return lo


def _geometric_r_star(v, beta, delta_bar):
    lower = 1.0 + v * v / (4.0 - delta_bar ** 2)
    return math.sqrt(lower * math.sqrt(beta)), lower


def choose_parameters(p, beta, a, epsilon_guess=0.05, max_half_width=0.5) -> AppendixParams:
    """Pick (r*, inner window edge, epsilon) so the inner window has dimension > 1/2.

    r* is the geometric mean of its admissible interval
    ``(1 + v^2/(4 - delta_bar^2), sqrt(beta))``. One fixed-point pass: a
    provisional partition at ``epsilon_guess`` fixes delta_bar and r*; the
    working epsilon is ``epsilon_guess`` if below the resulting epsilon_0,
    else epsilon_0 / 2, and the partition is rebuilt once at that epsilon.
    """
    for chk in admissibility(p, beta, a):
        if not chk.ok:
            raise InadmissibleParameters(
                f"inadmissible (p={p}, beta={beta}, a={a}): {chk.name} fails "
                f"({chk.lhs:.6g} vs {chk.rhs:.6g})",
                chk.name,
            )
    if p >= 1.0:
        raise ValidationError("the chooser needs p < 1", "theory", "p")
    v = coupling_v(p)
    alpha0 = float(local_dimension(0.0, v, beta))
    eps1 = _epsilon_1(v, beta, a, max_half_width, alpha0)

    def stage(eps):
        part = build_partition(v, beta, eps, max_half_width)
        dbar = part.delta_bar
        r_star, lower = _geometric_r_star(v, beta, dbar)
        if not lower < math.sqrt(beta):
            raise ComputeError(f"1 + v^2/(4 - delta_bar^2) = {lower} is not below sqrt(beta)")
        eps0 = min(eps1, math.log(math.sqrt(beta) / r_star) / math.log(beta))
        return part, dbar, r_star, eps0

    _, _, _, eps0 = stage(epsilon_guess)
    eps = epsilon_guess if epsilon_guess < eps0 else eps0 / 2.0
    part, dbar, r_star, eps0 = stage(eps)
    if not eps < eps0:
        raise ComputeError(f"fixed-point pass did not converge: epsilon={eps} >= epsilon_0={eps0}")

    lt = math.sqrt(4.0 - v * v / (r_star - 1.0)) - dbar
    lp = mobility_edges(v, beta)[1]
    alpha_min = 1.0 - math.log(r_star) / math.log(beta) - eps
    # minimum over cells whose open interior meets [-lt, lt]
    lo = part.centers - part.half_widths
    hi = part.centers + part.half_widths
    hit = (hi > -lt) & (lo < lt)
    alpha_cells = float(np.min(local_dimension(part.centers[hit], v, beta))) - eps
    return AppendixParams(
        p=p, beta=int(beta), a=a, v=v, epsilon=eps, epsilon_1=eps1, epsilon_0=eps0,
        delta_bar=dbar, r_star=r_star, lambda_tilde_plus=lt, lambda_plus=lp,
        alpha_min=alpha_min, alpha_cells=alpha_cells, partition=part,
    )


def verify_appendix(ap: AppendixParams):
    """Re-check every inequality of the chooser from the stored numbers alone."""
    v = coupling_v(ap.p)
    lower = 1.0 + v * v / (4.0 - ap.delta_bar ** 2)
    sb = math.sqrt(ap.beta)
    lp = mobility_edges(v, ap.beta)[1]
    return {
        "admissible": all(c.ok for c in admissibility(ap.p, ap.beta, ap.a)),
        "r_star_above_lower": lower < ap.r_star,
        "r_star_below_sqrt_beta": ap.r_star < sb,
        "b1_residual": abs(float(r_factor(ap.lambda_tilde_plus + ap.delta_bar, v)) - ap.r_star) < 1e-9,
        "lambda_tilde_positive": ap.lambda_tilde_plus > 0,
        "lambda_tilde_below_edge": ap.lambda_tilde_plus < lp,
        "epsilon_below_epsilon_0": 0 < ap.epsilon < ap.epsilon_0,
        "epsilon_0_positive": ap.epsilon_0 > 0,
        "alpha_min_above_half": ap.alpha_min > 0.5,
        "alpha_cells_above_alpha_min": ap.alpha_cells >= ap.alpha_min - 1e-12,
        "half_widths_below_one": bool(np.all((ap.partition.half_widths > 0) & (ap.partition.half_widths < 1))),
    }


def phase_diagram(lams, ratios):
    """Region tags on a (lambda, v/v_c) grid: 'sc' inside I, 'pp' outside.

    Returns three flat arrays (lambda, ratio, tag) in row-major order, ratio
    varying slowest.
    """
    lams = np.asarray(lams, dtype=float)
    ratios = np.asarray(ratios, dtype=float)
    L, R = np.meshgrid(lams, ratios)
    edge = 2.0 * np.sqrt(np.clip(1.0 - R * R, 0.0, None))
    tag = np.where(np.abs(L) <= edge, "sc", "pp")
    return L.ravel(), R.ravel(), tag.ravel()
