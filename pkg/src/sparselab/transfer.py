"""Fixed-energy transfer matrices and Pruefer variables on the sparse lattice.

For lambda = 2 cos(phi0) the free recursion u_{n+1} = lambda u_n - u_{n-1}
is an exact rotation by phi0 in the coordinates

    x = u_n - u_{n-1} cos(phi0),   y = u_{n-1} sin(phi0),

so a gap of L free sites only advances the angle by L*phi0 and the radius
changes only across bumps. States are stored as (log R^2, theta) so depth
does not overflow; free rotations are computed from the energy's exact
quasimomentum so that gaps of 2^60 sites still give correct angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import model as _model
from .errors import ComputeError, ValidationError
from .parallel import ordered_map
from .theory import ModelParams, r_factor

NAMED_IRRATIONALS = {
    "inv_sqrt2": lambda: 1 / mpmath.sqrt(2),
    "golden": lambda: (mpmath.sqrt(5) - 1) / 2,
}

_EXACT_DPS = 60


@dataclass(frozen=True)
class EnergyPoint:
    """Energy lambda = 2 cos(pi q) with a declared rationality tag.

    ``q`` is kept exactly: a ``Fraction`` for rational (and float-given)
    energies, a high-precision mpmath number for named irrationals.
    """

    q: object
    rationality: str
    label: str

    @classmethod
    def rational(cls, num: int, den: int):
        q = Fraction(num, den)
        if not (0 < q < 1):
            raise ValidationError("need 0 < num/den < 1 for an interior energy", "transfer", "energy")
        return cls(q, "rational", f"{q.numerator}/{q.denominator}")

    @classmethod
    def irrational(cls, name: str):
        if name not in NAMED_IRRATIONALS:
            raise ValidationError(f"unknown named irrational {name!r}", "transfer", "energy")
        with mpmath.workdps(_EXACT_DPS):
            q = NAMED_IRRATIONALS[name]()
        return cls(q, "irrational", name)

    @classmethod
    def from_lambda(cls, lam: float, rationality: str = "irrational", label=None):
        """Untagged float energy; ``rationality`` must still be declared."""
        if not (-2.0 < lam < 2.0):
            raise ValidationError("energy must lie in (-2, 2)", "transfer", "lambda")
        if rationality not in ("rational", "irrational"):
            raise ValidationError("rationality must be 'rational' or 'irrational'", "transfer", "energy")
        q = Fraction(math.acos(lam / 2.0) / math.pi)
        return cls(q, rationality, label or repr(float(lam)))

    @classmethod
    def parse(cls, text: str):
        """'inv_sqrt2', 'golden', 'a/b' (rational q) or 'lambda=<float>'."""
        text = str(text).strip()
        if text in NAMED_IRRATIONALS:
            return cls.irrational(text)
        if text.startswith("lambda="):
            return cls.from_lambda(float(text.split("=", 1)[1]))
        if "/" in text:
            a, b = text.split("/")
            return cls.rational(int(a), int(b))
        raise ValidationError(f"cannot parse energy spec {text!r}", "transfer", "energy")

    @property
    def phi0(self) -> float:
        return float(self.q) * math.pi

    @property
    def lam(self) -> float:
        if isinstance(self.q, Fraction):
            return 2.0 * math.cos(math.pi * float(self.q))
        with mpmath.workdps(_EXACT_DPS):
            return float(2 * mpmath.cos(mpmath.pi * self.q))

    @property
    def excluded(self) -> bool:
        """Rational q lies in the countable exceptional set 2 cos(pi Q)."""
        return self.rationality == "rational"

    def rotation(self, L: int) -> float:
        """(L * phi0) mod 2 pi, exact up to the final rounding."""
        L = int(L)
        if isinstance(self.q, Fraction):
            return math.pi * float((L * self.q) % 2)
        with mpmath.workdps(_EXACT_DPS + len(str(abs(L)))):
            return math.pi * float(mpmath.fmod(L * self.q, 2))


@dataclass(frozen=True)
class TransferState:
    u_curr: float
    u_prev: float

    def __post_init__(self):
        if self.u_curr == 0 and self.u_prev == 0:
            raise ValidationError("transfer state must be nonzero", "transfer", "state")


@dataclass(frozen=True)
class PruferState:
    log_R2: float
    theta: float

    @property
    def theta_mod_pi(self) -> float:
        return self.theta % math.pi


@dataclass(frozen=True)
class GrowthEstimate:
    rate_mean: float
    rate_stderr: float
    samples: int
    j_max: int
    excluded: bool = False
    rates: np.ndarray = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class SparseCoefficients:
    """Semi-infinite off-diagonal: ``p`` at ``sites``, 1 elsewhere.

    ``sites`` may hold arbitrary-precision Python ints, so this form reaches
    depths where a dense coefficient array cannot exist.
    """

    sites: tuple
    p: float

    def __post_init__(self):
        s = [int(x) for x in self.sites]
        if any(b <= a for a, b in zip(s, s[1:])) or (s and s[0] < 0):
            raise ValidationError("bump sites must be strictly increasing and non-negative", "transfer", "sites")
        object.__setattr__(self, "sites", tuple(s))
        object.__setattr__(self, "_siteset", frozenset(s))

    def value(self, n: int) -> float:
        return self.p if n in self._siteset else 1.0


def step(state: TransferState, lam: float, p_n: float, p_prev: float = 1.0) -> TransferState:
    """One site of p_{n-1} u_{n-1} + p_n u_{n+1} = lambda u_n."""
    if p_n == 0:
        raise ValidationError("p_n = 0 decouples the chain", "transfer", "p_n")
    u_next = (lam * state.u_curr - p_prev * state.u_prev) / p_n
    return TransferState(u_next, state.u_curr)


def one_step_matrix(lam, p_n, p_prev=1.0):
    """Matrix acting on (u_n, u_{n-1}); its determinant is p_prev / p_n."""
    return np.array([[lam / p_n, -p_prev / p_n], [1.0, 0.0]])


def to_prufer(state: TransferState, energy: EnergyPoint) -> PruferState:
    phi0 = energy.phi0
    x = state.u_curr - state.u_prev * math.cos(phi0)
    y = state.u_prev * math.sin(phi0)
    R2 = x * x + y * y
    if not R2 > 0 or not math.isfinite(R2):
        raise ComputeError(f"Pruefer radius underflow/overflow (R^2={R2})")
    return PruferState(math.log(R2), math.atan2(y, x))


def from_prufer(ps: PruferState, energy: EnergyPoint) -> TransferState:
    phi0 = energy.phi0
    R = math.exp(0.5 * ps.log_R2)
    x, y = R * math.cos(ps.theta), R * math.sin(ps.theta)
    u_prev = y / math.sin(phi0)
    return TransferState(x + u_prev * math.cos(phi0), u_prev)


def _unit_pair(theta, c, s):
    u_prev = math.sin(theta) / s
    return math.cos(theta) + u_prev * c, u_prev


@dataclass(frozen=True)
class BumpTrace:
    """Pruefer states along one solution.

    ``before[j]`` is the state (u_a, u_{a-1}) arriving at bump site a;
    ``after[j]`` is (u_{a+2}, u_{a+1}), once both coupling steps touching p_a
    are done. Free gaps preserve the radius, so ``after[j].log_R2`` is also
    the radius at every site up to the next bump.
    """

    initial: PruferState
    before: list
    after: list

    def arrival_angles(self):
        return np.array([st.theta_mod_pi for st in self.before])


def propagate_bumps(coeffs, energy: EnergyPoint, phi: float, checkpoints=None) -> BumpTrace:
    """Evolve the phi-boundary solution and sample it around each bump.

    ``coeffs`` is a dense :class:`~sparselab.model.JacobiCoefficients` or a
    :class:`SparseCoefficients`. The start is (u_{-1}, u_0) = (sin phi, cos phi).
    Sites with p_{n-1} = p_n = 1 are pure rotations; the two sites next to a
    bump are stepped explicitly in unit-radius coordinates with the log of
    the radius change accumulated. ``checkpoints`` overrides the sampled
    sites (default: the bump sites), e.g. to sample a p = 1 chain.
    """
    if isinstance(coeffs, SparseCoefficients):
        sites = list(coeffs.sites)
        pval = coeffs.value
        limit = None
    else:
        off = coeffs.offdiag
        sites = [int(s) for s in np.flatnonzero(off != 1.0)]
        limit = len(off)

        def pval(n):
            return float(off[n]) if 0 <= n < limit else 1.0

    marks = sorted(int(c) for c in (sites if checkpoints is None else checkpoints))
    if limit is not None:
        marks = [m for m in marks if m + 1 < limit]
    phi0 = energy.phi0
    c, s = math.cos(phi0), math.sin(phi0)
    lam = 2.0 * c
    two_pi = 2 * math.pi

    initial = to_prufer(TransferState(math.cos(phi), math.sin(phi)), energy)
    log_R2, theta = initial.log_R2, initial.theta
    n = 0  # state holds (u_n, u_{n-1})

    explicit = {m for a in sites for m in (a, a + 1)}
    arrive = set(marks)
    leave = {m + 2 for m in marks}
    before, after = [], []
    for target in sorted(explicit | arrive | leave):
        theta = math.fmod(theta + energy.rotation(target - n), two_pi)
        n = target
        if target in leave:
            after.append(PruferState(log_R2, theta))
        if target in arrive:
            before.append(PruferState(log_R2, theta))
        if target in explicit:
            p_prev, p_n = pval(n - 1), pval(n)
            if p_prev != 1.0 or p_n != 1.0:
                u, um = _unit_pair(theta, c, s)
                u_next = (lam * u - p_prev * um) / p_n
                x = u_next - u * c
                y = u * s
                R2 = x * x + y * y
                if not R2 > 0:
                    raise ComputeError("Pruefer radius underflow")
                log_R2 += math.log(R2)
                theta = math.atan2(y, x)
            else:
                theta = math.fmod(theta + phi0, two_pi)
            n += 1
    return BumpTrace(initial, before, after)


def dense_iterate(offdiag, lam, phi, n_steps):
    """Brute-force (u_{n-1}, u_n) history for small chains; oracle for tests."""
    u = np.empty(n_steps + 2)
    u[0], u[1] = math.sin(phi), math.cos(phi)  # u_{-1}, u_0
    off = np.asarray(offdiag, dtype=float)

    def pv(k):
        return off[k] if 0 <= k < len(off) else 1.0

    for n in range(n_steps):
        u[n + 2] = (lam * u[n + 1] - pv(n - 1) * u[n]) / pv(n)
    return u  # u[k] = u_{k-1}


def _sample_rate(params: ModelParams, energy, J, seed, stream, profile):
    det = _model.bump_positions(profile, J, limit=None)
    pos = _model.randomize(det, _model.sample_disorder(J, seed, stream))
    coeffs = SparseCoefficients(tuple(int(a) for a in pos.randomized), params.p)
    trace = propagate_bumps(coeffs, energy, params.phi)
    return (trace.after[-1].log_R2 - trace.initial.log_R2) / J, trace


def _sample_task(task):
    return _sample_rate(*task)


def growth_rate(params: ModelParams, energy: EnergyPoint, J: int, samples: int, seed: int,
                profile=None, return_angles=False, workers=1):
    """Disorder-averaged (1/J) log(R^2 after bump J / R^2 at the origin).

    Sample ``k`` uses disorder stream ``k`` of ``seed``. The target for
    irrational energies inside I is log r(lambda). With ``return_angles`` the
    (samples, J) array of arrival angles mod pi is returned as well.
    """
    if J < 1 or samples < 2:
        raise ValidationError("need J >= 1 and samples >= 2", "transfer", "samples")
    profile = profile or _model.SparsityProfile("exponential", params.beta)
    rates = np.empty(samples)
    angles = np.empty((samples, J))
    tasks = [(params, energy, J, seed, k, profile) for k in range(samples)]
    for k, (rate, trace) in enumerate(ordered_map(_sample_task, tasks, workers)):
        rates[k] = rate
        angles[k] = trace.arrival_angles()
    est = GrowthEstimate(
        rate_mean=float(rates.mean()),
        rate_stderr=float(rates.std(ddof=1) / math.sqrt(samples)),
        samples=samples,
        j_max=J,
        excluded=energy.excluded,
        rates=rates,
    )
    return (est, angles) if return_angles else est


def growth_target(params: ModelParams, energy: EnergyPoint) -> float:
    return math.log(r_factor(energy.lam, params.v))


def angle_discrepancy(angles) -> float:
    """Star discrepancy of {theta_j / pi mod 1}."""
    x = np.sort(np.mod(np.asarray(angles, dtype=float) / math.pi, 1.0))
    n = len(x)
    if n < 1:
        raise ValidationError("need at least one angle", "transfer", "angles")
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))
