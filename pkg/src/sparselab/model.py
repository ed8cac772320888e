"""Random sparse bump positions and the off-diagonal sequence of the Jacobi matrix.

Positions follow a_1 = gap_1 - 1, a_j = a_{j-1} + gap_j with gap_j = beta^j
(exponential profile) or floor(exp(c j^gamma)) (super/subexponential). Each
position is shifted by an independent omega_j uniform on {-j, ..., j}.

Disorder is drawn from Philox-4x64-10 keyed by ``seed + 2^64 * stream`` with
the counter starting at zero; omega_j consumes exactly the j-th 64-bit output
``u`` and is ``floor(u (2j+1) / 2^64) - j``. The multiply-shift map has a
bias below 2^-57 for j <= 60 and makes every sample bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .theory import ModelParams

#: positions must stay representable as int64 site indices
POSITION_LIMIT = 2**62


@dataclass(frozen=True)
class SparsityProfile:
    kind: str = "exponential"
    beta: int = 2
    c: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind == "exponential":
            if int(self.beta) != self.beta or self.beta < 2:
                raise ValidationError("exponential profile needs integer beta >= 2", "model", "beta")
        elif self.kind == "superexponential":
            if not (self.c > 0 and self.gamma > 1):
                raise ValidationError("superexponential profile needs c > 0, gamma > 1", "model", "gamma")
        elif self.kind == "subexponential":
            if not (self.c > 0 and 0 < self.gamma < 1):
                raise ValidationError("subexponential profile needs c > 0, 0 < gamma < 1", "model", "gamma")
        else:
            raise ValidationError(f"unknown sparsity profile {self.kind!r}", "model", "profile")

    def gap(self, j: int) -> int:
        if self.kind == "exponential":
            return int(self.beta) ** j
        x = self.c * j ** self.gamma
        if x > 700:
            raise OverflowError(f"gap {j} of the {self.kind} profile exceeds the position limit")
        return int(math.floor(math.exp(x)))


@dataclass(frozen=True)
class DisorderSample:
    seed: int
    stream: int
    omegas: np.ndarray

    @property
    def J(self) -> int:
        return len(self.omegas)


@dataclass(frozen=True)
class BumpPositions:
    deterministic: np.ndarray
    randomized: np.ndarray

    @property
    def J(self) -> int:
        return len(self.deterministic)


@dataclass(frozen=True)
class JacobiCoefficients:
    offdiag: np.ndarray
    p: float
    placed: int
    dropped: int

    @property
    def N(self) -> int:
        return len(self.offdiag) + 1

    def bump_sites(self):
        return np.flatnonzero(self.offdiag != 1.0)


@dataclass(frozen=True)
class KroneckerSpec:
    params: ModelParams
    theta: float
    seed1: int
    seed2: int

    def __post_init__(self):
        if not (0.0 <= self.theta <= 1.0):
            raise ValidationError(f"theta must lie in [0, 1], got {self.theta}", "model", "theta")
        if self.seed1 == self.seed2:
            raise ValidationError("the two disorder seeds must differ", "model", "seed2")


def bump_positions(profile: SparsityProfile, J: int, limit=POSITION_LIMIT) -> np.ndarray:
    """Deterministic positions a_1..a_J.

    int64 array by default; ``limit=None`` lifts the int64 bound and returns
    exact Python integers (object array) for transfer-matrix depth runs.
    """
    if J < 1:
        raise ValidationError("need at least one bump", "model", "J")
    out = []
    a = -1
    for j in range(1, J + 1):
        a += profile.gap(j)
        if limit is not None and a + j >= limit:
            raise OverflowError(f"bump position a_{j} overflows the int64 site range")
        out.append(a)
    return np.array(out, dtype=np.int64 if limit is not None else object)


def philox_generator(seed: int, stream: int = 0) -> np.random.Generator:
    if not (0 <= seed < 2**64 and 0 <= stream < 2**64):
        raise ValidationError("seed and stream must be unsigned 64-bit integers", "model", "seed")
    return np.random.Generator(np.random.Philox(key=seed + (stream << 64)))


def uniform_symmetric(raw, j):
    """Map a raw 64-bit word to {-j, ..., j} by multiply-shift."""
    return ((int(raw) * (2 * j + 1)) >> 64) - j


def sample_disorder(J: int, seed: int, stream: int = 0) -> DisorderSample:
    if J < 1:
        raise ValidationError("need at least one bump", "model", "J")
    raw = philox_generator(seed, stream).bit_generator.random_raw(J)
    om = np.array([uniform_symmetric(raw[j - 1], j) for j in range(1, J + 1)], dtype=np.int64)
    return DisorderSample(seed=seed, stream=stream, omegas=om)


def randomize(deterministic: np.ndarray, disorder: DisorderSample) -> BumpPositions:
    J = len(deterministic)
    if disorder.J < J:
        raise ValidationError(f"disorder sample has {disorder.J} < {J} entries", "model", "J")
    rnd = deterministic + disorder.omegas[:J]
    if rnd[0] < 0 or np.any(np.diff(rnd) <= 0):
        raise ValidationError(
            "randomized positions are not strictly increasing and non-negative; "
            "the profile is too dense for the position disorder",
            "model",
            "profile",
        )
    return BumpPositions(deterministic=np.asarray(deterministic), randomized=rnd)


def coefficients(positions, p: float, N: int) -> JacobiCoefficients:
    """Off-diagonal p_0..p_{N-2}: ``p`` at bump sites, 1 elsewhere.

    ``positions`` is a :class:`BumpPositions` (its randomized list is used) or
    any strictly increasing integer sequence. Bumps at sites >= N-1 do not fit
    and are counted in ``dropped``.
    """
    if N < 2:
        raise ValidationError("truncation needs N >= 2", "model", "N")
    if not (0.0 < p <= 1.0):
        raise ValidationError(f"p must lie in (0, 1], got {p}", "model", "p")
    pos = np.asarray(getattr(positions, "randomized", positions), dtype=np.int64)
    if pos.size and (np.any(np.diff(pos) <= 0) or pos[0] < 0):
        raise ValidationError("positions must be strictly increasing and non-negative", "model", "positions")
    inside = pos[pos < N - 1]
    off = np.ones(N - 1)
    off[inside] = p
    return JacobiCoefficients(offdiag=off, p=float(p), placed=len(inside), dropped=len(pos) - len(inside))


def default_truncation_length(positions, profile: SparsityProfile) -> int:
    """Cut half a gap past the last bump: N = a_J^omega + ceil(gap_J / 2)."""
    pos = np.asarray(getattr(positions, "randomized", positions), dtype=np.int64)
    J = len(pos)
    return int(pos[-1]) + -(-profile.gap(J) // 2)


def truncation_floor(profile: SparsityProfile, J: int) -> int:
    """Smallest auto truncation length over all disorder draws (omega_J = -J)."""
    return int(bump_positions(profile, J, limit=None)[-1]) - J + -(-profile.gap(J) // 2)


@dataclass(frozen=True)
class Realization:
    """One disorder sample carried through to its coefficient sequence."""

    disorder: DisorderSample
    positions: BumpPositions
    coeffs: JacobiCoefficients
    profile: SparsityProfile = field(repr=False)


def realize(params: ModelParams, J: int, seed: int, stream: int = 0, N=None, profile=None) -> Realization:
    """Draw disorder, place bumps, and build coefficients (``N=None`` means auto)."""
    profile = profile or SparsityProfile("exponential", params.beta)
    det = bump_positions(profile, J)
    dis = sample_disorder(J, seed, stream)
    pos = randomize(det, dis)
    if N is None or N == "auto":
        N = default_truncation_length(pos, profile)
    return Realization(dis, pos, coefficients(pos, params.p, int(N)), profile)
