import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparselab import model as M
from sparselab import transfer as T
from sparselab.errors import ValidationError
from sparselab.theory import ModelParams, r_factor


def naive_solution(offdiag, lam, phi, n):
    """Independent loop over the recursion with the phi boundary."""
    def p(k):
        return offdiag[k] if 0 <= k < len(offdiag) else 1.0

    u_prev, u = math.sin(phi), math.cos(phi)
    out = [u]
    for k in range(n):
        u_prev, u = u, (lam * u - p(k - 1) * u_prev) / p(k)
        out.append(u)
    return out


def test_energy_parsing():
    assert T.EnergyPoint.parse("1/2").lam == pytest.approx(0.0, abs=1e-15)
    assert T.EnergyPoint.parse("1/2").excluded
    e = T.EnergyPoint.parse("inv_sqrt2")
    assert not e.excluded
    assert e.lam == pytest.approx(2 * math.cos(math.pi / math.sqrt(2)), abs=1e-15)
    assert T.EnergyPoint.parse("lambda=1.99").lam == pytest.approx(1.99, abs=1e-14)
    with pytest.raises(ValidationError):
        T.EnergyPoint.parse("pi")
    with pytest.raises(ValidationError):
        T.EnergyPoint.rational(3, 2)


def test_exact_rotation_at_huge_depth():
    e = T.EnergyPoint.irrational("golden")
    L = 2**63 + 12345
    with mpmath.workdps(80):
        ref = float(mpmath.fmod(L * (mpmath.sqrt(5) - 1) / 2, 2) * mpmath.pi)
    assert e.rotation(L) == pytest.approx(ref, abs=1e-12)
    r = T.EnergyPoint.rational(1, 3)
    assert r.rotation(3 * 10**30 + 1) == pytest.approx(math.pi / 3, abs=1e-15)


def test_step_matches_matrix():
    st0 = T.TransferState(0.3, -1.1)
    nxt = T.step(st0, 0.7, 0.5, 0.9)
    m = T.one_step_matrix(0.7, 0.5, 0.9)
    assert np.allclose(m @ [0.3, -1.1], [nxt.u_curr, nxt.u_prev], atol=1e-15)
    assert np.linalg.det(m) == pytest.approx(0.9 / 0.5)
    with pytest.raises(ValidationError):
        T.step(st0, 0.7, 0.0)


@given(st.floats(0.1, 3.0), st.floats(-3.0, 3.0), st.sampled_from(["inv_sqrt2", "golden", "1/3"]))
def test_prufer_round_trip(u, w, name):
    e = T.EnergyPoint.parse(name)
    back = T.from_prufer(T.to_prufer(T.TransferState(u, w), e), e)
    assert back.u_curr == pytest.approx(u, rel=1e-10, abs=1e-12)
    assert back.u_prev == pytest.approx(w, rel=1e-10, abs=1e-12)


def test_free_chain_keeps_radius():
    e = T.EnergyPoint.parse("golden")
    c = M.coefficients([], 1.0, 40)
    tr = T.propagate_bumps(c, e, 0.3, checkpoints=[5, 17, 30])
    for s in tr.before + tr.after:
        assert s.log_R2 == pytest.approx(tr.initial.log_R2, abs=1e-12)


@pytest.mark.parametrize("phi", [0.0, 0.4, math.pi / 2])
@pytest.mark.parametrize("name", ["inv_sqrt2", "golden", "2/7"])
def test_propagation_matches_dense(phi, name):
    e = T.EnergyPoint.parse(name)
    c = M.coefficients([1, 4, 12, 30], 0.6, 64)
    tr = T.propagate_bumps(c, e, phi)
    u = naive_solution(c.offdiag, e.lam, phi, 62)
    u_oracle = T.dense_iterate(c.offdiag, e.lam, phi, 62)
    assert np.allclose(u, u_oracle[1:], rtol=1e-13, atol=1e-13)
    for a, before, after in zip([1, 4, 12, 30], tr.before, tr.after):
        ref_b = T.to_prufer(T.TransferState(u[a], u[a - 1] if a else math.sin(phi)), e)
        ref_a = T.to_prufer(T.TransferState(u[a + 2], u[a + 1]), e)
        assert before.log_R2 == pytest.approx(ref_b.log_R2, abs=1e-12)
        assert after.log_R2 == pytest.approx(ref_a.log_R2, abs=1e-12)
        assert math.cos(after.theta - ref_a.theta) == pytest.approx(1.0, abs=1e-12)


def test_sparse_and_dense_coefficients_agree():
    e = T.EnergyPoint.parse("inv_sqrt2")
    dense = T.propagate_bumps(M.coefficients([2, 9, 21], 0.7, 50), e, 0.2)
    sparse = T.propagate_bumps(T.SparseCoefficients((2, 9, 21), 0.7), e, 0.2)
    for a, b in zip(dense.after, sparse.after):
        assert a.log_R2 == pytest.approx(b.log_R2, abs=1e-13)


def test_single_bump_average_equals_log_r():
    # averaging the one-bump radius change over a uniform arrival angle gives log r exactly
    e = T.EnergyPoint.parse("inv_sqrt2")
    v = (1 - 0.8**2) / 0.8
    vals = []
    for th in np.linspace(0, math.pi, 4000, endpoint=False):
        st0 = T.from_prufer(T.PruferState(0.0, th), e)
        tr = T.propagate_bumps(T.SparseCoefficients((100,), 0.8), e, math.atan2(st0.u_prev, st0.u_curr))
        vals.append(tr.after[0].log_R2 - tr.before[0].log_R2)
    assert np.mean(vals) == pytest.approx(math.log(r_factor(e.lam, v)), abs=1e-6)


def test_free_growth_is_zero():
    e = T.EnergyPoint.parse("inv_sqrt2")
    g = T.growth_rate(ModelParams(1.0, 2), e, 16, 10, 1)
    assert abs(g.rate_mean) < 1e-10


def test_growth_deep_run_finite():
    e = T.EnergyPoint.parse("golden")
    g = T.growth_rate(ModelParams(0.8, 2), e, 64, 3, 11)
    assert math.isfinite(g.rate_mean) and g.j_max == 64


def test_growth_workers_identical():
    e = T.EnergyPoint.parse("inv_sqrt2")
    a = T.growth_rate(ModelParams(0.8, 2), e, 12, 6, 4)
    b = T.growth_rate(ModelParams(0.8, 2), e, 12, 6, 4, workers=2)
    assert np.array_equal(a.rates, b.rates)


def brute_star_discrepancy(x):
    """sup over anchored intervals [0, t) evaluated at every jump, by definition."""
    x = np.asarray(x)
    best = 0.0
    for t in np.concatenate([x, [1.0]]):
        best = max(best, abs(np.mean(x < t) - t), abs(np.mean(x <= t) - t))
    return best


@given(st.lists(st.floats(0, 0.999999), min_size=1, max_size=40))
def test_discrepancy_matches_definition(xs):
    angles = np.array(xs) * math.pi
    assert T.angle_discrepancy(angles) == pytest.approx(brute_star_discrepancy(xs), abs=1e-12)


def test_discrepancy_examples():
    n = 8
    grid = (np.arange(n) + 0.5) / n * math.pi
    assert T.angle_discrepancy(grid) == pytest.approx(0.5 / n)
    assert T.angle_discrepancy([0.0] * 5) == pytest.approx(1.0)


def test_fraction_energy_rotation_is_exact():
    e = T.EnergyPoint(Fraction(1, 4), "rational", "1/4")
    assert e.rotation(8) == 0.0
