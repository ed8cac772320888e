import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sparselab import theory as Th
from sparselab.errors import InadmissibleParameters, ValidationError


def mp_alpha(lam, p, beta):
    """High-precision oracle straight from the closed forms."""
    with mpmath.workdps(40):
        p, lam, beta = mpmath.mpf(p), mpmath.mpf(lam), mpmath.mpf(beta)
        v = (1 - p * p) / p
        r = 1 + v * v / (4 - lam * lam)
        return float(1 - mpmath.log(r) / mpmath.log(beta))


class TestCouplings:
    def test_examples(self):
        assert Th.coupling_v(1.0) == 0.0
        assert Th.coupling_v(0.5) == pytest.approx(1.5, abs=1e-15)
        v_c, p_c = Th.critical_couplings(2)
        assert v_c == pytest.approx(2.0, abs=1e-15)
        assert p_c == pytest.approx(math.sqrt(2) - 1, abs=1e-12)

    def test_p_c_gives_v_c(self):
        for beta in range(2, 40):
            v_c, p_c = Th.critical_couplings(beta)
            assert abs(Th.coupling_v(p_c) - v_c) < 1e-9

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValidationError, match=r"\[theory\.p\]"):
            Th.ModelParams(0.0, 2)
        with pytest.raises(ValidationError, match=r"\[theory\.beta\]"):
            Th.ModelParams(0.5, 1)
        with pytest.raises(ValidationError, match=r"\[theory\.phi\]"):
            Th.ModelParams(0.5, 2, math.pi / 2 + 1e-4)
        Th.ModelParams(0.5, 2, math.pi / 2)

    @given(st.floats(0.05, 1.0))
    def test_p_for_coupling_inverts(self, p):
        assert Th.p_for_coupling(Th.coupling_v(p)) == pytest.approx(p, rel=1e-12)


class TestDimension:
    def test_example_value(self):
        lam = 2 * math.cos(math.pi / math.sqrt(2))
        v = Th.coupling_v(0.8)
        assert Th.local_dimension(lam, v, 2) == pytest.approx(mp_alpha(lam, 0.8, 2), abs=1e-13)
        assert Th.local_dimension(lam, v, 2) == pytest.approx(0.889022, abs=1e-6)

    @given(st.floats(0.05, 0.999), st.integers(2, 50), st.floats(-1.99, 1.99))
    def test_matches_high_precision(self, p, beta, lam):
        v = Th.coupling_v(p)
        assert Th.local_dimension(lam, v, beta) == pytest.approx(mp_alpha(lam, p, beta), abs=1e-11)

    def test_free_case_is_one(self):
        assert np.all(Th.local_dimension(np.linspace(-1.9, 1.9, 11), 0.0, 3) == 1.0)

    def test_outside_band(self):
        a, inside = Th.local_dimension(2.0, 0.3, 2, return_flag=True)
        assert a == -math.inf and not inside

    @given(st.floats(0.3, 0.999), st.integers(2, 20))
    def test_symmetric_and_decreasing_in_abs_lambda(self, p, beta):
        v = Th.coupling_v(p)
        lam = np.linspace(0, 1.99, 50)
        a = Th.local_dimension(lam, v, beta)
        assert np.all(np.diff(a) <= 1e-15)
        assert np.allclose(a, Th.local_dimension(-lam, v, beta), atol=0)

    def test_inverse(self):
        v = Th.coupling_v(0.8)
        for a in (0.1, 0.5, 0.9):
            lam = float(Th.inverse_local_dimension(a, v, 2))
            assert Th.local_dimension(lam, v, 2) == pytest.approx(a, abs=1e-12)


class TestMobilityEdges:
    def test_example(self):
        lm, lp = Th.mobility_edges(Th.coupling_v(0.8), 2)
        assert lp == pytest.approx(1.948718, abs=1e-6) and lm == -lp

    def test_above_critical(self):
        assert Th.mobility_edges(2.5, 2) is None
        assert Th.sc_interval(2.5, 2).empty

    def test_critical_point(self):
        w = Th.sc_interval(2.0, 2)
        assert w.lo == 0.0 and w.hi == 0.0

    @given(st.integers(2, 30), st.floats(0.02, 0.98))
    def test_r_equals_beta_at_edge(self, beta, frac):
        v_c, _ = Th.critical_couplings(beta)
        v = frac * v_c
        lm, lp = Th.mobility_edges(v, beta)
        assert abs(Th.r_factor(lp, v) - beta) < 1e-9 * beta
        assert abs(Th.local_dimension(lm, v, beta)) < 1e-9
        w = Th.sc_interval(v, beta)
        assert abs(w.hi - lp) < 1e-12 and abs(w.lo - lm) < 1e-12

    def test_complement_tiles_band(self):
        v = Th.coupling_v(0.8)
        parts = Th.pp_complement(v, 2)
        assert [(w.lo, w.hi) for w in parts][0][0] == -2.0
        assert sum(w.width for w in parts) + Th.sc_interval(v, 2).width == pytest.approx(4.0)

    def test_r_factor_domain(self):
        with pytest.raises(ValidationError):
            Th.r_factor(2.0, 0.1)


class TestPartition:
    @pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
    def test_oscillation_below_epsilon(self, eps):
        part = Th.build_partition(Th.coupling_v(0.8), 2, eps)
        assert np.max(Th.cell_oscillation(part)) <= eps + 1e-12
        assert np.all(part.half_widths <= min(0.5, eps) + 1e-15)

    def test_tiles_sc_interval(self):
        v = Th.coupling_v(0.8)
        part = Th.build_partition(v, 2, 0.1)
        e = part.edges
        assert np.allclose(e[1:-1] - e[:-2] > 0, True)
        assert e[0] == pytest.approx(-Th.mobility_edges(v, 2)[1], abs=1e-12)
        assert e[-1] == pytest.approx(Th.mobility_edges(v, 2)[1], abs=1e-12)
        lo = part.centers - part.half_widths
        hi = part.centers + part.half_widths
        assert np.allclose(lo[1:], hi[:-1], atol=1e-12)

    def test_delta_bar_shrinks(self):
        v = Th.coupling_v(0.8)
        d = [Th.build_partition(v, 2, e).delta_bar for e in (0.2, 0.1, 0.05, 0.025)]
        assert all(b < a for a, b in zip(d, d[1:]))


class TestChooser:
    def test_reference_case(self):
        ap = Th.choose_parameters(0.9, 4, 1.0)
        assert all(Th.verify_appendix(ap).values())
        assert ap.alpha_min > 0.5
        assert ap.r_star == pytest.approx(1.42207, abs=1e-5)
        assert abs(Th.r_factor(ap.lambda_tilde_plus + ap.delta_bar, ap.v) - ap.r_star) < 1e-9

    def test_independent_reverification(self):
        ap = Th.choose_parameters(0.9, 4, 1.0)
        v = (1 - 0.81) / 0.9
        v_c2 = 4 * 3
        assert v * v < 1.0 * (2 - 1) < v_c2 and 1.0 < 4
        lower = 1 + v * v / (4 - ap.delta_bar ** 2)
        assert lower < ap.r_star < 2.0
        assert 0 < ap.lambda_tilde_plus < 2 * math.sqrt(1 - v * v / v_c2)
        assert 0 < ap.epsilon < ap.epsilon_0 <= math.log(2 / ap.r_star) / math.log(4) + 1e-15
        assert 1 - math.log(ap.r_star) / math.log(4) - ap.epsilon == pytest.approx(ap.alpha_min, abs=1e-15)

    def test_inadmissible_names_inequality(self):
        with pytest.raises(InadmissibleParameters) as info:
            Th.choose_parameters(0.5, 2, 3.9)
        assert info.value.inequality == "v^2 < a(sqrt(beta)-1)"
        assert "v^2 < a(sqrt(beta)-1)" in str(info.value)

    def test_other_inequalities(self):
        names = {c.name: c.ok for c in Th.admissibility(0.99, 2, 11.0)}
        assert not names["a(sqrt(beta)-1) < v_c^2"] and not names["a < 4"]


class TestWindowsAndPhase:
    def test_window_validation(self):
        with pytest.raises(ValidationError):
            Th.SpectralWindow(1.0, 0.0)
        with pytest.raises(ValidationError):
            Th.SpectralWindow(-3.0, 0.0, "sc_interval_I")
        Th.SpectralWindow(-3.0, 3.0)

    def test_phase_rows(self):
        L, R, tag = Th.phase_diagram(np.linspace(-1.99, 1.99, 9), [0.0, 0.225, 0.999999])
        assert len(L) == 27
        assert set(tag[R == 0.0]) == {"sc"}
        top = tag[R == 0.999999]
        assert list(top).count("sc") == 1  # only lambda = 0 survives
