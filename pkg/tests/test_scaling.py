import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from focusnls.errors import DomainError, PreconditionError
from focusnls.potential import PotentialSpec
from focusnls.scaling import (
    BETA_MAX,
    INFINITY,
    coupling_report,
    default_omega,
    h_quartic_integral,
    omega_window,
    scaling_exponents,
    v1,
    v2,
    v2_terms,
    vE,
)

betas = st.floats(0.01, BETA_MAX - 0.01)


def test_v1_closed_form():
    assert v1(0.25) == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert v1(0.4) == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_second_term_infinite_below_one_fifth():
    assert v2_terms(0.2)[1] == INFINITY
    assert v2_terms(0.1)[1] == INFINITY
    assert math.isfinite(v2_terms(0.21)[1])


def test_three_terms_meet_at_one_third():
    t1, t2, t3, _ = v2_terms(1.0 / 3.0)
    for t in (t1, t2, t3):
        assert abs(t - 2.0) < 1e-12


def test_strict_flag_when_exclusive_term_binds():
    # for small beta the term 2b/(1-2b) is the smallest
    e = v2(0.1)
    assert e.strict and e.binding == "2b/(1-2b)-"
    assert omega_window(0.1, 10).upper_open
    assert not omega_window(0.4, 10).upper_open


@pytest.mark.parametrize("beta", [0.0, -0.1, BETA_MAX, 0.5])
def test_beta_domain(beta):
    with pytest.raises(DomainError):
        v1(beta)


@given(betas)
def test_window_ordering(beta):
    ex = scaling_exponents(beta)
    assert ex.v1 < ex.v2_value
    assert ex.v1 < ex.vE_value
    assert ex.v2_value <= ex.vE_value


@given(betas, st.integers(2, 10**6))
def test_window_nonempty_and_monotone_in_N(beta, N):
    w = omega_window(beta, N)
    assert not w.empty
    w2 = omega_window(beta, 2 * N)
    assert w2.lower > w.lower and w2.upper > w.upper


def test_energy_window_is_wider():
    for beta in (0.1, 0.25, 0.4):
        d = omega_window(beta, 100)
        e = omega_window(beta, 100, mode="energy-only")
        assert e.lower == d.lower and e.upper >= d.upper


def test_window_membership_absorbs_rounding():
    # 2 ** v2(0.4) == 2 ** 1 evaluates to 1.9999999999999998
    w = omega_window(0.4, 2)
    assert 2.0 in w
    assert 2.0 + 1e-6 not in w


def test_window_preconditions():
    with pytest.raises(PreconditionError):
        omega_window(0.25, 1)
    with pytest.raises(PreconditionError):
        omega_window(0.25, 2, C1=0.0)
    with pytest.raises(PreconditionError):
        omega_window(0.25, 2, mode="other")


@given(betas, st.integers(2, 10**5))
def test_default_omega_in_window(beta, N):
    w = omega_window(beta, N)
    om = default_omega(beta, N)
    assert om in w or w.upper < 1.0 + 1e-12


def test_default_omega_integer_when_possible():
    assert default_omega(0.25, 3) == 2.0
    # [1.26, 2) contains no integer
    assert default_omega(0.25, 2) == pytest.approx(2 ** (2 / 3), rel=1e-14)


def test_h_quartic_oracle():
    # closed form 1/(2 pi); the quadrature has converged at the default node count
    assert abs(h_quartic_integral() - 1.0 / (2.0 * math.pi)) < 1e-10
    assert abs(h_quartic_integral(40) - h_quartic_integral(80)) < 1e-12


def test_coupling_report():
    V = PotentialSpec.attractive_gaussian(0.8, 1.0, 0.25)
    rep = coupling_report(V)
    integral = 0.8 * (2 * math.pi) ** 1.5
    assert rep.b0 == pytest.approx(integral, rel=1e-14)
    assert rep.c_eff == pytest.approx(integral / (2 * math.pi), rel=1e-10)
    assert coupling_report(PotentialSpec.zero()).c_eff == 0.0
    with pytest.raises(PreconditionError):
        coupling_report(PotentialSpec.repulsive_gaussian(1.0, 1.0))


def test_v2_is_min_of_terms_grid():
    grid = np.linspace(0.01, BETA_MAX - 0.01, 2000)
    for b in grid:
        assert v2(b).value == min(v2_terms(b))
        assert vE(b) >= v2(b).value


def test_term_monotonicity():
    grid = np.linspace(0.01, BETA_MAX - 0.01, 500)
    T = np.array([v2_terms(b) for b in grid])
    assert np.all(np.diff([v1(b) for b in grid]) > 0)
    assert np.all(np.diff(T[:, 0]) < 0)
    finite = grid > 0.2
    assert np.all(np.diff(T[finite, 1]) < 0)
    assert np.all(np.diff(T[:, 2]) > 0)  # the exclusive term increases with beta
    assert np.all(np.diff(T[:, 3]) < 0)
