import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from focusnls.basis import FourierGrid1D, build_basis
from focusnls.dynamics import evolve_nbody, gaussian_profile, nls_evolve, soliton
from focusnls.errors import ConfigError, PreconditionError, SamplingError, ShapeError
from focusnls.hierarchy import (
    Gauss1D,
    GaussianTestSetup,
    Mollifier,
    _contact_1d,
    _kernel_to_grid,
    _smeared_1d,
    bbgky_residual,
    bbgky_rhs,
    collision_op,
    default_test_setup,
    delta_rate_study,
    effective_coupling,
    fd_sample_times,
    free_commutator,
    free_propagate,
    gaussian_orbital,
    gp_dense_residual,
    gp_differential_residual,
    gp_residual,
    interaction_convergence,
    space_time_bound,
    weighted_collision_norm,
    z_partial_trace,
)
from focusnls.marginals import ReducedZDensity
from focusnls.operators import HamiltonianSpec
from focusnls.potential import PotentialSpec
from focusnls.state import product_state, random_symmetric_state
from focusnls.scaling import default_omega

from conftest import gaussian_z


def _random_density(grid, k, seed, rank=3):
    r = np.random.default_rng(seed)
    n = grid.points**k
    F = r.normal(size=(n, rank)) + 1j * r.normal(size=(n, rank))
    M = F @ F.conj().T
    M /= np.trace(M).real
    return ReducedZDensity(grid, M.reshape((grid.points,) * (2 * k)))


@pytest.fixture(scope="module")
def g8():
    return FourierGrid1D(6.0, 8)


# --------------------------------------------------------------------------
# collision operator


def test_collision_loop_oracle(g8):
    gam = _random_density(g8, 2, 0)
    G = _kernel_to_grid(gam.kernel, 2)
    M = g8.points
    expect = np.zeros((M, M), dtype=complex)
    for n in range(M):
        for m in range(M):
            expect[n, m] = (G[n, n, m, n] - G[n, m, m, m]) / g8.dz
    B = collision_op(gam, 1)
    assert np.allclose(_kernel_to_grid(B.kernel, 1), expect, atol=1e-12)


def test_collision_rank_one_oracle():
    g = FourierGrid1D(16.0, 32)
    phi = gaussian_z(g, 1.5, 0.4)
    B = collision_op(ReducedZDensity.product(g, phi, 2), 1)
    vals = g.sample(phi)
    rho = np.abs(vals) ** 2
    expect = (rho[:, None] - rho[None, :]) * np.outer(vals, vals.conj()) * g.dz
    assert np.allclose(_kernel_to_grid(B.kernel, 1), expect, atol=1e-12)


@given(st.integers(0, 40), st.sampled_from([1, 2]))
def test_collision_traceless_antihermitian(seed, j):
    g = FourierGrid1D(5.0, 4)
    gam = _random_density(g, 3, seed)
    B = collision_op(gam, j)
    assert abs(B.trace()) < 1e-12
    M = B.matrix()
    assert np.max(np.abs(M + M.conj().T)) < 1e-12


def test_collision_validation(g8):
    with pytest.raises(ShapeError):
        collision_op(_random_density(g8, 1, 0), 1)
    with pytest.raises(ShapeError):
        collision_op(_random_density(g8, 2, 0), 2)


def test_z_partial_trace_and_free_flow(g8):
    gam = _random_density(g8, 2, 1)
    low = z_partial_trace(gam)
    assert np.allclose(low.kernel, np.einsum("abcb->ac", gam.kernel))
    a = free_propagate(free_propagate(gam, 0.3), 0.4)
    assert np.allclose(a.kernel, free_propagate(gam, 0.7).kernel)
    h = 1e-5
    dg = (free_propagate(gam, h).kernel - free_propagate(gam, -h).kernel) / (2 * h)
    assert np.allclose(1j * dg, free_commutator(gam).kernel, atol=1e-6)


# --------------------------------------------------------------------------
# GP hierarchy


@pytest.fixture(scope="module")
def soliton_traj():
    g = FourierGrid1D(24.0, 32)
    # unit mass so the partial trace of the product density carries no stray norm factor
    s0 = soliton(g, 1.0, 4.0).normalized()
    return nls_evolve(s0, T=0.2, dt=1e-4, sample_times=np.linspace(0, 0.2, 41), scheme="yoshida4")


def test_gp_gram_equals_dense(soliton_traj):
    for k in (1, 2):
        d = gp_residual(soliton_traj, k, eval_times=[0.1, 0.2], dense=True)
        h = gp_residual(soliton_traj, k, eval_times=[0.1, 0.2], dense=False)
        # the Gram route cancels O(1) sums, so agreement is relative to the terms
        assert np.allclose(d.residuals, h.residuals, rtol=1e-5, atol=1e-12)


def test_gp_equals_general_kernel_route(soliton_traj):
    g = soliton_traj.fields[0].grid
    gam = [ReducedZDensity.product(g, f.coeffs, 2) for f in soliton_traj.fields[:9]]
    gen = gp_dense_residual(soliton_traj.times[:9], gam, 4.0)
    fac = gp_residual(soliton_traj, 1, eval_times=soliton_traj.times[1:9], dense=True)
    assert np.allclose(gen.residuals, fac.residuals, rtol=1e-6, atol=1e-12)


def test_gp_soliton_small_and_refines(soliton_traj):
    r = gp_residual(soliton_traj, 1)
    assert r.max < 1e-4
    coarse = nls_evolve(soliton_traj.fields[0], T=0.2, dt=1e-4,
                        sample_times=np.linspace(0, 0.2, 21), scheme="yoshida4")
    ratio = gp_residual(coarse, 1, eval_times=[0.2]).max / gp_residual(soliton_traj, 1, eval_times=[0.2]).max
    assert 3.0 < ratio < 5.0  # trapezoid rule: second order in the sample spacing


def test_gp_free_flow_exact():
    g = FourierGrid1D(24.0, 32)
    tr = nls_evolve(gaussian_profile(g, 1.0, 0.0, 0.5), T=0.3, dt=1e-3, sample_times=[0, 0.1, 0.3])
    assert gp_residual(tr, 1).max < 1e-12
    assert gp_residual(tr, 2, dense=False).max < 1e-12


def test_gp_differential(soliton_traj):
    r = gp_differential_residual(soliton_traj, 1)
    assert r.max < 1e-3  # O(h^2) central difference with h = 5e-3
    wrong = gp_differential_residual(soliton_traj, 1, c=0.0)
    assert wrong.max > 100 * r.max


def test_gp_coupling_checks(soliton_traj):
    c = 4.0
    b0 = c * 2 * math.pi
    assert effective_coupling(b0) == pytest.approx(c)
    ok = gp_residual(soliton_traj, 1, variant="coupled", b0=b0, eval_times=[0.1])
    assert ok.kind == "gp-coupled"
    with pytest.raises(ConfigError):
        gp_residual(soliton_traj, 1, variant="coupled", b0=1.0)
    with pytest.raises(ConfigError):
        gp_residual(soliton_traj, 1, variant="coupled")
    with pytest.raises(ConfigError):
        gp_residual(soliton_traj, 1, b0=b0)
    with pytest.raises(ConfigError):
        gp_residual(soliton_traj, 1, coupling=3.0)
    with pytest.raises(ConfigError):
        gp_residual(soliton_traj, 1, variant="three-dimensional")


def test_gp_sampling_checks(soliton_traj):
    late = nls_evolve(soliton_traj.fields[0], T=0.2, dt=1e-3, sample_times=[0.1, 0.2])
    with pytest.raises(SamplingError):
        gp_residual(late, 1)
    with pytest.raises(SamplingError):
        gp_differential_residual(late, 1)
    with pytest.raises(SamplingError):
        gp_dense_residual([0.0], [ReducedZDensity.product(late.fields[0].grid, late.fields[0].coeffs, 2)], 1.0)


@pytest.mark.parametrize("k", [1, 2])
def test_space_time_bound_matches_kernel(k):
    g = FourierGrid1D(12.0, 8)
    f0 = gaussian_profile(g, 1.0, 2.0, k0=0.8)
    tr = nls_evolve(f0, T=0.1, dt=1e-3, sample_times=[0, 0.05, 0.1])
    rep = space_time_bound(tr, k)
    direct = [weighted_collision_norm(ReducedZDensity.product(g, f.coeffs, k + 1), 1) for f in tr.fields]
    assert np.allclose(rep.integrand, direct, rtol=1e-10)
    assert rep.value == pytest.approx(np.trapezoid(direct, tr.times), rel=1e-10)


# --------------------------------------------------------------------------
# BBGKY


def test_bbgky_rhs_is_traced_commutator(small_basis, attractive):
    N = 3
    spec = HamiltonianSpec(N, 2.0, attractive, small_basis)
    psi = random_symmetric_state(small_basis, N, rng=0).coeffs
    d = small_basis.dim
    Hpsi = spec.apply_tensor(psi)
    for k in (1, 2):
        A = Hpsi.reshape(d**k, -1)
        P = psi.reshape(d**k, -1)
        X = A @ P.conj().T  # Tr_{k+1..N} H |psi><psi|
        assert np.allclose(bbgky_rhs(spec, psi, k), X - X.conj().T, atol=1e-11)


def test_bbgky_free_and_richardson(basis16):
    phi = gaussian_z(basis16.z_grid, 2.0, 0.3)
    psi0 = product_state(basis16, 2, basis16.ground_product(phi))
    spec = HamiltonianSpec(2, 4.0, PotentialSpec.attractive_gaussian(1.0, 1.0), basis16)
    res = []
    for h in (2e-3, 1e-3):
        tr = evolve_nbody(spec, psi0, T=0.3, sample_times=fd_sample_times([0.2], h), log_energy=False)
        res.append(bbgky_residual(tr, spec, 1, h).max)
    assert 3.5 < res[0] / res[1] < 4.5


def test_bbgky_free_slow_data():
    # wide, zero-momentum data keep ||ad_H^3 g|| small, so the O(h^2) term is tiny
    b = build_basis(1, M_z=32, L_z=32.0)
    psi0 = product_state(b, 2, b.ground_product(gaussian_z(b.z_grid, 4.0)))
    spec = HamiltonianSpec(2, 4.0, PotentialSpec.zero(0.25), b)
    tr = evolve_nbody(spec, psi0, T=0.3, sample_times=fd_sample_times([0.2], 1e-3), log_energy=False)
    assert bbgky_residual(tr, spec, 1, 1e-3).max < 1e-8


def test_bbgky_sampling_error(small_basis, attractive):
    spec = HamiltonianSpec(2, 2.0, attractive, small_basis)
    psi0 = product_state(small_basis, 2, small_basis.ground_product(gaussian_z(small_basis.z_grid)))
    tr = evolve_nbody(spec, psi0, T=0.3, sample_times=[0.1, 0.25, 0.3], log_energy=False)
    with pytest.raises(SamplingError):
        bbgky_residual(tr, spec, 1)
    with pytest.raises(ShapeError):
        bbgky_residual(tr, spec, 3)


# --------------------------------------------------------------------------
# Gaussian delta engine


def _closed_form(a, b, sig):
    # exact 2D Gaussian integral of a(x) b(y) G_sigma(x - y)
    c = 1 / (2 * sig**2)
    P = np.array([[a.p + c, -c], [-c, b.p + c]])
    q = np.array([a.q, b.q])
    pref = a.A * b.A / math.sqrt(2 * math.pi * sig**2) * math.pi / np.sqrt(np.linalg.det(P))
    return pref * np.exp(0.25 * q @ np.linalg.solve(P, q))


@given(st.floats(0.2, 2.0), st.floats(0.2, 2.0), st.floats(-1, 1), st.floats(-1, 1),
       st.floats(0.01, 2.0))
def test_smeared_closed_form(pa, pb, qa, kb, sig):
    a = Gauss1D(1.0, pa, qa + 0.5j)
    b = Gauss1D(0.7, pb, 1j * kb)
    assert abs(_smeared_1d(a, b, sig) - _closed_form(a, b, sig)) < 1e-10


def test_gauss_integral_and_contact():
    a = Gauss1D(1.3, 0.6, 0.4 + 0.2j)
    re, _ = integrate.quad(lambda x: a(x).real, -30, 30)
    im, _ = integrate.quad(lambda x: a(x).imag, -30, 30)
    assert a.integral() == pytest.approx(re + 1j * im, abs=1e-10)
    b = Gauss1D(0.5, 0.9, -0.3j)
    assert _contact_1d(a, b) == pytest.approx((a * b).integral(), abs=1e-12)


def test_orbital_normalized():
    u = gaussian_orbital((0.3, -0.2, 0.1), (0.7, 1.1, 0.9), (0.5, 0, -1))
    n = np.prod([(ax.conj() * ax).integral() for ax in u])
    assert n == pytest.approx(1.0, abs=1e-12)


def test_mollifier_integrals():
    assert Mollifier.gaussian().integral == 1.0
    f = Mollifier.sign_changing()
    assert f.integral == pytest.approx(1.0)
    assert f.scaled(0.1).integral == f.integral
    V = PotentialSpec.attractive_gaussian(0.8, 1.0, 0.25)
    assert Mollifier.from_potential(V, 10, 3.0).integral == pytest.approx(V.integral, rel=1e-12)


def test_smeared_tends_to_contact():
    s = default_test_setup(2, seed=3)
    f = Mollifier.gaussian()
    e1 = abs(s.smeared(f.scaled(0.02)) - s.contact())
    e2 = abs(s.smeared(f.scaled(0.01)) - s.contact())
    assert e2 < e1 < 1e-3
    assert s.k == 2


@pytest.mark.parametrize("f", [Mollifier.gaussian(), Mollifier.sign_changing()])
def test_delta_rate(f):
    rep = delta_rate_study(f, kappa=0.4, alphas=(0.4, 0.2, 0.1, 0.05))
    assert rep.passed
    assert rep.slope > 1.5  # even mollifier: second-order moments
    assert rep.record()["passed"] is True


def test_delta_rate_preconditions():
    with pytest.raises(PreconditionError):
        delta_rate_study(Mollifier.gaussian(), kappa=0.6)
    with pytest.raises(PreconditionError):
        delta_rate_study(Mollifier(((0.5, (1.0, 1.0, 1.0)),)))
    with pytest.raises(PreconditionError):
        delta_rate_study(Mollifier.gaussian(), alphas=(0.1,))


def test_interaction_convergence():
    V = PotentialSpec.attractive_gaussian(1.0, 1.0, 0.25)
    pts = [(N, default_omega(0.25, N)) for N in (10, 100, 1000, 10**4)]
    rep = interaction_convergence(V, pts)
    assert rep.monotone
    assert rep.gaps[-1] < 0.5 * rep.gaps[0]


def test_setup_is_rank_one_product():
    # with f a tiny Gaussian the smeared trace factorizes as <u|g><g'|u>-like pieces
    u = gaussian_orbital()
    s = GaussianTestSetup((u, u), (u,), (u,))
    # J = |u><u|, g = |u u><u u|: Tr J delta g = int |u|^4
    expect = np.prod([((ax.conj() * ax) * (ax.conj() * ax)).integral() for ax in u])
    assert s.contact() == pytest.approx(expect, rel=1e-12)
