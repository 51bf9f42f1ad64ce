import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from focusnls.basis import FourierGrid1D, build_basis
from focusnls.dynamics import NLSField
from focusnls.errors import PreconditionError, ShapeError
from focusnls.marginals import (
    DensityMatrix,
    MetricConfig,
    ReducedZDensity,
    dk_metric,
    factorization_gap,
    field_coefficients,
    hs_distance,
    limiting_structure_gap,
    partial_trace,
    probe_distance,
    product_reference,
    reduce_marginal,
    sector_norm,
    sector_weights,
    trace_distance,
)
from focusnls.state import ManyBodyState, product_state, random_symmetric_state

from conftest import gaussian_z


def _unit(r, n):
    v = r.normal(size=n) + 1j * r.normal(size=n)
    return v / np.linalg.norm(v)


def test_one_marginal_oracle(small_basis):
    psi = random_symmetric_state(small_basis, 2, rng=0)
    d = small_basis.dim
    c = psi.coeffs
    expect = np.zeros((d, d), dtype=complex)
    for a in range(d):
        for b in range(d):
            expect[a, b] = sum(c[a, m] * np.conj(c[b, m]) for m in range(d))
    assert np.allclose(reduce_marginal(psi, 1).matrix(), expect, atol=1e-14)


def test_marginal_properties(small_basis):
    psi = random_symmetric_state(small_basis, 3, rng=1)
    g3 = reduce_marginal(psi, 3, factored=True)  # a dense d^3 x d^3 kernel would not fit
    assert abs(g3.trace() - 1.0) < 1e-12
    for k in (1, 2):
        g = reduce_marginal(psi, k, factored=False)
        assert abs(g.trace() - 1.0) < 1e-12
        assert g.hermiticity_defect() < 1e-14
        assert g.eigenvalues().min() > -1e-13
        assert g.permutation_defect() < 1e-13
    with pytest.raises(PreconditionError):
        reduce_marginal(psi, 4)


def test_consistency_chain(small_basis):
    psi = random_symmetric_state(small_basis, 3, rng=2)
    g3 = reduce_marginal(psi, 3, factored=True)
    g2 = reduce_marginal(psi, 2)
    g1 = reduce_marginal(psi, 1)
    assert np.max(np.abs(partial_trace(g3).matrix() - g2.matrix())) < 1e-12
    assert np.max(np.abs(partial_trace(g2).matrix() - g1.matrix())) < 1e-12


def test_factored_equals_dense(small_basis):
    psi = random_symmetric_state(small_basis, 2, rng=3)
    gf = reduce_marginal(psi, 1, factored=True)
    gd = reduce_marginal(psi, 1, factored=False)
    assert gf.is_factored and not gd.is_factored
    assert np.allclose(gf.matrix(), gd.matrix())
    assert np.allclose(np.sort(gf.eigenvalues())[-3:], np.sort(gd.eigenvalues())[-3:], atol=1e-12)
    X = np.random.default_rng(0).normal(size=(small_basis.dim, 2))
    assert np.allclose(gf.apply(X), gd.apply(X))


def test_x_partial_trace_oracle(small_basis):
    psi = random_symmetric_state(small_basis, 2, rng=4)
    Mx, Mz = small_basis.shape
    for k in (1, 2):
        g = reduce_marginal(psi, k, factored=False)
        K = g.kernel.reshape((Mx, Mz) * (2 * k))
        if k == 1:
            expect = np.einsum("apaq->pq", K)
        else:
            expect = np.einsum("apbqarbs->pqrs", K)
        gz = partial_trace(g, "x-component")
        assert np.allclose(gz.kernel, expect, atol=1e-14)
        gzf = partial_trace(reduce_marginal(psi, k, factored=True), "x-component")
        assert np.allclose(gzf.kernel, expect, atol=1e-14)
    with pytest.raises(PreconditionError):
        partial_trace(g, "bogus")


@given(st.integers(0, 200))
def test_pure_state_distances(seed):
    r = np.random.default_rng(seed)
    b = build_basis(1, M_z=8, L_z=6.0)
    u, v = _unit(r, b.dim), _unit(r, b.dim)
    ov = abs(np.vdot(u, v)) ** 2
    gu = DensityMatrix(b, factor=u[:, None], k=1)
    gv = DensityMatrix(b, factor=v[:, None], k=1)
    assert trace_distance(gu, gv) == pytest.approx(2 * math.sqrt(1 - ov), abs=1e-12)
    assert hs_distance(gu, gv) == pytest.approx(math.sqrt(2 * (1 - ov)), abs=1e-12)
    dense = DensityMatrix(b, kernel=np.outer(v, v.conj()))
    assert trace_distance(gu, dense) == pytest.approx(trace_distance(gu, gv), abs=1e-12)
    assert probe_distance(gu, gv) <= hs_distance(gu, gv) + 1e-12


@given(st.integers(0, 100))
def test_dk_metric_bounded_by_trace(seed):
    b = build_basis(2, M_z=8, L_z=8.0)
    cfg = MetricConfig.default(b)
    r = np.random.default_rng(seed)
    g1 = reduce_marginal(random_symmetric_state(b, 2, rng=r), 1)
    g2 = reduce_marginal(random_symmetric_state(b, 2, rng=r), 1)
    d = dk_metric(g1, g2, cfg)
    assert 0 <= d <= trace_distance(g1, g2) + 1e-12
    assert dk_metric(g1, g1, cfg) == 0.0


def test_dk_metric_factored_k2(small_basis):
    cfg = MetricConfig.default(small_basis)
    psi = random_symmetric_state(small_basis, 2, rng=5)
    phi = random_symmetric_state(small_basis, 2, rng=6)
    d1 = dk_metric(reduce_marginal(psi, 2, factored=True), reduce_marginal(phi, 2, factored=True), cfg)
    d2 = dk_metric(reduce_marginal(psi, 2, factored=False), reduce_marginal(phi, 2, factored=False), cfg)
    assert d1 == pytest.approx(d2, rel=1e-12)


def test_metric_config_validation(small_basis):
    with pytest.raises(PreconditionError):
        MetricConfig([2.0 * np.eye(small_basis.dim)])
    with pytest.raises(PreconditionError):
        MetricConfig([])
    cfg = MetricConfig.default(small_basis)
    assert cfg.weights.sum() < 1.0 and len(cfg.names) == len(cfg.operators)


def test_product_state_has_zero_gaps(small_basis):
    phi = gaussian_z(small_basis.z_grid, 1.0, 0.3)
    psi = product_state(small_basis, 3, small_basis.ground_product(phi))
    g1 = reduce_marginal(psi, 1)
    assert trace_distance(g1, product_reference(small_basis, phi)) < 1e-12
    assert limiting_structure_gap(g1) < 1e-12
    field = NLSField.from_coeffs(small_basis.z_grid, phi)
    assert factorization_gap(g1, field) < 1e-12
    g2 = reduce_marginal(psi, 2)
    assert trace_distance(g2, product_reference(small_basis, phi, 2)) < 1e-12


def test_excited_component_breaks_structure(small_basis):
    phi = gaussian_z(small_basis.z_grid)
    u = np.zeros(small_basis.shape, complex)
    u[0] = phi
    u[1] = 0.3 * phi
    u /= np.linalg.norm(u)
    g1 = reduce_marginal(product_state(small_basis, 2, u), 1)
    # pure state |u><u| vs |h><h| (x) |phi><phi| with weight 1/(1+0.09)
    assert limiting_structure_gap(g1) > 0.1


def test_field_coefficients_truncation():
    fine, coarse = FourierGrid1D(20.0, 128), FourierGrid1D(20.0, 32)
    f = NLSField(fine, np.exp(-fine.nodes**2 / 4) * np.exp(0.5j * fine.nodes))
    c = field_coefficients(f, coarse)
    direct = coarse.from_samples(np.exp(-coarse.nodes**2 / 4) * np.exp(0.5j * coarse.nodes))
    assert np.allclose(c, direct, atol=1e-6)  # aliasing of a smooth function is tiny
    with pytest.raises(ShapeError):
        field_coefficients(f, FourierGrid1D(12.0, 32))


def test_sector_weights(small_basis):
    psi = random_symmetric_state(small_basis, 2, rng=7)
    rows = sector_weights(psi)
    assert sum(r["value"] ** 2 for r in rows) == pytest.approx(1.0, rel=1e-12)
    assert sector_norm(psi, 2) == pytest.approx(
        [r["value"] for r in rows if r["alpha"] == (1, 1)][0]
    )
    g1 = reduce_marginal(psi, 1)
    dm = sector_weights(g1)
    diag = [r["value"] for r in dm if r["alpha"] == r["beta"]]
    assert sum(diag) == pytest.approx(1.0, rel=1e-12)
    gf = reduce_marginal(psi, 1, factored=True)
    assert [r["value"] for r in sector_weights(gf) if r["alpha"] == r["beta"]] == pytest.approx(diag)


def test_reduced_z_density(small_basis):
    phi = gaussian_z(small_basis.z_grid)
    g = ReducedZDensity.product(small_basis.z_grid, phi, 2)
    assert g.k == 2 and abs(g.trace() - 1) < 1e-13
    assert g.hermiticity_defect() < 1e-15
    assert g.eigenvalues()[-1] == pytest.approx(1.0)
    with pytest.raises(ShapeError):
        ReducedZDensity(small_basis.z_grid, np.zeros((3, 3)))


def test_density_matrix_validation(small_basis):
    with pytest.raises(ShapeError):
        DensityMatrix(small_basis)
    with pytest.raises(ShapeError):
        DensityMatrix(small_basis, factor=np.zeros((5, 1)), k=1)
    with pytest.raises(ShapeError):
        DensityMatrix(small_basis, kernel=np.zeros((5, 5)))
    psi = ManyBodyState(small_basis, np.eye(small_basis.dim) / math.sqrt(small_basis.dim))
    with pytest.raises(ShapeError):
        trace_distance(reduce_marginal(psi, 1), reduce_marginal(psi, 2))
