"""Geometry unit tests: discrete calculus, quadrature, curvature, distance."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmelab.torus import build_torus, geodesic_distance

I0_02 = 1.0100250277951458  # high-precision value of the f = 0.2 sin weight volume


def test_build_defaults_and_invariants():
    g = build_torus(1, 256, 1.0)
    assert g.spacing == (1.0 / 256,)
    assert g.m_param == 1.0
    g2 = build_torus(2, (64, 64), (1.0, 1.0))
    # quadrature weights: each h^2, summing to the box volume
    assert g2.cell_volume == pytest.approx(1.0 / 4096, rel=1e-15)
    assert g2.integrate(np.ones(g2.shape)) == pytest.approx(1.0, abs=1e-14)
    g3 = build_torus(2, (16, 24), (2.0, 3.0))
    assert g3.integrate(np.ones(g3.shape)) == pytest.approx(6.0, rel=1e-14)


def test_weight_sampled_against_analytic_nodes():
    g = build_torus(1, 128, 1.0, weight=lambda x: 0.2 * np.sin(2 * np.pi * x), m_param=3.0)
    x = g.axis_coordinates(0)
    assert np.allclose(g.weight, 0.2 * np.sin(2 * np.pi * x), atol=0, rtol=0)
    assert g.m_param == 3.0


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dim=4, points_per_axis=16, periods=1.0),
        dict(dim=1, points_per_axis=4, periods=1.0),
        dict(dim=1, points_per_axis=64, periods=-1.0),
        dict(dim=1, points_per_axis=64, periods=1.0, weight=lambda x: np.sin(2 * np.pi * x), m_param=1.0),
        dict(dim=1, points_per_axis=64, periods=1.0, m_param=0.5),
    ],
)
def test_build_validation_errors(kwargs):
    with pytest.raises(ValueError):
        build_torus(**kwargs)


def test_gradient_of_constant_is_zero():
    g = build_torus(2, (32, 32), (1.0, 1.0))
    assert np.all(g.gradient(np.full(g.shape, 3.7)) == 0.0)
    assert np.all(g.laplacian(np.full(g.shape, 3.7)) == 0.0)


def test_laplacian_truncation_constant():
    # second-order stencil; Taylor constant of the composed wide stencil
    g = build_torus(1, 256, 1.0)
    x = g.axis_coordinates(0)
    f = np.sin(2 * np.pi * x)
    err = np.max(np.abs(g.laplacian(f) + 4 * np.pi**2 * f))
    h = g.spacing[0]
    assert err <= (16.0 / 3.0) * np.pi**4 * h * h * 1.02


def test_gradient_laplacian_second_order():
    errs_g, errs_l = [], []
    for n in (64, 128):
        g = build_torus(1, n, 1.0)
        x = g.axis_coordinates(0)
        f = np.sin(2 * np.pi * x) + 0.3 * np.cos(4 * np.pi * x)
        df = 2 * np.pi * np.cos(2 * np.pi * x) - 1.2 * np.pi * np.sin(4 * np.pi * x)
        lf = -4 * np.pi**2 * np.sin(2 * np.pi * x) - 0.3 * 16 * np.pi**2 * np.cos(4 * np.pi * x)
        errs_g.append(np.max(np.abs(g.gradient(f)[0] - df)))
        errs_l.append(np.max(np.abs(g.laplacian(f) - lf)))
    assert 3.7 <= errs_g[0] / errs_g[1] <= 4.3
    assert 3.7 <= errs_l[0] / errs_l[1] <= 4.3


def test_hessian_trace_equals_laplacian_exactly():
    g = build_torus(2, (32, 32), (1.0, 1.0))
    X, Y = g.coordinate_grids()
    f = np.sin(2 * np.pi * X) * np.sin(2 * np.pi * Y)
    H = g.hessian(f)
    assert np.max(np.abs(H[0, 0] + H[1, 1] - g.laplacian(f))) == 0.0
    assert np.array_equal(H[0, 1], H[1, 0])


def test_summation_by_parts_to_roundoff():
    g = build_torus(2, (24, 40), (1.0, 2.0))
    rng = np.random.default_rng(0)
    a = rng.standard_normal(g.shape)
    b = rng.standard_normal(g.shape)
    lhs = g.integrate(g.dot(g.gradient(a), g.gradient(b)))
    rhs = -g.integrate(a * g.laplacian(b))
    assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(lhs))


def test_divergence_is_negative_adjoint_of_gradient():
    g = build_torus(1, 64, 1.0)
    rng = np.random.default_rng(1)
    a = rng.standard_normal(g.shape)
    vf = rng.standard_normal((1,) + g.shape)
    lhs = g.integrate(g.dot(g.gradient(a), vf))
    rhs = -g.integrate(a * g.divergence(vf))
    assert abs(lhs - rhs) <= 1e-13 * max(1.0, abs(lhs))


def test_weighted_laplacian_reductions_and_oracle():
    g0 = build_torus(1, 128, 1.0)
    x = g0.axis_coordinates(0)
    v = np.sin(2 * np.pi * x)
    # f absent and f constant both reduce to the plain Laplacian
    assert np.array_equal(g0.weighted_laplacian(v), g0.laplacian(v))
    gc = build_torus(1, 128, 1.0, weight=lambda xx: np.full_like(xx, 0.7))
    assert np.allclose(gc.weighted_laplacian(v), gc.laplacian(v), atol=1e-14)
    # symbolic oracle: lap_f v = -4 pi^2 sin - 0.8 pi^2 cos^2 for f = 0.2 sin;
    # the error is dominated by the composed second-difference stencil whose
    # Taylor constant on sin(2 pi x) is (16/3) pi^4, and shrinks at order 2
    errs = []
    for n in (128, 256):
        gw = build_torus(1, n, 1.0, weight=lambda xx: 0.2 * np.sin(2 * np.pi * xx), m_param=3.0)
        xn = gw.axis_coordinates(0)
        vn = np.sin(2 * np.pi * xn)
        exact = -4 * np.pi**2 * np.sin(2 * np.pi * xn) - 0.8 * np.pi**2 * np.cos(2 * np.pi * xn) ** 2
        errs.append(np.max(np.abs(gw.weighted_laplacian(vn) - exact)))
        assert errs[-1] <= 1.1 * (16.0 / 3.0) * np.pi**4 * gw.spacing[0] ** 2
    assert 3.7 <= errs[0] / errs[1] <= 4.3


def test_quadrature_exactness():
    g = build_torus(1, 256, 1.0)
    x = g.axis_coordinates(0)
    assert g.integrate(np.sin(2 * np.pi * x) ** 2) == pytest.approx(0.5, abs=1e-14)
    gw = build_torus(1, 128, 1.0, weight=lambda xx: 0.2 * np.sin(2 * np.pi * xx), m_param=3.0)
    # reference: 1e6-node quadrature of exp(-f) (spectrally exact for this integrand)
    xs = np.arange(1_000_000) / 1_000_000
    ref = float(np.mean(np.exp(-0.2 * np.sin(2 * np.pi * xs))))
    assert abs(ref - I0_02) <= 1e-12
    assert abs(gw.integrate(np.ones(gw.shape), weighted=True) - ref) <= 1e-10


def test_bakry_emery_bound_against_dense_scan():
    g = build_torus(1, 256, 1.0, weight=lambda x: 0.2 * np.sin(2 * np.pi * x), m_param=2.0)
    K = g.bakry_emery_lower_bound()
    xs = np.linspace(0.0, 1.0, 1_000_001)
    curv = -0.8 * np.pi**2 * np.sin(2 * np.pi * xs) - (0.4 * np.pi * np.cos(2 * np.pi * xs)) ** 2
    K_dense = max(0.0, -float(np.min(curv)))
    assert K == pytest.approx(K_dense, rel=5e-3)


def test_bakry_emery_trivial_cases():
    assert build_torus(1, 64, 1.0).bakry_emery_lower_bound() == 0.0
    gc = build_torus(1, 64, 1.0, weight=lambda x: np.full_like(x, 1.3))
    assert gc.bakry_emery_lower_bound() == 0.0


def test_bakry_emery_constant_shift_invariance():
    g1 = build_torus(1, 128, 1.0, weight=lambda x: 0.2 * np.sin(2 * np.pi * x), m_param=2.5)
    g2 = build_torus(1, 128, 1.0, weight=lambda x: 0.2 * np.sin(2 * np.pi * x) + 4.2, m_param=2.5)
    assert g1.bakry_emery_lower_bound() == pytest.approx(g2.bakry_emery_lower_bound(), rel=1e-12)


def test_bakry_emery_2d_eigenvalues():
    g = build_torus(2, (48, 48), (1.0, 1.0), weight=lambda x, y: 0.1 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y), m_param=4.0)
    K = g.bakry_emery_lower_bound()
    assert K > 0.0
    # eigenvalue route must dominate the diagonal entries
    T = g.curvature_tensor()
    assert K >= -min(float(np.min(T[0, 0])), float(np.min(T[1, 1]))) - 1e-12


def test_geodesic_distance_basic():
    assert geodesic_distance([0.0], [0.4], [1.0]) == pytest.approx(0.4)
    assert geodesic_distance([0.0], [0.7], [1.0]) == pytest.approx(0.3)
    assert geodesic_distance([0.0, 0.0], [0.5, 0.5], [1.0, 1.0]) == pytest.approx(np.sqrt(2) / 2)


@settings(max_examples=100, deadline=None)
@given(
    x=st.tuples(st.floats(0, 1), st.floats(0, 2)),
    y=st.tuples(st.floats(0, 1), st.floats(0, 2)),
    z=st.tuples(st.floats(0, 1), st.floats(0, 2)),
)
def test_geodesic_distance_metric_properties(x, y, z):
    periods = [1.0, 2.0]
    dxy = geodesic_distance(x, y, periods)
    dyx = geodesic_distance(y, x, periods)
    assert dxy == pytest.approx(dyx, abs=1e-12)
    assert dxy <= geodesic_distance(x, z, periods) + geodesic_distance(z, y, periods) + 1e-12


def test_field_shape_mismatch_rejected():
    g = build_torus(1, 64, 1.0)
    with pytest.raises(ValueError):
        g.laplacian(np.ones(65))
    with pytest.raises(ValueError):
        g.divergence(np.ones((2, 64)))
    with pytest.raises(ValueError):
        g.gradient(np.full(g.shape, np.nan))
