"""Warped-product layer: symbols, Hessian blocks, Laplacian, norms, curvature."""

import numpy as np
import pytest

import pmelab.warped as wp
from pmelab.reports import observed_order
from pmelab.torus import build_torus


def make_warped(n=128, q=1, amp=0.2):
    g = build_torus(1, n, 1.0, weight=lambda x: amp * np.sin(2 * np.pi * x), m_param=1.0 + q)
    return wp.WarpedGeometry(base=g, fiber_dim=q)


def test_constructor_validation():
    g0 = build_torus(1, 64, 1.0)
    with pytest.raises(ValueError):
        wp.WarpedGeometry(base=g0, fiber_dim=1)  # no weight
    gw = build_torus(1, 64, 1.0, weight=lambda x: 0.1 * np.sin(2 * np.pi * x), m_param=2.0)
    with pytest.raises(ValueError):
        wp.WarpedGeometry(base=gw, fiber_dim=0)


def test_constant_weight_symbols_vanish():
    g = build_torus(1, 64, 1.0, weight=lambda x: np.full_like(x, 0.3))
    w = wp.WarpedGeometry(base=g, fiber_dim=2)
    for mode in (wp.CLOSED_FORM, wp.FINITE_DIFFERENCE):
        table = wp.christoffel(w, mode)
        assert np.max(np.abs(table.mixed)) == 0.0
        assert np.max(np.abs(table.fiber)) == 0.0


def test_symbol_modes_agree_second_order():
    gaps = []
    for n in (64, 128):
        w = make_warped(n=n)
        cf = wp.christoffel(w, wp.CLOSED_FORM)
        fd = wp.christoffel(w, wp.FINITE_DIFFERENCE)
        gaps.append(max(float(np.max(np.abs(cf.mixed - fd.mixed))), float(np.max(np.abs(cf.fiber - fd.fiber)))))
    assert observed_order(gaps[0], gaps[1]) >= 1.8


def test_hessian_components_closed_and_fd():
    w = make_warped()
    x = w.base.coordinate_grids()[0]
    v = np.sin(2 * np.pi * x)
    rep_cf = wp.hessian_components_report(w, v, wp.CLOSED_FORM)
    assert rep_cf.passed
    assert rep_cf.worst <= 1e-12 * rep_cf.details["scale"]
    rep_fd = wp.hessian_components_report(w, v, wp.FINITE_DIFFERENCE)
    assert rep_fd.passed


def test_hessian_fiber_block_value():
    # q = 1, v = sin, f = 0.2 sin: block magnitude equals (w^2/q)|f' v'| nodewise
    w = make_warped(n=256)
    g = w.base
    x = g.coordinate_grids()[0]
    v = np.sin(2 * np.pi * x)
    table = wp.christoffel(w, wp.CLOSED_FORM)
    block = -np.einsum("i...,i...->...", table.fiber, g.gradient(v))
    exact = -(np.exp(-2 * g.weight) / 1.0) * (0.4 * np.pi * np.cos(2 * np.pi * x)) * (2 * np.pi * np.cos(2 * np.pi * x))
    assert np.max(np.abs(block - exact)) <= 1e-2  # grid-derivative truncation only
    assert np.max(np.abs(block - exact)) <= 60.0 * g.spacing[0]


def test_warped_laplacian_identity():
    w = make_warped()
    x = w.base.coordinate_grids()[0]
    for v in (np.sin(2 * np.pi * x), np.full(w.base.shape, 2.2)):
        rep = wp.warped_laplacian_report(w, v, wp.CLOSED_FORM)
        assert rep.passed
        assert rep.worst <= 1e-12 * rep.details["scale"]


def test_warped_laplacian_zero_weight_reduces_to_plain():
    g = build_torus(1, 64, 1.0, weight=lambda x: np.zeros_like(x))
    w = wp.WarpedGeometry(base=g, fiber_dim=1)
    x = g.coordinate_grids()[0]
    v = np.sin(2 * np.pi * x)
    table = wp.christoffel(w, wp.CLOSED_FORM)
    assert np.max(np.abs(table.fiber)) == 0.0
    rep = wp.warped_laplacian_report(w, v)
    assert rep.passed and rep.worst == 0.0


def test_norm_decomposition_constant_field_counts_dimensions():
    # grad v = 0: both sides equal m * (shift)^2 with shift = eta/(m(gamma-1))
    w = make_warped()
    g = w.base
    v = np.full(g.shape, 3.0)
    eta_bar, gamma, m = 0.8, 2.0, 2.0
    rep = wp.hessian_norm_decomposition_report(w, v, eta_bar, gamma, m)
    assert rep.passed
    c = eta_bar / (m * (gamma - 1.0))
    hess = g.hessian(v)
    lhs_const = float(np.max(np.abs(hess)))  # zero
    assert lhs_const == 0.0
    # spot-check the actual value at one node
    w2 = w.warp**2
    tau = c * w2
    lhs = (0.0 + c) ** 2 * g.dim + 1 * (tau / w2) ** 2
    assert np.allclose(lhs, m * c * c)


def test_norm_decomposition_randomized():
    rng = np.random.default_rng(3)
    for _ in range(20):
        q = int(rng.integers(1, 4))
        n = 64
        amp = rng.uniform(0.05, 0.4)
        g = build_torus(1, n, 1.0, weight=lambda x: amp * np.sin(2 * np.pi * x) + 0.1 * np.cos(4 * np.pi * x), m_param=1.0 + q)
        w = wp.WarpedGeometry(base=g, fiber_dim=q)
        x = g.coordinate_grids()[0]
        v = 1.0 + rng.uniform(-0.5, 0.5) * np.sin(2 * np.pi * x) + rng.uniform(-0.3, 0.3) * np.cos(4 * np.pi * x)
        eta_bar = float(rng.uniform(0.1, 2.0))
        gamma = float(rng.uniform(1.2, 3.0))
        rep = wp.hessian_norm_decomposition_report(w, v, eta_bar, gamma, 1.0 + q)
        assert rep.passed
        assert rep.worst <= 1e-12 * rep.details["scale"]


def test_norm_decomposition_rejects_mismatched_m():
    w = make_warped(q=2)
    v = np.ones(w.base.shape)
    with pytest.raises(ValueError):
        wp.hessian_norm_decomposition_report(w, v, 0.5, 2.0, m=2.0)


def test_ricci_lift_convergence_ladder():
    residuals = []
    for n in (64, 128, 256):
        rep = wp.ricci_lift_report(make_warped(n=n))
        assert rep.passed
        residuals.append(rep.worst)
    assert observed_order(residuals[0], residuals[1]) >= 1.8
    assert observed_order(residuals[1], residuals[2]) >= 1.8


def test_ricci_lift_flat_weight_is_zero():
    g = build_torus(1, 64, 1.0, weight=lambda x: np.zeros_like(x))
    w = wp.WarpedGeometry(base=g, fiber_dim=1)
    assert np.max(np.abs(wp.ricci_horizontal(w))) == 0.0
    assert np.max(np.abs(wp.effective_curvature_closed(w))) == 0.0


def test_ricci_lift_gauge_invariance():
    w1 = make_warped(n=96)
    g2 = build_torus(1, 96, 1.0, weight=lambda x: 0.2 * np.sin(2 * np.pi * x) + 1.7, m_param=2.0)
    w2 = wp.WarpedGeometry(base=g2, fiber_dim=1)
    r1 = wp.ricci_horizontal(w1)
    r2 = wp.ricci_horizontal(w2)
    assert np.max(np.abs(r1 - r2)) <= 1e-12 * max(1.0, float(np.max(np.abs(r1))))


def test_ricci_analytic_value_1d():
    # q = 1, n = 1: curvature = f'' - (f')^2 for f = 0.2 sin(2 pi x)
    w = make_warped(n=256)
    x = w.base.coordinate_grids()[0]
    exact = -0.8 * np.pi**2 * np.sin(2 * np.pi * x) - (0.4 * np.pi * np.cos(2 * np.pi * x)) ** 2
    fd = wp.ricci_horizontal(w)[0, 0]
    assert np.max(np.abs(fd - exact)) <= 100.0 * w.base.spacing[0] ** 2 * np.max(np.abs(exact))


def test_warped_volume_identity():
    for q in (1, 2, 3):
        w = make_warped(q=q)
        rep = wp.warped_volume_report(w)
        assert rep.passed


def test_2d_base_checks():
    g = build_torus(
        2, (32, 32), (1.0, 1.0),
        weight=lambda x, y: 0.1 * np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
        m_param=4.0,
    )
    w = wp.WarpedGeometry(base=g, fiber_dim=2)
    X, _ = g.coordinate_grids()
    v = 1.0 + 0.5 * np.sin(2 * np.pi * X)
    assert wp.hessian_components_report(w, v).passed
    assert wp.warped_laplacian_report(w, v).passed
    assert wp.hessian_norm_decomposition_report(w, v, 0.4, 1.6, 4.0).passed
    assert wp.ricci_lift_report(w).passed
