"""Warped-product verification layer over a weighted flat base.

A weighted base grid (torus with log-density f and effective dimension m)
lifts to a product of the base with a flat fiber of dimension q = m - n and
unit volume, carrying the metric  g_base + w^2 g_fiber  with warp factor
w = e^{-f/q}.  Nothing depends on the fiber coordinates, so every checked
quantity lives on the base grid with the fiber entering only through index
multiplicities; the fiber is never discretized.

Conventions for a base function v and base/fiber indices i,j / A,B:

* nonzero Christoffel symbols:  Gamma^A_{iB} = (d_i w / w) delta^A_B  and
  Gamma^k_{AB} = -w d_k w delta_AB  (flat base, Cartesian coordinates);
* fiber-fiber Hessian:  -(1/q) g~_{AB} <grad v, grad f>,  mixed block zero,
  base block the base Hessian (g~ the warped metric);
* warped Laplacian of a base function equals the drift Laplacian
  lap v - <grad f, grad v>;
* squared Hessian norms decompose into the base part plus a drift
  alignment square with weight 1/(m-n);
* the horizontal block of the product Ricci tensor equals
  Hess f - (grad f x grad f)/q  on the (flat) base.

Symbols come in two modes: ``closed_form`` (expressions in the discrete
derivatives of f, making the identity checks exact to round-off) and
``finite_difference`` (centered differences of the metric components,
agreeing with closed forms to second order).  Curvature in FD mode is
assembled from derivatives and products of the symbols.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reports import CheckReport
from .torus import Torus

__all__ = [
    "WarpedGeometry",
    "ChristoffelTable",
    "christoffel",
    "hessian_components_report",
    "warped_laplacian_report",
    "hessian_norm_decomposition_report",
    "ricci_lift_report",
    "warped_volume_report",
]

CLOSED_FORM = "closed_form"
FINITE_DIFFERENCE = "finite_difference"


@dataclass(frozen=True)
class WarpedGeometry:
    """Product of a weighted base torus with a unit-volume flat fiber."""

    base: Torus
    fiber_dim: int

    def __post_init__(self):
        if self.base.weight is None:
            raise ValueError("warped geometry needs a base with a weight")
        if self.fiber_dim < 1 or self.fiber_dim != int(self.fiber_dim):
            raise ValueError("fiber dimension must be a positive integer")

    @property
    def warp(self) -> np.ndarray:
        """Warp factor e^{-f/q} on base nodes (strictly positive)."""
        return np.exp(-self.base.weight / self.fiber_dim)

    @property
    def total_dim(self) -> int:
        return self.base.dim + self.fiber_dim


@dataclass(frozen=True)
class ChristoffelTable:
    """Nonzero symbols on base nodes, with fiber indices factored out.

    ``mixed[i]`` is the scalar c_i with Gamma^A_{iB} = c_i delta^A_B, and
    ``fiber[k]`` the scalar d_k with Gamma^k_{AB} = d_k delta_AB.  All
    base-base and fiber-fiber-fiber symbols vanish (flat base and fiber,
    warp independent of fiber coordinates).
    """

    mixed: np.ndarray
    fiber: np.ndarray
    mode: str


def christoffel(warped: WarpedGeometry, mode: str = CLOSED_FORM) -> ChristoffelTable:
    """Christoffel symbols of the warped metric.

    Closed form differentiates the log-density:  c_i = -f_i / q  and
    d_k = w^2 f_k / q  with f_i the centered gradient of f.  FD mode
    differentiates the metric components w^2 instead:
    c_i = (1/2) D_i(w^2)/w^2  and  d_k = -(1/2) D_k(w^2).
    """
    g = warped.base
    q = warped.fiber_dim
    w = warped.warp
    if mode == CLOSED_FORM:
        grad_f = g.gradient(g.weight)
        mixed = -grad_f / q
        fiber = w**2 * grad_f / q
    elif mode == FINITE_DIFFERENCE:
        w2 = w * w
        dw2 = g.gradient(w2)
        mixed = 0.5 * dw2 / w2
        fiber = -0.5 * dw2
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ChristoffelTable(mixed=mixed, fiber=fiber, mode=mode)


def _scale(*arrays) -> float:
    return max([float(np.max(np.abs(a))) for a in arrays] + [1.0])


def hessian_components_report(warped: WarpedGeometry, v: np.ndarray, mode: str = CLOSED_FORM) -> CheckReport:
    """Verify the Hessian blocks of a base function on the product.

    The fiber-fiber block computed from the symbols, -sum_k d_k (grad v)_k
    per unit delta_AB, is compared with -(1/q) w^2 <grad v, grad f>; the
    mixed block vanishes identically and the base block is the base
    Hessian by construction (both reported).
    """
    g = warped.base
    q = warped.fiber_dim
    v = g.check_field(v)
    table = christoffel(warped, mode)
    grad_v = g.gradient(v)
    fiber_block = -np.einsum("i...,i...->...", table.fiber, grad_v)
    target = -(warped.warp**2 / q) * g.dot(grad_v, g.gradient(g.weight))
    resid = float(np.max(np.abs(fiber_block - target)))
    scale = _scale(fiber_block, target)
    tol = 1e-12 * scale if mode == CLOSED_FORM else 10.0 * max(g.spacing) ** 2 * scale
    # Mixed block: -Gamma^A_{iB} d_B v with v fiber-independent, exactly zero.
    mixed_resid = 0.0
    return CheckReport(
        name=f"hessian_components[{mode}]",
        passed=resid <= tol and mixed_resid == 0.0,
        worst=resid,
        tolerance=tol,
        details={"mixed_block_max": mixed_resid, "base_block": "equals base Hessian identically", "scale": scale},
    )


def warped_laplacian_report(warped: WarpedGeometry, v: np.ndarray, mode: str = CLOSED_FORM) -> CheckReport:
    """Trace of the full warped Hessian versus the drift Laplacian.

    The fiber block contributes q * (1/w^2) * (fiber Hessian scalar), which
    in closed form collapses to -<grad f, grad v> exactly.
    """
    g = warped.base
    q = warped.fiber_dim
    v = g.check_field(v)
    table = christoffel(warped, mode)
    grad_v = g.gradient(v)
    fiber_scalar = -np.einsum("i...,i...->...", table.fiber, grad_v)
    lifted = g.laplacian(v) + q * fiber_scalar / warped.warp**2
    target = g.weighted_laplacian(v)
    resid = float(np.max(np.abs(lifted - target)))
    scale = _scale(lifted, target)
    tol = 1e-12 * scale if mode == CLOSED_FORM else 10.0 * max(g.spacing) ** 2 * scale
    return CheckReport(
        name=f"warped_laplacian[{mode}]",
        passed=resid <= tol,
        worst=resid,
        tolerance=tol,
        details={"scale": scale},
    )


def hessian_norm_decomposition_report(
    warped: WarpedGeometry, v: np.ndarray, eta_bar: float, gamma: float, m: float
) -> CheckReport:
    """Squared norm of the shifted warped Hessian, assembled two ways.

    With shift c = eta_bar/(m (gamma-1)) and s = <grad v, grad f>:

        |Hess~ v + c g~|^2 = |Hess v + c g|^2 + (1/(m-n)) (s - (m-n) c)^2

    The left side uses the warped components (fiber block with indices
    raised by the warped metric), the right side only base quantities.
    """
    g = warped.base
    q = warped.fiber_dim
    n = g.dim
    if abs(m - n - q) > 1e-12:
        raise ValueError("m must equal base dim + fiber dim")
    v = g.check_field(v)
    c = eta_bar / (m * (gamma - 1.0))
    w2 = warped.warp**2
    grad_v = g.gradient(v)
    s_align = g.dot(grad_v, g.gradient(g.weight))

    hess = g.hessian(v)
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    dev = hess + c * eye
    base_sq = np.einsum("ij...,ij...->...", dev, dev)

    # Left side: lower-index fiber component tau*delta_AB with indices
    # raised by (1/w^2) each, giving q * (tau / w^2)^2.
    tau = -(w2 / q) * s_align + c * w2
    lhs = base_sq + q * (tau / w2) ** 2
    rhs = base_sq + (s_align - (m - n) * c) ** 2 / (m - n)
    resid = float(np.max(np.abs(lhs - rhs)))
    scale = _scale(lhs, rhs)
    tol = 1e-12 * scale
    return CheckReport(
        name="hessian_norm_decomposition",
        passed=resid <= tol,
        worst=resid,
        tolerance=tol,
        details={"scale": scale, "shift": c},
    )


def ricci_horizontal(warped: WarpedGeometry, mode: str = FINITE_DIFFERENCE) -> np.ndarray:
    """Horizontal-horizontal Ricci block of the warped metric.

    Contracting the curvature tensor built from the symbols, the only
    surviving terms for base indices i, j are

        Ric_ij = -q * (D_i c_j + c_i c_j)

    with c_j the mixed symbol scalar (all base-base symbols vanish and the
    symbols are fiber-coordinate independent).
    """
    g = warped.base
    q = warped.fiber_dim
    table = christoffel(warped, mode)
    n = g.dim
    out = np.empty((n, n) + g.shape)
    for i in range(n):
        for j in range(n):
            out[i, j] = -q * (g.diff(table.mixed[j], i) + table.mixed[i] * table.mixed[j])
    return out


def effective_curvature_closed(warped: WarpedGeometry) -> np.ndarray:
    """Hess f - (grad f x grad f)/q on the flat base (closed form)."""
    g = warped.base
    grad_f = g.gradient(g.weight)
    return g.hessian(g.weight) - np.einsum("i...,j...->ij...", grad_f, grad_f) / warped.fiber_dim


def ricci_lift_report(warped: WarpedGeometry, tolerance_scale: float = 10.0) -> CheckReport:
    """FD-mode horizontal Ricci versus the closed-form curvature tensor."""
    g = warped.base
    lifted = ricci_horizontal(warped, FINITE_DIFFERENCE)
    closed = effective_curvature_closed(warped)
    resid = float(np.max(np.abs(lifted - closed)))
    scale = _scale(lifted, closed)
    tol = tolerance_scale * max(g.spacing) ** 2 * scale
    return CheckReport(
        name="ricci_lift",
        passed=resid <= tol,
        worst=resid,
        tolerance=tol,
        details={"scale": scale},
    )


def warped_volume_report(warped: WarpedGeometry) -> CheckReport:
    """Total warped volume (unit fiber) versus the weighted base volume.

    The product volume element is w^q dV_base x dV_fiber = e^{-f} dV_base,
    so with unit fiber volume both quadratures must agree to round-off.
    """
    g = warped.base
    lhs = g.integrate(warped.warp**warped.fiber_dim)
    rhs = g.integrate(np.ones(g.shape), weighted=True)
    resid = abs(lhs - rhs)
    tol = 1e-12 * max(1.0, abs(rhs))
    return CheckReport(
        name="warped_volume",
        passed=resid <= tol,
        worst=resid,
        tolerance=tol,
        details={"volume": rhs},
    )
