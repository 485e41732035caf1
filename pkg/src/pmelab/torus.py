"""Flat periodic grids (discretized tori) and their discrete calculus.

The spatial domain is an n-dimensional box with periodic boundaries and a
uniform grid, n in {1, 2, 3}.  Differentiation uses second-order centered
differences.  The discrete divergence is the exact negative adjoint of the
discrete gradient under the quadrature inner product, and the Laplacian is
built as divergence of gradient, so summation by parts

    <grad a, grad b> = -integral a * lap(b) dV

holds to round-off, not merely to truncation order.  The price is the wide
(2h) second-difference stencil; its truncation constant is four times the
compact one, which the tolerance models account for.

A grid may carry a log-density weight f (the measure becomes e^{-f} dV).
It then owns the drift Laplacian  lap_f = lap - grad f . grad,  and an
effective dimension parameter m >= n used by curvature bookkeeping: the
relevant curvature tensor on a flat base is

    Hess f - (grad f x grad f) / (m - n),

whose most negative eigenvalue over the grid supplies the lower bound -K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Torus",
    "build_torus",
    "geodesic_distance",
]


def _as_tuple(value, dim: int, kind, name: str) -> tuple:
    if np.isscalar(value):
        return tuple(kind(value) for _ in range(dim))
    out = tuple(kind(v) for v in value)
    if len(out) != dim:
        raise ValueError(f"{name} must have one entry per axis, got {len(out)} for dim={dim}")
    return out


@dataclass(frozen=True)
class Torus:
    """Uniform periodic grid on a flat torus, optionally weighted.

    Instances are immutable after construction; all operators are pure
    functions of their inputs and safe to call concurrently.

    Attributes
    ----------
    points : tuple of int
        Grid nodes per axis.
    periods : tuple of float
        Axis lengths of the fundamental domain.
    weight : ndarray or None
        Log-density f sampled on the nodes (measure e^{-f} dV), or None
        for the unweighted torus.
    m_param : float
        Effective dimension m >= n; equals n when the grid is unweighted.
    """

    points: tuple[int, ...]
    periods: tuple[float, ...]
    weight: np.ndarray | None = None
    m_param: float | None = None
    spacing: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        if len(self.points) != len(self.periods):
            raise ValueError("points and periods must have equal length")
        if not 1 <= len(self.points) <= 3:
            raise ValueError("dimension must be 1, 2 or 3")
        if any(p <= 0 for p in self.periods):
            raise ValueError("all periods must be strictly positive")
        if any(n < 8 for n in self.points):
            raise ValueError("need at least 8 grid points per axis")
        object.__setattr__(self, "spacing", tuple(L / n for L, n in zip(self.periods, self.points)))
        if self.weight is not None:
            w = np.asarray(self.weight, dtype=float)
            if w.shape != self.shape:
                raise ValueError(f"weight shape {w.shape} does not match grid shape {self.shape}")
            if not np.all(np.isfinite(w)):
                raise ValueError("weight values must be finite")
            object.__setattr__(self, "weight", w)
        m = self.m_param
        n = self.dim
        if m is None:
            m = float(n)
        m = float(m)
        nonconstant = self.weight is not None and np.ptp(self.weight) > 0.0
        if m < n:
            raise ValueError(f"m_param must satisfy m >= n, got m={m}, n={n}")
        if nonconstant and m <= n:
            raise ValueError("a non-constant weight requires m_param > dim strictly")
        object.__setattr__(self, "m_param", m)

    # ------------------------------------------------------------------
    # basic descriptors
    # ------------------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def node_count(self) -> int:
        return int(np.prod(self.points))

    @property
    def cell_volume(self) -> float:
        """Quadrature weight of a single node (product of spacings)."""
        return float(np.prod(self.spacing))

    @property
    def is_weighted(self) -> bool:
        return self.weight is not None and np.ptp(self.weight) > 0.0

    def axis_coordinates(self, axis: int) -> np.ndarray:
        return np.arange(self.points[axis]) * self.spacing[axis]

    def coordinate_grids(self) -> list[np.ndarray]:
        """Node coordinates as broadcastable meshgrid arrays (ij indexing)."""
        axes = [self.axis_coordinates(i) for i in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def check_field(self, values: np.ndarray, name: str = "field") -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape != self.shape:
            raise ValueError(f"{name} shape {arr.shape} does not match grid shape {self.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"{name} contains non-finite values")
        return arr

    # ------------------------------------------------------------------
    # discrete calculus
    # ------------------------------------------------------------------

    def diff(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Centered first difference along one axis (periodic)."""
        h = self.spacing[axis]
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)

    def second_diff(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Composition of two centered first differences along one axis."""
        h = self.spacing[axis]
        return (np.roll(values, -2, axis=axis) - 2.0 * values + np.roll(values, 2, axis=axis)) / (4.0 * h * h)

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Discrete gradient, shape ``(dim,) + grid shape``."""
        arr = self.check_field(values)
        return np.stack([self.diff(arr, i) for i in range(self.dim)])

    def divergence(self, vec: np.ndarray) -> np.ndarray:
        """Discrete divergence, the negative adjoint of :meth:`gradient`."""
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.dim,) + self.shape:
            raise ValueError(f"vector field shape {vec.shape} does not match {(self.dim,) + self.shape}")
        out = np.zeros(self.shape)
        for i in range(self.dim):
            out += self.diff(vec[i], i)
        return out

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        """Discrete Laplacian, exactly divergence(gradient(.))."""
        arr = self.check_field(values)
        out = np.zeros(self.shape)
        for i in range(self.dim):
            out += self.second_diff(arr, i)
        return out

    def hessian(self, values: np.ndarray) -> np.ndarray:
        """Discrete Hessian, shape ``(dim, dim) + grid shape``.

        Diagonal entries reuse the composed stencil of :meth:`laplacian`,
        so the trace equals the Laplacian exactly; mixed entries commute,
        so the result is exactly symmetric.
        """
        arr = self.check_field(values)
        n = self.dim
        out = np.empty((n, n) + self.shape)
        grads = [self.diff(arr, i) for i in range(n)]
        for i in range(n):
            out[i, i] = self.second_diff(arr, i)
            for j in range(i + 1, n):
                out[i, j] = self.diff(grads[j], i)
                out[j, i] = out[i, j]
        return out

    def weighted_laplacian(self, values: np.ndarray) -> np.ndarray:
        """Drift Laplacian  lap(v) - <grad f, grad v>  (equals lap if f is absent)."""
        arr = self.check_field(values)
        out = self.laplacian(arr)
        if self.weight is not None:
            gf = self.gradient(self.weight)
            gv = self.gradient(arr)
            out -= np.einsum("i...,i...->...", gf, gv)
        return out

    def dot(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Nodewise inner product of two vector fields."""
        return np.einsum("i...,i...->...", np.asarray(a), np.asarray(b))

    # ------------------------------------------------------------------
    # quadrature and measures
    # ------------------------------------------------------------------

    def integrate(self, values: np.ndarray, weighted: bool = False) -> float:
        """Quadrature over the torus against dV, or e^{-f} dV if ``weighted``."""
        arr = self.check_field(values)
        if weighted and self.weight is not None:
            arr = arr * np.exp(-self.weight)
        return float(np.sum(arr) * self.cell_volume)

    def measure_density(self, weighted: bool = False) -> np.ndarray:
        """Nodewise density of the integration measure relative to counting."""
        if weighted and self.weight is not None:
            return np.exp(-self.weight) * self.cell_volume
        return np.full(self.shape, self.cell_volume)

    # ------------------------------------------------------------------
    # curvature and metric helpers
    # ------------------------------------------------------------------

    def curvature_tensor(self) -> np.ndarray:
        """Effective curvature tensor on the flat base, shape (dim, dim) + grid.

        For an unweighted grid this is identically zero.  With weight f and
        m > n it is  Hess f - (grad f x grad f)/(m - n);  a constant weight
        contributes nothing.
        """
        n = self.dim
        out = np.zeros((n, n) + self.shape)
        if self.weight is None:
            return out
        out += self.hessian(self.weight)
        if not self.is_weighted:
            return out
        if self.m_param <= n:
            raise ValueError("curvature tensor needs m_param > dim for a non-constant weight")
        gf = self.gradient(self.weight)
        out -= np.einsum("i...,j...->ij...", gf, gf) / (self.m_param - n)
        return out

    def bakry_emery_lower_bound(self) -> float:
        """Smallest K >= 0 with effective curvature >= -K over all nodes.

        Computes the nodewise minimum eigenvalue of the effective curvature
        tensor and clamps the negated global minimum at zero (the schedule
        formulas assume K >= 0).  Adding a constant to the weight does not
        change the result.
        """
        if not self.is_weighted:
            return 0.0
        tensor = self.curvature_tensor()
        if self.dim == 1:
            smallest = tensor[0, 0]
        else:
            mats = np.moveaxis(tensor, (0, 1), (-2, -1))
            smallest = np.linalg.eigvalsh(mats)[..., 0]
        return max(0.0, -float(np.min(smallest)))

    def distance(self, x1: Sequence[float], x2: Sequence[float]) -> float:
        """Geodesic distance between two points of the flat torus."""
        return geodesic_distance(x1, x2, self.periods)

    def wrap_point(self, x: Sequence[float]) -> np.ndarray:
        p = np.asarray(x, dtype=float)
        if p.shape != (self.dim,):
            raise ValueError(f"point must have {self.dim} coordinates")
        return np.mod(p, np.asarray(self.periods))


def geodesic_distance(x1: Sequence[float], x2: Sequence[float], periods: Sequence[float]) -> float:
    """Flat-torus distance: per axis the shorter of the two arcs, then l2."""
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    L = np.asarray(periods, dtype=float)
    if a.shape != b.shape or a.shape != L.shape:
        raise ValueError("points and periods must have matching lengths")
    delta = np.abs(np.mod(a - b, L))
    delta = np.minimum(delta, L - delta)
    return float(np.sqrt(np.sum(delta**2)))


def build_torus(
    dim: int,
    points_per_axis,
    periods,
    weight: np.ndarray | Callable | None = None,
    m_param: float | None = None,
) -> Torus:
    """Construct a validated grid.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 to 3.
    points_per_axis : int or sequence of int
        Nodes per axis (at least 8 each).
    periods : float or sequence of float
        Axis lengths, strictly positive.
    weight : ndarray, callable or None
        Log-density f: either node samples (grid shape) or a callable
        evaluated on the coordinate meshgrid arrays.
    m_param : float, optional
        Effective dimension; must exceed ``dim`` when the weight varies.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    points = _as_tuple(points_per_axis, dim, int, "points_per_axis")
    pers = _as_tuple(periods, dim, float, "periods")
    base = Torus(points=points, periods=pers)
    if callable(weight):
        weight = np.asarray(weight(*base.coordinate_grids()), dtype=float)
        weight = np.broadcast_to(weight, base.shape).copy()
    return Torus(points=points, periods=pers, weight=weight, m_param=m_param)
