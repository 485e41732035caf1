"""Entropy functionals for the porous medium flow and their dissipation.

Everything here is parameterized by a coefficient schedule (sigma, beta,
eta) built from the exponent a = d(gamma-1)/(d(gamma-1)+2), where d is the
grid dimension (or the effective dimension m on a weighted grid), and a
curvature rate kappa = K * sup u^(gamma-1).  For kappa > 0:

    sigma(t) = ((e^{2 kappa t} - 1) / (2 kappa))^a
    beta(t)  = sinh(2 kappa t) / (2 kappa)
    eta(t)   = 2 a kappa / (1 - e^{-2 kappa t})        ( = (log sigma)' )

with the kappa -> 0 limits t^a, t and a/t.  The evaluation uses expm1 and
sinh directly, which are accurate uniformly down to kappa*t ~ 0, so no
separate series branch is needed.

The monotone functional is

    W(t) = sigma*beta * integral [ gamma |grad v|^2 / v - (1/beta + eta) ] v u dmeas,

whose decrease rate is bounded by the dissipation D: a sum of a Hessian
deviation square, a curvature-gap quadratic form, a trace square and (on
weighted grids) a drift-alignment square, each nonnegative by design of K.
For kappa = 0 on an unweighted grid the bound is an equality, which is the
calibration case for the tolerance model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reports import refinement_tolerance
from .solver import SolverState, Trajectory, time_derivative
from .torus import Torus

__all__ = [
    "dimension_weight",
    "EntropySchedule",
    "schedule",
    "schedule_eval",
    "schedule_system_residuals",
    "beta_identity_residual",
    "sigma_form_gap",
    "kappa_from_initial",
    "nash_entropy",
    "nash_entropy_rate",
    "w_entropy",
    "DissipationBreakdown",
    "dissipation",
    "EntropyReport",
    "monotonicity_report",
]


def dimension_weight(gamma: float, dim_param: float) -> float:
    """Exponent a = d(gamma-1)/(d(gamma-1)+2) of the time weight."""
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    if dim_param < 1.0:
        raise ValueError("dimension parameter must be at least 1")
    q = dim_param * (gamma - 1.0)
    return q / (q + 2.0)


@dataclass(frozen=True)
class EntropySchedule:
    """Coefficient schedule (a, kappa) for the entropy functionals."""

    gamma: float
    dim_param: float
    kappa: float
    a: float


def schedule(gamma: float, dim_param: float, kappa: float) -> EntropySchedule:
    if kappa < 0.0:
        raise ValueError("kappa must be nonnegative")
    return EntropySchedule(gamma=float(gamma), dim_param=float(dim_param), kappa=float(kappa), a=dimension_weight(gamma, dim_param))


def schedule_eval(sched: EntropySchedule, t: float) -> tuple[float, float, float]:
    """Evaluate (sigma, beta, eta) at time t > 0."""
    if t <= 0.0:
        raise ValueError("schedule requires t > 0")
    a, k = sched.a, sched.kappa
    if k == 0.0:
        return t**a, t, a / t
    sigma = (np.expm1(2.0 * k * t) / (2.0 * k)) ** a
    beta = np.sinh(2.0 * k * t) / (2.0 * k)
    eta = 2.0 * a * k / (-np.expm1(-2.0 * k * t))
    return float(sigma), float(beta), float(eta)


def _eta_derivative(sched: EntropySchedule, t: float) -> float:
    a, k = sched.a, sched.kappa
    if k == 0.0:
        return -a / t**2
    em = np.exp(-2.0 * k * t)
    return float(-4.0 * a * k * k * em / (-np.expm1(-2.0 * k * t)) ** 2)


def kappa_from_initial(u0: np.ndarray, gamma: float, curvature_bound: float) -> float:
    """Curvature rate K * max(u0)^(gamma-1), frozen at the initial data.

    The sup of the pressure is nonincreasing in time (maximum principle),
    so the initial sup dominates the space-time sup the rate refers to;
    trajectory checks re-verify this.
    """
    if curvature_bound < 0.0:
        raise ValueError("curvature bound must be nonnegative")
    return curvature_bound * float(np.max(u0)) ** (gamma - 1.0)


def schedule_system_residuals(sched: EntropySchedule, t: float) -> dict[str, float]:
    """Normalized residuals of the coupled coefficient system.

    With lam = (log sigma)' = eta, the schedule satisfies

        eta / a          = (1 + beta')/(2 beta) + kappa
        eta^2 (1+a) / a  = lam' + lam^2 + ((1 + beta')/beta) lam
        0                = lam^2 + a (lam' - 2 kappa lam)

    (the third is the discriminant form of the defining quadratic).  Each
    residual is scaled by the magnitude of its terms, floored at one.
    """
    a, k = sched.a, sched.kappa
    _, beta, eta = schedule_eval(sched, t)
    lam = eta
    lam_p = _eta_derivative(sched, t)
    beta_dot = float(np.cosh(2.0 * k * t)) if k > 0.0 else 1.0
    drive = (1.0 + beta_dot) / (2.0 * beta)

    r1 = eta / a - drive - k
    s1 = max(1.0, abs(eta / a), abs(drive), k)

    r2 = eta * eta * (1.0 + a) / a - (lam_p + lam * lam + 2.0 * drive * lam)
    s2 = max(1.0, abs(eta * eta * (1.0 + a) / a), abs(lam_p), lam * lam, abs(2.0 * drive * lam))

    r3 = (lam * lam + a * (lam_p - 2.0 * k * lam)) / (1.0 + a)
    s3 = max(1.0, lam * lam, abs(a * lam_p), abs(2.0 * a * k * lam))

    return {"first": abs(r1) / s1, "second": abs(r2) / s2, "quadratic": abs(r3) / s3}


def beta_identity_residual(sched: EntropySchedule, t: float) -> float:
    """Relative residual of (1 + beta')/beta = 2 kappa coth(kappa t)."""
    k = sched.kappa
    _, beta, _ = schedule_eval(sched, t)
    if k == 0.0:
        lhs, rhs = 2.0 / t, 2.0 / t
    else:
        lhs = (1.0 + float(np.cosh(2.0 * k * t))) / beta
        rhs = 2.0 * k / float(np.tanh(k * t))
    return abs(lhs - rhs) / max(1.0, abs(rhs))


def sigma_form_gap(sched: EntropySchedule, t: float) -> float:
    """Relative gap between the two closed forms of sigma."""
    k = sched.kappa
    sigma, _, _ = schedule_eval(sched, t)
    if k == 0.0:
        return 0.0
    other = (np.exp(k * t) * np.sinh(k * t) / k) ** sched.a
    return abs(sigma - other) / abs(sigma)


# ----------------------------------------------------------------------
# functionals over solver states
# ----------------------------------------------------------------------


def _measure_flags(grid: Torus) -> bool:
    return grid.is_weighted


def nash_entropy(state: SolverState, sched: EntropySchedule, t: float | None = None) -> float:
    """-sigma(t) * integral v u dmeas (strictly negative for positive data)."""
    t = state.t if t is None else t
    sigma, _, _ = schedule_eval(sched, t)
    return -sigma * state.grid.integrate(state.v * state.u, weighted=_measure_flags(state.grid))


def nash_entropy_rate(state: SolverState, sched: EntropySchedule, t: float | None = None) -> float:
    """Analytic time derivative -sigma * integral ((gamma-1) lap v + eta) v u dmeas."""
    t = state.t if t is None else t
    g = state.grid
    weighted = _measure_flags(g)
    sigma, _, eta = schedule_eval(sched, t)
    lap_v = g.weighted_laplacian(state.v) if weighted else g.laplacian(state.v)
    integrand = ((state.gamma - 1.0) * lap_v + eta) * state.v * state.u
    return -sigma * g.integrate(integrand, weighted=weighted)


def w_entropy(state: SolverState, sched: EntropySchedule, t: float | None = None) -> float:
    """sigma*beta * integral [gamma |grad v|^2/v - (1/beta + eta)] v u dmeas."""
    t = state.t if t is None else t
    g = state.grid
    weighted = _measure_flags(g)
    sigma, beta, eta = schedule_eval(sched, t)
    grad_v = g.gradient(state.v)
    bracket = state.gamma * g.dot(grad_v, grad_v) / state.v - (1.0 / beta + eta)
    return sigma * beta * g.integrate(bracket * state.v * state.u, weighted=weighted)


@dataclass(frozen=True)
class DissipationBreakdown:
    """Addends of the dissipation bound, each carrying the 2*sigma*beta factor."""

    hessian_term: float
    ricci_term: float
    trace_term: float
    weighted_extra_term: float

    @property
    def total(self) -> float:
        return self.hessian_term + self.ricci_term + self.trace_term + self.weighted_extra_term


def dissipation(
    state: SolverState, sched: EntropySchedule, curvature_bound: float = 0.0, t: float | None = None
) -> DissipationBreakdown:
    """Dissipation D with -dW/dt <= ... <= -D turned into D >= 0 terms.

    D = 2 sigma beta * integral of
          (gamma-1) |hess v + eta/(d(gamma-1)) g|^2
        + (gamma-1) (curvature + K g)(grad v, grad v)
        + ((gamma-1) lap_f v + eta)^2
        + (gamma-1)/(m-n) (<grad v, grad f> - (m-n) eta/(m(gamma-1)))^2   [weighted only]
      against v u dmeas, with d = sched.dim_param.

    Every addend is a square or a quadratic form made nonnegative by the
    choice of K, so each reported term is >= 0 up to round-off.
    """
    t = state.t if t is None else t
    g = state.grid
    gamma = state.gamma
    weighted = _measure_flags(g)
    sigma, beta, eta = schedule_eval(sched, t)
    d = sched.dim_param
    shift = eta / (d * (gamma - 1.0))
    density = state.v * state.u

    hess = g.hessian(state.v)
    n = g.dim
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    dev = hess + shift * eye
    hess_integrand = (gamma - 1.0) * np.einsum("ij...,ij...->...", dev, dev)

    grad_v = g.gradient(state.v)
    if weighted:
        curv = g.curvature_tensor()
        quad = np.einsum("i...,ij...,j...->...", grad_v, curv, grad_v)
        quad += curvature_bound * g.dot(grad_v, grad_v)
    else:
        quad = curvature_bound * g.dot(grad_v, grad_v)
    ricci_integrand = (gamma - 1.0) * quad

    lap_v = g.weighted_laplacian(state.v) if weighted else g.laplacian(state.v)
    trace_integrand = ((gamma - 1.0) * lap_v + eta) ** 2

    factor = 2.0 * sigma * beta
    kwargs = {"weighted": weighted}
    hess_term = factor * g.integrate(hess_integrand * density, **kwargs)
    ricci_term = factor * g.integrate(ricci_integrand * density, **kwargs)
    trace_term = factor * g.integrate(trace_integrand * density, **kwargs)

    extra_term = 0.0
    if weighted:
        m, nn = g.m_param, g.dim
        if m <= nn:
            raise ValueError("weighted dissipation needs m_param > dim")
        grad_f = g.gradient(g.weight)
        align = g.dot(grad_v, grad_f) - (m - nn) * eta / (m * (gamma - 1.0))
        extra_term = factor * (gamma - 1.0) / (m - nn) * g.integrate(align**2 * density, **kwargs)

    return DissipationBreakdown(
        hessian_term=hess_term,
        ricci_term=ricci_term,
        trace_term=trace_term,
        weighted_extra_term=extra_term,
    )


# ----------------------------------------------------------------------
# monotonicity along trajectories
# ----------------------------------------------------------------------


@dataclass
class EntropyReport:
    """Per-sample entropy values and the monotonicity verdicts."""

    rows: list[dict]
    passed: bool
    tolerance: float
    equality_case: bool
    details: dict

    @property
    def worst_monotonicity(self) -> float:
        return max(r["dWdt"] for r in self.rows) if self.rows else float("-inf")

    @property
    def worst_equality(self) -> float:
        return max(abs(r["dWdt"] + r["D_total"]) for r in self.rows) if self.rows else 0.0

    @property
    def worst_inequality(self) -> float:
        return max(r["dWdt"] + r["D_total"] for r in self.rows) if self.rows else float("-inf")


def monotonicity_report(
    traj: Trajectory,
    sched: EntropySchedule,
    curvature_bound: float = 0.0,
    report_times=None,
    tolerance_scale: float = 10.0,
) -> EntropyReport:
    """Difference W along the trajectory and compare against -D.

    dW/dt at each report time is the three-point difference of W over the
    neighboring trajectory samples, so drivers that want the differencing
    error negligible should bracket each report time with closely spaced
    auxiliary samples.  Checks, with tol = C (h^2 + dt_eff^2) scale and
    scale = max|W| + max D over the report rows:

    * dW/dt <= tol at every report time (monotone decrease),
    * dW/dt <= -D + tol (the dissipation bound),
    * |dW/dt + D| <= tol when kappa = 0 on an unweighted grid (equality).

    Also re-checks that sup u^(gamma-1) never exceeds its initial value
    (relative slack 1e-10), which is what froze kappa at the initial data.
    """
    if len(traj.states) < 3:
        raise ValueError("need at least 3 samples")
    g = traj.grid
    gamma = traj.gamma
    times = traj.times
    if report_times is None:
        report_indices = list(range(1, len(traj.states) - 1))
    else:
        report_indices = [traj.index_at(t) for t in report_times]
        if any(k == 0 or k == len(traj.states) - 1 for k in report_indices):
            raise ValueError("report times must be interior samples of the trajectory")

    w_vals = np.array([w_entropy(s, sched) for s in traj.states])
    rows = []
    dt_eff = 0.0
    for k in report_indices:
        s = traj.states[k]
        breakdown = dissipation(s, sched, curvature_bound)
        dwdt = float(time_derivative(w_vals, times, k))
        rows.append(
            {
                "t": s.t,
                "N": nash_entropy(s, sched),
                "W": float(w_vals[k]),
                "dWdt": dwdt,
                "D_total": breakdown.total,
                "D_hessian": breakdown.hessian_term,
                "D_ricci": breakdown.ricci_term,
                "D_trace": breakdown.trace_term,
                "D_weighted_extra": breakdown.weighted_extra_term,
            }
        )
        dt_eff = max(dt_eff, 0.5 * (times[k + 1] - times[k - 1]))

    scale = max(abs(r["W"]) for r in rows) + max(r["D_total"] for r in rows)
    tol = refinement_tolerance(max(g.spacing), dt_eff, scale, tolerance_scale)
    equality_case = sched.kappa == 0.0 and not g.is_weighted

    sup0 = float(np.max(traj.initial.u)) ** (gamma - 1.0)
    sup_now = max(float(np.max(s.u)) ** (gamma - 1.0) for s in traj.states)
    sup_ok = sup_now <= sup0 * (1.0 + 1e-10)

    ok = sup_ok
    for r in rows:
        row_ok = r["dWdt"] <= tol and r["dWdt"] <= -r["D_total"] + tol
        if equality_case:
            row_ok = row_ok and abs(r["dWdt"] + r["D_total"]) <= tol
        r["pass"] = row_ok
        ok = ok and row_ok

    return EntropyReport(
        rows=rows,
        passed=ok,
        tolerance=tol,
        equality_case=equality_case,
        details={
            "scale": scale,
            "dt_eff": dt_eff,
            "sup_pressure_check": sup_ok,
            "kappa": sched.kappa,
            "curvature_bound": curvature_bound,
        },
    )
