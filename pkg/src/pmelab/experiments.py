"""Config-driven experiment drivers producing deterministic report files.

Every driver maps a validated :class:`~pmelab.config.ExperimentConfig` to a
:class:`ReportBundle`: an overall pass flag, a JSON-able summary, and a
dict of file payloads (CSV with RFC-4180 quoting, '.' decimal separator and
17 significant digits; JSON with sorted keys).  Identical config and seed
give byte-identical payloads, which the CI determinism check relies on.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import __version__
from . import entropy as ent
from . import harnack as ha
from . import warped as wp
from .config import ExperimentConfig, FamilySpec, sample_nodes
from .reports import CheckReport, observed_order, to_builtin
from .solver import (
    Trajectory,
    evolution_identity_report,
    integral_identity_report,
    pressure_equation_residual,
    run,
)
from .torus import Torus, build_torus

__all__ = [
    "ReportBundle",
    "build_grid",
    "initial_density",
    "simulate_bundle",
    "entropy_bundle",
    "harnack_bundle",
    "warped_bundle",
    "schedule_table_text",
    "all_checks_bundle",
]


@dataclass
class ReportBundle:
    passed: bool
    summary: dict
    files: dict[str, str] = dc_field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.summary = to_builtin(self.summary)

    def merge(self, other: "ReportBundle") -> None:
        self.passed = bool(self.passed and other.passed)
        self.files.update(other.files)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def _json_text(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, CheckReport):
        return obj.as_dict()
    raise TypeError(f"not JSON serializable: {type(obj)}")


# ----------------------------------------------------------------------
# config -> objects
# ----------------------------------------------------------------------


def build_grid(config: ExperimentConfig) -> Torus:
    geo = config.geometry
    weight = None
    if geo.weight is not None:
        probe = build_torus(geo.dim, geo.points, geo.periods)
        weight = sample_nodes(geo.weight, probe)
        if np.ptp(weight) == 0.0:
            weight = None
    return build_torus(geo.dim, geo.points, geo.periods, weight=weight, m_param=geo.m_param)


def initial_density(config: ExperimentConfig, grid: Torus) -> np.ndarray:
    u0 = sample_nodes(config.solver.initial, grid)
    if np.any(u0 <= 0.0):
        raise ValueError("initial density must be strictly positive")
    return u0


def _derived(config: ExperimentConfig, grid: Torus, u0: np.ndarray) -> dict:
    K = config.entropy.curvature_bound
    if K is None:
        K = grid.bakry_emery_lower_bound()
    gamma = config.solver.gamma
    dim_param = grid.m_param if grid.is_weighted else float(grid.dim)
    kappa = ent.kappa_from_initial(u0, gamma, K)
    return {
        "curvature_bound": K,
        "kappa": kappa,
        "a": ent.dimension_weight(gamma, dim_param),
        "dim_param": dim_param,
    }


def _manifest(config: ExperimentConfig, derived: dict) -> str:
    return _json_text(
        {
            "config": config.model_dump(mode="json"),
            "derived": derived,
            "version": __version__,
        }
    )


def _bracketed_times(report_times: list[float], fraction: float, extra: list[float] = ()) -> list[float]:
    rts = np.asarray(report_times, dtype=float)
    delta = fraction * (rts[-1] - rts[0]) if rts.size > 1 else fraction * rts[0]
    delta = max(delta, 1e-12)
    times = set(rts.tolist())
    times.update((rts - delta).tolist())
    times.update((rts + delta).tolist())
    times.update(float(t) for t in extra)
    out = sorted(t for t in times if t > 0.0)
    # merge float near-duplicates (e.g. an extra time colliding with a report
    # time up to representation error); a degenerate gap would poison the
    # three-point differencing stencils downstream
    merged = [out[0]]
    for t in out[1:]:
        if t - merged[-1] > 1e-9 * max(1.0, abs(t)):
            merged.append(t)
    return merged


def _run_bracketed(config: ExperimentConfig, grid: Torus, u0: np.ndarray, extra_times=()) -> tuple[Trajectory, list[float]]:
    report_times = config.solver.times()
    times = _bracketed_times(report_times, config.entropy.bracket_fraction, extra_times)
    traj = run(
        grid,
        u0,
        config.solver.gamma,
        output_times=times,
        scheme=config.solver.scheme,
        cfl_safety=config.solver.cfl_safety,
        u_floor_frac=config.solver.u_floor_frac,
    )
    return traj, report_times


# ----------------------------------------------------------------------
# drivers
# ----------------------------------------------------------------------


def simulate_bundle(config: ExperimentConfig) -> ReportBundle:
    """Run the flow at the configured output times and export diagnostics."""
    grid = build_grid(config)
    u0 = initial_density(config, grid)
    traj = run(
        grid,
        u0,
        config.solver.gamma,
        output_times=config.solver.times(),
        scheme=config.solver.scheme,
        cfl_safety=config.solver.cfl_safety,
        u_floor_frac=config.solver.u_floor_frac,
    )
    rows = [[r["t"], r["mass"], r["min_u"], r["max_u"], r["sup_v"]] for r in traj.diagnostics_rows()]
    files = {"trajectory.csv": _csv_text(["t", "mass", "min_u", "max_u", "sup_v"], rows)}
    if config.solver.snapshots:
        for i, s in enumerate(traj.states):
            body = "\n".join(_fmt(v) for v in s.u.ravel()) + "\n"
            files[f"u_snapshot_{i:04d}.csv"] = body
    derived = _derived(config, grid, u0)
    files["manifest.json"] = _manifest(config, derived)
    mass0 = traj.initial.mass
    drift = max(abs(s.mass - mass0) for s in traj.states) / max(abs(mass0), 1e-30)
    summary = {
        "samples": len(traj.states),
        "final_time": traj.states[-1].t,
        "relative_mass_drift": drift,
        "sup_pressure": traj.sup_pressure,
    }
    return ReportBundle(passed=True, summary=summary, files=files)


ENTROPY_HEADER = ["t", "N", "W", "dWdt", "D_total", "D_hessian", "D_ricci", "D_trace", "D_weighted_extra", "pass"]


def _entropy_report_from_traj(config: ExperimentConfig, grid: Torus, traj: Trajectory, report_times, derived) -> tuple[ent.EntropyReport, str]:
    gamma = config.solver.gamma
    sched = ent.schedule(gamma, derived["dim_param"], derived["kappa"])
    report = ent.monotonicity_report(
        traj,
        sched,
        curvature_bound=derived["curvature_bound"],
        report_times=report_times,
        tolerance_scale=config.entropy.tolerance_scale,
    )
    rows = [[r[k] for k in ENTROPY_HEADER] for r in report.rows]
    return report, _csv_text(ENTROPY_HEADER, rows)


def entropy_bundle(config: ExperimentConfig) -> ReportBundle:
    """Monotonicity and dissipation verdicts along one configured run."""
    if not config.entropy.enable:
        return ReportBundle(passed=True, summary={"skipped": True}, files={})
    grid = build_grid(config)
    u0 = initial_density(config, grid)
    derived = _derived(config, grid, u0)
    traj, report_times = _run_bracketed(config, grid, u0)
    report, csv_text = _entropy_report_from_traj(config, grid, traj, report_times, derived)
    files = {
        "entropy_report.csv": csv_text,
        "manifest.json": _manifest(config, derived),
    }
    summary = {
        "passed": report.passed,
        "equality_case": report.equality_case,
        "tolerance": report.tolerance,
        "worst_monotonicity": report.worst_monotonicity,
        "worst_equality": report.worst_equality if report.equality_case else None,
        "worst_inequality": report.worst_inequality,
    }
    return ReportBundle(passed=report.passed, summary=summary, files=files)


def _resolve_family(spec: FamilySpec, kappa_auto: float) -> ha.SigmaFamily:
    kappa = kappa_auto if spec.kappa == "auto" else float(spec.kappa)
    if spec.kind == "power2":
        return ha.power2_family(kappa)
    return ha.sinh2_family(kappa)


def _random_pairs(traj: Trajectory, count: int, rng: np.random.Generator) -> list:
    times = traj.times
    g = traj.grid
    pairs = []
    for _ in range(count):
        i, j = sorted(rng.choice(len(times), size=2, replace=False))
        x1 = [rng.uniform(0.0, L) for L in g.periods]
        x2 = [rng.uniform(0.0, L) for L in g.periods]
        pairs.append(((x1, float(times[i])), (x2, float(times[j]))))
    return pairs


def harnack_bundle(config: ExperimentConfig) -> ReportBundle:
    """Pointwise estimate, two-point inequalities and the Laplacian bound."""
    if not config.harnack.enable:
        return ReportBundle(passed=True, summary={"skipped": True}, files={})
    grid = build_grid(config)
    u0 = initial_density(config, grid)
    derived = _derived(config, grid, u0)
    gamma = config.solver.gamma
    a = derived["a"]
    extra = [t for t in config.harnack.laplacian_estimate_times]
    traj, report_times = _run_bracketed(config, grid, u0, extra_times=extra)
    rng = np.random.default_rng(config.seed)

    residual_rows = []
    pair_rows = []
    summary: dict = {"families": {}}
    ok = True
    tol_scale = config.harnack.tolerance_scale
    for spec in config.harnack.families:
        try:
            family = _resolve_family(spec, derived["kappa"])
        except ValueError as exc:
            # e.g. sinh2 requested with auto kappa on an unweighted torus
            summary["families"][f"{spec.kind}"] = {"skipped": str(exc)}
            continue
        label = f"{family.kind}[kappa={_fmt(family.kappa)}]"
        res = ha.harnack_residual_report(traj, family, a, tolerance_scale=tol_scale)
        ok = ok and res.passed
        for t, m in zip(traj.times, res.details["per_sample_max"]):
            residual_rows.append([label, t, m, res.tolerance, res.passed])

        pairs = _random_pairs(traj, config.harnack.pair_count, rng)
        ineq = ha.harnack_inequality_report(traj, pairs, family, a, tolerance_scale=tol_scale)
        ok = ok and ineq.passed
        for row in ineq.details["pairs"]:
            pair_rows.append([label, row["t1"], row["t2"], row["d"], row["margin_diff"], row["margin_ratio"]])

        lap_reports = []
        for t in config.harnack.laplacian_estimate_times:
            state = traj.state_at(t)
            rep = ha.laplacian_estimate_report(state, family, a, v_max=traj.sup_pressure, tolerance_scale=tol_scale)
            ok = ok and rep.passed
            lap_reports.append(rep.as_dict())

        evo = None
        if config.harnack.evolution_check:
            horizon = report_times[-1]
            evo_times = [t for t in report_times if t >= 0.1 * horizon and t != report_times[-1] and t != report_times[0]]
            if len(evo_times) >= 1:
                evo = ha.estimate_evolution_report(traj, family, a, report_times=evo_times, tolerance_scale=tol_scale)
                ok = ok and evo.passed

        summary["families"][label] = {
            "kappa": family.kappa,
            "a": a,
            "pass_counts": {
                "residual": int(res.passed),
                "inequalities": int(ineq.passed),
                "laplacian_estimate": sum(int(r["passed"]) for r in lap_reports),
                "evolution": None if evo is None else int(evo.passed),
            },
            "worst_margins": {
                "residual_max": res.worst,
                "pair_margin_min": ineq.worst,
                "evolution_min": None if evo is None else evo.worst,
            },
            "laplacian_estimates": lap_reports,
        }

    files = {
        "harnack_residuals.csv": _csv_text(["family", "t", "max_residual", "tolerance", "pass"], residual_rows),
        "harnack_pairs.csv": _csv_text(["family", "t1", "t2", "distance", "margin_diff", "margin_ratio"], pair_rows),
        "harnack_summary.json": _json_text({"passed": ok, **summary}),
        "manifest.json": _manifest(config, derived),
    }
    return ReportBundle(passed=ok, summary=summary, files=files)


def warped_bundle(config: ExperimentConfig) -> ReportBundle:
    """Closed-form warped identities plus the FD curvature refinement ladder."""
    if not config.warped.enable:
        return ReportBundle(passed=True, summary={"skipped": True}, files={})
    geo = config.geometry
    if geo.weight is None:
        raise ValueError("warped checks need geometry.weight")
    q = config.warped.fiber_dim
    gamma = config.solver.gamma

    def make(points) -> wp.WarpedGeometry:
        probe = build_torus(geo.dim, points, geo.periods)
        weight = sample_nodes(geo.weight, probe)
        base = build_torus(geo.dim, points, geo.periods, weight=weight, m_param=probe.dim + q)
        return wp.WarpedGeometry(base=base, fiber_dim=q)

    warped = make(geo.points)
    base = warped.base
    rng = np.random.default_rng(config.seed)
    coeffs = rng.uniform(0.2, 1.0, size=3)
    freq = 2.0 * np.pi * np.stack([g / p for g, p in zip(base.coordinate_grids(), base.periods)])
    v = 1.0 + sum(float(coeffs[i]) * np.sin((i % 2 + 1) * freq[i]) for i in range(base.dim))

    reports: dict[str, CheckReport] = {}
    for mode in (wp.CLOSED_FORM, wp.FINITE_DIFFERENCE):
        reports[f"hessian_components[{mode}]"] = wp.hessian_components_report(warped, v, mode)
        reports[f"warped_laplacian[{mode}]"] = wp.warped_laplacian_report(warped, v, mode)
    m = base.dim + q
    eta_bar = float(rng.uniform(0.2, 2.0))
    reports["hessian_norm_decomposition"] = wp.hessian_norm_decomposition_report(warped, v, eta_bar, gamma, m)
    reports["warped_volume"] = wp.warped_volume_report(warped)

    ladder = []
    for points in config.warped.refinement_points:
        w_n = make(points)
        ladder.append(wp.ricci_lift_report(w_n))
    orders = [observed_order(ladder[i].worst, ladder[i + 1].worst) for i in range(len(ladder) - 1)]
    ladder_ok = all(r.passed for r in ladder) and all(o >= 1.8 for o in orders)

    ok = all(r.passed for r in reports.values()) and ladder_ok
    payload = {
        "passed": ok,
        "identities": {k: r.as_dict() for k, r in reports.items()},
        "ricci_lift": {
            "residuals": [r.worst for r in ladder],
            "points": list(config.warped.refinement_points),
            "orders": orders,
            "passed": ladder_ok,
        },
    }
    files = {"warped_report.json": _json_text(payload)}
    return ReportBundle(passed=ok, summary=payload, files=files)


def schedule_table_text(gamma: float, dim_param: float, kappa: float, family_kind: str, times) -> str:
    """CSV table of schedule values and estimate coefficients on a time grid."""
    sched = ent.schedule(gamma, dim_param, kappa)
    family = ha.power2_family(kappa) if family_kind == "power2" else ha.sinh2_family(kappa)
    rows = []
    for t in times:
        sigma, beta, eta = ent.schedule_eval(sched, float(t))
        alpha, phi = ha.alpha_phi(family, sched.a, float(t))
        rows.append([t, sched.a, sigma, beta, eta, alpha, phi])
    return _csv_text(["t", "a", "sigma", "beta", "eta", "alpha", "phi"], rows)


def _identity_sweep(config: ExperimentConfig) -> tuple[bool, dict]:
    """Seeded random sweep over the coefficient identities of both modules."""
    rng = np.random.default_rng(config.seed)
    worst = {"schedule_system": 0.0, "beta_identity": 0.0, "sigma_forms": 0.0, "ode_system": 0.0, "integrated": 0.0}
    for _ in range(100):
        kappa = float(rng.uniform(0.05, 2.0))
        t = float(rng.uniform(0.05, 2.0))
        gamma = float(rng.uniform(1.2, 3.0))
        dim_param = float(rng.uniform(1.0, 4.0))
        sched = ent.schedule(gamma, dim_param, kappa)
        res = ent.schedule_system_residuals(sched, t)
        worst["schedule_system"] = max(worst["schedule_system"], *res.values())
        worst["beta_identity"] = max(worst["beta_identity"], ent.beta_identity_residual(sched, t))
        worst["sigma_forms"] = max(worst["sigma_forms"], ent.sigma_form_gap(sched, t))
        for family in (ha.power2_family(kappa), ha.sinh2_family(kappa)):
            r = ha.ode_system_residuals(family, sched.a, t)
            worst["ode_system"] = max(worst["ode_system"], r["first"], r["second"], r["third"])
            q1, q2 = ha.integrated_identity_residuals(family, sched.a, t)
            worst["integrated"] = max(worst["integrated"], q1, q2)
    ok = (
        worst["schedule_system"] <= 1e-9
        and worst["beta_identity"] <= 1e-12
        and worst["sigma_forms"] <= 1e-12
        and worst["ode_system"] <= 1e-9
        and worst["integrated"] <= 1e-9
    )
    return ok, worst


def _identity_oracles(config: ExperimentConfig) -> tuple[bool, dict]:
    """Evolution/integral identity oracles on a finely sampled short window."""
    geo = config.geometry
    grid = build_torus(geo.dim, geo.points, geo.periods)  # oracles are unweighted
    cfg_initial = config.solver.initial
    u0 = sample_nodes(cfg_initial, grid)
    if np.any(u0 <= 0.0) or np.ptp(u0) == 0.0:
        x = grid.coordinate_grids()[0]
        u0 = 1.0 + 0.5 * np.sin(2.0 * np.pi * x / grid.periods[0])
    gamma = config.solver.gamma
    t0 = config.solver.times()[0]
    window = np.linspace(max(t0, 0.05), max(t0, 0.05) + 0.002, 21)
    traj = run(grid, u0, gamma, output_times=window, cfl_safety=0.1)
    scale = config.entropy.tolerance_scale
    reports = {
        "pressure_equation": pressure_equation_residual(traj, tolerance_scale=scale),
        "power_beta_1": evolution_identity_report(traj, "power_beta", beta=1.0, tolerance_scale=scale),
        "power_beta_2": evolution_identity_report(traj, "power_beta", beta=2.0, tolerance_scale=scale),
        "gradient_square": evolution_identity_report(traj, "w", tolerance_scale=scale),
        "time_derivative": evolution_identity_report(traj, "v_t", tolerance_scale=scale),
        "estimate_combination": evolution_identity_report(traj, "F_alpha", alpha_const=2.0, tolerance_scale=scale),
    }
    first, second = integral_identity_report(traj, tolerance_scale=scale)
    reports["integral_first"] = first
    reports["integral_second"] = second
    ok = all(r.passed for r in reports.values())
    return ok, {k: r.as_dict() for k, r in reports.items()}


def all_checks_bundle(config: ExperimentConfig) -> ReportBundle:
    """Run every enabled verification against one configuration."""
    bundle = ReportBundle(passed=True, summary={}, files={})

    ids_ok, ids = _identity_sweep(config)
    bundle.passed &= ids_ok
    bundle.summary["identities"] = {"passed": ids_ok, "worst": ids}

    sim = simulate_bundle(config)
    bundle.merge(sim)
    bundle.summary["simulate"] = sim.summary

    entropy = entropy_bundle(config)
    bundle.merge(entropy)
    bundle.summary["entropy"] = entropy.summary

    harnack = harnack_bundle(config)
    bundle.merge(harnack)
    bundle.summary["harnack"] = harnack.summary

    if config.warped.enable:
        warped = warped_bundle(config)
        bundle.merge(warped)
        bundle.summary["warped"] = {"passed": warped.passed}

    oracles_ok, oracle_reports = _identity_oracles(config)
    bundle.passed &= oracles_ok
    bundle.summary["identity_oracles"] = {"passed": oracles_ok, "reports": oracle_reports}

    bundle.summary["passed"] = bundle.passed
    bundle.files["all_checks_summary.json"] = _json_text(bundle.summary)
    return bundle
