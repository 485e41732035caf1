"""Shared fixtures: the expensive acceptance trajectories are built once.

The entropy/Harnack acceptance runs share one protocol: report times on a
uniform grid in [0.01, 0.5], each bracketed by auxiliary samples at a
1e-5 fraction of the span so that differencing W in time contributes
negligibly next to the spatial truncation the tolerances track.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from pmelab import entropy as ent
from pmelab.solver import Trajectory, run
from pmelab.torus import Torus, build_torus


@dataclass
class AcceptanceRun:
    grid: Torus
    u0: np.ndarray
    gamma: float
    traj: Trajectory
    report_times: np.ndarray
    curvature_bound: float
    kappa: float
    a: float
    entropy_report: ent.EntropyReport


T_LO, T_HI, NUM_SAMPLES = 0.01, 0.5, 25
BRACKET = 1e-5 * (T_HI - T_LO)


def _sample_times(extra=()):
    rts = np.linspace(T_LO, T_HI, NUM_SAMPLES)
    times = set(rts.tolist())
    times.update((rts - BRACKET).tolist())
    times.update((rts + BRACKET).tolist())
    times.update(extra)
    return rts, sorted(times)


def make_acceptance_run(points: int, gamma: float, weighted: bool, extra_times=()) -> AcceptanceRun:
    if weighted:
        grid = build_torus(1, points, 1.0, weight=lambda x: 0.2 * np.sin(2 * np.pi * x), m_param=3.0)
        dim_param = 3.0
    else:
        grid = build_torus(1, points, 1.0)
        dim_param = 1.0
    x = grid.coordinate_grids()[0]
    u0 = 1.0 + 0.5 * np.sin(2.0 * np.pi * x)
    report_times, times = _sample_times(extra_times)
    traj = run(grid, u0, gamma, output_times=times, cfl_safety=0.25)
    K = grid.bakry_emery_lower_bound()
    kappa = ent.kappa_from_initial(u0, gamma, K)
    sched = ent.schedule(gamma, dim_param, kappa)
    report = ent.monotonicity_report(traj, sched, curvature_bound=K, report_times=report_times)
    return AcceptanceRun(
        grid=grid,
        u0=u0,
        gamma=gamma,
        traj=traj,
        report_times=report_times,
        curvature_bound=K,
        kappa=kappa,
        a=sched.a,
        entropy_report=report,
    )


@pytest.fixture(scope="session")
def unweighted_runs() -> dict:
    """Sine runs on T^1 with 256 nodes for gamma in {1.5, 2, 3} (K = 0).

    The gamma = 2 run carries t = 0.1 as an extra exact sample for the
    Laplacian-estimate checks; a 128-node gamma = 2 run supports the
    resolution-refinement assertions.
    """
    runs = {
        (256, 1.5): make_acceptance_run(256, 1.5, weighted=False),
        (256, 2.0): make_acceptance_run(256, 2.0, weighted=False, extra_times=(0.1,)),
        (256, 3.0): make_acceptance_run(256, 3.0, weighted=False),
        (128, 2.0): make_acceptance_run(128, 2.0, weighted=False, extra_times=(0.1,)),
    }
    return runs


@pytest.fixture(scope="session")
def weighted_runs() -> dict:
    """gamma = 2 runs with weight 0.2 sin(2 pi x) and m = 3 at two resolutions."""
    return {
        256: make_acceptance_run(256, 2.0, weighted=True),
        128: make_acceptance_run(128, 2.0, weighted=True),
    }
