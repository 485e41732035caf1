"""Small shared containers for verification results and tolerance models.

Every checker in the package reduces to the same shape of answer: a worst
residual (or worst margin), the tolerance it was held against, and a flag.
The tolerance model is the one used throughout: discretization residuals
are bounded by C * (h^2 + dt^2) * scale, where h is the grid spacing, dt
the relevant time-sampling interval and scale a magnitude representative
of the quantities entering the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field


@dataclass
class CheckReport:
    """Outcome of a single verification check."""

    name: str
    passed: bool
    worst: float
    tolerance: float
    details: dict = dc_field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "name": self.name,
            "passed": bool(self.passed),
            "worst": float(self.worst),
            "tolerance": float(self.tolerance),
        }
        out.update({k: v for k, v in sorted(self.details.items())})
        return out


def refinement_tolerance(h: float, dt: float, scale: float, factor: float = 10.0) -> float:
    """Tolerance C*(h^2 + dt^2)*scale for second-order-in-space residuals."""
    return factor * (h * h + dt * dt) * scale


def observed_order(error_coarse: float, error_fine: float) -> float:
    """Convergence order implied by halving the resolution."""
    import math

    if error_fine <= 0.0:
        return float("inf")
    return math.log2(error_coarse / error_fine)


def to_builtin(obj):
    """Recursively convert numpy scalars/arrays so payloads serialize cleanly."""
    import numpy as np

    if isinstance(obj, dict):
        return {k: to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_builtin(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, CheckReport):
        return to_builtin(obj.as_dict())
    return obj
