"""Experiment configuration: a JSON-documented schema with strict validation.

The models are the single source of truth for the config file format; the
service publishes their JSON schema at /config-schema.  Validation errors
carry the path to the offending key (pydantic location tuples), which the
CLI prints as dotted paths such as ``solver.gamma``.
"""

from __future__ import annotations

from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

__all__ = [
    "WeightSpec",
    "InitialSpec",
    "GeometryConfig",
    "TimeGrid",
    "SolverConfig",
    "EntropyConfig",
    "FamilySpec",
    "HarnackConfig",
    "WarpedConfig",
    "OutputConfig",
    "ExperimentConfig",
    "sample_nodes",
]


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WeightSpec(_StrictModel):
    """Log-density on the torus: a named analytic form or a CSV of node values.

    ``sin`` means amplitude * sin(2 pi frequency x_axis / period_axis); the
    CSV alternative holds one value per line in row-major node order.
    """

    form: Literal["zero", "sin"] = "zero"
    amplitude: float = 0.0
    frequency: int = Field(1, ge=1)
    axis: int = Field(0, ge=0, le=2)
    csv: str | None = None


class InitialSpec(_StrictModel):
    """Initial density: constant, sine perturbation, or CSV node values."""

    form: Literal["constant", "sine"] = "sine"
    value: float = Field(1.0, gt=0.0)
    base: float = 1.0
    amplitude: float = 0.5
    frequency: int = Field(1, ge=1)
    axis: int = Field(0, ge=0, le=2)
    csv: str | None = None


class GeometryConfig(_StrictModel):
    dim: int = Field(1, ge=1, le=3)
    points: Union[int, list[int]] = 256
    periods: Union[float, list[float]] = 1.0
    weight: WeightSpec | None = None
    m_param: float | None = None


class TimeGrid(_StrictModel):
    start: float = Field(..., gt=0.0)
    stop: float = Field(..., gt=0.0)
    num: int = Field(..., ge=2)

    @model_validator(mode="after")
    def _ordered(self):
        if self.stop <= self.start:
            raise ValueError("stop must exceed start")
        return self

    def values(self) -> list[float]:
        return np.linspace(self.start, self.stop, self.num).tolist()


class SolverConfig(_StrictModel):
    gamma: float = Field(2.0, gt=1.0)
    initial: InitialSpec = InitialSpec()
    scheme: Literal["explicit", "semi_implicit"] = "explicit"
    output_times: Union[TimeGrid, list[float]] = TimeGrid(start=0.01, stop=0.5, num=25)
    cfl_safety: float = Field(0.25, gt=0.0, le=1.0)
    u_floor_frac: float = Field(1e-6, gt=0.0, lt=1.0)
    snapshots: bool = False

    def times(self) -> list[float]:
        if isinstance(self.output_times, TimeGrid):
            return self.output_times.values()
        if not self.output_times:
            raise ValueError("output_times must be non-empty")
        ts = sorted(self.output_times)
        if ts[0] <= 0.0:
            raise ValueError("output_times must be strictly positive")
        return ts


class EntropyConfig(_StrictModel):
    enable: bool = True
    curvature_bound: float | None = Field(None, ge=0.0)
    tolerance_scale: float = Field(10.0, gt=0.0)
    bracket_fraction: float = Field(1e-5, gt=0.0, lt=0.05)


class FamilySpec(_StrictModel):
    kind: Literal["power2", "sinh2"] = "power2"
    kappa: Union[float, Literal["auto"]] = "auto"


class HarnackConfig(_StrictModel):
    enable: bool = True
    families: list[FamilySpec] = [FamilySpec()]
    pair_count: int = Field(100, ge=0)
    laplacian_estimate_times: list[float] = []
    evolution_check: bool = True
    tolerance_scale: float = Field(10.0, gt=0.0)


class WarpedConfig(_StrictModel):
    enable: bool = False
    fiber_dim: int = Field(1, ge=1)
    refinement_points: list[int] = [64, 128, 256]


class OutputConfig(_StrictModel):
    directory: str = "out"
    formats: list[Literal["csv", "json"]] = ["csv", "json"]


class ExperimentConfig(_StrictModel):
    geometry: GeometryConfig = GeometryConfig()
    solver: SolverConfig = SolverConfig()
    entropy: EntropyConfig = EntropyConfig()
    harnack: HarnackConfig = HarnackConfig()
    warped: WarpedConfig = WarpedConfig()
    output: OutputConfig = OutputConfig()
    seed: int = 0


def sample_nodes(spec: WeightSpec | InitialSpec, grid) -> np.ndarray:
    """Evaluate a weight or initial-data spec on the grid nodes."""
    if spec.csv is not None:
        values = np.loadtxt(spec.csv, dtype=float).reshape(grid.shape)
        return values
    if spec.form == "zero":
        return np.zeros(grid.shape)
    if spec.form == "constant":
        return np.full(grid.shape, spec.value)
    axis = spec.axis
    if axis >= grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {grid.dim}")
    x = grid.coordinate_grids()[axis]
    wave = np.sin(2.0 * np.pi * spec.frequency * x / grid.periods[axis])
    if spec.form == "sin":
        return spec.amplitude * wave
    return spec.base + spec.amplitude * wave
