"""HTTP facade over the experiment drivers.

The service is stateless: every endpoint takes a full experiment config
(or the schedule-table parameters), runs the computation synchronously and
returns the produced report files inline, so clients decide where to
persist them.  Request validation errors surface as 422 responses whose
detail carries the path to the offending config key.
"""

from __future__ import annotations

from fastapi import FastAPI
from pydantic import BaseModel, Field

from . import __version__
from .config import ExperimentConfig
from .reports import to_builtin
from .experiments import (
    all_checks_bundle,
    entropy_bundle,
    harnack_bundle,
    schedule_table_text,
    simulate_bundle,
    warped_bundle,
)

__all__ = ["create_app", "ConfigRequest", "ScheduleTableRequest", "ReportResponse"]


class ConfigRequest(BaseModel):
    config: ExperimentConfig


class ScheduleTableRequest(BaseModel):
    gamma: float = Field(..., gt=1.0)
    dim_param: float = Field(..., ge=1.0)
    kappa: float = Field(..., ge=0.0)
    family: str = Field("power2", pattern="^(power2|sinh2)$")
    times: list[float] = Field(..., min_length=1)


class ReportResponse(BaseModel):
    passed: bool
    summary: dict
    files: dict[str, str]


def _respond(bundle) -> ReportResponse:
    return ReportResponse(passed=bool(bundle.passed), summary=to_builtin(bundle.summary), files=bundle.files)


def create_app() -> FastAPI:
    app = FastAPI(
        title="porous-medium-lab",
        version=__version__,
        description="Simulation and verification service for porous medium flows on flat tori.",
    )

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/config-schema")
    def config_schema() -> dict:
        return ExperimentConfig.model_json_schema()

    @app.post("/simulate", response_model=ReportResponse)
    def simulate(req: ConfigRequest) -> ReportResponse:
        return _respond(simulate_bundle(req.config))

    @app.post("/entropy-report", response_model=ReportResponse)
    def entropy_report(req: ConfigRequest) -> ReportResponse:
        return _respond(entropy_bundle(req.config))

    @app.post("/harnack-check", response_model=ReportResponse)
    def harnack_check(req: ConfigRequest) -> ReportResponse:
        return _respond(harnack_bundle(req.config))

    @app.post("/warped-verify", response_model=ReportResponse)
    def warped_verify(req: ConfigRequest) -> ReportResponse:
        return _respond(warped_bundle(req.config))

    @app.post("/schedule-table", response_model=ReportResponse)
    def schedule_table(req: ScheduleTableRequest) -> ReportResponse:
        text = schedule_table_text(req.gamma, req.dim_param, req.kappa, req.family, req.times)
        return ReportResponse(passed=True, summary={"rows": len(req.times)}, files={"schedule_table.csv": text})

    @app.post("/all-checks", response_model=ReportResponse)
    def all_checks(req: ConfigRequest) -> ReportResponse:
        return _respond(all_checks_bundle(req.config))

    return app
