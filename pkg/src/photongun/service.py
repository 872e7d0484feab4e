"""HTTP service wrapping the batch runner.

Every endpoint takes the same JSON run configuration (:class:`RunConfig`)
in the request body; the ``mode`` field is implied by the endpoint and may
be omitted.  Configuration problems surface as 422 (schema) or 400
(semantic) responses carrying the offending field; numerical failures
surface as 500.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__, runner
from .config import RunConfig
from .errors import ConvergenceError, NumericalDomainError, ParameterError


class AnalyticBlock(BaseModel):
    pe_exact: float
    pe_approx: float
    p1: float
    pi_0: float
    pi_e: float
    pi_1: float
    f_il: float
    f_il_poisson: float


class PropagatorBlock(BaseModel):
    pe: float
    p1_emitted: float
    pi_0: float
    pi_e: float
    pi_1: float
    f_il: float
    cutoff: int
    tail: float


class ShelvingBlock(BaseModel):
    duty_factor: float
    survival_one_period: float
    steady_metastable: Optional[float]


class AnalyzeResponse(BaseModel):
    analytic: AnalyticBlock
    propagator: PropagatorBlock
    shelving: ShelvingBlock
    notes: list[str]


class SweepResponse(BaseModel):
    csv: str
    rows: int


class EstimateModel(BaseModel):
    mean: float
    std_error: float
    n: int
    degenerate: bool


class McResponse(BaseModel):
    estimates: dict[str, EstimateModel]
    n_cycles: int
    seed: int


class AttackReportModel(BaseModel):
    eve_fraction: float
    bob_rate: float
    detectable_by: list[str]
    degenerate: bool
    tail_warning: bool


class ComparisonModel(BaseModel):
    dipole_f_il: float
    poisson_f_il: float
    improvement_ratio: Optional[float]
    infinite: bool


class StatsModel(BaseModel):
    pi_e: float
    pi_1: float
    pi_ge2: float
    f_il: float


class AttackResponse(BaseModel):
    stats: StatsModel
    beamsplitter: AttackReportModel
    qnd: AttackReportModel
    lossy_line: AttackReportModel
    comparison: ComparisonModel


class CheckResult(BaseModel):
    name: str
    passed: bool
    measured: float
    tolerance: float


class ValidateResponse(BaseModel):
    passed: bool
    checks: list[CheckResult]


app = FastAPI(
    title="photongun",
    version=__version__,
    description="Photon-number statistics of a pulsed single-dipole source",
)


def _run(fn, cfg: RunConfig, mode: str):
    if cfg.mode != mode:
        cfg = cfg.model_copy(update={"mode": mode})
    try:
        return fn(cfg)
    except ParameterError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    except (NumericalDomainError, ConvergenceError) as exc:
        raise HTTPException(status_code=500, detail=str(exc)) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.post("/analyze", response_model=AnalyzeResponse)
def analyze(cfg: RunConfig) -> dict:
    return _run(runner.run_analyze, cfg, "analyze")


@app.post("/sweep", response_model=SweepResponse)
def sweep(cfg: RunConfig) -> dict:
    csv, rows = _run(runner.run_sweep, cfg, "sweep")
    return {"csv": csv, "rows": rows}


@app.post("/mc", response_model=McResponse)
def mc(cfg: RunConfig) -> dict:
    return _run(runner.run_mc, cfg, "mc")


@app.post("/attack", response_model=AttackResponse)
def attack(cfg: RunConfig) -> dict:
    return _run(runner.run_attack, cfg, "attack")


@app.post("/validate", response_model=ValidateResponse)
def validate(cfg: RunConfig) -> dict:
    return _run(runner.run_validate, cfg, "validate")
