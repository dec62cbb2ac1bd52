"""HTTP service exposing the scenario runners.

One POST endpoint per scenario kind, each taking the full config document as
body, plus ``/validate`` for schema checks without execution.  Validation
problems answer 422 and numerical aborts 500, both with an ``ErrorBody``
whose ``kind`` field tells clients which failure class occurred.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import config as cfg
from .errors import DimensionError, GclindError, InvalidDensityError, NumericalFailure, ValidationFailure
from .scenarios import execute
from .schemas import Defect, ErrorBody, RunResponse, ValidateResponse
from .version import __version__


def _validation_response(detail: str, defects: list[tuple[str, str]]) -> JSONResponse:
    body = ErrorBody(
        kind="validation",
        detail=detail,
        defects=[Defect(location=loc, message=msg) for loc, msg in defects],
    )
    return JSONResponse(status_code=422, content=body.model_dump())


def create_app() -> FastAPI:
    app = FastAPI(title="gclind", version=__version__)

    @app.exception_handler(ValidationFailure)
    async def _on_validation_failure(request: Request, exc: ValidationFailure):
        return _validation_response(str(exc), exc.defects)

    @app.exception_handler(RequestValidationError)
    async def _on_request_validation(request: Request, exc: RequestValidationError):
        defects = []
        for err in exc.errors():
            parts = [str(p) for p in err["loc"] if p != "body"]
            if parts and parts[0] in cfg.SCENARIO_KINDS:
                parts = parts[1:]
            defects.append((".".join(parts) or "<config>", err["msg"]))
        return _validation_response("invalid config", defects)

    @app.exception_handler(DimensionError)
    async def _on_dimension_error(request: Request, exc: DimensionError):
        return _validation_response(str(exc), [])

    @app.exception_handler(InvalidDensityError)
    async def _on_invalid_density(request: Request, exc: InvalidDensityError):
        return _validation_response(str(exc), [])

    @app.exception_handler(NumericalFailure)
    async def _on_numerical_failure(request: Request, exc: NumericalFailure):
        body = ErrorBody(kind="numerical", detail=str(exc))
        return JSONResponse(status_code=500, content=body.model_dump())

    @app.exception_handler(GclindError)
    async def _on_gclind_error(request: Request, exc: GclindError):
        body = ErrorBody(kind="numerical", detail=str(exc))
        return JSONResponse(status_code=500, content=body.model_dump())

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/version")
    def version() -> dict:
        return {"version": __version__}

    def _run(config) -> RunResponse:
        return RunResponse.from_outcome(execute(config))

    @app.post("/run/evolve", response_model=RunResponse)
    def run_evolve(config: cfg.EvolveConfig) -> RunResponse:
        return _run(config)

    @app.post("/run/steady", response_model=RunResponse)
    def run_steady(config: cfg.SteadyConfig) -> RunResponse:
        return _run(config)

    @app.post("/run/check", response_model=RunResponse)
    def run_check(config: cfg.CheckConfig) -> RunResponse:
        return _run(config)

    @app.post("/run/mu-extract", response_model=RunResponse)
    def run_mu_extract(config: cfg.MuExtractConfig) -> RunResponse:
        return _run(config)

    @app.post("/run/sample", response_model=RunResponse)
    def run_sample(config: cfg.SampleConfig) -> RunResponse:
        return _run(config)

    @app.post("/validate", response_model=ValidateResponse)
    def validate(body: dict) -> ValidateResponse:
        try:
            config = cfg.parse_config(body)
        except ValidationFailure as exc:
            return ValidateResponse(
                ok=False,
                defects=[Defect(location=loc, message=msg) for loc, msg in exc.defects]
                or [Defect(location="<root>", message=str(exc))],
            )
        return ValidateResponse(ok=True, scenario=config.scenario)

    return app


app = create_app()
