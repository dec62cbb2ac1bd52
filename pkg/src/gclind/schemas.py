"""Request/response models of the HTTP service.

Requests are the scenario configs themselves (see ``gclind.config``); the
models here describe what the service sends back.
"""

from __future__ import annotations

from pydantic import BaseModel

from .scenarios import ScenarioOutcome


class OutputDocument(BaseModel):
    filename: str
    content: str
    media_type: str


class RunResponse(BaseModel):
    scenario: str
    config_hash: str
    report: dict
    outputs: list[OutputDocument]

    @classmethod
    def from_outcome(cls, outcome: ScenarioOutcome) -> "RunResponse":
        return cls(
            scenario=outcome.scenario,
            config_hash=outcome.config_hash,
            report=outcome.report,
            outputs=[
                OutputDocument(
                    filename=doc.filename, content=doc.content, media_type=doc.media_type
                )
                for doc in outcome.outputs
            ],
        )


class Defect(BaseModel):
    location: str
    message: str


class ValidateResponse(BaseModel):
    ok: bool
    scenario: str | None = None
    defects: list[Defect] = []


class ErrorBody(BaseModel):
    """Body of every non-2xx response; ``kind`` drives the CLI exit code."""

    kind: str  # "validation" or "numerical"
    detail: str
    defects: list[Defect] = []
