"""Scenario config schema, file loading, and construction of domain objects.

A config is one JSON document with a ``scenario`` discriminator and
per-scenario sections.  Unknown keys are rejected everywhere.  Operator
payloads are strings in the plain-text exchange format; a string starting
with ``@`` is a file reference resolved (relative to the config file) when
the config is loaded, so service requests are always self-contained.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from . import hierarchy as hier
from . import operators as op
from .errors import GclindError, ValidationFailure
from .gibbs import GrandCanonicalSpec, ReservoirEnergyModel
from .lindblad import (
    JumpChannel,
    LindbladModel,
    TwoLevelBathParams,
    two_level_hamiltonian,
    two_level_thermal_channels,
)


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TolerancesSection(StrictModel):
    trace_drift: float = Field(1e-9, gt=0)
    state_check: float = Field(1e-7, gt=0)
    condition: float = Field(1e-9, gt=0)
    steady_null_cutoff: float = Field(1e-10, gt=0)
    steady_residual: float = Field(1e-9, gt=0)


class NumericsSection(StrictModel):
    dt: float | None = Field(None, gt=0)
    t_span: tuple[float, float] | None = None
    seed: int = Field(0, ge=0, lt=2**64)
    store_every: int = Field(1, ge=1)
    tolerances: TolerancesSection = TolerancesSection()

    @model_validator(mode="after")
    def _span_increasing(self):
        if self.t_span is not None and self.t_span[1] <= self.t_span[0]:
            raise ValueError(f"t_span must be increasing, got {self.t_span}")
        return self


class OutputSection(StrictModel):
    basename: str | None = None


class ChannelSpec(StrictModel):
    l_op: str
    rate: float = Field(ge=0)


class TwoLevelThermalModel(StrictModel):
    kind: Literal["two_level_thermal"]
    omega0: float = Field(gt=0)
    beta: float = Field(gt=0)
    gamma0: float = Field(gt=0)
    hbar: float = Field(1.0, gt=0)
    initial_state: str = "excited"


class ExplicitModel(StrictModel):
    kind: Literal["explicit"]
    h_sys: str
    h_ren: str | None = None
    coupling: float = 1.0
    channels: list[ChannelSpec] = []
    hbar: float = Field(1.0, gt=0)
    initial_state: str | None = None


ModelSection = Annotated[Union[TwoLevelThermalModel, ExplicitModel], Field(discriminator="kind")]


class SingleModeSectors(StrictModel):
    """One bosonic mode: sector N is one-dimensional with energy N * eps."""

    family: Literal["single_mode"]
    eps: float
    n_max: int = Field(ge=0)


class NTimesEpsSectors(StrictModel):
    """Sector N is dims[N]-dimensional with Hamiltonian N * eps * Id."""

    family: Literal["n_times_eps"]
    eps: float
    dims: list[int] = Field(min_length=1)

    @model_validator(mode="after")
    def _dims_positive(self):
        if any(d < 1 for d in self.dims):
            raise ValueError(f"sector dimensions must be >= 1, got {self.dims}")
        return self


class ExplicitSectors(StrictModel):
    family: Literal["explicit"]
    hamiltonians: list[str] = Field(min_length=1)


SectorsSection = Annotated[
    Union[SingleModeSectors, NTimesEpsSectors, ExplicitSectors], Field(discriminator="family")
]


class GCSection(StrictModel):
    beta: float = Field(gt=0)
    mu: float
    sectors: SectorsSection
    tail_threshold: float = Field(1e-6, gt=0)

    def sector_count(self) -> int:
        s = self.sectors
        if isinstance(s, SingleModeSectors):
            return s.n_max + 1
        if isinstance(s, NTimesEpsSectors):
            return len(s.dims)
        return len(s.hamiltonians)


class EvolveConfig(StrictModel):
    scenario: Literal["evolve"]
    model: ModelSection
    numerics: NumericsSection
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _needs_time_grid(self):
        if self.numerics.dt is None:
            raise ValueError("numerics.dt is required for the evolve scenario")
        if self.numerics.t_span is None:
            raise ValueError("numerics.t_span is required for the evolve scenario")
        if isinstance(self.model, ExplicitModel) and self.model.initial_state is None:
            raise ValueError("model.initial_state is required for explicit evolve models")
        return self


class SteadyConfig(StrictModel):
    scenario: Literal["steady"]
    model: ModelSection
    numerics: NumericsSection = NumericsSection()
    output: OutputSection = OutputSection()


class CheckConfig(StrictModel):
    scenario: Literal["check"]
    condition: Literal["A", "B", "C"]
    channels: list[ChannelSpec] = []
    gc: GCSection | None = None
    k_operator: str | None = None
    partition: tuple[list[int], list[int]] | None = None
    f_operator: str | None = None
    hbar: float = Field(1.0, gt=0)
    numerics: NumericsSection = NumericsSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _consistent(self):
        if (self.gc is None) == (self.k_operator is None):
            raise ValueError("exactly one of gc and k_operator must be given")
        if self.condition == "B" and self.partition is None:
            raise ValueError("condition B requires a channel partition")
        if self.condition == "C" and self.f_operator is None:
            raise ValueError("condition C requires f_operator")
        return self


class LinearEnergy(StrictModel):
    eps: float


class QuadraticEnergy(StrictModel):
    a: float


class ReservoirSection(StrictModel):
    total_particles: int = Field(ge=1)
    table: dict[int, float] | None = None
    linear: LinearEnergy | None = None
    quadratic: QuadraticEnergy | None = None
    max_probe_fraction: float = Field(0.01, gt=0, le=1)

    @model_validator(mode="after")
    def _one_energy_model(self):
        given = [x is not None for x in (self.table, self.linear, self.quadratic)]
        if sum(given) != 1:
            raise ValueError("exactly one of table, linear, quadratic must be given")
        return self


class MuExtractConfig(StrictModel):
    scenario: Literal["mu-extract"]
    reservoir: ReservoirSection
    n_star: int = Field(ge=1)
    numerics: NumericsSection = NumericsSection()
    output: OutputSection = OutputSection()


class HierarchySection(StrictModel):
    window_center: int = Field(ge=0)
    window_half_width: int = Field(ge=0)
    n_steps: int = Field(ge=1)
    initial_n: int | None = Field(None, ge=0)
    proposal_mode: Literal["paper_literal", "symmetric"] = "paper_literal"
    coupling: float = 0.0
    channels: dict[int, list[ChannelSpec]] = {}
    hbar: float = Field(1.0, gt=0)


class ObservableSpec(StrictModel):
    name: str
    kind: Literal["number", "identity", "per_sector"]
    operators: list[str] | None = None

    @model_validator(mode="after")
    def _operators_match_kind(self):
        if self.kind == "per_sector" and not self.operators:
            raise ValueError("per_sector observables need an operator list")
        if self.kind != "per_sector" and self.operators is not None:
            raise ValueError(f"{self.kind} observables take no operator list")
        return self


class SampleConfig(StrictModel):
    scenario: Literal["sample"]
    gc: GCSection
    hierarchy: HierarchySection
    observables: list[ObservableSpec] = []
    numerics: NumericsSection = NumericsSection()
    output: OutputSection = OutputSection()

    @model_validator(mode="after")
    def _window_inside_truncation(self):
        if self.numerics.dt is None:
            raise ValueError("numerics.dt is required for the sample scenario")
        lo = self.hierarchy.window_center - self.hierarchy.window_half_width
        hi = self.hierarchy.window_center + self.hierarchy.window_half_width
        n_max = self.gc.sector_count() - 1
        if lo < 0 or hi > n_max:
            raise ValueError(
                f"hierarchy window [{lo}, {hi}] lies outside the sector range [0, {n_max}]"
            )
        return self


ScenarioConfig = Annotated[
    Union[EvolveConfig, SteadyConfig, CheckConfig, MuExtractConfig, SampleConfig],
    Field(discriminator="scenario"),
]

SCENARIO_KINDS = ("evolve", "steady", "check", "mu-extract", "sample")

_adapter: TypeAdapter = TypeAdapter(ScenarioConfig)


def validation_defects(exc: ValidationError) -> list[tuple[str, str]]:
    """Flatten a pydantic error into ``(dotted location, message)`` pairs.

    Discriminated-union tags and the request-body marker are stripped so the
    location names the config key as written.
    """
    out = []
    for err in exc.errors():
        parts = [str(p) for p in err["loc"] if p != "body"]
        if parts and parts[0] in SCENARIO_KINDS:
            parts = parts[1:]
        out.append((".".join(parts) or "<config>", err["msg"]))
    return out


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return _adapter.validate_python(data)
    except ValidationError as exc:
        defects = validation_defects(exc)
        summary = "; ".join(f"{loc}: {msg}" for loc, msg in defects)
        raise ValidationFailure(f"invalid config: {summary}", defects=defects) from exc


def resolve_file_refs(data, base_dir: Path):
    """Replace ``@file`` strings with file contents, relative to the config dir."""
    if isinstance(data, dict):
        return {k: resolve_file_refs(v, base_dir) for k, v in data.items()}
    if isinstance(data, list):
        return [resolve_file_refs(v, base_dir) for v in data]
    if isinstance(data, str) and data.startswith("@"):
        target = base_dir / data[1:]
        if not target.is_file():
            raise ValidationFailure(f"referenced file does not exist: {target}")
        return target.read_text()
    return data


def load_config_data(path) -> dict:
    """Read and parse the JSON document, resolving file references."""
    p = Path(path)
    if not p.is_file():
        raise ValidationFailure(f"config file does not exist: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationFailure(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationFailure("config must be a JSON object")
    return resolve_file_refs(data, p.parent)


def load_config(path) -> ScenarioConfig:
    return parse_config(load_config_data(path))


# ---------------------------------------------------------------------------
# Builders from config sections to domain objects.

def build_operator(text: str, name: str) -> np.ndarray:
    try:
        return op.load_operator(text)
    except (ValueError, GclindError) as exc:
        raise ValidationFailure(f"{name}: {exc}") from exc


def build_channels(specs: list[ChannelSpec], where: str = "channels") -> list[JumpChannel]:
    out = []
    for i, spec in enumerate(specs):
        out.append(JumpChannel(build_operator(spec.l_op, f"{where}[{i}].l_op"), spec.rate))
    return out


def _named_initial_state(name: str, dim: int) -> np.ndarray:
    if name == "maximally_mixed":
        return np.eye(dim, dtype=complex) / dim
    if dim != 2:
        raise ValidationFailure(
            f"named initial state {name!r} is only defined for two-level models"
        )
    if name == "excited":
        return np.diag([1.0, 0.0]).astype(complex)
    if name == "ground":
        return np.diag([0.0, 1.0]).astype(complex)
    raise ValidationFailure(f"unknown initial state {name!r}")


def build_initial_state(text: str, dim: int) -> np.ndarray:
    if text in ("excited", "ground", "maximally_mixed"):
        rho = _named_initial_state(text, dim)
    else:
        rho = build_operator(text, "initial_state")
        if rho.shape[0] != dim:
            raise ValidationFailure(
                f"initial_state dimension {rho.shape[0]} differs from model dimension {dim}"
            )
    try:
        return op.validate_density(rho)
    except GclindError as exc:
        raise ValidationFailure(f"initial_state: {exc}") from exc


def build_model(section) -> tuple[LindbladModel, np.ndarray | None]:
    """Lindblad model plus (optional) initial state from a model section."""
    try:
        if isinstance(section, TwoLevelThermalModel):
            params = TwoLevelBathParams(
                omega0=section.omega0, beta=section.beta,
                gamma0=section.gamma0, hbar=section.hbar,
            )
            model = LindbladModel(
                h_sys=two_level_hamiltonian(section.omega0, section.hbar),
                channels=tuple(two_level_thermal_channels(params)),
                coupling=1.0,
                hbar=section.hbar,
            )
            rho0 = build_initial_state(section.initial_state, 2)
            return model, rho0
        h_sys = build_operator(section.h_sys, "model.h_sys")
        h_ren = build_operator(section.h_ren, "model.h_ren") if section.h_ren else None
        model = LindbladModel(
            h_sys=h_sys,
            h_ren=h_ren,
            coupling=section.coupling,
            channels=tuple(build_channels(section.channels, "model.channels")),
            hbar=section.hbar,
        )
        rho0 = None
        if section.initial_state is not None:
            rho0 = build_initial_state(section.initial_state, model.dim)
        return model, rho0
    except ValidationFailure:
        raise
    except (ValueError, GclindError) as exc:
        raise ValidationFailure(f"model: {exc}") from exc


def build_gc_spec(section: GCSection) -> GrandCanonicalSpec:
    s = section.sectors
    if isinstance(s, SingleModeSectors):
        hams = [np.array([[n * s.eps]], dtype=complex) for n in range(s.n_max + 1)]
    elif isinstance(s, NTimesEpsSectors):
        hams = [n * s.eps * np.eye(d, dtype=complex) for n, d in enumerate(s.dims)]
    else:
        hams = [build_operator(t, f"gc.sectors.hamiltonians[{n}]") for n, t in enumerate(s.hamiltonians)]
    try:
        return GrandCanonicalSpec(
            beta=section.beta,
            mu=section.mu,
            sector_hamiltonians=tuple(hams),
            tail_threshold=section.tail_threshold,
        )
    except (ValueError, GclindError) as exc:
        raise ValidationFailure(f"gc: {exc}") from exc


def build_reservoir(section: ReservoirSection) -> ReservoirEnergyModel:
    m = section.total_particles
    if section.table is not None:
        energy = dict(section.table)
    elif section.linear is not None:
        eps = section.linear.eps
        energy = lambda n: (m - n) * eps  # noqa: E731
    else:
        a = section.quadratic.a
        energy = lambda n: a * (m - n) ** 2  # noqa: E731
    return ReservoirEnergyModel(
        total_particles=m, mean_energy=energy, max_probe_fraction=section.max_probe_fraction
    )


def build_hierarchy_config(cfg: SampleConfig) -> hier.HierarchyConfig:
    spec = build_gc_spec(cfg.gc)
    h = cfg.hierarchy
    channels = {
        n: tuple(build_channels(specs, f"hierarchy.channels[{n}]"))
        for n, specs in h.channels.items()
    }
    try:
        return hier.HierarchyConfig(
            gc_spec=spec,
            window_center=h.window_center,
            window_half_width=h.window_half_width,
            dt=cfg.numerics.dt,
            n_steps=h.n_steps,
            rng_seed=cfg.numerics.seed,
            proposal_mode=h.proposal_mode,
            initial_n=h.initial_n,
            coupling=h.coupling,
            channels=channels,
            hbar=h.hbar,
        )
    except GclindError as exc:
        raise ValidationFailure(f"hierarchy: {exc}") from exc


def build_observables(cfg: SampleConfig, hconfig: hier.HierarchyConfig) -> list[hier.Observable]:
    out = []
    for spec in cfg.observables:
        if spec.kind == "number":
            out.append(hier.number_observable(hconfig, spec.name))
        elif spec.kind == "identity":
            out.append(hier.identity_observable(hconfig, spec.name))
        else:
            window = list(hconfig.window)
            if len(spec.operators) != len(window):
                raise ValidationFailure(
                    f"observable {spec.name!r}: {len(spec.operators)} operators given "
                    f"for a window of {len(window)} sectors"
                )
            per_sector = {}
            for n, text in zip(window, spec.operators):
                a = build_operator(text, f"observable {spec.name!r} sector {n}")
                want = hconfig.gc_spec.sector_dims[n]
                if a.shape[0] != want:
                    raise ValidationFailure(
                        f"observable {spec.name!r}: sector {n} operator has dimension "
                        f"{a.shape[0]}, sector dimension is {want}"
                    )
                per_sector[n] = a
            out.append(hier.Observable(name=spec.name, per_sector=per_sector))
    return out
