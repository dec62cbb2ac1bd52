"""Sector hierarchy evolution and Metropolis sampling over particle number.

A window of particle-number sectors around an estimated mean is initialized
with the non-normalized equilibrium sector states (traces carry the
statistical weights, which the traceless generator conserves).  Time steps of
every sector alternate 1:1 with single-particle Metropolis jumps, producing a
chain over N from which observables are estimated.

Each chain visit contributes the trace-normalized sector expectation value;
the visit frequencies supply the statistical weighting, so with the symmetric
proposal rule the estimator converges to the weight-conditional average over
the window.  The raw visited weights are still reported alongside each chain
step.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import operators as op
from .errors import NumericalFailure, ValidationFailure
from .gibbs import GrandCanonicalSpec, sector_state
from .lindblad import (
    JumpChannel,
    LindbladModel,
    lindblad_rhs,
    liouvillian_matrix,
    modified_model,
    rk4_step,
    rk4_step_matrix,
    unvec,
    vec,
    STEP_MATRIX_MAX_DIM,
)

PROPOSAL_MODES = ("paper_literal", "symmetric")


class ChainWarning(UserWarning):
    """A degenerate chain event occurred (zero-weight sector, forced stay)."""


def fock_number_operator(sector_dims: Sequence[int]) -> np.ndarray:
    """Direct sum of ``N * Id(dim_N)``; multiplies sector N by N."""
    if not sector_dims:
        raise ValidationFailure("sector_dims must be nonempty")
    return op.direct_sum([n * np.eye(d, dtype=complex) for n, d in enumerate(sector_dims)])


def second_quantized_hamiltonian(sector_hamiltonians: Sequence[np.ndarray]) -> np.ndarray:
    """Direct-sum lift of per-sector Hamiltonians; commutes with the number operator."""
    hs = [op.require_hermitian(h, name=f"H_{n}") for n, h in enumerate(sector_hamiltonians)]
    if not hs:
        raise ValidationFailure("sector Hamiltonian list must be nonempty")
    return op.direct_sum(hs)


@dataclass
class SectorState:
    """One particle-number sector: non-normalized state, trace = weight."""

    n: int
    rho: np.ndarray

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def weight(self) -> float:
        return float(np.trace(self.rho).real)


@dataclass(frozen=True)
class HierarchyConfig:
    """Window, per-sector dissipation, and chain parameters for one run."""

    gc_spec: GrandCanonicalSpec
    window_center: int
    window_half_width: int
    dt: float
    n_steps: int
    rng_seed: int = 0
    proposal_mode: str = "paper_literal"
    initial_n: int | None = None
    coupling: float = 0.0
    channels: Mapping[int, tuple[JumpChannel, ...]] = field(default_factory=dict)
    hbar: float = 1.0

    def __post_init__(self):
        lo, hi = self.window_bounds
        n_max = self.gc_spec.n_max
        if lo < 0 or hi > n_max:
            raise ValidationFailure(
                f"window [{lo}, {hi}] lies outside the sector range [0, {n_max}]"
            )
        if self.initial_n is None:
            object.__setattr__(self, "initial_n", self.window_center)
        if not lo <= self.initial_n <= hi:
            raise ValidationFailure(
                f"initial_n={self.initial_n} outside window [{lo}, {hi}]"
            )
        if self.dt <= 0:
            raise ValidationFailure(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValidationFailure(f"n_steps must be >= 1, got {self.n_steps}")
        if self.proposal_mode not in PROPOSAL_MODES:
            raise ValidationFailure(
                f"proposal_mode must be one of {PROPOSAL_MODES}, got {self.proposal_mode!r}"
            )
        object.__setattr__(
            self, "channels", {int(k): tuple(v) for k, v in dict(self.channels).items()}
        )

    @property
    def window_bounds(self) -> tuple[int, int]:
        return (
            self.window_center - self.window_half_width,
            self.window_center + self.window_half_width,
        )

    @property
    def window(self) -> range:
        lo, hi = self.window_bounds
        return range(lo, hi + 1)


def init_hierarchy(
    config: HierarchyConfig,
    states: Mapping[int, np.ndarray] | None = None,
) -> dict[int, SectorState]:
    """Equilibrium-initialized window, or user-supplied states with explicit weights.

    By default each window sector starts in its non-normalized grand-canonical
    state, so its trace equals the sector probability.  Passing ``states``
    overrides individual sectors; the supplied traces then act as the
    statistical weights (this is the re-weighting hook).
    """
    out: dict[int, SectorState] = {}
    for n in config.window:
        if states is not None and n in states:
            rho = op.validate_density(states[n])
        else:
            rho = sector_state(config.gc_spec, n)
        out[n] = SectorState(n=n, rho=rho)
    return out


class SectorEvolver:
    """One fixed-dt update of a single sector under its effective generator.

    For small sectors the classical-RK4 one-step matrix is precomputed once;
    larger sectors fall back to the four-stage update.  Either way the update
    is a fixed linear map, so repeated runs are bit-identical.
    """

    def __init__(self, model: LindbladModel, dt: float):
        self.model = model
        self.dt = dt
        if model.dim <= STEP_MATRIX_MAX_DIM:
            self._step_matrix = rk4_step_matrix(liouvillian_matrix(model), dt)
        else:
            self._step_matrix = None

    def step(self, rho: np.ndarray) -> np.ndarray:
        if self._step_matrix is not None:
            return unvec(self._step_matrix @ vec(rho), self.model.dim)
        return rk4_step(lambda r: lindblad_rhs(self.model, r), rho, self.dt)


def build_evolvers(config: HierarchyConfig) -> dict[int, SectorEvolver]:
    """Per-sector evolvers with sector-specific effective Hamiltonian and channels."""
    spec = config.gc_spec
    out = {}
    for n in config.window:
        model = modified_model(
            spec.sector_hamiltonians[n],
            spec.mu,
            n,
            channels=config.channels.get(n, ()),
            coupling=config.coupling,
            hbar=config.hbar,
        )
        out[n] = SectorEvolver(model, config.dt)
    return out


def evolve_window(
    hierarchy: dict[int, SectorState],
    evolvers: Mapping[int, SectorEvolver],
    weight_tol: float = 1e-10,
) -> dict[int, SectorState]:
    """Advance every window sector by one time step.

    Sector updates are independent of each other; the sequential loop is just
    the desk-scale schedule.  Each sector's trace must stay within
    ``weight_tol`` of its pre-step value (the generator is traceless), else
    the run aborts naming the sector.
    """
    for n, sector in hierarchy.items():
        before = sector.weight
        sector.rho = evolvers[n].step(sector.rho)
        drift = abs(sector.weight - before)
        # negated comparison so a NaN weight also aborts
        if not drift <= weight_tol * max(1.0, abs(before)):
            raise NumericalFailure(
                f"sector {n}: weight drifted by {drift:.3e} in one step "
                f"(tolerance {weight_tol:.1e})"
            )
    return hierarchy


@dataclass(frozen=True)
class MetropolisOutcome:
    n_next: int
    accepted: bool
    at_boundary: bool = False
    degenerate: bool = False


def metropolis_step(
    hierarchy: Mapping[int, SectorState],
    n_current: int,
    rng: np.random.Generator,
    mode: str = "paper_literal",
    window: tuple[int, int] | None = None,
) -> MetropolisOutcome:
    """One single-particle jump attempt.

    ``paper_literal`` compares the current weight against both neighbors,
    takes the direction of the smaller weight ratio (ties prefer +1), and
    accepts when a uniform draw falls below the inverse ratio.  ``symmetric``
    proposes +1 or -1 with equal probability and applies the usual acceptance
    rule ``min(1, w_proposed / w_current)``; proposals leaving the window are
    rejected.  A zero-weight current sector is degenerate: the step is
    rejected and a warning recorded.
    """
    if window is None:
        window = (min(hierarchy), max(hierarchy))
    lo, hi = window
    if not lo <= n_current <= hi:
        raise ValueError(f"current sector {n_current} outside window [{lo}, {hi}]")

    w_cur = hierarchy[n_current].weight
    if w_cur <= 0.0:
        warnings.warn(
            f"sector {n_current} has nonpositive weight {w_cur:.3e}; jump rejected",
            ChainWarning,
            stacklevel=2,
        )
        return MetropolisOutcome(n_current, accepted=False, degenerate=True)

    def weight(n: int) -> float | None:
        if n < lo or n > hi or n not in hierarchy:
            return None
        return hierarchy[n].weight

    if mode == "paper_literal":
        at_boundary = weight(n_current + 1) is None or weight(n_current - 1) is None

        def ratio(n: int) -> float:
            w = weight(n)
            if w is None or w <= 0.0:
                return np.inf
            return w_cur / w

        r_plus = ratio(n_current + 1)
        r_minus = ratio(n_current - 1)
        if r_plus <= r_minus:
            r_star, direction = r_plus, +1
        else:
            r_star, direction = r_minus, -1
        accept_prob = 0.0 if not np.isfinite(r_star) else min(1.0, 1.0 / r_star)
        u = rng.random()
        if u < accept_prob:
            return MetropolisOutcome(n_current + direction, accepted=True, at_boundary=at_boundary)
        return MetropolisOutcome(n_current, accepted=False, at_boundary=at_boundary)

    if mode == "symmetric":
        direction = 1 if rng.random() < 0.5 else -1
        target = n_current + direction
        w_target = weight(target)
        if w_target is None:
            rng.random()  # symmetric mode always consumes two draws per step
            return MetropolisOutcome(n_current, accepted=False, at_boundary=True)
        accept_prob = min(1.0, w_target / w_cur)
        if rng.random() < accept_prob:
            return MetropolisOutcome(target, accepted=True)
        return MetropolisOutcome(n_current, accepted=False)

    raise ValidationFailure(f"unknown proposal mode {mode!r}")


@dataclass(frozen=True)
class ChainStep:
    index: int
    time: float
    n: int
    accepted: bool
    weight: float


@dataclass(frozen=True)
class Chain:
    """Recorded Metropolis time series over particle number."""

    steps: tuple[ChainStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def visited(self) -> Counter:
        """Multiset of visited sectors, one count per chain step."""
        return Counter(s.n for s in self.steps)

    @property
    def acceptance_rate(self) -> float:
        if not self.steps:
            return 0.0
        return sum(s.accepted for s in self.steps) / len(self.steps)


@dataclass(frozen=True)
class Observable:
    """Named per-sector observable; each sector gets a matching-dimension matrix."""

    name: str
    per_sector: Mapping[int, np.ndarray]

    def matrix(self, n: int) -> np.ndarray:
        try:
            return self.per_sector[n]
        except KeyError as exc:
            raise ValidationFailure(f"observable {self.name!r} undefined on sector {n}") from exc


def number_observable(config: HierarchyConfig, name: str = "particle_number") -> Observable:
    dims = config.gc_spec.sector_dims
    return Observable(
        name=name,
        per_sector={n: n * np.eye(dims[n], dtype=complex) for n in config.window},
    )


def identity_observable(config: HierarchyConfig, name: str = "identity") -> Observable:
    dims = config.gc_spec.sector_dims
    return Observable(
        name=name,
        per_sector={n: np.eye(dims[n], dtype=complex) for n in config.window},
    )


def _normalized_expectation(sector: SectorState, a: np.ndarray) -> complex:
    w = sector.weight
    if w <= 0.0:
        return 0.0 + 0.0j
    return complex(np.einsum("ij,ji->", sector.rho, a)) / w


def _finalize_estimate(name: str, samples: np.ndarray) -> "ObservableEstimate":
    mean = complex(samples.mean())
    if abs(mean.imag) > 1e-10 * max(1.0, abs(mean.real)):
        raise NumericalFailure(
            f"observable {name!r}: estimate has imaginary part {mean.imag:.3e}; "
            "only Hermitian observables have real chain averages"
        )
    real = samples.real
    if len(real) > 1:
        std_error = float(real.std(ddof=1) / np.sqrt(len(real)))
    else:
        std_error = 0.0
    return ObservableEstimate(
        name=name, estimate=float(mean.real), std_error=std_error, n_samples=len(real)
    )


@dataclass(frozen=True)
class ObservableEstimate:
    name: str
    estimate: float
    std_error: float
    n_samples: int


def estimate_observable(
    chain: Chain,
    hierarchy: Mapping[int, SectorState],
    observable: Observable,
) -> float:
    """Chain average of the trace-normalized sector expectations.

    Uses the hierarchy states as supplied, which matches the in-run estimate
    whenever the per-sector expectations are stationary (always the case at
    zero dissipative coupling with equilibrium initialization).
    """
    if not chain.steps:
        raise ValidationFailure("chain is empty")
    samples = np.array(
        [
            _normalized_expectation(hierarchy[s.n], observable.matrix(s.n))
            for s in chain.steps
        ]
    )
    return _finalize_estimate(observable.name, samples).estimate


@dataclass(frozen=True)
class ProtocolResult:
    chain: Chain
    estimates: tuple[ObservableEstimate, ...]
    boundary_events: int
    degenerate_steps: int

    @property
    def acceptance_rate(self) -> float:
        return self.chain.acceptance_rate


def run_protocol(
    config: HierarchyConfig,
    observables: Sequence[Observable] = (),
    states: Mapping[int, np.ndarray] | None = None,
    t0: float = 0.0,
) -> ProtocolResult:
    """Alternate window evolution and Metropolis jumps for ``n_steps`` steps.

    Every step advances all window sectors by ``dt`` and then attempts one
    single-particle jump; observable contributions are accumulated at the
    visited sector and time.  The result is a pure function of the config,
    the observables, and the seed.
    """
    hierarchy = init_hierarchy(config, states)
    evolvers = build_evolvers(config)
    rng = np.random.default_rng(config.rng_seed)
    window = config.window_bounds

    n_current = int(config.initial_n)
    steps: list[ChainStep] = []
    samples = {obs.name: np.empty(config.n_steps, dtype=complex) for obs in observables}
    boundary_events = 0
    degenerate = 0

    for k in range(1, config.n_steps + 1):
        evolve_window(hierarchy, evolvers)
        outcome = metropolis_step(
            hierarchy, n_current, rng, mode=config.proposal_mode, window=window
        )
        n_current = outcome.n_next
        boundary_events += outcome.at_boundary
        degenerate += outcome.degenerate
        t = t0 + k * config.dt
        sector = hierarchy[n_current]
        steps.append(
            ChainStep(index=k, time=t, n=n_current, accepted=outcome.accepted, weight=sector.weight)
        )
        for obs in observables:
            samples[obs.name][k - 1] = _normalized_expectation(sector, obs.matrix(n_current))

    estimates = tuple(_finalize_estimate(obs.name, samples[obs.name]) for obs in observables)
    return ProtocolResult(
        chain=Chain(steps=tuple(steps)),
        estimates=estimates,
        boundary_events=boundary_events,
        degenerate_steps=degenerate,
    )
