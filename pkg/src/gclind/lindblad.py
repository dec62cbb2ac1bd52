"""Lindblad generators, time propagation, steady states, and equilibrium checks.

The right-hand side implemented here is

    d rho / dt = -(i/hbar) [H + c^2 H_ren, rho]
                 + c^2 sum_j rate_j (L_j rho L_j^+ - 1/2 {L_j^+ L_j, rho})

with a dimensionless coupling ``c``.  The per-sector variant replaces ``H``
by the effective Hamiltonian ``H_N - mu N Id`` so that the non-normalized
grand-canonical sector states are stationary when the dissipative coupling
vanishes.

Vectorization is column-stacking throughout: ``vec(rho)[i + d j] = rho[i, j]``,
hence ``vec(A rho B) = (B^T kron A) vec(rho)``.  The same convention is used
by the Liouvillian matrix, the steady-state solver, and the propagator, so
residuals computed in different modules agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import operators as op
from .errors import (
    DimensionError,
    NullSpaceError,
    PropagationError,
    ValidationFailure,
)
from .gibbs import bose_occupation


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class JumpChannel:
    """A jump operator together with its nonnegative damping rate."""

    operator: np.ndarray
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "operator", _frozen(op.as_operator(self.operator, "jump operator")))
        if self.rate < 0:
            raise ValidationFailure(f"damping rate must be >= 0, got {self.rate}")

    @property
    def dim(self) -> int:
        return self.operator.shape[0]


@dataclass(frozen=True)
class LindbladModel:
    """System Hamiltonian, optional level-shift term, coupling, and channels.

    ``h_ren`` must commute with ``h_sys`` (it only shifts levels); a
    non-commuting pair is rejected at construction.
    """

    h_sys: np.ndarray
    h_ren: np.ndarray | None = None
    coupling: float = 1.0
    channels: tuple[JumpChannel, ...] = ()
    hbar: float = 1.0

    def __post_init__(self):
        h = op.require_hermitian(self.h_sys, name="h_sys")
        object.__setattr__(self, "h_sys", _frozen(h))
        if self.hbar <= 0:
            raise ValidationFailure(f"hbar must be positive, got {self.hbar}")
        if self.h_ren is not None:
            hr = op.require_hermitian(self.h_ren, name="h_ren")
            if hr.shape != h.shape:
                raise DimensionError("h_ren dimension differs from h_sys")
            bound = 1e-9 * op.max_norm(h) * op.max_norm(hr)
            defect = op.max_norm(h @ hr - hr @ h)
            if defect > bound:
                raise ValidationFailure(
                    f"h_ren must commute with h_sys: defect {defect:.3e} > {bound:.3e}"
                )
            object.__setattr__(self, "h_ren", _frozen(hr))
        chans = tuple(self.channels)
        for c in chans:
            if c.dim != h.shape[0]:
                raise DimensionError(
                    f"channel dimension {c.dim} differs from system dimension {h.shape[0]}"
                )
        object.__setattr__(self, "channels", chans)

    @property
    def dim(self) -> int:
        return self.h_sys.shape[0]

    def hamiltonian(self) -> np.ndarray:
        """Full nondissipative generator ``h_sys + coupling^2 h_ren``."""
        if self.h_ren is None:
            return np.array(self.h_sys)
        return self.h_sys + self.coupling**2 * self.h_ren


def dissipator_sum(channels: Sequence[JumpChannel], rho: np.ndarray) -> np.ndarray:
    """Bare jump-channel sum ``sum_j rate_j (L rho L^+ - 1/2 {L^+L, rho})``.

    Traceless for every input and Hermiticity-preserving for Hermitian input;
    no coupling prefactor is applied here.
    """
    rho = op.as_operator(rho, "rho")
    out = np.zeros_like(rho)
    for c in channels:
        if c.dim != rho.shape[0]:
            raise DimensionError(
                f"channel dimension {c.dim} differs from state dimension {rho.shape[0]}"
            )
        l = c.operator
        ld = l.conj().T
        ldl = ld @ l
        out += c.rate * (l @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def dissipator(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Dissipative part of the generator, including the coupling^2 prefactor."""
    return model.coupling**2 * dissipator_sum(model.channels, rho)


def lindblad_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Full generator applied to ``rho``; traceless and Hermiticity-preserving."""
    rho = op.as_operator(rho, "rho")
    if rho.shape[0] != model.dim:
        raise DimensionError(f"state dimension {rho.shape[0]} differs from model dimension {model.dim}")
    h = model.hamiltonian()
    out = (-1j / model.hbar) * (h @ rho - rho @ h)
    if model.channels:
        out = out + dissipator(model, rho)
    return out


def effective_hamiltonian(h_n: np.ndarray, mu: float, n: int) -> np.ndarray:
    """Sector Hamiltonian shifted by the particle-number term: ``H_N - mu n Id``."""
    if n < 0:
        raise ValueError(f"particle number must be >= 0, got {n}")
    h = op.require_hermitian(h_n, name="h_n")
    return h - mu * n * np.eye(h.shape[0], dtype=complex)


def modified_model(
    h_n: np.ndarray,
    mu: float,
    n: int,
    channels: Sequence[JumpChannel] = (),
    coupling: float = 0.0,
    h_ren: np.ndarray | None = None,
    hbar: float = 1.0,
) -> LindbladModel:
    """Per-sector model with the effective Hamiltonian as generator."""
    return LindbladModel(
        h_sys=effective_hamiltonian(h_n, mu, n),
        h_ren=h_ren,
        coupling=coupling,
        channels=tuple(channels),
        hbar=hbar,
    )


def modified_rhs(
    h_n: np.ndarray,
    mu: float,
    n: int,
    rho: np.ndarray,
    channels: Sequence[JumpChannel] = (),
    coupling: float = 0.0,
    h_ren: np.ndarray | None = None,
    hbar: float = 1.0,
) -> np.ndarray:
    """Per-sector generator; reduces to ``-(i/hbar)[H_N - mu n Id, rho]`` at zero coupling."""
    return lindblad_rhs(modified_model(h_n, mu, n, channels, coupling, h_ren, hbar), rho)


@dataclass(frozen=True)
class TwoLevelBathParams:
    """Two-level system coupled to a bosonic thermal reservoir."""

    omega0: float
    beta: float
    gamma0: float
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("omega0", "beta", "gamma0", "hbar"):
            if getattr(self, name) <= 0:
                raise ValidationFailure(f"{name} must be strictly positive")


def two_level_hamiltonian(omega0: float, hbar: float = 1.0) -> np.ndarray:
    """Splitting Hamiltonian ``(hbar omega0 / 2) diag(1, -1)``, upper level first."""
    return 0.5 * hbar * omega0 * op.SIGMA_Z


def two_level_thermal_channels(p: TwoLevelBathParams) -> list[JumpChannel]:
    """Thermal decay and excitation channels of a two-level system.

    Decay at rate ``gamma0 (nbar + 1)`` and excitation at rate ``gamma0 nbar``
    with ``nbar`` the mean bosonic occupation at the level splitting; the
    resulting stationary state is the canonical Gibbs state of the splitting
    Hamiltonian at the reservoir temperature.
    """
    nbar = bose_occupation(p.beta, p.omega0, p.hbar)
    return [
        JumpChannel(op.SIGMA_MINUS, p.gamma0 * (nbar + 1.0)),
        JumpChannel(op.SIGMA_PLUS, p.gamma0 * nbar),
    ]


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v, dtype=complex).reshape((dim, dim), order="F")


def liouvillian_matrix(model: LindbladModel) -> np.ndarray:
    """Matrix form of the generator under column-stacking vectorization.

    Satisfies ``vec(lindblad_rhs(model, rho)) = L @ vec(rho)`` for every rho.
    """
    d = model.dim
    if d * d > op.MAX_DIM:
        raise DimensionError(f"superoperator dimension {d * d} exceeds MAX_DIM={op.MAX_DIM}")
    eye = np.eye(d, dtype=complex)
    h = model.hamiltonian()
    lmat = (-1j / model.hbar) * (np.kron(eye, h) - np.kron(h.T, eye))
    c2 = model.coupling**2
    for ch in model.channels:
        l = ch.operator
        ldl = l.conj().T @ l
        lmat += c2 * ch.rate * (
            np.kron(l.conj(), l)
            - 0.5 * np.kron(eye, ldl)
            - 0.5 * np.kron(ldl.T, eye)
        )
    return lmat


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], rho: np.ndarray, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of an autonomous system."""
    k1 = rhs(rho)
    k2 = rhs(rho + 0.5 * dt * k1)
    k3 = rhs(rho + 0.5 * dt * k2)
    k4 = rhs(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_matrix(lmat: np.ndarray, dt: float) -> np.ndarray:
    """One-step update matrix of classical RK4 for the linear system ``v' = L v``.

    For an autonomous linear right-hand side the four-stage scheme collapses
    to the degree-4 Taylor polynomial ``I + h L + ... + (h L)^4 / 24``, so
    applying this matrix reproduces :func:`rk4_step` exactly up to roundoff
    while costing a single matrix-vector product per step.
    """
    n = lmat.shape[0]
    out = np.eye(n, dtype=complex)
    term = np.eye(n, dtype=complex)
    for k in (1, 2, 3, 4):
        term = (dt / k) * (lmat @ term)
        out = out + term
    return out


@dataclass(frozen=True)
class Trajectory:
    """Stored states of one propagation run; ``dt`` is the step actually used."""

    times: np.ndarray
    states: tuple[np.ndarray, ...]
    dt: float

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


#: Above this system dimension the propagator falls back to the four-stage
#: form instead of building the d^2 x d^2 one-step matrix.
STEP_MATRIX_MAX_DIM = 32


def propagate(
    model: LindbladModel,
    rho0: np.ndarray,
    t_span: tuple[float, float],
    dt: float,
    store_every: int = 1,
    trace_tol: float = 1e-9,
    state_tol: float = 1e-7,
) -> Trajectory:
    """Fixed-step RK4 integration of the Lindblad right-hand side.

    The number of steps is ``round((t1 - t0) / dt)`` and the step is adjusted
    to land exactly on ``t1``; the adjusted value is recorded on the returned
    trajectory.  Every stored state must pass the density invariants at the
    relaxed tolerance ``state_tol`` and keep its trace within ``trace_tol`` of
    the initial trace.  A violation aborts with a ``PropagationError`` that
    carries the last state that still passed all checks.

    Stored entries are ``(times[k], states[k])`` with the initial state first.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if dt <= 0:
        raise ValidationFailure(f"dt must be positive, got {dt}")
    if t1 <= t0:
        raise ValidationFailure(f"t_span must be increasing, got ({t0}, {t1})")
    if store_every < 1:
        raise ValidationFailure("store_every must be >= 1")
    rho = op.validate_density(rho0)
    if rho.shape[0] != model.dim:
        raise DimensionError("initial state dimension differs from model dimension")
    span = t1 - t0
    n_steps = max(1, int(round(span / dt)))
    dt_eff = span / n_steps

    d = model.dim
    use_matrix = d <= STEP_MATRIX_MAX_DIM
    times = [t0]
    states = [rho]
    # a diverging run overflows before the state checks catch it; keep the
    # PropagationError as the single signal instead of numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        if use_matrix:
            step = rk4_step_matrix(liouvillian_matrix(model), dt_eff)
            state_vec = vec(rho)
            for k in range(1, n_steps + 1):
                state_vec = step @ state_vec
                if k % store_every == 0 or k == n_steps:
                    times.append(t0 + k * dt_eff)
                    states.append(unvec(state_vec, d))
        else:
            current = rho
            for k in range(1, n_steps + 1):
                current = rk4_step(lambda r: lindblad_rhs(model, r), current, dt_eff)
                if k % store_every == 0 or k == n_steps:
                    times.append(t0 + k * dt_eff)
                    states.append(current)
        _check_stored_states(times, states, trace_tol, state_tol)
    return Trajectory(times=np.array(times), states=tuple(states), dt=dt_eff)


def _check_stored_states(times, states, trace_tol: float, state_tol: float,
                         chunk: int = 4096) -> None:
    """Enforce the density invariants and trace conservation on stored states.

    Same checks as :func:`gclind.operators.validate_density` at tolerance
    ``state_tol``, evaluated in stacked batches.  On the first violating state
    a ``PropagationError`` reports the last state that still passed.
    """
    trace0 = float(np.trace(states[0]).real)
    for start in range(0, len(states), chunk):
        arr = np.stack(states[start : start + chunk])
        arr_dag = arr.conj().transpose(0, 2, 1)
        finite = np.isfinite(arr.real).all(axis=(1, 2)) & np.isfinite(arr.imag).all(axis=(1, 2))
        # eigvalsh rejects non-finite input; mask those states, they fail anyway
        sym = np.where(finite[:, None, None], 0.5 * (arr + arr_dag), 0.0)
        herm = np.max(np.abs(np.where(finite[:, None, None], arr - arr_dag, 0.0)), axis=(1, 2))
        traces = np.einsum("kii->k", np.where(finite[:, None, None], arr, 0.0))
        min_eigs = np.linalg.eigvalsh(sym)[:, 0]
        scale = np.max(np.abs(sym), axis=(1, 2))
        bound = state_tol * np.maximum(1.0, scale)
        bad = (
            ~finite
            | (herm > bound)
            | (np.abs(traces.imag) > bound)
            | (min_eigs < -bound)
            | (np.abs(traces.real - trace0) > trace_tol)
        )
        if bad.any():
            i = start + int(np.argmax(bad))
            j = i - start
            last = max(i - 1, 0)
            problems = []
            if not finite[j]:
                problems.append("non-finite entries")
            if herm[j] > bound[j]:
                problems.append(f"hermiticity defect {herm[j]:.3e}")
            if abs(traces[j].imag) > bound[j]:
                problems.append(f"imaginary trace {traces[j].imag:.3e}")
            if min_eigs[j] < -bound[j]:
                problems.append(f"negative eigenvalue {min_eigs[j]:.3e}")
            if abs(traces[j].real - trace0) > trace_tol:
                problems.append(
                    f"trace drift {abs(traces[j].real - trace0):.3e} > {trace_tol:.1e}"
                )
            raise PropagationError(
                f"state checks failed at t={times[i]:.6g}: " + "; ".join(problems),
                time=times[last],
                state=states[last],
                diagnostics=op.DensityDiagnostics(
                    hermiticity_defect=float(herm[j]),
                    min_eigenvalue=float(min_eigs[j]),
                    trace_real=float(traces[j].real),
                    trace_imag=float(traces[j].imag),
                    scale=float(scale[j]),
                ),
            )


def steady_states(
    model: LindbladModel,
    null_cutoff: float = 1e-10,
    residual_tol: float = 1e-9,
) -> list[np.ndarray]:
    """Stationary density operators from the Liouvillian null space.

    Singular vectors with singular value below ``null_cutoff * s_max`` span
    the numerical null space.  Their Hermitian components are orthonormalized,
    each is projected onto the positive cone and normalized to unit trace, and
    only states whose right-hand side is below ``residual_tol`` in max norm
    are returned.  Trace preservation guarantees at least one steady state, so
    an empty result is reported as a numerical failure.
    """
    lmat = liouvillian_matrix(model)
    _, svals, vh = np.linalg.svd(lmat)
    s_max = svals[0] if svals.size else 0.0
    cutoff = null_cutoff * max(s_max, 1.0)
    null_vecs = [vh[i].conj() for i in range(len(svals)) if svals[i] <= cutoff]
    if not null_vecs:
        raise NullSpaceError(
            f"no singular value below {cutoff:.3e}; trace preservation guarantees "
            "a null vector, so the solve failed numerically"
        )
    d = model.dim

    # Real-linear basis of the Hermitian part of the null space.
    basis: list[np.ndarray] = []
    for v in null_vecs:
        x = unvec(v, d)
        for cand in (0.5 * (x + x.conj().T), 0.5j * (x - x.conj().T)):
            for b in basis:
                cand = cand - np.trace(b.conj().T @ cand).real * b
            nrm = float(np.sqrt(np.trace(cand.conj().T @ cand).real))
            if nrm > 1e-12:
                basis.append(cand / nrm)

    states = []
    for b in basis:
        if np.trace(b).real < 0:
            b = -b
        w, v = np.linalg.eigh(b)
        pos = (v * np.clip(w, 0.0, None)) @ v.conj().T
        tr = float(np.trace(pos).real)
        if tr <= 1e-12:
            continue
        cand = 0.5 * (pos + pos.conj().T) / tr
        if op.max_norm(lindblad_rhs(model, cand)) <= residual_tol:
            states.append(cand)
    if not states:
        raise NullSpaceError(
            "null vectors found but none projected to a stationary density operator"
        )
    return states


def stationarity_residual(channels: Sequence[JumpChannel], k_op: np.ndarray) -> float:
    """Max norm of the bare channel sum applied to a reference positive operator."""
    return op.max_norm(dissipator_sum(channels, k_op))


@dataclass(frozen=True)
class ChannelConditionRow:
    index: int
    normality_defect: float
    commutator_defect: float
    adjoint_commutator_defect: float

    def worst(self) -> float:
        return max(self.normality_defect, self.commutator_defect, self.adjoint_commutator_defect)


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of one equilibrium-condition check against a reference operator."""

    kind: str
    passed: bool
    tolerance: float
    residual: float
    stationarity: float
    channels: tuple[ChannelConditionRow, ...] = ()
    group_residuals: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "passed": self.passed,
            "tolerance": self.tolerance,
            "residual": self.residual,
            "stationarity_residual": self.stationarity,
        }
        if self.channels:
            out["channels"] = [
                {
                    "index": row.index,
                    "normality_defect": row.normality_defect,
                    "commutator_defect": row.commutator_defect,
                    "adjoint_commutator_defect": row.adjoint_commutator_defect,
                }
                for row in self.channels
            ]
        if self.group_residuals is not None:
            out["group_residuals"] = list(self.group_residuals)
        return out


def check_equilibrium_condition(
    kind: str,
    channels: Sequence[JumpChannel],
    k_op: np.ndarray,
    partition: tuple[Sequence[int], Sequence[int]] | None = None,
    f_op: np.ndarray | None = None,
    hbar: float = 1.0,
    tol: float = 1e-9,
) -> ConditionReport:
    """Check one of the three ways the channel sum can vanish on ``k_op``.

    Kind ``A``: every jump operator is normal and commutes (along with its
    adjoint) with ``k_op``.  Kind ``B``: the channel set splits into two groups
    whose contributions cancel; ``partition`` must list the two index groups,
    disjoint and covering.  Kind ``C``: the channel sum equals the commutator
    term ``(i/hbar) [f_op, k_op]``.
    """
    k_op = op.as_operator(k_op, "reference operator")
    channels = tuple(channels)
    for c in channels:
        if c.dim != k_op.shape[0]:
            raise DimensionError("channel dimension differs from reference operator")
    stationarity = stationarity_residual(channels, k_op)

    if kind == "A":
        rows = []
        for i, c in enumerate(channels):
            l = c.operator
            ld = l.conj().T
            rows.append(
                ChannelConditionRow(
                    index=i,
                    normality_defect=op.max_norm(ld @ l - l @ ld),
                    commutator_defect=op.max_norm(l @ k_op - k_op @ l),
                    adjoint_commutator_defect=op.max_norm(ld @ k_op - k_op @ ld),
                )
            )
        worst = max((r.worst() for r in rows), default=0.0)
        return ConditionReport(
            kind="A",
            passed=worst <= tol,
            tolerance=tol,
            residual=worst,
            stationarity=stationarity,
            channels=tuple(rows),
        )

    if kind == "B":
        if partition is None:
            raise ValidationFailure("condition B requires a two-group channel partition")
        g1, g2 = [list(g) for g in partition]
        seen = sorted(g1 + g2)
        if seen != list(range(len(channels))):
            raise ValidationFailure(
                f"partition {partition} must cover channel indices 0..{len(channels) - 1} "
                "exactly once"
            )
        d1 = dissipator_sum([channels[i] for i in g1], k_op)
        d2 = dissipator_sum([channels[i] for i in g2], k_op)
        residual = op.max_norm(d1 + d2)
        return ConditionReport(
            kind="B",
            passed=residual <= tol,
            tolerance=tol,
            residual=residual,
            stationarity=stationarity,
            group_residuals=(op.max_norm(d1), op.max_norm(d2)),
        )

    if kind == "C":
        if f_op is None:
            raise ValidationFailure("condition C requires the coupling-function operator")
        f_op = op.as_operator(f_op, "f")
        if f_op.shape != k_op.shape:
            raise DimensionError("f dimension differs from reference operator")
        total = dissipator_sum(channels, k_op)
        residual = op.max_norm(total - (1j / hbar) * (f_op @ k_op - k_op @ f_op))
        return ConditionReport(
            kind="C",
            passed=residual <= tol,
            tolerance=tol,
            residual=residual,
            stationarity=stationarity,
        )

    raise ValidationFailure(f"unknown condition kind {kind!r}; expected A, B, or C")


@dataclass(frozen=True)
class InteractionSpec:
    """System-reservoir coupling split into a number term and explicit factors."""

    terms: tuple[tuple[np.ndarray, np.ndarray], ...]
    mu: float
    n_value: int
    dissipative_coupling: float

    def __post_init__(self):
        checked = []
        for i, (s, r) in enumerate(self.terms):
            s = op.require_hermitian(s, name=f"system factor {i}")
            r = op.require_hermitian(r, name=f"reservoir factor {i}")
            checked.append((_frozen(s), _frozen(r)))
        if checked:
            ds = checked[0][0].shape[0]
            db = checked[0][1].shape[0]
            for i, (s, r) in enumerate(checked):
                if s.shape[0] != ds or r.shape[0] != db:
                    raise DimensionError(f"interaction term {i} has inconsistent dimensions")
        if self.n_value < 0:
            raise ValidationFailure("n_value must be >= 0")
        object.__setattr__(self, "terms", tuple(checked))


def build_total_hamiltonian(
    spec: InteractionSpec, h_n: np.ndarray, h_b: np.ndarray
) -> np.ndarray:
    """Composite Hamiltonian with the number term absorbed into the system part.

    ``(H_N - mu n Id_S) (x) Id_B + Id_S (x) H_B + c * sum_l S_l (x) R_l``
    with ``c`` the dissipative coupling; Hermitian by construction.
    """
    h_n = op.require_hermitian(h_n, name="h_n")
    h_b = op.require_hermitian(h_b, name="h_b")
    if spec.terms:
        if spec.terms[0][0].shape[0] != h_n.shape[0]:
            raise DimensionError("system interaction factors do not match h_n")
        if spec.terms[0][1].shape[0] != h_b.shape[0]:
            raise DimensionError("reservoir interaction factors do not match h_b")
    dim_s, dim_b = h_n.shape[0], h_b.shape[0]
    h_eff = effective_hamiltonian(h_n, spec.mu, spec.n_value)
    total = op.tensor_product(h_eff, op.identity(dim_b))
    total = total + op.tensor_product(op.identity(dim_s), h_b)
    for s, r in spec.terms:
        total = total + spec.dissipative_coupling * op.tensor_product(s, r)
    return total
