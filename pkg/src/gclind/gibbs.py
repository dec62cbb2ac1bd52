"""Canonical and grand-canonical equilibrium states over particle-number sectors.

A truncated family of sector Hamiltonians ``H_0 ... H_{n_max}`` together with
an inverse temperature ``beta`` and a chemical potential ``mu`` defines the
sector weights ``Q_N = tr exp(-beta (H_N - mu N))`` and the non-normalized
sector states ``exp(-beta (H_N - mu N)) / Q_total``.  All exponentials are
evaluated in log space and through the spectrum, so large ``beta`` or shifted
spectra do not overflow.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.special import logsumexp

from . import operators as op
from .errors import ValidationFailure


class TruncationWarning(UserWarning):
    """The retained sector family carries non-negligible tail weight."""


@dataclass(frozen=True)
class GrandCanonicalSpec:
    """Truncated grand-canonical ensemble description.

    ``sector_hamiltonians[N]`` is the Hamiltonian of the N-particle sector;
    the vacuum sector may be the 1x1 zero matrix.  ``tail_threshold`` sets the
    relative weight of the last sector above which a ``TruncationWarning`` is
    emitted (the truncation error is then observable, not silent).
    """

    beta: float
    mu: float
    sector_hamiltonians: tuple[np.ndarray, ...]
    tail_threshold: float = 1e-6

    def __post_init__(self):
        if self.beta <= 0:
            raise ValidationFailure(f"beta must be positive, got {self.beta}")
        hs = tuple(
            op.require_hermitian(h, name=f"sector Hamiltonian H_{n}")
            for n, h in enumerate(self.sector_hamiltonians)
        )
        if not hs:
            raise ValidationFailure("at least one sector Hamiltonian is required")
        object.__setattr__(self, "sector_hamiltonians", hs)

    @property
    def n_max(self) -> int:
        return len(self.sector_hamiltonians) - 1

    @property
    def sector_dims(self) -> tuple[int, ...]:
        return tuple(h.shape[0] for h in self.sector_hamiltonians)


def canonical_state(h: np.ndarray, beta: float) -> np.ndarray:
    """Normalized Gibbs state ``exp(-beta H) / tr exp(-beta H)``.

    Eigenvalues are shifted by their minimum before exponentiation, so the
    result is overflow-safe for any ``beta > 0``; the shift cancels in the
    normalization.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    w, v = op.hermitian_eigensystem(h)
    weights = np.exp(-beta * (w - w.min()))
    weights /= weights.sum()
    rho = (v * weights) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def _sector_eigs(spec: GrandCanonicalSpec, n: int):
    if not 0 <= n <= spec.n_max:
        raise ValueError(f"sector {n} outside truncation range [0, {spec.n_max}]")
    return op.hermitian_eigensystem(spec.sector_hamiltonians[n])


def log_sector_weight(spec: GrandCanonicalSpec, n: int) -> float:
    """log Q_N, evaluated stably from the sector spectrum."""
    w, _ = _sector_eigs(spec, n)
    return float(logsumexp(-spec.beta * (w - spec.mu * n)))


def sector_weight(spec: GrandCanonicalSpec, n: int) -> float:
    """Q_N = tr exp(-beta (H_N - mu N)); strictly positive."""
    return float(np.exp(log_sector_weight(spec, n)))


def sector_weights(spec: GrandCanonicalSpec) -> np.ndarray:
    return np.array([sector_weight(spec, n) for n in range(spec.n_max + 1)])


def _log_total_weight(spec: GrandCanonicalSpec) -> float:
    return float(logsumexp([log_sector_weight(spec, n) for n in range(spec.n_max + 1)]))


def _check_tail(spec: GrandCanonicalSpec, log_total: float) -> None:
    tail = np.exp(log_sector_weight(spec, spec.n_max) - log_total)
    if spec.n_max > 0 and tail > spec.tail_threshold:
        warnings.warn(
            f"last retained sector N={spec.n_max} carries relative weight "
            f"{tail:.3e} > {spec.tail_threshold:.1e}; consider raising n_max",
            TruncationWarning,
            stacklevel=3,
        )


def sector_state(spec: GrandCanonicalSpec, n: int) -> np.ndarray:
    """Non-normalized N-sector equilibrium state.

    ``exp(-beta (H_N - mu N)) / Q_total`` with ``Q_total`` summed over all
    retained sectors; its trace is the sector probability ``Q_N / Q_total``.
    """
    w, v = _sector_eigs(spec, n)
    log_total = _log_total_weight(spec)
    diag = np.exp(-spec.beta * (w - spec.mu * n) - log_total)
    rho = (v * diag) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def full_gc_state(spec: GrandCanonicalSpec) -> np.ndarray:
    """Direct sum of all sector states; trace 1 within roundoff."""
    _check_tail(spec, _log_total_weight(spec))
    return op.direct_sum([sector_state(spec, n) for n in range(spec.n_max + 1)])


@dataclass(frozen=True)
class GCStatistics:
    mean_n: float
    sector_probabilities: tuple[float, ...]


def gc_statistics(spec: GrandCanonicalSpec) -> GCStatistics:
    """Sector probabilities ``Q_N / Q_total`` and the mean particle number."""
    logs = np.array([log_sector_weight(spec, n) for n in range(spec.n_max + 1)])
    log_total = float(logsumexp(logs))
    _check_tail(spec, log_total)
    probs = np.exp(logs - log_total)
    mean = float(np.dot(np.arange(len(probs)), probs))
    return GCStatistics(mean_n=mean, sector_probabilities=tuple(float(p) for p in probs))


@dataclass(frozen=True)
class ReservoirEnergyModel:
    """Mean reservoir energy as a function of the removed particle count.

    ``mean_energy`` maps N (particles moved into the probe system) to the
    reservoir's mean energy with ``total_particles - N`` particles left,
    either as a table or a callable.  Probing is restricted to
    ``N <= max_probe_fraction * total_particles`` so the few-particle
    expansion underlying the chemical-potential extraction stays valid.
    """

    total_particles: int
    mean_energy: Mapping[int, float] | Callable[[int], float]
    max_probe_fraction: float = 0.01

    def __post_init__(self):
        if self.total_particles < 1:
            raise ValidationFailure("total_particles must be positive")
        if not 0 < self.max_probe_fraction <= 1:
            raise ValidationFailure("max_probe_fraction must lie in (0, 1]")

    @property
    def n_probe_max(self) -> int:
        return int(self.max_probe_fraction * self.total_particles)

    def energy(self, n: int) -> float:
        if n < 0:
            raise ValueError(f"removed-particle count must be >= 0, got {n}")
        if n > self.n_probe_max:
            raise ValueError(
                f"N={n} too close to total_particles={self.total_particles}: "
                f"probe limit is {self.n_probe_max}"
            )
        if callable(self.mean_energy):
            return float(self.mean_energy(n))
        try:
            return float(self.mean_energy[n])
        except KeyError as exc:
            raise ValueError(f"mean-energy table undefined at N={n}") from exc


def chemical_potential(model: ReservoirEnergyModel, n_star: int) -> float:
    """Chemical potential from the reservoir energy response.

    Central difference in the integer particle count with unit step:
    ``mu = -(E(n_star + 1) - E(n_star - 1)) / 2``.  Exact to float rounding
    for affine energy models and second-order accurate otherwise.
    """
    if n_star < 1:
        raise ValueError(f"n_star must be >= 1 for the central difference, got {n_star}")
    e_plus = model.energy(n_star + 1)
    e_minus = model.energy(n_star - 1)
    return -(e_plus - e_minus) / 2.0


def bose_occupation(beta: float, omega0: float, hbar: float = 1.0) -> float:
    """Mean occupation ``1 / (exp(beta * hbar * omega0) - 1)`` of a bosonic mode."""
    if beta <= 0 or omega0 <= 0 or hbar <= 0:
        raise ValueError("beta, omega0 and hbar must all be positive")
    return 1.0 / np.expm1(beta * hbar * omega0)
