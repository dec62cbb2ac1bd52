"""Shared random-instance builders and independent oracles for the tests.

The matrix-exponential oracle is scipy's Pade scaling-and-squaring routine,
an algorithm independent of the package's eigendecomposition path, so the
two sides of every dual-route check stay independent.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm as expm_oracle  # noqa: F401  (re-exported)

from gclind.lindblad import JumpChannel


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (a + a.conj().T)


def random_density(rng: np.random.Generator, dim: int, trace: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return trace * rho / np.trace(rho).real


def random_operator(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))


def random_channels(rng: np.random.Generator, dim: int, count: int) -> list[JumpChannel]:
    return [
        JumpChannel(random_operator(rng, dim, 0.7), float(rng.uniform(0.1, 1.0)))
        for _ in range(count)
    ]


def von_neumann_rhs(h: np.ndarray, rho: np.ndarray, hbar: float = 1.0) -> np.ndarray:
    return (-1j / hbar) * (h @ rho - rho @ h)
