"""Dense complex operator algebra used throughout the package.

All operators are square ``numpy.ndarray`` matrices of ``complex128`` in
row-major layout.  Composite spaces order the system factor first and the
reservoir factor second, both here and in every module built on top.

Basis convention for the built-in two-level matrices: index 0 is the upper
level and index 1 the lower level, so ``SIGMA_Z = diag(1, -1)``,
``SIGMA_PLUS`` raises into index 0 and ``SIGMA_MINUS`` lowers out of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, EigendecompositionError, InvalidDensityError

#: Hard cap on matrix dimension; beyond this, dense storage is a mistake.
MAX_DIM = 4096

#: Default relative tolerance for hermiticity / positivity / trace checks.
DEFAULT_TOL = 1e-9

SIGMA_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def as_operator(a, name: str = "operator") -> np.ndarray:
    """Coerce ``a`` to a square, finite complex matrix.

    Returns a fresh ``complex128`` array; raises ``DimensionError`` on
    non-square shapes or dimensions above ``MAX_DIM`` and ``ValueError``
    on non-finite entries.
    """
    arr = np.array(a, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise DimensionError(f"{name} must be at least 1x1")
    if arr.shape[0] > MAX_DIM:
        raise DimensionError(f"{name} dimension {arr.shape[0]} exceeds MAX_DIM={MAX_DIM}")
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def identity(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex)


def max_norm(a) -> float:
    """Entrywise max-absolute-value norm."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermiticity_defect(a) -> float:
    a = np.asarray(a, dtype=complex)
    return max_norm(a - a.conj().T)


def require_hermitian(a, tol: float = DEFAULT_TOL, name: str = "operator") -> np.ndarray:
    """Validate hermiticity to relative tolerance ``tol`` and return the matrix.

    The defect threshold is ``tol * max(1, ||a||_max)`` so the check stays
    meaningful for both tiny and large matrices.
    """
    arr = as_operator(a, name)
    defect = hermiticity_defect(arr)
    scale = max(1.0, max_norm(arr))
    if defect > tol * scale:
        raise ValueError(
            f"{name} is not Hermitian: defect {defect:.3e} exceeds {tol:.1e} * {scale:.3e}"
        )
    return arr


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the system factor first.

    ``(A (x) B)[(i_a, i_b), (j_a, j_b)] = A[i_a, j_a] * B[i_b, j_b]`` with the
    composite row index ``i_a * dim(B) + i_b``.
    """
    a = as_operator(a, "left factor")
    b = as_operator(b, "right factor")
    if a.shape[0] * b.shape[0] > MAX_DIM:
        raise DimensionError(
            f"tensor product dimension {a.shape[0] * b.shape[0]} exceeds MAX_DIM={MAX_DIM}"
        )
    return np.kron(a, b)


def direct_sum(blocks) -> np.ndarray:
    """Block-diagonal operator from an ordered, nonempty list of blocks.

    Off-block entries are exactly zero.
    """
    blocks = [as_operator(b, f"block {i}") for i, b in enumerate(blocks)]
    if not blocks:
        raise DimensionError("direct_sum requires at least one block")
    dims = [b.shape[0] for b in blocks]
    total = sum(dims)
    if total > MAX_DIM:
        raise DimensionError(f"direct sum dimension {total} exceeds MAX_DIM={MAX_DIM}")
    out = np.zeros((total, total), dtype=complex)
    at = 0
    for b, d in zip(blocks, dims):
        out[at : at + d, at : at + d] = b
        at += d
    return out


def block_slices(dims) -> list[slice]:
    """Slices locating each direct-sum block inside the composite matrix."""
    out, at = [], 0
    for d in dims:
        out.append(slice(at, at + d))
        at += d
    return out


def partial_trace_b(rho: np.ndarray, dim_s: int, dim_b: int) -> np.ndarray:
    """Trace out the second (reservoir) tensor factor.

    ``rho`` must act on a space of dimension ``dim_s * dim_b`` in the index
    order declared by :func:`tensor_product`.  Trace-preserving for all inputs.
    """
    rho = as_operator(rho, "rho")
    if rho.shape[0] != dim_s * dim_b:
        raise DimensionError(
            f"partial trace: dim {rho.shape[0]} != dim_s*dim_b = {dim_s}*{dim_b}"
        )
    r = rho.reshape(dim_s, dim_b, dim_s, dim_b)
    return np.einsum("ibjb->ij", r)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_operator(a, "A")
    b = as_operator(b, "B")
    if a.shape != b.shape:
        raise DimensionError(f"commutator dims {a.shape[0]} vs {b.shape[0]}")
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_operator(a, "A")
    b = as_operator(b, "B")
    if a.shape != b.shape:
        raise DimensionError(f"anticommutator dims {a.shape[0]} vs {b.shape[0]}")
    return a @ b + b @ a


def bracket(kind: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """AB - BA for ``kind="commutator"``, AB + BA for ``kind="anticommutator"``."""
    if kind == "commutator":
        return commutator(a, b)
    if kind == "anticommutator":
        return anticommutator(a, b)
    raise ValueError(f"unknown bracket kind {kind!r}")


def hermitian_eigensystem(h: np.ndarray, tol: float = DEFAULT_TOL):
    """Eigenvalues and eigenvectors of a (validated) Hermitian matrix."""
    h = require_hermitian(h, tol, "H")
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionError(f"eigendecomposition failed: {exc}") from exc
    return w, v


def hermitian_function(h: np.ndarray, f: Callable[[np.ndarray], np.ndarray],
                       tol: float = DEFAULT_TOL) -> np.ndarray:
    """Apply a real scalar function to the spectrum of a Hermitian matrix.

    ``f`` is evaluated on the eigenvalue vector; the result is re-symmetrized
    so it is Hermitian to machine precision.  This is the single authoritative
    code path for all Gibbs exponentials in the package.
    """
    w, v = hermitian_eigensystem(h, tol)
    fw = np.asarray(f(w), dtype=float)
    out = (v * fw) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def interaction_picture(a: np.ndarray, h0: np.ndarray, t: float, hbar: float = 1.0) -> np.ndarray:
    """Similarity transform ``e^{i H0 t / hbar} A e^{-i H0 t / hbar}``.

    Preserves the spectrum and trace of ``a``.
    """
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    a = as_operator(a, "A")
    w, v = hermitian_eigensystem(h0)
    if a.shape != h0.shape:
        raise DimensionError(f"interaction_picture dims {a.shape[0]} vs {h0.shape[0]}")
    phases = np.exp(1j * w * t / hbar)
    u = (v * phases) @ v.conj().T
    return u @ a @ u.conj().T


@dataclass(frozen=True)
class DensityDiagnostics:
    """Invariant checks for a density-operator candidate."""

    hermiticity_defect: float
    min_eigenvalue: float
    trace_real: float
    trace_imag: float
    scale: float

    def violations(self, tol: float = DEFAULT_TOL) -> list[str]:
        bound = tol * max(1.0, self.scale)
        out = []
        if self.hermiticity_defect > bound:
            out.append(f"hermiticity defect {self.hermiticity_defect:.3e} > {bound:.1e}")
        if self.min_eigenvalue < -bound:
            out.append(f"negative eigenvalue {self.min_eigenvalue:.3e} < -{bound:.1e}")
        if abs(self.trace_imag) > bound:
            out.append(f"imaginary trace part {self.trace_imag:.3e} > {bound:.1e}")
        if self.trace_real < -bound:
            out.append(f"negative trace {self.trace_real:.3e}")
        return out

    def ok(self, tol: float = DEFAULT_TOL) -> bool:
        return not self.violations(tol)


def density_diagnostics(rho) -> DensityDiagnostics:
    rho = as_operator(rho, "rho")
    herm = hermiticity_defect(rho)
    sym = 0.5 * (rho + rho.conj().T)
    try:
        eigs = np.linalg.eigvalsh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigendecompositionError(f"eigendecomposition failed: {exc}") from exc
    tr = complex(np.trace(rho))
    return DensityDiagnostics(
        hermiticity_defect=herm,
        min_eigenvalue=float(eigs[0]),
        trace_real=tr.real,
        trace_imag=tr.imag,
        scale=max_norm(rho),
    )


def validate_density(rho, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Check the density-operator invariants and return the matrix unchanged.

    Hermiticity, positivity (eigenvalues above ``-tol * max(1, scale)``) and a
    real nonnegative trace are required; the trace itself need not be 1, since
    sector states carry their statistical weight in the trace.  On violation an
    ``InvalidDensityError`` is raised whose diagnostics record lists every
    failed invariant.
    """
    rho = as_operator(rho, "rho")
    diag = density_diagnostics(rho)
    bad = diag.violations(tol)
    if bad:
        raise InvalidDensityError("; ".join(bad), diagnostics=diag)
    return rho


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of the difference of two Hermitian matrices."""
    diff = as_operator(a) - as_operator(b)
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def dump_operator(a: np.ndarray) -> str:
    """Serialize an operator to the plain-text exchange format.

    First line is the dimension; the following ``dim**2`` lines hold the
    row-major entries as ``<re> <im>`` pairs written with ``repr``, so the
    round trip through :func:`load_operator` is exact at full float precision.
    """
    a = as_operator(a, "operator")
    lines = [str(a.shape[0])]
    for z in a.reshape(-1):
        lines.append(f"{float(z.real)!r} {float(z.imag)!r}")
    return "\n".join(lines) + "\n"


def load_operator(text: str) -> np.ndarray:
    """Parse the text format written by :func:`dump_operator`."""
    tokens = text.split()
    if not tokens:
        raise ValueError("empty operator record")
    try:
        dim = int(tokens[0])
    except ValueError as exc:
        raise ValueError(f"bad dimension field {tokens[0]!r}") from exc
    need = 1 + 2 * dim * dim
    if len(tokens) != need:
        raise ValueError(
            f"operator record for dim {dim} needs {need} tokens, got {len(tokens)}"
        )
    vals = np.array([float(t) for t in tokens[1:]], dtype=float)
    entries = vals[0::2] + 1j * vals[1::2]
    return as_operator(entries.reshape(dim, dim), "operator")
