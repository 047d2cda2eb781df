"""Dense complex matrix calculus: norms, positivity, blocks, amplification."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "Tolerance",
    "DEFAULT_TOL",
    "NotPsdError",
    "as_matrix",
    "adjoint",
    "hermitian_part",
    "is_hermitian",
    "op_norm",
    "lambda_min",
    "dist_to_psd",
    "psd_sqrt",
    "block",
    "amplify",
    "exp_i_hermitian",
    "unitary_log",
    "haar_unitary",
    "random_contraction",
    "random_hermitian",
    "matrix_to_json",
    "matrix_from_json",
    "save_matrix",
    "load_matrix",
]


class NotPsdError(ValueError):
    """A matrix required to be PSD has an eigenvalue below -eig_tol."""


@dataclass(frozen=True)
class Tolerance:
    """Absolute eigenvalue tolerance and relative norm tolerance."""

    eig_tol: float = 1e-10
    norm_rtol: float = 1e-10

    def __post_init__(self):
        for name in ("eig_tol", "norm_rtol"):
            value = getattr(self, name)
            if not 0.0 < value <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {value!r}")


DEFAULT_TOL = Tolerance()


def as_matrix(m) -> np.ndarray:
    """Coerce to a finite 2-D complex array; scalars become 1x1."""
    a = np.asarray(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a scalar or 2-D array, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"matrix must have at least one row and column, got {a.shape}")
    if not np.all(np.isfinite(a.real)) or not np.all(np.isfinite(a.imag)):
        raise ValueError("matrix has non-finite entries")
    return a


def adjoint(m) -> np.ndarray:
    return as_matrix(m).conj().T


def hermitian_part(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"hermitian part needs a square matrix, got {a.shape}")
    return (a + a.conj().T) / 2


def op_norm(m) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(as_matrix(m), 2))


def is_hermitian(m, tol: Tolerance | None = None) -> bool:
    a = as_matrix(m)
    tol = tol or DEFAULT_TOL
    return a.shape[0] == a.shape[1] and op_norm(a - a.conj().T) <= tol.eig_tol


def _require_hermitian(m, tol: Tolerance) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    if op_norm(a - a.conj().T) > tol.eig_tol:
        raise ValueError("matrix is not Hermitian within eig_tol")
    return (a + a.conj().T) / 2


def lambda_min(h, tol: Tolerance | None = None) -> float:
    """Smallest eigenvalue of the Hermitian part of an (almost) Hermitian matrix."""
    a = _require_hermitian(h, tol or DEFAULT_TOL)
    return float(np.linalg.eigvalsh(a)[0])


def dist_to_psd(h, tol: Tolerance | None = None) -> float:
    """Operator-norm distance from a Hermitian matrix to the PSD cone: max(0, -lambda_min)."""
    return max(0.0, -lambda_min(h, tol))


def psd_sqrt(h, tol: Tolerance | None = None) -> np.ndarray:
    """PSD square root; eigenvalues in [-eig_tol, 0) are clamped to 0."""
    tol = tol or DEFAULT_TOL
    a = _require_hermitian(h, tol)
    w, v = np.linalg.eigh(a)
    if w[0] < -tol.eig_tol:
        raise NotPsdError(f"smallest eigenvalue {w[0]:.3e} is below -eig_tol")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def block(grid) -> np.ndarray:
    """Assemble a block matrix from a 2-D grid of matrices (scalars become 1x1)."""
    rows = [[as_matrix(cell) for cell in row] for row in grid]
    if not rows or not rows[0]:
        raise ValueError("block grid must be non-empty")
    ncols = len(rows[0])
    if any(len(row) != ncols for row in rows):
        raise ValueError("block grid rows have unequal lengths")
    for i, row in enumerate(rows):
        heights = {cell.shape[0] for cell in row}
        if len(heights) != 1:
            raise ValueError(f"grid row {i} mixes row-counts {sorted(heights)}")
    for j in range(ncols):
        widths = {row[j].shape[1] for row in rows}
        if len(widths) != 1:
            raise ValueError(f"grid column {j} mixes column-counts {sorted(widths)}")
    return np.block(rows)


def amplify(m, n: int) -> np.ndarray:
    """Kronecker product M (x) I_n; preserves the operator norm."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"amplification count must be a positive integer, got {n!r}")
    return np.kron(as_matrix(m), np.eye(int(n)))


def exp_i_hermitian(h) -> np.ndarray:
    """exp(iH) for Hermitian H via eigendecomposition; exactly unitary up to rounding."""
    a = hermitian_part(h)
    w, v = np.linalg.eigh(a)
    return (v * np.exp(1j * w)) @ v.conj().T


def unitary_log(u) -> np.ndarray:
    """Principal Hermitian generator H of a unitary u, with exp(iH) = u and ||H|| <= pi.

    Uses the complex Schur form, whose transform stays unitary even at
    degenerate eigenvalues.
    """
    a = as_matrix(u)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    t, q = scipy.linalg.schur(a, output="complex")
    h = q @ np.diag(np.angle(np.diag(t))) @ q.conj().T
    return hermitian_part(h)


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-distributed d x d unitary (QR of a Ginibre matrix with phase fix)."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def random_contraction(rng: np.random.Generator, d: int, radius: float = 1.0) -> np.ndarray:
    """Random d x d matrix rescaled into the operator-norm ball of the given radius."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2 * d)
    nrm = op_norm(g)
    if nrm > radius:
        g *= radius / nrm
    return g


def random_hermitian(rng: np.random.Generator, d: int, norm: float = 1.0) -> np.ndarray:
    h = hermitian_part((rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))))
    nrm = op_norm(h)
    if nrm > 0:
        h *= norm / nrm
    return h


def matrix_to_json(m) -> dict:
    """JSON object {"rows": r, "cols": c, "data": [[re, im], ...]} in row-major order."""
    a = as_matrix(m)
    data = [[float(x.real), float(x.imag)] for x in a.reshape(-1)]
    return {"rows": int(a.shape[0]), "cols": int(a.shape[1]), "data": data}


def matrix_from_json(obj) -> np.ndarray:
    if not isinstance(obj, dict):
        raise ValueError("matrix JSON must be an object")
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON: {exc}") from exc
    if rows < 1 or cols < 1:
        raise ValueError("matrix JSON dimensions must be >= 1")
    if not isinstance(data, list) or len(data) != rows * cols:
        raise ValueError(f"matrix JSON data must list {rows * cols} entries")
    flat = np.empty(rows * cols, dtype=complex)
    for i, pair in enumerate(data):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ValueError(f"matrix JSON entry {i} is not an [re, im] pair")
        flat[i] = complex(float(pair[0]), float(pair[1]))
    return as_matrix(flat.reshape(rows, cols))


def save_matrix(path, m) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(matrix_to_json(m), fh)


def load_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return matrix_from_json(json.load(fh))
