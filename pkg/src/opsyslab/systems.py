"""Concrete operator systems: unital self-adjoint subspaces of M_d.

A system is stored through a Hilbert-Schmidt-orthonormal basis obtained by
Gram-Schmidt over [identity, generators, their adjoints], so the span is
always unital and closed under adjoints.  The operator-norm distance to a
span is a small semidefinite program; `dist_to_system` solves it with a
log-det barrier method whose duality gap certifies the answer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .matrices import as_matrix, matrix_from_json, matrix_to_json, op_norm

__all__ = [
    "OperatorSystem",
    "BallSpec",
    "canonicalize",
    "full_matrix_algebra",
    "diagonal_algebra",
    "dist_to_system",
    "is_product_closed",
    "unitary_defect",
    "sample_ball",
    "system_to_json",
    "system_from_json",
    "save_system",
    "load_system",
]

_INDEPENDENCE_RTOL = 1e-8


def _vec(m: np.ndarray) -> np.ndarray:
    return m.reshape(-1)


@dataclass(frozen=True, eq=False)
class OperatorSystem:
    """Unital *-closed subspace of M_d, with an HS-orthonormal basis."""

    ambient_dim: int
    basis: tuple[np.ndarray, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    @cached_property
    def _stack(self) -> np.ndarray:
        return np.stack(self.basis)

    @cached_property
    def _frame(self) -> np.ndarray:
        # d^2 x k, orthonormal columns vec(b_i)
        return np.stack([_vec(b) for b in self.basis], axis=1)

    def coords(self, x) -> np.ndarray:
        """HS coordinates of the projection of x onto the span."""
        a = self._check_ambient(x)
        return self._frame.conj().T @ _vec(a)

    def from_coords(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=complex)
        if c.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} coordinates, got shape {c.shape}")
        return np.tensordot(c, self._stack, axes=(0, 0))

    def project(self, x) -> np.ndarray:
        return self.from_coords(self.coords(x))

    def membership_residual(self, x) -> float:
        """Frobenius distance from x to the span (upper bounds the operator-norm one)."""
        a = self._check_ambient(x)
        return float(np.linalg.norm(a - self.project(a)))

    def contains_span_of(self, other: "OperatorSystem", tol: float = 1e-8) -> bool:
        if other.ambient_dim != self.ambient_dim:
            return False
        return all(self.membership_residual(b) <= tol for b in other.basis)

    @cached_property
    def hermitian_basis(self) -> tuple[np.ndarray, ...]:
        """Real-orthonormal basis of the Hermitian elements of the span (real dim = dim)."""
        cands = []
        for b in self.basis:
            cands.append((b + b.conj().T) / 2)
            cands.append((b - b.conj().T) / 2j)
        out: list[np.ndarray] = []
        for g in cands:
            v = g.astype(complex)
            for _ in range(2):
                for h in out:
                    v = v - np.vdot(h, v).real * h
            nrm = np.linalg.norm(v)
            if nrm > 1e-8:
                out.append(v / nrm)
        return tuple(m.copy() for m in out)

    def is_cstar(self, tol: float = 1e-9) -> bool:
        """True when the span is closed under products (cached exact oracle)."""
        cache = self.__dict__.setdefault("_cstar_cache", {})
        if tol not in cache:
            cache[tol] = is_product_closed(self, tol)[0]
        return cache[tol]

    def require_cstar(self, tol: float = 1e-9) -> None:
        if not self.is_cstar(tol):
            raise ValueError("structure is not product-closed at the requested tolerance")

    def validate(self, tol: float = 1e-7) -> None:
        d = self.ambient_dim
        if self.membership_residual(np.eye(d)) > tol * np.sqrt(d):
            raise ValueError("identity is not in the span")
        for b in self.basis:
            if self.membership_residual(b.conj().T) > tol:
                raise ValueError("span is not closed under adjoints")
        gram = self._frame.conj().T @ self._frame
        if np.linalg.norm(gram - np.eye(self.dim)) > 1e-10 * self.dim:
            raise ValueError("basis is not HS-orthonormal")

    def _check_ambient(self, x) -> np.ndarray:
        a = as_matrix(x)
        d = self.ambient_dim
        if a.shape != (d, d):
            raise ValueError(f"expected a {d} x {d} matrix, got {a.shape}")
        return a


@dataclass(frozen=True)
class BallSpec:
    """Operator-norm ball of a system's span."""

    system: OperatorSystem
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius!r}")


def canonicalize(raw_basis, ambient_dim: int) -> OperatorSystem:
    """Smallest unital *-closed subspace containing the input, HS-orthonormalized.

    Gram-Schmidt runs over [identity, g_1, g_1*, g_2, g_2*, ...] so generator
    directions survive verbatim whenever they are already orthogonal.
    """
    d = int(ambient_dim)
    if d < 1:
        raise ValueError("ambient dimension must be >= 1")
    gens: list[np.ndarray] = [np.eye(d, dtype=complex)]
    for g in raw_basis:
        a = as_matrix(g)
        if a.shape != (d, d):
            raise ValueError(f"generator has shape {a.shape}, expected ({d}, {d})")
        gens.append(a)
        gens.append(a.conj().T)
    basis: list[np.ndarray] = []
    for g in gens:
        scale = max(1.0, float(np.linalg.norm(g)))
        v = g.astype(complex)
        for _ in range(2):  # re-orthogonalize once for stability
            for b in basis:
                v = v - np.vdot(b, v) * b
        nrm = float(np.linalg.norm(v))
        if nrm > _INDEPENDENCE_RTOL * scale:
            b = v / nrm
            b.setflags(write=False)
            basis.append(b)
    system = OperatorSystem(d, tuple(basis))
    system.validate()
    return system


@lru_cache(maxsize=None)
def full_matrix_algebra(d: int) -> OperatorSystem:
    """The full algebra M_d (matrix units are already HS-orthonormal)."""
    units = []
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            units.append(e)
    return canonicalize(units, d)


@lru_cache(maxsize=None)
def diagonal_algebra(d: int) -> OperatorSystem:
    diags = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        diags.append(e)
    return canonicalize(diags, d)


# ---------------------------------------------------------------------------
# Certified spectral-norm minimization over an affine family
# ---------------------------------------------------------------------------

def _dilation(m: np.ndarray) -> np.ndarray:
    r, c = m.shape
    z = np.zeros((r + c, r + c), dtype=complex)
    z[:r, r:] = m
    z[r:, :r] = m.conj().T
    return z


def _is_pd(g: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(g)
        return True
    except np.linalg.LinAlgError:
        return False


def _logdet(g: np.ndarray) -> float:
    ell = np.linalg.cholesky(g)
    return 2.0 * float(np.sum(np.log(np.diag(ell).real)))


def _min_affine_spectral(m0: np.ndarray, dirs: list[np.ndarray], gap_tol: float = 1e-9):
    """Minimize ||m0 + sum_j theta_j dirs_j||_2 over real theta.

    Barrier method on { (theta, t) : t*I - dilation(M(theta)) > 0 }; the
    returned value is feasible and within gap_tol of the optimum.
    """
    r, c = m0.shape
    n = r + c
    m = len(dirs)
    w0 = _dilation(m0)
    wd = [_dilation(d) for d in dirs]

    # Frobenius least-squares start
    a_cols = np.stack([_vec(d) for d in dirs], axis=1)
    a_real = np.vstack([a_cols.real, a_cols.imag])
    b_real = np.concatenate([_vec(m0).real, _vec(m0).imag])
    theta = np.linalg.lstsq(a_real, -b_real, rcond=None)[0]

    def mat(th):
        out = m0.astype(complex).copy()
        for j in range(m):
            out += th[j] * dirs[j]
        return out

    t = op_norm(mat(theta)) * 1.0
    t += max(1.0, 0.25 * t)
    x = np.concatenate([theta, [t]])

    def g_of(xv):
        g = xv[m] * np.eye(n, dtype=complex) - w0
        for j in range(m):
            g = g - xv[j] * wd[j]
        return g

    def phi(xv, tau):
        g = g_of(xv)
        if not _is_pd(g):
            return np.inf
        return tau * xv[m] - _logdet(g)

    tau = 1.0
    mu = 25.0
    for _ in range(64):
        # Newton centering at this tau
        for _ in range(60):
            g = g_of(x)
            ginv = np.linalg.inv(g)
            s_list = [ginv @ wd[j] for j in range(m)] + [ginv]
            grad = np.empty(m + 1)
            for j in range(m):
                grad[j] = np.trace(s_list[j]).real
            grad[m] = tau - np.trace(ginv).real
            stack = np.stack(s_list)
            hess = np.einsum("aij,bji->ab", stack, stack).real
            hess = (hess + hess.T) / 2
            try:
                step = np.linalg.solve(hess + 1e-14 * np.eye(m + 1), -grad)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess, -grad, rcond=None)[0]
            decrement = float(-grad @ step)
            if not np.isfinite(decrement) or decrement <= 1e-11:
                break
            # backtracking line search on the barrier objective
            base = phi(x, tau)
            alpha = 1.0
            while alpha > 1e-14:
                cand = x + alpha * step
                val = phi(cand, tau)
                if val < base - 0.25 * alpha * decrement + 1e-15:
                    x = cand
                    break
                alpha /= 2
            else:
                break
        if n / tau <= gap_tol:
            break
        tau *= mu
    return float(x[m]), x[:m]


def dist_to_system(x, system: OperatorSystem, gap_tol: float = 2e-10) -> float:
    """Operator-norm distance from x to span(system), certified to gap_tol."""
    a = system._check_ambient(x)
    dirs: list[np.ndarray] = []
    for b in system.basis:
        dirs.append(b)
        dirs.append(1j * b)
    value, _ = _min_affine_spectral(a, dirs, gap_tol=gap_tol)
    return max(0.0, value)


def is_product_closed(system: OperatorSystem, tol: float = 1e-9) -> tuple[bool, float]:
    """Exact product-closure oracle: max distance of basis products b_i b_j* to the span."""
    defect = 0.0
    for bi in system.basis:
        for bj in system.basis:
            defect = max(defect, dist_to_system(bi @ bj.conj().T, system))
    return defect <= tol, defect


def unitary_defect(u) -> float:
    """max(||u*u - 1||, ||uu* - 1||); zero exactly at unitaries."""
    a = as_matrix(u)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    eye = np.eye(a.shape[0])
    return max(op_norm(a.conj().T @ a - eye), op_norm(a @ a.conj().T - eye))


def _draw_ball_coords(rng: np.random.Generator, system: OperatorSystem,
                      radius: float, count: int) -> np.ndarray:
    """Real coordinate rows (interleaved re/im) of in-ball span elements."""
    k = system.dim
    out = np.empty((count, 2 * k))
    for i in range(count):
        c = (rng.standard_normal(k) + 1j * rng.standard_normal(k)) / np.sqrt(2)
        a = system.from_coords(c)
        nrm = op_norm(a)
        if nrm > radius:
            c *= radius / nrm
        out[i, 0::2] = c.real
        out[i, 1::2] = c.imag
    return out


def sample_ball(spec: BallSpec, rng_seed: int, count: int) -> list[np.ndarray]:
    """Deterministic-in-seed span elements with operator norm <= spec.radius."""
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(rng_seed)
    coords = _draw_ball_coords(rng, spec.system, spec.radius, count)
    return [spec.system.from_coords(row[0::2] + 1j * row[1::2]) for row in coords]


def system_to_json(system: OperatorSystem) -> dict:
    return {
        "ambient_dim": system.ambient_dim,
        "basis": [matrix_to_json(b) for b in system.basis],
    }


def system_from_json(obj) -> OperatorSystem:
    if not isinstance(obj, dict):
        raise ValueError("operator-system JSON must be an object")
    try:
        d = int(obj["ambient_dim"])
        raw = [matrix_from_json(m) for m in obj["basis"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed operator-system JSON: {exc}") from exc
    return canonicalize(raw, d)


def save_system(path, system: OperatorSystem) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(system_to_json(system), fh)


def load_system(path) -> OperatorSystem:
    with open(path, "r", encoding="utf-8") as fh:
        return system_from_json(json.load(fh))
