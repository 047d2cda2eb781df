"""Structure-detection formulas paired with exact algebraic oracles.

Every quantity here is a nonnegative defect: zero (within tolerance)
certifies a property of the structure.  The quantified defects run through
the sentence evaluator with analytic witnesses attached as optimizer
starts, so whenever the property actually holds the reported value is a
tight upper bound rather than a heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .logic import (
    AbsDiff,
    Adj,
    Amp,
    Ball,
    Block,
    Const,
    DotMinus,
    EvalConfig,
    Formula,
    Inf,
    Min,
    Norm,
    NormSq,
    PsdDist,
    Scale,
    Sum,
    Sup,
    Unit,
    UnitaryBall,
    Var,
    evaluate,
)
from .matrices import (
    amplify,
    as_matrix,
    block,
    hermitian_part,
    op_norm,
    psd_sqrt,
)
from .systems import OperatorSystem, dist_to_system, full_matrix_algebra

__all__ = [
    "closure_gap",
    "completion_witness",
    "ClosureReport",
    "closure_sentence",
    "product_closure_defect",
    "unitary_plateau_constant",
    "unitarity_score",
    "unitarity_score_formula",
    "unitary_detect",
    "walter_matrix",
    "product_certificate_sentence",
    "four_unitary_sentence",
    "unitary_span_defect",
    "unitary_average_decompose",
    "unitary_product_gap",
    "product_distance",
]


def _common_square(*mats) -> list[np.ndarray]:
    out = [as_matrix(m) for m in mats]
    shapes = {m.shape for m in out}
    if len(shapes) != 1 or out[0].shape[0] != out[0].shape[1]:
        raise ValueError(f"expected equal square shapes, got {sorted(shapes)}")
    return out


# ---------------------------------------------------------------------------
# Product closure
# ---------------------------------------------------------------------------

def closure_gap(x, y, z, b) -> float:
    """| ||[[0,y,1,0],[2,x,z,b]]||^2 - ||[2,x,z,b]||^2 |, scalars read as identity multiples.

    Vanishes for every b exactly when z = -xy*; choosing b = completion_witness(x, z)
    makes the single-row norm constant, which turns the gap into a lower bound on
    a fixed power of ||xy* + z||.
    """
    x, y, z, b = _common_square(x, y, z, b)
    d = x.shape[0]
    one = np.eye(d)
    zero = np.zeros((d, d))
    wide = block([[zero, y, one, zero], [2 * one, x, z, b]])
    row = block([[2 * one, x, z, b]])
    return abs(op_norm(wide) ** 2 - op_norm(row) ** 2)


def completion_witness(x, z) -> np.ndarray:
    """PSD b with [2,x,z,b] of constant squared row norm 4 + ||xx*+zz*||.

    b is the square root of ||xx*+zz*||.1 - xx* - zz*; the argument is PSD by
    construction and ||b||^2 <= ||xx*+zz*||.
    """
    x, z = _common_square(x, z)
    s = x @ x.conj().T + z @ z.conj().T
    return psd_sqrt(op_norm(s) * np.eye(x.shape[0]) - s)


def closure_sentence() -> Formula:
    """sup_{x,y in A_1} inf_{z in A_1} sup_{b in B_2} closure_gap(x, y, z, b)."""
    body = AbsDiff(
        NormSq(Block(((Unit(0), Var("y"), Unit(1), Unit(0)),
                      (Unit(2), Var("x"), Var("z"), Var("b"))))),
        NormSq(Block(((Unit(2), Var("x"), Var("z"), Var("b")),))),
    )
    inner = Sup((("b", Ball("B", 2.0)),), body)
    mid = Inf((("z", Ball("A", 1.0)),), inner)
    return Sup((("x", Ball("A", 1.0)), ("y", Ball("A", 1.0))), mid)


@dataclass
class ClosureReport:
    """Outcome of the triple-quantified closure sentence."""

    defect: float
    worst_pair: tuple[np.ndarray, np.ndarray]
    best_z: np.ndarray
    bound_check: float  # ||x y* + z|| at the reported witnesses


def _closure_hints(A: OperatorSystem, B: OperatorSystem, pair_count: int = 4):
    """Witness starts for the closure sentence.

    Outer pairs are chosen among unit-norm basis directions by scoring the
    exact distance of their product to the span; the z and b hints are the
    analytic constructions (projected back into the quantifier domains).
    """
    cands = []
    for b in A.basis:
        nrm = op_norm(b)
        if nrm > 1e-12:
            cands.append(b / nrm)
    scored = []
    for i, ci in enumerate(cands):
        for j, cj in enumerate(cands):
            scored.append((dist_to_system(ci @ cj.conj().T, A), i, j))
    scored.sort(key=lambda t: (-t[0], t[1], t[2]))
    hints = [{"x": cands[i], "y": cands[j]} for _, i, j in scored[:pair_count]]

    def z_hint(env):
        z = -env["x"] @ env["y"].conj().T
        z = A.project(z)
        nrm = op_norm(z)
        if nrm > 1.0:
            z /= nrm
        return z

    def b_hint(env):
        return completion_witness(env["x"], env["z"])

    hints.append({"z": z_hint})
    hints.append({"b": b_hint})
    return hints


def product_closure_defect(A: OperatorSystem, B: OperatorSystem,
                           config: EvalConfig | None = None, *,
                           probe=None) -> ClosureReport:
    """Evaluate the closure sentence for the subsystem A inside the algebra B.

    Requires span(A) contained in span(B) and B product-closed.  The report's
    bound_check records ||x y* + z|| at the winning witnesses; whenever the
    defect is below 1 it stays under 4*sqrt(defect) up to the optimizer
    tolerance because the completion witness is always among the inner starts.
    """
    if not B.contains_span_of(A):
        raise ValueError("span(A) must be contained in span(B)")
    B.require_cstar()
    result = evaluate(
        closure_sentence(),
        {"A": A, "B": B},
        config,
        hints=_closure_hints(A, B),
        probe=probe,
    )
    x = result.witnesses["x"]
    y = result.witnesses["y"]
    z = result.witnesses["z"]
    bound_check = op_norm(x @ y.conj().T + z)
    return ClosureReport(
        defect=result.value,
        worst_pair=(x, y),
        best_z=z,
        bound_check=bound_check,
    )


# ---------------------------------------------------------------------------
# Unitarity scores
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def unitary_plateau_constant() -> float:
    """Value of the unitarity score at unitaries, pinned by brute force.

    Grid search over scalar contractions x at u of modulus one: the score body
    min(|u|^2 + |x|^2, |u|^2 + |x|^2) - |x|^2 is constant |u|^2 = 1, so the
    infimum sits exactly at 1.
    """
    u = 1.0 + 0.0j
    best = np.inf
    for r in np.linspace(0.0, 1.0, 41):
        for phi in np.linspace(0.0, 2 * np.pi, 48, endpoint=False):
            x = r * np.exp(1j * phi)
            row = abs(u) ** 2 + abs(x) ** 2
            col = abs(u) ** 2 + abs(x) ** 2
            best = min(best, min(row, col) - abs(x) ** 2)
    return float(best)


def unitarity_score_formula(u_var: str, n: int, ball_structure: str,
                            x_var: str = "x") -> Formula:
    """inf_{||x|| <= 1} (min(||[u(x)1_n, x]||^2, ||[u(x)1_n; x]||^2) - ||x||^2).

    The inner variable ranges over the radius-1 ball of the named structure,
    which must be the full algebra at the amplified dimension.
    """
    amped = Amp(Var(u_var), n)
    body = DotMinus(
        Min(
            NormSq(Block(((amped, Var(x_var)),))),
            NormSq(Block(((amped,), (Var(x_var),)))),
        ),
        NormSq(Var(x_var)),
    )
    return Inf(((x_var, Ball(ball_structure, 1.0)),), body)


def unitarity_score(u, n: int = 1, config: EvalConfig | None = None) -> float:
    """Upper estimate of the unitarity score of a contraction u at level n.

    Constantly the plateau value at unitaries; strictly smaller for strict
    contractions (the minimal singular pair of u (x) 1_n is always among the
    starts, giving a value at most sigma_min(u)^2).
    """
    a = as_matrix(u)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    if op_norm(a) > 1.0 + 1e-10:
        raise ValueError("unitarity score needs a contraction")
    amped = amplify(a, n)
    m = amped.shape[0]
    full = full_matrix_algebra(m)

    body = DotMinus(
        Min(
            NormSq(Block(((Const(amped), Var("x")),))),
            NormSq(Block(((Const(amped),), (Var("x"),)))),
        ),
        NormSq(Var("x")),
    )
    sentence = Inf((("x", Ball("X", 1.0)),), body)

    uu, _, vh = np.linalg.svd(amped)
    min_pair = np.outer(uu[:, -1], vh[-1, :])
    result = evaluate(sentence, {"X": full}, config, hints=[{"x": min_pair}])
    return result.value


def unitary_detect(u, n_max: int = 2, config: EvalConfig | None = None) -> bool:
    """True when the unitarity score sits on the plateau for all levels <= n_max."""
    config = config or EvalConfig()
    c_star = unitary_plateau_constant()
    return all(
        unitarity_score(u, n, config) >= c_star - config.opt_tol
        for n in range(1, n_max + 1)
    )


# ---------------------------------------------------------------------------
# Positivity certificate for products of unitaries
# ---------------------------------------------------------------------------

def walter_matrix(u, v, x, hermitian: bool = True) -> np.ndarray:
    """3x3 block certificate [[1,u,x],[u*,1,v],[x*,v*,1]].

    For unitaries u, v the matrix is PSD exactly when x = uv (it is then the
    rank-one square w w* with w = (1, u*, (uv)*)^T).  With hermitian=False the
    (3,2) block is u* instead of v*, which is not Hermitian unless u = v.
    """
    u, v, x = _common_square(u, v, x)
    one = np.eye(u.shape[0])
    low = v.conj().T if hermitian else u.conj().T
    return block([
        [one, u, x],
        [u.conj().T, one, v],
        [x.conj().T, low, one],
    ])


def product_certificate_sentence() -> Formula:
    """sup_{u,v in U(A)} inf_{x in A_1} d(walter_matrix(u,v,x), PSD cone of M_3(A))."""
    grid = (
        (Unit(1), Var("u"), Var("x")),
        (Adj(Var("u")), Unit(1), Var("v")),
        (Adj(Var("x")), Adj(Var("v")), Unit(1)),
    )
    body = PsdDist(Block(grid), "A")
    inner = Inf((("x", Ball("A", 1.0)),), body)
    return Sup((("u", UnitaryBall("A")), ("v", UnitaryBall("A"))), inner)


# ---------------------------------------------------------------------------
# Averages of four unitaries
# ---------------------------------------------------------------------------

def unitary_average_decompose(x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Four unitaries averaging to a given contraction: x = (u1+u2+u3+u4)/2.

    Split x = h + ik into Hermitian parts; each Hermitian contraction h is the
    average of the two unitaries h +- i sqrt(1 - h^2), built here through the
    eigendecomposition so the outputs are unitary to machine precision.
    """
    a = as_matrix(x)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got {a.shape}")
    if op_norm(a) > 1.0 + 1e-10:
        raise ValueError("decomposition needs a contraction")

    def halves(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w, vec = np.linalg.eigh(h)
        w = np.clip(w, -1.0, 1.0)
        phase = w + 1j * np.sqrt(1.0 - w ** 2)
        plus = (vec * phase) @ vec.conj().T
        minus = (vec * phase.conj()) @ vec.conj().T
        return plus, minus

    h = hermitian_part(a)
    k = (a - a.conj().T) / 2j
    hp, hm = halves(h)
    kp, km = halves(k)
    return hp, hm, 1j * kp, 1j * km


def four_unitary_sentence() -> Formula:
    """sup_{x in A_1} inf_{u1..u4 in U(A)} ||x - (u1+u2+u3+u4)/2||."""
    avg = Scale(-0.5, Sum(Sum(Var("u1"), Var("u2")), Sum(Var("u3"), Var("u4"))))
    body = Norm(Sum(Var("x"), avg))
    inner = Inf(
        (("u1", UnitaryBall("A")), ("u2", UnitaryBall("A")),
         ("u3", UnitaryBall("A")), ("u4", UnitaryBall("A"))),
        body,
    )
    return Sup((("x", Ball("A", 1.0)),), inner)


def unitary_span_defect(A: OperatorSystem, config: EvalConfig | None = None) -> float:
    """Defect of "every contraction is an average of four unitaries" over A.

    Requires a product-closed structure (unitaries are parametrized as exp(iH)
    with H Hermitian in the span).  The analytic decomposition of the current
    outer point is always among the inner starts, so the value is a genuine
    upper bound.
    """
    A.require_cstar()

    def u_hint(i):
        def fn(env):
            return unitary_average_decompose(env["x"])[i]
        return fn

    hints = [{"u1": u_hint(0), "u2": u_hint(1), "u3": u_hint(2), "u4": u_hint(3)}]
    result = evaluate(four_unitary_sentence(), {"A": A}, config, hints=hints)
    return result.value


# ---------------------------------------------------------------------------
# Unitary products and the exact product distance
# ---------------------------------------------------------------------------

def unitary_product_gap(u, v, w) -> float:
    """||[[u,w],[1,-v*]]||^2 - 2.

    For unitaries u, w and an isometry v this equals ||u - wv|| exactly, since
    the squared norm is ||[[2, u-wv],[(u-wv)*, 2]]|| = 2 + ||u - wv||.
    """
    u, v, w = _common_square(u, v, w)
    one = np.eye(u.shape[0])
    m = block([[u, w], [one, -v.conj().T]])
    return op_norm(m) ** 2 - 2.0


def product_distance(x, y, z, A: OperatorSystem) -> float:
    """Ground truth ||x y - z|| for elements of a product-closed structure."""
    A.require_cstar()
    x, y, z = _common_square(x, y, z)
    for name, m in (("x", x), ("y", y), ("z", z)):
        if dist_to_system(m, A) > 1e-6:
            raise ValueError(f"{name} is not in the span of the structure")
    return op_norm(x @ y - z)
