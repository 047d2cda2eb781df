"""Real-valued sentences over matrix operator systems.

Terms are matrix expressions built from variables, constants and identity
multiples; formulas combine real values through the monotone connective
repertoire (max, min, +, nonnegative scaling, truncated subtraction) plus
absolute differences, norms, distances, and sup/inf quantifiers over norm
balls of a named structure.

Quantifiers evaluate by seeded multistart local search over the real ball
coordinates, so a sup result is a lower estimate of the true supremum, an
inf result an upper estimate, and alternating sentences are heuristic
unless witness hints pin them down.  Identical subformulas receive
identical search seeds, and the whole evaluation is deterministic for a
fixed EvalConfig.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .matrices import (
    DEFAULT_TOL,
    amplify as _amplify,
    as_matrix,
    exp_i_hermitian,
    hermitian_part,
    lambda_min,
    matrix_from_json,
    matrix_to_json,
    op_norm,
    unitary_log,
)
from .systems import OperatorSystem, _draw_ball_coords, dist_to_system

__all__ = [
    "Term", "Var", "Const", "Unit", "Adj", "Scale", "Sum", "Block", "Amp", "Prod",
    "Formula", "Norm", "NormSq", "SpanDist", "PsdDist", "AbsDiff", "DotMinus",
    "Max", "Min", "Plus", "Times", "Lit", "Sup", "Inf", "Pred",
    "Ball", "UnitaryBall",
    "EvalConfig", "EvalResult", "evaluate",
    "PredicateRegistry", "register_predicate", "DEFAULT_REGISTRY",
    "free_variables", "substitute", "NestingDepthError",
    "sentence_to_json", "sentence_from_json",
]


class NestingDepthError(ValueError):
    """Quantifier alternation depth above the supported cap."""


_MAX_ALTERNATION = 3


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class Term:
    pass


class Formula:
    pass


def _as_term(x) -> Term:
    if isinstance(x, Term):
        return x
    if isinstance(x, (int, float, complex)):
        return Unit(complex(x))
    return Const(x)


@dataclass(frozen=True)
class Var(Term):
    name: str


@dataclass(frozen=True, eq=False)
class Const(Term):
    value: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.value)
        a.setflags(write=False)
        object.__setattr__(self, "value", a)


@dataclass(frozen=True)
class Unit(Term):
    """Multiple of the ambient identity; the dimension is inferred in context."""

    coeff: complex = 1.0


@dataclass(frozen=True, eq=False)
class Adj(Term):
    arg: Term


@dataclass(frozen=True, eq=False)
class Scale(Term):
    coeff: complex
    arg: Term


@dataclass(frozen=True, eq=False)
class Sum(Term):
    left: Term
    right: Term


@dataclass(frozen=True, eq=False)
class Block(Term):
    grid: tuple

    def __post_init__(self):
        rows = tuple(tuple(_as_term(cell) for cell in row) for row in self.grid)
        if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
            raise ValueError("block grid must be rectangular and non-empty")
        object.__setattr__(self, "grid", rows)


@dataclass(frozen=True, eq=False)
class Amp(Term):
    arg: Term
    copies: int

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError("amplification count must be >= 1")


@dataclass(frozen=True, eq=False)
class Prod(Term):
    """Product term; only evaluable over product-closed (C*) structures."""

    left: Term
    right: Term


@dataclass(frozen=True)
class Ball:
    """Radius-r operator-norm ball of the named structure's span."""

    structure: str
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class UnitaryBall:
    """Unitaries exp(iH), H Hermitian in the named structure's span, ||H|| <= pi."""

    structure: str


@dataclass(frozen=True, eq=False)
class Norm(Formula):
    arg: Term


@dataclass(frozen=True, eq=False)
class NormSq(Formula):
    arg: Term


@dataclass(frozen=True, eq=False)
class SpanDist(Formula):
    """Operator-norm distance of the term's value to the named structure's span."""

    arg: Term
    structure: str


@dataclass(frozen=True, eq=False)
class PsdDist(Formula):
    """Distance of a Hermitian term to the PSD cone of M_k(structure).

    The term must evaluate inside M_k(span); there the cone contains the
    value shifted by multiples of the identity, so the distance is
    max(0, -lambda_min).
    """

    arg: Term
    structure: str


@dataclass(frozen=True, eq=False)
class AbsDiff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, eq=False)
class DotMinus(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, eq=False)
class Max(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, eq=False)
class Min(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, eq=False)
class Plus(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, eq=False)
class Times(Formula):
    coeff: float
    arg: Formula

    def __post_init__(self):
        if self.coeff < 0:
            raise ValueError("formula scaling must be nonnegative")


@dataclass(frozen=True)
class Lit(Formula):
    value: float


def _norm_bindings(bindings):
    if bindings and isinstance(bindings[0], str):
        bindings = (bindings,)
    out = tuple((str(name), ball) for name, ball in bindings)
    if not out:
        raise ValueError("quantifier needs at least one bound variable")
    names = [name for name, _ in out]
    if len(set(names)) != len(names):
        raise ValueError("quantifier binds a variable name twice")
    for _, ball in out:
        if not isinstance(ball, (Ball, UnitaryBall)):
            raise ValueError(f"expected a ball specification, got {ball!r}")
    return out


@dataclass(frozen=True, eq=False)
class Sup(Formula):
    bindings: tuple
    body: Formula

    def __post_init__(self):
        object.__setattr__(self, "bindings", _norm_bindings(self.bindings))


@dataclass(frozen=True, eq=False)
class Inf(Formula):
    bindings: tuple
    body: Formula

    def __post_init__(self):
        object.__setattr__(self, "bindings", _norm_bindings(self.bindings))


@dataclass(frozen=True, eq=False)
class Pred(Formula):
    """Call of a registered predicate; expands to its body at evaluation."""

    name: str
    args: tuple

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(_as_term(a) for a in self.args))


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PredicateDef:
    name: str
    params: tuple
    body: Formula


class PredicateRegistry:
    def __init__(self):
        self._defs: dict[str, PredicateDef] = {}

    def register(self, name: str, params: Sequence[str], body: Formula) -> PredicateDef:
        if name in self._defs:
            raise ValueError(f"predicate {name!r} is already registered")
        params = tuple(str(p) for p in params)
        free = free_variables(body)
        if free != set(params):
            raise ValueError(
                f"predicate body free variables {sorted(free)} do not match "
                f"parameters {sorted(params)}"
            )
        handle = PredicateDef(name, params, body)
        self._defs[name] = handle
        return handle

    def get(self, name: str) -> PredicateDef:
        if name not in self._defs:
            raise ValueError(f"unknown predicate {name!r}")
        return self._defs[name]

    def __contains__(self, name: str) -> bool:
        return name in self._defs


DEFAULT_REGISTRY = PredicateRegistry()


def register_predicate(name: str, params: Sequence[str], body: Formula,
                       registry: PredicateRegistry | None = None) -> PredicateDef:
    return (registry or DEFAULT_REGISTRY).register(name, params, body)


# ---------------------------------------------------------------------------
# Tree utilities
# ---------------------------------------------------------------------------

def _children(node):
    if isinstance(node, (Adj, Scale, Amp)):
        return (node.arg,)
    if isinstance(node, (Sum, Prod)):
        return (node.left, node.right)
    if isinstance(node, Block):
        return tuple(cell for row in node.grid for cell in row)
    if isinstance(node, (Norm, NormSq, SpanDist, PsdDist, Times)):
        return (node.arg,)
    if isinstance(node, (AbsDiff, DotMinus, Max, Min, Plus)):
        return (node.left, node.right)
    if isinstance(node, (Sup, Inf)):
        return (node.body,)
    if isinstance(node, Pred):
        return node.args
    return ()


def free_variables(node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (Sup, Inf)):
        bound = {name for name, _ in node.bindings}
        return free_variables(node.body) - bound
    out: set[str] = set()
    for child in _children(node):
        out |= free_variables(child)
    return out


def _bound_variables(node) -> set[str]:
    out: set[str] = set()
    if isinstance(node, (Sup, Inf)):
        out |= {name for name, _ in node.bindings}
    for child in _children(node):
        out |= _bound_variables(child)
    return out


def _rebuild(node, children):
    it = iter(children)
    if isinstance(node, Adj):
        return Adj(next(it))
    if isinstance(node, Scale):
        return Scale(node.coeff, next(it))
    if isinstance(node, Amp):
        return Amp(next(it), node.copies)
    if isinstance(node, Sum):
        return Sum(next(it), next(it))
    if isinstance(node, Prod):
        return Prod(next(it), next(it))
    if isinstance(node, Block):
        ncols = len(node.grid[0])
        cells = list(children)
        grid = tuple(tuple(cells[i * ncols:(i + 1) * ncols]) for i in range(len(node.grid)))
        return Block(grid)
    if isinstance(node, Norm):
        return Norm(next(it))
    if isinstance(node, NormSq):
        return NormSq(next(it))
    if isinstance(node, SpanDist):
        return SpanDist(next(it), node.structure)
    if isinstance(node, PsdDist):
        return PsdDist(next(it), node.structure)
    if isinstance(node, Times):
        return Times(node.coeff, next(it))
    if isinstance(node, AbsDiff):
        return AbsDiff(next(it), next(it))
    if isinstance(node, DotMinus):
        return DotMinus(next(it), next(it))
    if isinstance(node, Max):
        return Max(next(it), next(it))
    if isinstance(node, Min):
        return Min(next(it), next(it))
    if isinstance(node, Plus):
        return Plus(next(it), next(it))
    if isinstance(node, (Sup, Inf)):
        return type(node)(node.bindings, next(it))
    if isinstance(node, Pred):
        return Pred(node.name, tuple(children))
    raise TypeError(f"cannot rebuild node {type(node).__name__}")


def substitute(node, mapping: Mapping[str, Term]):
    """Capture-avoiding substitution of terms for free variables."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, (Const, Unit, Lit)):
        return node
    if isinstance(node, (Sup, Inf)):
        bound = {name for name, _ in node.bindings}
        live = {k: v for k, v in mapping.items() if k not in bound}
        if not live:
            return node
        clash = bound & set().union(*(free_variables(t) for t in live.values()))
        bindings = node.bindings
        body = node.body
        if clash:
            renames = {name: name + "'" for name in clash}
            while any(r in free_variables(body) or any(r in free_variables(t) for t in live.values())
                      for r in renames.values()):
                renames = {k: v + "'" for k, v in renames.items()}
            bindings = tuple((renames.get(name, name), ball) for name, ball in bindings)
            body = substitute(body, {k: Var(v) for k, v in renames.items()})
        body = substitute(body, live)
        return type(node)(bindings, body)
    children = [substitute(c, mapping) for c in _children(node)]
    if not children:
        return node
    return _rebuild(node, children)


def _expand_predicates(node, registry: PredicateRegistry, depth: int = 0):
    if depth > 16:
        raise ValueError("predicate expansion is too deep (cyclic definitions?)")
    if isinstance(node, Pred):
        handle = registry.get(node.name)
        if len(node.args) != len(handle.params):
            raise ValueError(
                f"predicate {node.name!r} expects {len(handle.params)} arguments, "
                f"got {len(node.args)}"
            )
        body = substitute(handle.body, dict(zip(handle.params, node.args)))
        return _expand_predicates(body, registry, depth + 1)
    children = [_expand_predicates(c, registry, depth) for c in _children(node)]
    if not children:
        return node
    return _rebuild(node, children)


def _structure_bytes(node) -> bytes:
    parts: list[bytes] = [type(node).__name__.encode()]
    if isinstance(node, Var):
        parts.append(node.name.encode())
    elif isinstance(node, Const):
        parts.append(np.ascontiguousarray(node.value).tobytes())
        parts.append(repr(node.value.shape).encode())
    elif isinstance(node, Unit):
        parts.append(np.complex128(node.coeff).tobytes())
    elif isinstance(node, Scale):
        parts.append(np.complex128(node.coeff).tobytes())
    elif isinstance(node, Amp):
        parts.append(str(node.copies).encode())
    elif isinstance(node, (SpanDist, PsdDist)):
        parts.append(node.structure.encode())
    elif isinstance(node, Times):
        parts.append(np.float64(node.coeff).tobytes())
    elif isinstance(node, Lit):
        parts.append(np.float64(node.value).tobytes())
    elif isinstance(node, (Sup, Inf)):
        for name, ball in node.bindings:
            parts.append(name.encode())
            parts.append(type(ball).__name__.encode())
            parts.append(ball.structure.encode())
            if isinstance(ball, Ball):
                parts.append(np.float64(ball.radius).tobytes())
    elif isinstance(node, Pred):
        parts.append(node.name.encode())
    for child in _children(node):
        parts.append(_structure_bytes(child))
    return b"(" + b"|".join(parts) + b")"


def _structure_seed(node) -> int:
    return zlib.crc32(_structure_bytes(node))


def _alternation_depth(node, parent: str | None = None) -> int:
    if isinstance(node, (Sup, Inf)):
        kind = "sup" if isinstance(node, Sup) else "inf"
        step = 0 if kind == parent else 1
        return step + _alternation_depth(node.body, kind)
    depths = [_alternation_depth(c, parent) for c in _children(node)]
    return max(depths, default=0)


def _static_floor(node) -> float:
    """Static lower bound of a formula's value (used for inf early stopping)."""
    if isinstance(node, (Norm, NormSq, SpanDist, PsdDist, AbsDiff, DotMinus)):
        return 0.0
    if isinstance(node, Lit):
        return node.value
    if isinstance(node, Plus):
        return _static_floor(node.left) + _static_floor(node.right)
    if isinstance(node, Times):
        return node.coeff * _static_floor(node.arg)
    if isinstance(node, Max):
        return max(_static_floor(node.left), _static_floor(node.right))
    if isinstance(node, Min):
        return min(_static_floor(node.left), _static_floor(node.right))
    if isinstance(node, (Sup, Inf)):
        return _static_floor(node.body)
    return -np.inf


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalConfig:
    multistart: int = 16
    max_iter: int = 2000
    opt_tol: float = 1e-3
    rng_seed: int = 0xC5A1

    def __post_init__(self):
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.opt_tol > 0:
            raise ValueError("opt_tol must be positive")


@dataclass
class EvalResult:
    value: float
    witnesses: dict[str, np.ndarray] = field(default_factory=dict)
    converged: bool = True
    bound_kind: str = "heuristic"


class _EarlyStop(Exception):
    pass


class _BudgetExhausted(Exception):
    pass


class _VarFrame:
    """Maps a real coordinate vector to a ball element of one structure."""

    def __init__(self, ball, system: OperatorSystem):
        self.ball = ball
        self.system = system
        if isinstance(ball, Ball):
            self.kind = "span"
            self.ncoords = 2 * system.dim
            self.radius = ball.radius
            self._stack = system._stack
            self._hstack = None
        else:
            self.kind = "unitary"
            self.ncoords = len(system.hermitian_basis)
            self.radius = float(np.pi)
            self._stack = None
            self._hstack = np.stack(system.hermitian_basis)

    def to_matrix(self, coords: np.ndarray) -> np.ndarray:
        if self.kind == "span":
            c = coords[0::2] + 1j * coords[1::2]
            a = np.tensordot(c, self._stack, axes=(0, 0))
            nrm = _spec_norm(a)
            if nrm > self.radius:
                a *= self.radius / nrm
            return a
        h = np.tensordot(coords, self._hstack, axes=(0, 0))
        nrm = _spec_norm(h)
        if nrm > self.radius:
            h *= self.radius / nrm
        return exp_i_hermitian(h)

    def coords_of(self, matrix) -> np.ndarray:
        a = as_matrix(matrix)
        if self.kind == "span":
            c = self.system.coords(a)
            out = np.empty(self.ncoords)
            out[0::2] = c.real
            out[1::2] = c.imag
            return out
        h = unitary_log(a)
        return np.einsum("kij,ij->k", self._hstack.conj(), h).real

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        if self.kind == "span":
            return _draw_ball_coords(rng, self.system, self.radius, count)
        k = self.ncoords
        out = np.empty((count, k))
        for i in range(count):
            c = rng.standard_normal(k)
            h = np.tensordot(c, self._hstack, axes=(0, 0))
            nrm = _spec_norm(h)
            target = rng.uniform(0.0, np.pi)
            if nrm > 0:
                c *= target / nrm
            out[i] = c
        return out


class _NodeInfo:
    __slots__ = ("frames", "offsets", "samples", "budget", "floor", "polish")

    def __init__(self, frames, offsets, samples, budget, floor, polish):
        self.frames = frames
        self.offsets = offsets
        self.samples = samples
        self.budget = budget
        self.floor = floor
        self.polish = polish


_SCALAR = "scalar"


def _spec_norm(a: np.ndarray) -> float:
    # validation-free operator norm for evaluator-internal values
    return float(np.linalg.norm(a, 2))


class _Evaluator:
    def __init__(self, sentence: Formula, structures: Mapping[str, OperatorSystem],
                 config: EvalConfig, hints, probe, registry: PredicateRegistry):
        self.config = config
        self.structures = dict(structures)
        self.hints = list(hints or ())
        self.probe = probe
        self.sentence = _expand_predicates(sentence, registry)
        self._eye_cache: dict[tuple[complex, int], np.ndarray] = {}
        self._root_best: np.ndarray | None = None
        self._validate()
        self._setup_nodes()
        self.converged = True

    # -- static checks ------------------------------------------------------

    def _system(self, name: str) -> OperatorSystem:
        if name not in self.structures:
            raise ValueError(f"unresolved structure slot {name!r}")
        return self.structures[name]

    def _validate(self):
        free = free_variables(self.sentence)
        if free:
            raise ValueError(f"sentence is not closed; free variables {sorted(free)}")
        depth = _alternation_depth(self.sentence)
        if depth > _MAX_ALTERNATION:
            raise NestingDepthError(
                f"alternation depth {depth} exceeds the supported cap {_MAX_ALTERNATION}"
            )
        # bare identity multiples materialize at the smallest ambient dimension;
        # amplified balls carry their own larger full algebras
        dims = {s.ambient_dim for s in self.structures.values()}
        self.ambient = min(dims) if dims else 1
        if "A" in self.structures and "B" in self.structures:
            a, b = self.structures["A"], self.structures["B"]
            if not b.contains_span_of(a):
                raise ValueError("span(A) must be contained in span(B)")
        self._check_structures_used(self.sentence)
        self._check_products(self.sentence, {})

    def _check_structures_used(self, node):
        if isinstance(node, (SpanDist, PsdDist)):
            self._system(node.structure)
        if isinstance(node, (Sup, Inf)):
            for _, ball in node.bindings:
                system = self._system(ball.structure)
                if isinstance(ball, UnitaryBall):
                    if not system.is_cstar():
                        raise ValueError(
                            f"unitary quantification over {ball.structure!r} needs a "
                            "product-closed structure"
                        )
        for child in _children(node):
            self._check_structures_used(child)

    def _check_products(self, node, scope):
        if isinstance(node, (Sup, Inf)):
            inner = dict(scope)
            for name, ball in node.bindings:
                inner[name] = ball
            self._check_products(node.body, inner)
            return
        if isinstance(node, Prod):
            for name in free_variables(node.left) | free_variables(node.right):
                ball = scope.get(name)
                if ball is None:
                    continue
                system = self._system(ball.structure)
                if not system.is_cstar():
                    raise ValueError(
                        f"product term over variable {name!r} requires structure "
                        f"{ball.structure!r} to be product-closed"
                    )
        for child in _children(node):
            self._check_products(child, scope)

    # -- per-node setup -----------------------------------------------------

    def _setup_nodes(self):
        quant_nodes: list = []

        def walk(node):
            if isinstance(node, (Sup, Inf)):
                quant_nodes.append(node)
            for child in _children(node):
                walk(child)

        walk(self.sentence)
        single_block = len(quant_nodes) == 1
        self._info: dict[int, _NodeInfo] = {}
        for node in quant_nodes:
            frames = []
            offsets = [0]
            for _, ball in node.bindings:
                frame = _VarFrame(ball, self._system(ball.structure))
                frames.append(frame)
                offsets.append(offsets[-1] + frame.ncoords)
            leaf = not any(isinstance(c, (Sup, Inf)) for c in _iter_subtree(node.body))
            # nested quantifiers get drastically smaller search budgets: the
            # analytic hints carry the accuracy, the samples the exploration
            if single_block:
                nstarts, budget, polish = self.config.multistart, self.config.max_iter, 2
            elif leaf:
                nstarts = max(4, self.config.multistart // 4)
                budget = max(24, self.config.max_iter // 80)
                polish = 1
            else:
                nstarts = max(6, self.config.multistart // 2)
                budget = max(32, self.config.max_iter // 50)
                polish = 1
            rng = np.random.default_rng(
                [self.config.rng_seed & 0xFFFFFFFF, _structure_seed(node)]
            )
            per_var = [f.sample(rng, nstarts) for f in frames]
            samples = np.hstack(per_var) if per_var else np.empty((nstarts, 0))
            floor = _static_floor(node.body)
            self._info[id(node)] = _NodeInfo(frames, offsets, samples, budget, floor, polish)

    # -- term evaluation ----------------------------------------------------

    def _term_value(self, t: Term, env):
        if isinstance(t, Var):
            if t.name not in env:
                raise ValueError(f"unbound variable {t.name!r}")
            return env[t.name]
        if isinstance(t, Const):
            return t.value
        if isinstance(t, Unit):
            return (_SCALAR, complex(t.coeff))
        if isinstance(t, Adj):
            v = self._term_value(t.arg, env)
            if _is_scalar(v):
                return (_SCALAR, v[1].conjugate())
            return v.conj().T
        if isinstance(t, Scale):
            v = self._term_value(t.arg, env)
            if _is_scalar(v):
                return (_SCALAR, complex(t.coeff) * v[1])
            return complex(t.coeff) * v
        if isinstance(t, Sum):
            lv = self._term_value(t.left, env)
            rv = self._term_value(t.right, env)
            if _is_scalar(lv) and _is_scalar(rv):
                return (_SCALAR, lv[1] + rv[1])
            if _is_scalar(lv):
                return self._materialize(lv, rv.shape) + rv
            if _is_scalar(rv):
                return lv + self._materialize(rv, lv.shape)
            if lv.shape != rv.shape:
                raise ValueError(f"sum of incompatible shapes {lv.shape} and {rv.shape}")
            return lv + rv
        if isinstance(t, Prod):
            lv = self._term_value(t.left, env)
            rv = self._term_value(t.right, env)
            if _is_scalar(lv) and _is_scalar(rv):
                return (_SCALAR, lv[1] * rv[1])
            if _is_scalar(lv):
                return lv[1] * rv
            if _is_scalar(rv):
                return lv * rv[1]
            if lv.shape[1] != rv.shape[0]:
                raise ValueError(f"product of incompatible shapes {lv.shape} and {rv.shape}")
            return lv @ rv
        if isinstance(t, Amp):
            v = self._term_value(t.arg, env)
            if _is_scalar(v):
                return v
            return _amplify(v, t.copies)
        if isinstance(t, Block):
            return self._block_value(t, env)
        raise TypeError(f"unknown term node {type(t).__name__}")

    def _materialize(self, scalar, shape):
        if shape[0] != shape[1]:
            if scalar[1] == 0:
                return np.zeros(shape, dtype=complex)
            raise ValueError("identity multiple used in a non-square slot")
        key = (scalar[1], shape[0])
        cached = self._eye_cache.get(key)
        if cached is None:
            cached = scalar[1] * np.eye(shape[0], dtype=complex)
            cached.setflags(write=False)
            self._eye_cache[key] = cached
        return cached

    def _block_value(self, t: Block, env):
        nrows = len(t.grid)
        ncols = len(t.grid[0])
        vals = [[self._term_value(cell, env) for cell in row] for row in t.grid]
        heights = [None] * nrows
        widths = [None] * ncols
        for i in range(nrows):
            for j in range(ncols):
                v = vals[i][j]
                if not _is_scalar(v):
                    if heights[i] is None:
                        heights[i] = v.shape[0]
                    elif heights[i] != v.shape[0]:
                        raise ValueError(f"grid row {i} mixes row-counts")
                    if widths[j] is None:
                        widths[j] = v.shape[1]
                    elif widths[j] != v.shape[1]:
                        raise ValueError(f"grid column {j} mixes column-counts")
        for i in range(nrows):
            if heights[i] is None:
                heights[i] = self.ambient
        for j in range(ncols):
            if widths[j] is None:
                widths[j] = self.ambient
        out = np.zeros((sum(heights), sum(widths)), dtype=complex)
        r0 = 0
        for i in range(nrows):
            c0 = 0
            for j in range(ncols):
                v = vals[i][j]
                h, w = heights[i], widths[j]
                if _is_scalar(v):
                    if v[1] != 0:
                        if h != w:
                            raise ValueError("identity multiple used in a non-square slot")
                        idx = np.arange(h)
                        out[r0 + idx, c0 + idx] = v[1]
                else:
                    out[r0:r0 + h, c0:c0 + w] = v
                c0 += w
            r0 += h
        return out

    def _term_matrix(self, t: Term, env) -> np.ndarray:
        v = self._term_value(t, env)
        if _is_scalar(v):
            return v[1] * np.eye(self.ambient, dtype=complex)
        return v

    # -- formula evaluation -------------------------------------------------

    def _value(self, f: Formula, env, capture=None) -> float:
        if isinstance(f, Norm):
            return _spec_norm(self._term_matrix(f.arg, env))
        if isinstance(f, NormSq):
            v = _spec_norm(self._term_matrix(f.arg, env))
            return v * v
        if isinstance(f, SpanDist):
            return dist_to_system(self._term_matrix(f.arg, env), self._system(f.structure))
        if isinstance(f, PsdDist):
            return self._psd_dist(f, env)
        if isinstance(f, AbsDiff):
            return abs(self._value(f.left, env, capture) - self._value(f.right, env, capture))
        if isinstance(f, DotMinus):
            return max(0.0, self._value(f.left, env, capture) - self._value(f.right, env, capture))
        if isinstance(f, Max):
            return max(self._value(f.left, env, capture), self._value(f.right, env, capture))
        if isinstance(f, Min):
            return min(self._value(f.left, env, capture), self._value(f.right, env, capture))
        if isinstance(f, Plus):
            return self._value(f.left, env, capture) + self._value(f.right, env, capture)
        if isinstance(f, Times):
            return f.coeff * self._value(f.arg, env, capture)
        if isinstance(f, Lit):
            return float(f.value)
        if isinstance(f, (Sup, Inf)):
            return self._quant(f, env, capture)
        raise TypeError(f"unknown formula node {type(f).__name__}")

    def _psd_dist(self, f: PsdDist, env) -> float:
        w = self._term_matrix(f.arg, env)
        system = self._system(f.structure)
        d = system.ambient_dim
        if w.shape[0] != w.shape[1] or w.shape[0] % d != 0:
            raise ValueError(
                f"PSD-cone distance needs a square matrix of block dimension {d}"
            )
        k = w.shape[0] // d
        for i in range(k):
            for j in range(k):
                blk = w[i * d:(i + 1) * d, j * d:(j + 1) * d]
                if system.membership_residual(blk) > 1e-6:
                    raise ValueError(
                        "PSD-cone distance evaluated outside M_k(structure)"
                    )
        if op_norm(w - w.conj().T) > DEFAULT_TOL.eig_tol:
            raise ValueError("PSD-cone distance needs a Hermitian value")
        return max(0.0, -lambda_min(hermitian_part(w)))

    # -- quantifier optimization --------------------------------------------

    def _starts_for(self, node, info: _NodeInfo, env):
        # hints first: for an inf they can trigger the floor early-stop before
        # any sampled start is even evaluated
        names = [name for name, _ in node.bindings]
        total = info.offsets[-1]
        starts = []
        for entry in self.hints:
            if not any(name in entry for name in names):
                continue
            coords = np.zeros(total)
            usable = True
            for idx, name in enumerate(names):
                if name not in entry:
                    continue
                value = entry[name]
                if callable(value):
                    value = value(dict(env))
                try:
                    coords[info.offsets[idx]:info.offsets[idx + 1]] = \
                        info.frames[idx].coords_of(value)
                except (ValueError, np.linalg.LinAlgError):
                    usable = False
                    break
            if usable:
                starts.append(coords)
        starts.append(np.zeros(total))
        starts.extend(info.samples)
        return starts

    def _bind(self, node, info: _NodeInfo, coords, env):
        out = dict(env)
        for idx, (name, _) in enumerate(node.bindings):
            frame = info.frames[idx]
            out[name] = frame.to_matrix(coords[info.offsets[idx]:info.offsets[idx + 1]])
        return out

    def _quant(self, node, env, capture=None) -> float:
        info = self._info[id(node)]
        is_sup = isinstance(node, Sup)
        sign = -1.0 if is_sup else 1.0
        floor = info.floor

        if capture is not None and node is self.sentence and self._root_best is not None:
            # the main pass already optimized the root; just re-descend its optimum
            bound = self._bind(node, info, self._root_best, env)
            for name, _ in node.bindings:
                capture[name] = bound[name]
            return self._value(node.body, bound, capture)

        best = {"coords": None, "value": -np.inf if is_sup else np.inf, "sig_at": 0}
        evals = {"n": 0}

        def raw(coords):
            evals["n"] += 1
            value = self._value(node.body, self._bind(node, info, coords, env))
            improved = value > best["value"] if is_sup else value < best["value"]
            if improved:
                if abs(value - best["value"]) > 0.1 * self.config.opt_tol:
                    best["sig_at"] = evals["n"]
                best["value"], best["coords"] = value, np.array(coords)
            return value

        starts = self._starts_for(node, info, env)
        start_values = []
        for c in starts:
            start_values.append(raw(c))
            if (not is_sup) and best["value"] <= floor + 1e-11:
                break
        early = (not is_sup) and best["value"] <= floor + 1e-11
        if not early:
            order = sorted(
                range(len(start_values)),
                key=lambda i: (-start_values[i], i) if is_sup else (start_values[i], i),
            )
            budget = info.budget
            for idx in order[:info.polish]:
                stop_at = evals["n"] + budget

                def objective(coords):
                    if evals["n"] >= stop_at:
                        raise _BudgetExhausted
                    value = raw(coords)
                    if (not is_sup) and value <= floor + 1e-11:
                        raise _EarlyStop
                    return sign * value

                try:
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        minimize(
                            objective, starts[idx], method="Powell",
                            options={"maxfev": budget, "xtol": 1e-5, "ftol": 1e-8},
                        )
                except _EarlyStop:
                    break
                except _BudgetExhausted:
                    # only flag non-convergence when the cap bit mid-improvement
                    if stop_at - best["sig_at"] < budget // 4:
                        self.converged = False

        value = best["value"]
        if node is self.sentence:
            self._root_best = best["coords"]
        if capture is not None:
            bound = self._bind(node, info, best["coords"], env)
            for name, _ in node.bindings:
                capture[name] = bound[name]
            self._value(node.body, bound, capture)
        elif self.probe is not None:
            self.probe(node, dict(env), value)
        return value

    def run(self) -> EvalResult:
        witnesses: dict[str, np.ndarray] = {}
        value = self._value(self.sentence, {}, capture=None)
        if _has_quantifier(self.sentence):
            # a second, deterministic pass down the winning path records witnesses
            self._value(self.sentence, {}, capture=witnesses)
        return EvalResult(
            value=value,
            witnesses=witnesses,
            converged=self.converged,
            bound_kind=_bound_kind(self.sentence),
        )


def _is_scalar(v) -> bool:
    return isinstance(v, tuple) and len(v) == 2 and v[0] == _SCALAR


def _iter_subtree(node):
    yield node
    for child in _children(node):
        yield from _iter_subtree(child)


def _has_quantifier(node) -> bool:
    return any(isinstance(n, (Sup, Inf)) for n in _iter_subtree(node))


def _bound_kind(sentence) -> str:
    kinds = {("sup" if isinstance(n, Sup) else "inf")
             for n in _iter_subtree(sentence) if isinstance(n, (Sup, Inf))}
    if not kinds:
        return "exact"
    if kinds == {"sup"}:
        return "lower-estimate"
    if kinds == {"inf"}:
        return "upper-estimate"
    return "heuristic"


def evaluate(sentence: Formula, structures: Mapping[str, OperatorSystem],
             config: EvalConfig | None = None, *,
             hints: Sequence[Mapping[str, object]] | None = None,
             probe: Callable | None = None,
             registry: PredicateRegistry | None = None) -> EvalResult:
    """Evaluate a closed sentence over named structures.

    hints: optional list of partial witness assignments {var: matrix-or-callable};
    callables receive the environment of already-bound outer variables.  Hinted
    points are always among the optimizer starts.
    """
    config = config or EvalConfig()
    ev = _Evaluator(sentence, structures, config, hints, probe,
                    registry or DEFAULT_REGISTRY)
    return ev.run()


# ---------------------------------------------------------------------------
# JSON sentence format: tagged nested arrays
# ---------------------------------------------------------------------------

def _cplx_to_json(c: complex):
    return [float(c.real), float(c.imag)]


def _cplx_from_json(v) -> complex:
    return complex(float(v[0]), float(v[1]))


def term_to_json(t: Term):
    if isinstance(t, Var):
        return ["var", t.name]
    if isinstance(t, Const):
        return ["const", matrix_to_json(t.value)]
    if isinstance(t, Unit):
        return ["unit", _cplx_to_json(t.coeff)]
    if isinstance(t, Adj):
        return ["adj", term_to_json(t.arg)]
    if isinstance(t, Scale):
        return ["scale", _cplx_to_json(t.coeff), term_to_json(t.arg)]
    if isinstance(t, Sum):
        return ["sum", term_to_json(t.left), term_to_json(t.right)]
    if isinstance(t, Prod):
        return ["prod", term_to_json(t.left), term_to_json(t.right)]
    if isinstance(t, Amp):
        return ["amp", term_to_json(t.arg), t.copies]
    if isinstance(t, Block):
        return ["block", [[term_to_json(c) for c in row] for row in t.grid]]
    raise TypeError(f"cannot serialize term {type(t).__name__}")


def _binding_to_json(name, ball):
    if isinstance(ball, UnitaryBall):
        return [name, ball.structure, "U"]
    return [name, ball.structure, float(ball.radius)]


def sentence_to_json(f: Formula):
    if isinstance(f, Norm):
        return ["norm", term_to_json(f.arg)]
    if isinstance(f, NormSq):
        return ["norm_sq", term_to_json(f.arg)]
    if isinstance(f, SpanDist):
        return ["span_dist", term_to_json(f.arg), f.structure]
    if isinstance(f, PsdDist):
        return ["psd_dist", term_to_json(f.arg), f.structure]
    if isinstance(f, AbsDiff):
        return ["abs_diff", sentence_to_json(f.left), sentence_to_json(f.right)]
    if isinstance(f, DotMinus):
        return ["dotminus", sentence_to_json(f.left), sentence_to_json(f.right)]
    if isinstance(f, Max):
        return ["max", sentence_to_json(f.left), sentence_to_json(f.right)]
    if isinstance(f, Min):
        return ["min", sentence_to_json(f.left), sentence_to_json(f.right)]
    if isinstance(f, Plus):
        return ["plus", sentence_to_json(f.left), sentence_to_json(f.right)]
    if isinstance(f, Times):
        return ["times", float(f.coeff), sentence_to_json(f.arg)]
    if isinstance(f, Lit):
        return ["lit", float(f.value)]
    if isinstance(f, Sup):
        return ["sup", [_binding_to_json(n, b) for n, b in f.bindings],
                sentence_to_json(f.body)]
    if isinstance(f, Inf):
        return ["inf", [_binding_to_json(n, b) for n, b in f.bindings],
                sentence_to_json(f.body)]
    if isinstance(f, Pred):
        return ["pred", f.name, [term_to_json(a) for a in f.args]]
    raise TypeError(f"cannot serialize formula {type(f).__name__}")


def term_from_json(obj) -> Term:
    if not isinstance(obj, list) or not obj:
        raise ValueError("term JSON must be a non-empty array")
    tag, *rest = obj
    if tag == "var":
        return Var(str(rest[0]))
    if tag == "const":
        return Const(matrix_from_json(rest[0]))
    if tag == "unit":
        return Unit(_cplx_from_json(rest[0]))
    if tag == "adj":
        return Adj(term_from_json(rest[0]))
    if tag == "scale":
        return Scale(_cplx_from_json(rest[0]), term_from_json(rest[1]))
    if tag == "sum":
        return Sum(term_from_json(rest[0]), term_from_json(rest[1]))
    if tag == "prod":
        return Prod(term_from_json(rest[0]), term_from_json(rest[1]))
    if tag == "amp":
        return Amp(term_from_json(rest[0]), int(rest[1]))
    if tag == "block":
        return Block(tuple(tuple(term_from_json(c) for c in row) for row in rest[0]))
    raise ValueError(f"unknown term tag {tag!r}")


def _binding_from_json(obj):
    name, structure, spec = obj
    if spec == "U":
        return (str(name), UnitaryBall(str(structure)))
    return (str(name), Ball(str(structure), float(spec)))


def sentence_from_json(obj) -> Formula:
    if not isinstance(obj, list) or not obj:
        raise ValueError("sentence JSON must be a non-empty array")
    tag, *rest = obj
    if tag == "norm":
        return Norm(term_from_json(rest[0]))
    if tag == "norm_sq":
        return NormSq(term_from_json(rest[0]))
    if tag == "span_dist":
        return SpanDist(term_from_json(rest[0]), str(rest[1]))
    if tag == "psd_dist":
        return PsdDist(term_from_json(rest[0]), str(rest[1]))
    if tag == "abs_diff":
        return AbsDiff(sentence_from_json(rest[0]), sentence_from_json(rest[1]))
    if tag == "dotminus":
        return DotMinus(sentence_from_json(rest[0]), sentence_from_json(rest[1]))
    if tag == "max":
        return Max(sentence_from_json(rest[0]), sentence_from_json(rest[1]))
    if tag == "min":
        return Min(sentence_from_json(rest[0]), sentence_from_json(rest[1]))
    if tag == "plus":
        return Plus(sentence_from_json(rest[0]), sentence_from_json(rest[1]))
    if tag == "times":
        return Times(float(rest[0]), sentence_from_json(rest[1]))
    if tag == "lit":
        return Lit(float(rest[0]))
    if tag == "sup":
        return Sup(tuple(_binding_from_json(b) for b in rest[0]),
                   sentence_from_json(rest[1]))
    if tag == "inf":
        return Inf(tuple(_binding_from_json(b) for b in rest[0]),
                   sentence_from_json(rest[1]))
    if tag == "pred":
        return Pred(str(rest[0]), tuple(term_from_json(a) for a in rest[1]))
    raise ValueError(f"unknown formula tag {tag!r}")
