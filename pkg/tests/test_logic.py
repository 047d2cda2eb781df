"""Unit tests for the sentence AST and its optimizing evaluator."""

import numpy as np
import pytest

from opsyslab import (
    AbsDiff,
    Ball,
    BallSpec,
    Const,
    DotMinus,
    EvalConfig,
    Inf,
    Lit,
    Max,
    Min,
    NestingDepthError,
    Norm,
    NormSq,
    Plus,
    Pred,
    PredicateRegistry,
    Prod,
    Scale,
    Sum,
    Sup,
    Times,
    Unit,
    Var,
    canonicalize,
    diagonal_algebra,
    evaluate,
    free_variables,
    full_matrix_algebra,
    sample_ball,
    sentence_from_json,
    sentence_to_json,
    substitute,
)
from opsyslab.defects import unitarity_score_formula

E12 = np.array([[0, 1], [0, 0]], dtype=complex)

FAST = EvalConfig(multistart=8, max_iter=400, rng_seed=7)


def test_sup_ball_constraint_is_identically_zero():
    f = Sup((("x", Ball("A", 1.0)),), DotMinus(Norm(Var("x")), Lit(1.0)))
    r = evaluate(f, {"A": full_matrix_algebra(2)}, FAST)
    assert r.value <= FAST.opt_tol
    assert r.bound_kind == "lower-estimate"


def test_inf_norm_to_identity_over_scalars():
    f = Inf((("x", Ball("A", 1.0)),), Norm(Sum(Var("x"), Unit(-1))))
    r = evaluate(f, {"A": canonicalize([], 3)}, FAST)
    assert r.value <= FAST.opt_tol
    assert r.bound_kind == "upper-estimate"
    assert np.allclose(r.witnesses["x"], np.eye(3), atol=1e-4)


def test_sup_norm_sq_reaches_ball_radius():
    f = Sup((("x", Ball("A", 1.0)),), NormSq(Var("x")))
    r = evaluate(f, {"A": full_matrix_algebra(2)}, FAST)
    assert abs(r.value - 1.0) <= FAST.opt_tol


def test_determinism():
    f = Sup((("x", Ball("A", 1.0)),), NormSq(Var("x")))
    r1 = evaluate(f, {"A": full_matrix_algebra(2)}, FAST)
    r2 = evaluate(f, {"A": full_matrix_algebra(2)}, FAST)
    assert r1.value == r2.value
    assert np.array_equal(r1.witnesses["x"], r2.witnesses["x"])


def test_witnesses_reproduce_value():
    f = Sup((("x", Ball("A", 1.0)),), NormSq(Var("x")))
    r = evaluate(f, {"A": full_matrix_algebra(2)}, FAST)
    assert np.linalg.norm(r.witnesses["x"], 2) ** 2 == pytest.approx(r.value, abs=1e-9)


def test_sup_dominates_sampled_points():
    system = full_matrix_algebra(2)
    body = NormSq(Var("x"))
    r = evaluate(Sup((("x", Ball("A", 1.0)),), body), {"A": system}, FAST)
    for w in sample_ball(BallSpec(system, 1.0), 5, 10):
        plugged = evaluate(NormSq(Const(w)), {"A": system}, FAST)
        assert r.value >= plugged.value - FAST.opt_tol


def test_inf_below_sampled_points():
    system = full_matrix_algebra(2)
    r = evaluate(Inf((("x", Ball("A", 1.0)),), NormSq(Var("x"))), {"A": system}, FAST)
    for w in sample_ball(BallSpec(system, 1.0), 6, 10):
        plugged = evaluate(NormSq(Const(w)), {"A": system}, FAST)
        assert r.value <= plugged.value + FAST.opt_tol


def test_monotone_connectives():
    # random trees over the monotone repertoire; raising a leaf never lowers the value
    rng = np.random.default_rng(55)

    def build(depth):
        if depth == 0:
            return Lit(float(rng.uniform(-2, 2)))
        pick = rng.integers(0, 5)
        if pick == 0:
            return Plus(build(depth - 1), build(depth - 1))
        if pick == 1:
            return Max(build(depth - 1), build(depth - 1))
        if pick == 2:
            return Min(build(depth - 1), build(depth - 1))
        if pick == 3:
            return Times(float(rng.uniform(0, 2)), build(depth - 1))
        return DotMinus(build(depth - 1), Lit(float(rng.uniform(0, 1))))

    def bump(node, delta):
        if isinstance(node, Lit):
            return Lit(node.value + float(rng.uniform(0, delta)))
        if isinstance(node, Plus):
            return Plus(bump(node.left, delta), bump(node.right, delta))
        if isinstance(node, Max):
            return Max(bump(node.left, delta), bump(node.right, delta))
        if isinstance(node, Min):
            return Min(bump(node.left, delta), bump(node.right, delta))
        if isinstance(node, Times):
            return Times(node.coeff, bump(node.arg, delta))
        return DotMinus(bump(node.left, delta), node.right)

    for _ in range(40):
        tree = build(4)
        bigger = bump(tree, 0.5)
        v1 = evaluate(tree, {}, FAST).value
        v2 = evaluate(bigger, {}, FAST).value
        assert v2 >= v1 - 1e-12


def test_bound_kind_tags():
    system = full_matrix_algebra(2)
    assert evaluate(Lit(0.5), {}, FAST).bound_kind == "exact"
    sup_only = Sup((("x", Ball("A", 1.0)),), Norm(Var("x")))
    assert evaluate(sup_only, {"A": system}, FAST).bound_kind == "lower-estimate"
    alt = Sup((("x", Ball("A", 1.0)),),
              Inf((("y", Ball("A", 1.0)),),
                  Norm(Sum(Var("x"), Scale(-1.0, Var("y"))))))
    assert evaluate(alt, {"A": system}, FAST).bound_kind == "heuristic"


def test_nesting_cap():
    system = full_matrix_algebra(2)
    deep = Sup((("a", Ball("A", 1.0)),),
               Inf((("b", Ball("A", 1.0)),),
                   Sup((("c", Ball("A", 1.0)),),
                       Inf((("d", Ball("A", 1.0)),),
                           Norm(Var("a"))))))
    with pytest.raises(NestingDepthError):
        evaluate(deep, {"A": system}, FAST)


def test_free_variable_rejected():
    with pytest.raises(ValueError):
        evaluate(Norm(Var("x")), {"A": full_matrix_algebra(2)}, FAST)


def test_unresolved_structure_rejected():
    f = Sup((("x", Ball("Q", 1.0)),), Norm(Var("x")))
    with pytest.raises(ValueError):
        evaluate(f, {"A": full_matrix_algebra(2)}, FAST)


def test_dimension_mismatch_rejected():
    f = Norm(Sum(Const(np.eye(2)), Const(np.eye(3))))
    with pytest.raises(ValueError):
        evaluate(f, {}, FAST)


def test_containment_precondition():
    f = Sup((("x", Ball("A", 1.0)),), Norm(Var("x")))
    with pytest.raises(ValueError):
        evaluate(f, {"A": full_matrix_algebra(2), "B": diagonal_algebra(2)}, FAST)


def test_product_gating():
    open_system = canonicalize([E12], 2)  # not product-closed
    f = Sup((("x", Ball("A", 1.0)),), Norm(Prod(Var("x"), Var("x"))))
    with pytest.raises(ValueError):
        evaluate(f, {"A": open_system}, FAST)
    # fine over a closed structure
    r = evaluate(f, {"A": diagonal_algebra(2)}, FAST)
    assert 0.0 <= r.value <= 1.0 + FAST.opt_tol


def test_registry_definitional_expansion():
    reg = PredicateRegistry()
    psi1 = unitarity_score_formula("u", 1, "F")
    handle = reg.register("Q1", ("u",), psi1)
    assert reg.get("Q1") is handle
    sentence = Sup((("u", Ball("A", 1.0)),),
                   AbsDiff(Pred("Q1", (Var("u"),)), psi1))
    m1 = full_matrix_algebra(1)
    r = evaluate(sentence, {"A": m1, "F": m1}, FAST, registry=reg)
    assert r.value == 0.0


def test_registry_collision_and_arity():
    reg = PredicateRegistry()
    reg.register("P", ("u",), Norm(Var("u")))
    with pytest.raises(ValueError):
        reg.register("P", ("u",), Norm(Var("u")))
    with pytest.raises(ValueError):
        reg.register("Q", ("u", "v"), Norm(Var("u")))  # free vars do not match
    bad_use = Sup((("x", Ball("A", 1.0)),), Pred("P", (Var("x"), Var("x"))))
    with pytest.raises(ValueError):
        evaluate(bad_use, {"A": full_matrix_algebra(2)}, FAST, registry=reg)


def test_substitute_and_free_variables():
    body = Norm(Sum(Var("x"), Var("y")))
    assert free_variables(body) == {"x", "y"}
    closed = substitute(body, {"x": Const(np.eye(2)), "y": Const(np.eye(2))})
    assert free_variables(closed) == set()
    r = evaluate(closed, {}, FAST)
    assert r.value == pytest.approx(2.0)


def test_sentence_json_round_trip():
    sentence = Sup((("x", Ball("A", 1.0)),),
                   DotMinus(NormSq(Var("x")), Lit(0.25)))
    back = sentence_from_json(sentence_to_json(sentence))
    system = full_matrix_algebra(2)
    assert evaluate(back, {"A": system}, FAST).value == \
        evaluate(sentence, {"A": system}, FAST).value


def test_alternating_witnesses_reproduce_value():
    from opsyslab import closure_gap, closure_sentence

    system = canonicalize([E12], 2)
    ambient = full_matrix_algebra(2)
    r = evaluate(closure_sentence(), {"A": system, "B": ambient}, FAST)
    w = r.witnesses
    replayed = closure_gap(w["x"], w["y"], w["z"], w["b"])
    assert replayed == pytest.approx(r.value, abs=FAST.opt_tol)


def test_hints_are_used():
    system = full_matrix_algebra(2)
    target = np.array([[0, 1], [1, 0]], dtype=complex)
    f = Inf((("x", Ball("A", 1.0)),), Norm(Sum(Var("x"), Const(-target))))
    tiny = EvalConfig(multistart=1, max_iter=2, rng_seed=1)
    hinted = evaluate(f, {"A": system}, tiny, hints=[{"x": target}])
    assert hinted.value <= 1e-9
