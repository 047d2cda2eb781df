"""Unit tests for the detection formulas and their exact-oracle counterparts."""

import numpy as np
import pytest

from opsyslab import (
    EvalConfig,
    block,
    canonicalize,
    closure_gap,
    completion_witness,
    diagonal_algebra,
    dist_to_psd,
    evaluate,
    full_matrix_algebra,
    haar_unitary,
    op_norm,
    product_certificate_sentence,
    product_closure_defect,
    product_distance,
    random_contraction,
    random_hermitian,
    unitarity_score,
    unitary_average_decompose,
    unitary_defect,
    unitary_detect,
    unitary_plateau_constant,
    unitary_product_gap,
    unitary_span_defect,
    walter_matrix,
)

E11 = np.array([[1, 0], [0, 0]], dtype=complex)
E12 = np.array([[0, 1], [0, 0]], dtype=complex)
E21 = E12.conj().T

FAST = EvalConfig(multistart=8, max_iter=400, rng_seed=5)


# -- closure gap and completion witness --------------------------------------

def test_closure_gap_scalar_examples():
    assert closure_gap(0, 0, 0, 0) == pytest.approx(0.0, abs=1e-12)
    # z = -xy* kills the cross block; both squared norms equal 6
    assert closure_gap(1, 1, -1, 0) == pytest.approx(0.0, abs=1e-12)
    # lambda_max([[2,2],[2,6]]) = 4 + 2 sqrt(2) against 6
    assert closure_gap(1, 1, 1, 0) == pytest.approx(2 * np.sqrt(2) - 2, abs=1e-12)


def test_closure_gap_dimension_mismatch():
    with pytest.raises(ValueError):
        closure_gap(np.eye(2), np.eye(3), np.eye(2), np.eye(2))


def test_completion_witness_examples():
    assert np.allclose(completion_witness(1, 0), 0)
    assert np.allclose(completion_witness(E12, np.zeros((2, 2))),
                       np.array([[0, 0], [0, 1]]))


def test_completion_witness_row_identity():
    rng = np.random.default_rng(71)
    for _ in range(60):
        d = int(rng.integers(1, 4))
        x = random_contraction(rng, d)
        z = random_contraction(rng, d)
        b = completion_witness(x, z)
        assert op_norm(b) ** 2 <= op_norm(x @ x.conj().T + z @ z.conj().T) + 1e-12
        row = block([[2 * np.eye(d), x, z, b]])
        target = 4 + op_norm(x @ x.conj().T + z @ z.conj().T)
        assert abs(op_norm(row) ** 2 - target) <= 1e-8


# -- the triple-quantified closure sentence -----------------------------------

def test_closure_defect_closed_structures():
    r = product_closure_defect(full_matrix_algebra(2), full_matrix_algebra(2), FAST)
    assert r.defect <= 0.05
    assert r.bound_check <= 4 * np.sqrt(max(r.defect, 0.0)) + FAST.opt_tol
    r = product_closure_defect(diagonal_algebra(2), full_matrix_algebra(2), FAST)
    assert r.defect <= 0.05


def test_closure_defect_open_structure():
    r = product_closure_defect(canonicalize([E12], 2), full_matrix_algebra(2), FAST)
    assert r.defect >= 1 / 64 - FAST.opt_tol
    assert r.bound_check <= 4 * np.sqrt(r.defect) + FAST.opt_tol


def test_closure_requires_containment():
    with pytest.raises(ValueError):
        product_closure_defect(full_matrix_algebra(2), diagonal_algebra(2), FAST)


def test_closure_hinted_converse_stays_flat():
    # with z = -xy* the gap vanishes for every b, so the sup over b stays at zero
    rng = np.random.default_rng(2)
    system = full_matrix_algebra(2)
    for _ in range(20):
        x = random_contraction(rng, 2)
        y = random_contraction(rng, 2)
        z = -x @ y.conj().T
        b = random_contraction(rng, 2, radius=2.0)
        assert closure_gap(x, y, z, b) <= 1e-12


# -- unitarity scores ----------------------------------------------------------

def test_plateau_constant_oracle():
    assert unitary_plateau_constant() == pytest.approx(1.0, abs=1e-12)


def test_score_examples():
    assert unitarity_score(np.eye(1), 1, FAST) == pytest.approx(1.0, abs=1e-9)
    assert unitarity_score(np.zeros((1, 1)), 1, FAST) == pytest.approx(0.0, abs=1e-9)
    assert unitarity_score(np.diag([1.0, 0.5]), 1, FAST) < 1.0 - 0.05


def test_score_rejects_expansion():
    with pytest.raises(ValueError):
        unitarity_score(2 * np.eye(2), 1, FAST)


def test_score_constant_at_unitaries():
    rng = np.random.default_rng(13)
    values = [unitarity_score(haar_unitary(rng, 2), n, FAST)
              for n in (1, 2) for _ in range(3)]
    assert max(values) - min(values) <= 2 * FAST.opt_tol
    assert abs(values[0] - unitary_plateau_constant()) <= FAST.opt_tol


def test_detect_examples():
    assert unitary_detect(E12 + E21, 2, FAST)
    assert not unitary_detect(np.diag([1.0, 0.5]), 2, FAST)
    assert not unitary_detect(0.5 * np.eye(1), 2, FAST)


# -- positivity certificate ----------------------------------------------------

def test_walter_fixed_instance():
    w = walter_matrix(1, 1, 1)
    assert np.linalg.eigvalsh(w)[0] == pytest.approx(0.0, abs=1e-12)
    w = walter_matrix(1, 1, -1)
    # characteristic polynomial (x+1)(x-2)^2
    assert np.allclose(np.linalg.eigvalsh(w), [-1, 2, 2])
    assert dist_to_psd(w) == pytest.approx(1.0, abs=1e-10)


def test_walter_detects_products():
    rng = np.random.default_rng(31)
    for _ in range(20):
        d = int(rng.integers(1, 4))
        u, v = haar_unitary(rng, d), haar_unitary(rng, d)
        assert dist_to_psd(walter_matrix(u, v, u @ v)) <= 1e-9
        p = random_hermitian(rng, d)
        perturbed = walter_matrix(u, v, u @ v + 0.1 * p)
        assert dist_to_psd(perturbed) > 0.0


def test_walter_raw_variant_is_not_hermitian():
    rng = np.random.default_rng(37)
    u, v = haar_unitary(rng, 2), haar_unitary(rng, 2)
    raw = walter_matrix(u, v, u @ v, hermitian=False)
    assert op_norm(raw - raw.conj().T) > 0.1
    fixed = walter_matrix(u, v, u @ v)
    assert op_norm(fixed - fixed.conj().T) <= 1e-12


def test_certificate_sentence_on_algebra():
    r = evaluate(product_certificate_sentence(), {"A": full_matrix_algebra(2)},
                 FAST, hints=[{"x": lambda env: env["u"] @ env["v"]}])
    assert r.value <= FAST.opt_tol


# -- averages of four unitaries --------------------------------------------------

def test_decompose_examples():
    u1, u2, u3, u4 = unitary_average_decompose(np.zeros((2, 2)))
    assert np.allclose((u1 + u2 + u3 + u4) / 2, 0, atol=1e-12)
    u1, u2, u3, u4 = unitary_average_decompose(np.eye(2))
    assert np.allclose(u1, np.eye(2)) and np.allclose(u2, np.eye(2))
    assert np.allclose((u1 + u2 + u3 + u4) / 2, np.eye(2), atol=1e-12)


def test_decompose_property():
    rng = np.random.default_rng(43)
    for _ in range(50):
        x = random_contraction(rng, 3)
        units = unitary_average_decompose(x)
        assert op_norm(sum(units) / 2 - x) <= 1e-9
        assert max(unitary_defect(u) for u in units) <= 1e-9


def test_decompose_rejects_expansion():
    with pytest.raises(ValueError):
        unitary_average_decompose(1.5 * np.eye(2))


def test_unitary_span_defect_fixtures():
    assert unitary_span_defect(full_matrix_algebra(2), FAST) <= FAST.opt_tol
    assert unitary_span_defect(canonicalize([], 2), FAST) <= FAST.opt_tol
    assert unitary_span_defect(diagonal_algebra(2), FAST) <= FAST.opt_tol


def test_unitary_span_defect_rejects_open_structure():
    with pytest.raises(ValueError):
        unitary_span_defect(canonicalize([E12], 2), FAST)


# -- unitary products and the exact product distance -----------------------------

def test_product_gap_examples():
    assert unitary_product_gap(1, 1, 1) == pytest.approx(0.0, abs=1e-12)
    assert unitary_product_gap(1, 1, -1) == pytest.approx(2.0, abs=1e-12)
    assert unitary_product_gap(1j, 1, 1j) == pytest.approx(0.0, abs=1e-12)


def test_product_gap_identity():
    rng = np.random.default_rng(47)
    for _ in range(40):
        d = int(rng.integers(1, 5))
        u, v, w = (haar_unitary(rng, d) for _ in range(3))
        assert abs(unitary_product_gap(u, v, w) - op_norm(u - w @ v)) <= 1e-8


def test_product_distance_examples():
    m2 = full_matrix_algebra(2)
    x = random_contraction(np.random.default_rng(3), 2)
    assert product_distance(x, x, x @ x, m2) <= 1e-12
    assert product_distance(np.eye(2), np.eye(2), np.zeros((2, 2)), m2) == pytest.approx(1.0)
    assert product_distance(E12, E21, np.zeros((2, 2)), m2) == pytest.approx(1.0)


def test_product_distance_membership():
    m2 = full_matrix_algebra(2)
    with pytest.raises(ValueError):
        product_distance(np.eye(3), np.eye(3), np.eye(3), m2)
    diag = diagonal_algebra(2)
    with pytest.raises(ValueError):
        product_distance(E12, E12, np.zeros((2, 2)), diag)
