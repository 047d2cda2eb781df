"""Schwarz-type inequalities and rigidity of u.c.p. maps, via Choi matrices.

A unital completely positive map obeys phi(x)* phi(x) <= phi(x*x) and a
Cauchy-Schwarz refinement; both are certified here over a random population
of exactly-unital Choi matrices.  The rigidity side: a u.c.p. map carrying
unitaries to unitaries multiplies, and a bijective u.c.p. isometry is a
*-isomorphism whose inverse carries unitaries back to unitaries.
"""

import numpy as np

from opsyslab import (
    UcpMap,
    clock_shift_unitaries,
    cs_inequality_residual,
    haar_unitary,
    isometry_check,
    kadison_schwarz_defect,
    mult_domain_defect,
    pisier_check,
    random_contraction,
    random_ucp,
)

rng = np.random.default_rng(23)

print("inequality suite over 400 random u.c.p. maps (d, k <= 3):")
worst_ks, worst_cs = np.inf, np.inf
for i in range(400):
    d, k = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    phi = random_ucp(d, k, 9_000 + i)
    worst_ks = min(worst_ks, kadison_schwarz_defect(phi, random_contraction(rng, d)))
    worst_cs = min(worst_cs, cs_inequality_residual(
        phi, random_contraction(rng, d), random_contraction(rng, d)))
print(f"  smallest Schwarz gap eigenvalue: {worst_ks:.2e}  (>= 0 up to rounding)")
print(f"  smallest Cauchy-Schwarz residual: {worst_cs:.2e}")

print("\nmultiplicative domain of the diagonal conditional expectation on M2:")
expectation = UcpMap.diagonal_expectation(2)
e11 = np.diag([1.0, 0.0]).astype(complex)
offdiag = np.array([[0, 1], [1, 0]], dtype=complex)
print(f"  defect at the diagonal e11:    {mult_domain_defect(expectation, e11):.2e}")
print(f"  defect at the off-diagonal:    {mult_domain_defect(expectation, offdiag):.2f}")

print("\nunitary preservation vs multiplicativity:")
units = clock_shift_unitaries(2)
pairs = [(random_contraction(rng, 2), random_contraction(rng, 2)) for _ in range(6)]
for name, phi in [
    ("unitary conjugation", UcpMap.conjugation(haar_unitary(rng, 2))),
    ("block embedding x -> diag(x, x)", UcpMap.direct_sum_embedding(2)),
    ("diagonal expectation", expectation),
]:
    rep = pisier_check(phi, units, pairs + [(units[1], units[1].conj().T)])
    print(f"  {name:<34} preservation {rep.unitary_preservation_defect:.2e}"
          f"  multiplicativity {rep.hom_defect:.2e}")

print("\nbijective u.c.p. isometry (a conjugation):")
conj = UcpMap.conjugation(haar_unitary(rng, 3))
rep = isometry_check(conj, [random_contraction(rng, 3) for _ in range(8)])
print(f"  isometry defect {rep.isometry_defect:.2e}, multiplicativity "
      f"{rep.hom_defect:.2e}, unitary preimages off by {rep.preimage_unitary_defect:.2e}")

print("\nnon-example: the transpose map is positive and unital but its Choi")
transpose = UcpMap.transpose_map(2)
print(f"matrix is the swap with eigenvalue -1 (cp defect {transpose.cp_defect:.1f}),")
print("so it is rejected at the complete-positivity precondition.")
