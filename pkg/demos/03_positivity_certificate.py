"""A 3x3 block positivity certificate for products of unitaries.

For unitaries u, v the block matrix [[1,u,x],[u*,1,v],[x*,v*,1]] is PSD
exactly when x = uv: at the product it factors as the rank-one square w w*
with w = (1, u*, (uv)*)^T, and any deviation pushes an eigenvalue below
zero.  The same certificate drives a two-quantifier sentence over a matrix
algebra, with the analytic witness x = uv attached as a hint.
"""

import numpy as np

from opsyslab import (
    dist_to_psd,
    evaluate,
    full_matrix_algebra,
    haar_unitary,
    product_certificate_sentence,
    walter_matrix,
)

rng = np.random.default_rng(3)

print("fixed scalar instance u = v = 1, x = -1:")
w = walter_matrix(1, 1, -1)
print(w.real.astype(int))
print(f"eigenvalues {np.linalg.eigvalsh(w)}  ->  distance to PSD cone "
      f"{dist_to_psd(w):.6f}")

print("\nrandom unitary pairs in M3:")
u, v = haar_unitary(rng, 3), haar_unitary(rng, 3)
exact = dist_to_psd(walter_matrix(u, v, u @ v))
print(f"  at x = u v:          distance {exact:.2e}  (PSD up to rounding)")
for t in (0.01, 0.1, 0.5):
    p = np.diag(rng.uniform(-1, 1, 3)).astype(complex)
    off = dist_to_psd(walter_matrix(u, v, u @ v + t * p))
    print(f"  at x = u v + {t:4.2f} p: distance {off:.3e}")

print("\nquantified form over M2 (hint x = uv):")
result = evaluate(product_certificate_sentence(), {"A": full_matrix_algebra(2)},
                  hints=[{"x": lambda env: env["u"] @ env["v"]}])
print(f"  sup_u,v inf_x d(certificate, PSD cone) = {result.value:.2e}")
