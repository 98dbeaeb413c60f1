"""
Lie reduction of a Riccati equation to quadratures
==================================================

The equation Gamma' = (-2y - (y+1) Gamma - Gamma^2)/2 has the particular
solution Gamma = 1 - y. Gauging by that solution leaves a lower-triangular
curve B(y), whose fundamental solution needs only two quadratures; the
second involves erfi. The reduced and the direct projective solutions agree.
"""

import numpy as np

from wavemap.lie import (
    assemble_reduced_solution,
    lie_reduce,
    reduced_quadrature_solution,
    riccati_matrix,
    solve_lie_ivp,
)

A = riccati_matrix(lambda y: -y, lambda y: -(y + 1) / 4, 0.5)
g0, B = lie_reduce(A, lambda y: 1 - y, (1.0, 4.0), x0_derivative=lambda y: -1.0)
print("B(2) =\n", B(2.0))

red = reduced_quadrature_solution(B, 1.0, alpha2=0.5)
reduced = assemble_reduced_solution(g0, red, 1.0, 2.0)
direct = solve_lie_ivp(A, 2.0, 1.0, 4.0, tol=1e-12)

print(" y      gamma1       Gamma (reduced)   Gamma (direct)")
for y in np.linspace(1.0, 4.0, 7):
    print(f"{y:4.1f}  {red.gamma1(y):11.6f}  {reduced(y).value:16.10f}  {direct(y).value:16.10f}")
