#! /usr/bin/env python3
# A^{-1/2} b from a partial-fraction expansion and a single shifted solve.
#
# For t > 0,  t^{-1/2} = (2/pi) int_0^{pi/2} dtheta / (t cos^2 + sin^2),
# and Gauss-Legendre nodes on [0, pi/2] turn the integral into
#     sum_i w_i / (t - p_i),   p_i = -tan^2(theta_i),
# a rational function with negative real poles. Each pole is one shifted
# system (A - p_i I) x_i = b, and all of them share one Krylov run.

import os
import tempfile

import numpy as np

from shiftkrylov import PartialFractionSpec, SparseComplexMatrix, apply_rational
from shiftkrylov import read_coefficients, write_coefficients

nodes, w = np.polynomial.legendre.leggauss(12)
theta = np.pi / 4 * (nodes + 1)
weights = (2 / np.pi) * (np.pi / 4) * w / np.cos(theta) ** 2
poles = -np.tan(theta) ** 2
spec = PartialFractionSpec(weights, poles)

# coefficients can live in a plain text file, one pole per line
path = os.path.join(tempfile.mkdtemp(), "inv_sqrt.txt")
write_coefficients(path, spec)
spec = read_coefficients(path)

rng = np.random.default_rng(3)
n = 200
q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
lam = np.linspace(1.0, 4.0, n)
A = SparseComplexMatrix.from_dense((q * lam) @ q.conj().T)
b = rng.standard_normal(n) + 0j

out = apply_rational(A, b, spec, solver="sqmrcgstab", tol=1e-10)
exact = (q * lam ** -0.5) @ (q.conj().T @ b)
print(f"{len(spec)} poles, {out.solve.iterations} iterations")
print(f"rel. error vs eigendecomposition: {np.linalg.norm(out.value - exact) / np.linalg.norm(exact):.2e}")
print(f"scalar check at t=2: {spec(2.0).real:.12f} vs {2 ** -0.5:.12f}")
