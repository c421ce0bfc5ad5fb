# Quick tour of the linear-algebra toolbox on inputs with closed-form
# answers. Everything printed here should match to rounding error.

import numpy as np

from ojak.linalg import (
    gram_schmidt_qr,
    hermitian_dilation,
    ky_fan_2k_norm,
    schatten_norm,
    subspace_distance,
    symmetric_eigendecompose,
)
from ojak.rng import make_generator

rng = make_generator(8)

print("== norm toolbox, known answers ==\n")

# nearly collinear columns: single-pass Gram-Schmidt would lose most of its
# orthogonality here, the re-orthogonalized version should not care
base = rng.standard_normal((12, 1))
Z = np.hstack([base, base + 1e-9 * rng.standard_normal((12, 2))])
Q = gram_schmidt_qr(Z)
defect = np.linalg.norm(Q.T @ Q - np.eye(3))
print(f"orthonormality defect on collinear-to-1e-9 columns: {defect:.2e}"
      "  (expect ~ 1e-15)")

# Jacobi eigendecomposition round trip
S = rng.standard_normal((8, 8))
S = 0.5 * (S + S.T)
eig = symmetric_eigendecompose(S)
recon = eig.eigenvectors @ np.diag(eig.eigenvalues) @ eig.eigenvectors.T
ref = np.sort(np.linalg.eigvalsh(S))[::-1]
print(f"8x8 eigendecomposition: reconstruction {np.linalg.norm(recon - S):.2e},"
      f" max eigenvalue gap vs lapack {np.abs(eig.eigenvalues - ref).max():.2e}")

# Schatten norms of diag(3, 4): p=1 trace 7, p=2 Frobenius 5, p=inf top 4
D = np.diag([3.0, 4.0])
print(f"schatten(diag(3,4)): p=1 {schatten_norm(D, 1):.6f} (7),"
      f" p=2 {schatten_norm(D, 2):.6f} (5),"
      f" p=inf {schatten_norm(D, np.inf):.6f} (4)")

# Ky Fan (2,k): root-sum-square of the k largest singular values
D5 = np.diag([5.0, 4.0, 3.0, 2.0, 1.0])
print(f"ky_fan_2k(diag(5..1), k=2): {ky_fan_2k_norm(D5, 2):.6f}"
      f" (sqrt(41) = {np.sqrt(41.0):.6f})")

# the dilation is symmetric and its spectrum is +/- the singular values
A = rng.standard_normal((2, 3))
sv = np.linalg.svd(A, compute_uv=False)
spec = symmetric_eigendecompose(hermitian_dilation(A)).eigenvalues
expect = np.sort(np.concatenate([sv, [0.0], -sv]))[::-1]
print(f"dilation spectrum vs (+s, 0, -s): {np.abs(spec - expect).max():.2e}")

# rotating one basis vector of a plane by theta moves the subspace by
# exactly sin(theta)
theta = 0.3
V = np.eye(4)[:, :2]
W = V.copy()
W[0, 0], W[2, 0] = np.cos(theta), np.sin(theta)
print(f"plane rotated by 0.3 rad: distance {subspace_distance(W, V):.9f}"
      f" (sin 0.3 = {np.sin(theta):.9f})")
