"""Dense real linear algebra primitives.

Hand-rolled kernels on top of numpy array arithmetic: modified Gram-Schmidt
orthonormalization, cyclic Jacobi eigendecomposition, one-sided Jacobi SVD,
Schatten and Ky Fan norms, subspace distance, Hermitian dilation, and a small
right-solver computing B @ inv(G). The decompositions avoid LAPACK on purpose:
they are deterministic across BLAS builds, simple to audit, and accurate at
the moderate sizes (d up to a few hundred) this package targets. Vector and
Frobenius norms still go through numpy.

All functions are pure; returned arrays are fresh and safe to share read-only.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidK,
    InvalidP,
    InvalidShape,
    NoConvergence,
    NotOrthonormal,
    NotSymmetric,
    RankDeficient,
    Singular,
)

TOL_ORTH = 1e-10
TOL_EIG = 1e-10     # relative reconstruction error
TOL_SYM = 1e-12     # relative symmetry defect
TOL_RANK = 1e-12    # pivot threshold, relative to the largest column norm
TOL_SOLVE = 1e-10
COND_MAX = 1e12
MAX_SWEEPS = 100

# Threshold at which an off-diagonal Jacobi target counts as annihilated.
_JACOBI_EPS = 1e-14


def as_matrix(X, name: str = "matrix") -> np.ndarray:
    """Validate and return a 2-d float array with finite entries."""
    A = np.asarray(X, dtype=float)
    if A.ndim != 2:
        raise InvalidShape(f"{name} must be 2-d, got shape {A.shape}")
    if A.size and not np.all(np.isfinite(A)):
        raise InvalidShape(f"{name} contains non-finite entries")
    return A


@dataclass
class EigenDecomposition:
    """Eigenvalues sorted descending, eigenvectors column-paired with them."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass
class SingularDecomposition:
    """Nonnegative singular values sorted descending, orthonormal factors.

    left @ diag(singular_values) @ right.T reconstructs the input.
    """

    singular_values: np.ndarray
    left: np.ndarray
    right: np.ndarray


def gram_schmidt_qr(Z) -> np.ndarray:
    """Orthonormalize the columns of Z by modified Gram-Schmidt.

    One full re-orthogonalization pass follows the first ("twice is enough"):
    classical single-pass Gram-Schmidt loses orthogonality in the presence of
    near-dependent columns, a second pass restores it to machine precision.

    Raises RankDeficient when a pivot norm falls below TOL_RANK times the
    largest original column norm, which signals a degenerate iterate.
    """
    Z = as_matrix(Z, "Z")
    d, k = Z.shape
    if d < k:
        raise InvalidShape(f"need rows >= cols, got {d}x{k}")
    col_scales = np.sqrt(np.sum(Z * Z, axis=0))
    largest = float(col_scales.max()) if k else 0.0
    Q = Z.copy()
    for _ in range(2):
        for j in range(k):
            for i in range(j):
                Q[:, j] -= np.dot(Q[:, i], Q[:, j]) * Q[:, i]
            nrm = float(np.linalg.norm(Q[:, j]))
            if nrm <= TOL_RANK * largest:
                raise RankDeficient(
                    f"column {j} collapsed (pivot {nrm:.3e} vs scale {largest:.3e})"
                )
            Q[:, j] /= nrm
    return Q


def _check_symmetric(S: np.ndarray) -> np.ndarray:
    scale = float(np.linalg.norm(S))
    defect = float(np.linalg.norm(S - S.T))
    if defect > TOL_SYM * max(scale, 1e-300):
        raise NotSymmetric(f"symmetry defect {defect:.3e} exceeds {TOL_SYM} * {scale:.3e}")
    return 0.5 * (S + S.T)


def symmetric_eigendecompose(S) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Eigenvalues come out sorted descending. Each eigenvector column is signed
    so its largest-magnitude entry is positive (ties broken by lowest index),
    which makes outputs deterministic and directly comparable across runs.
    """
    S = as_matrix(S, "S")
    d1, d2 = S.shape
    if d1 != d2:
        raise InvalidShape(f"expected square matrix, got {d1}x{d2}")
    A = _check_symmetric(S)
    d = d1
    Q = np.eye(d)
    if d > 1:
        scale = max(float(np.linalg.norm(A)), 1e-300)
        for _ in range(MAX_SWEEPS):
            off = np.linalg.norm(A - np.diag(np.diag(A)))
            if off <= _JACOBI_EPS * scale:
                break
            for p in range(d - 1):
                for q in range(p + 1, d):
                    apq = A[p, q]
                    if abs(apq) <= _JACOBI_EPS * scale * 1e-2:
                        continue
                    tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                    t = np.sign(tau) if tau != 0 else 1.0
                    t = t / (abs(tau) + np.hypot(tau, 1.0))
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    rp, rq = A[p, :].copy(), A[q, :].copy()
                    A[p, :] = c * rp - s * rq
                    A[q, :] = s * rp + c * rq
                    cp, cq = A[:, p].copy(), A[:, q].copy()
                    A[:, p] = c * cp - s * cq
                    A[:, q] = s * cp + c * cq
                    A[p, q] = 0.0
                    A[q, p] = 0.0
                    qp, qq = Q[:, p].copy(), Q[:, q].copy()
                    Q[:, p] = c * qp - s * qq
                    Q[:, q] = s * qp + c * qq
        else:
            raise NoConvergence(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")
    vals = np.diag(A).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    Q = Q[:, order]
    _fix_column_signs(Q)
    return EigenDecomposition(eigenvalues=vals, eigenvectors=Q)


def _fix_column_signs(Q: np.ndarray, companion: np.ndarray | None = None) -> None:
    """Flip columns in place so each column's largest-magnitude entry is > 0."""
    for j in range(Q.shape[1]):
        col = Q[:, j]
        if col.size == 0:
            continue
        lead = col[int(np.argmax(np.abs(col)))]
        if lead < 0:
            Q[:, j] = -col
            if companion is not None:
                companion[:, j] = -companion[:, j]


def svd(X) -> SingularDecomposition:
    """Singular value decomposition via one-sided Jacobi rotations.

    Rotations are applied to column pairs of X until all pairs are mutually
    orthogonal; column norms are then the singular values. Works for any
    rectangular shape (wide inputs go through the transpose). Exactly zero
    singular directions get their left factor completed to an orthonormal
    basis deterministically.
    """
    X = as_matrix(X, "X")
    m, n = X.shape
    if m < n:
        flipped = svd(X.T)
        return SingularDecomposition(
            singular_values=flipped.singular_values,
            left=flipped.right,
            right=flipped.left,
        )
    if n == 0:
        return SingularDecomposition(
            singular_values=np.zeros(0), left=np.zeros((m, 0)), right=np.zeros((0, 0))
        )
    A = X.copy()
    # pull extreme magnitudes toward 1 so squared column norms stay finite
    amax = float(np.max(np.abs(A)))
    unit = amax if (amax > 1e150 or (0.0 < amax < 1e-150)) else 1.0
    if unit != 1.0:
        A /= unit
    V = np.eye(n)
    scale = max(float(np.linalg.norm(A)), 1e-300)
    for _ in range(MAX_SWEEPS):
        worst = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = float(np.dot(A[:, p], A[:, p]))
                aqq = float(np.dot(A[:, q], A[:, q]))
                apq = float(np.dot(A[:, p], A[:, q]))
                denom = np.sqrt(app * aqq)
                if denom <= (1e-30 * scale) ** 2:
                    continue
                ratio = abs(apq) / denom
                worst = max(worst, ratio)
                if ratio <= _JACOBI_EPS:
                    continue
                tau = (aqq - app) / (2.0 * apq)
                t = np.sign(tau) if tau != 0 else 1.0
                t = t / (abs(tau) + np.hypot(tau, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        if worst <= _JACOBI_EPS:
            break
    else:
        raise NoConvergence(f"one-sided Jacobi did not converge in {MAX_SWEEPS} sweeps")
    raw = np.sqrt(np.sum(A * A, axis=0))
    order = np.argsort(-raw, kind="stable")
    raw = raw[order]
    A = A[:, order]
    V = V[:, order]
    U = np.zeros((m, n))
    tiny = TOL_RANK * max(float(raw[0]) if n else 0.0, 1e-300)
    missing = []
    for j in range(n):
        if raw[j] > tiny:
            U[:, j] = A[:, j] / raw[j]
        else:
            missing.append(j)
    sig = unit * raw
    if missing:
        _complete_columns(U, missing)
    _fix_column_signs(U, companion=V)
    return SingularDecomposition(singular_values=sig, left=U, right=V)


def _complete_columns(U: np.ndarray, missing: list[int]) -> None:
    """Fill the listed columns with vectors orthonormal to the rest of U."""
    m = U.shape[0]
    filled = [j for j in range(U.shape[1]) if j not in missing]
    basis = [U[:, j] for j in filled]
    cursor = 0
    for j in missing:
        while True:
            if cursor >= m:
                raise NoConvergence("failed to complete an orthonormal basis")
            v = np.zeros(m)
            v[cursor] = 1.0
            cursor += 1
            for b in basis:
                v -= np.dot(b, v) * b
            for b in basis:
                v -= np.dot(b, v) * b
            nrm = float(np.linalg.norm(v))
            if nrm > 0.5:
                v /= nrm
                U[:, j] = v
                basis.append(v)
                break


def singular_values(X) -> np.ndarray:
    return svd(X).singular_values


def spectral_norm(X) -> float:
    """Largest singular value (operator 2-norm)."""
    s = singular_values(X)
    return float(s[0]) if s.size else 0.0


def schatten_norm(X, p) -> float:
    """lp norm of the singular values; p = inf gives the spectral norm."""
    if p != np.inf and p < 1:
        raise InvalidP(f"need p >= 1 or p = inf, got {p}")
    s = singular_values(X)
    if s.size == 0:
        return 0.0
    if p == np.inf:
        return float(s[0])
    top = float(s[0])
    if top == 0.0:
        return 0.0
    # factor out the head to dodge overflow for large p
    return float(top * np.sum((s / top) ** p) ** (1.0 / p))


def ky_fan_2k_norm(X, k: int) -> float:
    """Square root of the sum of the k largest squared singular values."""
    X = as_matrix(X, "X")
    if not 1 <= k <= min(X.shape):
        raise InvalidK(f"need 1 <= k <= {min(X.shape)}, got {k}")
    s = singular_values(X)
    return float(np.sqrt(np.sum(s[:k] ** 2)))


def _check_orthonormal(W: np.ndarray, name: str) -> None:
    G = W.T @ W - np.eye(W.shape[1])
    defect = float(np.linalg.norm(G)) if G.size else 0.0
    if defect > TOL_ORTH:
        raise NotOrthonormal(f"{name} orthonormality defect {defect:.3e} > {TOL_ORTH}")


def subspace_distance(W, V) -> float:
    """Spectral norm of the projector difference ||V V^T - W W^T||.

    For two d x k frames with orthonormal columns this equals
    sqrt(1 - sigma_min(V^T W)^2), which is what gets computed (the d x d
    projector difference is never formed). Both Gram products G^T G and
    G G^T are decomposed and the smaller minimal eigenvalue is used, which
    makes the function exactly symmetric in its arguments.
    """
    W = as_matrix(W, "W")
    V = as_matrix(V, "V")
    if W.shape != V.shape:
        raise DimensionMismatch(f"shape mismatch {W.shape} vs {V.shape}")
    _check_orthonormal(W, "W")
    _check_orthonormal(V, "V")
    k = W.shape[1]
    if k == 0:
        return 0.0
    G = V.T @ W
    lo1 = float(symmetric_eigendecompose(G.T @ G).eigenvalues[-1])
    lo2 = float(symmetric_eigendecompose(G @ G.T).eigenvalues[-1])
    smin_sq = min(max(lo1, 0.0), max(lo2, 0.0), 1.0)
    return float(np.sqrt(max(1.0 - smin_sq, 0.0)))


def hermitian_dilation(A) -> np.ndarray:
    """Symmetric block matrix ((0, A), (A^T, 0)).

    Its nonzero eigenvalues are plus and minus the singular values of A,
    which turns rectangular singular value problems into symmetric ones.
    """
    A = as_matrix(A, "A")
    d1, d2 = A.shape
    out = np.zeros((d1 + d2, d1 + d2))
    out[:d1, d1:] = A
    out[d1:, :d1] = A.T
    return out


def right_solve(B, G) -> np.ndarray:
    """Solve X @ G = B for X, i.e. compute B @ inv(G) without inverting.

    G is k x k and small; the solve runs partial-pivot LU on G^T (column
    pivoting with respect to G). A singular-value condition estimate guards
    the call: condition numbers above COND_MAX raise Singular, which is the
    near-singularity signal the diagnostics rely on.
    """
    B = as_matrix(B, "B")
    G = as_matrix(G, "G")
    kk = G.shape[0]
    if G.shape[0] != G.shape[1]:
        raise InvalidShape(f"G must be square, got {G.shape}")
    if B.shape[1] != kk:
        raise DimensionMismatch(f"B has {B.shape[1]} cols, G is {kk}x{kk}")
    if kk == 0:
        return np.zeros((B.shape[0], 0))
    s = singular_values(G)
    smin = float(s[-1])
    smax = float(s[0])
    if smin <= 0.0 or smax / smin > COND_MAX:
        cond = np.inf if smin <= 0.0 else smax / smin
        raise Singular(f"G condition estimate {cond:.3e} exceeds {COND_MAX:.1e}")
    # LU of G^T with partial pivoting, then G^T X^T = B^T.
    lu = G.T.copy()
    perm = np.arange(kk)
    for col in range(kk):
        piv = col + int(np.argmax(np.abs(lu[col:, col])))
        if piv != col:
            lu[[col, piv], :] = lu[[piv, col], :]
            perm[[col, piv]] = perm[[piv, col]]
        if lu[col, col] == 0.0:
            raise Singular("exact zero pivot in LU")
        lu[col + 1:, col] /= lu[col, col]
        if col + 1 < kk:
            lu[col + 1:, col + 1:] -= np.outer(lu[col + 1:, col], lu[col, col + 1:])
    rhs = B.T[perm, :].copy()
    for col in range(kk):          # forward: unit lower triangle
        rhs[col + 1:, :] -= np.outer(lu[col + 1:, col], rhs[col, :])
    for col in range(kk - 1, -1, -1):   # backward
        rhs[col, :] /= lu[col, col]
        if col:
            rhs[:col, :] -= np.outer(lu[:col, col], rhs[col, :])
    return rhs.T.copy()
