"""Dense-matrix primitives used by the closed-form geodesics.

All functions are pure and operate on float64 numpy arrays.
"""
import math

import numpy as np

SKEW_TOL = 1e-10
ORTHO_TOL = 1e-8
SVD_ZERO = 1e-12

# Pade [13/13] coefficients and the matching scaling threshold (Higham 2005).
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


class ContractViolation(ValueError):
    """An input broke the documented precondition of a kernel."""


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-d float64 array."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ContractViolation(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} has non-finite entries")
    return a


def _check_skew(s):
    s = as_matrix(s, "S")
    if s.shape[0] != s.shape[1]:
        raise ContractViolation(f"S must be square, got {s.shape}")
    asym = np.max(np.abs(s + s.T))
    if asym > SKEW_TOL:
        raise ContractViolation(f"S is not skew-symmetric (|S + S^T|_max = {asym:.3e})")
    return s


def expm_skew(s):
    """Matrix exponential of a skew-symmetric matrix.

    Scaling and squaring around a fixed [13/13] Pade approximant. For skew
    input the approximant is q(A)^{-1} q(A)^T, which is orthogonal up to the
    rounding of the linear solve, so the squared result stays orthogonal.
    """
    s = _check_skew(s)
    n = s.shape[0]
    norm1 = np.max(np.sum(np.abs(s), axis=0)) if n else 0.0
    if norm1 == 0.0:
        return np.eye(n)
    squarings = 0
    if norm1 > _THETA13:
        squarings = int(math.ceil(math.log2(norm1 / _THETA13)))
    a = s / (2.0 ** squarings)

    b = _PADE13
    eye = np.eye(n)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        r = r @ r
    return r


class SkewExpFlow:
    """The one-parameter group ``t -> exp(t S)`` for a fixed skew ``S``.

    ``iS`` is Hermitian, so a single ``eigh`` gives a unitary eigenbasis and
    every later evaluation costs two small complex products. Used when one
    generator is exponentiated at many times, as along a geodesic.
    """

    def __init__(self, s):
        s = _check_skew(s)
        lam, vec = np.linalg.eigh(1j * s)
        # exp(tS) = W diag(exp(-i lam t)) W^H
        self._lam = lam
        self._vec = vec
        self._vec_h = vec.conj().T
        self.dim = s.shape[0]

    def __call__(self, t):
        phase = np.exp(-1j * self._lam * t)
        return ((self._vec * phase) @ self._vec_h).real

    def columns(self, t, ncols):
        """First ``ncols`` columns of ``exp(tS)``."""
        phase = np.exp(-1j * self._lam * t)
        return ((self._vec * phase) @ self._vec_h[:, :ncols]).real


def compact_qr(a):
    """Reduced QR with a nonnegative diagonal of ``R``.

    Returns ``(q, r)`` with ``q`` of shape (n, k) and ``r`` (k, k).
    """
    a = as_matrix(a, "A")
    n, k = a.shape
    if n < k:
        raise ContractViolation(f"compact_qr needs n >= k, got {a.shape}")
    q, r = np.linalg.qr(a, mode="reduced")
    sign = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return q * sign, r * sign[:, None]


def compact_svd(a):
    """Thin SVD ``A = U diag(d) V^T`` with ``d`` nonincreasing.

    Singular values below ``SVD_ZERO`` are set to exactly zero.
    """
    a = as_matrix(a, "A")
    n, k = a.shape
    if n < k:
        raise ContractViolation(f"compact_svd needs n >= k, got {a.shape}")
    u, d, vt = np.linalg.svd(a, full_matrices=False)
    d = np.where(d < SVD_ZERO, 0.0, d)
    return u, d, vt.T


def orthonormal_complement(gamma):
    """Columns completing an orthonormal ``gamma`` to a basis of R^n.

    Returns an n x (n - k) array; zero columns when k == n.
    """
    gamma = as_matrix(gamma, "Gamma")
    n, k = gamma.shape
    if k > n:
        raise ContractViolation(f"Gamma has more columns than rows: {gamma.shape}")
    gram_err = np.max(np.abs(gamma.T @ gamma - np.eye(k)))
    if gram_err > ORTHO_TOL:
        raise ContractViolation(f"Gamma columns are not orthonormal (err {gram_err:.3e})")
    if k == n:
        return np.zeros((n, 0))
    q, _ = np.linalg.qr(gamma, mode="complete")
    comp = q[:, k:]
    # Householder Q is orthogonal to working precision; one Gram-Schmidt
    # sweep against gamma removes the residual coupling.
    comp = comp - gamma @ (gamma.T @ comp)
    comp, _ = np.linalg.qr(comp)
    return comp
