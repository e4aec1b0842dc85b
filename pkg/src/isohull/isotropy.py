"""Isotropy constant, isotropic position, and the cone-decomposition bound.

For a centered convex body the minimum of the normalized second-moment
functional over invertible linear maps is attained in closed form by the
covariance determinant:

    L_K^2 = det(Cov)^{1/n} / |K|^{2/n}

while plugging the identity map into the same functional gives the weaker
bound sqrt(mean_square / (n |K|^{2/n})).  Both are affine invariants of
the body; their gap measures how far the covariance is from a multiple of
the identity.

The linear algebra here is deliberately self-contained: a pivoted
triangular factorization for determinants of small SPD matrices and a
cyclic Jacobi eigensolver for the symmetric inverse square root.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hull import FacetComplex
from .moments import polytope_covariance, polytope_volume
from .sphere_stats import PointCloud, ball_volume

__all__ = [
    "IsotropyReport",
    "spd_cholesky_det",
    "isotropy_constant",
    "isotropic_transform",
    "ball_fallback_bound",
    "NotSPDError",
]

SYMMETRY_TOL = 1e-10
PIVOT_TOL = 1e-14
JACOBI_TOL = 1e-12


class NotSPDError(ValueError):
    """Matrix is not symmetric positive-definite."""


@dataclass(frozen=True)
class IsotropyReport:
    """Scalars derived from one body: L_K and its identity-map upper bound."""

    l_k: float
    identity_bound: float
    vol_root: float
    det_cov: float


def spd_cholesky_det(matrix: np.ndarray) -> float:
    """Determinant of a symmetric positive-definite matrix.

    Classic Cholesky with an explicit pivot guard: any pivot at or below
    1e-14 aborts with :class:`NotSPDError` instead of propagating NaNs.
    """
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if float(np.abs(A - A.T).max()) > SYMMETRY_TOL:
        raise NotSPDError("not SPD: matrix is not symmetric")
    n = A.shape[0]
    L = np.zeros_like(A)
    for k in range(n):
        pivot = A[k, k] - float(L[k, :k] @ L[k, :k])
        if pivot <= PIVOT_TOL:
            raise NotSPDError(f"not SPD: pivot {pivot:.3e} at index {k}")
        L[k, k] = math.sqrt(pivot)
        if k + 1 < n:
            L[k + 1 :, k] = (A[k + 1 :, k] - L[k + 1 :, :k] @ L[k, :k]) / L[k, k]
    det_root = float(np.prod(np.diag(L)))
    return det_root * det_root


def _jacobi_eigh(matrix: np.ndarray, tol: float = JACOBI_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi sweeps.

    Returns (eigenvalues, orthogonal matrix Q) with A = Q diag(w) Q^T;
    sweeps run until every off-diagonal entry is at most ``tol`` (inputs
    here are O(1) covariance matrices, so the absolute threshold is fine).
    """
    A = np.array(matrix, dtype=float)
    n = A.shape[0]
    Q = np.eye(n)
    for _ in range(100):
        off = np.abs(A - np.diag(np.diag(A))).max() if n > 1 else 0.0
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= tol:
                    continue
                theta = 0.5 * math.atan2(2.0 * A[p, q], A[q, q] - A[p, p])
                c, s = math.cos(theta), math.sin(theta)
                rot_p = c * A[:, p] - s * A[:, q]
                rot_q = s * A[:, p] + c * A[:, q]
                A[:, p], A[:, q] = rot_p, rot_q
                rot_p = c * A[p, :] - s * A[q, :]
                rot_q = s * A[p, :] + c * A[q, :]
                A[p, :], A[q, :] = rot_p, rot_q
                rot_p = c * Q[:, p] - s * Q[:, q]
                rot_q = s * Q[:, p] + c * Q[:, q]
                Q[:, p], Q[:, q] = rot_p, rot_q
    return np.diag(A).copy(), Q


def isotropy_constant(volume: float, covariance: np.ndarray) -> IsotropyReport:
    """Isotropy constant of a centered body from its volume and covariance.

    ``l_k`` is the closed-form minimizer over invertible linear maps;
    ``identity_bound`` is the identity-map value
    sqrt(trace(covariance) / (n volume^{2/n})), so l_k <= identity_bound
    always, with equality exactly when the covariance is isotropic.
    Both quantities are invariant under rotations and scalings of the body.
    """
    if volume <= 0.0:
        raise ValueError(f"volume must be positive, got {volume}")
    cov = np.asarray(covariance, dtype=float)
    n = cov.shape[0]
    det = spd_cholesky_det(cov)
    vol_root = volume ** (1.0 / n)
    l_k = det ** (0.5 / n) / volume ** (1.0 / n)
    mean_square = float(np.trace(cov))
    identity_bound = math.sqrt(mean_square / (n * volume ** (2.0 / n)))
    return IsotropyReport(
        l_k=l_k, identity_bound=identity_bound, vol_root=vol_root, det_cov=det
    )


def isotropic_transform(fc: FacetComplex) -> tuple[np.ndarray, PointCloud]:
    """Linear map T putting the body in isotropic position, plus T(cloud).

    T = c * Cov^{-1/2} with the symmetric inverse square root (rotation
    part fixed to the identity) and c chosen so the image has volume one.
    Rebuilding the pipeline on the returned cloud yields covariance
    L_K^2 * Identity.
    """
    if fc.source is None:
        raise ValueError("complex has no source cloud to transform")
    vol = polytope_volume(fc)
    cov = polytope_covariance(fc)
    eigvals, Q = _jacobi_eigh(cov)
    if np.any(eigvals <= 0.0):
        raise NotSPDError("not SPD: covariance has a non-positive eigenvalue")
    inv_sqrt = (Q * (eigvals**-0.5)[None, :]) @ Q.T
    det_inv_sqrt = float(np.prod(eigvals**-0.5))
    scale = (det_inv_sqrt * vol) ** (-1.0 / fc.n)
    T = scale * inv_sqrt
    return T, fc.source.transformed(T)


def ball_fallback_bound(n: int, inradius: float) -> float:
    """Upper bound on L_K from a contained ball of the given radius.

    When r * B_2^n lies inside the (unit-vertex) body,
    L_K <= sqrt((w_n r^n)^{-2/n} / n) = 1 / (sqrt(n) r w_n^{1/n}).
    Decreasing in the inradius; O(1) in n for r bounded below.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if inradius <= 0.0:
        raise ValueError(f"inradius must be positive, got {inradius}")
    log_wn = math.log(ball_volume(n))
    return math.exp(-log_wn / n - math.log(inradius)) / math.sqrt(n)
