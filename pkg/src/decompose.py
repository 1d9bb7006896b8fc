"""
decompose.py
------------
Signed 3x3 SVD with both factors in SO(3), and HOSVD (Tucker) for tensors
whose every mode has size 3.

Conventions shared by svd3 and the HOSVD factors:
  1. singular vectors are signed so their first nonzero component is positive
     (the paired right vector flips with it);
  2. ordering is by singular value, descending; ties are broken by
     descending lexicographic order of the left column, so the identity
     decomposes into identity factors;
  3. an improper factor has its last column negated, and the matching
     diagonal entry absorbs the sign.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cmp_to_key

import numpy as np
import tensorly as tl

from src.config.settings import HOSVD_DIAGONAL_TOL, JACOBI_MAX_SWEEPS, JACOBI_TOL
from src.qstate import BlochTensor
from src.utils import ArgumentError, get_logger

logger = get_logger(__name__)

_TIE_TOL = 1e-12
_ZERO_TOL = 1e-12


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SignedSvd3:
    """M = left @ diag(diag) @ right.T with left, right in SO(3)."""

    left: np.ndarray
    diag: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.left @ np.diag(self.diag) @ self.right.T


@dataclass(frozen=True, eq=False)
class TuckerDecomposition:
    """
    n_{i1..iN} = sum_a core_{a1..aN} prod_k factors[k][a_k, i_k].

    Rows of each factor are the mode-k singular directions.
    """

    core: np.ndarray
    factors: tuple[np.ndarray, ...]

    @property
    def order(self) -> int:
        return self.core.ndim

    def reconstruct(self) -> np.ndarray:
        return np.asarray(tl.to_numpy(tl.tenalg.multi_mode_dot(tl.tensor(self.core), [R.T for R in self.factors])))

    def superdiagonal(self) -> np.ndarray:
        return np.array([self.core[(a,) * self.order] for a in range(3)])

    def off_diagonal_max(self) -> float:
        mask = np.ones(self.core.shape, dtype=bool)
        for a in range(3):
            mask[(a,) * self.order] = False
        return float(np.max(np.abs(self.core[mask]))) if mask.any() else 0.0


# ---------------------------------------------------------------------------
# Jacobi SVD
# ---------------------------------------------------------------------------
def jacobi_svd(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One-sided (Hestenes) Jacobi SVD of an m x 3 matrix, m >= 3.

    Returns (U, s, V) with a = U diag(s) V.T, s >= 0 unsorted, V orthogonal.
    Columns of U belonging to zero singular values are completed to an
    orthonormal set.
    """
    a = np.array(a, dtype=float)
    m, n = a.shape
    if n != 3 or m < 3:
        raise ArgumentError(f"jacobi_svd expects an m x 3 matrix with m >= 3, got {a.shape}")
    u = a.copy()
    v = np.eye(3)
    for sweep in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(2):
            for q in range(p + 1, 3):
                alpha = float(u[:, p] @ u[:, p])
                beta = float(u[:, q] @ u[:, q])
                gamma = float(u[:, p] @ u[:, q])
                if gamma == 0.0 or abs(gamma) <= JACOBI_TOL * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                up, uq = u[:, p].copy(), u[:, q].copy()
                u[:, p], u[:, q] = c * up - s * uq, s * up + c * uq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break
    else:
        logger.debug("Jacobi SVD stopped after %d sweeps", JACOBI_MAX_SWEEPS)

    sigma = np.linalg.norm(u, axis=0)
    scale = max(float(sigma.max()), 1.0)
    for j in range(3):
        if sigma[j] > _ZERO_TOL * scale:
            u[:, j] /= sigma[j]
        else:
            sigma[j] = 0.0
            u[:, j] = 0.0
    return _complete_columns(u, sigma), sigma, v


def _complete_columns(u: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Fill columns with sigma == 0 by Gram-Schmidt against the standard basis."""
    m = u.shape[0]
    for j in np.flatnonzero(sigma == 0.0):
        for e in np.eye(m):
            cand = e.copy()
            for k in range(3):
                if k != j and (sigma[k] > 0.0 or np.any(u[:, k])):
                    cand -= (u[:, k] @ cand) * u[:, k]
            norm = np.linalg.norm(cand)
            if norm > 1e-8:
                u[:, j] = cand / norm
                break
    return u


def _canonical_order(left: np.ndarray, sigma: np.ndarray, right: np.ndarray):
    """Sign-fix columns, then sort by sigma with lexicographic tie-breaking."""
    left, right = left.copy(), right.copy()
    for j in range(3):
        nz = np.flatnonzero(np.abs(left[:, j]) > _ZERO_TOL)
        if nz.size and left[nz[0], j] < 0:
            left[:, j] *= -1.0
            right[:, j] *= -1.0

    scale = max(float(np.max(np.abs(sigma))), 1.0)

    def compare(i: int, j: int) -> int:
        if abs(sigma[i] - sigma[j]) > _TIE_TOL * scale:
            return -1 if sigma[i] > sigma[j] else 1
        ci, cj = tuple(np.round(left[:, i], 12)), tuple(np.round(left[:, j], 12))
        if ci == cj:
            return 0
        return -1 if ci > cj else 1

    order = sorted(range(3), key=cmp_to_key(compare))
    return left[:, order], sigma[order].astype(float), right[:, order]


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------
def svd3(m: np.ndarray) -> SignedSvd3:
    """Signed SVD of a 3x3 matrix with both factors proper rotations."""
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ArgumentError(f"svd3 expects a 3x3 matrix, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ArgumentError("svd3 input must be finite")
    u, s, v = jacobi_svd(m)
    left, diag, right = _canonical_order(u, s, v)
    if np.linalg.det(left) < 0:
        left[:, 2] *= -1.0
        diag[2] *= -1.0
    if np.linalg.det(right) < 0:
        right[:, 2] *= -1.0
        diag[2] *= -1.0
    return SignedSvd3(left=left, diag=diag, right=right)


def _as_array(n: BlochTensor | np.ndarray) -> np.ndarray:
    if isinstance(n, BlochTensor):
        n.require_restricted("hosvd")
        return np.array(n.correlation_block())
    arr = np.asarray(n, dtype=float)
    if arr.shape != (3,) * arr.ndim:
        raise ArgumentError(f"hosvd expects every mode of size 3, got {arr.shape}")
    return arr


def mode_factor(t: np.ndarray, mode: int) -> tuple[np.ndarray, np.ndarray]:
    """Proper-rotation left factor of the mode-k unfolding and its singular values."""
    unfolded = np.asarray(tl.to_numpy(tl.unfold(tl.tensor(t), mode)))
    _, sigma, left = jacobi_svd(unfolded.T)
    left, sigma, _ = _canonical_order(left, sigma, np.eye(3))
    if np.linalg.det(left) < 0:
        left[:, 2] *= -1.0
    return left, sigma


def hosvd(n: BlochTensor | np.ndarray) -> TuckerDecomposition:
    """
    Higher-order SVD with mode-k unfoldings; factors are proper rotations.

    Two-index input goes through svd3 so the core is exactly diagonal even
    when singular values are degenerate.
    """
    t = _as_array(n)
    order = t.ndim
    if order < 2:
        raise ArgumentError("hosvd needs at least two modes")
    if order == 2:
        s = svd3(t)
        return TuckerDecomposition(core=np.diag(s.diag), factors=(s.left.T.copy(), s.right.T.copy()))

    factors = tuple(mode_factor(t, k)[0].T for k in range(order))
    core = np.asarray(tl.to_numpy(tl.tenalg.multi_mode_dot(tl.tensor(t), list(factors))))
    return TuckerDecomposition(core=core, factors=factors)


def is_hosvd_diagonal(t: TuckerDecomposition, tol: float = HOSVD_DIAGONAL_TOL) -> bool:
    """True iff every off-superdiagonal core entry is within tol of zero."""
    return t.off_diagonal_max() <= tol
