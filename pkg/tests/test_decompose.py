"""
test_decompose.py
-----------------
Unit tests for the Jacobi SVD, the signed 3x3 SVD and the HOSVD.
"""
import numpy as np
import pytest

from src.decompose import hosvd, is_hosvd_diagonal, jacobi_svd, mode_factor, svd3
from src.qstate import BlochTensor, rotate_local
from src.utils import ArgumentError


def _assert_rotation(m):
    assert np.allclose(m.T @ m, np.eye(3), atol=1e-12)
    assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-12)


def _haar_like(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1.0
    return q


# ---------------------------------------------------------------------------
# Jacobi SVD
# ---------------------------------------------------------------------------

def test_jacobi_svd_reconstructs(rng):
    a = rng.standard_normal((9, 3))
    u, s, v = jacobi_svd(a)
    assert np.allclose(u @ np.diag(s) @ v.T, a, atol=1e-12)
    assert np.allclose(v.T @ v, np.eye(3), atol=1e-12)
    assert np.allclose(np.sort(s), np.sort(np.linalg.svd(a, compute_uv=False)), atol=1e-12)


def test_jacobi_svd_rejects_wrong_shape():
    with pytest.raises(ArgumentError, match="m x 3"):
        jacobi_svd(np.ones((2, 3)))


# ---------------------------------------------------------------------------
# svd3
# ---------------------------------------------------------------------------

def _check_svd3(rng, matrices):
    for _ in range(matrices):
        m = rng.uniform(-1, 1, size=(3, 3))
        s = svd3(m)
        _assert_rotation(s.left)
        _assert_rotation(s.right)
        assert np.allclose(s.reconstruct(), m, atol=1e-12)
        mags = np.abs(s.diag)
        assert np.all(np.diff(mags) <= 1e-12)
        assert s.diag[0] >= 0 and s.diag[1] >= 0


def test_svd3_random_matrices(rng):
    _check_svd3(rng, matrices=50)


@pytest.mark.slow
def test_svd3_random_matrices_full_size(rng):
    _check_svd3(rng, matrices=10_000)


def test_svd3_identity_has_identity_factors():
    s = svd3(np.eye(3))
    assert np.allclose(s.left, np.eye(3))
    assert np.allclose(s.right, np.eye(3))
    assert np.allclose(s.diag, [1.0, 1.0, 1.0])


def test_svd3_negative_determinant_goes_to_last_entry():
    s = svd3(np.diag([1.0, 0.8, -0.6]))
    assert np.allclose(s.diag, [1.0, 0.8, -0.6], atol=1e-14)
    assert np.allclose(s.left, np.eye(3), atol=1e-14)
    assert np.allclose(s.right, np.eye(3), atol=1e-14)


def test_svd3_rank_deficient(rng):
    m = np.outer(rng.standard_normal(3), rng.standard_normal(3))
    s = svd3(m)
    _assert_rotation(s.left)
    _assert_rotation(s.right)
    assert np.allclose(s.reconstruct(), m, atol=1e-12)
    assert abs(s.diag[1]) <= 1e-12 and abs(s.diag[2]) <= 1e-12


def test_svd3_zero_matrix():
    s = svd3(np.zeros((3, 3)))
    assert np.allclose(s.diag, 0.0)
    _assert_rotation(s.left)


def test_svd3_rejects_non_finite():
    m = np.eye(3)
    m[1, 1] = np.nan
    with pytest.raises(ArgumentError, match="finite"):
        svd3(m)


# ---------------------------------------------------------------------------
# HOSVD
# ---------------------------------------------------------------------------

def test_hosvd_two_modes_matches_svd3(rng):
    m = rng.uniform(-1, 1, size=(3, 3))
    t = hosvd(m)
    assert np.allclose(t.superdiagonal(), svd3(m).diag, atol=1e-14)
    assert t.off_diagonal_max() == 0.0
    assert np.allclose(t.reconstruct(), m, atol=1e-12)


def test_hosvd_reconstructs_random_tensor(rng):
    block = rng.uniform(-1, 1, size=(3, 3, 3))
    t = hosvd(BlochTensor.from_correlation(block))
    for R in t.factors:
        _assert_rotation(R)
    assert np.allclose(t.reconstruct(), block, atol=1e-12)
    assert not is_hosvd_diagonal(t)


def test_hosvd_recovers_rotated_superdiagonal(rng):
    core = np.zeros((3, 3, 3))
    for a, d in enumerate([1.0, 0.8, 0.6]):
        core[a, a, a] = d
    rotations = [_haar_like(rng) for _ in range(3)]
    n = rotate_local(BlochTensor.from_correlation(core), [R.T for R in rotations])
    t = hosvd(n)
    assert is_hosvd_diagonal(t)
    assert t.off_diagonal_max() <= 1e-10
    assert np.allclose(np.abs(t.superdiagonal()), [1.0, 0.8, 0.6], atol=1e-10)


def test_mode_factor_orders_singular_values(rng):
    block = rng.uniform(-1, 1, size=(3, 3, 3))
    left, sigma = mode_factor(block, 1)
    _assert_rotation(left)
    assert np.all(np.diff(sigma) <= 1e-12)


def test_hosvd_rejects_bad_shape():
    with pytest.raises(ArgumentError, match="size 3"):
        hosvd(np.ones((3, 4)))
