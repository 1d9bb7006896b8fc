"""
test_qstate.py
--------------
Unit tests for density matrices, Bloch tensors, frames and the conversions
between them.
"""
import numpy as np
import pytest

from src.qstate import (
    BlochTensor,
    DensityMatrix,
    MeasurementFrame,
    apply_measurement,
    bell_diagonal,
    bloch_from_density,
    density_from_bloch,
    frame_contraction,
    marginal,
    mutual_information,
    physicality,
    post_measurement_spectrum,
    random_restricted,
    rotate_local,
    shrink_to_physical,
    von_neumann_entropy,
)
from src.utils import ArgumentError, InvalidStateError, PreconditionError, UsageError


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1.0
    return q


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def test_density_rejects_non_hermitian():
    m = np.eye(4, dtype=complex) / 4
    m[0, 1] = 0.1
    with pytest.raises(InvalidStateError, match="Hermitian"):
        DensityMatrix(2, m)


def test_density_rejects_wrong_trace():
    with pytest.raises(InvalidStateError, match="trace"):
        DensityMatrix(2, np.eye(4) / 2)


def test_density_rejects_wrong_dimension():
    with pytest.raises(InvalidStateError, match="4x4"):
        DensityMatrix(2, np.eye(3) / 3)


def test_require_physical_names_min_eigenvalue():
    rho = density_from_bloch(BlochTensor.from_entries(2, {"11": 1.0, "22": 0.8, "33": 0.6}))
    with pytest.raises(InvalidStateError, match="min eigenvalue"):
        rho.require_physical()


def test_bloch_rejects_all_zero_label():
    with pytest.raises(ArgumentError, match="all-zero"):
        BlochTensor.from_entries(2, {"00": 1.0})


def test_bloch_json_rejects_malformed_payload():
    with pytest.raises(UsageError):
        BlochTensor.from_json({"n_qubits": 2, "entries": [{"label": "11"}]})
    with pytest.raises(UsageError):
        BlochTensor.from_json({"n_qubits": 2, "entries": [{"a": "00", "value": 1.0}]})


def test_frame_requires_unit_vectors():
    with pytest.raises(ArgumentError, match="unit"):
        MeasurementFrame(np.array([[1.0, 1.0, 0.0]]))


def test_restricted_check():
    general = BlochTensor.from_entries(2, {"30": 0.5, "33": 0.2})
    assert not general.is_restricted()
    with pytest.raises(PreconditionError):
        general.require_restricted("test")
    assert bell_diagonal(0.1, 0.2, 0.3).is_restricted()


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------

def test_bell_state_bloch_vector(bell_tensor):
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[0, 3] = rho[3, 0] = rho[3, 3] = 0.5
    n = bloch_from_density(DensityMatrix(2, rho))
    assert n.entries(tol=1e-14) == pytest.approx({"11": 1.0, "22": -1.0, "33": 1.0})
    assert np.allclose(n.coeffs, bell_tensor.coeffs, atol=1e-14)


def test_product_state_label_order():
    # |0><0| on qubit 1, maximally mixed qubit 2: only n_30 = 1
    rho = np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2)
    n = bloch_from_density(DensityMatrix(2, rho))
    assert n.entries(tol=1e-14) == pytest.approx({"30": 1.0})


def _check_round_trip(rng, n_qubits, tensors):
    for _ in range(tensors):
        coeffs = rng.uniform(-0.2, 0.2, size=(4,) * n_qubits)
        coeffs[(0,) * n_qubits] = 0.0
        n = BlochTensor(n_qubits, coeffs)
        back = bloch_from_density(density_from_bloch(n))
        assert np.max(np.abs(back.coeffs - n.coeffs)) <= 1e-12


@pytest.mark.parametrize("n_qubits", [1, 2, 3])
def test_round_trip_density_bloch(n_qubits, rng):
    _check_round_trip(rng, n_qubits, tensors=10)


@pytest.mark.slow
@pytest.mark.parametrize("n_qubits", [1, 2, 3])
def test_round_trip_density_bloch_full_size(n_qubits, rng):
    _check_round_trip(rng, n_qubits, tensors=1000)


def test_maximally_mixed_is_zero_tensor():
    n = bloch_from_density(DensityMatrix(3, np.eye(8) / 8))
    assert np.all(np.abs(n.coeffs) <= 1e-15)


def test_shrink_to_physical_lands_on_boundary(crossing_tensor):
    ok, lam = physicality(crossing_tensor)
    assert not ok and lam < 0
    shrunk, factor = shrink_to_physical(crossing_tensor)
    # Bell-diagonal tetrahedron: 1 - (1 + 0.8 + 0.6) t = 0
    assert factor == pytest.approx(1.0 / 2.4, abs=1e-12)
    assert density_from_bloch(shrunk).min_eigenvalue() == pytest.approx(0.0, abs=1e-12)


def test_shrink_keeps_physical_tensor(bell_tensor):
    same, factor = shrink_to_physical(bell_tensor.scaled(0.5))
    assert factor == 1.0
    assert np.array_equal(same.coeffs, bell_tensor.scaled(0.5).coeffs)


# ---------------------------------------------------------------------------
# Entropies
# ---------------------------------------------------------------------------

def test_entropy_of_maximally_mixed():
    assert von_neumann_entropy(DensityMatrix(3, np.eye(8) / 8)) == pytest.approx(3.0, abs=1e-12)


def test_bell_mutual_information(bell_tensor):
    rho = density_from_bloch(bell_tensor)
    assert von_neumann_entropy(rho) == pytest.approx(0.0, abs=1e-10)
    assert mutual_information(rho) == pytest.approx(2.0, abs=1e-10)


def test_restricted_marginals_are_maximally_mixed(rng):
    n = random_restricted(3, rng)
    rho = density_from_bloch(n)
    for k in range(3):
        assert np.allclose(marginal(rho, [k]).entries, np.eye(2) / 2, atol=1e-12)


def test_marginal_rejects_bad_site(bell_tensor):
    with pytest.raises(ArgumentError, match="out of range"):
        marginal(density_from_bloch(bell_tensor), [2])


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n_qubits", [2, 3])
def test_post_measurement_spectrum_has_two_clusters(n_qubits, rng):
    for _ in range(100):
        n = random_restricted(n_qubits, rng)
        frame = MeasurementFrame.random(n_qubits, rng)
        measured = apply_measurement(density_from_bloch(n), frame)
        lam = np.sort(measured.eigenvalues())
        lam_plus, lam_minus, mult = post_measurement_spectrum(n, frame)
        expected = np.sort(np.array([lam_minus] * mult + [lam_plus] * mult))
        assert np.max(np.abs(lam - expected)) <= 1e-10


def test_frame_contraction_axis_frame(bell_tensor):
    assert frame_contraction(bell_tensor, MeasurementFrame.axis_aligned([2, 2])) == pytest.approx(1.0)
    assert frame_contraction(bell_tensor, MeasurementFrame.axis_aligned([1, 1])) == pytest.approx(-1.0)
    assert frame_contraction(bell_tensor, MeasurementFrame.axis_aligned([0, 1])) == pytest.approx(0.0)


# ---------------------------------------------------------------------------
# Local rotations
# ---------------------------------------------------------------------------

def test_rotate_local_preserves_contraction(rng):
    n = random_restricted(3, rng)
    rotations = [_random_rotation(rng) for _ in range(3)]
    rotated = rotate_local(n, rotations)
    frame = MeasurementFrame.random(3, rng)
    moved = MeasurementFrame(np.array([R @ v for R, v in zip(rotations, frame.angles)]))
    assert frame_contraction(rotated, moved) == pytest.approx(frame_contraction(n, frame), abs=1e-12)


def test_rotate_local_is_unitary_conjugation(rng):
    n = random_restricted(2, rng)
    rotated = rotate_local(n, [_random_rotation(rng), _random_rotation(rng)])
    assert rotated.is_restricted()
    assert np.allclose(
        density_from_bloch(rotated).eigenvalues(),
        density_from_bloch(n).eigenvalues(),
        atol=1e-12,
    )


def test_rotate_local_needs_one_rotation_per_qubit(bell_tensor):
    with pytest.raises(ArgumentError, match="rotations"):
        rotate_local(bell_tensor, [np.eye(3)])
