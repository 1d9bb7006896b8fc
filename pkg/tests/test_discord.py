"""
test_discord.py
---------------
Unit tests for the geometric (D_GG) and entropic (D_G) global discord,
their closed forms, and the method dispatcher.
"""
import numpy as np
import pytest

from src.discord import (
    Method,
    binary_entropy,
    compute_discord,
    ggqd,
    ggqd_hosvd,
    ggqd_two_qubit,
    gqd,
    gqd_from_definition,
    measured_discord,
)
from src.qstate import (
    BlochTensor,
    MeasurementFrame,
    bell_diagonal,
    density_from_bloch,
    random_restricted,
    rotate_local,
    shrink_to_physical,
)
from src.tensor_norm import NormResult, OptimizerConfig, injective_norm_bruteforce, injective_norm_exact2
from src.utils import ArgumentError, InconsistencyError, PreconditionError

TETRAHEDRON = np.array([[-1, -1, -1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]], dtype=float)


def _rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1.0
    return q


def _random_bell_diagonal(rng):
    c = rng.dirichlet(np.ones(4)) @ TETRAHEDRON
    return bell_diagonal(*c)


def _hosvd_diagonal_state(rng, n_qubits=3, spectrum=(1.0, 0.8, 0.6)):
    core = np.zeros((3,) * n_qubits)
    for a, d in enumerate(spectrum):
        core[(a,) * n_qubits] = d
    raw = rotate_local(BlochTensor.from_correlation(core), [_rotation(rng).T for _ in range(n_qubits)])
    tensor, _ = shrink_to_physical(raw)
    return tensor


# ---------------------------------------------------------------------------
# Reference states
# ---------------------------------------------------------------------------

def test_bell_state_discords(bell_tensor):
    result = compute_discord(bell_tensor)
    assert result.method is Method.EXACT2
    assert result.ggqd == pytest.approx(0.5, abs=1e-10)
    assert result.gqd == pytest.approx(1.0, abs=1e-10)
    assert result.to_json()["hs_bound_holds"] is True


def test_maximally_mixed_has_no_discord():
    result = compute_discord(BlochTensor.zeros(2))
    assert result.ggqd == pytest.approx(0.0, abs=1e-12)
    assert result.gqd == pytest.approx(0.0, abs=1e-12)


def test_two_qubit_closed_form_on_diagonal(crossing_tensor):
    assert ggqd_two_qubit(crossing_tensor) == pytest.approx(0.25, abs=1e-14)
    assert ggqd_two_qubit(np.diag([1.0, 0.8, 0.6])) == pytest.approx(0.25, abs=1e-14)


def test_binary_entropy():
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    with pytest.raises(ArgumentError):
        binary_entropy(1.5)


# ---------------------------------------------------------------------------
# Closed forms against oracles
# ---------------------------------------------------------------------------

def test_closed_form_matches_bruteforce_grid(rng):
    for _ in range(100):
        n = random_restricted(2, rng)
        oracle = ggqd(n, injective_norm_bruteforce(n, grid_steps=60))
        assert ggqd_two_qubit(n) == pytest.approx(oracle, abs=1e-6)


def test_entropic_closed_form_matches_definition(rng):
    for _ in range(20):
        n = _random_bell_diagonal(rng)
        closed = compute_discord(n).gqd
        direct, _ = gqd_from_definition(density_from_bloch(n), starts=2)
        assert direct == pytest.approx(closed, abs=1e-3)
        assert direct >= closed - 1e-9


@pytest.mark.parametrize("n_qubits", [2, 3])
def test_measured_discord_at_optimal_frame(n_qubits, rng):
    n = random_restricted(n_qubits, rng)
    result = compute_discord(n)
    rho = density_from_bloch(n)
    assert measured_discord(rho, result.optimal_frame) == pytest.approx(result.gqd, abs=1e-9)


def test_measured_discord_is_minimized_by_optimal_frame(rng):
    n = random_restricted(2, rng)
    result = compute_discord(n)
    rho = density_from_bloch(n)
    for _ in range(20):
        frame = MeasurementFrame.random(2, rng)
        assert measured_discord(rho, frame) >= result.gqd - 1e-9


def test_hosvd_closed_form_matches_meanfield(rng):
    n = _hosvd_diagonal_state(rng)
    closed = ggqd_hosvd(n)
    assert closed is not None
    auto = compute_discord(n)
    assert auto.method is Method.HOSVD_DIAGONAL
    optimized = compute_discord(n, method="meanfield")
    assert closed == pytest.approx(optimized.ggqd, abs=1e-8)
    assert auto.gqd == pytest.approx(optimized.gqd, abs=1e-8)


def test_hosvd_closed_form_declines_general_tensor(rng):
    assert ggqd_hosvd(BlochTensor.from_correlation(rng.uniform(-0.2, 0.2, size=(3, 3, 3)))) is None


def test_ggqd_invariant_under_local_rotations(rng):
    config = OptimizerConfig()
    for _ in range(5):
        n = random_restricted(3, rng)
        rotated = rotate_local(n, [_rotation(rng) for _ in range(3)])
        a = compute_discord(n, "meanfield", config, with_gqd=False).ggqd
        b = compute_discord(rotated, "meanfield", config, with_gqd=False).ggqd
        assert a == pytest.approx(b, abs=1e-6)


def test_bruteforce_method_agrees_with_exact2(rng):
    n = random_restricted(2, rng)
    exact = compute_discord(n, "exact2")
    brute = compute_discord(n, "bruteforce", grid_steps=40)
    assert brute.method is Method.BRUTEFORCE
    assert brute.ggqd == pytest.approx(exact.ggqd, abs=1e-6)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

def test_norm_from_another_tensor_is_rejected(bell_tensor):
    norm = injective_norm_exact2(bell_diagonal(0.3, 0.2, 0.1))
    with pytest.raises(ArgumentError, match="does not match"):
        ggqd(bell_tensor, norm)


def test_unphysical_norm_raises_inconsistency():
    n = BlochTensor.from_entries(2, {"11": 2.0})
    frame = MeasurementFrame.axis_aligned([0, 0])
    with pytest.raises(InconsistencyError, match="exceeds 1"):
        gqd(None, n, NormResult(2.0, frame, 0, True, 0))


def test_unknown_method(bell_tensor):
    with pytest.raises(ArgumentError, match="Unknown discord method"):
        compute_discord(bell_tensor, method="simplex")


def test_exact2_needs_two_qubits(rng):
    with pytest.raises(PreconditionError, match="2 qubits"):
        compute_discord(random_restricted(3, rng), method="exact2")


def test_hosvd_method_needs_diagonal_core(rng):
    n = BlochTensor.from_correlation(rng.uniform(-0.2, 0.2, size=(3, 3, 3)))
    with pytest.raises(PreconditionError, match="superdiagonal"):
        compute_discord(n, method="hosvd", with_gqd=False)


def test_general_tensor_is_refused():
    n = BlochTensor.from_entries(2, {"30": 0.5, "33": 0.2})
    with pytest.raises(PreconditionError, match="restricted"):
        compute_discord(n)
