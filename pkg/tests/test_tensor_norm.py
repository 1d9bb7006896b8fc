"""
test_tensor_norm.py
-------------------
Unit tests for the injective-norm optimizers: mean-field ascent, the
brute-force grid and the two-qubit closed form.
"""
import numpy as np
import pytest

from src.qstate import BlochTensor, MeasurementFrame, random_restricted
from src.tensor_norm import (
    OptimizerConfig,
    ascend,
    ascend_batch,
    correlation_C,
    injective_norm_bruteforce,
    injective_norm_exact2,
    injective_norm_meanfield,
    local_field,
    mean_field_sweep,
    seed_frames,
    spherical_grid,
)
from src.utils import ArgumentError, ResourceLimitError

S2 = 1.0 / np.sqrt(2.0)


@pytest.fixture()
def half_diagonal():
    return BlochTensor.from_entries(2, {"11": 1.0, "22": 0.5})


@pytest.fixture()
def ghz_tensor():
    # restricted part of (|000> + |111>)/sqrt(2); C = cos(phi1 + phi2 + phi3) in the xy-plane
    return BlochTensor.from_entries(3, {"111": 1.0, "122": -1.0, "212": -1.0, "221": -1.0})


# ---------------------------------------------------------------------------
# Mean-field worked example
# ---------------------------------------------------------------------------

def test_one_sweep_matches_hand_computation(half_diagonal):
    start = MeasurementFrame(np.array([[S2, S2, 0.0], [S2, S2, 0.0]]))
    frame = mean_field_sweep(half_diagonal, start, alpha=1.0)
    assert np.allclose(frame.angles[0], np.array([2.0, 1.0, 0.0]) / np.sqrt(5.0), atol=1e-12)
    assert np.allclose(frame.angles[1], np.array([4.0, 1.0, 0.0]) / np.sqrt(17.0), atol=1e-12)


def test_iteration_converges_to_x_axis(half_diagonal):
    start = MeasurementFrame(np.array([[S2, S2, 0.0], [S2, S2, 0.0]]))
    frame, value, sweeps, converged = ascend(half_diagonal, start, 1.0, 100, 1e-14)
    assert value == pytest.approx(1.0, abs=1e-10)
    assert sweeps <= 100
    assert np.allclose(np.abs(frame.angles[:, 0]), 1.0, atol=1e-5)


def test_damped_ascent_reaches_same_value(half_diagonal):
    start = MeasurementFrame(np.array([[S2, S2, 0.0], [S2, S2, 0.0]]))
    _, value, _, converged = ascend(half_diagonal, start, 0.5, 500, 1e-14)
    assert converged
    assert value == pytest.approx(1.0, abs=1e-9)


def _check_monotone_ascent(rng, n_qubits, instances, sweeps=30):
    for _ in range(instances):
        n = BlochTensor.from_correlation(rng.uniform(-1.0, 1.0, size=(3,) * n_qubits))
        frame = MeasurementFrame.random(n_qubits, rng)
        previous = correlation_C(n, frame)
        for _ in range(sweeps):
            frame = mean_field_sweep(n, frame, 1.0)
            current = correlation_C(n, frame)
            assert current >= previous - 1e-12
            previous = current


@pytest.mark.parametrize("n_qubits", [2, 3, 4])
def test_undamped_ascent_is_monotone(n_qubits, rng):
    _check_monotone_ascent(rng, n_qubits, instances=20)


@pytest.mark.slow
@pytest.mark.parametrize("n_qubits", [2, 3, 4])
def test_undamped_ascent_is_monotone_full_size(n_qubits, rng):
    _check_monotone_ascent(rng, n_qubits, instances=1000)


def test_batched_ascent_matches_single_ascent(rng):
    blocks = rng.uniform(-1.0, 1.0, size=(5, 3, 3, 3))
    starts = np.stack([MeasurementFrame.random(3, rng).angles for _ in range(5)])
    frames, values = ascend_batch(blocks, starts, 500, 1e-13)
    for block, start, value, frame in zip(blocks, starts, values, frames):
        n = BlochTensor.from_correlation(block)
        _, single, _, _ = ascend(n, MeasurementFrame(start), 1.0, 500, 1e-13)
        assert value == pytest.approx(single, abs=1e-6)
        assert correlation_C(n, MeasurementFrame(frame)) == pytest.approx(value, abs=1e-10)


def test_batched_ascent_checks_frame_shape():
    with pytest.raises(ArgumentError, match="start frames"):
        ascend_batch(np.zeros((2, 3, 3, 3)), np.zeros((2, 2, 3)))


def test_local_field_reproduces_C(rng):
    n = random_restricted(3, rng)
    frame = MeasurementFrame.random(3, rng)
    for site in range(3):
        f = local_field(n, frame, site)
        assert float(f @ frame.angles[site]) == pytest.approx(correlation_C(n, frame), abs=1e-12)


def test_local_field_rejects_bad_site(half_diagonal):
    frame = MeasurementFrame.axis_aligned([0, 0])
    with pytest.raises(ArgumentError, match="out of range"):
        local_field(half_diagonal, frame, 2)


# ---------------------------------------------------------------------------
# Multistart
# ---------------------------------------------------------------------------

def test_meanfield_ghz_norm_is_one(ghz_tensor):
    result = injective_norm_meanfield(ghz_tensor)
    assert result.value == pytest.approx(1.0, abs=1e-9)
    assert result.converged


def test_meanfield_matches_closed_form_for_two_qubits(rng):
    config = OptimizerConfig(restarts=5)
    for _ in range(20):
        n = random_restricted(2, rng)
        exact = injective_norm_exact2(n)
        approx = injective_norm_meanfield(n, config)
        assert approx.value == pytest.approx(exact.value, abs=1e-6)


def test_meanfield_is_independent_of_worker_count(rng):
    n = random_restricted(3, rng)
    config = OptimizerConfig(restarts=6)
    serial = injective_norm_meanfield(n, config, workers=1)
    threaded = injective_norm_meanfield(n, config, workers=3)
    assert serial.value == threaded.value
    assert np.array_equal(serial.frame.angles, threaded.frame.angles)
    assert serial.restart_index == threaded.restart_index


def test_initial_frames_come_first(half_diagonal):
    seed = MeasurementFrame.axis_aligned([0, 0])
    config = OptimizerConfig(restarts=2, include_axis_seeds=False)
    seeds = seed_frames(2, config, [seed])
    assert len(seeds) == 3
    assert seeds[0] is seed
    result = injective_norm_meanfield(half_diagonal, config, initial_frames=[seed])
    assert result.value == pytest.approx(1.0, abs=1e-12)


def test_random_restart_is_reproducible_from_its_index(rng):
    n = random_restricted(3, rng)
    config = OptimizerConfig(restarts=4)
    seeds = seed_frames(3, config)
    assert len(seeds) == 27 + 4
    for i in range(27, 31):
        regenerated = MeasurementFrame.random(3, np.random.default_rng(config.seed + i))
        assert np.array_equal(seeds[i].angles, regenerated.angles)
    result = injective_norm_meanfield(n, config)
    _, value, _, _ = ascend(n, seeds[result.restart_index])
    assert value == pytest.approx(result.value, abs=1e-12)


@pytest.mark.parametrize("t", [0.5, -0.5, 2.0])
def test_meanfield_norm_is_absolutely_homogeneous(t, rng):
    for n_qubits in (2, 3, 4):
        n = BlochTensor.from_correlation(rng.uniform(-0.3, 0.3, size=(3,) * n_qubits))
        config = OptimizerConfig(restarts=3)
        base = injective_norm_meanfield(n, config).value
        assert injective_norm_meanfield(n.scaled(t), config).value == pytest.approx(abs(t) * base, rel=1e-9)



def test_optimizer_config_validation():
    with pytest.raises(ArgumentError, match="alpha"):
        OptimizerConfig(alpha=0.0)
    with pytest.raises(ArgumentError, match="restarts"):
        OptimizerConfig(restarts=0)
    with pytest.raises(ArgumentError, match="convergence_tol"):
        OptimizerConfig(convergence_tol=0.0)


# ---------------------------------------------------------------------------
# Closed form and brute force
# ---------------------------------------------------------------------------

def test_exact2_frame_attains_value(rng):
    for _ in range(20):
        n = random_restricted(2, rng)
        result = injective_norm_exact2(n)
        assert correlation_C(n, result.frame) == pytest.approx(result.value, abs=1e-12)


def test_exact2_rejects_three_qubits(ghz_tensor):
    with pytest.raises(ArgumentError, match="2 qubits"):
        injective_norm_exact2(ghz_tensor)


def test_bruteforce_matches_closed_form(rng):
    for _ in range(10):
        n = random_restricted(2, rng)
        oracle = injective_norm_bruteforce(n, grid_steps=20)
        assert oracle.value == pytest.approx(injective_norm_exact2(n).value, abs=1e-6)


def test_bruteforce_bounds_meanfield_for_three_qubits(rng):
    n = random_restricted(3, rng)
    oracle = injective_norm_bruteforce(n, grid_steps=12)
    approx = injective_norm_meanfield(n)
    assert approx.value <= oracle.value + 1e-7
    assert approx.value == pytest.approx(oracle.value, abs=1e-6)


def test_bruteforce_refuses_large_systems():
    with pytest.raises(ResourceLimitError, match="at most"):
        injective_norm_bruteforce(BlochTensor.from_correlation(np.zeros((3,) * 5)))


def test_spherical_grid_shape():
    grid = spherical_grid(4)
    assert grid.shape == (4 * 8, 3)
    assert np.allclose(np.linalg.norm(grid, axis=1), 1.0)
    with pytest.raises(ArgumentError):
        spherical_grid(1)
