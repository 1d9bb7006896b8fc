"""
tensor_norm.py
--------------
Maximization of C({Theta_i}) = sum_a n_a prod_i Theta_{i, a_i} over unit
vectors, i.e. the injective norm of the Bloch tensor.

Three routes:
  injective_norm_meanfield  : damped sequential mean-field ascent, multistart
  injective_norm_bruteforce : spherical-grid scan (N <= 4) plus polish
  injective_norm_exact2     : two-qubit closed form from the signed SVD

Digit 0 of every site is contracted with Theta_{i,0} = 1, so the local field
at a site has a constant part f0 and a vector part f, and the best direction
for that site gives f0 + |f|.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from src.config.settings import (
    AXIS_SEED_CAP,
    AXIS_SEED_MAX_QUBITS,
    BRUTEFORCE_MAX_QUBITS,
    DEFAULT_ALPHA,
    DEFAULT_CONVERGENCE_TOL,
    DEFAULT_GRID_STEPS,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_RESTARTS,
    DEFAULT_SEED,
)
from src.decompose import svd3
from src.qstate import BlochTensor, MeasurementFrame, frame_contraction, spherical_to_cartesian
from src.utils import ArgumentError, ResourceLimitError, get_logger

logger = get_logger(__name__)

_FIELD_EPS = 1e-15


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class OptimizerConfig:
    alpha: float = DEFAULT_ALPHA
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL
    restarts: int = DEFAULT_RESTARTS
    seed: int = DEFAULT_SEED
    include_axis_seeds: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ArgumentError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.convergence_tol <= 0.0:
            raise ArgumentError(f"convergence_tol must be positive, got {self.convergence_tol}")
        if self.restarts < 1:
            raise ArgumentError(f"restarts must be at least 1, got {self.restarts}")
        if self.max_iterations < 1:
            raise ArgumentError(f"max_iterations must be at least 1, got {self.max_iterations}")


@dataclass(frozen=True, eq=False)
class NormResult:
    value: float
    frame: MeasurementFrame
    iterations_used: int
    converged: bool
    restart_index: int

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "frame": self.frame.angles.tolist(),
            "converged": self.converged,
            "iterations": self.iterations_used,
            "restart_index": self.restart_index,
        }


# ---------------------------------------------------------------------------
# Contractions
# ---------------------------------------------------------------------------
def correlation_C(n: BlochTensor, frame: MeasurementFrame) -> float:
    return frame_contraction(n, frame)


def _lift(vec: np.ndarray) -> np.ndarray:
    return np.concatenate(([1.0], vec))


def _site_field(coeffs: np.ndarray, vecs: np.ndarray, site: int) -> np.ndarray:
    """Contract every site except `site`; returns the 4-vector (f0, f)."""
    t = coeffs
    for k in range(coeffs.ndim - 1, -1, -1):
        if k != site:
            t = np.tensordot(t, _lift(vecs[k]), axes=([k], [0]))
    return t


def local_field(n: BlochTensor, frame: MeasurementFrame, site: int) -> np.ndarray:
    """Vector f with C = f0 + f . Theta_site (f0 = 0 for restricted tensors)."""
    if not 0 <= site < n.n_qubits:
        raise ArgumentError(f"Site {site} out of range for {n.n_qubits} qubits")
    if frame.n_qubits != n.n_qubits:
        raise ArgumentError(f"Frame has {frame.n_qubits} directions for {n.n_qubits} qubits")
    return _site_field(n.coeffs, frame.angles, site)[1:].copy()


# ---------------------------------------------------------------------------
# Mean-field ascent
# ---------------------------------------------------------------------------
def _sweep(coeffs: np.ndarray, vecs: np.ndarray, alpha: float) -> np.ndarray:
    vecs = vecs.copy()
    for site in range(coeffs.ndim):
        f = _site_field(coeffs, vecs, site)[1:]
        norm = np.linalg.norm(f)
        if norm <= _FIELD_EPS:
            continue
        candidate = f / norm
        mixed = (1.0 - alpha) * vecs[site] + alpha * candidate
        mixed_norm = np.linalg.norm(mixed)
        vecs[site] = candidate if mixed_norm <= _FIELD_EPS else mixed / mixed_norm
    return vecs


def mean_field_sweep(n: BlochTensor, frame: MeasurementFrame, alpha: float) -> MeasurementFrame:
    """
    One Gauss-Seidel pass: each site turns toward its local field computed
    against the partially updated frame, mixed with its old direction by alpha.
    """
    if not 0.0 < alpha <= 1.0:
        raise ArgumentError(f"alpha must lie in (0, 1], got {alpha}")
    if frame.n_qubits != n.n_qubits:
        raise ArgumentError(f"Frame has {frame.n_qubits} directions for {n.n_qubits} qubits")
    return MeasurementFrame(_sweep(n.coeffs, frame.angles, alpha))


def ascend(
    n: BlochTensor,
    frame: MeasurementFrame,
    alpha: float = DEFAULT_ALPHA,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL,
) -> tuple[MeasurementFrame, float, int, bool]:
    """
    Repeat sweeps from `frame` until the relative change of C per sweep drops
    below convergence_tol. Returns (frame, C, sweeps, converged).
    """
    vecs = np.array(frame.angles)
    current = MeasurementFrame(vecs)
    c_prev = frame_contraction(n, current)
    for it in range(1, max_iterations + 1):
        vecs = _sweep(n.coeffs, vecs, alpha)
        current = MeasurementFrame(vecs)
        c = frame_contraction(n, current)
        if abs(c - c_prev) <= convergence_tol * abs(c):
            return current, c, it, True
        c_prev = c
    return current, c_prev, max_iterations, False


def _batch_field(blocks: np.ndarray, vecs: np.ndarray, site: int) -> np.ndarray:
    """Local fields at `site` for a batch: blocks (B, 3, ..., 3), vecs (B, N, 3) -> (B, 3)."""
    N = blocks.ndim - 1
    letters = "ijklmnopqrstuvw"[:N]
    subscripts = ["b" + letters]
    operands = [blocks]
    for k in range(N):
        if k != site:
            subscripts.append("b" + letters[k])
            operands.append(vecs[:, k])
    return np.einsum(",".join(subscripts) + "->b" + letters[site], *operands)


def ascend_batch(
    blocks: np.ndarray,
    vecs: np.ndarray,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Undamped mean-field ascent run on many (correlation block, start frame)
    pairs at once. Stops when no value in the batch moves by more than
    convergence_tol relative. Returns (frames (B, N, 3), values (B,)).
    """
    blocks = np.asarray(blocks, dtype=float)
    vecs = np.array(vecs, dtype=float)
    N = blocks.ndim - 1
    if vecs.shape != (blocks.shape[0], N, 3):
        raise ArgumentError(f"Expected start frames of shape {(blocks.shape[0], N, 3)}, got {vecs.shape}")
    previous = np.full(blocks.shape[0], -np.inf)
    for _ in range(max_iterations):
        for site in range(N):
            f = _batch_field(blocks, vecs, site)
            norm = np.linalg.norm(f, axis=1)
            live = norm > _FIELD_EPS
            vecs[live, site] = f[live] / norm[live, None]
        values = np.einsum("bi,bi->b", f, vecs[:, N - 1])
        if np.all(np.abs(values - previous) <= convergence_tol * np.maximum(np.abs(values), _FIELD_EPS)):
            break
        previous = values
    return vecs, values


def axis_seed_frames(n_qubits: int) -> list[MeasurementFrame]:
    """All 3^N frames with every site on a positive coordinate axis."""
    if n_qubits > AXIS_SEED_MAX_QUBITS:
        return []
    frames = []
    for axes in product(range(3), repeat=n_qubits):
        frames.append(MeasurementFrame.axis_aligned(axes))
        if len(frames) >= AXIS_SEED_CAP:
            break
    return frames


def seed_frames(
    n_qubits: int,
    config: OptimizerConfig,
    initial_frames: Sequence[MeasurementFrame] | None = None,
) -> list[MeasurementFrame]:
    """
    Caller frames, then axis seeds, then `restarts` random frames. The random
    frame at list position i is drawn from default_rng(seed + i), so a
    NormResult.restart_index pointing at it reproduces it directly.
    """
    seeds = list(initial_frames or [])
    if config.include_axis_seeds:
        seeds += axis_seed_frames(n_qubits)
    for i in range(len(seeds), len(seeds) + config.restarts):
        rng = np.random.default_rng(config.seed + i)
        seeds.append(MeasurementFrame.random(n_qubits, rng))
    return seeds


def injective_norm_meanfield(
    n: BlochTensor,
    config: OptimizerConfig | None = None,
    initial_frames: Sequence[MeasurementFrame] | None = None,
    workers: int = 1,
) -> NormResult:
    """Best mean-field ascent over all seeds; the value is a lower bound on the norm."""
    config = config or OptimizerConfig()
    seeds = seed_frames(n.n_qubits, config, initial_frames)

    def run(seed: MeasurementFrame):
        return ascend(n, seed, config.alpha, config.max_iterations, config.convergence_tol)

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, seeds))
    else:
        outcomes = [run(s) for s in seeds]

    best_index = 0
    for i, outcome in enumerate(outcomes):
        if outcome[1] > outcomes[best_index][1]:
            best_index = i
    frame, _, iterations, converged = outcomes[best_index]
    if not converged:
        logger.warning(
            "Mean-field restart %d hit max_iterations=%d without converging",
            best_index, config.max_iterations,
        )
    value = correlation_C(n, frame)
    logger.debug("Mean-field norm %.12g from restart %d of %d", value, best_index, len(seeds))
    return NormResult(value, frame, iterations, converged, best_index)


# ---------------------------------------------------------------------------
# Brute force
# ---------------------------------------------------------------------------
def spherical_grid(grid_steps: int) -> np.ndarray:
    """theta: grid_steps points on [0, pi]; phi: 2*grid_steps points on [0, 2 pi)."""
    if grid_steps < 2:
        raise ArgumentError(f"grid_steps must be at least 2, got {grid_steps}")
    theta = np.linspace(0.0, np.pi, grid_steps)
    phi = np.arange(2 * grid_steps) * (np.pi / grid_steps)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    return spherical_to_cartesian(tt.ravel(), pp.ravel())


def injective_norm_bruteforce(
    n: BlochTensor,
    grid_steps: int = DEFAULT_GRID_STEPS,
    config: OptimizerConfig | None = None,
) -> NormResult:
    """
    Exhaustive scan over per-site grids, then an undamped mean-field polish.

    Sites 1..N-2 loop over the grid, site N-1 is vectorized across the grid,
    and the last site takes its exact optimum f0 + |f|, so the scan already
    dominates the plain grid maximum.
    """
    N = n.n_qubits
    if N > BRUTEFORCE_MAX_QUBITS:
        raise ResourceLimitError(
            f"Brute-force norm supports at most {BRUTEFORCE_MAX_QUBITS} qubits, got {N}"
        )
    config = config or OptimizerConfig()
    grid = spherical_grid(grid_steps)
    lifted = np.hstack([np.ones((grid.shape[0], 1)), grid])

    best_value = -np.inf
    best_vecs = None
    if N == 1:
        f = n.coeffs
        best_value = f[0] + np.linalg.norm(f[1:])
        best_vecs = np.array([_unit_or_z(f[1:])])
    else:
        for outer in product(range(grid.shape[0]), repeat=N - 2):
            t = n.coeffs
            for idx in outer:
                t = np.tensordot(lifted[idx], t, axes=([0], [0]))
            fields = lifted @ t                      # (G, 4): field on the last site
            values = fields[:, 0] + np.linalg.norm(fields[:, 1:], axis=1)
            j = int(np.argmax(values))
            if values[j] > best_value:
                best_value = float(values[j])
                best_vecs = np.vstack([grid[list(outer)], grid[j], _unit_or_z(fields[j, 1:])])

    start = MeasurementFrame(best_vecs)
    frame, value, iterations, converged = ascend(
        n, start, 1.0, config.max_iterations, config.convergence_tol
    )
    if value < frame_contraction(n, start):
        frame = start
    logger.debug("Brute-force grid maximum %.12g, polished %.12g", best_value, correlation_C(n, frame))
    return NormResult(correlation_C(n, frame), frame, iterations, converged, 0)


def _unit_or_z(f: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(f)
    return f / norm if norm > _FIELD_EPS else np.array([0.0, 0.0, 1.0])


# ---------------------------------------------------------------------------
# Two-qubit closed form
# ---------------------------------------------------------------------------
def injective_norm_exact2(n: BlochTensor | np.ndarray) -> NormResult:
    """Operator norm of the 3x3 correlation matrix, with frame signed so C = +value."""
    if isinstance(n, BlochTensor):
        if n.n_qubits != 2:
            raise ArgumentError(f"injective_norm_exact2 needs 2 qubits, got {n.n_qubits}")
        n.require_restricted("injective_norm_exact2")
        m = n.correlation_block()
    else:
        m = np.asarray(n, dtype=float)
    s = svd3(m)
    d1 = s.diag[0]
    sign = 1.0 if d1 >= 0 else -1.0
    frame = MeasurementFrame(np.vstack([sign * s.left[:, 0], s.right[:, 0]]))
    return NormResult(abs(float(d1)), frame, 0, True, 0)
