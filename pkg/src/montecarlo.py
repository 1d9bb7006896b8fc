"""
montecarlo.py
-------------
Probability of near-sudden transitions over Haar-random local frames with a
fixed principal-value spectrum.

Each sample is n = sum_a d_a prod_k R^(k)[a, i_k] with independent Haar
rotations per qubit, shrunk onto the physical set. The sample's event value
is the smallest interior gap between the leading track and its first
competitor along the phase-flip trajectory (see dynamics.leading_gaps),
divided by its largest initial principal value. A sample hits at epsilon
when that value is below epsilon. Hit sets are therefore nested in epsilon.

Per-sample generators are seeded with seed XOR index, so reports do not
depend on the worker count.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from src.config.settings import (
    CONFIDENCE_LEVEL,
    DEFAULT_EPSILONS,
    DEFAULT_MC_POINTS,
    DEFAULT_PMAX,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_SPECTRUM,
    MIN_FIT_HITS,
)
from src.dynamics import leading_gaps, principal_value_tracks, refine_gap_minimum
from src.qstate import BlochTensor, rotate_local, shrink_to_physical
from src.utils import ArgumentError, get_logger

logger = get_logger(__name__)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------
def _quaternions_to_matrices(q: np.ndarray) -> np.ndarray:
    """Unit quaternions (w, x, y, z), shape (k, 4), to rotation matrices (k, 3, 3)."""
    qw, qx, qy, qz = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((len(q), 3, 3))
    m[:, 0, 0] = 1 - 2 * qy * qy - 2 * qz * qz
    m[:, 0, 1] = 2 * qx * qy - 2 * qz * qw
    m[:, 0, 2] = 2 * qx * qz + 2 * qy * qw
    m[:, 1, 0] = 2 * qx * qy + 2 * qz * qw
    m[:, 1, 1] = 1 - 2 * qx * qx - 2 * qz * qz
    m[:, 1, 2] = 2 * qy * qz - 2 * qx * qw
    m[:, 2, 0] = 2 * qx * qz - 2 * qy * qw
    m[:, 2, 1] = 2 * qy * qz + 2 * qx * qw
    m[:, 2, 2] = 1 - 2 * qx * qx - 2 * qy * qy
    return m


def sample_rotation(rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform SO(3) element from a normalized Gaussian quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    return _quaternions_to_matrices(q[None, :])[0]


@dataclass(frozen=True, eq=False)
class SampledState:
    tensor: BlochTensor
    shrink_factor: float
    rotations: tuple

    @property
    def shrunk(self) -> bool:
        return self.shrink_factor < 1.0


def _check_spectrum(spectrum) -> np.ndarray:
    d = np.asarray(spectrum, dtype=float)
    if d.shape != (3,):
        raise ArgumentError(f"spectrum needs exactly 3 values, got {d.shape}")
    mags = np.abs(d)
    if np.any(np.diff(mags) > 0):
        raise ArgumentError(f"spectrum magnitudes must be sorted descending, got {d.tolist()}")
    if mags[0] == 0.0:
        raise ArgumentError("spectrum must have a nonzero leading value")
    return d


def sample_state(
    spectrum,
    n_qubits: int,
    rng: np.random.Generator,
    rotations=None,
) -> SampledState:
    """Superdiagonal tensor with the given spectrum, rotated per site and shrunk if needed."""
    d = _check_spectrum(spectrum)
    if n_qubits < 2:
        raise ArgumentError(f"sample_state needs at least 2 qubits, got {n_qubits}")
    if rotations is None:
        rotations = [sample_rotation(rng) for _ in range(n_qubits)]
    core = np.zeros((3,) * n_qubits)
    for a in range(3):
        core[(a,) * n_qubits] = d[a]
    # n_i = sum_a d_a prod_k R_k[a, i_k] is the core multiplied by R_k^T on every mode
    raw = rotate_local(BlochTensor.from_correlation(core), [np.asarray(R).T for R in rotations])
    tensor, factor = shrink_to_physical(raw)
    return SampledState(tensor=tensor, shrink_factor=factor, rotations=tuple(rotations))


# ---------------------------------------------------------------------------
# Configuration and report
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class McConfig:
    n_qubits: int = 2
    spectrum: tuple = DEFAULT_SPECTRUM
    samples: int = DEFAULT_SAMPLES
    epsilons: tuple = DEFAULT_EPSILONS
    seed: int = DEFAULT_SEED
    points: int = DEFAULT_MC_POINTS
    pmax: float = DEFAULT_PMAX

    def __post_init__(self) -> None:
        if self.n_qubits < 2:
            raise ArgumentError(f"n_qubits must be at least 2, got {self.n_qubits}")
        _check_spectrum(self.spectrum)
        if self.samples < 1:
            raise ArgumentError(f"samples must be at least 1, got {self.samples}")
        eps = np.asarray(self.epsilons, dtype=float)
        if eps.size == 0:
            raise ArgumentError("epsilons must not be empty")
        if np.any(eps <= 0.0) or np.any(eps >= 1.0):
            raise ArgumentError(f"every epsilon must lie in (0, 1), got {eps.tolist()}")
        if np.any(np.diff(eps) <= 0.0):
            raise ArgumentError(f"epsilons must be strictly ascending, got {eps.tolist()}")
        if not 0 <= self.seed < 2 ** 64:
            raise ArgumentError(f"seed must be a non-negative 64-bit integer, got {self.seed}")
        if self.points < 3:
            raise ArgumentError(f"points must be at least 3, got {self.points}")
        if not 0.0 < self.pmax <= 0.5:
            raise ArgumentError(f"pmax must lie in (0, 1/2], got {self.pmax}")

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "spectrum": list(self.spectrum),
            "samples": self.samples,
            "epsilons": list(self.epsilons),
            "seed": self.seed,
            "points": self.points,
            "pmax": self.pmax,
        }


@dataclass(frozen=True)
class EpsilonEstimate:
    epsilon: float
    hits: int
    probability: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True, eq=False)
class McReport:
    config: McConfig
    estimates: tuple
    slope: float
    slope_stderr: float
    fit_points: int
    shrunk: int
    normalized_gaps: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "estimates": [
                {
                    "epsilon": e.epsilon,
                    "hits": e.hits,
                    "probability": e.probability,
                    "ci_lo": e.ci_lo,
                    "ci_hi": e.ci_hi,
                }
                for e in self.estimates
            ],
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "fit_points": self.fit_points,
            "shrunk": self.shrunk,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epsilon": [e.epsilon for e in self.estimates],
                "P": [e.probability for e in self.estimates],
                "ci_lo": [e.ci_lo for e in self.estimates],
                "ci_hi": [e.ci_hi for e in self.estimates],
            }
        )


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------
def wilson_interval(hits: int, n: int, confidence: float = CONFIDENCE_LEVEL) -> tuple[float, float]:
    if n < 1 or not 0 <= hits <= n:
        raise ArgumentError(f"wilson_interval needs 0 <= hits <= n and n >= 1, got {hits}/{n}")
    ci = stats.binomtest(hits, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def fit_loglog_slope(epsilons, hits, samples: int, min_hits: int = MIN_FIT_HITS) -> tuple[float, float, int]:
    """Least-squares slope of log P against log epsilon over points with >= min_hits hits."""
    eps = np.asarray(epsilons, dtype=float)
    h = np.asarray(hits, dtype=float)
    keep = h >= min_hits
    if keep.sum() < 2:
        return float("nan"), float("nan"), int(keep.sum())
    fit = stats.linregress(np.log(eps[keep]), np.log(h[keep] / samples))
    return float(fit.slope), float(fit.stderr), int(keep.sum())


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------
def normalized_gap(n: BlochTensor, p_grid: np.ndarray) -> float:
    """
    Smallest interior gap between the two leading tracks along the phase-flip
    trajectory, over the largest initial value. For N >= 3 the tracks are the
    distinct local maxima of the multilinear form; where only one is left the
    gap is +inf.
    """
    tracks = principal_value_tracks(n, p_grid)
    gaps, competitor = leading_gaps(tracks)
    i = 1 + int(np.argmin(gaps[1:-1]))
    _, refined = refine_gap_minimum(n, float(p_grid[i - 1]), float(p_grid[i + 1]), competitor)
    return min(float(gaps[i]), refined) / float(tracks[0, 0])


def _evaluate(config: McConfig, p_grid: np.ndarray, indices: np.ndarray) -> tuple[np.ndarray, int]:
    out = np.empty(indices.size)
    shrunk = 0
    for j, idx in enumerate(indices):
        rng = np.random.default_rng(config.seed ^ int(idx))
        sample = sample_state(config.spectrum, config.n_qubits, rng)
        shrunk += int(sample.shrunk)
        out[j] = normalized_gap(sample.tensor, p_grid)
    return out, shrunk


def estimate_probability(config: McConfig, workers: int = 1) -> McReport:
    if workers < 1:
        raise ArgumentError(f"workers must be at least 1, got {workers}")
    p_grid = np.linspace(0.0, config.pmax, config.points)
    chunks = np.array_split(np.arange(config.samples), max(1, min(config.samples, workers * 8)))
    logger.info(
        "Monte Carlo: %d samples, N=%d, spectrum=%s, %d workers",
        config.samples, config.n_qubits, list(config.spectrum), workers,
    )

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda idx: _evaluate(config, p_grid, idx), chunks))
    else:
        results = [_evaluate(config, p_grid, idx) for idx in chunks]

    gaps = np.concatenate([r[0] for r in results])
    shrunk = sum(r[1] for r in results)
    if shrunk:
        logger.warning("%d of %d samples were shrunk onto the physical set", shrunk, config.samples)

    estimates = []
    for eps in config.epsilons:
        hits = int(np.count_nonzero(gaps < eps))
        lo, hi = wilson_interval(hits, config.samples)
        estimates.append(EpsilonEstimate(float(eps), hits, hits / config.samples, lo, hi))
    slope, stderr, used = fit_loglog_slope(config.epsilons, [e.hits for e in estimates], config.samples)
    logger.info("Fitted log-log slope %.4g +- %.2g over %d epsilons", slope, stderr, used)
    return McReport(
        config=config,
        estimates=tuple(estimates),
        slope=slope,
        slope_stderr=stderr,
        fit_points=used,
        shrunk=shrunk,
        normalized_gaps=gaps,
    )
