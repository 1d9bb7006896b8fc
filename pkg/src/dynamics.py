"""
dynamics.py
-----------
Independent phase-flip noise on every qubit, discord trajectories along the
flip probability p in [0, 1/2], and detection / prediction of sudden changes
in the slope of D_GG(p).

Channel: rho -> (1 - p) rho + p Z rho Z per qubit. On the Bloch side every
x/y digit of a label picks up lambda = 1 - 2p; digits 0 and 3 are untouched.
"""
from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce

import numpy as np
import pandas as pd

from src.config.settings import (
    BRANCH_CONVERGENCE_TOL,
    BRANCH_MATCH_TOL,
    BRANCH_MAX_SWEEPS,
    DEFAULT_GAP_TOL,
    DEFAULT_PMAX,
    DEFAULT_POINTS,
    DIRECTION_EXCHANGE_OVERLAP,
    HOSVD_DIAGONAL_TOL,
    MIN_TRAJECTORY_POINTS,
    REFINE_POINTS,
    REFINE_ROUNDS,
    SLOPE_TOL_FACTOR,
    SLOPE_TOL_FLOOR,
    TRACK_TIE_RTOL,
)
from src.decompose import hosvd, is_hosvd_diagonal
from src.discord import Method, compute_discord
from src.qstate import (
    PAULIS,
    BlochTensor,
    DensityMatrix,
    apply_local_channel,
    physicality,
    shrink_to_physical,
)
from src.tensor_norm import OptimizerConfig, ascend_batch
from src.utils import ArgumentError, InvalidStateError, PreconditionError, get_logger

logger = get_logger(__name__)

_DIAGONAL_TOL = 1e-12


# ---------------------------------------------------------------------------
# Channel
# ---------------------------------------------------------------------------
def _check_p(p: float) -> None:
    if not 0.0 <= p <= 0.5:
        raise ArgumentError(f"Flip probability must lie in [0, 1/2], got {p}")


def _site_weights(lam: float) -> np.ndarray:
    return np.array([1.0, lam, lam, 1.0])


def phase_flip(n: BlochTensor, p: float) -> BlochTensor:
    """Multiply n_a by (1 - 2p)^w(a), w(a) = number of digits equal to 1 or 2."""
    _check_p(p)
    w = _site_weights(1.0 - 2.0 * p)
    scale = reduce(np.multiply.outer, [w] * n.n_qubits)
    return BlochTensor(n.n_qubits, n.coeffs * scale)


def phase_flip_density(rho: DensityMatrix, p: float) -> DensityMatrix:
    """Kraus form sqrt(1-p) I, sqrt(p) Z applied to every qubit."""
    _check_p(p)
    kraus = [np.sqrt(1.0 - p) * PAULIS[0], np.sqrt(p) * PAULIS[3]]
    for site in range(rho.n_qubits):
        rho = apply_local_channel(rho, site, kraus)
    return rho


def _flipped_blocks(n0: BlochTensor, p_grid: np.ndarray) -> np.ndarray:
    """Correlation blocks along the grid, shape (P,) + (3,)*N."""
    N = n0.n_qubits
    lam = 1.0 - 2.0 * np.asarray(p_grid, dtype=float)
    block = n0.correlation_block()
    out = np.broadcast_to(block, (lam.size,) + block.shape).copy()
    for k in range(N):
        shape = [lam.size] + [1] * N
        shape[k + 1] = 3
        w = np.stack([lam, lam, np.ones_like(lam)], axis=1).reshape(shape)
        out = out * w
    return out


def _batched_hosvd(blocks: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """HOSVD of every block, (P,) + (3,)*N; mode factors from each unfolding's Gram eigenvectors."""
    P, N = blocks.shape[0], blocks.ndim - 1
    core = blocks
    factors = []
    for k in range(N):
        unfolded = np.moveaxis(blocks, k + 1, 1).reshape(P, 3, -1)
        gram = unfolded @ np.swapaxes(unfolded, 1, 2)
        _, vecs = np.linalg.eigh(gram)
        u = vecs[:, :, ::-1]
        factors.append(u)
        # contract mode k of the core with U_k^T
        core = np.moveaxis(np.einsum("pia,pi...->pa...", u, np.moveaxis(core, k + 1, 1)), 1, k + 1)
    return core, factors


def _branch_seeds(factors: list[np.ndarray]) -> np.ndarray:
    """Frame a of every point: column a of each mode factor; shape (P, 3, N, 3)."""
    return np.stack([np.stack([u[:, :, a] for u in factors], axis=1) for a in range(3)], axis=1)


def _local_maximum_tracks(blocks: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """
    Distinct local maxima of the multilinear form per block, sorted, NaN-padded
    to three. seeds has shape (P, S, N, 3); ascents that land on the same
    frame (up to per-site signs) count once.
    """
    P, S, N = seeds.shape[0], seeds.shape[1], seeds.shape[2]
    flat_blocks = np.repeat(blocks, S, axis=0)
    frames, values = ascend_batch(
        flat_blocks, seeds.reshape(P * S, N, 3), BRANCH_MAX_SWEEPS, BRANCH_CONVERGENCE_TOL
    )
    frames = frames.reshape(P, S, N, 3)
    values = np.abs(values.reshape(P, S))
    overlap = np.prod(np.abs(np.einsum("psni,ptni->pstn", frames, frames)), axis=-1)
    out = np.full((P, 3), np.nan)
    for p in range(P):
        kept = []
        for s in np.argsort(-values[p], kind="stable"):
            if all(overlap[p, s, t] < 1.0 - BRANCH_MATCH_TOL for t in kept):
                kept.append(s)
            if len(kept) == 3:
                break
        out[p, : len(kept)] = values[p, kept]
    return out


def principal_value_tracks(n0: BlochTensor, p_grid) -> np.ndarray:
    """
    Magnitude-sorted principal values along the grid, shape (P, 3).

    Two qubits: singular values of the correlation matrix. N >= 3: HOSVD core
    superdiagonal magnitudes wherever the core is diagonal; elsewhere the
    distinct local maxima of the multilinear form, reached by mean-field
    ascent from the p = 0 principal frames and from the point's own HOSVD
    frames. The two agree on diagonal cores. Fewer than three distinct
    maxima leave NaN in the trailing columns.
    """
    n0.require_restricted("principal_value_tracks")
    blocks = _flipped_blocks(n0, np.atleast_1d(p_grid))
    N = n0.n_qubits
    if N == 1:
        return np.sort(np.abs(blocks), axis=1)[:, ::-1]
    if N == 2:
        return np.linalg.svd(blocks, compute_uv=False)
    core, factors = _batched_hosvd(blocks)
    diag = np.stack([core[(slice(None),) + (a,) * N] for a in range(3)], axis=1)
    off = core.copy()
    for a in range(3):
        off[(slice(None),) + (a,) * N] = 0.0
    tracks = np.sort(np.abs(diag), axis=1)[:, ::-1]
    loose = np.max(np.abs(off.reshape(off.shape[0], -1)), axis=1) > HOSVD_DIAGONAL_TOL
    if np.any(loose):
        _, start_factors = _batched_hosvd(n0.correlation_block()[None])
        start = np.broadcast_to(_branch_seeds(start_factors), (int(loose.sum()), 3, N, 3))
        own = _branch_seeds([u[loose] for u in factors])
        tracks[loose] = _local_maximum_tracks(blocks[loose], np.concatenate([start, own], axis=1))
    return tracks


def leading_gaps(tracks: np.ndarray) -> tuple[np.ndarray, int]:
    """
    d1 minus the first track that is not tied with d1 at the start of the grid,
    so the minimum sits where the leading track changes identity. Missing
    tracks give +inf. Returns (gaps, competitor column).
    """
    first = tracks[0][np.isfinite(tracks[0])]
    competitor = 1
    if first.size >= 2:
        tied = first[0] - first <= TRACK_TIE_RTOL * max(float(first[0]), np.finfo(float).tiny)
        competitor = int(min(np.count_nonzero(tied), first.size - 1))
    return _gaps_against(tracks, competitor), competitor


def _gaps_against(tracks: np.ndarray, competitor: int) -> np.ndarray:
    gaps = tracks[:, 0] - tracks[:, competitor]
    return np.where(np.isnan(gaps), np.inf, gaps)



def _ggqd_from_tracks(tracks: np.ndarray, n_qubits: int) -> np.ndarray:
    t2 = tracks ** 2
    return (t2.sum(axis=-1) - t2[..., 0]) / 2 ** n_qubits


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class TrajectoryConfig:
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    with_gqd: bool = False
    workers: int = 1
    shrink_unphysical: bool = False

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ArgumentError(f"workers must be at least 1, got {self.workers}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    n0: BlochTensor
    p_grid: np.ndarray
    tensors: tuple
    ggqd: np.ndarray
    gqd: np.ndarray | None
    tracks: np.ndarray
    leading: np.ndarray
    methods: tuple
    shrink_factor: float = 1.0

    @property
    def principal_tracks(self) -> bool:
        """True when every track row holds exact principal values (no mean-field fallback)."""
        return all(m in (Method.EXACT2.value, Method.HOSVD_DIAGONAL.value) for m in self.methods)


def default_grid(points: int = DEFAULT_POINTS, pmax: float = DEFAULT_PMAX) -> np.ndarray:
    if points < 2:
        raise ArgumentError(f"Need at least 2 grid points, got {points}")
    _check_p(pmax)
    return np.linspace(0.0, pmax, points)


def _point(n0: BlochTensor, p: float, config: TrajectoryConfig):
    t = phase_flip(n0, p)
    return t, compute_discord(t, "auto", config.optimizer, with_gqd=config.with_gqd)


def compute_trajectory(
    n0: BlochTensor,
    p_grid=None,
    config: TrajectoryConfig | None = None,
) -> Trajectory:
    """
    Evolve n0 through the grid; discord per point by the cheapest exact method.

    An unphysical n0 is refused unless config.shrink_unphysical is set, in
    which case it is scaled onto the physical boundary first. Crossing points
    do not move under a global scale.
    """
    config = config or TrajectoryConfig()
    n0.require_restricted("compute_trajectory")
    ok, lam = physicality(n0)
    factor = 1.0
    if not ok:
        if not config.shrink_unphysical:
            raise InvalidStateError(f"Initial state is not physical (min eigenvalue {lam:.3e})")
        n0, factor = shrink_to_physical(n0)
        logger.warning("Initial tensor is unphysical (min eigenvalue %.3e); shrunk by %.6g", lam, factor)
    p_grid = default_grid() if p_grid is None else np.asarray(p_grid, dtype=float)
    if p_grid.ndim != 1 or p_grid.size < 1:
        raise ArgumentError("p_grid must be a nonempty 1-D sequence")
    if np.any(np.diff(p_grid) <= 0):
        raise ArgumentError("p_grid must be strictly increasing")
    if p_grid[0] < 0.0 or p_grid[-1] > 0.5:
        raise ArgumentError("p_grid must lie inside [0, 1/2]")

    logger.info("Trajectory over %d points for a %d-qubit tensor", p_grid.size, n0.n_qubits)

    def run(p):
        return _point(n0, float(p), config)

    if config.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as pool:
            points = list(pool.map(run, p_grid))
    else:
        points = [run(p) for p in p_grid]

    return Trajectory(
        n0=n0,
        p_grid=p_grid,
        tensors=tuple(pt[0] for pt in points),
        ggqd=np.array([pt[1].ggqd for pt in points]),
        gqd=np.array([pt[1].gqd for pt in points]) if config.with_gqd else None,
        tracks=principal_value_tracks(n0, p_grid),
        leading=np.vstack([pt[1].optimal_frame.angles[0] for pt in points]),
        methods=tuple(pt[1].method.value for pt in points),
        shrink_factor=factor,
    )


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """Plot-ready series: p, ggqd, gqd, d1, d2, d3."""
    gqd = traj.gqd if traj.gqd is not None else np.full(traj.p_grid.size, np.nan)
    return pd.DataFrame(
        {
            "p": traj.p_grid,
            "ggqd": traj.ggqd,
            "gqd": gqd,
            "d1": traj.tracks[:, 0],
            "d2": traj.tracks[:, 1],
            "d3": traj.tracks[:, 2],
        }
    )


# ---------------------------------------------------------------------------
# Transition detection
# ---------------------------------------------------------------------------
class TransitionKind(str, Enum):
    DISCONTINUOUS_KINK = "discontinuous_kink"
    SMOOTH_CROSSOVER = "smooth_crossover"
    NONE = "none"


@dataclass(frozen=True)
class TransitionReport:
    kind: TransitionKind
    p_c: float | None
    min_gap: float
    slope_jump: float
    slope_tol: float
    direction_overlap: float

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "p_c": self.p_c,
            "min_gap": self.min_gap,
            "slope_jump": self.slope_jump,
            "slope_tol": self.slope_tol,
            "direction_overlap": self.direction_overlap,
        }


def refine_gap_minimum(n0: BlochTensor, lo: float, hi: float, competitor: int = 1) -> tuple[float, float]:
    """Nested sub-grid search for min (d1 - d_competitor) on [lo, hi]; returns (p, gap)."""
    p_best, gap_best = lo, np.inf
    for _ in range(REFINE_ROUNDS):
        sub = np.linspace(lo, hi, REFINE_POINTS)
        gaps = _gaps_against(principal_value_tracks(n0, sub), competitor)
        j = int(np.argmin(gaps))
        p_best, gap_best = float(sub[j]), float(gaps[j])
        lo, hi = sub[max(j - 1, 0)], sub[min(j + 1, sub.size - 1)]
    return p_best, gap_best


def _default_slope_tol(d: np.ndarray) -> float:
    """5x the median absolute second difference of D_GG over the grid."""
    second = np.diff(d, n=2)
    if second.size == 0:
        return SLOPE_TOL_FLOOR
    return max(SLOPE_TOL_FACTOR * float(np.median(np.abs(second))), SLOPE_TOL_FLOOR)


def _one_sided_slopes(n0: BlochTensor, p_c: float, lo: float, hi: float) -> tuple[float, float]:
    """Second-order one-sided derivatives of D_GG at p_c from exact principal values."""
    delta = 1e-5 * (hi - lo)
    has_left = p_c - 2 * delta >= lo
    has_right = p_c + 2 * delta <= hi
    pts = [p_c - 2 * delta, p_c - delta, p_c, p_c + delta, p_c + 2 * delta]
    pts = [min(max(x, lo), hi) for x in pts]
    d = _ggqd_from_tracks(principal_value_tracks(n0, pts), n0.n_qubits)
    left = (3 * d[2] - 4 * d[1] + d[0]) / (2 * delta)
    right = (-3 * d[2] + 4 * d[3] - d[4]) / (2 * delta)
    if not has_left:
        left = right
    if not has_right:
        right = left
    return float(left), float(right)


def detect_transition(
    traj: Trajectory,
    gap_tol: float = DEFAULT_GAP_TOL,
    slope_tol: float | None = None,
) -> TransitionReport:
    """
    Locate where the leading track changes identity and classify the trajectory.

    The gap is d1 - d2, or d1 - d_{m+1} when m tracks start tied with d1, so
    a degenerate leading pair does not pin the minimum to the start of the
    grid.

    discontinuous_kink : the gap closes (<= gap_tol) at an interior p_c and
                         the slope of D_GG jumps by at least slope_tol there
    smooth_crossover   : the gap stays open but the slope still jumps, or the
                         leading measurement direction turns by more than 45
                         degrees between the ends of the grid
    none               : otherwise

    With exact principal values the gap minimum is refined between grid
    points and the slope jump comes from one-sided stencils at p_c. With
    mean-field tracks the grid itself is used, and the jump test compares the
    second difference of D_GG at p_c against slope_tol.
    """
    p = traj.p_grid
    if p.size < MIN_TRAJECTORY_POINTS:
        raise ArgumentError(f"detect_transition needs at least {MIN_TRAJECTORY_POINTS} points, got {p.size}")
    tol = slope_tol if slope_tol is not None else _default_slope_tol(traj.ggqd)

    gaps, competitor = leading_gaps(traj.tracks)
    interior = np.arange(1, p.size - 1)
    i = int(interior[np.argmin(gaps[interior])])
    min_gap = float(gaps[i])
    p_c = float(p[i])

    if traj.principal_tracks:
        p_c, refined_gap = refine_gap_minimum(traj.n0, float(p[i - 1]), float(p[i + 1]), competitor)
        min_gap = min(min_gap, refined_gap)
        left, right = _one_sided_slopes(traj.n0, p_c, float(p[0]), float(p[-1]))
        slope_jump = abs(right - left)
        jump_fires = slope_jump >= tol
    else:
        second = traj.ggqd[i + 1] - 2 * traj.ggqd[i] + traj.ggqd[i - 1]
        slope_jump = abs(second) / (0.5 * (p[i + 1] - p[i - 1]))
        jump_fires = abs(second) >= tol

    overlap = float(abs(np.dot(traj.leading[0], traj.leading[-1])))
    interior_pc = float(p[0]) < p_c < float(p[-1])

    if min_gap <= gap_tol and jump_fires and interior_pc:
        kind = TransitionKind.DISCONTINUOUS_KINK
    elif min_gap > gap_tol and (jump_fires or overlap < DIRECTION_EXCHANGE_OVERLAP):
        kind = TransitionKind.SMOOTH_CROSSOVER
    else:
        kind = TransitionKind.NONE
    logger.info(
        "Transition %s: p_c=%.6g min_gap=%.3e slope_jump=%.3e (tol %.3e) overlap=%.3f",
        kind.value, p_c, min_gap, slope_jump, tol, overlap,
    )
    return TransitionReport(
        kind=kind,
        p_c=p_c if kind is not TransitionKind.NONE else None,
        min_gap=min_gap,
        slope_jump=float(slope_jump),
        slope_tol=tol,
        direction_overlap=overlap,
    )


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------
def _diagonal_of(n0) -> np.ndarray:
    if isinstance(n0, BlochTensor):
        if n0.n_qubits != 2:
            raise PreconditionError(f"maziero_condition needs 2 qubits, got {n0.n_qubits}")
        n0.require_restricted("maziero_condition")
        n0 = n0.correlation_block()
    arr = np.asarray(n0, dtype=float)
    if arr.shape == (3,):
        return arr
    if arr.shape != (3, 3):
        raise PreconditionError(f"Expected a 3-vector or 3x3 matrix, got shape {arr.shape}")
    off = arr - np.diag(np.diag(arr))
    if np.max(np.abs(off)) > _DIAGONAL_TOL:
        raise PreconditionError("maziero_condition is defined for diagonal correlation matrices only")
    return np.diag(arr).copy()


def maziero_condition(n0) -> bool:
    """|n11| >= |n33| or |n22| >= |n33| for a diagonal two-qubit state."""
    d = np.abs(_diagonal_of(n0))
    return bool(d[0] >= d[2] or d[1] >= d[2])


def robust_values(n0: BlochTensor, protected_axis: int = 3) -> np.ndarray:
    """
    Contribution of the noise-protected component n_{alpha...alpha} to each
    principal value: n_{alpha..alpha} * prod_k R^(k)[a, alpha].
    """
    if protected_axis not in (1, 2, 3):
        raise ArgumentError(f"protected_axis must be 1, 2 or 3, got {protected_axis}")
    n0.require_restricted("robust_values")
    if n0.n_qubits < 2:
        raise PreconditionError("robust_values needs at least 2 qubits")
    t = hosvd(n0)
    if n0.n_qubits > 2 and not is_hosvd_diagonal(t):
        raise PreconditionError("robust values for N >= 3 need an HOSVD-diagonal tensor")
    alpha = protected_axis - 1
    protected = n0.coeffs[(protected_axis,) * n0.n_qubits]
    weights = np.ones(3)
    for R in t.factors:
        weights = weights * R[:, alpha]
    return protected * weights


def predict_transition(n0: BlochTensor, protected_axis: int = 3) -> bool:
    """Robust-value criterion: a smaller principal value's robust part beats the largest's."""
    r = np.abs(robust_values(n0, protected_axis))
    return bool(r[1] > r[0] or r[2] > r[0])
