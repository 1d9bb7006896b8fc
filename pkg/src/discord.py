"""
discord.py
----------
Global quantum discord (entropic, D_G) and geometric global quantum discord
(Hilbert-Schmidt, D_GG) for states in the restricted subspace, where every
Bloch coefficient with a 0 digit vanishes.

Both measures reduce to the maximal frame correlation C*:

    D_GG = 2^-N (sum_a n_a^2 - C*^2)
    D_G  = I(rho) + h2((1 + C*)/2) - 1

The measured state has two eigenvalues 2^-N (1 +- C), each 2^(N-1)-fold, and
single-qubit marginals stay maximally mixed, so I(Pi(rho)) = 1 - h2. For two
qubits the constant is the familiar N - 1 = 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.special import entr

from src.config.settings import (
    DEFAULT_GRID_STEPS,
    DEFAULT_SEED,
    DEFINITION_STARTS,
    HOSVD_DIAGONAL_TOL,
    NEGATIVE_CLAMP_TOL,
    NORM_INCONSISTENCY_TOL,
    NORM_MATCH_TOL,
)
from src.decompose import hosvd, is_hosvd_diagonal, svd3
from src.qstate import (
    LN2,
    BlochTensor,
    DensityMatrix,
    MeasurementFrame,
    apply_measurement,
    density_from_bloch,
    mutual_information,
)
from src.tensor_norm import (
    NormResult,
    OptimizerConfig,
    correlation_C,
    injective_norm_bruteforce,
    injective_norm_exact2,
    injective_norm_meanfield,
)
from src.utils import (
    ArgumentError,
    InconsistencyError,
    PreconditionError,
    get_logger,
)

logger = get_logger(__name__)


class Method(str, Enum):
    EXACT2 = "exact2"
    HOSVD_DIAGONAL = "hosvd_diagonal"
    MEANFIELD = "meanfield"
    BRUTEFORCE = "bruteforce"


@dataclass(frozen=True, eq=False)
class DiscordResult:
    ggqd: float
    gqd: float | None
    max_C: float
    optimal_frame: MeasurementFrame
    method: Method

    @property
    def n_qubits(self) -> int:
        return self.optimal_frame.n_qubits

    def to_json(self) -> dict:
        out = {
            "ggqd": self.ggqd,
            "gqd": self.gqd,
            "max_C": self.max_C,
            "frame": self.optimal_frame.angles.tolist(),
            "method": self.method.value,
        }
        if self.n_qubits == 2 and self.gqd is not None:
            out["hs_bound_holds"] = hs_bound_holds(self)
        return out


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------
def binary_entropy(p: float) -> float:
    """Shannon entropy of (p, 1 - p) in bits."""
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"binary_entropy needs p in [0, 1], got {p}")
    return float((entr(p) + entr(1.0 - p)) / LN2)


def _clamp_nonnegative(value: float, what: str) -> float:
    if value >= 0.0:
        return float(value)
    if value >= -NEGATIVE_CLAMP_TOL:
        logger.warning("%s = %.3e is within optimizer slack; clamped to 0", what, value)
        return 0.0
    raise InconsistencyError(f"{what} = {value:.3e} is negative beyond numerical slack")


def _check_norm(n: BlochTensor, norm: NormResult) -> None:
    if norm.frame.n_qubits != n.n_qubits:
        raise ArgumentError(
            f"NormResult frame has {norm.frame.n_qubits} directions for a {n.n_qubits}-qubit tensor"
        )
    recomputed = correlation_C(n, norm.frame)
    if abs(recomputed - norm.value) > NORM_MATCH_TOL * max(1.0, abs(norm.value)):
        raise ArgumentError(
            f"NormResult value {norm.value:.12g} does not match this tensor (C = {recomputed:.12g})"
        )


# ---------------------------------------------------------------------------
# Geometric discord
# ---------------------------------------------------------------------------
def ggqd(n: BlochTensor, norm: NormResult) -> float:
    """2^-N (sum n^2 - C*^2); an upper bound when the norm is a lower bound."""
    n.require_restricted("ggqd")
    _check_norm(n, norm)
    value = (n.squared_norm() - norm.value ** 2) / 2 ** n.n_qubits
    return _clamp_nonnegative(value, "ggqd")


def ggqd_two_qubit(n: BlochTensor | np.ndarray) -> float:
    """(d2^2 + d3^2) / 4 from the signed SVD of the correlation matrix."""
    if isinstance(n, BlochTensor):
        if n.n_qubits != 2:
            raise PreconditionError(f"ggqd_two_qubit needs 2 qubits, got {n.n_qubits}")
        n.require_restricted("ggqd_two_qubit")
        m = n.correlation_block()
    else:
        m = np.asarray(n, dtype=float)
    d = svd3(m).diag
    return float((d[1] ** 2 + d[2] ** 2) / 4.0)


def ggqd_hosvd(n: BlochTensor) -> float | None:
    """Closed form for HOSVD-diagonal tensors; None when the core is not diagonal."""
    n.require_restricted("ggqd_hosvd")
    t = hosvd(n)
    if not is_hosvd_diagonal(t, HOSVD_DIAGONAL_TOL):
        return None
    d2 = t.superdiagonal() ** 2
    return _clamp_nonnegative(float((d2.sum() - d2.max()) / 2 ** n.n_qubits), "ggqd")


# ---------------------------------------------------------------------------
# Entropic discord
# ---------------------------------------------------------------------------
def gqd(rho: DensityMatrix | None, n: BlochTensor, norm: NormResult) -> float:
    """I(rho) + h2((1 + C*)/2) - 1 in bits; rho defaults to the state of n."""
    n.require_restricted("gqd")
    _check_norm(n, norm)
    c = norm.value
    if abs(c) > 1.0 + NORM_INCONSISTENCY_TOL:
        raise InconsistencyError(f"|max C| = {abs(c):.9g} exceeds 1; the norm is unphysical")
    c = float(np.clip(c, -1.0, 1.0))
    if rho is None:
        rho = density_from_bloch(n)
    rho.require_physical()
    value = mutual_information(rho) + binary_entropy(0.5 * (1.0 + c)) - 1.0
    return _clamp_nonnegative(value, "gqd")


def measured_discord(rho: DensityMatrix, frame: MeasurementFrame) -> float:
    """I(rho) - I(Pi(rho)) for one measurement frame."""
    return mutual_information(rho) - mutual_information(apply_measurement(rho, frame))


def _angles_to_frame(x: np.ndarray) -> MeasurementFrame:
    theta, phi = x[0::2], x[1::2]
    return MeasurementFrame.from_spherical(theta, phi)


def gqd_from_definition(
    rho: DensityMatrix,
    starts: int = DEFINITION_STARTS,
    seed: int = DEFAULT_SEED,
) -> tuple[float, MeasurementFrame]:
    """
    Minimize I(rho) - I(Pi(rho)) directly over measurement angles.

    Works for any physical state (not only the restricted subspace); used as
    the reference the closed forms are checked against.
    """
    rho.require_physical()
    N = rho.n_qubits
    i_rho = mutual_information(rho)

    def objective(x: np.ndarray) -> float:
        return i_rho - mutual_information(apply_measurement(rho, _angles_to_frame(x)))

    rng = np.random.default_rng(seed)
    axis_angles = [(np.pi / 2, 0.0), (np.pi / 2, np.pi / 2), (0.0, 0.0)]
    x0s = [np.array([v for _ in range(N) for v in axis_angles[a]]) for a in range(3)]
    for _ in range(starts):
        x0s.append(np.column_stack([rng.uniform(0, np.pi, N), rng.uniform(0, 2 * np.pi, N)]).ravel())

    best_val, best_x = np.inf, x0s[0]
    for x0 in x0s:
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-13, "maxiter": 4000})
        if res.fun < best_val:
            best_val, best_x = float(res.fun), res.x
    return best_val, _angles_to_frame(best_x)


def hs_bound_holds(result: DiscordResult) -> bool | None:
    """Two-qubit relation 1 >= 2 D_GG >= D_G (reported only)."""
    if result.n_qubits != 2 or result.gqd is None:
        return None
    return bool(1.0 >= 2.0 * result.ggqd >= result.gqd - NEGATIVE_CLAMP_TOL)


# ---------------------------------------------------------------------------
# Method dispatch
# ---------------------------------------------------------------------------
def _hosvd_norm(n: BlochTensor) -> NormResult | None:
    t = hosvd(n)
    if not is_hosvd_diagonal(t, HOSVD_DIAGONAL_TOL):
        return None
    d = t.superdiagonal()
    a = int(np.argmax(np.abs(d)))
    vecs = np.array([R[a] for R in t.factors])
    if d[a] < 0:
        vecs[0] = -vecs[0]
    frame = MeasurementFrame(vecs)
    return NormResult(correlation_C(n, frame), frame, 0, True, 0)


def compute_discord(
    n: BlochTensor,
    method: str | Method = "auto",
    config: OptimizerConfig | None = None,
    with_gqd: bool = True,
    grid_steps: int = DEFAULT_GRID_STEPS,
    workers: int = 1,
) -> DiscordResult:
    """
    Both discords with the cheapest exact route available.

    auto: two qubits use the SVD; HOSVD-diagonal tensors use the core;
    everything else falls back to the mean-field optimizer.
    """
    n.require_restricted("compute_discord")
    config = config or OptimizerConfig()
    N = n.n_qubits

    if method == "auto":
        if N == 2:
            chosen = Method.EXACT2
        else:
            norm = _hosvd_norm(n)
            chosen = Method.HOSVD_DIAGONAL if norm is not None else Method.MEANFIELD
    else:
        try:
            chosen = Method("hosvd_diagonal" if method == "hosvd" else method)
        except ValueError as exc:
            raise ArgumentError(f"Unknown discord method {method!r}") from exc

    if chosen is Method.EXACT2:
        if N != 2:
            raise PreconditionError(f"exact2 needs 2 qubits, got {N}")
        norm = injective_norm_exact2(n)
    elif chosen is Method.HOSVD_DIAGONAL:
        norm = _hosvd_norm(n) if method != "auto" else norm
        if norm is None:
            raise PreconditionError("HOSVD core is not superdiagonal; use meanfield or bruteforce")
    elif chosen is Method.MEANFIELD:
        norm = injective_norm_meanfield(n, config, workers=workers)
    else:
        norm = injective_norm_bruteforce(n, grid_steps, config)

    logger.info("Discord via %s: max C = %.12g", chosen.value, norm.value)
    g = ggqd(n, norm)
    e = gqd(None, n, norm) if with_gqd else None
    return DiscordResult(ggqd=g, gqd=e, max_C=norm.value, optimal_frame=norm.frame, method=chosen)
