"""
qstate.py
---------
N-qubit states in two representations and the conversions between them.

  DensityMatrix  : 2^N x 2^N complex Hermitian, unit trace
  BlochTensor    : real coefficients n_a = Tr(rho O_a) over a in {0,1,2,3}^N,
                   stored as a dense (4,)*N array whose all-zero entry is 0
                   (the identity coefficient is fixed at 1 and never stored)
  MeasurementFrame : one unit 3-vector per qubit

Qubit k (0-based in the API) is array axis k, and the most significant digit
of a printed label such as "13" is qubit 1. Matrix indices follow the usual
Kronecker order, qubit 1 leftmost.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as la
import tensorly as tl
from scipy.special import entr

from src.config.settings import (
    ENTROPY_NEG_TOL,
    HERMITIAN_TOL,
    IMAG_TOL,
    MAX_QUBITS,
    PSD_TOL,
    RESTRICTED_TOL,
    TRACE_TOL,
    UNIT_NORM_TOL,
)
from src.utils import (
    ArgumentError,
    InvalidStateError,
    PreconditionError,
    UsageError,
    get_logger,
)

logger = get_logger(__name__)

PAULIS = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
LN2 = np.log(2.0)


def _check_qubits(n_qubits: int) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or n_qubits < 1:
        raise ArgumentError(f"n_qubits must be a positive integer, got {n_qubits!r}")
    if n_qubits > MAX_QUBITS:
        raise ArgumentError(f"n_qubits={n_qubits} exceeds the dense limit of {MAX_QUBITS}")


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """
    Hermitian unit-trace operator. Positivity is not enforced here because
    density_from_bloch may legitimately produce non-positive operators; call
    `require_physical` (or `physicality` on the Bloch side) before using a
    matrix as a state.
    """

    n_qubits: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        _check_qubits(self.n_qubits)
        dim = 2 ** self.n_qubits
        arr = np.array(self.entries, dtype=complex)
        if arr.shape != (dim, dim):
            raise InvalidStateError(
                f"Density matrix for {self.n_qubits} qubits must be {dim}x{dim}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise InvalidStateError("Density matrix has non-finite entries")
        herm_err = float(np.max(np.abs(arr - arr.conj().T)))
        if herm_err > HERMITIAN_TOL:
            raise InvalidStateError(f"Density matrix is not Hermitian (max deviation {herm_err:.3e})")
        trace_err = abs(np.trace(arr) - 1.0)
        if trace_err > TRACE_TOL:
            raise InvalidStateError(f"Density matrix trace deviates from 1 by {trace_err:.3e}")
        object.__setattr__(self, "entries", _readonly(arr))

    @property
    def dim(self) -> int:
        return 2 ** self.n_qubits

    def eigenvalues(self) -> np.ndarray:
        return la.eigvalsh(self.entries)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def require_physical(self) -> "DensityMatrix":
        lam = self.min_eigenvalue()
        if lam < -PSD_TOL:
            raise InvalidStateError(f"State is not positive semidefinite (min eigenvalue {lam:.3e})")
        return self

    def to_json(self) -> dict:
        rows = [[[float(z.real), float(z.imag)] for z in row] for row in self.entries]
        return {"n_qubits": self.n_qubits, "entries": rows}

    @classmethod
    def from_json(cls, payload: dict) -> "DensityMatrix":
        try:
            n_qubits = int(payload["n_qubits"])
            arr = np.array(payload["entries"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"Malformed density-matrix JSON: {exc}") from exc
        dim = 2 ** n_qubits
        if arr.shape != (dim, dim, 2):
            raise UsageError(f"Density-matrix JSON entries must be {dim}x{dim} [re, im] pairs")
        return cls(n_qubits, arr[..., 0] + 1j * arr[..., 1])


@dataclass(frozen=True, eq=False)
class BlochTensor:
    """Generalized Bloch vector n_a of an N-qubit state, dense over {0,1,2,3}^N."""

    n_qubits: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        _check_qubits(self.n_qubits)
        arr = np.array(self.coeffs, dtype=float)
        shape = (4,) * self.n_qubits
        if arr.shape != shape:
            raise ArgumentError(f"Bloch coefficients must have shape {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ArgumentError("Bloch coefficients must be finite")
        if arr[(0,) * self.n_qubits] != 0.0:
            raise ArgumentError("The all-zero coefficient is fixed at 1 and must not be stored")
        object.__setattr__(self, "coeffs", _readonly(arr))

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def zeros(cls, n_qubits: int) -> "BlochTensor":
        return cls(n_qubits, np.zeros((4,) * n_qubits))

    @classmethod
    def from_entries(cls, n_qubits: int, entries: dict[str, float]) -> "BlochTensor":
        """Build from {"13": 0.2, ...}; omitted labels are zero."""
        arr = np.zeros((4,) * n_qubits)
        for label, value in entries.items():
            arr[parse_label(label, n_qubits)] = float(value)
        return cls(n_qubits, arr)

    @classmethod
    def from_correlation(cls, block: np.ndarray) -> "BlochTensor":
        """Embed a (3,)*N correlation block into the restricted subspace."""
        block = np.asarray(block, dtype=float)
        n_qubits = block.ndim
        if block.shape != (3,) * n_qubits:
            raise ArgumentError(f"Correlation block must have shape (3,)*N, got {block.shape}")
        arr = np.zeros((4,) * n_qubits)
        arr[(slice(1, None),) * n_qubits] = block
        return cls(n_qubits, arr)

    # ------------------------------------------------------------------
    # Views
    # ------------------------------------------------------------------

    def is_restricted(self, tol: float = RESTRICTED_TOL) -> bool:
        """True iff every coefficient with a 0 digit vanishes."""
        mask = np.ones(self.coeffs.shape, dtype=bool)
        mask[(slice(1, None),) * self.n_qubits] = False
        return bool(np.all(np.abs(self.coeffs[mask]) <= tol))

    def require_restricted(self, what: str) -> None:
        if not self.is_restricted():
            raise PreconditionError(f"{what} requires a restricted-subspace Bloch tensor")

    def correlation_block(self) -> np.ndarray:
        return self.coeffs[(slice(1, None),) * self.n_qubits]

    def entries(self, tol: float = 0.0) -> dict[str, float]:
        """Nonzero coefficients keyed by base-4 label, in label order."""
        out = {}
        for idx in zip(*np.nonzero(np.abs(self.coeffs) > tol)):
            out["".join(str(d) for d in idx)] = float(self.coeffs[idx])
        return out

    def squared_norm(self) -> float:
        return float(np.sum(self.coeffs ** 2))

    def scaled(self, factor: float) -> "BlochTensor":
        return BlochTensor(self.n_qubits, self.coeffs * factor)

    def to_json(self, tol: float = 0.0) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "entries": [{"a": a, "value": v} for a, v in self.entries(tol).items()],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "BlochTensor":
        try:
            n_qubits = int(payload["n_qubits"])
            entries = {str(e["a"]): float(e["value"]) for e in payload["entries"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"Malformed Bloch-tensor JSON: {exc}") from exc
        try:
            return cls.from_entries(n_qubits, entries)
        except ArgumentError as exc:
            raise UsageError(str(exc)) from exc


@dataclass(frozen=True, eq=False)
class MeasurementFrame:
    """Per-qubit measurement directions, shape (N, 3)."""

    angles: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.angles, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
            raise ArgumentError(f"Measurement frame must have shape (N, 3), got {arr.shape}")
        norms = np.linalg.norm(arr, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ArgumentError(f"Measurement directions must be unit vectors (norms {norms})")
        object.__setattr__(self, "angles", _readonly(arr))

    @property
    def n_qubits(self) -> int:
        return self.angles.shape[0]

    @classmethod
    def from_vectors(cls, vectors: Iterable[Sequence[float]]) -> "MeasurementFrame":
        arr = np.array(list(vectors), dtype=float)
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ArgumentError("Measurement direction cannot be the zero vector")
        return cls(arr / norms)

    @classmethod
    def axis_aligned(cls, axes: Sequence[int], signs: Sequence[int] | None = None) -> "MeasurementFrame":
        """axes[k] in {0,1,2} selects x/y/z for qubit k."""
        signs = signs if signs is not None else [1] * len(axes)
        arr = np.zeros((len(axes), 3))
        for k, (axis, sign) in enumerate(zip(axes, signs)):
            arr[k, axis] = 1.0 if sign >= 0 else -1.0
        return cls(arr)

    @classmethod
    def random(cls, n_qubits: int, rng: np.random.Generator) -> "MeasurementFrame":
        return cls.from_vectors(rng.standard_normal((n_qubits, 3)))

    @classmethod
    def from_spherical(cls, theta: Sequence[float], phi: Sequence[float]) -> "MeasurementFrame":
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        return cls.from_vectors(spherical_to_cartesian(theta, phi))


def spherical_to_cartesian(theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1
    )


def parse_label(label: str, n_qubits: int) -> tuple[int, ...]:
    if len(label) != n_qubits or any(ch not in "0123" for ch in label):
        raise ArgumentError(f"Label {label!r} is not {n_qubits} base-4 digits")
    idx = tuple(int(ch) for ch in label)
    if not any(idx):
        raise ArgumentError("The all-zero label is fixed at 1 and cannot be given")
    return idx


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------
def bloch_from_density(rho: DensityMatrix) -> BlochTensor:
    """n_a = Tr(rho O_a) for every Pauli string O_a."""
    n = rho.n_qubits
    t = rho.entries.reshape((2,) * (2 * n))
    operands: list = [t, list(range(2 * n))]
    for k in range(n):
        # O_a[j, i] pairs row index i_k (label k) with column index j_k (label n+k)
        operands += [PAULIS, [2 * n + k, n + k, k]]
    coeffs = np.einsum(*operands, list(range(2 * n, 3 * n)), optimize="greedy")
    imag = float(np.max(np.abs(coeffs.imag)))
    if imag > IMAG_TOL:
        raise InvalidStateError(f"Pauli expectations have imaginary parts up to {imag:.3e}")
    real = coeffs.real.copy()
    real[(0,) * n] = 0.0
    return BlochTensor(n, real)


def density_from_bloch(n: BlochTensor) -> DensityMatrix:
    """rho = 2^-N (I + sum_a n_a O_a); positivity is not guaranteed."""
    N = n.n_qubits
    full = n.coeffs.astype(complex)
    full[(0,) * N] = 1.0
    operands: list = [full, list(range(N))]
    for k in range(N):
        operands += [PAULIS, [k, N + k, 2 * N + k]]
    t = np.einsum(*operands, list(range(N, 3 * N)), optimize="greedy")
    dim = 2 ** N
    mat = t.reshape(dim, dim) / dim
    # exact symmetrization removes rounding-level anti-Hermitian residue
    mat = 0.5 * (mat + mat.conj().T)
    return DensityMatrix(N, mat)


def physicality(n: BlochTensor) -> tuple[bool, float]:
    lam = density_from_bloch(n).min_eigenvalue()
    return lam >= -PSD_TOL, lam


def shrink_to_physical(n: BlochTensor) -> tuple[BlochTensor, float]:
    """
    Largest t in (0, 1] with rho(t n) positive semidefinite, and the scaled tensor.

    rho(t) = 2^-N (I + t A) with A traceless Hermitian, so the boundary is the
    closed form t* = -1 / lambda_min(A) whenever lambda_min(A) < -1.
    """
    rho = density_from_bloch(n)
    dim = rho.dim
    a_min = float(la.eigvalsh(dim * rho.entries - np.eye(dim))[0])
    if a_min >= -1.0:
        return n, 1.0
    factor = -1.0 / a_min
    logger.debug("Shrinking tensor by %.6g to reach the physical boundary", factor)
    return n.scaled(factor), factor


def bell_diagonal(c1: float, c2: float, c3: float) -> BlochTensor:
    return BlochTensor.from_correlation(np.diag([c1, c2, c3]))


def random_restricted(n_qubits: int, rng: np.random.Generator) -> BlochTensor:
    """Uniform [-1, 1] correlation coefficients, shrunk onto the physical set."""
    block = rng.uniform(-1.0, 1.0, size=(3,) * n_qubits)
    tensor, _ = shrink_to_physical(BlochTensor.from_correlation(block))
    return tensor


# ---------------------------------------------------------------------------
# Marginals and entropies
# ---------------------------------------------------------------------------
def marginal(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Partial trace onto the qubits in `keep` (0-based), returned in ascending order."""
    n = rho.n_qubits
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ArgumentError("marginal needs at least one qubit to keep")
    if keep[0] < 0 or keep[-1] >= n:
        raise ArgumentError(f"Qubit indices {keep} out of range for {n} qubits")
    t = rho.entries.reshape((2,) * (2 * n))
    row = list(range(n))
    col = [n + k if k in keep else k for k in range(n)]
    out = [k for k in keep] + [n + k for k in keep]
    reduced = np.einsum(t, row + col, out)
    dim = 2 ** len(keep)
    mat = reduced.reshape(dim, dim)
    return DensityMatrix(len(keep), 0.5 * (mat + mat.conj().T))


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-sum lambda log2 lambda, with 0 log 0 = 0."""
    lam = rho.eigenvalues()
    if lam[0] < -ENTROPY_NEG_TOL:
        raise InvalidStateError(f"Entropy of a non-positive operator (min eigenvalue {lam[0]:.3e})")
    return float(np.sum(entr(np.clip(lam, 0.0, None))) / LN2)


def mutual_information(rho: DensityMatrix) -> float:
    """sum_i S(rho_i) - S(rho) over single-qubit marginals."""
    marginals = sum(von_neumann_entropy(marginal(rho, [k])) for k in range(rho.n_qubits))
    return float(marginals - von_neumann_entropy(rho))


# ---------------------------------------------------------------------------
# Local channels and measurement
# ---------------------------------------------------------------------------
def _apply_local_kraus(entries: np.ndarray, n_qubits: int, site: int, kraus: Sequence[np.ndarray]) -> np.ndarray:
    t = entries.reshape((2,) * (2 * n_qubits))
    out = np.zeros_like(t)
    for K in kraus:
        left = np.moveaxis(np.tensordot(K, t, axes=([1], [site])), 0, site)
        both = np.tensordot(left, K.conj(), axes=([n_qubits + site], [1]))
        out = out + np.moveaxis(both, -1, n_qubits + site)
    dim = 2 ** n_qubits
    return out.reshape(dim, dim)


def apply_local_channel(rho: DensityMatrix, site: int, kraus: Sequence[np.ndarray]) -> DensityMatrix:
    """sum_K K rho K^dagger with every K acting on qubit `site` only."""
    if not 0 <= site < rho.n_qubits:
        raise ArgumentError(f"Site {site} out of range for {rho.n_qubits} qubits")
    kraus = [np.asarray(K, dtype=complex) for K in kraus]
    mat = _apply_local_kraus(rho.entries, rho.n_qubits, site, kraus)
    return DensityMatrix(rho.n_qubits, 0.5 * (mat + mat.conj().T))


def projectors(direction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(I + Theta.sigma)/2 and (I - Theta.sigma)/2."""
    sigma = np.tensordot(direction, PAULIS[1:], axes=1)
    return 0.5 * (PAULIS[0] + sigma), 0.5 * (PAULIS[0] - sigma)


def apply_measurement(rho: DensityMatrix, frame: MeasurementFrame) -> DensityMatrix:
    """Non-selective local projective measurement along the frame on every qubit."""
    if frame.n_qubits != rho.n_qubits:
        raise ArgumentError(f"Frame has {frame.n_qubits} directions for {rho.n_qubits} qubits")
    mat = rho.entries
    for site in range(rho.n_qubits):
        mat = _apply_local_kraus(mat, rho.n_qubits, site, projectors(frame.angles[site]))
    return DensityMatrix(rho.n_qubits, 0.5 * (mat + mat.conj().T))


def frame_contraction(n: BlochTensor, frame: MeasurementFrame) -> float:
    """
    C = sum_a n_a prod_i Theta_{i, a_i} with Theta_{i, 0} = 1.

    Each direction is lifted to (1, Theta) and contracted from the last qubit
    inward; the stored all-zero coefficient is 0 so the identity term drops out.
    """
    if frame.n_qubits != n.n_qubits:
        raise ArgumentError(f"Frame has {frame.n_qubits} directions for {n.n_qubits} qubits")
    t = n.coeffs
    for k in range(n.n_qubits - 1, -1, -1):
        t = t @ np.concatenate(([1.0], frame.angles[k]))
    return float(t)


def post_measurement_spectrum(n: BlochTensor, frame: MeasurementFrame) -> tuple[float, float, int]:
    """Two eigenvalues 2^-N (1 +- C), each with multiplicity 2^(N-1)."""
    n.require_restricted("post_measurement_spectrum")
    c = frame_contraction(n, frame)
    scale = 2.0 ** -n.n_qubits
    return scale * (1.0 + c), scale * (1.0 - c), 2 ** (n.n_qubits - 1)


def rotate_local(n: BlochTensor, rotations: Sequence[np.ndarray]) -> BlochTensor:
    """
    Apply per-qubit proper rotations R_k to the Bloch components (digit 0 fixed).

    The rotated tensor satisfies C(n', R Theta) = C(n, Theta), and its density
    matrix is a local-unitary conjugate of the original.
    """
    if len(rotations) != n.n_qubits:
        raise ArgumentError(f"Need {n.n_qubits} rotations, got {len(rotations)}")
    lifted = [la.block_diag(1.0, np.asarray(R, dtype=float)) for R in rotations]
    coeffs = tl.tenalg.multi_mode_dot(tl.tensor(n.coeffs), lifted)
    coeffs = np.array(tl.to_numpy(coeffs))
    coeffs[(0,) * n.n_qubits] = 0.0
    return BlochTensor(n.n_qubits, coeffs)

