"""
settings.py
-----------
Central configuration for the Bloch-vector discord toolkit.

Every numerical tolerance, optimizer default and output path lives here so
that algorithm modules never hard-code a threshold. Values can be overridden
per call through the config dataclasses (OptimizerConfig, TrajectoryConfig,
McConfig); the constants below are only the defaults.
"""
import os

TOOL_VERSION: str = "1.0.0"

# ---------------------------------------------------------------------------
# State tolerances
# ---------------------------------------------------------------------------
HERMITIAN_TOL: float = 1e-12       # max |rho - rho^dagger|
TRACE_TOL: float = 1e-12           # |Tr rho - 1|
UNIT_NORM_TOL: float = 1e-12       # measurement direction norms
RESTRICTED_TOL: float = 1e-12      # digit-0 coefficients of restricted tensors
IMAG_TOL: float = 1e-12            # imaginary part of Tr(rho O_a)
ENTRY_ZERO_TOL: float = 1e-14      # JSON export drops |n_a| below this
PSD_TOL: float = 1e-10             # physicality: min eigenvalue >= -PSD_TOL
ENTROPY_NEG_TOL: float = 1e-8      # entropy refuses eigenvalues below -this
MAX_QUBITS: int = 12               # dense representation limit

# ---------------------------------------------------------------------------
# Decompositions
# ---------------------------------------------------------------------------
JACOBI_TOL: float = 1e-14          # off-diagonality target per column pair
JACOBI_MAX_SWEEPS: int = 50
HOSVD_DIAGONAL_TOL: float = 1e-8   # core off-superdiagonal threshold

# ---------------------------------------------------------------------------
# Mean-field optimizer defaults
# ---------------------------------------------------------------------------
DEFAULT_ALPHA: float = 1.0
DEFAULT_MAX_ITERATIONS: int = 500
DEFAULT_CONVERGENCE_TOL: float = 1e-10
DEFAULT_RESTARTS: int = 20
DEFAULT_SEED: int = 20240117
AXIS_SEED_MAX_QUBITS: int = 6      # 3^N axis seeds only up to this N
AXIS_SEED_CAP: int = 729
BRUTEFORCE_MAX_QUBITS: int = 4
DEFAULT_GRID_STEPS: int = 30

# ---------------------------------------------------------------------------
# Discord clamps
# ---------------------------------------------------------------------------
NEGATIVE_CLAMP_TOL: float = 1e-9   # clamp to 0 above -this, raise below
NORM_INCONSISTENCY_TOL: float = 1e-6
NORM_MATCH_TOL: float = 1e-9       # NormResult.value vs recomputed C
DEFINITION_STARTS: int = 12        # multistart budget for the entropic minimizer

# ---------------------------------------------------------------------------
# MAX-k-SAT
# ---------------------------------------------------------------------------
MAX_CLAUSE_LENGTH: int = 8
SAT_BRUTEFORCE_MAX_VARS: int = 24
SAT_CHUNK_BITS: int = 16           # assignments per chunk = 2**SAT_CHUNK_BITS

# ---------------------------------------------------------------------------
# Decoherence dynamics
# ---------------------------------------------------------------------------
DEFAULT_POINTS: int = 201
DEFAULT_PMAX: float = 0.5
DEFAULT_GAP_TOL: float = 1e-3
SLOPE_TOL_FACTOR: float = 5.0
SLOPE_TOL_FLOOR: float = 1e-9
MIN_TRAJECTORY_POINTS: int = 5
REFINE_ROUNDS: int = 6
REFINE_POINTS: int = 33
TRACK_TIE_RTOL: float = 1e-9       # tracks this close to d1 at p = 0 count as tied with it
BRANCH_MAX_SWEEPS: int = 200       # batched ascent for N >= 3 local-maximum tracks
BRANCH_CONVERGENCE_TOL: float = 1e-12
BRANCH_MATCH_TOL: float = 1e-6     # frames with prod_k |u_k . v_k| above 1 - this are one maximum
DIRECTION_EXCHANGE_OVERLAP: float = 0.7071067811865476   # |cos| below 1/sqrt(2)

# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------
DEFAULT_EPSILONS: tuple = (0.02, 0.05, 0.1, 0.2)
DEFAULT_SPECTRUM: tuple = (1.0, 0.8, 0.6)
DEFAULT_SAMPLES: int = 10_000
DEFAULT_MC_POINTS: int = 101
MIN_FIT_HITS: int = 10
CONFIDENCE_LEVEL: float = 0.95

# ---------------------------------------------------------------------------
# Threading
# ---------------------------------------------------------------------------
DEFAULT_THREADS: int = int(os.environ.get("DISCORD_THREADS", "1") or 1)

# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------
SIGNIFICANT_DIGITS: int = 12
OUTPUT_DIR: str = os.path.join(os.path.dirname(__file__), "..", "..", "output")
LOG_DIR: str    = os.path.join(os.path.dirname(__file__), "..", "..", "logs")
