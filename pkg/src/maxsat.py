"""
maxsat.py
---------
MAX-k-SAT as a pure-z multilinear energy.

With Theta_{j,z} = +1 meaning "variable j is True", clause i is falsified
exactly when s_j Theta_{j,z} = -1 for all its literals (s_j = +1 for v_j,
-1 for not v_j). The satisfied-clause count is

    C = sum_i [1 - prod_j (1 - s_j Theta_{j,z}) / 2] = constant + sum_S c_S prod_{j in S} Theta_{j,z}

and H = -C. EnergyTensor stores C's coefficients (the Bloch-tensor sign), so
H at an assignment is minus the number of satisfied clauses.
"""
from __future__ import annotations

import concurrent.futures
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations, product
from typing import Iterable, Sequence

import numpy as np

from src.config.settings import (
    MAX_CLAUSE_LENGTH,
    MAX_QUBITS,
    SAT_BRUTEFORCE_MAX_VARS,
    SAT_CHUNK_BITS,
)
from src.qstate import BlochTensor
from src.tensor_norm import OptimizerConfig
from src.utils import ArgumentError, ResourceLimitError, UsageError, get_logger

logger = get_logger(__name__)

_COEFF_EPS = 1e-15


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Literal:
    var: int
    negated: bool = False

    @property
    def sign(self) -> int:
        return -1 if self.negated else 1

    @classmethod
    def from_int(cls, lit: int) -> "Literal":
        if lit == 0:
            raise ArgumentError("Literal 0 is the DIMACS clause terminator, not a variable")
        return cls(abs(lit), lit < 0)

    def __str__(self) -> str:
        return f"{'~' if self.negated else ''}v{self.var}"


@dataclass(frozen=True)
class SatInstance:
    num_vars: int
    clauses: tuple[tuple[Literal, ...], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.num_vars < 1:
            raise ArgumentError(f"num_vars must be at least 1, got {self.num_vars}")
        clauses = tuple(tuple(c) for c in self.clauses)
        for i, clause in enumerate(clauses):
            seen = set()
            for lit in clause:
                if not 1 <= lit.var <= self.num_vars:
                    raise ArgumentError(f"Clause {i + 1}: variable {lit.var} outside 1..{self.num_vars}")
                if lit.var in seen:
                    raise ArgumentError(
                        f"Clause {i + 1}: variable {lit.var} appears twice (duplicate or tautology)"
                    )
                seen.add(lit.var)
        object.__setattr__(self, "clauses", clauses)

    @classmethod
    def from_ints(cls, num_vars: int, clauses: Iterable[Iterable[int]]) -> "SatInstance":
        return cls(num_vars, tuple(tuple(Literal.from_int(l) for l in c) for c in clauses))

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)


@dataclass(frozen=True)
class EnergyTensor:
    """C = constant + sum_S coeffs[S] prod_{j in S} Theta_{j,z}; variables are 1-based."""

    num_vars: int
    constant: float
    coeffs: dict

    def hamiltonian_terms(self) -> tuple[float, dict]:
        """The same polynomial with H = -C signs."""
        return -self.constant, {S: -c for S, c in self.coeffs.items()}

    def to_json(self) -> dict:
        return {
            "energy_constant": -self.constant,
            "coefficients": [
                {"vars": sorted(S), "value": -c}
                for S, c in sorted(self.coeffs.items(), key=lambda kv: (len(kv[0]), sorted(kv[0])))
            ],
        }


@dataclass(frozen=True)
class BruteforceResult:
    max_satisfied: int
    assignments: list
    count: int


# ---------------------------------------------------------------------------
# DIMACS
# ---------------------------------------------------------------------------
def parse_dimacs(text: str) -> SatInstance:
    """Parse DIMACS CNF: 'c' comments, one 'p cnf V C' header, 0-terminated clauses."""
    num_vars = None
    declared = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise UsageError(f"Line {lineno}: malformed problem line {line!r}")
            try:
                num_vars, declared = int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise UsageError(f"Line {lineno}: non-integer header field") from exc
            continue
        if num_vars is None:
            raise UsageError(f"Line {lineno}: clause before the 'p cnf' header")
        try:
            lits = [int(tok) for tok in line.split()]
        except ValueError as exc:
            raise UsageError(f"Line {lineno}: non-integer literal in {line!r}") from exc
        for lit in lits:
            if lit == 0:
                clauses.append(current)
                current = []
            else:
                current.append(lit)
    if num_vars is None:
        raise UsageError("DIMACS input has no 'p cnf' header")
    if current:
        clauses.append(current)
    if declared is not None and declared != len(clauses):
        logger.warning("DIMACS header declares %d clauses, found %d", declared, len(clauses))
    try:
        return SatInstance.from_ints(num_vars, clauses)
    except ArgumentError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------
def _finish(num_vars: int, constant: float, acc: dict) -> EnergyTensor:
    coeffs = {S: c for S, c in acc.items() if abs(c) > _COEFF_EPS}
    return EnergyTensor(num_vars, float(constant), coeffs)


def _check_clause_lengths(instance: SatInstance) -> None:
    for i, clause in enumerate(instance.clauses):
        if len(clause) > MAX_CLAUSE_LENGTH:
            raise ResourceLimitError(
                f"Clause {i + 1} has {len(clause)} literals; expansion is capped at {MAX_CLAUSE_LENGTH}"
            )


def encode(instance: SatInstance) -> EnergyTensor:
    """Expand each clause through its single falsifying assignment."""
    _check_clause_lengths(instance)
    constant = 0.0
    acc: dict = defaultdict(float)
    for clause in instance.clauses:
        k = len(clause)
        weight = 2.0 ** -k
        constant += 1.0 - weight
        for size in range(1, k + 1):
            for subset in combinations(clause, size):
                sign = 1
                for lit in subset:
                    sign *= -lit.sign
                acc[frozenset(l.var for l in subset)] -= weight * sign
    return _finish(instance.num_vars, constant, acc)


def encode_by_satisfying_assignments(instance: SatInstance) -> EnergyTensor:
    """Sum of prod_j (1 + x_j Theta_j)/2 over the 2^k - 1 satisfying local assignments."""
    _check_clause_lengths(instance)
    constant = 0.0
    acc: dict = defaultdict(float)
    for clause in instance.clauses:
        k = len(clause)
        weight = 2.0 ** -k
        falsifying = tuple(-lit.sign for lit in clause)
        for x in product((1, -1), repeat=k):
            if x == falsifying:
                continue
            constant += weight
            for size in range(1, k + 1):
                for idx in combinations(range(k), size):
                    acc[frozenset(clause[i].var for i in idx)] += weight * int(np.prod([x[i] for i in idx]))
    return _finish(instance.num_vars, constant, acc)


def to_bloch_tensor(energy: EnergyTensor) -> BlochTensor:
    """Place c_S on the label with digit 3 on S and 0 elsewhere; the constant is dropped."""
    if energy.num_vars > MAX_QUBITS:
        raise ResourceLimitError(f"{energy.num_vars} variables exceed the dense limit of {MAX_QUBITS}")
    arr = np.zeros((4,) * energy.num_vars)
    for S, c in energy.coeffs.items():
        idx = tuple(3 if (j + 1) in S else 0 for j in range(energy.num_vars))
        arr[idx] = c
    return BlochTensor(energy.num_vars, arr)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------
def _as_spins(assignment: Sequence, num_vars: int) -> np.ndarray:
    if len(assignment) != num_vars:
        raise ArgumentError(f"Assignment has {len(assignment)} values for {num_vars} variables")
    if all(isinstance(v, (bool, np.bool_)) for v in assignment):
        return np.array([1 if v else -1 for v in assignment])
    spins = np.asarray(assignment)
    if not np.all(np.isin(spins, (-1, 1))):
        raise ArgumentError(f"Assignment values must be +1/-1 (or booleans), got {list(assignment)}")
    return spins.astype(int)


def eval_energy(t: EnergyTensor, assignment: Sequence) -> float:
    """H = -(constant + sum_S c_S prod Theta); minus the satisfied-clause count."""
    spins = _as_spins(assignment, t.num_vars)
    total = t.constant
    for S, c in t.coeffs.items():
        total += c * int(np.prod([spins[j - 1] for j in S]))
    return -float(total)


def count_satisfied(instance: SatInstance, assignment: Sequence) -> int:
    spins = _as_spins(assignment, instance.num_vars)
    return sum(
        any(spins[lit.var - 1] == lit.sign for lit in clause) for clause in instance.clauses
    )


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------
def _chunk_counts(instance: SatInstance, start: int, stop: int) -> np.ndarray:
    """Satisfied counts for assignment integers [start, stop); bit 0 means True, v1 is the MSB."""
    N = instance.num_vars
    idx = np.arange(start, stop, dtype=np.int64)
    values = [(((idx >> (N - j)) & 1) == 0) for j in range(1, N + 1)]
    counts = np.zeros(stop - start, dtype=np.int32)
    for clause in instance.clauses:
        sat = np.zeros(stop - start, dtype=bool)
        for lit in clause:
            v = values[lit.var - 1]
            sat |= ~v if lit.negated else v
        counts += sat
    return counts


def _decode(index: int, num_vars: int) -> tuple[bool, ...]:
    return tuple(((index >> (num_vars - j)) & 1) == 0 for j in range(1, num_vars + 1))


def solve_bruteforce(instance: SatInstance, workers: int = 1, limit: int | None = None) -> BruteforceResult:
    """
    Exhaustive scan of all 2^N assignments by direct clause evaluation.

    Maximizers come back in enumeration order (True before False, v1 most
    significant); `limit` truncates the list but not the count.
    """
    N = instance.num_vars
    if N > SAT_BRUTEFORCE_MAX_VARS:
        raise ResourceLimitError(f"Brute force supports at most {SAT_BRUTEFORCE_MAX_VARS} variables, got {N}")
    total = 1 << N
    step = 1 << SAT_CHUNK_BITS
    ranges = [(s, min(s + step, total)) for s in range(0, total, step)]

    def scan(bounds: tuple[int, int]) -> tuple[int, np.ndarray]:
        counts = _chunk_counts(instance, *bounds)
        best = int(counts.max())
        return best, bounds[0] + np.flatnonzero(counts == best)

    if workers > 1 and len(ranges) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(scan, ranges))
    else:
        results = [scan(r) for r in ranges]

    best = max(r[0] for r in results)
    winners = np.concatenate([r[1] for r in results if r[0] == best])
    shown = winners if limit is None else winners[:limit]
    logger.debug("Brute force over %d assignments: max %d, %d maximizers", total, best, winners.size)
    return BruteforceResult(best, [_decode(int(i), N) for i in shown], int(winners.size))


def solve_via_tensor(instance: SatInstance, config: OptimizerConfig | None = None) -> tuple[int, tuple[bool, ...]]:
    """
    Mean-field ascent on the encoded tensor with every direction pinned to +-z.

    The site update turns into a sign choice on the z-component of the local
    field, so damping plays no role. Starts: all-True, then `restarts` random
    spin vectors seeded with seed + r. Returns a lower bound on max_satisfied
    and the assignment that achieved it.
    """
    config = config or OptimizerConfig()
    energy = encode(instance)
    N = instance.num_vars
    terms_by_var: dict[int, list] = defaultdict(list)
    for S, c in energy.coeffs.items():
        for j in S:
            terms_by_var[j].append((tuple(sorted(S - {j})), c))

    def z_field(spins: np.ndarray, j: int) -> float:
        return sum(c * int(np.prod([spins[i - 1] for i in rest])) for rest, c in terms_by_var[j])

    starts = [np.ones(N, dtype=int)]
    for r in range(config.restarts):
        rng = np.random.default_rng(config.seed + r)
        starts.append(rng.choice((-1, 1), size=N))

    best_count, best_spins = -1, starts[0]
    for spins in starts:
        spins = spins.copy()
        for _ in range(config.max_iterations):
            changed = False
            for j in range(1, N + 1):
                f = z_field(spins, j)
                if f != 0.0 and np.sign(f) != spins[j - 1]:
                    spins[j - 1] = int(np.sign(f))
                    changed = True
            if not changed:
                break
        count = count_satisfied(instance, spins)
        if count > best_count:
            best_count, best_spins = count, spins
    return best_count, tuple(bool(s == 1) for s in best_spins)
