"""
main.py
-------
Command-line front end for the Bloch-vector discord toolkit.

Subcommands:
  discord     D_GG and D_G of a restricted Bloch tensor
  norm        injective norm (max frame correlation) by mean-field ascent
  trajectory  phase-flip trajectory, plot-ready CSV and transition report
  maxsat      DIMACS CNF through the tensor encoding
  montecarlo  near-transition probability over Haar-random frames
  hosvd       HOSVD / signed SVD of a Bloch tensor's correlation block
  convert     density-matrix JSON <-> Bloch-tensor JSON

Every run gets a run id, prints its JSON result to stdout (12 significant
digits), writes artifacts and a RunManifest to the output directory, and
appends a trace record to logs/<run_id>_traces.jsonl.

Usage:
    python -m src.main discord inputs/bell_density.json --method auto
    python -m src.main trajectory inputs/crossing_diag.json --points 201
    python -m src.main maxsat inputs/two_clause.cnf
    python -m src.main montecarlo --qubits 2 --samples 10000 --threads 8

Exit codes: 0 success, 1 domain error, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Any, Callable

from src.config.settings import (
    DEFAULT_ALPHA,
    DEFAULT_EPSILONS,
    DEFAULT_GAP_TOL,
    DEFAULT_GRID_STEPS,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_MC_POINTS,
    DEFAULT_PMAX,
    DEFAULT_POINTS,
    DEFAULT_RESTARTS,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_SPECTRUM,
    DEFAULT_THREADS,
    ENTRY_ZERO_TOL,
    OUTPUT_DIR,
)
from src.decompose import hosvd, is_hosvd_diagonal, svd3
from src.discord import compute_discord
from src.dynamics import (
    TrajectoryConfig,
    compute_trajectory,
    default_grid,
    detect_transition,
    trajectory_frame,
)
from src.maxsat import encode, parse_dimacs, solve_bruteforce, solve_via_tensor
from src.montecarlo import McConfig, estimate_probability
from src.qstate import BlochTensor, DensityMatrix, bloch_from_density, density_from_bloch
from src.report_writer import ReportWriter, RunManifest
from src.tensor_norm import OptimizerConfig, injective_norm_bruteforce, injective_norm_meanfield
from src.utils import (
    DiscordError,
    UsageError,
    dumps_rounded,
    get_logger,
    load_json,
    log_trace,
    make_run_id,
    release_run_handlers,
)

Handler = Callable[[argparse.Namespace, ReportWriter, RunManifest], dict]


# ---------------------------------------------------------------------------
# Input helpers
# ---------------------------------------------------------------------------
def _load_tensor(path: str, manifest: RunManifest) -> BlochTensor:
    payload = load_json(path)
    manifest.add_input(path)
    if not isinstance(payload, dict):
        raise UsageError(f"{path} must hold a JSON object")
    entries = payload.get("entries")
    # density JSON carries a square matrix of [re, im] pairs instead of labelled entries
    if isinstance(entries, list) and entries and isinstance(entries[0], list):
        rho = DensityMatrix.from_json(payload).require_physical()
        return bloch_from_density(rho)
    return BlochTensor.from_json(payload)


def _optimizer_config(args: argparse.Namespace) -> OptimizerConfig:
    return OptimizerConfig(
        alpha=args.alpha,
        max_iterations=args.max_iterations,
        restarts=args.restarts,
        seed=args.seed,
    )


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------
def _cmd_discord(args, writer: ReportWriter, manifest: RunManifest) -> dict:
    n = _load_tensor(args.input, manifest)
    result = compute_discord(
        n,
        method=args.method,
        config=_optimizer_config(args),
        with_gqd=not args.no_gqd,
        grid_steps=args.grid_steps,
        workers=args.threads,
    )
    payload = result.to_json()
    manifest.outputs.append(str(writer.write_json("discord", payload)))
    return payload


def _cmd_norm(args, writer: ReportWriter, manifest: RunManifest) -> dict:
    n = _load_tensor(args.input, manifest)
    config = _optimizer_config(args)
    result = injective_norm_meanfield(n, config, workers=args.threads)
    payload = result.to_json()
    if args.oracle:
        oracle = injective_norm_bruteforce(n, args.grid_steps, config)
        payload["oracle"] = oracle.to_json()
        payload["oracle_gap"] = oracle.value - result.value
    manifest.outputs.append(str(writer.write_json("norm", payload)))
    return payload


def _cmd_trajectory(args, writer: ReportWriter, manifest: RunManifest) -> dict:
    n0 = _load_tensor(args.input, manifest)
    config = TrajectoryConfig(
        optimizer=_optimizer_config(args),
        with_gqd=args.with_gqd,
        workers=args.threads,
        shrink_unphysical=not args.strict,
    )
    traj = compute_trajectory(n0, default_grid(args.points, args.pmax), config)
    report = detect_transition(traj, gap_tol=args.gap_tol, slope_tol=args.slope_tol)
    csv_path = writer.write_frame("trajectory", trajectory_frame(traj))
    payload = {
        "transition": report.to_json(),
        "points": int(traj.p_grid.size),
        "shrink_factor": traj.shrink_factor,
        "csv": str(csv_path),
    }
    manifest.outputs += [str(csv_path), str(writer.write_json("transition", payload))]
    return payload


def _cmd_maxsat(args, writer: ReportWriter, manifest: RunManifest) -> dict:
    path = Path(args.input)
    if not path.exists():
        raise UsageError(f"Input file not found: {path}")
    manifest.add_input(path)
    instance = parse_dimacs(path.read_text(encoding="utf-8"))
    energy = encode(instance)
    if args.tensor:
        count, assignment = solve_via_tensor(instance, _optimizer_config(args))
        payload = {"method": "tensor", "max_satisfied": count, "assignments": [list(assignment)]}
    else:
        brute = solve_bruteforce(instance, workers=args.threads, limit=args.limit)
        payload = {
            "method": "oracle",
            "max_satisfied": brute.max_satisfied,
            "assignments": [list(a) for a in brute.assignments],
            "maximizer_count": brute.count,
        }
    payload.update(energy.to_json())
    manifest.outputs.append(str(writer.write_json("maxsat", payload)))
    return payload


def _cmd_montecarlo(args, writer: ReportWriter, manifest: RunManifest) -> dict:
    config = McConfig(
        n_qubits=args.qubits,
        spectrum=args.spectrum,
        samples=args.samples,
        epsilons=args.epsilons,
        seed=args.seed,
        points=args.points,
    )
    report = estimate_probability(config, workers=args.threads)
    payload = report.to_json()
    manifest.outputs += [
        str(writer.write_json("montecarlo", payload)),
        str(writer.write_frame("montecarlo", report.to_frame())),
    ]
    return payload


def _cmd_hosvd(args, writer: ReportWriter, manifest: RunManifest) -> dict:
    n = _load_tensor(args.input, manifest)
    t = hosvd(n)
    payload: dict[str, Any] = {
        "superdiagonal": t.superdiagonal(),
        "factors": [R for R in t.factors],
        "hosvd_diagonal": is_hosvd_diagonal(t),
        "off_diagonal_max": t.off_diagonal_max(),
    }
    if n.n_qubits == 2:
        s = svd3(n.correlation_block())
        payload["svd3"] = {"left": s.left, "diag": s.diag, "right": s.right}
    manifest.outputs.append(str(writer.write_json("hosvd", payload)))
    return payload


def _cmd_convert(args, writer: ReportWriter, manifest: RunManifest) -> dict:
    payload = load_json(args.input)
    manifest.add_input(args.input)
    if args.to == "bloch":
        rho = DensityMatrix.from_json(payload).require_physical()
        out = bloch_from_density(rho).to_json(tol=ENTRY_ZERO_TOL)
    else:
        rho = density_from_bloch(BlochTensor.from_json(payload)).require_physical()
        out = rho.to_json()
    out_path = Path(args.output) if args.output else None
    if out_path is None:
        out_path = writer.write_json(f"converted_{args.to}", out)
    else:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(dumps_rounded(out) + "\n", encoding="utf-8")
    manifest.outputs.append(str(out_path))
    return out


HANDLERS: dict[str, Handler] = {
    "discord": _cmd_discord,
    "norm": _cmd_norm,
    "trajectory": _cmd_trajectory,
    "maxsat": _cmd_maxsat,
    "montecarlo": _cmd_montecarlo,
    "hosvd": _cmd_hosvd,
    "convert": _cmd_convert,
}


# ---------------------------------------------------------------------------
# CLI Entry Point
# ---------------------------------------------------------------------------
def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=DEFAULT_THREADS,
                        help="Worker threads (default: $DISCORD_THREADS or 1)")
    common.add_argument("--output-dir", default=OUTPUT_DIR, help="Directory for artifacts and the manifest")

    optimizer = argparse.ArgumentParser(add_help=False)
    optimizer.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Mean-field damping in (0, 1]")
    optimizer.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    optimizer.add_argument("--max-iterations", type=int, default=DEFAULT_MAX_ITERATIONS)
    optimizer.add_argument("--seed", type=int, default=DEFAULT_SEED)

    parser = argparse.ArgumentParser(
        prog="python -m src.main",
        description="Bloch-vector quantum discord toolkit",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("discord", parents=[common, optimizer], help="D_GG and D_G of a Bloch tensor")
    p.add_argument("input", help="Bloch-tensor or density-matrix JSON")
    p.add_argument("--method", default="auto", choices=["auto", "exact2", "hosvd", "meanfield", "bruteforce"])
    p.add_argument("--grid-steps", type=int, default=DEFAULT_GRID_STEPS)
    p.add_argument("--no-gqd", action="store_true", help="Skip the entropic discord")

    p = sub.add_parser("norm", parents=[common, optimizer], help="Injective norm by mean-field ascent")
    p.add_argument("input")
    p.add_argument("--oracle", action="store_true", help="Cross-check with the brute-force grid (N <= 4)")
    p.add_argument("--grid-steps", type=int, default=DEFAULT_GRID_STEPS)

    p = sub.add_parser("trajectory", parents=[common, optimizer], help="Phase-flip trajectory and transition")
    p.add_argument("input")
    p.add_argument("--pmax", type=float, default=DEFAULT_PMAX)
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.add_argument("--gap-tol", type=float, default=DEFAULT_GAP_TOL)
    p.add_argument("--slope-tol", type=float, default=None)
    p.add_argument("--with-gqd", action="store_true")
    p.add_argument("--strict", action="store_true", help="Refuse an unphysical initial tensor instead of shrinking it")

    p = sub.add_parser("maxsat", parents=[common, optimizer], help="MAX-k-SAT through the tensor encoding")
    p.add_argument("input", help="DIMACS CNF file")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--oracle", action="store_true", help="Exhaustive clause evaluation (default)")
    mode.add_argument("--tensor", action="store_true", help="Mean-field ascent on the encoded tensor")
    p.add_argument("--limit", type=int, default=None, help="Cap on listed maximizers")

    p = sub.add_parser("montecarlo", parents=[common], help="Near-transition probability over Haar frames")
    p.add_argument("--qubits", type=int, default=2)
    p.add_argument("--spectrum", type=_float_list, default=DEFAULT_SPECTRUM, help="d1,d2,d3")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    p.add_argument("--epsilons", type=_float_list, default=DEFAULT_EPSILONS, help="Ascending, comma-separated")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--points", type=int, default=DEFAULT_MC_POINTS)

    p = sub.add_parser("hosvd", parents=[common], help="HOSVD of the correlation block")
    p.add_argument("input")

    p = sub.add_parser("convert", parents=[common], help="Density JSON <-> Bloch JSON")
    p.add_argument("input")
    p.add_argument("--to", required=True, choices=["bloch", "density"])
    p.add_argument("--output", default=None, help="Output path (default: <output-dir>/<run_id>_converted_*.json)")
    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse argv, dispatch to one subcommand and return the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    if not argv:
        parser.print_help(sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    if args.threads < 1:
        print("ERROR: --threads must be at least 1", file=sys.stderr)
        return 2

    run_id = make_run_id()
    logger = get_logger("cli", run_id)
    logger.info(">> [%s] run %s", args.command.upper(), run_id)
    writer = ReportWriter(run_id, args.output_dir)
    manifest = RunManifest(
        run_id=run_id,
        subcommand=args.command,
        argv=argv,
        config={k: v for k, v in vars(args).items() if k != "command"},
        seed=getattr(args, "seed", None),
    )

    start = time.perf_counter()
    payload = None
    try:
        payload = HANDLERS[args.command](args, writer, manifest)
        code, outcome = 0, "ok"
    except UsageError as exc:
        logger.error("Usage error: %s", exc)
        print(f"ERROR: {exc}", file=sys.stderr)
        code, outcome = 2, f"usage_error: {exc}"
    except DiscordError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        print(f"ERROR: {type(exc).__name__}: {exc}", file=sys.stderr)
        code, outcome = 1, f"{type(exc).__name__}: {exc}"

    manifest.duration_s = time.perf_counter() - start
    if code == 0:
        writer.write_manifest(manifest)
        print(dumps_rounded(payload))
    log_trace(run_id, {
        "subcommand": args.command,
        "duration_s": manifest.duration_s,
        "inputs": list(manifest.input_digests),
        "outputs": manifest.outputs,
        "outcome": outcome,
        "exit_code": code,
    })
    logger.info("Finished %s in %.3fs (exit %d)", args.command, manifest.duration_s, code)
    release_run_handlers(run_id)
    return code


if __name__ == "__main__":
    sys.exit(run())
