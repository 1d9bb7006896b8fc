"""
reproduce_figures.py
--------------------
Batch run of the decoherence showcases and the near-transition scaling study.

  exact_crossing:   diag(1, 0.8, 0.6)            discontinuous kink
  avoided_crossing: same with n13 = n31 = 0.2  smooth crossover
  scaling: Monte Carlo P(epsilon) for N = 2 and N = 3 at a fixed spectrum

Writes one CSV per series plus a summary JSON into OUTPUT_DIR.

Usage:
    python -m src.scripts.reproduce_figures --samples 100000 --threads 8
"""
import argparse
from pathlib import Path

from src.config.settings import DEFAULT_POINTS, DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_THREADS, OUTPUT_DIR
from src.dynamics import TrajectoryConfig, compute_trajectory, default_grid, detect_transition, trajectory_frame
from src.montecarlo import McConfig, estimate_probability
from src.qstate import BlochTensor
from src.report_writer import ReportWriter
from src.utils import get_logger, load_json, make_run_id, release_run_handlers

INPUTS = Path(__file__).resolve().parents[2] / "inputs"
SHOWCASES = {
    "exact_crossing": INPUTS / "crossing_diag.json",
    "avoided_crossing": INPUTS / "avoided_crossing.json",
}


def _parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Reproduce the decoherence figures and the scaling study")
    parser.add_argument("--points", type=int, default=DEFAULT_POINTS)
    parser.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--threads", type=int, default=DEFAULT_THREADS)
    parser.add_argument("--output-dir", default=OUTPUT_DIR)
    parser.add_argument("--skip-scaling", action="store_true")
    return parser.parse_args()


def main() -> None:
    args = _parse_args()
    run_id = make_run_id()
    logger = get_logger("reproduce_figures", run_id)
    writer = ReportWriter(run_id, args.output_dir)
    summary: dict = {}

    for name, path in SHOWCASES.items():
        logger.info(">> [%s] %s", name.upper(), path.name)
        n0 = BlochTensor.from_json(load_json(path))
        traj = compute_trajectory(
            n0,
            default_grid(args.points),
            TrajectoryConfig(workers=args.threads, shrink_unphysical=True),
        )
        report = detect_transition(traj)
        writer.write_frame(name, trajectory_frame(traj))
        summary[name] = {"transition": report.to_json(), "shrink_factor": traj.shrink_factor}

    if not args.skip_scaling:
        for n_qubits in (2, 3):
            logger.info(">> [SCALING] N=%d, %d samples", n_qubits, args.samples)
            config = McConfig(n_qubits=n_qubits, samples=args.samples, seed=args.seed)
            mc = estimate_probability(config, workers=args.threads)
            writer.write_frame(f"scaling_n{n_qubits}", mc.to_frame())
            summary[f"scaling_n{n_qubits}"] = mc.to_json()

    out = writer.write_json("figures_summary", summary)
    logger.info("Summary written to: %s", out)
    release_run_handlers(run_id)


if __name__ == "__main__":
    main()
