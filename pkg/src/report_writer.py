"""
report_writer.py
----------------
Writes the artifacts of one CLI run into OUTPUT_DIR:

  <run_id>_<name>.json      JSON results, floats rounded to 12 significant digits
  <run_id>_<name>.csv       plot-ready series (pandas, shortest round-trip floats)
  <run_id>_manifest.json    RunManifest: subcommand, argv, resolved config,
                            seed, tool version, input digests, duration
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd

from src.config.settings import OUTPUT_DIR, TOOL_VERSION
from src.utils import dumps_rounded, get_logger, sha256_file, to_jsonable


@dataclass
class RunManifest:
    run_id: str
    subcommand: str
    argv: list[str]
    config: dict[str, Any]
    seed: int | None = None
    tool_version: str = TOOL_VERSION
    input_digests: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    duration_s: float = 0.0

    def add_input(self, path: str | Path) -> None:
        self.input_digests[str(path)] = sha256_file(path)


class ReportWriter:
    """Owns the output directory for one run and names every file after the run id."""

    def __init__(self, run_id: str, output_dir: str | Path = OUTPUT_DIR):
        self.run_id = run_id
        self.output_dir = Path(output_dir)
        self.logger = get_logger("report_writer", run_id)

    def _path(self, name: str, suffix: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / f"{self.run_id}_{name}{suffix}"

    def write_json(self, name: str, payload: Any) -> Path:
        out_path = self._path(name, ".json")
        out_path.write_text(dumps_rounded(payload) + "\n", encoding="utf-8")
        self.logger.info("Wrote %s", out_path)
        return out_path

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        out_path = self._path(name, ".csv")
        # float_format=None keeps repr(), the shortest string that round-trips
        frame.to_csv(out_path, index=False)
        self.logger.info("Wrote %s (%d rows)", out_path, len(frame))
        return out_path

    def write_manifest(self, manifest: RunManifest) -> Path:
        out_path = self._path("manifest", ".json")
        out_path.write_text(dumps_rounded(to_jsonable(asdict(manifest))) + "\n", encoding="utf-8")
        self.logger.info("Manifest written to: %s", out_path)
        return out_path
