"""Benchmarking engine: elimination runs over cities x encodings x seeds."""

import asyncio
import csv
import itertools
import json
import logging
import math
from collections import defaultdict
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from src.core.errors import QuboError
from src.graph import eliminate_subtours
from src.settings import get_settings
from src.state import Encoding, RunReport
from src.tools.penalty_tools import PenaltyConfig
from src.tools.sampler_tools import AnnealSchedule, build_sampler, derive_seed
from src.tools.tsp_tools import generate_instance

logger = logging.getLogger(__name__)

ConstraintMode = Literal["reset", "cumulative"]

SWEEP_FILE = "config/bench_sweep.json"
RESULTS_FILE = "benchmark_results.csv"
REPORT_FILE = "benchmark_report.md"

CSV_FIELDS = [
    "n",
    "encoding",
    "mode",
    "seed",
    "valid_probability",
    "mean_distance",
    "std_distance",
    "min_distance",
    "optimum_reference",
    "qubits",
    "connections",
    "iterations_used",
    "wall_time_ms",
]


class BenchSweep(BaseModel):
    """One benchmark sweep as read from ``config/bench_sweep.json``."""

    cities: List[int] = Field(default_factory=lambda: [5, 6])
    encodings: List[Encoding] = Field(default_factory=lambda: ["relaxation", "slack", "unbalanced"])
    seeds: List[int] = Field(default_factory=lambda: [0])
    reads: int = Field(default=1000, ge=1)
    sweeps: int = Field(default=1000, ge=1)
    beta_min: float = Field(default=0.09, gt=0.0)
    beta_max: float = Field(default=9.6, gt=0.0)
    max_iterations: int = Field(default=10, ge=1)
    solver: Literal["sa", "exact"] = "sa"
    modes: List[ConstraintMode] = Field(default_factory=lambda: ["reset"])
    workers: int = Field(default=1, ge=1)

    @field_validator("cities")
    @classmethod
    def _at_least_three(cls, v: List[int]) -> List[int]:
        if not v or min(v) < 3:
            raise ValueError(f"every sweep point needs at least 3 cities, got {v}")
        return v

    @field_validator("modes")
    @classmethod
    def _some_mode(cls, v: List[str]) -> List[str]:
        if not v:
            raise ValueError("a sweep needs at least one constraint mode")
        return list(dict.fromkeys(v))


def load_sweep(path: str = SWEEP_FILE, **overrides: Any) -> BenchSweep:
    """Read a sweep file; keyword overrides that are not None replace file values."""
    with open(path, "r") as f:
        data = json.load(f)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return BenchSweep(**data)


def format_cell(value: Any) -> str:
    """CSV cell: 12 significant digits, empty for missing or non-finite numbers."""
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}" if math.isfinite(value) else ""
    return str(value)


def report_row(report: RunReport, mode: ConstraintMode, seed: int) -> Dict[str, Any]:
    row = report.model_dump(mode="python")
    row["mode"] = mode
    row["seed"] = seed
    return {field: row.get(field) for field in CSV_FIELDS}


def run_point(sweep: BenchSweep, n: int, encoding: Encoding, mode: ConstraintMode, seed: int) -> Dict[str, Any]:
    """One elimination run; instance and sampler seeds are derived from ``seed``.

    Both modes of a seed see the same instance and sampler stream.
    """
    settings = get_settings()
    inst = generate_instance(n, derive_seed(seed, "instance"))
    sampler = build_sampler(
        sweep.solver,
        sweep.reads,
        seed=derive_seed(seed, "sampler"),
        schedule=AnnealSchedule(beta_min=sweep.beta_min, beta_max=sweep.beta_max, num_sweeps=sweep.sweeps),
        reads_per_stream=settings.reads_per_stream,
        exhaustive_cap=settings.exhaustive_cap,
    )
    _, report = eliminate_subtours(
        inst,
        encoding,
        PenaltyConfig.for_encoding(encoding),
        sampler,
        max_iterations=sweep.max_iterations,
        cumulative=mode == "cumulative",
    )
    return report_row(report, mode, seed)


def write_csv(rows: List[Dict[str, Any]], path: str) -> None:
    with open(path, "w", newline="") as csvfile:
        writer = csv.DictWriter(csvfile, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_cell(row.get(k)) for k in CSV_FIELDS})


async def run_benchmark(
    sweep: BenchSweep,
    output: str = RESULTS_FILE,
    report_path: Optional[str] = REPORT_FILE,
) -> List[Dict[str, Any]]:
    """Execute every sweep point, at most ``sweep.workers`` at a time, in sweep order."""
    points = [
        (n, enc, mode, seed)
        for n in sweep.cities
        for enc in sweep.encodings
        for mode in sweep.modes
        for seed in sweep.seeds
    ]
    logger.info(f"🚀 Starting benchmark sweep across {len(points)} points...")
    gate = asyncio.Semaphore(sweep.workers)

    async def one(n: int, encoding: Encoding, mode: ConstraintMode, seed: int) -> Optional[Dict[str, Any]]:
        async with gate:
            try:
                row = await asyncio.to_thread(run_point, sweep, n, encoding, mode, seed)
            except QuboError as e:
                logger.error(f"  ❌ n={n} {encoding} {mode} seed={seed}: {e}")
                return None
        logger.info(
            f"  ✅ n={n} {encoding} {mode} seed={seed}: P(valid)={row['valid_probability']:.4f}, "
            f"{row['iterations_used']} iterations"
        )
        return row

    results = await asyncio.gather(*(one(*p) for p in points))
    rows = [r for r in results if r is not None]

    logger.info(f"\n💾 Writing results to {output}...")
    write_csv(rows, output)
    generate_encoding_summary(rows, report_path)
    return rows


def generate_encoding_summary(rows: List[Dict[str, Any]], md_path: Optional[str] = REPORT_FILE) -> str:
    """Log statistics per encoding and constraint mode with ASCII bars and write them as markdown."""
    logger.info("\n" + "=" * 60)
    logger.info("📊 ENCODING COMPARISON")
    logger.info("=" * 60)

    groups: Dict[Tuple[str, str], List[Dict[str, Any]]] = defaultdict(list)
    for row in rows:
        groups[(row["encoding"], row.get("mode") or "reset")].append(row)

    md_content = "# Sub-tour Elimination Benchmark Report\n\n"
    for encoding, mode in itertools.product(["relaxation", "slack", "unbalanced"], ["reset", "cumulative"]):
        enc_rows = groups.get((encoding, mode))
        if not enc_rows:
            continue

        avg_prob = sum(r["valid_probability"] for r in enc_rows) / len(enc_rows)
        gaps = [
            r["min_distance"] - r["optimum_reference"]
            for r in enc_rows
            if r["min_distance"] is not None
            and math.isfinite(r["min_distance"])
            and r["optimum_reference"] is not None
        ]
        no_tour = sum(
            1 for r in enc_rows if r["min_distance"] is None or not math.isfinite(r["min_distance"])
        )
        optimal = sum(1 for g in gaps if g <= 1e-9)
        avg_gap = sum(gaps) / len(gaps) if gaps else None
        avg_qubits = sum(r["qubits"] for r in enc_rows) / len(enc_rows)
        bar = "█" * int(avg_prob * 50)
        gap_text = f"{avg_gap:.4f}" if avg_gap is not None else "n/a"

        logger.info(f"\n🏷️  Encoding: {encoding} / {mode} constraints ({len(enc_rows)} runs)")
        logger.info(f"   Mean Valid Probability:  {avg_prob:.4f}")
        logger.info(f"   Mean Gap to Optimum:     {gap_text}")
        logger.info(f"   Optimal Tours Found:     {optimal}")
        logger.info(f"   Runs Without Valid Tour: {no_tour}")
        logger.info(f"   Mean Qubits:             {avg_qubits:.1f}")
        logger.info(f"   Valid Probability: [{bar:<50}] {avg_prob * 100:.1f}%")

        md_content += f"## Encoding: {encoding} / {mode} constraints ({len(enc_rows)} runs)\n"
        md_content += f"- **Mean Valid Probability**: {avg_prob:.4f}\n"
        md_content += f"- **Mean Gap to Optimum**: {gap_text}\n"
        md_content += f"- **Optimal Tours Found**: {optimal}\n"
        md_content += f"- **Runs Without Valid Tour**: {no_tour}\n"
        md_content += f"- **Mean Qubits**: {avg_qubits:.1f}\n"
        md_content += f"```text\nValid Probability: [{bar:<50}] {avg_prob * 100:.1f}%\n```\n\n"

    logger.info("=" * 60 + "\n")

    if md_path:
        with open(md_path, "w") as f:
            f.write(md_content)
    return md_content


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    asyncio.run(run_benchmark(load_sweep()))
