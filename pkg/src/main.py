"""Main entry point: python -m src.main <generate|encode|solve|tune|bench|stats> [options]."""

import argparse
import asyncio
import json
import logging
import sys
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError, field_validator

from src.benchmark import REPORT_FILE, RESULTS_FILE, SWEEP_FILE, ConstraintMode, load_sweep, run_benchmark
from src.core.errors import ContractError, InfeasibleConstraintError, ModelSizeError
from src.core.qubo import model_to_json, ising_to_json, resource_counts, to_ising
from src.graph import eliminate_subtours
from src.nodes.tuner import TuningMethod, tune_lambdas
from src.settings import get_settings
from src.state import Encoding
from src.tools.penalty_tools import PenaltyConfig, constraint_from_json, encode_constraint
from src.tools.report_tools import generate_markdown_report
from src.tools.sampler_tools import AnnealSchedule, Sampler, build_sampler, derive_seed
from src.tools.tsp_tools import (
    EdgeIndexer,
    Subtour,
    TspInstance,
    build_degree_relaxation,
    generate_instance,
    instance_from_json,
    instance_to_json,
    subtour_constraint,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def parse_cities(text: str) -> List[int]:
    """``6..15`` (inclusive range), ``6,8,10`` or a single count."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid city list {text!r}")
    if not values:
        raise argparse.ArgumentTypeError(f"empty city list {text!r}")
    return values


def parse_subtour(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid sub-tour {text!r}")


def parse_modes(text: str) -> List[str]:
    modes = [part.strip() for part in text.split(",") if part.strip()]
    if not modes or any(m not in ("reset", "cumulative") for m in modes):
        raise argparse.ArgumentTypeError(f"modes must be reset and/or cumulative, got {text!r}")
    return modes


class CliConfig(BaseModel):
    """Validated command-line settings; unset flags keep these defaults."""

    subcommand: Literal["generate", "encode", "solve", "tune", "bench", "stats"]
    cities: List[int] = Field(default_factory=lambda: [6])
    seed: int = 0
    encoding: Encoding = "unbalanced"
    lambda0: Optional[float] = None
    lambda1: Optional[float] = None
    lambda2: Optional[float] = None
    reads: int = Field(default=1000, ge=1)
    sweeps: int = Field(default=1000, ge=1)
    beta_min: float = Field(default=0.09, gt=0.0)
    beta_max: float = Field(default=9.6, gt=0.0)
    max_iterations: int = Field(default=10, ge=1)
    solver: Literal["sa", "exact"] = "sa"
    cumulative: bool = False
    modes: List[ConstraintMode] = Field(default_factory=lambda: ["reset"])
    workers: int = Field(default=1, ge=1)
    method: TuningMethod = "COBYLA"
    maxiter: int = Field(default=40, ge=1)
    ising: bool = False
    subtours: List[List[int]] = Field(default_factory=list)
    constraints: Optional[str] = None
    input: Optional[str] = None
    output: Optional[str] = None
    report: Optional[str] = None
    md_output: Optional[str] = None
    sweep_file: str = SWEEP_FILE

    @field_validator("cities")
    @classmethod
    def _at_least_three(cls, v: List[int]) -> List[int]:
        if min(v) < 3:
            raise ValueError(f"instances need at least 3 cities, got {v}")
        return v

    @property
    def n(self) -> int:
        return self.cities[0]

    def penalty_config(self) -> PenaltyConfig:
        """Encoding defaults, overridden by any lambda flag given."""
        values = PenaltyConfig.for_encoding(self.encoding).model_dump()
        for key in ("lambda0", "lambda1", "lambda2"):
            if getattr(self, key) is not None:
                values[key] = getattr(self, key)
        return PenaltyConfig(**values)

    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(beta_min=self.beta_min, beta_max=self.beta_max, num_sweeps=self.sweeps)

    def sampler(self, phase: str = "sampler") -> Sampler:
        settings = get_settings()
        return build_sampler(
            self.solver,
            self.reads,
            seed=derive_seed(self.seed, phase),
            schedule=self.schedule(),
            reads_per_stream=settings.reads_per_stream,
            workers=self.workers,
            exhaustive_cap=settings.exhaustive_cap,
        )


def build_parser() -> argparse.ArgumentParser:
    # Defaults stay None so that only flags actually given reach CliConfig.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cities", type=parse_cities, help="City count, list (6,8,10) or range (6..15)")
    common.add_argument("--seed", type=int, help="Master seed; instance and sampler seeds derive from it")
    common.add_argument("--encoding", choices=["relaxation", "slack", "unbalanced"])
    common.add_argument("--lambda0", type=float, help="Degree (equality) penalty weight")
    common.add_argument("--lambda1", type=float, help="Inequality penalty weight (linear term for unbalanced)")
    common.add_argument("--lambda2", type=float, help="Quadratic unbalanced penalty weight")
    common.add_argument("--reads", type=int, help="SA reads, or lowest states kept by the exact solver")
    common.add_argument("--sweeps", type=int, help="SA sweeps per read")
    common.add_argument("--beta-min", dest="beta_min", type=float)
    common.add_argument("--beta-max", dest="beta_max", type=float)
    common.add_argument("--max-iterations", dest="max_iterations", type=int)
    common.add_argument("--solver", choices=["sa", "exact"])
    common.add_argument("--cumulative", action="store_true", default=None, help="Keep constraints across iterations")
    common.add_argument("--workers", type=int, help="Parallel SA streams or sweep points")
    common.add_argument("--input", help="Instance JSON to read instead of generating one")
    common.add_argument("--output", help="Primary output path (stdout when omitted)")

    parser = argparse.ArgumentParser(description="QUBO models and sub-tour elimination for the TSP")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("generate", parents=[common], help="Write a random instance JSON")

    encode = sub.add_parser("encode", parents=[common], help="Write the QUBO (or Ising) model JSON")
    encode.add_argument("--constraints", help="JSON list of linear constraints to encode")
    encode.add_argument("--subtour", dest="subtours", action="append", type=parse_subtour, help="e.g. 0,1,2")
    encode.add_argument("--ising", action="store_true", default=None, help="Emit the Ising form")

    solve = sub.add_parser("solve", parents=[common], help="Run iterative sub-tour elimination")
    solve.add_argument("--report", help="RunReport JSON path (stdout when omitted)")
    solve.add_argument("--md-output", dest="md_output", help="Markdown report path")

    tune = sub.add_parser("tune", parents=[common], help="Tune the penalty weights")
    tune.add_argument("--subtour", dest="subtours", action="append", type=parse_subtour)
    tune.add_argument("--method", choices=["COBYLA", "Nelder-Mead"])
    tune.add_argument("--maxiter", type=int)

    bench = sub.add_parser("bench", parents=[common], help="Run a benchmark sweep to CSV")
    bench.add_argument("--sweep-file", dest="sweep_file", help=f"Sweep JSON (default {SWEEP_FILE})")
    bench.add_argument("--md-output", dest="md_output", help=f"Summary path (default {REPORT_FILE})")
    bench.add_argument("--modes", type=parse_modes, help="Constraint modes to compare, e.g. reset,cumulative")

    sub.add_parser("stats", parents=[common], help="Print qubit and connection counts per city count")
    return parser


def read_json(path: str) -> Any:
    with open(path, "r") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError:
            logger.error(f"❌ {path} is not valid JSON")
            raise


def emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as f:
            f.write(text + "\n")
        logger.info(f"💾 Wrote {path}")
    else:
        print(text)


def load_instance(cfg: CliConfig, n: Optional[int] = None) -> TspInstance:
    if cfg.input:
        data = read_json(cfg.input)
        try:
            return instance_from_json(data)
        except (KeyError, TypeError) as e:
            raise ContractError(f"{cfg.input}: malformed instance ({e})")
    return generate_instance(n or cfg.n, derive_seed(cfg.seed, "instance"))


def cmd_generate(cfg: CliConfig) -> int:
    inst = generate_instance(cfg.n, derive_seed(cfg.seed, "instance"))
    emit(json.dumps(instance_to_json(inst), indent=2), cfg.output)
    return EXIT_OK


def cmd_encode(cfg: CliConfig) -> int:
    inst = load_instance(cfg)
    lambdas = cfg.penalty_config()
    constraints = []
    if cfg.constraints:
        constraints.extend(constraint_from_json(item) for item in read_json(cfg.constraints))
    idx = EdgeIndexer(inst.num_cities)
    constraints.extend(subtour_constraint(Subtour(cities=tuple(q)), idx) for q in cfg.subtours)

    model = build_degree_relaxation(inst, lambdas.lambda0)
    for c in constraints:
        model = encode_constraint(model, c, cfg.encoding, lambdas)

    payload = ising_to_json(to_ising(model)) if cfg.ising else model_to_json(model)
    emit(json.dumps(payload, indent=2), cfg.output)
    counts = resource_counts(model)
    print(f"num_vars={counts.num_vars} qubits={counts.qubits} connections={counts.connections}")
    return EXIT_OK


def cmd_solve(cfg: CliConfig) -> int:
    inst = load_instance(cfg)
    state, report = eliminate_subtours(
        inst,
        cfg.encoding,
        cfg.penalty_config(),
        cfg.sampler(),
        max_iterations=cfg.max_iterations,
        cumulative=cfg.cumulative,
    )
    if cfg.output and state.current_samples is not None:
        emit(state.current_samples.dumps(), cfg.output)
    emit(report.model_dump_json(indent=2), cfg.report)
    if cfg.md_output:
        emit(generate_markdown_report(report, state), cfg.md_output)

    if not report.found_valid:
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_tune(cfg: CliConfig) -> int:
    inst = load_instance(cfg)
    encoding = "unbalanced" if cfg.encoding == "relaxation" else cfg.encoding
    if cfg.subtours:
        fixed = [Subtour(cities=tuple(q)) for q in cfg.subtours]
    else:
        discovery, _ = eliminate_subtours(
            inst,
            encoding,
            PenaltyConfig.for_encoding(encoding),
            cfg.sampler(),
            max_iterations=cfg.max_iterations,
            cumulative=cfg.cumulative,
        )
        fixed = discovery.subtour_constraints
        logger.info(f"Tuning against {len(fixed)} discovered sub-tour constraints")

    explicit = {k for k in ("lambda0", "lambda1", "lambda2") if getattr(cfg, k) is not None}
    initial = cfg.penalty_config() if explicit else None
    best = tune_lambdas(
        inst, fixed, cfg.sampler("tuner"), initial, encoding=encoding, method=cfg.method, maxiter=cfg.maxiter
    )
    emit(best.model_dump_json(indent=2), cfg.output)
    return EXIT_OK


def cmd_bench(cfg: CliConfig) -> int:
    given = cfg.model_fields_set
    overrides: Dict[str, Any] = {
        key: getattr(cfg, key)
        for key in ("cities", "reads", "sweeps", "beta_min", "beta_max", "max_iterations", "solver", "modes", "workers")
        if key in given
    }
    if "cumulative" in given and "modes" not in given:
        overrides["modes"] = ["cumulative"] if cfg.cumulative else ["reset"]
    if "encoding" in given:
        overrides["encodings"] = [cfg.encoding]
    if "seed" in given:
        overrides["seeds"] = [cfg.seed]
    sweep = load_sweep(cfg.sweep_file, **overrides)
    asyncio.run(run_benchmark(sweep, cfg.output or RESULTS_FILE, cfg.md_output or REPORT_FILE))
    return EXIT_OK


def cmd_stats(cfg: CliConfig) -> int:
    qubits: List[int] = []
    connections: List[int] = []
    for n in cfg.cities:
        inst = generate_instance(n, derive_seed(cfg.seed, "instance"))
        if cfg.encoding == "relaxation":
            counts = resource_counts(build_degree_relaxation(inst, cfg.penalty_config().lambda0))
            qubits.append(counts.qubits)
            connections.append(counts.connections)
        else:
            _, report = eliminate_subtours(
                inst,
                cfg.encoding,
                cfg.penalty_config(),
                cfg.sampler(),
                max_iterations=cfg.max_iterations,
                cumulative=cfg.cumulative,
            )
            qubits.append(report.qubits)
            connections.append(report.connections)

    lines = [
        "cities | " + " | ".join(str(n) for n in cfg.cities),
        "qubits | " + " | ".join(str(q) for q in qubits),
        "connections | " + " | ".join(str(c) for c in connections),
    ]
    emit("\n".join(lines), cfg.output)
    return EXIT_OK


HANDLERS: Dict[str, Callable[[CliConfig], int]] = {
    "generate": cmd_generate,
    "encode": cmd_encode,
    "solve": cmd_solve,
    "tune": cmd_tune,
    "bench": cmd_bench,
    "stats": cmd_stats,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run one subcommand and return its exit status."""
    logging.basicConfig(
        level=get_settings().log_level,
        format='%(asctime)s - %(levelname)s - %(message)s',
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        cfg = CliConfig(**{k: v for k, v in vars(args).items() if v is not None})
        return HANDLERS[cfg.subcommand](cfg)
    except (ValidationError, ContractError) as e:
        logger.error(f"❌ Invalid arguments: {e}")
        return EXIT_USAGE
    except (InfeasibleConstraintError, ModelSizeError) as e:
        logger.error(f"❌ {e}")
        return EXIT_INFEASIBLE
    except (OSError, json.JSONDecodeError) as e:
        logger.error(f"❌ I/O error: {e}")
        return EXIT_IO


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
