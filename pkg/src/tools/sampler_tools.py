"""Local samplers: simulated annealing and exhaustive enumeration."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Literal, Optional, Protocol, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.errors import ContractError, DimensionError, VariableIndexError
from src.core.qubo import DEFAULT_EXHAUSTIVE_CAP, BinaryQuadraticModel, energies, energy_spectrum
from src.core.samples import SampleSet

logger = logging.getLogger(__name__)


class AnnealSchedule(BaseModel):
    """Inverse-temperature ramp; defaults match the reference SA sampler."""

    model_config = ConfigDict(frozen=True)

    beta_min: float = Field(default=0.09, gt=0.0)
    beta_max: float = Field(default=9.6, gt=0.0)
    num_sweeps: int = Field(default=1000, ge=1)
    schedule_kind: Literal["geometric", "linear"] = "geometric"

    @model_validator(mode="after")
    def _ordered(self) -> "AnnealSchedule":
        if not self.beta_min < self.beta_max:
            raise ValueError(f"beta_min ({self.beta_min}) must be below beta_max ({self.beta_max})")
        return self


class SamplerConfig(BaseModel):
    """Simulated annealing run settings.

    Reads are split into streams of ``reads_per_stream``; stream b draws from
    ``SeedSequence(seed).spawn(num_streams)[b]``, so results are identical for
    any number of ``workers``.
    """

    model_config = ConfigDict(frozen=True)

    num_reads: int = Field(default=5000, ge=1)
    seed: Optional[int] = None
    schedule: AnnealSchedule = Field(default_factory=AnnealSchedule)
    reads_per_stream: int = Field(default=5000, ge=1)
    workers: int = Field(default=1, ge=1)


SEED_PHASES = {"instance": 0, "sampler": 1, "tuner": 2}


def derive_seed(seed: int, phase: str) -> int:
    """Independent 32-bit seed for one phase of a run from the run's master seed."""
    if phase not in SEED_PHASES:
        raise ContractError(f"unknown seed phase {phase!r}")
    return int(np.random.SeedSequence([seed, SEED_PHASES[phase]]).generate_state(1)[0])


class Sampler(Protocol):
    name: str

    def sample(self, model: BinaryQuadraticModel) -> SampleSet: ...


def schedule_betas(schedule: AnnealSchedule) -> np.ndarray:
    """One beta per sweep; a single sweep runs at beta_max."""
    s = schedule.num_sweeps
    if s == 1:
        return np.array([schedule.beta_max])
    if schedule.schedule_kind == "linear":
        betas = np.linspace(schedule.beta_min, schedule.beta_max, s)
    else:
        k = np.arange(s) / (s - 1)
        betas = schedule.beta_min * (schedule.beta_max / schedule.beta_min) ** k
    betas[0], betas[-1] = schedule.beta_min, schedule.beta_max
    return betas


def incidence_energy_delta(model: BinaryQuadraticModel, bits: Sequence[int], flip_index: int) -> float:
    """evaluate(flip(bits, i)) - evaluate(bits) from the variable's incident terms only."""
    if not 0 <= flip_index < model.num_vars:
        raise VariableIndexError(f"flip index {flip_index} outside [0, {model.num_vars})")
    if len(bits) != model.num_vars:
        raise DimensionError(f"expected {model.num_vars} bits, got {len(bits)}")
    local = model.linear.get(flip_index, 0.0)
    for j, v in model.neighbors(flip_index).items():
        if bits[j]:
            local += v
    return -local if bits[flip_index] else local


Neighbors = List[Tuple[np.ndarray, np.ndarray]]


def neighbor_arrays(model: BinaryQuadraticModel) -> Neighbors:
    """Per variable, the neighbour indices and their pair coefficients."""
    arrays = []
    for i in range(model.num_vars):
        nbrs = model.neighbors(i)
        arrays.append((
            np.fromiter(nbrs.keys(), dtype=np.int64, count=len(nbrs)),
            np.fromiter(nbrs.values(), dtype=np.float64, count=len(nbrs)),
        ))
    return arrays


def batch_energy_delta(lin: np.ndarray, neighbors: Neighbors, X: np.ndarray, flip_index: int) -> np.ndarray:
    """``incidence_energy_delta`` for one variable across every read.

    ``X`` is variables x reads.
    """
    idx, w = neighbors[flip_index]
    return (1.0 - 2.0 * X[flip_index]) * (lin[flip_index] + w @ X[idx])


def _anneal_stream(
    lin: np.ndarray,
    neighbors: Neighbors,
    betas: np.ndarray,
    num_reads: int,
    rng: np.random.Generator,
) -> np.ndarray:
    n = lin.size
    # variables x reads, so each variable's row is contiguous
    X = rng.integers(0, 2, size=(num_reads, n)).T.astype(np.float64, order="C")
    for beta in betas:
        order = rng.permutation(n)
        draws = rng.random((n, num_reads))
        for pos, i in enumerate(order):
            delta = batch_energy_delta(lin, neighbors, X, i)
            accept = draws[pos] < np.exp(-beta * np.maximum(delta, 0.0))
            X[i, accept] = 1.0 - X[i, accept]
    return X.T.astype(np.int8)


def sample_sa(model: BinaryQuadraticModel, cfg: SamplerConfig) -> SampleSet:
    """Single-flip Metropolis annealing from uniform random starts, one sweep per beta."""
    if model.num_vars < 1:
        raise ContractError("cannot anneal a model with no variables")
    lin, _ = model.dense_arrays()
    neighbors = neighbor_arrays(model)
    betas = schedule_betas(cfg.schedule)

    sizes: List[int] = []
    remaining = cfg.num_reads
    while remaining > 0:
        sizes.append(min(cfg.reads_per_stream, remaining))
        remaining -= sizes[-1]
    streams = np.random.SeedSequence(cfg.seed).spawn(len(sizes))

    def run(b: int) -> np.ndarray:
        return _anneal_stream(lin, neighbors, betas, sizes[b], np.random.default_rng(streams[b]))

    if cfg.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            blocks = list(pool.map(run, range(len(sizes))))
    else:
        blocks = [run(b) for b in range(len(sizes))]

    states = np.concatenate(blocks, axis=0)
    unique, counts = np.unique(states, axis=0, return_counts=True)
    values = energies(model, unique)
    logger.debug(
        f"SA: {cfg.num_reads} reads x {betas.size} sweeps on {model.num_vars} vars, "
        f"{unique.shape[0]} distinct states, best {values.min():.6f}"
    )
    return SampleSet.from_arrays(unique, values, counts, source="sa")


def sample_exhaustive(
    model: BinaryQuadraticModel, top_k: Optional[int] = None, cap: int = DEFAULT_EXHAUSTIVE_CAP
) -> SampleSet:
    """The ``top_k`` lowest-energy assignments (all of them when None), exact."""
    spectrum = energy_spectrum(model, cap)
    return SampleSet.from_spectrum(spectrum, model.num_vars, source="exact", top_k=top_k)


class SimulatedAnnealingSampler:
    """Sampler handle around ``sample_sa``."""

    name = "sa"

    def __init__(self, config: Optional[SamplerConfig] = None):
        self.config = config or SamplerConfig()

    def sample(self, model: BinaryQuadraticModel) -> SampleSet:
        return sample_sa(model, self.config)


class ExhaustiveSampler:
    """Sampler handle around ``sample_exhaustive``."""

    name = "exact"

    def __init__(self, top_k: Optional[int] = None, cap: int = DEFAULT_EXHAUSTIVE_CAP):
        self.top_k = top_k
        self.cap = cap

    def sample(self, model: BinaryQuadraticModel) -> SampleSet:
        return sample_exhaustive(model, self.top_k, self.cap)


def build_sampler(
    solver: Literal["sa", "exact"],
    num_reads: int,
    seed: Optional[int] = None,
    schedule: Optional[AnnealSchedule] = None,
    reads_per_stream: int = 5000,
    workers: int = 1,
    exhaustive_cap: int = DEFAULT_EXHAUSTIVE_CAP,
) -> Sampler:
    """Sampler for a CLI or sweep setting; ``exact`` keeps the ``num_reads`` lowest states."""
    if solver == "exact":
        return ExhaustiveSampler(top_k=num_reads, cap=exhaustive_cap)
    if solver == "sa":
        return SimulatedAnnealingSampler(
            SamplerConfig(
                num_reads=num_reads,
                seed=seed,
                schedule=schedule or AnnealSchedule(),
                reads_per_stream=reads_per_stream,
                workers=workers,
            )
        )
    raise ContractError(f"unknown solver {solver!r}")
