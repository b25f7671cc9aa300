"""Penalty-weight tuning by derivative-free minimisation of the feasible mean energy."""

import logging
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import minimize

from src.core.errors import ContractError
from src.core.qubo import BinaryQuadraticModel
from src.core.samples import Bits, SampleSet
from src.nodes.elimination import build_iteration_model
from src.state import Encoding
from src.tools.penalty_tools import PenaltyConfig
from src.tools.sampler_tools import Sampler
from src.tools.tsp_tools import EdgeIndexer, Subtour, TspInstance, analyze, subtour_is_satisfied

logger = logging.getLogger(__name__)

TuningMethod = Literal["COBYLA", "Nelder-Mead"]


class TuningResult(BaseModel):
    best: PenaltyConfig
    best_objective: float
    initial_objective: float
    evaluations: int = Field(ge=1)
    history: List[Tuple[List[float], float]] = Field(default_factory=list)


def feasible_mean_energy(
    samples: SampleSet, is_feasible: Callable[[Bits], bool], prefix_width: Optional[int] = None
) -> float:
    """Multiplicity-weighted mean energy of the feasible samples.

    Feasibility is judged on the first ``prefix_width`` bits (all bits by
    default). With no feasible sample the result is one above the highest
    sampled energy.
    """
    if not samples:
        raise ContractError("cannot score an empty sample set")
    weight = 0
    total = 0.0
    width = samples.num_vars if prefix_width is None else prefix_width
    for group in samples.group_by_prefix(width):
        if is_feasible(group.bits):
            weight += group.count
            total += group.energy_sum
    if weight == 0:
        logger.warning("⚠️ No feasible sample for these weights; scoring with the sentinel energy")
        return float(samples.energies.max()) + 1.0
    return total / weight


def tour_feasibility(inst: TspInstance, constraints: Sequence[Subtour]) -> Callable[[Bits], bool]:
    """Degree-feasible and every given sub-tour constraint satisfied."""
    idx = EdgeIndexer(inst.num_cities)
    cache: Dict[Bits, bool] = {}

    def check(bits: Bits) -> bool:
        edge_bits = bits[: idx.num_edges]
        if edge_bits not in cache:
            ok = analyze(edge_bits, inst, idx).degree_feasible and all(
                subtour_is_satisfied(q, edge_bits, idx) for q in constraints
            )
            cache[edge_bits] = ok
        return cache[edge_bits]

    return check


class PenaltyTuner:
    """Minimises the feasible mean energy of ``build_model(lambdas)`` over (lambda0, lambda1[, lambda2]).

    With ``dims`` = 2 lambda2 is held at zero. The sampler is reused as-is for
    every evaluation, so a seeded sampler makes the objective deterministic.
    """

    def __init__(
        self,
        build_model: Callable[[PenaltyConfig], BinaryQuadraticModel],
        is_feasible: Callable[[Bits], bool],
        sampler: Sampler,
        dims: int = 3,
        method: TuningMethod = "COBYLA",
        maxiter: int = 40,
        prefix_width: Optional[int] = None,
        label: str = "penalty",
    ):
        if dims not in (2, 3):
            raise ContractError(f"tuning runs over 2 or 3 weights, got {dims}")
        self.build_model = build_model
        self.sampler = sampler
        self.method = method
        self.maxiter = maxiter
        self.dims = dims
        self.label = label
        self._feasible = is_feasible
        self._prefix_width = prefix_width
        self._memo: Dict[Tuple[float, ...], float] = {}
        self.history: List[Tuple[List[float], float]] = []

    def _config(self, vec: Sequence[float]) -> PenaltyConfig:
        v = [max(0.0, float(x)) for x in vec]
        if self.dims == 2:
            return PenaltyConfig(lambda0=v[0], lambda1=v[1], lambda2=0.0)
        return PenaltyConfig(lambda0=v[0], lambda1=v[1], lambda2=v[2])

    def objective(self, vec: Sequence[float]) -> float:
        cfg = self._config(vec)
        key = tuple(cfg.as_vector())
        if key not in self._memo:
            model = self.build_model(cfg)
            value = feasible_mean_energy(self.sampler.sample(model), self._feasible, self._prefix_width)
            self._memo[key] = value
            self.history.append((list(key), value))
            logger.debug(f"lambdas {key} -> {value:.6f}")
        return self._memo[key]

    def __call__(self, initial: PenaltyConfig) -> TuningResult:
        x0 = np.array(initial.as_vector()[: self.dims])
        initial_value = self.objective(x0)
        logger.info(f"🎛️  Tuning {self.label} weights with {self.method}, start {initial_value:.6f}")

        if self.method == "COBYLA":
            constraints = [{"type": "ineq", "fun": (lambda x, k=k: x[k])} for k in range(self.dims)]
            minimize(
                self.objective,
                x0,
                method="COBYLA",
                constraints=constraints,
                options={"maxiter": self.maxiter, "rhobeg": 0.1},
            )
        elif self.method == "Nelder-Mead":
            minimize(
                self.objective,
                x0,
                method="Nelder-Mead",
                options={"maxiter": self.maxiter, "xatol": 1e-3, "fatol": 1e-6},
            )
        else:
            raise ContractError(f"unknown tuning method {self.method!r}")

        best_vec, best_value = min(self.history, key=lambda item: item[1])
        best = self._config(best_vec)
        logger.info(f"🎛️  Best weights {best.as_vector()} -> {best_value:.6f} ({len(self.history)} evaluations)")
        return TuningResult(
            best=best,
            best_objective=best_value,
            initial_objective=initial_value,
            evaluations=len(self.history),
            history=list(self.history),
        )


class LambdaTuner(PenaltyTuner):
    """Tunes the weights of one elimination iteration with a fixed constraint set.

    The slack encoding has no lambda2 and is tuned over two weights; a sample
    counts as feasible when its edge bits form a degree-feasible state that
    satisfies every constraint.
    """

    def __init__(
        self,
        inst: TspInstance,
        fixed_constraints: Sequence[Subtour],
        sampler: Sampler,
        encoding: Encoding = "unbalanced",
        method: TuningMethod = "COBYLA",
        maxiter: int = 40,
    ):
        if encoding == "relaxation":
            raise ContractError("the relaxation encoding has no inequality weights to tune")
        self.inst = inst
        self.constraints = list(fixed_constraints)
        self.encoding = encoding
        super().__init__(
            lambda cfg: build_iteration_model(inst, self.constraints, encoding, cfg),
            tour_feasibility(inst, self.constraints),
            sampler,
            dims=2 if encoding == "slack" else 3,
            method=method,
            maxiter=maxiter,
            prefix_width=EdgeIndexer(inst.num_cities).num_edges,
            label=encoding,
        )

def tune_lambdas(
    inst: TspInstance,
    fixed_constraints: Sequence[Subtour],
    sampler: Sampler,
    initial: Optional[PenaltyConfig] = None,
    encoding: Encoding = "unbalanced",
    method: TuningMethod = "COBYLA",
    maxiter: int = 40,
) -> PenaltyConfig:
    """Best weights seen; never worse than ``initial`` on the same sampler."""
    initial = initial or PenaltyConfig(lambda0=1.0, lambda1=1.0, lambda2=0.1)
    tuner = LambdaTuner(inst, fixed_constraints, sampler, encoding, method, maxiter)
    return tuner(initial).best
