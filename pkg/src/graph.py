"""LangGraph state graph for iterative sub-tour elimination."""

import logging
import time
from typing import Optional, Tuple

from langgraph.graph import END, START, StateGraph

from src.nodes.elimination import ClassifierNode, ConstraintUpdateNode, ModelBuilderNode, SamplerNode
from src.settings import get_settings
from src.state import EliminationState, Encoding, RunReport
from src.tools.penalty_tools import PenaltyConfig
from src.tools.report_tools import compute_report
from src.tools.sampler_tools import Sampler
from src.tools.tsp_tools import TspInstance

logger = logging.getLogger(__name__)


def create_elimination_graph(sampler: Sampler):
    """
    Create the elimination loop.

    Graph structure:
    START
      ↓
    build_model  <─────────┐
      ↓                    │
    sample                 │
      ↓                    │
    classify               │
      ↓                    │
    update_constraints ────┘ (while new constraints appear)
      ↓
    END
    """
    builder = StateGraph(EliminationState)

    builder.add_node("build_model", ModelBuilderNode())
    builder.add_node("sample", SamplerNode(sampler))
    builder.add_node("classify", ClassifierNode())
    builder.add_node("update_constraints", ConstraintUpdateNode())

    builder.add_edge(START, "build_model")
    builder.add_edge("build_model", "sample")
    builder.add_edge("sample", "classify")
    builder.add_edge("classify", "update_constraints")

    def should_continue(state: EliminationState):
        """Loop until the constraint set stops growing or the iteration budget is spent."""
        if state.encoding == "relaxation":
            return END
        if state.iteration >= state.max_iterations:
            return END
        if state.new_constraints == 0:
            return END
        return "build_model"

    builder.add_conditional_edges("update_constraints", should_continue, ["build_model", END])

    return builder.compile()


def eliminate_subtours(
    inst: TspInstance,
    encoding: Encoding,
    lambdas: Optional[PenaltyConfig],
    sampler: Sampler,
    max_iterations: int = 10,
    cumulative: bool = False,
) -> Tuple[EliminationState, RunReport]:
    """Run the elimination loop and summarise it."""
    lambdas = lambdas or PenaltyConfig.for_encoding(encoding)
    initial = EliminationState(
        instance=inst,
        encoding=encoding,
        lambdas=lambdas,
        max_iterations=max_iterations,
        cumulative=cumulative,
    )
    graph = create_elimination_graph(sampler)

    start = time.perf_counter()
    result = graph.invoke(initial, config={"recursion_limit": 4 * max_iterations + 10})
    elapsed_ms = (time.perf_counter() - start) * 1000.0

    final = EliminationState(**result)
    report = compute_report(final, get_settings().held_karp_cap, wall_time_ms=elapsed_ms)
    if not report.found_valid:
        logger.warning(f"⚠️ No valid tour after {report.iterations_used} iterations")
    logger.info(
        f"✅ {encoding} on {inst.num_cities} cities: P(valid)={report.valid_probability:.4f}, "
        f"best={report.min_distance:.6f}, {report.iterations_used} iterations"
    )
    return final, report
