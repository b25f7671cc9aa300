import logging
import math
from typing import Optional

import numpy as np

from src.state import EliminationState, RunReport
from src.tools.penalty_tools import penalty_curve, penalty_markers
from src.tools.tsp_tools import DEFAULT_HELD_KARP_CAP, EdgeIndexer, held_karp, subtour_constraint
from src.core.qubo import resource_counts

logger = logging.getLogger(__name__)


def compute_report(
    state: EliminationState,
    held_karp_cap: int = DEFAULT_HELD_KARP_CAP,
    wall_time_ms: Optional[float] = None,
) -> RunReport:
    """Summarise a finished elimination run.

    Probabilities count every read of every iteration; distance statistics are
    weighted by multiplicity with a population standard deviation.
    """
    total = state.get_total_count()
    valid = state.get_valid_count()
    probability = valid / total if total else 0.0

    mean = std = None
    if state.solutions:
        distances = np.array([rec.distance for rec in state.solutions])
        weights = np.array([rec.multiplicity for rec in state.solutions], dtype=np.float64)
        mean = float(np.average(distances, weights=weights))
        std = float(math.sqrt(np.average((distances - mean) ** 2, weights=weights)))

    optimum = None
    if state.instance.num_cities <= held_karp_cap:
        _, optimum = held_karp(state.instance, held_karp_cap)

    counts = resource_counts(state.current_model) if state.current_model is not None else None
    return RunReport(
        encoding=state.encoding,
        n=state.instance.num_cities,
        valid_probability=probability,
        mean_distance=mean,
        std_distance=std,
        min_distance=state.min_distance,
        optimum_reference=optimum,
        num_vars=counts.num_vars if counts else 0,
        qubits=counts.qubits if counts else 0,
        connections=counts.connections if counts else 0,
        num_constraints=len(state.subtour_constraints),
        iterations_used=state.iteration,
        wall_time_ms=wall_time_ms,
    )


def _fmt(value: Optional[float]) -> str:
    if value is None or not math.isfinite(value):
        return "n/a"
    return f"{value:.6f}"


def generate_markdown_report(report: RunReport, state: Optional[EliminationState] = None) -> str:
    """Generate a cleanly formatted markdown report from a RunReport (and optionally its state)."""
    md = [
        f"# Sub-tour Elimination Report",
        f"**Encoding:** {report.encoding}",
        f"**Cities:** {report.n}",
        f"\n## Summary",
        f"- **Valid tour probability:** {report.valid_probability:.6f}",
        f"- **Best tour length:** {_fmt(report.min_distance)}",
        f"- **Mean / std of valid tours:** {_fmt(report.mean_distance)} / {_fmt(report.std_distance)}",
        f"- **Exact optimum:** {_fmt(report.optimum_reference)}",
        f"- **Iterations used:** {report.iterations_used}",
        f"- **Final model:** {report.num_vars} vars, {report.qubits} qubits, {report.connections} connections",
    ]
    if report.optimum_reference is not None and report.found_valid:
        gap = report.min_distance - report.optimum_reference
        if gap <= 1e-9 * max(1.0, report.optimum_reference):
            md.append(f"\n> [!NOTE] The best sampled tour is optimal.")
        else:
            md.append(f"\n> [!WARNING] Best sampled tour is {gap:.6f} above the optimum.")
    elif not report.found_valid:
        md.append(f"\n> [!CAUTION] No valid tour was sampled.")

    if state is not None:
        md.append(f"\n## Iterations\n")
        md.append("| iteration | constraints | vars | connections | valid | sub-tour | infeasible | best |")
        md.append("|---|---|---|---|---|---|---|---|")
        for s in state.iteration_stats:
            md.append(
                f"| {s.iteration} | {s.num_constraints} | {s.num_vars} | {s.connections} | "
                f"{s.valid_count} | {s.relaxation_count} | {s.infeasible_count} | {_fmt(s.min_distance)} |"
            )
        if state.subtour_constraints:
            md.append(f"\n**Sub-tour constraints:**")
            for q in state.subtour_constraints:
                md.append(f"- {list(q.cities)}")
        if state.encoding == "unbalanced" and state.subtour_constraints:
            smallest = subtour_constraint(state.subtour_constraints[0], EdgeIndexer(state.instance.num_cities))
            md.append(f"\n**Unbalanced penalty of the smallest constraint (W = {smallest.rhs}):**\n")
            md.append("| h | penalty |")
            md.append("|---|---|")
            markers = penalty_markers(smallest.rhs)
            for h, xi in penalty_curve(smallest, state.lambdas.lambda1, state.lambdas.lambda2, markers):
                md.append(f"| {h:g} | {xi:.4f} |")
        best = state.best_solution()
        if best is not None:
            md.append(f"\n**Best tour:** {best.tour}")
        if state.reasoning_trace:
            md.append(f"\n**Reasoning Trace:**")
            for step in state.reasoning_trace:
                md.append(f"- {step}")

    return "\n".join(md)
