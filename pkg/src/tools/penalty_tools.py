"""Constraint-to-penalty compilers: equality square, slack variables, unbalanced penalization."""

import logging
from typing import Any, Dict, List, Literal, Mapping, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.errors import ContractError, InfeasibleConstraintError
from src.core.qubo import BinaryQuadraticModel, QuboBuilder

logger = logging.getLogger(__name__)

Sense = Literal["eq", "le"]
Encoding = Literal["relaxation", "slack", "unbalanced"]


class LinearConstraint(BaseModel):
    """``sum_i terms[i] x_i (== | <=) rhs`` with integer coefficients."""

    model_config = ConfigDict(frozen=True)

    terms: Dict[int, int]
    sense: Sense
    rhs: int

    @field_validator("terms")
    @classmethod
    def _nonempty(cls, v: Dict[int, int]) -> Dict[int, int]:
        if not v:
            raise ValueError("constraint needs at least one term")
        return v

    @classmethod
    def equal(cls, terms: Mapping[int, int], rhs: int) -> "LinearConstraint":
        return cls(terms=dict(terms), sense="eq", rhs=rhs)

    @classmethod
    def less_equal(cls, terms: Mapping[int, int], rhs: int) -> "LinearConstraint":
        return cls(terms=dict(terms), sense="le", rhs=rhs)

    @classmethod
    def greater_equal(cls, terms: Mapping[int, int], rhs: int) -> "LinearConstraint":
        """Normalise ``sum w x >= W`` to ``sum -w x <= -W``."""
        return cls(terms={i: -w for i, w in terms.items()}, sense="le", rhs=-rhs)


class PenaltyConfig(BaseModel):
    """Penalty weights: lambda0 for equalities, lambda1/lambda2 for inequalities."""

    model_config = ConfigDict(frozen=True)

    lambda0: float = Field(default=0.88, ge=0.0, allow_inf_nan=False)
    lambda1: float = Field(default=0.46, ge=0.0, allow_inf_nan=False)
    lambda2: float = Field(default=0.54, ge=0.0, allow_inf_nan=False)

    @classmethod
    def for_encoding(cls, encoding: Encoding) -> "PenaltyConfig":
        """Tuned defaults; the slack encoding reuses lambda0 for its inequality weight."""
        if encoding == "slack":
            return cls(lambda0=0.88, lambda1=0.88, lambda2=0.0)
        return cls()

    def as_vector(self) -> List[float]:
        return [self.lambda0, self.lambda1, self.lambda2]


class SlackExpansion(BaseModel):
    """Binary slack register appended for one inequality."""

    model_config = ConfigDict(frozen=True)

    constraint: LinearConstraint
    slack_var_indices: List[int] = Field(default_factory=list)
    num_bits: int = Field(ge=0)

    def slack_value(self, bits: Sequence[int]) -> int:
        return sum(bits[idx] << k for k, idx in enumerate(self.slack_var_indices))

    def decode(self, bits: Sequence[int]) -> Tuple[int, ...]:
        """Problem assignment with this register's slack bits removed."""
        drop = set(self.slack_var_indices)
        return tuple(b for i, b in enumerate(bits) if i not in drop)


def _require_sense(c: LinearConstraint, sense: Sense) -> None:
    if c.sense != sense:
        raise ContractError(f"expected a '{sense}' constraint, got '{c.sense}'")


def constraint_residual(c: LinearConstraint, bits: Sequence[int]) -> int:
    """h(x) = rhs - sum_i w_i x_i."""
    return c.rhs - sum(w * bits[i] for i, w in c.terms.items())


def is_satisfied(c: LinearConstraint, bits: Sequence[int]) -> bool:
    h = constraint_residual(c, bits)
    return h == 0 if c.sense == "eq" else h >= 0


def encode_equality(model: BinaryQuadraticModel, c: LinearConstraint, lambda0: float) -> BinaryQuadraticModel:
    """Add ``lambda0 * (sum c_i x_i - C)**2``."""
    _require_sense(c, "eq")
    builder = QuboBuilder.from_model(model)
    builder.add_squared_form(c.terms, -c.rhs, lambda0)
    return builder.build()


def max_slack_bound(c: LinearConstraint) -> int:
    """max over x of W - sum w_i x_i; only negative weights can raise it above W."""
    _require_sense(c, "le")
    bound = c.rhs - sum(w for w in c.terms.values() if w < 0)
    if bound < 0:
        raise InfeasibleConstraintError(
            f"constraint {c.terms} <= {c.rhs} is violated by every assignment (max slack {bound})"
        )
    return bound


def encode_inequality_slack(
    model: BinaryQuadraticModel, c: LinearConstraint, lambda1: float
) -> Tuple[BinaryQuadraticModel, SlackExpansion]:
    """Add ``lambda1 * (W - sum w_i x_i - sum_k 2**k s_k)**2`` over fresh slack bits."""
    bound = max_slack_bound(c)
    builder = QuboBuilder.from_model(model)
    # floor(log2(bound)) + 1 for bound >= 1; a zero bound needs no register
    num_bits = bound.bit_length()
    slack = builder.add_variables(num_bits)
    terms: Dict[int, float] = {i: -float(w) for i, w in c.terms.items()}
    for k, idx in enumerate(slack):
        terms[idx] = -float(1 << k)
    builder.add_squared_form(terms, float(c.rhs), lambda1)
    expansion = SlackExpansion(constraint=c, slack_var_indices=slack, num_bits=num_bits)
    logger.debug(f"slack register: bound {bound}, {num_bits} bits at indices {slack}")
    return builder.build(), expansion


def encode_inequality_unbalanced(
    model: BinaryQuadraticModel, c: LinearConstraint, lambda1: float, lambda2: float
) -> BinaryQuadraticModel:
    """Add ``xi = -lambda1 * h + lambda2 * h**2`` with h = W - sum w_i x_i; no new variables."""
    _require_sense(c, "le")
    builder = QuboBuilder.from_model(model)
    builder.add_offset(-lambda1 * c.rhs)
    for i, w in c.terms.items():
        builder.add_linear(i, lambda1 * w)
    builder.add_squared_form({i: -float(w) for i, w in c.terms.items()}, float(c.rhs), lambda2)
    return builder.build()


def encode_constraint(
    model: BinaryQuadraticModel,
    c: LinearConstraint,
    encoding: Encoding,
    lambdas: PenaltyConfig,
) -> BinaryQuadraticModel:
    """Compile one constraint; equalities always use lambda0."""
    if c.sense == "eq":
        return encode_equality(model, c, lambdas.lambda0)
    if encoding == "slack":
        encoded, _ = encode_inequality_slack(model, c, lambdas.lambda1)
        return encoded
    if encoding == "unbalanced":
        return encode_inequality_unbalanced(model, c, lambdas.lambda1, lambdas.lambda2)
    raise ContractError(f"encoding '{encoding}' cannot compile inequality constraints")


def unbalanced_penalty(h: float, lambda1: float, lambda2: float) -> float:
    return -lambda1 * h + lambda2 * h * h


def penalty_curve(
    c: LinearConstraint, lambda1: float, lambda2: float, h_values: Optional[Sequence[float]] = None
) -> List[Tuple[float, float]]:
    """Tabulate xi(h) for plotting, by default over h in [-2|W|, 2|W|]."""
    if h_values is None:
        span = 2 * max(1, abs(c.rhs))
        h_values = range(-span, span + 1)
    return [(h, unbalanced_penalty(h, lambda1, lambda2)) for h in h_values]


def penalty_markers(rhs: int) -> List[float]:
    """Annotated points of the penalty curve: -W, -W/2, 0, W/2, W."""
    return [-float(rhs), -rhs / 2.0, 0.0, rhs / 2.0, float(rhs)]


def constraint_to_json(c: LinearConstraint) -> Dict[str, Any]:
    return {"terms": [[i, w] for i, w in sorted(c.terms.items())], "sense": c.sense, "rhs": c.rhs}


def constraint_from_json(data: Mapping[str, Any]) -> LinearConstraint:
    terms = {int(i): int(w) for i, w in data["terms"]}
    sense = data["sense"]
    if sense == "ge":
        return LinearConstraint.greater_equal(terms, int(data["rhs"]))
    if sense not in ("eq", "le"):
        raise ContractError(f"unknown constraint sense {sense!r}")
    return LinearConstraint(terms=terms, sense=sense, rhs=int(data["rhs"]))
