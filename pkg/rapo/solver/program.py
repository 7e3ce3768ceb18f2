"""
Sparse linear programs in the form

    minimise    c·v + offset
    subject to  row_lower <= A v <= row_upper
                col_lower <=   v <= col_upper

together with the options and the result record of a solve.
"""

import enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import sparse

from rapo.config import settings


class SolverError(Exception):
    """Raised when a linear program is malformed or a backend fails."""
    pass


class SolveStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class SolverBackend(str, enum.Enum):
    AUTO = "auto"
    SIMPLEX = "simplex"
    HIGHS = "highs"


class LinearProgram(BaseModel):
    name: str = "rapo"
    objective: np.ndarray
    offset: float = 0.0
    """Constant added to the objective."""
    matrix: sparse.csr_matrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    col_lower: np.ndarray
    col_upper: np.ndarray
    row_names: tuple[str, ...]
    col_names: tuple[str, ...]

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_dimensions(self) -> "LinearProgram":
        m, n = self.matrix.shape
        if self.objective.shape != (n,):
            raise SolverError(f"objective has shape {self.objective.shape}, expected ({n},)")
        for name in ("col_lower", "col_upper"):
            if getattr(self, name).shape != (n,):
                raise SolverError(f"{name} has to be of length {n}")
        for name in ("row_lower", "row_upper"):
            if getattr(self, name).shape != (m,):
                raise SolverError(f"{name} has to be of length {m}")
        if len(self.row_names) != m or len(self.col_names) != n:
            raise SolverError("every row and column needs a name")
        if len(set(self.row_names)) != m:
            raise SolverError("row names must be unique")
        if len(set(self.col_names)) != n:
            raise SolverError("column names must be unique")
        if np.any(self.row_lower > self.row_upper) or np.any(self.col_lower > self.col_upper):
            raise SolverError("lower bounds must not exceed upper bounds")
        return self

    @property
    def num_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_cols(self) -> int:
        return self.matrix.shape[1]

    def evaluate(self, values: np.ndarray) -> float:
        return float(self.objective @ values + self.offset)

    def violation(self, values: np.ndarray) -> float:
        """Largest absolute violation of a row or column bound."""
        activity = self.matrix @ values
        parts = [
            np.maximum(self.row_lower - activity, 0.0),
            np.maximum(activity - self.row_upper, 0.0),
            np.maximum(self.col_lower - values, 0.0),
            np.maximum(values - self.col_upper, 0.0),
        ]
        return max((float(part.max()) for part in parts if part.size > 0), default=0.0)

    def with_column_bounds(self, lower: np.ndarray, upper: np.ndarray) -> "LinearProgram":
        return self.model_copy(update={"col_lower": lower, "col_upper": upper})


class SolveOptions(BaseModel):
    backend: SolverBackend = Field(
        default_factory=lambda: SolverBackend(settings.solver))
    max_iterations: int = Field(default_factory=lambda: settings.max_iterations)
    feasibility_tol: float = Field(default_factory=lambda: settings.feasibility_tol)
    optimality_tol: float = Field(default_factory=lambda: settings.optimality_tol)
    refactor_interval: int = Field(default_factory=lambda: settings.refactor_interval)
    bland_after: int = Field(default_factory=lambda: settings.bland_after)
    scaling: bool = Field(default_factory=lambda: settings.scaling)
    simplex_nonzero_limit: int = Field(default_factory=lambda: settings.simplex_nonzero_limit)


class SolveReport(BaseModel):
    status: SolveStatus
    backend: SolverBackend
    objective: Optional[float] = None
    primal: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    """Row duals. Positive values belong to rows at their lower bound."""
    reduced_costs: Optional[np.ndarray] = None
    dual_objective: Optional[float] = None
    iterations: int = 0
    wall_time: float = 0.0
    """Seconds."""
    basis: Optional[tuple[int, ...]] = None
    """
    Basic variables of the final basis. Structural columns by their index,
    the slack of row `i` as `-(i + 1)`.
    """
    certificate: Optional[np.ndarray] = None
    """
    Farkas row multipliers of an infeasible program or a primal ray of an
    unbounded one.
    """
    message: str = ""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


def dual_objective(lp: LinearProgram, duals: np.ndarray, reduced_costs: np.ndarray, tol: float = 1e-9) -> float:
    """
    Objective of the dual program for the given multipliers: every multiplier
    is paired with the bound it is active at.
    """
    def paired(values, lower, upper):
        values = np.where(np.abs(values) > tol, values, 0.0)
        bound = np.where(values > 0, lower, upper)
        with np.errstate(invalid="ignore"):
            terms = np.where(values != 0, values * bound, 0.0)
        return float(terms.sum())

    return (
        paired(duals, lp.row_lower, lp.row_upper)
        + paired(reduced_costs, lp.col_lower, lp.col_upper)
        + lp.offset
    )


def reduced_costs(lp: LinearProgram, duals: np.ndarray) -> np.ndarray:
    return lp.objective - lp.matrix.T @ duals
