"""
Solvers for `LinearProgram`s: the embedded revised simplex, HiGHS via scipy
and the MPS interchange format for everything else.
"""

import time
from typing import Optional

from rapo.log import logger
from rapo.solver.highs import solve_highs
from rapo.solver.mps import InterchangeParseError, read_interchange, write_interchange
from rapo.solver.program import (
    LinearProgram,
    SolveOptions,
    SolveReport,
    SolverBackend,
    SolverError,
    SolveStatus,
)
from rapo.solver.simplex import solve_simplex


def solve(lp: LinearProgram, options: Optional[SolveOptions] = None) -> SolveReport:
    """
    Solves the program with the configured backend. `auto` keeps programs up
    to `simplex_nonzero_limit` matrix nonzeros on the embedded simplex.
    """
    options = options or SolveOptions()
    backend = options.backend
    if backend is SolverBackend.AUTO:
        if lp.matrix.nnz > options.simplex_nonzero_limit:
            logger.warning(
                f"{lp.name} has {lp.matrix.nnz} nonzeros (limit {options.simplex_nonzero_limit}), routing to HiGHS")
            backend = SolverBackend.HIGHS
        else:
            backend = SolverBackend.SIMPLEX
    if backend is SolverBackend.HIGHS and lp.num_cols == 0:
        backend = SolverBackend.SIMPLEX

    start = time.perf_counter()
    if backend is SolverBackend.SIMPLEX:
        report = solve_simplex(lp, options)
    else:
        report = solve_highs(lp, options)
    report = report.model_copy(update={"wall_time": time.perf_counter() - start})
    logger.info(
        f"{lp.name} ({lp.num_rows} rows, {lp.num_cols} columns) solved by {backend.value}: "
        f"{report.status.value} after {report.iterations} iterations in {report.wall_time:.2f}s")
    return report
