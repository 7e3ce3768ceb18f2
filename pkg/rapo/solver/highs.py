"""Routes a linear program to HiGHS through `scipy.optimize.linprog`."""

from typing import Optional

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from rapo.log import logger
from rapo.solver.program import (
    LinearProgram,
    SolveOptions,
    SolveReport,
    SolverBackend,
    SolverError,
    SolveStatus,
    dual_objective,
    reduced_costs,
)


HIGHS_STATUS = {
    0: SolveStatus.OPTIMAL,
    1: SolveStatus.ITERATION_LIMIT,
    2: SolveStatus.INFEASIBLE,
    3: SolveStatus.UNBOUNDED,
}


def solve_highs(lp: LinearProgram, options: SolveOptions) -> SolveReport:
    """
    Equality rows become `A_eq`, finite upper row bounds `A v <= u` and finite
    lower row bounds `-A v <= -l`. The marginals are mapped back so that a
    positive row dual marks a row at its lower bound.
    """
    matrix = lp.matrix.tocsr()
    equal = lp.row_lower == lp.row_upper
    upper = ~equal & np.isfinite(lp.row_upper)
    lower = ~equal & np.isfinite(lp.row_lower)
    eq_rows = np.flatnonzero(equal)
    ub_rows = np.flatnonzero(upper)
    lb_rows = np.flatnonzero(lower)

    a_ub = sparse.vstack([matrix[ub_rows], -matrix[lb_rows]], format="csr")
    b_ub = np.concatenate([lp.row_upper[ub_rows], -lp.row_lower[lb_rows]])
    bounds = [
        (None if np.isinf(low) else low, None if np.isinf(high) else high)
        for low, high in zip(lp.col_lower, lp.col_upper)
    ]
    logger.debug(
        f"HiGHS call for {lp.name} with {len(eq_rows)} equality and {a_ub.shape[0]} inequality rows")
    rsl = linprog(
        lp.objective,
        A_ub=a_ub if a_ub.shape[0] > 0 else None,
        b_ub=b_ub if a_ub.shape[0] > 0 else None,
        A_eq=matrix[eq_rows] if len(eq_rows) > 0 else None,
        b_eq=lp.row_lower[eq_rows] if len(eq_rows) > 0 else None,
        bounds=bounds,
        method="highs-ds",
        options={
            "maxiter": options.max_iterations,
            "primal_feasibility_tolerance": max(options.feasibility_tol, 1e-10),
            "dual_feasibility_tolerance": max(options.optimality_tol, 1e-10),
        },
    )
    status = HIGHS_STATUS.get(rsl.status)
    if status is None and "unbounded or infeasible" in str(rsl.message).lower():
        status = SolveStatus.INFEASIBLE
    if status is None:
        raise SolverError(f"HiGHS failed on {lp.name}: {rsl.message}")
    if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
        status, certificate, message = _certify(lp, options, status)
        return SolveReport(
            status=status,
            backend=SolverBackend.HIGHS,
            iterations=int(getattr(rsl, "nit", 0)),
            certificate=certificate,
            message=message or str(rsl.message),
        )
    if status is not SolveStatus.OPTIMAL:
        return SolveReport(
            status=status,
            backend=SolverBackend.HIGHS,
            iterations=int(getattr(rsl, "nit", 0)),
            message=str(rsl.message),
        )

    primal = np.asarray(rsl.x, dtype=float)
    duals = np.zeros(lp.num_rows)
    if len(eq_rows) > 0:
        duals[eq_rows] = rsl.eqlin.marginals
    if a_ub.shape[0] > 0:
        marginals = rsl.ineqlin.marginals
        duals[ub_rows] += marginals[:len(ub_rows)]
        duals[lb_rows] -= marginals[len(ub_rows):]
    costs = reduced_costs(lp, duals)
    return SolveReport(
        status=status,
        backend=SolverBackend.HIGHS,
        objective=lp.evaluate(primal),
        primal=primal,
        duals=duals,
        reduced_costs=costs,
        dual_objective=dual_objective(lp, duals, costs),
        iterations=int(getattr(rsl, "nit", 0)),
        message=str(rsl.message),
    )


def _elastic_program(lp: LinearProgram) -> LinearProgram:
    """
    `row_lower <= A v + p - q <= row_upper` minimising `sum(p + q)`. Always
    feasible and bounded; a positive optimum proves `lp` infeasible.
    """
    m, n = lp.matrix.shape
    identity = sparse.identity(m, format="csr")
    return LinearProgram(
        name=f"{lp.name}-elastic",
        objective=np.concatenate([np.zeros(n), np.ones(2 * m)]),
        matrix=sparse.hstack([lp.matrix, identity, -identity], format="csr"),
        row_lower=lp.row_lower,
        row_upper=lp.row_upper,
        col_lower=np.concatenate([lp.col_lower, np.zeros(2 * m)]),
        col_upper=np.concatenate([lp.col_upper, np.full(2 * m, np.inf)]),
        row_names=lp.row_names,
        col_names=lp.col_names + tuple(f"~p{i}" for i in range(m)) + tuple(f"~q{i}" for i in range(m)),
    )


def _ray_program(lp: LinearProgram) -> LinearProgram:
    """
    Directions along which every finite bound stays satisfied, cut off by
    `c r >= -1`. An optimum of -1 is a ray of `lp`.
    """
    def cone(lower, upper):
        return np.where(np.isfinite(lower), 0.0, -np.inf), np.where(np.isfinite(upper), 0.0, np.inf)

    row_lower, row_upper = cone(lp.row_lower, lp.row_upper)
    col_lower, col_upper = cone(lp.col_lower, lp.col_upper)
    return LinearProgram(
        name=f"{lp.name}-ray",
        objective=lp.objective,
        matrix=sparse.vstack([lp.matrix, sparse.csr_matrix(lp.objective)], format="csr"),
        row_lower=np.append(row_lower, -1.0),
        row_upper=np.append(row_upper, np.inf),
        col_lower=col_lower,
        col_upper=col_upper,
        row_names=lp.row_names + ("objective",),
        col_names=lp.col_names,
    )


def _certify(lp: LinearProgram, options: SolveOptions, status: SolveStatus) -> tuple[SolveStatus, Optional[np.ndarray], str]:
    """
    Status and certificate of a program HiGHS found infeasible or unbounded:
    the row duals of the elastic program as Farkas multipliers, otherwise a
    ray from the ray program.
    """
    bounds = np.concatenate([lp.row_lower, lp.row_upper])
    tol = options.feasibility_tol * max(1.0, float(np.abs(bounds[np.isfinite(bounds)]).max(initial=0.0)))
    elastic = solve_highs(_elastic_program(lp), options)
    if elastic.optimal and elastic.objective > tol:
        logger.debug(f"{lp.name} violates its rows by {elastic.objective:.3g} at least")
        return SolveStatus.INFEASIBLE, elastic.duals, f"rows cannot be met, total violation {elastic.objective:.6g}"
    ray = solve_highs(_ray_program(lp), options)
    if ray.optimal and ray.objective < -0.5:
        return SolveStatus.UNBOUNDED, ray.primal, "objective is unbounded below"
    logger.warning(f"HiGHS reported {lp.name} {status.value} but no certificate was found")
    return status, None, ""
