"""
Bounded-variable revised simplex for desk-scale programs. The basis is held
as a sparse LU factorisation followed by a file of eta columns, one per
pivot, and is factorised again every `refactor_interval` pivots.

Every row `i` gets a slack `s_i` with `row_lower <= s_i <= row_upper` so the
working system reads `A v - s = 0`. Rows which the all-at-bound start point
does not satisfy get an artificial column; phase one drives them to zero.

Pricing is partial: the columns are split into blocks of `PRICING_BLOCK` and
the entering column is the best candidate of the first block, in round-robin
order, which has one. Under Bland's rule all columns are priced.
"""

from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

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


PIVOT_TOL: float = 1e-9
TIE_TOL: float = 1e-12
SCALING_PASSES: int = 4
PRICING_BLOCK: int = 1024


class _Reduced:
    """Result of the presolve: the program without empty rows and fixed columns."""

    def __init__(self, lp: LinearProgram, tol: float):
        fixed = lp.col_lower == lp.col_upper
        self.cols = np.flatnonzero(~fixed)
        self.fixed_cols = np.flatnonzero(fixed)
        matrix = lp.matrix.tocsr(copy=True)
        matrix.eliminate_zeros()
        shift = matrix[:, self.fixed_cols] @ lp.col_lower[self.fixed_cols]
        matrix = matrix[:, self.cols].tocsr()
        row_lower = lp.row_lower - shift
        row_upper = lp.row_upper - shift
        empty = np.diff(matrix.indptr) == 0
        violated = empty & ((row_lower > tol) | (row_upper < -tol))
        self.infeasible_row: Optional[int] = int(np.flatnonzero(violated)[0]) if violated.any() else None
        self.infeasible_sign = 0.0
        if self.infeasible_row is not None:
            self.infeasible_sign = 1.0 if row_lower[self.infeasible_row] > tol else -1.0
        self.rows = np.flatnonzero(~empty)
        self.matrix = matrix[self.rows, :].tocsr()
        self.row_lower = row_lower[self.rows]
        self.row_upper = row_upper[self.rows]
        self.objective = lp.objective[self.cols]
        self.col_lower = lp.col_lower[self.cols]
        self.col_upper = lp.col_upper[self.cols]
        logger.debug(
            f"Presolve of {lp.name} removed {int(empty.sum())} empty rows and {len(self.fixed_cols)} fixed columns")


def _extremes(indptr: np.ndarray, data: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Smallest and largest entry of every compressed segment, one for empty segments."""
    low = np.ones(size)
    high = np.ones(size)
    nonempty = np.diff(indptr) > 0
    if data.size > 0:
        starts = indptr[:-1][nonempty]
        low[nonempty] = np.minimum.reduceat(data, starts)
        high[nonempty] = np.maximum.reduceat(data, starts)
    return low, high


def geometric_scaling(matrix: sparse.csr_matrix, passes: int = SCALING_PASSES) -> tuple[np.ndarray, np.ndarray]:
    """
    Row and column factors which bring the entries of `diag(r) A diag(c)`
    close to one. Factors are rounded to powers of two so scaling does not
    introduce rounding errors.
    """
    m, n = matrix.shape
    magnitude = abs(matrix).tocsr()
    row_scale = np.ones(m)
    col_scale = np.ones(n)
    for _ in range(passes):
        scaled = sparse.diags(row_scale) @ magnitude @ sparse.diags(col_scale)
        scaled = scaled.tocsr()
        low, high = _extremes(scaled.indptr, scaled.data, m)
        row_scale = row_scale / np.sqrt(low * high)
        scaled = (sparse.diags(row_scale) @ magnitude @ sparse.diags(col_scale)).tocsc()
        low, high = _extremes(scaled.indptr, scaled.data, n)
        col_scale = col_scale / np.sqrt(low * high)
    return 2.0 ** np.round(np.log2(row_scale)), 2.0 ** np.round(np.log2(col_scale))


class BasisFactor:
    """
    `B = B0 E_1^-1 ... E_k^-1`: sparse LU factors of the basis at the last
    refactorisation and one eta column per pivot since.
    """

    def __init__(self, basis_matrix: sparse.csc_matrix):
        try:
            self.lu = sparse_linalg.splu(basis_matrix)
        except RuntimeError as e:
            raise SolverError(f"basis matrix became singular: {e}")
        self.etas: list[tuple[int, np.ndarray]] = []

    def __len__(self) -> int:
        return len(self.etas)

    def ftran(self, rhs: np.ndarray) -> np.ndarray:
        """Solves `B x = rhs`."""
        x = self.lu.solve(np.ascontiguousarray(rhs, dtype=float))
        for r, w in self.etas:
            xr = x[r] / w[r]
            x -= w * xr
            x[r] = xr
        return x

    def btran(self, rhs: np.ndarray) -> np.ndarray:
        """Solves `B^T y = rhs`."""
        z = np.array(rhs, dtype=float)
        for r, w in reversed(self.etas):
            z[r] = (z[r] - (w @ z - w[r] * z[r])) / w[r]
        return self.lu.solve(z, trans="T")

    def update(self, r: int, w: np.ndarray):
        """Column `r` of the basis was replaced by a column with `B^-1 a = w`."""
        self.etas.append((r, w.copy()))


class RevisedSimplex:
    """
    Solves one linear program. An instance owns its workspace and is used for
    a single call of `run`.
    """

    def __init__(self, lp: LinearProgram, options: SolveOptions):
        self.lp = lp
        self.options = options
        self.iterations = 0
        self.reduced = _Reduced(lp, options.feasibility_tol)

    def run(self) -> SolveReport:
        red = self.reduced
        if red.infeasible_row is not None:
            certificate = np.zeros(self.lp.num_rows)
            certificate[red.infeasible_row] = red.infeasible_sign
            return self._report(
                SolveStatus.INFEASIBLE,
                certificate=certificate,
                message=f"row {self.lp.row_names[red.infeasible_row]} is empty but not satisfied",
            )
        self._setup()

        if self.num_artificial > 0:
            logger.debug(f"Phase one with {self.num_artificial} artificial columns")
            status = self._iterate(self.phase_one_cost)
            if status is SolveStatus.ITERATION_LIMIT:
                return self._report(status, primal=self._primal())
            self._refactor()
            infeasibility = float(self.x[self.artificial].sum())
            if infeasibility > self.options.feasibility_tol * max(1.0, self.bound_scale):
                y = self._duals(self.phase_one_cost)
                return self._report(
                    SolveStatus.INFEASIBLE,
                    certificate=self._unscale_duals(y, 1.0),
                    message=f"phase one ended with infeasibility {infeasibility:.3g}",
                )
            self.upper[self.artificial] = 0.0
            nonbasic = self.artificial[~self.is_basic[self.artificial]]
            self.x[nonbasic] = 0.0

        logger.debug(f"Phase two after {self.iterations} iterations")
        status = self._iterate(self.cost)
        if status is SolveStatus.ITERATION_LIMIT:
            return self._report(status, primal=self._primal())
        if status is SolveStatus.UNBOUNDED:
            ray = np.zeros(self.lp.num_cols)
            ray[red.cols] = self.col_scale * self.ray[:self.n]
            return self._report(status, certificate=ray, message="objective is unbounded below")

        self._refactor()
        y = self._duals(self.cost)
        duals = self._unscale_duals(y, self.cost_scale)
        primal = self._primal()
        costs = reduced_costs(self.lp, duals)
        return self._report(
            SolveStatus.OPTIMAL,
            objective=self.lp.evaluate(primal),
            primal=primal,
            duals=duals,
            reduced_costs=costs,
            dual_objective=dual_objective(self.lp, duals, costs),
            basis=self._basis(),
        )

    def _setup(self):
        red = self.reduced
        matrix = red.matrix
        m, n = matrix.shape
        self.m = m
        self.n = n
        if self.options.scaling and matrix.nnz > 0:
            self.row_scale, self.col_scale = geometric_scaling(matrix)
            logger.debug(
                f"Scaling factors rows {self.row_scale.min():g}..{self.row_scale.max():g}, "
                f"columns {self.col_scale.min():g}..{self.col_scale.max():g}")
        else:
            self.row_scale = np.ones(m)
            self.col_scale = np.ones(n)
        if m > 0:
            scaled = (sparse.diags(self.row_scale) @ matrix @ sparse.diags(self.col_scale)).tocsc()
        else:
            scaled = matrix.tocsc()
        with np.errstate(invalid="ignore"):
            col_lower = red.col_lower / self.col_scale
            col_upper = red.col_upper / self.col_scale
        row_lower = red.row_lower * self.row_scale
        row_upper = red.row_upper * self.row_scale
        finite = np.concatenate([row_lower, row_upper, col_lower, col_upper])
        finite = np.abs(finite[np.isfinite(finite)])
        self.bound_scale = float(finite.max()) if finite.size else 1.0

        start = np.where(
            np.isfinite(col_lower), col_lower,
            np.where(np.isfinite(col_upper), col_upper, 0.0))
        activity = scaled @ start
        tol = self.options.feasibility_tol
        satisfied = (activity >= row_lower - tol) & (activity <= row_upper + tol)
        needs_artificial = np.flatnonzero(~satisfied)
        target = np.where(activity < row_lower, row_lower, row_upper)[needs_artificial]
        signs = np.where(target > activity[needs_artificial], 1.0, -1.0)
        k = len(needs_artificial)
        self.num_artificial = k

        artificial = sparse.csc_matrix(
            (signs, (needs_artificial, np.arange(k))), shape=(m, k))
        self.matrix = sparse.hstack(
            [scaled, -sparse.identity(m, format="csc"), artificial], format="csc")
        self.matrix.sort_indices()
        total = n + m + k
        self.total = total
        self.artificial = np.arange(n + m, total)
        self.transposed = self.matrix.T.tocsr()
        self.blocks = [(s, min(s + PRICING_BLOCK, total)) for s in range(0, total, PRICING_BLOCK)]
        self.block_rows = [self.transposed[s:e] for s, e in self.blocks]
        self.next_block = 0

        self.lower = np.concatenate([col_lower, row_lower, np.zeros(k)])
        self.upper = np.concatenate([col_upper, row_upper, np.full(k, np.inf)])
        self.x = np.concatenate([start, activity, np.zeros(k)])
        self.x[n + needs_artificial] = target
        self.x[self.artificial] = np.abs(target - activity[needs_artificial])

        scaled_cost = red.objective * self.col_scale
        self.cost_scale = float(2.0 ** np.round(np.log2(max(1.0, np.abs(scaled_cost).max(initial=0.0)))))
        self.cost = np.concatenate([scaled_cost / self.cost_scale, np.zeros(m + k)])
        self.phase_one_cost = np.zeros(total)
        self.phase_one_cost[self.artificial] = 1.0

        self.basis = n + np.arange(m)
        self.basis[needs_artificial] = self.artificial
        self.is_basic = np.zeros(total, dtype=bool)
        self.is_basic[self.basis] = True
        self.factor: Optional[BasisFactor] = None
        self._refactor()
        logger.debug(f"Simplex working system with {m} rows and {total} columns")

    def _column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        start, end = self.matrix.indptr[j], self.matrix.indptr[j + 1]
        col[self.matrix.indices[start:end]] = self.matrix.data[start:end]
        return col

    def _refactor(self):
        """Factorises the basis afresh and recomputes the basic values from the nonbasic ones."""
        if self.m == 0:
            return
        self.factor = BasisFactor(self.matrix[:, self.basis].tocsc())
        nonbasic = self.x.copy()
        nonbasic[self.basis] = 0.0
        self.x[self.basis] = self.factor.ftran(-(self.matrix @ nonbasic))

    def _ftran(self, rhs: np.ndarray) -> np.ndarray:
        return self.factor.ftran(rhs) if self.m > 0 else np.zeros(0)

    def _duals(self, cost: np.ndarray) -> np.ndarray:
        return self.factor.btran(cost[self.basis]) if self.m > 0 else np.zeros(0)

    def _candidates(self, start: int, end: int, d: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
        nonbasic = ~self.is_basic[start:end]
        x = self.x[start:end]
        increase = nonbasic & (x < self.upper[start:end]) & (d < -tol)
        decrease = nonbasic & (x > self.lower[start:end]) & (d > tol)
        return increase, decrease

    def _price(self, cost: np.ndarray, y: np.ndarray, bland: bool, tol: float) -> tuple[int, float]:
        """Entering column and its direction, -1 if the basis is optimal."""
        if bland:
            d = cost - self.transposed @ y if self.m > 0 else cost
            increase, decrease = self._candidates(0, self.total, d, tol)
            candidates = np.flatnonzero(increase | decrease)
            if candidates.size == 0:
                return -1, 0.0
            j = int(candidates[0])
            return j, 1.0 if increase[j] else -1.0
        count = len(self.blocks)
        for step in range(count):
            block = (self.next_block + step) % count
            start, end = self.blocks[block]
            d = cost[start:end] - self.block_rows[block] @ y if self.m > 0 else cost[start:end]
            increase, decrease = self._candidates(start, end, d, tol)
            score = np.where(increase | decrease, np.abs(d), 0.0)
            i = int(np.argmax(score))
            if score[i] > 0:
                self.next_block = (block + 1) % count
                return start + i, 1.0 if increase[i] else -1.0
        return -1, 0.0

    def _ratio(self, delta: np.ndarray, j: int, bland: bool) -> tuple[float, int, bool]:
        """Step length, leaving row (-1 for a bound flip) and whether it leaves at its upper bound."""
        flip = self.upper[j] - self.lower[j]
        if self.m == 0:
            return flip, -1, False
        xb = self.x[self.basis]
        lower = self.lower[self.basis]
        upper = self.upper[self.basis]
        limits = np.full(self.m, np.inf)
        falling = delta < -PIVOT_TOL
        rising = delta > PIVOT_TOL
        limits[falling] = (xb[falling] - lower[falling]) / -delta[falling]
        limits[rising] = (upper[rising] - xb[rising]) / delta[rising]
        limits = np.maximum(limits, 0.0)
        step = float(limits.min())
        if flip <= step:
            return flip, -1, False
        if not np.isfinite(step):
            return np.inf, -1, False
        ties = np.flatnonzero(limits <= step + TIE_TOL)
        if bland:
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(delta[ties]))])
        return float(limits[r]), r, bool(rising[r])

    def _iterate(self, cost: np.ndarray) -> SolveStatus:
        degenerate = 0
        tol = self.options.optimality_tol
        while True:
            if self.iterations >= self.options.max_iterations:
                logger.warning(f"Iteration limit of {self.options.max_iterations} reached")
                return SolveStatus.ITERATION_LIMIT
            if self.m > 0 and len(self.factor) >= self.options.refactor_interval:
                self._refactor()
            bland = degenerate >= self.options.bland_after
            y = self._duals(cost)
            j, direction = self._price(cost, y, bland, tol)
            if j < 0:
                return SolveStatus.OPTIMAL
            w = self._ftran(self._column(j))
            delta = -direction * w
            step, r, to_upper = self._ratio(delta, j, bland)
            if not np.isfinite(step):
                self.ray = np.zeros(self.total)
                self.ray[j] = direction
                self.ray[self.basis] = delta
                return SolveStatus.UNBOUNDED

            self.x[j] += direction * step
            self.x[self.basis] += delta * step
            if r < 0:
                self.x[j] = self.upper[j] if direction > 0 else self.lower[j]
            else:
                leaving = self.basis[r]
                self.x[leaving] = self.upper[leaving] if to_upper else self.lower[leaving]
                self.factor.update(r, w)
                self.basis[r] = j
                self.is_basic[leaving] = False
                self.is_basic[j] = True
            degenerate = degenerate + 1 if step <= TIE_TOL else 0
            self.iterations += 1
            if self.iterations % 1000 == 0:
                logger.debug(f"Iteration {self.iterations}, objective {float(cost @ self.x):.10g}")

    def _primal(self) -> np.ndarray:
        red = self.reduced
        primal = np.zeros(self.lp.num_cols)
        primal[red.fixed_cols] = self.lp.col_lower[red.fixed_cols]
        if hasattr(self, "x"):
            values = self.col_scale * self.x[:self.n]
            primal[red.cols] = np.clip(values, red.col_lower, red.col_upper)
        return primal

    def _unscale_duals(self, y: np.ndarray, cost_scale: float) -> np.ndarray:
        duals = np.zeros(self.lp.num_rows)
        duals[self.reduced.rows] = self.row_scale * y * cost_scale
        return duals

    def _basis(self) -> tuple[int, ...]:
        red = self.reduced
        rsl = []
        for column in self.basis:
            if column < self.n:
                rsl.append(int(red.cols[column]))
            elif column < self.n + self.m:
                rsl.append(-(int(red.rows[column - self.n]) + 1))
            else:
                row = int(np.flatnonzero(self._column(column))[0])
                rsl.append(-(int(red.rows[row]) + 1))
        return tuple(sorted(rsl))

    def _report(self, status: SolveStatus, **kwargs) -> SolveReport:
        return SolveReport(
            status=status,
            backend=SolverBackend.SIMPLEX,
            iterations=self.iterations,
            **kwargs,
        )


def solve_simplex(lp: LinearProgram, options: SolveOptions) -> SolveReport:
    return RevisedSimplex(lp, options).run()
