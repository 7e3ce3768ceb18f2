"""
Evaluation of solved plans: ex-post costs, CVaR tails and the flexibility
sweeps with their result tables.
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence, Union

import jinja2
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from rapo import VERSION
from rapo.config import settings
from rapo.core import DomainError, FlexibilitySettings, RiskSettings, flexibility_preset
from rapo.instance import PlanningInstance
from rapo.log import logger
from rapo.model import INTEGRITY_TOL, IntegrityError, ModelOptions, PlanSolution, solve_plan
from rapo.solver import SolveOptions


QUANTILE_TOL: float = 1e-12

INTERPLAY_PAIRS: dict[str, dict[str, str]] = {
    "flex-moderate": {"shedding_mwh": "dr-intermediate", "ntc_mw": "ntc", "psp_mw": "psp"},
    "flex-high": {"shedding_mwh": "dr-high", "ntc_mw": "ntc-reduced", "psp_mw": "psp-reduced"},
}
"""Isolated-element setting each combined setting is compared against, per metric."""

FAMILIES: dict[str, tuple[str, ...]] = {
    "Demand response": ("dr-none", "dr-low", "dr-intermediate", "dr-high"),
    "Cross-border trade": ("ntc-none", "ntc", "ntc-reduced"),
    "Pumped storage": ("psp-none", "psp", "psp-reduced"),
    "Interplay": ("flex-moderate", "flex-high"),
}

COLUMNS: dict[str, list[str]] = {
    "costs": [
        "setting", "omega", "ic", "expected_oc", "cvar", "tc", "ex_post",
        "zeta", "lost_load_mwh", "clamped",
    ],
    "investments": ["setting", "omega", "asset", "node", "node2", "year", "mw"],
    "shedding": ["setting", "omega", "node", "sector", "year", "mwh"],
    "lost_load": ["setting", "omega", "node", "year", "mwh"],
    "tails": ["setting", "omega", "scenario", "oc", "a_s"],
    "interplay": ["setting", "omega", "metric", "combined", "isolated", "delta"],
    "failures": ["setting", "omega", "error"],
}


class TailResult(BaseModel):
    strict: tuple[str, ...]
    """Scenarios whose cost exceeds the value at risk."""
    boundary: tuple[str, ...]
    """Scenarios whose cost equals the value at risk within tolerance."""
    var: float
    """The lower alpha-quantile of the operating costs."""
    zeta: float
    """The zeta column of the program, `var` where the program leaves it undetermined."""
    from_program: bool = False

    model_config = ConfigDict(frozen=True)


def _check_alpha(alpha: float):
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")


def ex_post_cost(sol: PlanSolution) -> float:
    """Investment cost plus the risk-neutral expectation of the operating costs."""
    return float(sol.ic + sol.probabilities @ sol.oc)


def value_at_risk(costs: Sequence[float], probabilities: Sequence[float], alpha: float) -> float:
    """The lower alpha-quantile, the smallest minimiser of the CVaR function."""
    _check_alpha(alpha)
    costs = np.asarray(costs, dtype=float)
    order = np.argsort(costs, kind="stable")
    cumulative = np.cumsum(np.asarray(probabilities, dtype=float)[order])
    pos = int(np.searchsorted(cumulative, alpha - QUANTILE_TOL, side="left"))
    return float(costs[order][min(pos, len(costs) - 1)])


def cvar_oracle(costs: Sequence[float], probabilities: Sequence[float], alpha: float) -> float:
    """
    CVaR by enumeration. The convex piecewise-linear function
    zeta + E[max(c - zeta, 0)] / (1 - alpha) attains its minimum at one of the
    cost values.
    """
    _check_alpha(alpha)
    costs = np.asarray(costs, dtype=float)
    probabilities = np.asarray(probabilities, dtype=float)
    if costs.size == 0:
        raise DomainError("the cost distribution is empty")
    excess = np.maximum(costs[None, :] - costs[:, None], 0.0) @ probabilities
    return float(np.min(costs + excess / (1 - alpha)))


class RiskMeasures(BaseModel):
    """Threshold, excess per scenario and CVaR of a solved plan."""
    zeta: float
    excess: np.ndarray
    cvar: float
    from_program: bool
    """False where the program leaves zeta undetermined and the values are enumerated."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


def risk_measures(sol: PlanSolution, alpha: Optional[float] = None) -> RiskMeasures:
    """
    The zeta, a[s] and cvar columns of the solution, checked against the
    enumeration. Without a CVaR weight, without risk rows or for another
    alpha the program does not pin them down and the enumerated values are
    returned instead.
    """
    alpha = sol.alpha if alpha is None else alpha
    oc = np.asarray(sol.oc, dtype=float)
    oracle = cvar_oracle(oc, sol.probabilities, alpha)
    zeta = sol.zeta
    if zeta is None or sol.omega == 0 or alpha != sol.alpha:
        var = value_at_risk(oc, sol.probabilities, alpha)
        return RiskMeasures(zeta=var, excess=np.maximum(oc - var, 0.0), cvar=oracle, from_program=False)

    tol = INTEGRITY_TOL * max(1.0, abs(oracle))
    if abs(sol.cvar - oracle) > tol:
        raise IntegrityError(f"cvar column {sol.cvar:.10g} differs from the enumerated CVaR {oracle:.10g}")
    attained = zeta + sol.probabilities @ np.maximum(oc - zeta, 0.0) / (1 - alpha)
    if abs(attained - oracle) > tol:
        raise IntegrityError(f"zeta = {zeta:.10g} does not minimise the CVaR function")
    excess = np.asarray(sol.excess, dtype=float)
    gap = np.abs(excess - np.maximum(oc - zeta, 0.0))
    if gap.size > 0 and gap.max() > tol:
        s = sol.scenario_ids[int(np.argmax(gap))]
        raise IntegrityError(f"a[{s}] differs from the cost of {s} above zeta")
    return RiskMeasures(zeta=zeta, excess=excess, cvar=float(sol.cvar), from_program=True)


def tail_scenarios(sol: PlanSolution, alpha: Optional[float] = None) -> TailResult:
    """
    Scenarios above the value at risk and those sitting exactly on it. The
    value at risk is the smallest minimiser of the CVaR function, the zeta
    column of the program may be any minimiser.
    """
    alpha = sol.alpha if alpha is None else alpha
    measures = risk_measures(sol, alpha)
    var = value_at_risk(sol.oc, sol.probabilities, alpha)
    tol = 1e-6 * max(1.0, abs(var))
    strict, boundary = [], []
    for sid, oc in zip(sol.scenario_ids, sol.oc):
        if oc > var + tol:
            strict.append(sid)
        elif abs(oc - var) <= tol:
            boundary.append(sid)
    return TailResult(
        strict=tuple(strict),
        boundary=tuple(boundary),
        var=var,
        zeta=measures.zeta,
        from_program=measures.from_program,
    )


class SweepCell(BaseModel):
    setting: str
    omega: float
    solution: Optional[PlanSolution] = None
    error: Optional[str] = None

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def ok(self) -> bool:
        return self.solution is not None


def metric(sol: PlanSolution, name: str) -> float:
    if name == "shedding_mwh":
        return sol.shedding_total()
    if name == "ntc_mw":
        return sol.ntc_total
    if name == "psp_mw":
        return sol.psp_total
    if name == "lost_load_mwh":
        return sol.lost_load_total
    if name == "ex_post":
        return ex_post_cost(sol)
    raise KeyError(f"unknown metric {name}")


class ExperimentResult(BaseModel):
    """All cells of a sweep in (setting, omega) order."""
    instance: str
    alpha: float
    omegas: tuple[float, ...]
    settings: tuple[str, ...]
    cells: tuple[SweepCell, ...]
    clamped: int = 0
    """Scenario values raised to zero while blending the scenario set."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def cell(self, setting: str, omega: float) -> Optional[SweepCell]:
        for cell in self.cells:
            if cell.setting == setting and cell.omega == omega:
                return cell
        return None

    def solution(self, setting: str, omega: float) -> Optional[PlanSolution]:
        cell = self.cell(setting, omega)
        return cell.solution if cell is not None else None

    def _solved(self):
        for cell in self.cells:
            if cell.ok:
                yield cell, cell.solution

    def costs(self) -> pd.DataFrame:
        rows = []
        for cell, sol in self._solved():
            measures = risk_measures(sol, self.alpha)
            rows.append([
                cell.setting, cell.omega, sol.ic, sol.expected_oc, measures.cvar,
                sol.objective, ex_post_cost(sol), measures.zeta, sol.lost_load_total, self.clamped,
            ])
        return pd.DataFrame(rows, columns=COLUMNS["costs"])

    def investments(self) -> pd.DataFrame:
        rows = [
            [cell.setting, cell.omega, inv.asset, inv.node, inv.node2 or "", inv.year, inv.mw]
            for cell, sol in self._solved()
            for inv in sol.investments
        ]
        return pd.DataFrame(rows, columns=COLUMNS["investments"])

    def shedding(self) -> pd.DataFrame:
        rows = [
            [cell.setting, cell.omega, rec.node, rec.sector, rec.year, rec.mwh]
            for cell, sol in self._solved()
            for rec in sol.shedding
        ]
        return pd.DataFrame(rows, columns=COLUMNS["shedding"])

    def lost_load(self) -> pd.DataFrame:
        rows = [
            [cell.setting, cell.omega, rec.node, rec.year, rec.mwh]
            for cell, sol in self._solved()
            for rec in sol.lost_load
        ]
        return pd.DataFrame(rows, columns=COLUMNS["lost_load"])

    def tails(self) -> pd.DataFrame:
        rows = []
        for cell, sol in self._solved():
            measures = risk_measures(sol, self.alpha)
            tail = tail_scenarios(sol, self.alpha)
            members = set(tail.strict) | set(tail.boundary)
            for sid, oc, excess in zip(sol.scenario_ids, sol.oc, measures.excess):
                if sid in members:
                    rows.append([cell.setting, cell.omega, sid, oc, excess])
        return pd.DataFrame(rows, columns=COLUMNS["tails"])

    def interplay(self) -> pd.DataFrame:
        """Combined-setting value minus isolated-setting value, per metric."""
        rows = []
        for combined, pairs in INTERPLAY_PAIRS.items():
            if combined not in self.settings:
                continue
            for omega in self.omegas:
                sol = self.solution(combined, omega)
                if sol is None:
                    continue
                for name, isolated in pairs.items():
                    reference = self.solution(isolated, omega)
                    if reference is None:
                        continue
                    a, b = metric(sol, name), metric(reference, name)
                    rows.append([combined, omega, name, a, b, a - b])
        return pd.DataFrame(rows, columns=COLUMNS["interplay"])

    def failures(self) -> pd.DataFrame:
        rows = [[cell.setting, cell.omega, cell.error] for cell in self.cells if not cell.ok]
        return pd.DataFrame(rows, columns=COLUMNS["failures"])

    def summary(self) -> str:
        families = []
        known = {name for members in FAMILIES.values() for name in members}
        groups = [*FAMILIES.items(), ("Other", tuple(s for s in self.settings if s not in known))]
        for title, members in groups:
            present = [s for s in members if s in self.settings]
            if len(present) == 0:
                continue
            rows = []
            for setting in present:
                for name in ("ex_post", "shedding_mwh", "lost_load_mwh", "ntc_mw", "psp_mw"):
                    values = []
                    for omega in self.omegas:
                        sol = self.solution(setting, omega)
                        values.append("failed" if sol is None else f"{metric(sol, name):.6g}")
                    rows.append({"setting": setting, "metric": name, "values": values})
            families.append({"title": title, "rows": rows})
        return _template("summary.md.jinja2").render(
            instance=self.instance,
            alpha=self.alpha,
            omegas=self.omegas,
            families=families,
            clamped=self.clamped,
            failures=[cell for cell in self.cells if not cell.ok],
            version=VERSION,
        )

    def write(self, out_dir: Path) -> list[Path]:
        """Writes all result tables and the summary. Returns the written paths."""
        out_dir.mkdir(parents=True, exist_ok=True)
        frames = {
            "costs": self.costs(),
            "investments": self.investments(),
            "shedding": self.shedding(),
            "lost_load": self.lost_load(),
            "tails": self.tails(),
            "interplay": self.interplay(),
        }
        failures = self.failures()
        if len(failures) > 0:
            frames["failures"] = failures
        rsl = []
        for name, frame in frames.items():
            path = out_dir / f"{name}.csv"
            write_csv(frame, path)
            rsl.append(path)
        path = out_dir / "summary.md"
        path.write_text(self.summary(), encoding="utf-8")
        rsl.append(path)
        logger.info(f"Wrote {len(rsl)} result files to {out_dir}")
        return rsl


def write_csv(frame: pd.DataFrame, path: Path):
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n", encoding="utf-8")


def _template(name: str) -> jinja2.Template:
    loader = jinja2.PackageLoader("rapo", "templates")
    env = jinja2.Environment(loader=loader, keep_trailing_newline=True)
    return env.get_template(name)


def with_isolated(names: Sequence[str]) -> list[str]:
    """Adds the isolated-element settings the interplay settings are compared against."""
    rsl = list(names)
    for name in names:
        for isolated in INTERPLAY_PAIRS.get(name, {}).values():
            if isolated not in rsl:
                rsl.append(isolated)
    return rsl


def _resolve(flex: Sequence[Union[str, FlexibilitySettings]]) -> list[FlexibilitySettings]:
    named = [item for item in flex if isinstance(item, str)]
    custom = [item for item in flex if isinstance(item, FlexibilitySettings)]
    rsl = [flexibility_preset(name) for name in with_isolated(named)]
    names = {item.name for item in rsl}
    for item in custom:
        if item.name in names:
            raise DomainError(f"flexibility setting {item.name} is given twice")
        names.add(item.name)
        rsl.append(item)
    return rsl


def sweep(
    instance: PlanningInstance,
    omegas: Sequence[float],
    flex: Sequence[Union[str, FlexibilitySettings]],
    alpha: Optional[float] = None,
    options: Optional[ModelOptions] = None,
    solve_options: Optional[SolveOptions] = None,
    workers: Optional[int] = None,
) -> ExperimentResult:
    """
    Solves every combination of risk weight and flexibility setting. A
    failing cell is recorded and the sweep continues.
    """
    alpha = settings.alpha if alpha is None else alpha
    workers = settings.workers if workers is None else workers
    risks = [RiskSettings(omega=omega, alpha=alpha) for omega in omegas]
    setups = _resolve(flex)
    jobs = [(setup, risk) for setup in setups for risk in risks]

    def run(job: tuple[FlexibilitySettings, RiskSettings]) -> SweepCell:
        setup, risk = job
        logger.debug(f"Sweep cell {setup.name} at omega {risk.omega}")
        try:
            sol = solve_plan(instance, risk, setup, options, solve_options)
            risk_measures(sol)
        except Exception as e:
            logger.warning(f"Sweep cell {setup.name} at omega {risk.omega} failed: {e}")
            return SweepCell(setting=setup.name, omega=risk.omega, error=str(e))
        return SweepCell(setting=setup.name, omega=risk.omega, solution=sol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(run, jobs))
    else:
        cells = [run(job) for job in jobs]

    failed = sum(1 for cell in cells if not cell.ok)
    logger.info(f"Sweep of {instance.name}: {len(cells) - failed} of {len(cells)} cells solved")
    return ExperimentResult(
        instance=instance.name,
        alpha=alpha,
        omegas=tuple(omegas),
        settings=tuple(setup.name for setup in setups),
        cells=tuple(cells),
        clamped=instance.scenarios.clamp_count,
    )
