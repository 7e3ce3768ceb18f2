"""
Deterministic equivalent of the two-stage expansion problem with a CVaR term.

First-stage columns are cumulative investments per year in generation (`x`),
interconnectors (`y`) and pumped storage (`z`). Every scenario carries its
own dispatch, its discounted operating cost `oc[s]` and its excess `a[s]`
over the threshold `zeta`. The objective reads

    IC + (1 - omega) * sum_s p_s * oc[s] + omega * cvar
"""

from typing import Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import sparse

from rapo.config import settings
from rapo.core import (
    FlexibilitySettings,
    Node,
    RiskSettings,
    Technology,
    TechnologyKind,
    annuity,
    discount_factor,
    marginal_cost,
)
from rapo.demand import build_merit_order, shed_cap
from rapo.instance import PlanningInstance
from rapo.log import logger
from rapo.scenario import single_scenario_set
from rapo.solver import LinearProgram, SolveOptions, SolveStatus, solve


FIRST_STAGE_KINDS: tuple[str, ...] = ("x", "y", "z")
INTEGRITY_TOL: float = 1e-6

Key = tuple[Union[str, int], ...]


class ModelBuildError(ValueError):
    """Raised when an instance cannot be turned into a linear program."""
    pass


class IntegrityError(RuntimeError):
    """
    Raised when a primal solution violates the program or the operating
    costs recomputed from the dispatch disagree with the cost columns.
    """
    pass


class SolveFailedError(RuntimeError):
    """Raised when a solve ends without an optimal solution."""

    def __init__(self, name: str, status: SolveStatus, message: str = ""):
        self.status = status
        super().__init__(f"{name} ended with status {status.value}. {message}".strip())


class ModelOptions(BaseModel):
    lost_load_penalty: float = Field(default_factory=lambda: settings.lost_load_penalty)
    """€/MWh of unserved energy when demand response is off."""
    storage_cyclic: bool = Field(default_factory=lambda: settings.storage_cyclic)
    capacity_power_factor: float = Field(default_factory=lambda: settings.capacity_power_factor)
    symmetric_ntc: bool = False
    """Force equal expansion of both directions of a border."""
    hours_weight: Optional[float] = None
    """Overrides the weight of every representative hour."""
    risk_rows: bool = True
    """Without risk rows the program carries neither zeta, a nor cvar."""

    model_config = ConfigDict(frozen=True)


class VariableCatalog(BaseModel):
    """Bijective mapping between semantic variable keys and column indices."""
    keys: list[Key] = []
    index: dict[Key, int] = {}

    def add(self, key: Key) -> int:
        if key in self.index:
            raise ModelBuildError(f"variable {self.name(key)} is defined twice")
        self.index[key] = len(self.keys)
        self.keys.append(key)
        return self.index[key]

    def __getitem__(self, key: Key) -> int:
        return self.index[key]

    def __contains__(self, key: Key) -> bool:
        return key in self.index

    def __len__(self) -> int:
        return len(self.keys)

    def get(self, key: Key) -> Optional[int]:
        return self.index.get(key)

    def of_kind(self, kind: str) -> list[tuple[Key, int]]:
        return [(key, col) for key, col in self.index.items() if key[0] == kind]

    @staticmethod
    def name(key: Key) -> str:
        if len(key) == 1:
            return str(key[0])
        return f"{key[0]}[{','.join(str(part) for part in key[1:])}]"


class PlanProgram(LinearProgram):
    """A linear program together with what is needed to interpret its solutions."""
    catalog: VariableCatalog
    scenario_ids: tuple[str, ...]
    probabilities: np.ndarray
    omega: float
    alpha: float
    operating_costs: sparse.csr_matrix
    """Maps the primal vector onto the operating cost of every scenario."""
    investment_costs: np.ndarray
    investment_caps: dict[int, float] = {}
    hour_labels: tuple[str, ...]
    hour_weights: np.ndarray
    risk_rows: bool = True


class Investment(BaseModel):
    kind: str
    """`generation`, `ntc` or `psp`."""
    asset: str
    """Technology id, `ntc` for interconnectors."""
    node: str
    node2: Optional[str] = None
    year: int
    mw: float

    model_config = ConfigDict(frozen=True)


class SheddingRecord(BaseModel):
    """Expected annual energy, weighted by scenario probability and hour weight."""
    node: str
    sector: str
    year: int
    mwh: float

    model_config = ConfigDict(frozen=True)


class PlanSolution(BaseModel):
    status: SolveStatus
    objective: float
    """Total system cost TC of the solved program."""
    ic: float
    oc: np.ndarray
    scenario_ids: tuple[str, ...]
    probabilities: np.ndarray
    expected_oc: float
    omega: float
    alpha: float
    zeta: Optional[float] = None
    excess: Optional[np.ndarray] = None
    cvar: Optional[float] = None
    investments: tuple[Investment, ...] = ()
    shedding: tuple[SheddingRecord, ...] = ()
    lost_load: tuple[SheddingRecord, ...] = ()
    primal: np.ndarray
    duals: Optional[np.ndarray] = None
    catalog: VariableCatalog

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def value(self, key: Key) -> float:
        col = self.catalog.get(key)
        return 0.0 if col is None else float(self.primal[col])

    def first_stage(self) -> dict[Key, float]:
        """Values of all investment columns, ready for `fix_first_stage`."""
        return {
            key: float(self.primal[col])
            for key, col in self.catalog.index.items()
            if key[0] in FIRST_STAGE_KINDS
        }

    def _last_year(self) -> Optional[int]:
        years = [record.year for record in self.investments]
        return max(years) if years else None

    def investment_mix(self) -> dict[str, float]:
        """Cumulative generation investment per technology in the last year."""
        last = self._last_year()
        rsl: dict[str, float] = {}
        for record in self.investments:
            if record.kind == "generation" and record.year == last:
                rsl[record.asset] = rsl.get(record.asset, 0.0) + record.mw
        return rsl

    @property
    def ntc_total(self) -> float:
        last = self._last_year()
        return sum(r.mw for r in self.investments if r.kind == "ntc" and r.year == last)

    @property
    def psp_total(self) -> float:
        last = self._last_year()
        return sum(r.mw for r in self.investments if r.kind == "psp" and r.year == last)

    def shedding_total(self, year: Optional[int] = None) -> float:
        return sum(r.mwh for r in self.shedding if year is None or r.year == year)

    @property
    def lost_load_total(self) -> float:
        return sum(r.mwh for r in self.lost_load)


class _Builder:
    """Collects columns and rows and assembles the sparse program."""

    def __init__(self):
        self.catalog = VariableCatalog()
        self.col_lower: list[float] = []
        self.col_upper: list[float] = []
        self.cost: list[float] = []
        self.ic: dict[int, float] = {}
        self.caps: dict[int, float] = {}
        self.oc_terms: list[tuple[int, int, float]] = []
        self.row_cols: list[list[int]] = []
        self.row_vals: list[list[float]] = []
        self.row_lower: list[float] = []
        self.row_upper: list[float] = []
        self.row_names: list[str] = []

    def column(self, key: Key, lower: float = 0.0, upper: float = np.inf, cost: float = 0.0) -> int:
        col = self.catalog.add(key)
        self.col_lower.append(lower)
        self.col_upper.append(upper)
        self.cost.append(cost)
        return col

    def row(self, tag: str, index: Sequence, cols: Sequence[int], vals: Sequence[float], lower: float, upper: float):
        name = VariableCatalog.name((tag, *index))
        self.row_cols.append(list(cols))
        self.row_vals.append(list(vals))
        self.row_lower.append(lower)
        self.row_upper.append(upper)
        self.row_names.append(name)

    def parts(self) -> dict:
        n = len(self.catalog)
        indptr = np.cumsum([0, *(len(cols) for cols in self.row_cols)])
        indices = np.array([c for cols in self.row_cols for c in cols], dtype=int)
        data = np.array([v for vals in self.row_vals for v in vals], dtype=float)
        matrix = sparse.csr_matrix((data, indices, indptr), shape=(len(self.row_names), n))
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        return dict(
            objective=np.array(self.cost, dtype=float),
            matrix=matrix,
            row_lower=np.array(self.row_lower, dtype=float),
            row_upper=np.array(self.row_upper, dtype=float),
            col_lower=np.array(self.col_lower, dtype=float),
            col_upper=np.array(self.col_upper, dtype=float),
            row_names=tuple(self.row_names),
            col_names=tuple(VariableCatalog.name(key) for key in self.catalog.keys),
        )


def add_risk_rows(
    builder: _Builder,
    oc_cols: Sequence[int],
    scenario_ids: Sequence[str],
    probabilities: np.ndarray,
    alpha: float,
    omega: float,
):
    """
    Adds `zeta`, `a[s]` and `cvar` with the rows

        zeta + 1 / (1 - alpha) * sum_s p_s * a[s] - cvar <= 0
        a[s] - oc[s] + zeta >= 0
    """
    zeta = builder.column(("zeta",), lower=-np.inf)
    excess = [builder.column(("a", s)) for s in scenario_ids]
    cvar = builder.column(("cvar",), cost=omega)
    factor = 1 / (1 - alpha)
    builder.row(
        "cvar_def", (),
        [zeta, *excess, cvar],
        [1.0, *(factor * p for p in probabilities), -1.0],
        -np.inf, 0.0,
    )
    for s, a, oc in zip(scenario_ids, excess, oc_cols):
        builder.row("excess", (s,), [a, oc, zeta], [1.0, -1.0, 1.0], 0.0, np.inf)


class _PlanBuilder(_Builder):
    def __init__(self, instance: PlanningInstance, risk: RiskSettings, flex: FlexibilitySettings, options: ModelOptions):
        super().__init__()
        self.instance = instance
        self.risk = risk
        self.flex = flex
        self.options = options
        self.weights = instance.hour_weights(options.hours_weight)
        self.df = {year: discount_factor(year, instance.finance) for year in instance.years}
        self.order = build_merit_order(instance.nodes, flex)
        self.x: dict[tuple[str, str], list[int]] = {}
        self.y: dict[str, list[int]] = {}
        self.z: dict[tuple[str, str], list[int]] = {}

    def _cap(self, tech: Technology, node: Node, year: int) -> float:
        restricted = self.instance.first_year_investable
        if restricted is not None and year == self.instance.years[0] and tech.id not in restricted:
            return 0.0
        return node.investment_cap(tech.id, year)

    def _investment_columns(self, kind: str, tech: Technology, node: Node, capex: float) -> list[int]:
        years = self.instance.years
        payment = annuity(capex, self.instance.finance.interest_rate, tech.lifetime)
        cols = []
        for year in years:
            cost = self.df[year] * payment
            col = self.column((kind, tech.id, node.id, year), cost=cost)
            self.ic[col] = cost
            cap = self._cap(tech, node, year)
            self.caps[col] = cap
            self.row("invest_cap", (kind, tech.id, node.id, year), [col], [1.0], -np.inf, cap)
            cols.append(col)
        self._irreversible(kind, (tech.id, node.id), cols)
        return cols

    def _irreversible(self, kind: str, index: tuple, cols: list[int]):
        for year, col, later in zip(self.instance.years, cols, cols[1:]):
            self.row("irreversible", (kind, *index, year), [col, later], [1.0, -1.0], -np.inf, 0.0)

    def first_stage(self):
        inst = self.instance
        for tech in inst.technologies:
            if not tech.investable:
                continue
            if tech.is_psp() and not self.flex.psp_expansion:
                continue
            for node in inst.nodes:
                if max(self._cap(tech, node, year) for year in inst.years) <= 0:
                    continue
                if tech.is_psp():
                    self.z[(tech.id, node.id)] = self._investment_columns(
                        "z", tech, node, tech.capex * self.flex.psp_capex_scale)
                else:
                    self.x[(tech.id, node.id)] = self._investment_columns("x", tech, node, tech.capex)

        if self.flex.ntc_expansion:
            rate = inst.finance.interest_rate
            for link in inst.interconnectors:
                if not link.expandable:
                    continue
                payment = annuity(link.capex * self.flex.ntc_capex_scale, rate, link.lifetime)
                cols = []
                for year in inst.years:
                    cost = self.df[year] * payment
                    col = self.column(("y", link.from_node, link.to_node, year), cost=cost)
                    self.ic[col] = cost
                    cols.append(col)
                self.y[link.label] = cols
                self._irreversible("y", (link.from_node, link.to_node), cols)
            if self.options.symmetric_ntc:
                for link in inst.interconnectors:
                    back = f"{link.to_node}>{link.from_node}"
                    if link.label < back and link.label in self.y and back in self.y:
                        for year, a, b in zip(inst.years, self.y[link.label], self.y[back]):
                            self.row("ntc_sym", (link.from_node, link.to_node, year), [a, b], [1.0, -1.0], 0.0, 0.0)

    def _present(self, tech: Technology, node: Node) -> bool:
        if (tech.id, node.id) in self.x or (tech.id, node.id) in self.z:
            return True
        if tech.kind is TechnologyKind.INTERMITTENT_RES:
            index = self.instance.scenarios.index
            if tech.id not in index.res_techs:
                return False
            n = index.nodes.index(node.id)
            i = index.res_techs.index(tech.id)
            return any(np.any(s.res_capacity[n, i] > 0) for s in self.instance.scenarios.scenarios)
        return any(node.capacity(tech.id, year) > 0 for year in self.instance.years)

    def _capped(self, tag: str, index: tuple, col: int, factor: float, existing: float, investment: Optional[int]):
        """`v <= factor * (existing + investment)` as a bound or a row."""
        if investment is None:
            self.col_upper[col] = max(factor * existing, 0.0)
        else:
            self.row(tag, index, [col, investment], [1.0, -factor], -np.inf, factor * existing)

    def scenario(self, s_pos: int):
        inst = self.instance
        scenario = inst.scenarios.scenarios[s_pos]
        sid = scenario.id
        oc_terms: list[tuple[int, float]] = []
        for y_pos, year in enumerate(inst.years):
            df = self.df[year]
            balance: dict[tuple[str, int], list[tuple[int, float]]] = {}
            for node in inst.nodes:
                for tech in inst.technologies:
                    if not self._present(tech, node):
                        continue
                    self._technology(scenario, sid, tech, node, year, y_pos, df, balance, oc_terms)
                self._demand_side(scenario, sid, node, year, df, balance, oc_terms)
            self._flows(sid, year, y_pos, balance)
            for node in inst.nodes:
                for t, hour in enumerate(inst.hours):
                    terms = balance.get((node.id, t), [])
                    demand = scenario.demand_at(node.id, year, t)
                    self.row(
                        "balance", (node.id, hour.label, year, sid),
                        [col for col, _ in terms], [coef for _, coef in terms],
                        demand, demand,
                    )
        return oc_terms

    def _technology(self, scenario, sid, tech, node, year, y_pos, df, balance, oc_terms):
        inst = self.instance
        af = inst.availability(tech, node)
        if tech.kind is TechnologyKind.INTERMITTENT_RES:
            existing = scenario.res_capacity_at(node.id, tech.id, year)
        else:
            existing = node.capacity(tech.id, year)
        if tech.is_psp():
            investment = self.z.get((tech.id, node.id))
        else:
            investment = self.x.get((tech.id, node.id))
        inv = investment[y_pos] if investment is not None else None
        vc = marginal_cost(tech, scenario.fuel_price_at(tech.fuel, year), scenario.co2_price_at(year))

        gen = []
        for t, hour in enumerate(inst.hours):
            index = (tech.id, node.id, hour.label, year, sid)
            col = self.column(("g", *index))
            self._capped("gen_cap", index, col, af[t], existing, inv)
            balance.setdefault((node.id, t), []).append((col, 1.0))
            if vc != 0:
                oc_terms.append((col, df * self.weights[t] * vc))
            gen.append(col)

        if tech.is_psp():
            cpf = tech.capacity_power_factor or self.options.capacity_power_factor
            pump, level = [], []
            for t, hour in enumerate(inst.hours):
                index = (tech.id, node.id, hour.label, year, sid)
                col = self.column(("pump", *index))
                self._capped("pump_cap", index, col, af[t], existing, inv)
                balance.setdefault((node.id, t), []).append((col, -1.0))
                pump.append(col)
                col = self.column(("sl", *index))
                self._capped("storage_cap", index, col, cpf, existing, inv)
                level.append(col)
            for t, hour in enumerate(inst.hours):
                cols = [level[t], pump[t], gen[t]]
                vals = [1.0, -tech.efficiency, 1.0]
                if t > 0 or self.options.storage_cyclic:
                    cols.append(level[t - 1])
                    vals.append(-1.0)
                self.row("storage", (tech.id, node.id, hour.label, year, sid), cols, vals, 0.0, 0.0)

        if tech.kind is TechnologyKind.HYDRO_RESERVOIR:
            budgets = node.hydro_budget.get(tech.id, {})
            for month, budget in sorted(budgets.items()):
                hours = [t for t, hour in enumerate(inst.hours) if hour.month == month]
                if len(hours) == 0:
                    continue
                self.row(
                    "hydro_budget", (tech.id, node.id, month, year, sid),
                    [gen[t] for t in hours], [self.weights[t] for t in hours],
                    -np.inf, existing * budget,
                )

    def _demand_side(self, scenario, sid, node, year, df, balance, oc_terms):
        for t, hour in enumerate(self.instance.hours):
            demand = scenario.demand_at(node.id, year, t)
            if self.order.enabled:
                for step in self.order.node_steps(node.id):
                    col = self.column(
                        ("shed", step.sector, node.id, hour.label, year, sid),
                        upper=shed_cap(self.order, node.id, step.sector, demand),
                    )
                    balance.setdefault((node.id, t), []).append((col, 1.0))
                    oc_terms.append((col, df * self.weights[t] * step.vola))
            else:
                col = self.column(("lost", node.id, hour.label, year, sid), upper=demand)
                balance.setdefault((node.id, t), []).append((col, 1.0))
                oc_terms.append((col, df * self.weights[t] * self.options.lost_load_penalty))

    def _flows(self, sid, year, y_pos, balance):
        for link in self.instance.interconnectors:
            expansion = self.y.get(link.label)
            inv = expansion[y_pos] if expansion is not None else None
            if inv is None and link.capacity(year) <= 0:
                continue
            for t, hour in enumerate(self.instance.hours):
                index = (link.from_node, link.to_node, hour.label, year, sid)
                col = self.column(("flow", *index))
                self._capped("flow_cap", index, col, 1.0, link.capacity(year), inv)
                balance.setdefault((link.from_node, t), []).append((col, -1.0))
                balance.setdefault((link.to_node, t), []).append((col, 1.0))

    def build(self) -> PlanProgram:
        inst = self.instance
        ids = inst.scenarios.ids
        probabilities = inst.scenarios.probabilities
        omega = self.risk.omega
        self.first_stage()
        weight = (1 - omega) if self.options.risk_rows else 1.0
        oc_cols = [
            self.column(("oc", sid), cost=weight * p)
            for sid, p in zip(ids, probabilities)
        ]
        if self.options.risk_rows:
            add_risk_rows(self, oc_cols, ids, probabilities, self.risk.alpha, omega)

        for s_pos, sid in enumerate(ids):
            terms = self.scenario(s_pos)
            self.row(
                "oc_def", (sid,),
                [oc_cols[s_pos], *(col for col, _ in terms)],
                [1.0, *(-coef for _, coef in terms)],
                0.0, 0.0,
            )
            self.oc_terms.extend((s_pos, col, coef) for col, coef in terms)

        parts = self.parts()
        n = parts["matrix"].shape[1]
        operating = sparse.csr_matrix(
            (
                [coef for _, _, coef in self.oc_terms],
                ([s for s, _, _ in self.oc_terms], [col for _, col, _ in self.oc_terms]),
            ),
            shape=(len(ids), n),
        )
        investment_costs = np.zeros(n)
        for col, cost in self.ic.items():
            investment_costs[col] = cost
        logger.debug(
            f"Program of {inst.name} at omega {omega} with {self.flex.name}: "
            f"{len(parts['row_names'])} rows, {n} columns, {parts['matrix'].nnz} nonzeros")
        return PlanProgram(
            name=f"{inst.name}-{self.flex.name}-{omega:g}",
            catalog=self.catalog,
            scenario_ids=tuple(ids),
            probabilities=probabilities,
            omega=omega,
            alpha=self.risk.alpha,
            operating_costs=operating,
            investment_costs=investment_costs,
            investment_caps=dict(self.caps),
            hour_labels=tuple(hour.label for hour in inst.hours),
            hour_weights=self.weights,
            risk_rows=self.options.risk_rows,
            **parts,
        )


def build(
    instance: PlanningInstance,
    risk: RiskSettings,
    flex: FlexibilitySettings,
    options: Optional[ModelOptions] = None,
) -> PlanProgram:
    """Builds the deterministic equivalent of the instance."""
    options = options or ModelOptions()
    problems = instance.unresolved_references()
    if len(problems) > 0:
        raise ModelBuildError("; ".join(problems))
    if not options.risk_rows and risk.omega > 0:
        raise ModelBuildError("a program without risk rows requires omega = 0")
    return _PlanBuilder(instance, risk, flex, options).build()


def cvar_program(costs: Sequence[float], probabilities: Sequence[float], alpha: float) -> LinearProgram:
    """
    The risk rows of the planning program around fixed scenario costs. The
    optimal objective is the CVaR of the cost distribution.
    """
    builder = _Builder()
    ids = [f"s{i}" for i in range(len(costs))]
    oc_cols = [
        builder.column(("oc", sid), lower=float(cost), upper=float(cost))
        for sid, cost in zip(ids, costs)
    ]
    add_risk_rows(builder, oc_cols, ids, np.asarray(probabilities, dtype=float), alpha, 1.0)
    return LinearProgram(name="cvar", **builder.parts())


def _relative_violation(lp: LinearProgram, primal: np.ndarray) -> tuple[float, str]:
    activity = lp.matrix @ primal
    magnitude = 1 + abs(lp.matrix) @ np.abs(primal)
    lower = np.where(np.isfinite(lp.row_lower), lp.row_lower, activity)
    upper = np.where(np.isfinite(lp.row_upper), lp.row_upper, activity)
    worst = np.maximum(lower - activity, activity - upper) / (magnitude + np.abs(lower) + np.abs(upper))
    if worst.size == 0:
        return 0.0, ""
    i = int(np.argmax(worst))
    return float(worst[i]), lp.row_names[i]


def extract(
    lp: PlanProgram,
    primal: np.ndarray,
    duals: Optional[np.ndarray] = None,
    status: SolveStatus = SolveStatus.OPTIMAL,
) -> PlanSolution:
    """
    Interprets a primal vector. Checks that it satisfies the program and that
    the scenario costs recomputed from the dispatch match the cost columns.
    """
    primal = np.asarray(primal, dtype=float)
    violation, row = _relative_violation(lp, primal)
    if violation > INTEGRITY_TOL:
        raise IntegrityError(f"row {row} is violated by {violation:.3g} (relative)")
    col_violation = max(
        float(np.max(lp.col_lower - primal, initial=0.0)),
        float(np.max(primal - lp.col_upper, initial=0.0)),
    )
    if col_violation > INTEGRITY_TOL * max(1.0, float(np.abs(primal).max(initial=0.0))):
        raise IntegrityError(f"column bounds are violated by {col_violation:.3g}")

    catalog = lp.catalog
    oc = np.array([primal[catalog[("oc", sid)]] for sid in lp.scenario_ids])
    recomputed = lp.operating_costs @ primal
    mismatch = np.abs(recomputed - oc) / np.maximum(1.0, np.abs(oc))
    if mismatch.size > 0 and mismatch.max() > INTEGRITY_TOL:
        s = lp.scenario_ids[int(np.argmax(mismatch))]
        raise IntegrityError(f"operating cost of scenario {s} does not match its dispatch")

    zeta = excess = cvar = None
    if lp.risk_rows:
        zeta = float(primal[catalog[("zeta",)]])
        excess = np.array([primal[catalog[("a", sid)]] for sid in lp.scenario_ids])
        cvar = float(primal[catalog[("cvar",)]])

    investments = []
    for key, col in catalog.index.items():
        kind = key[0]
        if kind == "x":
            investments.append(Investment(kind="generation", asset=key[1], node=key[2], year=key[3], mw=primal[col]))
        elif kind == "z":
            investments.append(Investment(kind="psp", asset=key[1], node=key[2], year=key[3], mw=primal[col]))
        elif kind == "y":
            investments.append(Investment(kind="ntc", asset="ntc", node=key[1], node2=key[2], year=key[3], mw=primal[col]))

    probability = dict(zip(lp.scenario_ids, lp.probabilities))
    weights = dict(zip(lp.hour_labels, lp.hour_weights))
    shed: dict[tuple[str, str, int], float] = {}
    lost: dict[tuple[str, int], float] = {}
    for key, col in catalog.index.items():
        if key[0] == "shed":
            _, sector, node, hour, year, sid = key
            target = (node, sector, year)
            shed[target] = shed.get(target, 0.0) + probability[sid] * weights[hour] * primal[col]
        elif key[0] == "lost":
            _, node, hour, year, sid = key
            lost[(node, year)] = lost.get((node, year), 0.0) + probability[sid] * weights[hour] * primal[col]
    lost_load = tuple(
        SheddingRecord(node=node, sector="lost_load", year=year, mwh=value)
        for (node, year), value in lost.items()
    )
    if sum(record.mwh for record in lost_load) > INTEGRITY_TOL:
        logger.warning(f"{lp.name} uses lost load, expected {sum(r.mwh for r in lost_load):.6g} MWh")

    return PlanSolution(
        status=status,
        objective=lp.evaluate(primal),
        ic=float(lp.investment_costs @ primal),
        oc=oc,
        scenario_ids=lp.scenario_ids,
        probabilities=lp.probabilities,
        expected_oc=float(lp.probabilities @ oc),
        omega=lp.omega,
        alpha=lp.alpha,
        zeta=zeta,
        excess=excess,
        cvar=cvar,
        investments=tuple(investments),
        shedding=tuple(
            SheddingRecord(node=node, sector=sector, year=year, mwh=value)
            for (node, sector, year), value in shed.items()
        ),
        lost_load=lost_load,
        primal=primal,
        duals=duals,
        catalog=catalog,
    )


def fix_first_stage(lp: PlanProgram, investments: Mapping[Union[Key, str], float], tol: float = 1e-6) -> PlanProgram:
    """
    Pins investment columns to the given values. Keys are catalog keys or
    column names.
    """
    by_name = {name: col for col, name in enumerate(lp.col_names)}
    lower = lp.col_lower.copy()
    upper = lp.col_upper.copy()
    for key, value in investments.items():
        col = by_name.get(key) if isinstance(key, str) else lp.catalog.get(key)
        if col is None or lp.catalog.keys[col][0] not in FIRST_STAGE_KINDS:
            raise ModelBuildError(f"{key} is no investment column of {lp.name}")
        cap = min(lp.col_upper[col], lp.investment_caps.get(col, np.inf))
        if value < lp.col_lower[col] - tol or value > cap + tol * max(1.0, abs(cap)):
            raise ModelBuildError(
                f"{lp.col_names[col]} = {value} lies outside of [{lp.col_lower[col]}, {cap}]")
        value = float(np.clip(value, lp.col_lower[col], cap))
        lower[col] = value
        upper[col] = value
    return lp.model_copy(update={"col_lower": lower, "col_upper": upper})


def solve_program(lp: PlanProgram, solve_options: Optional[SolveOptions] = None) -> PlanSolution:
    report = solve(lp, solve_options)
    if not report.optimal:
        raise SolveFailedError(lp.name, report.status, report.message)
    return extract(lp, report.primal, report.duals, report.status)


def solve_plan(
    instance: PlanningInstance,
    risk: RiskSettings,
    flex: FlexibilitySettings,
    options: Optional[ModelOptions] = None,
    solve_options: Optional[SolveOptions] = None,
) -> PlanSolution:
    """Builds, solves and interprets the program."""
    return solve_program(build(instance, risk, flex, options), solve_options)


def evaluate_fixed(
    instance: PlanningInstance,
    risk: RiskSettings,
    flex: FlexibilitySettings,
    investments: Mapping[Union[Key, str], float],
    options: Optional[ModelOptions] = None,
    solve_options: Optional[SolveOptions] = None,
) -> PlanSolution:
    """Solves the recourse problem of a given investment plan."""
    lp = fix_first_stage(build(instance, risk, flex, options), investments)
    return solve_program(lp, solve_options)


class StochasticValue(BaseModel):
    stochastic: PlanSolution
    expected_value_plan: PlanSolution
    """The first stage of the expected-value problem evaluated in all scenarios."""
    vss: float

    model_config = ConfigDict(arbitrary_types_allowed=True)


def value_of_stochastic_solution(
    instance: PlanningInstance,
    risk: RiskSettings,
    flex: FlexibilitySettings,
    options: Optional[ModelOptions] = None,
    solve_options: Optional[SolveOptions] = None,
) -> StochasticValue:
    """
    Cost of planning for the expected-value scenario only: the difference of
    the objective with the expected-value plan pinned and the stochastic
    optimum. Nonnegative up to solver tolerances.
    """
    stochastic = solve_plan(instance, risk, flex, options, solve_options)
    ev_instance = instance.with_scenarios(single_scenario_set(instance.expected_value_scenario()))
    ev = solve_plan(ev_instance, risk, flex, options, solve_options)
    pinned = evaluate_fixed(instance, risk, flex, ev.first_stage(), options, solve_options)
    vss = pinned.objective - stochastic.objective
    logger.info(f"Value of the stochastic solution of {instance.name}: {vss:.6g}")
    return StochasticValue(stochastic=stochastic, expected_value_plan=pinned, vss=vss)
