"""
Shared fixtures. The analytic instances have a single year without
discounting and straight-line annuities, so their optima can be derived by
hand.
"""

from typing import Optional, Sequence

import numpy as np
import pytest

from rapo.core import (
    FinanceSettings,
    Hour,
    Interconnector,
    Node,
    Technology,
    TechnologyKind,
)
from rapo.instance import PlanningInstance, bundled_instance_path, load_instance
from rapo.scenario import Scenario, ScenarioIndex, ScenarioSet


YEAR = 2030
OMEGAS = (0.0, 0.2, 0.4, 0.6, 0.8, 0.99)


def analytic_instance(
    name: str,
    technologies: Sequence[Technology],
    nodes: Sequence[Node],
    hours: Sequence[Hour],
    demand: Sequence[dict[str, Sequence[float]]],
    fuel_price: Optional[Sequence[dict[str, float]]] = None,
    co2_price: Optional[Sequence[float]] = None,
    interconnectors: Sequence[Interconnector] = (),
    sectors: Sequence[str] = (),
) -> PlanningInstance:
    """
    One equiprobable scenario per entry of `demand`, which maps every node to
    its hourly demand.
    """
    count = len(demand)
    fuel_price = fuel_price or [{} for _ in range(count)]
    co2_price = co2_price or [0.0] * count
    node_ids = tuple(node.id for node in nodes)
    res = tuple(tech.id for tech in technologies if tech.kind is TechnologyKind.INTERMITTENT_RES)
    fuels = tuple(sorted(fuel_price[0]))
    index = ScenarioIndex(nodes=node_ids, res_techs=res, fuels=fuels, years=(YEAR,), hours=len(hours))
    scenarios = [
        Scenario(
            id=f"s{i + 1}",
            index=index,
            demand=np.array([[list(demand[i][node])] for node in node_ids], dtype=float),
            res_capacity=np.zeros((len(node_ids), len(res), 1)),
            fuel_price=np.array([[fuel_price[i][fuel]] for fuel in fuels], dtype=float).reshape(len(fuels), 1),
            co2_price=np.array([co2_price[i]], dtype=float),
        )
        for i in range(count)
    ]
    return PlanningInstance(
        name=name,
        years=(YEAR,),
        sectors=tuple(sectors),
        hours=tuple(hours),
        technologies=tuple(technologies),
        nodes=tuple(nodes),
        interconnectors=tuple(interconnectors),
        finance=FinanceSettings(interest_rate=0.0, discount_rate=0.0, base_year=YEAR),
        scenarios=ScenarioSet.uniform(scenarios),
    )


def hedging_instance() -> PlanningInstance:
    """
    Coal pays the CO2 price of the scenario, nuclear costs 28 €/MW more to
    build and runs at 5 €/MWh. Expected savings of nuclear are 26 €/MW, 39 €/MW
    in the worst scenario, and at most 60 MW of nuclear can be built.
    """
    coal = Technology(
        id="coal", kind=TechnologyKind.THERMAL, fuel="coal", emission_factor=1.0,
        capex=10.0, investable=True)
    nuclear = Technology(
        id="nuclear", kind=TechnologyKind.THERMAL, marginal_cost=5.0, capex=38.0, investable=True)
    node = Node(id="N", max_investment={"coal": 1000.0, "nuclear": 60.0})
    return analytic_instance(
        "hedging",
        [coal, nuclear],
        [node],
        [Hour(label="h1", weight=1.0)],
        demand=[{"N": [160.0]}] * 4,
        fuel_price=[{"coal": 0.0}] * 4,
        co2_price=[44.0, 36.0, 24.0, 20.0],
    )


def demand_response_instance() -> PlanningInstance:
    """
    Existing lignite covers the base hour, the peak hour is met by gas
    investment or by shedding. The first scenario is dominated by its lignite
    price and forms the whole CVaR tail.
    """
    lignite = Technology(id="lignite", kind=TechnologyKind.THERMAL, fuel="lignite", variable_om=10.0)
    gas = Technology(id="gas", kind=TechnologyKind.THERMAL, marginal_cost=400.0, capex=42.0, investable=True)
    node = Node(
        id="N",
        existing_capacity={"lignite": {YEAR: 100.0}},
        max_investment={"gas": 500.0},
        sector_shares={"A": 0.5, "B": 0.5},
        vola={"A": 1000.0, "B": 4000.0},
    )
    return analytic_instance(
        "demand-response",
        [lignite, gas],
        [node],
        [Hour(label="base", weight=200.0), Hour(label="peak", weight=1.0)],
        demand=[{"N": [100.0, peak]} for peak in (100.0, 120.0, 140.0, 160.0)],
        fuel_price=[{"lignite": price} for price in (290.0, 50.0, 20.0, 10.0)],
        sectors=("A", "B"),
    )


def ntc_instance() -> PlanningInstance:
    """
    Cheap coal in B can replace expensive gas in A only in the first
    scenario, which also has the highest cost.
    """
    gas = Technology(id="gas", kind=TechnologyKind.THERMAL, marginal_cost=500.0)
    coal = Technology(id="coal", kind=TechnologyKind.THERMAL, marginal_cost=50.0)
    a = Node(id="A", existing_capacity={"gas": {YEAR: 200.0}})
    b = Node(id="B", existing_capacity={"coal": {YEAR: 150.0}})
    link = Interconnector(**{"from": "B", "to": "A", "capex": 200.0, "lifetime": 1, "expandable": True})
    return analytic_instance(
        "ntc",
        [gas, coal],
        [a, b],
        [Hour(label="h1", weight=1.0)],
        demand=[
            {"A": [150.0], "B": [50.0]},
            {"A": [40.0], "B": [150.0]},
            {"A": [35.0], "B": [150.0]},
            {"A": [30.0], "B": [150.0]},
        ],
        interconnectors=[link],
    )


def psp_instance() -> PlanningInstance:
    """
    Off-peak coal at 10 €/MWh against peak gas at 100 €/MWh. One MW of pumped
    storage earns 0.8 * 100 - 10 = 70 € and can use at most 50 MW of spare coal.
    """
    coal = Technology(id="coal", kind=TechnologyKind.THERMAL, marginal_cost=10.0)
    gas = Technology(id="gas", kind=TechnologyKind.THERMAL, marginal_cost=100.0)
    psp = Technology(id="psp", kind=TechnologyKind.PSP, efficiency=0.8, capex=100.0, investable=True)
    node = Node(
        id="N",
        existing_capacity={"coal": {YEAR: 100.0}, "gas": {YEAR: 200.0}},
        max_investment={"psp": 80.0},
    )
    return analytic_instance(
        "psp",
        [coal, gas, psp],
        [node],
        [Hour(label="off-peak", weight=1.0), Hour(label="peak", weight=1.0)],
        demand=[{"N": [50.0, 150.0]}],
    )


@pytest.fixture
def hedging() -> PlanningInstance:
    return hedging_instance()


@pytest.fixture
def demand_response() -> PlanningInstance:
    return demand_response_instance()


@pytest.fixture
def ntc() -> PlanningInstance:
    return ntc_instance()


@pytest.fixture
def psp() -> PlanningInstance:
    return psp_instance()


@pytest.fixture(scope="session")
def toy() -> PlanningInstance:
    return load_instance(bundled_instance_path())
