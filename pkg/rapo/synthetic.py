"""
Generator of small self-contained instances. Three anchor scenarios mimic
the structure of the published grid development scenarios: the anchor with
the highest CO2 price has the lowest demand and vice versa.
"""

from typing import Optional, Sequence

import numpy as np

from rapo.config import settings
from rapo.core import DomainError, TechnologyKind
from rapo.instance import (
    SCHEMA_VERSION,
    FinanceRecord,
    HourRecord,
    InstanceDocument,
    InterconnectorRecord,
    NodeRecord,
    PlanningInstance,
    ScenarioRecord,
    ScenariosRecord,
    TechnologyRecord,
    instance_from_document,
)
from rapo.log import logger


MAX_NODES = 10
MAX_HOURS = 48

YEARS = (2020, 2025, 2030)
FIRST_STAGE_YEARS = (2020,)
SECTORS = ("industry", "commerce", "households")
NODE_IDS = ("DE", "FR", "NL", "BE", "AT", "CH", "PL", "CZ", "DK", "NO")

CATALOG: tuple[TechnologyRecord, ...] = (
    TechnologyRecord(
        id="lignite", kind=TechnologyKind.THERMAL, fuel="lignite", efficiency=0.4,
        emission_factor=0.36, capex=1_500_000.0, lifetime=40, investable=True,
        availability=0.85, variable_om=2.0),
    TechnologyRecord(
        id="ocgt", kind=TechnologyKind.THERMAL, fuel="gas", efficiency=0.38,
        emission_factor=0.2, capex=400_000.0, lifetime=30, investable=True,
        availability=0.95, variable_om=3.0),
    TechnologyRecord(id="wind", kind=TechnologyKind.INTERMITTENT_RES, lifetime=25),
    TechnologyRecord(
        id="nuclear", kind=TechnologyKind.THERMAL, fuel="uranium", efficiency=0.33,
        capex=5_000_000.0, lifetime=60, investable=True, availability=0.9,
        variable_om=8.0),
    TechnologyRecord(
        id="psp", kind=TechnologyKind.PSP, efficiency=0.75, capex=1_000_000.0,
        lifetime=50, investable=True),
    TechnologyRecord(
        id="hydro", kind=TechnologyKind.HYDRO_RESERVOIR, lifetime=80, variable_om=1.0),
)
"""Technologies in the order the `techs` knob picks them."""

FUEL_PRICES: dict[str, float] = {"lignite": 4.0, "gas": 20.0, "uranium": 3.0}
"""€/MWh of fuel in the first year."""

ANCHORS: dict[str, dict[str, float]] = {
    "DG": {"co2": 50.0, "demand": 1.04, "res": 1.5},
    "ST": {"co2": 89.9, "demand": 0.97, "res": 1.7},
    "EUCO": {"co2": 28.8, "demand": 1.10, "res": 1.3},
}
"""CO2 price of the last year and demand and RES growth until then."""

FIRST_CO2_PRICE = 25.0
VOLA_RANGES: dict[str, tuple[float, float]] = {
    "industry": (2_000.0, 6_000.0),
    "commerce": (5_000.0, 12_000.0),
    "households": (8_000.0, 16_000.0),
}


def _check_knobs(nodes: int, hours: int, techs: int):
    if not 1 <= nodes <= MAX_NODES:
        raise DomainError(f"nodes must be in 1..{MAX_NODES}, got {nodes}")
    if not 1 <= hours <= MAX_HOURS:
        raise DomainError(f"hours must be in 1..{MAX_HOURS}, got {hours}")
    if not 1 <= techs <= len(CATALOG):
        raise DomainError(f"techs must be in 1..{len(CATALOG)}, got {techs}")


def _shares(rng: np.random.Generator) -> dict[str, float]:
    raw = rng.dirichlet(np.full(len(SECTORS), 4.0))
    rounded = [round(float(value), 6) for value in raw[:-1]]
    return dict(zip(SECTORS, [*rounded, round(1 - sum(rounded), 6)]))


def _growth(value: float, factor: float, year: int) -> float:
    """Linear path from the first year value to `value * factor` in the last year."""
    share = (year - YEARS[0]) / (YEARS[-1] - YEARS[0])
    return round(value * (1 + share * (factor - 1)), 3)


def _check_correlation(tables: dict[str, ScenarioRecord]):
    last = YEARS[-1]
    co2 = {label: table.co2_price[last] for label, table in tables.items()}
    demand = {
        label: sum(sum(by_year[last]) for by_year in table.demand.values())
        for label, table in tables.items()
    }
    by_co2 = sorted(tables, key=lambda label: co2[label])
    if len(set(co2.values())) != len(co2) or len(set(demand.values())) != len(demand):
        raise DomainError("anchor CO2 prices and demands have to be pairwise different")
    if sorted(tables, key=lambda label: -demand[label]) != by_co2:
        raise DomainError("anchor demands are not anti-ordered to their CO2 prices")


def synthetic_document(
    seed: Optional[int] = None,
    nodes: int = 2,
    hours: int = 6,
    techs: int = 3,
) -> InstanceDocument:
    """Deterministic instance document for the given seed and size."""
    seed = settings.seed if seed is None else seed
    _check_knobs(nodes, hours, techs)
    rng = np.random.default_rng(seed)
    technologies = list(CATALOG[:techs])
    node_ids = NODE_IDS[:nodes]
    hour_records = [
        HourRecord(label=f"h{t:02d}", month=1 + t * 12 // hours)
        for t in range(hours)
    ]
    fuels = sorted({tech.fuel for tech in technologies if tech.fuel is not None})
    res = [tech.id for tech in technologies if tech.kind is TechnologyKind.INTERMITTENT_RES]

    peaks = {node: round(float(rng.uniform(5_000, 20_000)), 1) for node in node_ids}
    shapes = {node: rng.uniform(0.6, 1.0, hours) for node in node_ids}
    res_base = {node: round(float(rng.uniform(0.1, 0.4)) * peaks[node], 1) for node in node_ids}

    node_records = []
    for node in node_ids:
        peak = peaks[node]
        existing: dict[str, dict[int, float]] = {}
        caps: dict[str, float] = {}
        profiles: dict[str, list[float]] = {}
        budgets: dict[str, dict[int, float]] = {}
        for tech in technologies:
            if tech.kind is TechnologyKind.INTERMITTENT_RES:
                profiles[tech.id] = [round(float(v), 3) for v in rng.uniform(0.05, 0.9, hours)]
                continue
            start = round(float(rng.uniform(0.1, 0.35)) * peak, 1)
            # fleet retires linearly to half of its size
            existing[tech.id] = {year: _growth(start, 0.5, year) for year in YEARS}
            if tech.investable:
                caps[tech.id] = round(peak, 1)
            if tech.kind is TechnologyKind.HYDRO_RESERVOIR:
                budgets[tech.id] = {
                    month: round(float(rng.uniform(200, 450)), 1) for month in range(1, 13)}
        vola = {
            sector: round(float(rng.uniform(*VOLA_RANGES[sector])), 1) for sector in SECTORS}
        node_records.append(NodeRecord(
            id=node,
            existing_capacity=existing,
            max_investment=caps,
            sector_shares=_shares(rng),
            vola=vola,
            profiles=profiles,
            hydro_budget=budgets,
        ))

    links = []
    for a, b in zip(node_ids, node_ids[1:]):
        ntc = round(float(rng.uniform(500, 2_000)), 1)
        for src, dst in ((a, b), (b, a)):
            links.append(InterconnectorRecord(**{
                "from": src, "to": dst,
                "ntc": {year: ntc for year in YEARS},
                "capex": 800_000.0, "lifetime": 50, "expandable": True,
            }))

    def table(years: Sequence[int], co2: float, demand: float, growth: float) -> ScenarioRecord:
        return ScenarioRecord(
            demand={
                node: {
                    year: [round(float(v), 1) for v in _growth(1.0, demand, year) * peaks[node] * shapes[node]]
                    for year in years
                }
                for node in node_ids
            },
            res_capacity={
                node: {tech: {year: _growth(res_base[node], growth, year) for year in years} for tech in res}
                for node in node_ids
            },
            fuel_price={
                fuel: {year: _growth(FUEL_PRICES[fuel], growth, year) for year in years}
                for fuel in fuels
            },
            co2_price={year: _growth(FIRST_CO2_PRICE, co2 / FIRST_CO2_PRICE, year) for year in years},
        )

    uncertain = [year for year in YEARS if year not in FIRST_STAGE_YEARS]
    anchors = {
        label: table(uncertain, params["co2"], params["demand"], params["res"])
        for label, params in ANCHORS.items()
    }
    _check_correlation(anchors)
    logger.debug(f"Synthetic instance with seed {seed}: {nodes} nodes, {hours} hours, {techs} technologies")
    return InstanceDocument(
        schema_version=SCHEMA_VERSION,
        name=f"synthetic-{seed}",
        years=list(YEARS),
        first_stage_years=list(FIRST_STAGE_YEARS),
        sectors=list(SECTORS),
        finance=FinanceRecord(interest_rate=settings.interest_rate, discount_rate=settings.discount_rate),
        hours=hour_records,
        technologies=technologies,
        nodes=node_records,
        interconnectors=links,
        scenarios=ScenariosRecord(
            base=table(FIRST_STAGE_YEARS, FIRST_CO2_PRICE, 1.0, 1.0),
            anchors=anchors,
        ),
    )


def make_synthetic(
    seed: Optional[int] = None,
    nodes: int = 2,
    hours: int = 6,
    techs: int = 3,
    factors: Optional[Sequence[float]] = None,
) -> PlanningInstance:
    return instance_from_document(synthetic_document(seed, nodes, hours, techs), factors)
