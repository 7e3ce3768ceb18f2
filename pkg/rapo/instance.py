"""
The planning instance and its TOML file format. Loading validates the whole
document and reports every violation with a machine-readable code before any
domain object is built.
"""

import enum
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
import pydantic
import tomli_w
from pydantic import BaseModel, ConfigDict, Field

from rapo.config import settings
from rapo.core import (
    SHARE_TOLERANCE,
    FinanceSettings,
    Hour,
    Interconnector,
    Node,
    Technology,
    TechnologyKind,
)
from rapo.log import logger
from rapo.scenario import (
    AnchorSet,
    Scenario,
    ScenarioIndex,
    ScenarioSet,
    build_set,
    expected_value,
)


SCHEMA_VERSION = 1
HOURS_PER_YEAR = 8760.0


class IssueCode(str, enum.Enum):
    SCHEMA = "SCHEMA"
    SCHEMA_VERSION = "SCHEMA_VERSION"
    DUPLICATE_ID = "DUPLICATE_ID"
    UNRESOLVED_REF = "UNRESOLVED_REF"
    SHARE_SUM = "SHARE_SUM"
    NEGATIVE_VALUE = "NEGATIVE_VALUE"
    HOUR_WEIGHT = "HOUR_WEIGHT"
    PROFILE_LENGTH = "PROFILE_LENGTH"
    INDEX_MISMATCH = "INDEX_MISMATCH"
    ANCHOR_COUNT = "ANCHOR_COUNT"
    YEAR_ORDER = "YEAR_ORDER"
    RANGE = "RANGE"


class ValidationIssue(BaseModel):
    code: IssueCode
    path: str
    """Location of the violation within the document."""
    message: str

    model_config = ConfigDict(frozen=True)

    def __str__(self) -> str:
        return f"[{self.code.value}] {self.path}: {self.message}"


class InstanceValidationError(ValueError):
    """
    Raised when an instance document violates the schema or the domain
    rules. Holds all violations found, not only the first one.
    """

    def __init__(self, issues: list[ValidationIssue]):
        self.issues = issues
        summary = "\n".join(f"  {issue}" for issue in issues)
        super().__init__(f"instance has {len(issues)} validation issues:\n{summary}")

    @property
    def codes(self) -> set[IssueCode]:
        return {issue.code for issue in self.issues}


class PlanningInstance(BaseModel):
    """Complete and immutable description of a planning problem."""
    name: str
    years: tuple[int, ...]
    first_stage_years: tuple[int, ...] = ()
    sectors: tuple[str, ...] = ()
    hours: tuple[Hour, ...]
    technologies: tuple[Technology, ...]
    nodes: tuple[Node, ...]
    interconnectors: tuple[Interconnector, ...] = ()
    finance: FinanceSettings
    scenarios: ScenarioSet
    anchors: Optional[AnchorSet] = None
    first_year_investable: Optional[tuple[str, ...]] = None
    """
    Technologies which may be invested in during the first modelled year. None
    lifts the restriction.
    """

    model_config = ConfigDict(frozen=True)

    def tech(self, tech_id: str) -> Technology:
        for tech in self.technologies:
            if tech.id == tech_id:
                return tech
        raise KeyError(f"unknown technology {tech_id}")

    def node(self, node_id: str) -> Node:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(f"unknown node {node_id}")

    @property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(node.id for node in self.nodes)

    @property
    def res_techs(self) -> tuple[str, ...]:
        return tuple(
            tech.id for tech in self.technologies
            if tech.kind is TechnologyKind.INTERMITTENT_RES
        )

    def hour_weights(self, override: Optional[float] = None) -> np.ndarray:
        """Annual hours represented by each representative hour."""
        if override is not None:
            return np.full(len(self.hours), float(override))
        default = HOURS_PER_YEAR / len(self.hours)
        return np.array([
            hour.weight if hour.weight is not None else default
            for hour in self.hours
        ])

    def availability(self, tech: Technology, node: Node) -> np.ndarray:
        """Hourly availability factor, the node profile taking precedence."""
        profile = node.profiles.get(tech.id)
        if profile is not None:
            return np.asarray(profile, dtype=float)
        return np.full(len(self.hours), tech.availability)

    def expected_value_scenario(self) -> Scenario:
        """
        The expected-value scenario: the mean of the anchors if present,
        otherwise the probability weighted mean of the scenario set.
        """
        if self.anchors is not None:
            return expected_value(self.anchors).model_copy(update={"probability": 1.0})
        members = self.scenarios.scenarios
        weights = self.scenarios.probabilities
        data = {
            name: sum(w * getattr(s, name) for w, s in zip(weights, members))
            for name in ("demand", "res_capacity", "fuel_price", "co2_price")
        }
        return Scenario(id="EV", probability=1.0, index=self.scenarios.index, **data)

    def with_scenarios(self, scenarios: ScenarioSet) -> "PlanningInstance":
        return self.model_copy(update={"scenarios": scenarios})

    def unresolved_references(self) -> list[str]:
        """Cross-references that point nowhere. Empty for a consistent instance."""
        techs = {tech.id for tech in self.technologies}
        nodes = set(self.node_ids)
        rsl = []
        for node in self.nodes:
            for tech in [*node.existing_capacity, *node.max_investment, *node.profiles]:
                if tech not in techs:
                    rsl.append(f"node {node.id} refers to unknown technology {tech}")
            for sector in node.sector_shares:
                if sector not in self.sectors:
                    rsl.append(f"node {node.id} refers to unknown sector {sector}")
        for link in self.interconnectors:
            for node_id in (link.from_node, link.to_node):
                if node_id not in nodes:
                    rsl.append(f"interconnector {link.label} refers to unknown node {node_id}")
        index = self.scenarios.index
        if index.nodes != self.node_ids or index.years != self.years or index.hours != len(self.hours):
            rsl.append("scenario data does not match the nodes, years or hours of the instance")
        return rsl


class HourRecord(BaseModel):
    label: str
    weight: Optional[float] = None
    month: int = 1

    model_config = ConfigDict(extra="forbid")


class TechnologyRecord(BaseModel):
    id: str
    kind: TechnologyKind
    fuel: Optional[str] = None
    efficiency: float = 1.0
    emission_factor: float = 0.0
    capex: float = 0.0
    lifetime: int = 1
    investable: bool = False
    availability: float = 1.0
    variable_om: float = 0.0
    marginal_cost: Optional[float] = None
    capacity_power_factor: Optional[float] = None

    model_config = ConfigDict(extra="forbid")


class NodeRecord(BaseModel):
    id: str
    existing_capacity: dict[str, dict[int, float]] = {}
    max_investment: dict[str, float] = {}
    max_investment_by_year: dict[str, dict[int, float]] = {}
    sector_shares: dict[str, float] = {}
    vola: dict[str, float] = {}
    profiles: dict[str, list[float]] = {}
    hydro_budget: dict[str, dict[int, float]] = {}

    model_config = ConfigDict(extra="forbid")


class InterconnectorRecord(BaseModel):
    from_node: str = Field(alias="from")
    to_node: str = Field(alias="to")
    ntc: dict[int, float] = {}
    capex: float = 0.0
    lifetime: int = 50
    """Depreciation period of NTC expansion in years, 50 unless given."""
    expandable: bool = False

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ScenarioRecord(BaseModel):
    """Uncertain parameters of one scenario table, keyed by label and year."""
    demand: dict[str, dict[int, list[float]]] = {}
    """Hourly demand per node and year."""
    res_capacity: dict[str, dict[str, dict[int, float]]] = {}
    """Installed intermittent capacity per node, technology and year."""
    fuel_price: dict[str, dict[int, float]] = {}
    co2_price: dict[int, float] = {}

    model_config = ConfigDict(extra="forbid")


class ScenariosRecord(BaseModel):
    base: ScenarioRecord = ScenarioRecord()
    """Data of the first-stage years, shared by all scenarios."""
    anchors: dict[str, ScenarioRecord] = {}
    """Data of the uncertain years per anchor scenario."""

    model_config = ConfigDict(extra="forbid")


class FinanceRecord(BaseModel):
    interest_rate: Optional[float] = None
    discount_rate: Optional[float] = None
    base_year: Optional[int] = None

    model_config = ConfigDict(extra="forbid")


class InstanceDocument(BaseModel):
    """Structure of an instance file."""
    schema_version: int
    name: str
    years: list[int]
    first_stage_years: list[int] = []
    sectors: list[str] = []
    scenario_factors: Optional[list[float]] = None
    first_year_investable: Optional[list[str]] = None
    finance: FinanceRecord = FinanceRecord()
    hours: list[HourRecord]
    technologies: list[TechnologyRecord]
    nodes: list[NodeRecord]
    interconnectors: list[InterconnectorRecord] = []
    scenarios: ScenariosRecord

    model_config = ConfigDict(extra="forbid")

    def to_toml(self) -> str:
        return tomli_w.dumps(self.model_dump(mode="json", by_alias=True, exclude_none=True))


class _Collector:
    def __init__(self):
        self.issues: list[ValidationIssue] = []

    def add(self, code: IssueCode, path: str, message: str):
        self.issues.append(ValidationIssue(code=code, path=path, message=message))

    def duplicates(self, values: Iterable[Any], path: str, what: str):
        seen = set()
        for value in values:
            if value in seen:
                self.add(IssueCode.DUPLICATE_ID, path, f"{what} {value} is defined twice")
            seen.add(value)

    def non_negative(self, value: float, path: str):
        if value < 0:
            self.add(IssueCode.NEGATIVE_VALUE, path, f"value {value} is negative")


def _check_years(doc: InstanceDocument, col: _Collector):
    if any(a >= b for a, b in zip(doc.years, doc.years[1:])):
        col.add(IssueCode.YEAR_ORDER, "years", "years must be strictly increasing")
    if len(doc.years) == 0:
        col.add(IssueCode.YEAR_ORDER, "years", "at least one year is required")
    if doc.first_stage_years != doc.years[:len(doc.first_stage_years)]:
        col.add(
            IssueCode.YEAR_ORDER, "first_stage_years",
            "first-stage years have to be the leading years of the horizon")
    base_year = doc.finance.base_year
    if base_year is not None and len(doc.years) > 0 and base_year > doc.years[0]:
        col.add(IssueCode.YEAR_ORDER, "finance.base_year", "base year lies after the first year")
    for name in ("interest_rate", "discount_rate"):
        value = getattr(doc.finance, name)
        if value is not None and not 0 <= value < 1:
            col.add(IssueCode.RANGE, f"finance.{name}", f"{value} is not in [0, 1)")


def _check_hours(doc: InstanceDocument, col: _Collector):
    if len(doc.hours) == 0:
        col.add(IssueCode.HOUR_WEIGHT, "hours", "at least one representative hour is required")
    col.duplicates((hour.label for hour in doc.hours), "hours", "hour")
    for hour in doc.hours:
        path = f"hours[{hour.label}]"
        if hour.weight is not None and hour.weight <= 0:
            col.add(IssueCode.HOUR_WEIGHT, f"{path}.weight", "hour weights must be positive")
        if not 1 <= hour.month <= 12:
            col.add(IssueCode.RANGE, f"{path}.month", f"month {hour.month} is not in 1..12")


def _check_technologies(doc: InstanceDocument, col: _Collector):
    col.duplicates((tech.id for tech in doc.technologies), "technologies", "technology")
    for tech in doc.technologies:
        path = f"technologies[{tech.id}]"
        if not 0 < tech.efficiency <= 1:
            col.add(IssueCode.RANGE, f"{path}.efficiency", f"{tech.efficiency} is not in (0, 1]")
        col.non_negative(tech.capex, f"{path}.capex")
        col.non_negative(tech.emission_factor, f"{path}.emission_factor")
        col.non_negative(tech.variable_om, f"{path}.variable_om")
        if tech.lifetime < 1:
            col.add(IssueCode.RANGE, f"{path}.lifetime", "lifetime must be at least one year")
        if tech.investable and not tech.kind.is_investable_kind():
            col.add(IssueCode.RANGE, f"{path}.investable", f"{tech.kind.value} cannot be investable")
        if not 0 <= tech.availability <= 1:
            col.add(IssueCode.RANGE, f"{path}.availability", f"{tech.availability} is not in [0, 1]")
        if tech.capacity_power_factor is not None and tech.capacity_power_factor <= 0:
            col.add(IssueCode.RANGE, f"{path}.capacity_power_factor", "must be positive")
    techs = {tech.id for tech in doc.technologies}
    for tech in doc.first_year_investable or []:
        if tech not in techs:
            col.add(IssueCode.UNRESOLVED_REF, "first_year_investable", f"unknown technology {tech}")


def _check_nodes(doc: InstanceDocument, col: _Collector):
    techs = {tech.id: tech for tech in doc.technologies}
    years = set(doc.years)
    sectors = set(doc.sectors)
    col.duplicates(doc.sectors, "sectors", "sector")
    col.duplicates((node.id for node in doc.nodes), "nodes", "node")
    for node in doc.nodes:
        path = f"nodes[{node.id}]"
        for tech, by_year in [*node.existing_capacity.items(), *node.max_investment_by_year.items(), *node.hydro_budget.items()]:
            if tech not in techs:
                col.add(IssueCode.UNRESOLVED_REF, path, f"unknown technology {tech}")
            for value in by_year.values():
                col.non_negative(value, f"{path}.{tech}")
        for tech, by_year in [*node.existing_capacity.items(), *node.max_investment_by_year.items()]:
            for year in by_year:
                if year not in years:
                    col.add(IssueCode.UNRESOLVED_REF, f"{path}.{tech}", f"unknown year {year}")
        for tech, by_month in node.hydro_budget.items():
            for month in by_month:
                if not 1 <= month <= 12:
                    col.add(IssueCode.RANGE, f"{path}.hydro_budget.{tech}", f"month {month} is not in 1..12")
        for tech, value in node.max_investment.items():
            if tech not in techs:
                col.add(IssueCode.UNRESOLVED_REF, f"{path}.max_investment", f"unknown technology {tech}")
            col.non_negative(value, f"{path}.max_investment.{tech}")
        for tech, profile in node.profiles.items():
            if tech not in techs:
                col.add(IssueCode.UNRESOLVED_REF, f"{path}.profiles", f"unknown technology {tech}")
            if len(profile) != len(doc.hours):
                col.add(
                    IssueCode.PROFILE_LENGTH, f"{path}.profiles.{tech}",
                    f"profile has {len(profile)} values for {len(doc.hours)} hours")
            if any(not 0 <= value <= 1 for value in profile):
                col.add(IssueCode.RANGE, f"{path}.profiles.{tech}", "availabilities must be in [0, 1]")

        for sector in [*node.sector_shares, *node.vola]:
            if sector not in sectors:
                col.add(IssueCode.UNRESOLVED_REF, path, f"unknown sector {sector}")
        if len(sectors) > 0:
            total = sum(node.sector_shares.values())
            if abs(total - 1) > SHARE_TOLERANCE:
                col.add(IssueCode.SHARE_SUM, f"{path}.sector_shares", f"shares sum to {total:g}, not 1")
        for sector, share in node.sector_shares.items():
            col.non_negative(share, f"{path}.sector_shares.{sector}")
            if sector not in node.vola:
                col.add(IssueCode.UNRESOLVED_REF, f"{path}.vola", f"sector {sector} has no VoLA")
        for sector, vola in node.vola.items():
            if vola <= 0:
                col.add(IssueCode.NEGATIVE_VALUE, f"{path}.vola.{sector}", "VoLA must be positive")


def _check_interconnectors(doc: InstanceDocument, col: _Collector):
    nodes = {node.id for node in doc.nodes}
    col.duplicates(
        (f"{link.from_node}>{link.to_node}" for link in doc.interconnectors),
        "interconnectors", "interconnector")
    for link in doc.interconnectors:
        path = f"interconnectors[{link.from_node}>{link.to_node}]"
        for node in (link.from_node, link.to_node):
            if node not in nodes:
                col.add(IssueCode.UNRESOLVED_REF, path, f"unknown node {node}")
        if link.from_node == link.to_node:
            col.add(IssueCode.RANGE, path, "an interconnector needs two different nodes")
        for year, value in link.ntc.items():
            if year not in doc.years:
                col.add(IssueCode.UNRESOLVED_REF, f"{path}.ntc", f"unknown year {year}")
            col.non_negative(value, f"{path}.ntc")
        col.non_negative(link.capex, f"{path}.capex")
        if link.lifetime < 1:
            col.add(IssueCode.RANGE, f"{path}.lifetime", "lifetime must be at least one year")


def _fuels(doc: InstanceDocument) -> tuple[str, ...]:
    return tuple(sorted({
        tech.fuel for tech in doc.technologies
        if tech.fuel is not None and tech.marginal_cost is None
    }))


def _check_table(doc: InstanceDocument, table: ScenarioRecord, years: Sequence[int], path: str, col: _Collector):
    nodes = {node.id for node in doc.nodes}
    res = {
        tech.id for tech in doc.technologies
        if tech.kind is TechnologyKind.INTERMITTENT_RES
    }
    for node in [*table.demand, *table.res_capacity]:
        if node not in nodes:
            col.add(IssueCode.UNRESOLVED_REF, path, f"unknown node {node}")
    for node in sorted(nodes):
        by_year = table.demand.get(node, {})
        for year in years:
            values = by_year.get(year)
            if values is None:
                col.add(IssueCode.INDEX_MISMATCH, f"{path}.demand.{node}", f"no demand for {year}")
                continue
            if len(values) != len(doc.hours):
                col.add(
                    IssueCode.PROFILE_LENGTH, f"{path}.demand.{node}.{year}",
                    f"{len(values)} values for {len(doc.hours)} hours")
            if any(value < 0 for value in values):
                col.add(IssueCode.NEGATIVE_VALUE, f"{path}.demand.{node}.{year}", "negative demand")
    for node, by_tech in table.res_capacity.items():
        for tech, by_year in by_tech.items():
            if tech not in res:
                col.add(IssueCode.UNRESOLVED_REF, f"{path}.res_capacity.{node}", f"{tech} is no intermittent technology")
            for value in by_year.values():
                col.non_negative(value, f"{path}.res_capacity.{node}.{tech}")
    for fuel in _fuels(doc):
        by_year = table.fuel_price.get(fuel, {})
        for year in years:
            if year not in by_year:
                col.add(IssueCode.INDEX_MISMATCH, f"{path}.fuel_price.{fuel}", f"no price for {year}")
        for value in by_year.values():
            col.non_negative(value, f"{path}.fuel_price.{fuel}")
    for year in years:
        if year not in table.co2_price:
            col.add(IssueCode.INDEX_MISMATCH, f"{path}.co2_price", f"no CO2 price for {year}")
    for value in table.co2_price.values():
        col.non_negative(value, f"{path}.co2_price")


def _check_scenarios(doc: InstanceDocument, col: _Collector):
    uncertain = [year for year in doc.years if year not in doc.first_stage_years]
    if len(doc.scenarios.anchors) != 3:
        col.add(
            IssueCode.ANCHOR_COUNT, "scenarios.anchors",
            f"three anchor scenarios are required, got {len(doc.scenarios.anchors)}")
    if len(doc.first_stage_years) > 0:
        _check_table(doc, doc.scenarios.base, doc.first_stage_years, "scenarios.base", col)
    for label, table in doc.scenarios.anchors.items():
        _check_table(doc, table, uncertain, f"scenarios.anchors.{label}", col)
    factors = doc.scenario_factors
    if factors is not None and len(factors) == 0:
        col.add(IssueCode.RANGE, "scenario_factors", "at least one blend factor is required")


def validate_document(doc: InstanceDocument) -> list[ValidationIssue]:
    """Runs all domain checks and returns every violation found."""
    col = _Collector()
    if doc.schema_version != SCHEMA_VERSION:
        col.add(
            IssueCode.SCHEMA_VERSION, "schema_version",
            f"version {doc.schema_version} is not supported, expected {SCHEMA_VERSION}")
    _check_years(doc, col)
    _check_hours(doc, col)
    _check_technologies(doc, col)
    _check_nodes(doc, col)
    _check_interconnectors(doc, col)
    _check_scenarios(doc, col)
    return col.issues


def _scenario(doc: InstanceDocument, label: str, table: ScenarioRecord, index: ScenarioIndex) -> Scenario:
    base = doc.scenarios.base
    certain = set(doc.first_stage_years)

    def pick(year: int) -> ScenarioRecord:
        return base if year in certain else table

    demand = np.array([
        [pick(year).demand[node][year] for year in index.years]
        for node in index.nodes
    ], dtype=float)
    res_capacity = np.array([
        [
            [pick(year).res_capacity.get(node, {}).get(tech, {}).get(year, 0.0) for year in index.years]
            for tech in index.res_techs
        ]
        for node in index.nodes
    ], dtype=float).reshape(len(index.nodes), len(index.res_techs), len(index.years))
    fuel_price = np.array([
        [pick(year).fuel_price[fuel][year] for year in index.years]
        for fuel in index.fuels
    ], dtype=float).reshape(len(index.fuels), len(index.years))
    co2_price = np.array([pick(year).co2_price[year] for year in index.years], dtype=float)
    return Scenario(
        id=label,
        index=index,
        demand=demand,
        res_capacity=res_capacity,
        fuel_price=fuel_price,
        co2_price=co2_price,
    )


def instance_from_document(
    doc: InstanceDocument,
    factors: Optional[Sequence[float]] = None,
    deduplicate: bool = True,
) -> PlanningInstance:
    """
    Validates the document and builds the planning instance including the
    scenario set derived from the three anchors.
    """
    issues = validate_document(doc)
    if len(issues) > 0:
        raise InstanceValidationError(issues)

    index = ScenarioIndex(
        nodes=tuple(node.id for node in doc.nodes),
        res_techs=tuple(
            tech.id for tech in doc.technologies
            if tech.kind is TechnologyKind.INTERMITTENT_RES
        ),
        fuels=_fuels(doc),
        years=tuple(doc.years),
        hours=len(doc.hours),
        certain_years=tuple(doc.first_stage_years),
    )
    anchors = AnchorSet(anchors=tuple(
        _scenario(doc, label, table, index)
        for label, table in doc.scenarios.anchors.items()
    ))
    if factors is None:
        factors = doc.scenario_factors or settings.scenario_factors
    scenarios = build_set(anchors, factors, deduplicate=deduplicate)
    if scenarios.clamp_count > 0:
        logger.warning(f"{scenarios.clamp_count} scenario values of {doc.name} clamped at zero")

    finance = FinanceSettings(
        interest_rate=doc.finance.interest_rate if doc.finance.interest_rate is not None else settings.interest_rate,
        discount_rate=doc.finance.discount_rate if doc.finance.discount_rate is not None else settings.discount_rate,
        base_year=doc.finance.base_year if doc.finance.base_year is not None else doc.years[0],
    )
    return PlanningInstance(
        name=doc.name,
        years=tuple(doc.years),
        first_stage_years=tuple(doc.first_stage_years),
        sectors=tuple(doc.sectors),
        hours=tuple(Hour(**hour.model_dump()) for hour in doc.hours),
        technologies=tuple(Technology(**tech.model_dump()) for tech in doc.technologies),
        nodes=tuple(Node(**node.model_dump()) for node in doc.nodes),
        interconnectors=tuple(
            Interconnector(**link.model_dump()) for link in doc.interconnectors),
        finance=finance,
        scenarios=scenarios,
        anchors=anchors,
        first_year_investable=(
            tuple(doc.first_year_investable)
            if doc.first_year_investable is not None else None
        ),
    )


def _schema_issues(error: pydantic.ValidationError) -> list[ValidationIssue]:
    return [
        ValidationIssue(
            code=IssueCode.SCHEMA,
            path=".".join(str(part) for part in item["loc"]),
            message=item["msg"],
        )
        for item in error.errors()
    ]


def parse_document(text: str) -> InstanceDocument:
    """Parses TOML text into the document structure, schema errors only."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise InstanceValidationError([
            ValidationIssue(code=IssueCode.SCHEMA, path="", message=str(e))
        ])
    if raw.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise InstanceValidationError([ValidationIssue(
            code=IssueCode.SCHEMA_VERSION,
            path="schema_version",
            message=f"version {raw.get('schema_version')} is not supported, expected {SCHEMA_VERSION}",
        )])
    try:
        return InstanceDocument.model_validate(raw)
    except pydantic.ValidationError as e:
        raise InstanceValidationError(_schema_issues(e))


def load_document(path: Path) -> InstanceDocument:
    return parse_document(Path(path).read_text(encoding="utf-8"))


def load_instance(
    path: Path,
    factors: Optional[Sequence[float]] = None,
    deduplicate: bool = True,
) -> PlanningInstance:
    """Loads, validates and builds the instance stored at `path`."""
    doc = load_document(path)
    instance = instance_from_document(doc, factors, deduplicate)
    logger.info(
        f"Instance {instance.name} loaded: {len(instance.nodes)} nodes, {len(instance.hours)} hours, "
        f"{len(instance.scenarios)} scenarios")
    return instance


def save_document(doc: InstanceDocument, path: Path):
    Path(path).write_text(doc.to_toml(), encoding="utf-8")
    logger.info(f"Instance {doc.name} written to {path}")


def bundled_instance_path() -> Path:
    """Path of the toy instance shipped with the package."""
    return Path(str(resources.files("rapo") / "instances" / "toy.toml"))
