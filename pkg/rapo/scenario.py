"""
Construction of the scenario set of the uncertain stage. Scenarios are linear
inter- and extrapolations of three anchor scenarios, their expected value and
the midpoints between each anchor and the expected value. The data of the
certain (first-stage) years is shared by all scenarios.
"""

from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from rapo.log import logger


DEFAULT_FACTORS: tuple[float, ...] = (-0.10, 0.33, 0.50, 0.67, 1.10)
PROBABILITY_TOLERANCE: float = 1e-12
UNCERTAIN_FIELDS: tuple[str, ...] = (
    "demand", "res_capacity", "fuel_price", "co2_price",
)


class ScenarioIndexError(ValueError):
    """Raised when two scenarios do not cover the same index sets."""
    pass


class ScenarioIndex(BaseModel):
    """
    Labels of the axes of the scenario arrays. Scenarios can only be combined
    if their indices are equal.
    """
    nodes: tuple[str, ...]
    res_techs: tuple[str, ...]
    fuels: tuple[str, ...]
    years: tuple[int, ...]
    hours: int
    certain_years: tuple[int, ...] = ()

    model_config = ConfigDict(frozen=True)

    def year_position(self, year: int) -> int:
        return self.years.index(year)

    def certain_mask(self) -> np.ndarray:
        """Boolean mask over the year axis which marks the certain years."""
        return np.array([year in self.certain_years for year in self.years], dtype=bool)


class Scenario(BaseModel):
    """
    One realisation of the four uncertain parameter groups: hourly demand,
    installed intermittent RES capacity, fuel prices and the CO2 price.
    """
    id: str
    probability: float = 1.0
    index: ScenarioIndex
    demand: np.ndarray
    """MWh per (node, year, hour)."""
    res_capacity: np.ndarray
    """MW per (node, intermittent technology, year)."""
    fuel_price: np.ndarray
    """€/MWh_fuel per (fuel, year)."""
    co2_price: np.ndarray
    """€/tCO2 per year."""
    clamped: int = 0
    """Number of values raised to zero after an extrapolation."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_shapes(self) -> "Scenario":
        idx = self.index
        expected = {
            "demand": (len(idx.nodes), len(idx.years), idx.hours),
            "res_capacity": (len(idx.nodes), len(idx.res_techs), len(idx.years)),
            "fuel_price": (len(idx.fuels), len(idx.years)),
            "co2_price": (len(idx.years),),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ScenarioIndexError(
                    f"{name} of scenario {self.id} has shape {getattr(self, name).shape}, expected {shape}")
        if not 0 <= self.probability <= 1:
            raise ValueError(
                f"probability of scenario {self.id} must be in [0, 1]")
        return self

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in UNCERTAIN_FIELDS}

    def same_data(self, other: "Scenario") -> bool:
        """Element-wise equality of all parameter groups."""
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in UNCERTAIN_FIELDS
        )

    def demand_at(self, node: str, year: int, hour: int) -> float:
        n = self.index.nodes.index(node)
        return float(self.demand[n, self.index.year_position(year), hour])

    def res_capacity_at(self, node: str, tech: str, year: int) -> float:
        if tech not in self.index.res_techs:
            return 0.0
        n = self.index.nodes.index(node)
        i = self.index.res_techs.index(tech)
        return float(self.res_capacity[n, i, self.index.year_position(year)])

    def fuel_price_at(self, fuel: Optional[str], year: int) -> float:
        if fuel is None or fuel not in self.index.fuels:
            return 0.0
        return float(self.fuel_price[self.index.fuels.index(fuel), self.index.year_position(year)])

    def co2_price_at(self, year: int) -> float:
        return float(self.co2_price[self.index.year_position(year)])


class AnchorSet(BaseModel):
    """
    The three anchor scenarios the scenario set is derived from. Each anchor
    already contains the certain-year data of the base scenario.
    """
    anchors: tuple[Scenario, ...]

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_anchors(self) -> "AnchorSet":
        if len(self.anchors) != 3:
            raise ValueError(
                f"exactly three anchor scenarios are required, got {len(self.anchors)}")
        first = self.anchors[0]
        for anchor in self.anchors[1:]:
            _check_compatible(first, anchor)
        return self

    def ordered(self) -> list[Scenario]:
        """Anchors in lexicographic order of their labels."""
        return sorted(self.anchors, key=lambda anchor: anchor.id)


class ScenarioSet(BaseModel):
    """An ordered sequence of scenarios with probabilities summing to one."""
    scenarios: tuple[Scenario, ...]
    deduplicated: bool = False
    """True if exact duplicates were removed during construction."""

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_set(self) -> "ScenarioSet":
        if len(self.scenarios) == 0:
            raise ValueError("a scenario set needs at least one scenario")
        total = sum(scenario.probability for scenario in self.scenarios)
        if abs(total - 1) > PROBABILITY_TOLERANCE:
            raise ValueError(f"scenario probabilities sum to {total}, not 1")
        ids = [scenario.id for scenario in self.scenarios]
        if len(set(ids)) != len(ids):
            raise ValueError("scenario ids must be unique")
        return self

    def __len__(self) -> int:
        return len(self.scenarios)

    @property
    def index(self) -> ScenarioIndex:
        return self.scenarios[0].index

    @property
    def ids(self) -> list[str]:
        return [scenario.id for scenario in self.scenarios]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([scenario.probability for scenario in self.scenarios])

    @property
    def clamp_count(self) -> int:
        return sum(scenario.clamped for scenario in self.scenarios)

    def by_id(self, scenario_id: str) -> Scenario:
        for scenario in self.scenarios:
            if scenario.id == scenario_id:
                return scenario
        raise KeyError(f"no scenario with id {scenario_id}")

    @classmethod
    def uniform(cls, scenarios: Sequence[Scenario], deduplicated: bool = False) -> "ScenarioSet":
        """Assigns equal probabilities to the given scenarios."""
        probability = 1 / len(scenarios)
        return cls(
            scenarios=tuple(
                scenario.model_copy(update={"probability": probability})
                for scenario in scenarios
            ),
            deduplicated=deduplicated,
        )


def _check_compatible(a: Scenario, b: Scenario):
    if a.index != b.index:
        raise ScenarioIndexError(
            f"scenarios {a.id} and {b.id} do not cover the same indices")


def blend(a: Scenario, b: Scenario, factor: float, scenario_id: Optional[str] = None) -> Scenario:
    """
    Returns `factor * a + (1 - factor) * b` for all uncertain years, raised to
    zero from below. The certain years are copied from `a`.
    """
    _check_compatible(a, b)
    certain = a.index.certain_mask()
    rsl: dict[str, np.ndarray] = {}
    clamped = 0
    for name in UNCERTAIN_FIELDS:
        left = getattr(a, name)
        right = getattr(b, name)
        mixed = factor * left + (1 - factor) * right
        negative = mixed < 0
        clamped += int(np.count_nonzero(negative & ~_broadcast(certain, name, mixed.shape)))
        mixed = np.where(negative, 0.0, mixed)
        mixed = _restore_certain(mixed, left, certain, name)
        rsl[name] = mixed
    if clamped > 0:
        logger.warning(
            f"{clamped} values clamped at zero while blending {a.id} and {b.id} with {factor}")
    return Scenario(
        id=scenario_id or f"{a.id}-{b.id}@{factor:g}",
        probability=a.probability,
        index=a.index,
        clamped=clamped,
        **rsl,
    )


def _year_axis(name: str) -> int:
    return {"demand": 1, "res_capacity": 2, "fuel_price": 1, "co2_price": 0}[name]


def _broadcast(certain: np.ndarray, name: str, shape: tuple[int, ...]) -> np.ndarray:
    """Expands the year mask to the shape of the named array."""
    axis = _year_axis(name)
    view = [1] * len(shape)
    view[axis] = len(certain)
    return np.broadcast_to(certain.reshape(view), shape)


def _restore_certain(mixed: np.ndarray, source: np.ndarray, certain: np.ndarray, name: str) -> np.ndarray:
    mask = _broadcast(certain, name, mixed.shape)
    return np.where(mask, source, mixed)


def expected_value(anchors: AnchorSet, scenario_id: str = "EV") -> Scenario:
    """Element-wise arithmetic mean of the anchors."""
    members = anchors.ordered()
    first = members[0]
    certain = first.index.certain_mask()
    rsl = {}
    for name in UNCERTAIN_FIELDS:
        mean = np.mean([getattr(anchor, name) for anchor in members], axis=0)
        rsl[name] = _restore_certain(mean, getattr(first, name), certain, name)
    return Scenario(
        id=scenario_id,
        probability=first.probability,
        index=first.index,
        **rsl,
    )


def build_set(
    anchors: AnchorSet,
    factors: Sequence[float] = DEFAULT_FACTORS,
    deduplicate: bool = True,
) -> ScenarioSet:
    """
    Builds the scenario set: the anchors, every unordered anchor pair blended
    with each factor (the factor weights the lexicographically first anchor),
    the expected value and the midpoints between each anchor and the expected
    value. All scenarios are equally probable. With `deduplicate` exact
    duplicates are merged into their first occurrence, which takes over
    their probability, and the set is flagged.
    """
    members = anchors.ordered()
    rsl: list[Scenario] = list(members)
    for a, b in combinations(members, 2):
        for factor in factors:
            rsl.append(blend(a, b, factor))
    ev = expected_value(anchors)
    rsl.append(ev)
    for anchor in members:
        rsl.append(blend(anchor, ev, 0.5, scenario_id=f"{anchor.id}~EV"))

    deduplicated = False
    weights = [1 / len(rsl)] * len(rsl)
    if deduplicate:
        unique: list[Scenario] = []
        merged: list[float] = []
        for scenario, weight in zip(rsl, weights):
            twin = next((i for i, kept in enumerate(unique) if scenario.same_data(kept)), None)
            if twin is not None:
                # the first occurrence keeps the probability of its duplicates
                merged[twin] += weight
                deduplicated = True
                continue
            unique.append(scenario)
            merged.append(weight)
        if deduplicated:
            logger.warning(
                f"{len(rsl) - len(unique)} duplicate scenarios merged into their first occurrence")
        rsl, weights = unique, merged
    rsl = _unique_ids(rsl)
    logger.debug(f"Scenario set with {len(rsl)} scenarios built")
    return ScenarioSet(
        scenarios=tuple(
            scenario.model_copy(update={"probability": weight})
            for scenario, weight in zip(rsl, weights)
        ),
        deduplicated=deduplicated,
    )


def _unique_ids(scenarios: list[Scenario]) -> list[Scenario]:
    """Appends a counter to repeated scenario ids (repeated blend factors)."""
    seen: dict[str, int] = {}
    rsl = []
    for scenario in scenarios:
        count = seen.get(scenario.id, 0)
        seen[scenario.id] = count + 1
        if count > 0:
            scenario = scenario.model_copy(
                update={"id": f"{scenario.id}#{count}"})
        rsl.append(scenario)
    return rsl


def single_scenario_set(scenario: Scenario) -> ScenarioSet:
    """A set holding only the given scenario, used for expected-value problems."""
    return ScenarioSet.uniform([scenario])


def first_stage_identical(scenarios: ScenarioSet) -> bool:
    """Checks that the certain-year data is bit-identical in all scenarios."""
    first = scenarios.scenarios[0]
    certain = first.index.certain_mask()
    for scenario in scenarios.scenarios[1:]:
        for name in UNCERTAIN_FIELDS:
            mask = _broadcast(certain, name, getattr(first, name).shape)
            if not np.array_equal(getattr(first, name)[mask], getattr(scenario, name)[mask]):
                return False
    return True
