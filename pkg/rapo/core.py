"""
Domain types shared by all modules plus the financial arithmetic (annuities,
discount factors) and the composition of marginal generation costs.
"""

import enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


SHARE_TOLERANCE: float = 1e-9


class DomainError(ValueError):
    """
    Raised when a domain record or a financial calculation is given values
    outside of its admissible range.
    """
    pass


class TechnologyKind(str, enum.Enum):
    """The kinds of technologies the model distinguishes between."""
    THERMAL = "thermal"
    PSP = "psp"
    HYDRO_RESERVOIR = "hydro_reservoir"
    INTERMITTENT_RES = "intermittent_res"
    OTHER_RES = "other_res"

    def is_investable_kind(self) -> bool:
        """
        Intermittent renewables and hydro reservoirs follow an exogenous
        expansion path and never carry an investment decision.
        """
        return self not in (self.INTERMITTENT_RES, self.HYDRO_RESERVOIR)


class Technology(BaseModel):
    """A generation or storage technology."""
    id: str
    kind: TechnologyKind
    fuel: Optional[str] = None
    """Fuel label, resolved against the fuel prices of a scenario. None means free."""
    efficiency: float = 1.0
    """Conversion efficiency. For PSPs this is the pumping efficiency."""
    emission_factor: float = 0.0
    """tCO2 per MWh of fuel."""
    capex: float = 0.0
    """€ per MW of capacity."""
    lifetime: int = 1
    investable: bool = False
    availability: float = 1.0
    """Constant availability factor, used where a node defines no profile."""
    variable_om: float = 0.0
    """Additive variable O&M cost in €/MWh_el."""
    marginal_cost: Optional[float] = None
    """Direct marginal cost in €/MWh_el, bypasses the fuel/CO2 composition."""
    capacity_power_factor: Optional[float] = None
    """Full-load hours of the upper basin of a PSP. Falls back to the settings."""

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_ranges(self) -> "Technology":
        if not 0 < self.efficiency <= 1:
            raise DomainError(
                f"efficiency of {self.id} must be in (0, 1], got {self.efficiency}")
        if self.capex < 0:
            raise DomainError(f"capex of {self.id} must be non-negative")
        if self.lifetime < 1:
            raise DomainError(f"lifetime of {self.id} must be at least one year")
        if self.investable and not self.kind.is_investable_kind():
            raise DomainError(
                f"{self.id} is of kind {self.kind.value} and cannot be investable")
        if not 0 <= self.availability <= 1:
            raise DomainError(f"availability of {self.id} must be in [0, 1]")
        return self

    @property
    def emission_free(self) -> bool:
        return self.emission_factor == 0

    def is_psp(self) -> bool:
        return self.kind is TechnologyKind.PSP


class Hour(BaseModel):
    """A representative operational hour."""
    label: str
    weight: Optional[float] = None
    """Number of annual hours represented. None means 8760 / |T|."""
    month: int = 1

    model_config = ConfigDict(frozen=True)


class Node(BaseModel):
    """A market zone with its existing fleet, caps and demand-side data."""
    id: str
    existing_capacity: dict[str, dict[int, float]] = Field(default_factory=dict)
    """MW per technology and year."""
    max_investment: dict[str, float] = Field(default_factory=dict)
    """Investment cap per technology in MW. For PSPs this is Z^max."""
    max_investment_by_year: dict[str, dict[int, float]] = Field(
        default_factory=dict)
    """Optional caps per technology and year which override `max_investment`."""
    sector_shares: dict[str, float] = Field(default_factory=dict)
    vola: dict[str, float] = Field(default_factory=dict)
    """Value of lack of adequacy per sector in €/MWh."""
    profiles: dict[str, list[float]] = Field(default_factory=dict)
    """Hourly availability profile per technology."""
    hydro_budget: dict[str, dict[int, float]] = Field(default_factory=dict)
    """Full-load hours per month for hydro reservoirs."""

    model_config = ConfigDict(frozen=True)

    def capacity(self, tech: str, year: int) -> float:
        return self.existing_capacity.get(tech, {}).get(year, 0.0)

    def investment_cap(self, tech: str, year: int) -> float:
        by_year = self.max_investment_by_year.get(tech)
        if by_year is not None and year in by_year:
            return by_year[year]
        return self.max_investment.get(tech, 0.0)


class Interconnector(BaseModel):
    """A directional cross-border link limited by a net transfer capacity."""
    from_node: str = Field(alias="from")
    to_node: str = Field(alias="to")
    ntc: dict[int, float] = Field(default_factory=dict)
    """Existing NTC per year in MW."""
    capex: float = 0.0
    """Expansion cost CY in € per MW."""
    lifetime: int = 50
    """Depreciation period of the expansion in years."""
    expandable: bool = False

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @property
    def label(self) -> str:
        return f"{self.from_node}>{self.to_node}"

    def capacity(self, year: int) -> float:
        return self.ntc.get(year, 0.0)


class RiskSettings(BaseModel):
    """Weight of the CVaR in the objective and the CVaR tail level."""
    omega: float = 0.0
    alpha: float = 0.9

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_ranges(self) -> "RiskSettings":
        if not 0 <= self.omega <= 1:
            raise DomainError(f"omega must be in [0, 1], got {self.omega}")
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must be in (0, 1), got {self.alpha}")
        return self


class FinanceSettings(BaseModel):
    interest_rate: float = 0.06
    """Used to annualise capital costs."""
    discount_rate: float = 0.06
    """Used to discount the costs of later years to the base year."""
    base_year: int = 2020

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_ranges(self) -> "FinanceSettings":
        for name in ("interest_rate", "discount_rate"):
            value = getattr(self, name)
            if not 0 <= value < 1:
                raise DomainError(f"{name} must be in [0, 1), got {value}")
        return self


class DemandResponse(BaseModel):
    """
    Demand response is either off (no shedding, lost load is penalised) or on
    with all VoLA values multiplied by `scale`.
    """
    enabled: bool = True
    scale: float = 1.0

    model_config = ConfigDict(frozen=True)


class FlexibilitySettings(BaseModel):
    """The flexibility elements available to the planner."""
    name: str = "custom"
    demand_response: DemandResponse = DemandResponse()
    european_merit_order: bool = False
    """Average the sectoral VoLA over all nodes."""
    ntc_expansion: bool = False
    ntc_capex_scale: float = 1.0
    psp_expansion: bool = False
    psp_capex_scale: float = 1.0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_scales(self) -> "FlexibilitySettings":
        scales = (
            self.demand_response.scale,
            self.ntc_capex_scale,
            self.psp_capex_scale,
        )
        if any(scale <= 0 for scale in scales):
            raise DomainError(f"scale factors of {self.name} must be positive")
        return self


def _preset(name: str, dr: Optional[float], ntc: Optional[float], psp: Optional[float], european: bool = True) -> FlexibilitySettings:
    return FlexibilitySettings(
        name=name,
        demand_response=DemandResponse(
            enabled=dr is not None, scale=dr if dr is not None else 1.0),
        european_merit_order=european,
        ntc_expansion=ntc is not None,
        ntc_capex_scale=ntc if ntc is not None else 1.0,
        psp_expansion=psp is not None,
        psp_capex_scale=psp if psp is not None else 1.0,
    )


FLEXIBILITY_PRESETS: dict[str, FlexibilitySettings] = {
    preset.name: preset for preset in [
        _preset("base", 1.0, None, None, european=False),
        _preset("dr-none", None, None, None),
        _preset("dr-low", 5.0, None, None),
        _preset("dr-intermediate", 1.0, None, None),
        _preset("dr-high", 0.5, None, None),
        _preset("ntc-none", None, None, None),
        _preset("ntc", None, 1.0, None),
        _preset("ntc-reduced", None, 0.5, None),
        _preset("psp-none", None, None, None),
        _preset("psp", None, None, 1.0),
        _preset("psp-reduced", None, None, 0.5),
        _preset("flex-moderate", 1.0, 1.0, 1.0),
        _preset("flex-high", 0.5, 0.5, 0.5),
    ]
}
"""Named flexibility settings of the demand, trade, storage and interplay studies."""


def flexibility_preset(name: str) -> FlexibilitySettings:
    try:
        return FLEXIBILITY_PRESETS[name]
    except KeyError:
        known = ", ".join(FLEXIBILITY_PRESETS)
        raise DomainError(f"unknown flexibility setting '{name}', known: {known}")


def annuity(capex: float, rate: float, lifetime: int) -> float:
    """
    Annual payment in €/MW/year which repays `capex` over `lifetime` years at
    the given interest rate. Falls back to straight-line depreciation for a
    zero rate.
    """
    if lifetime < 1:
        raise DomainError(f"lifetime must be at least one year, got {lifetime}")
    if capex < 0:
        raise DomainError(f"capex must be non-negative, got {capex}")
    if rate < 0:
        raise DomainError(f"rate must be non-negative, got {rate}")
    if rate == 0:
        return capex / lifetime
    return capex * rate / (1 - (1 + rate) ** -lifetime)


def discount_factor(year: int, settings: FinanceSettings) -> float:
    """Present value factor of costs occurring in `year`."""
    if year < settings.base_year:
        raise DomainError(
            f"year {year} lies before the base year {settings.base_year}")
    return (1 + settings.discount_rate) ** -(year - settings.base_year)


def marginal_cost(
    tech: Technology,
    fuel_price: float,
    co2_price: float,
) -> float:
    """
    Marginal generation cost in €/MWh_el composed of the fuel and the CO2
    costs per unit of output plus the variable O&M term. A marginal cost set
    directly on the technology bypasses the composition.
    """
    if tech.efficiency <= 0:
        raise DomainError(f"efficiency of {tech.id} must be positive")
    if tech.marginal_cost is not None:
        return tech.marginal_cost
    fuel = fuel_price / tech.efficiency
    co2 = co2_price * tech.emission_factor / tech.efficiency
    return fuel + co2 + tech.variable_om
