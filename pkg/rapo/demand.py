"""
Stepwise supply function of load shedding. Every sector of a node offers its
share of the hourly demand at the sector's value of lack of adequacy (VoLA).
"""

from typing import Iterable, Union

from pydantic import BaseModel, ConfigDict

from rapo.core import SHARE_TOLERANCE, DemandResponse, DomainError, FlexibilitySettings, Node


class UnknownSectorError(LookupError):
    """Raised when a node or sector is not part of a merit order."""
    pass


class SheddingStep(BaseModel):
    sector: str
    share: float
    """Fraction of the hourly demand of the node which can be shed."""
    vola: float
    """Effective VoLA in €/MWh, already multiplied by the scale factor."""

    model_config = ConfigDict(frozen=True)


class SheddingMeritOrder(BaseModel):
    """
    Shedding steps per node in ascending order of their effective VoLA. An
    empty order means that demand response is switched off.
    """
    steps: dict[str, tuple[SheddingStep, ...]] = {}

    model_config = ConfigDict(frozen=True)

    @property
    def enabled(self) -> bool:
        return len(self.steps) > 0

    def node_steps(self, node: str) -> tuple[SheddingStep, ...]:
        try:
            return self.steps[node]
        except KeyError:
            raise UnknownSectorError(f"node {node} has no shedding steps")

    def step(self, node: str, sector: str) -> SheddingStep:
        for step in self.node_steps(node):
            if step.sector == sector:
                return step
        raise UnknownSectorError(f"sector {sector} is unknown at node {node}")


def _european_vola(nodes: Iterable[Node]) -> dict[str, float]:
    """Averages the VoLA of every sector over all nodes defining it."""
    collected: dict[str, list[float]] = {}
    for node in nodes:
        for sector, vola in node.vola.items():
            collected.setdefault(sector, []).append(vola)
    return {sector: sum(values) / len(values) for sector, values in collected.items()}


def build_merit_order(
    nodes: Iterable[Node],
    mode: Union[DemandResponse, FlexibilitySettings],
    european: bool = False,
) -> SheddingMeritOrder:
    """
    Builds the merit order of all nodes. `mode` may be the demand response
    part of the flexibility settings or the settings as a whole, in which case
    the European averaging is taken from them as well.
    """
    if isinstance(mode, FlexibilitySettings):
        european = mode.european_merit_order
        mode = mode.demand_response
    if mode.scale <= 0:
        raise DomainError(f"demand response scale must be positive, got {mode.scale}")
    if not mode.enabled:
        return SheddingMeritOrder()

    nodes = list(nodes)
    averaged = _european_vola(nodes) if european else {}
    rsl: dict[str, tuple[SheddingStep, ...]] = {}
    for node in nodes:
        total = sum(node.sector_shares.values())
        if abs(total - 1) > SHARE_TOLERANCE:
            raise DomainError(f"sector shares of node {node.id} sum to {total}, not 1")
        steps = []
        for sector, share in node.sector_shares.items():
            vola = averaged.get(sector) if european else node.vola.get(sector)
            if vola is None:
                raise UnknownSectorError(f"node {node.id} has no VoLA for sector {sector}")
            if vola <= 0:
                raise DomainError(f"VoLA of {sector} at {node.id} must be positive")
            steps.append(SheddingStep(sector=sector, share=share, vola=vola * mode.scale))
        steps.sort(key=lambda step: (step.vola, step.sector))
        rsl[node.id] = tuple(steps)
    return SheddingMeritOrder(steps=rsl)


def shed_cap(order: SheddingMeritOrder, node: str, sector: str, demand: float) -> float:
    """Upper bound of the shedding of one sector in one hour in MWh."""
    if demand < 0:
        raise DomainError(f"demand must be non-negative, got {demand}")
    return demand * order.step(node, sector).share
