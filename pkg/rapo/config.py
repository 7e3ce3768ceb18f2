import enum
import os
from pathlib import Path
from typing import Any, Optional

import attrs
import tomli_w
import typed_settings


class ConfigError(ValueError):
    """Raised when a run configuration holds values outside of their range."""
    pass


@typed_settings.settings
class Settings:
    log_level: str = "info"
    """Set the log level as specified by Python's built-in logging package."""

    alpha: float = 0.9
    """
    Tail level of the CVaR. The worst `1 - alpha` share of the scenario
    probability mass enters the risk term.
    """
    omegas: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 0.99)
    """Default grid of CVaR weights swept by the `sweep` command."""
    scenario_factors: tuple[float, ...] = (-0.10, 0.33, 0.50, 0.67, 1.10)
    """
    Blend factors applied to every pair of anchor scenarios. Factors outside
    of [0, 1] extrapolate.
    """

    interest_rate: float = 0.06
    """Interest rate for the annualisation of capital costs, used when an instance omits it."""
    discount_rate: float = 0.06
    """Discount rate per year, used when an instance omits it."""
    lost_load_penalty: float = 50_000.0
    """
    Penalty in €/MWh for unserved energy when demand response is switched
    off. Has to exceed every annuity-per-MWh equivalent of the instance.
    """
    capacity_power_factor: float = 9.0
    """Full-load hours of a PSP upper basin."""
    storage_cyclic: bool = False
    """Wrap the storage level of the last modelled hour to the first one."""

    solver: str = "auto"
    """One of `auto`, `simplex` or `highs`."""
    simplex_nonzero_limit: int = 50_000
    """Programs with more matrix nonzeros are routed to HiGHS when `solver` is `auto`."""
    max_iterations: int = 50_000
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-9
    refactor_interval: int = 50
    """Pivots after which the basis is factorised from scratch."""
    bland_after: int = 50
    """Consecutive degenerate pivots after which Bland's rule takes over."""
    scaling: bool = True

    workers: int = 1
    """Number of sweep cells solved in parallel."""
    output_dir: str = "out"
    seed: int = 1
    """Seed of the synthetic instance generator."""


class Command(str, enum.Enum):
    VALIDATE = "validate"
    BUILD = "build"
    SOLVE = "solve"
    SWEEP = "sweep"
    EXPORT = "export"
    SYNTH = "synth"


app_name = "rapo"
config_files = ["settings.toml"]


settings = typed_settings.load(
    Settings,
    appname=app_name,
    config_files=config_files,
)


@typed_settings.settings
class RunConfig:
    """
    Everything a single invocation of the command line needs. Built from the
    settings overlaid with the command line flags.
    """
    command: Command = Command.SOLVE
    instance: Optional[str] = None
    """Path to a TOML instance. The bundled toy instance is used if omitted."""
    omegas: tuple[float, ...] = settings.omegas
    alpha: float = settings.alpha
    flex: tuple[str, ...] = ("base",)
    """Names of the flexibility settings to solve."""
    solver: str = settings.solver
    max_iterations: int = settings.max_iterations
    feasibility_tol: float = settings.feasibility_tol
    optimality_tol: float = settings.optimality_tol
    output_dir: str = settings.output_dir
    seed: int = settings.seed
    hours_weight: Optional[float] = None
    """Overrides the weight of every representative hour."""
    lp_out: Optional[str] = None
    """Target of the interchange file written by `build` and `export`."""
    nodes: int = 2
    hours: int = 6
    techs: int = 3

    def __attrs_post_init__(self):
        from rapo.core import FLEXIBILITY_PRESETS

        if len(self.omegas) == 0:
            raise ConfigError("at least one omega is required")
        for omega in self.omegas:
            if not 0 <= omega <= 1:
                raise ConfigError(f"omega must be in [0, 1], got {omega}")
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        for name in self.flex:
            if name not in FLEXIBILITY_PRESETS:
                raise ConfigError(f"unknown flexibility setting '{name}'")
        if self.solver not in ("auto", "simplex", "highs"):
            raise ConfigError(f"unknown solver '{self.solver}'")
        if self.hours_weight is not None and self.hours_weight <= 0:
            raise ConfigError("the hour weight has to be positive")
        if min(self.nodes, self.hours, self.techs) < 1:
            raise ConfigError("size knobs of the synthetic instance must be positive")

    def check_output_dir(self):
        """
        Raises a ConfigError if the output directory can neither be written
        to nor created.
        """
        path = Path(self.output_dir).resolve()
        while not path.exists():
            path = path.parent
        if not path.is_dir() or not os.access(path, os.W_OK):
            raise ConfigError(f"output directory {self.output_dir} is not writable")

    def as_dict(self) -> dict[str, Any]:
        rsl = {}
        for key, value in attrs.asdict(self).items():
            if value is None:
                continue
            if isinstance(value, enum.Enum):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            rsl[key] = value
        return rsl

    def dump(self, path: Path):
        """Writes the configuration as a `[run]` table."""
        with open(path, "wb") as f:
            tomli_w.dump({"run": self.as_dict()}, f)

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        return typed_settings.load(
            cls,
            appname=app_name,
            config_files=[path],
            config_file_section="run",
        )
