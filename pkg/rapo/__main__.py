import argparse
import sys
from pathlib import Path
from typing import Callable, Optional

import attrs
from typed_settings.exceptions import TsError

from rapo import VERSION
from rapo.config import Command, ConfigError, RunConfig
from rapo.core import DomainError, RiskSettings, flexibility_preset
from rapo.instance import (
    InstanceValidationError,
    PlanningInstance,
    bundled_instance_path,
    load_instance,
    save_document,
)
from rapo.log import logger
from rapo.model import (
    IntegrityError,
    ModelBuildError,
    ModelOptions,
    PlanProgram,
    SolveFailedError,
    build,
    solve_plan,
)
from rapo.report import ex_post_cost, risk_measures, sweep, tail_scenarios
from rapo.solver import (
    InterchangeParseError,
    SolveOptions,
    SolverBackend,
    SolverError,
    write_interchange,
)
from rapo.synthetic import synthetic_document
from rapo.utils import normalize_for_filename


EXIT_OK = 0
EXIT_SOLVE = 1
EXIT_INVALID = 2


def _instance(config: RunConfig) -> PlanningInstance:
    path = Path(config.instance) if config.instance else bundled_instance_path()
    return load_instance(path)


def _model_options(config: RunConfig) -> ModelOptions:
    return ModelOptions(hours_weight=config.hours_weight)


def _solve_options(config: RunConfig) -> SolveOptions:
    return SolveOptions(
        backend=SolverBackend(config.solver),
        max_iterations=config.max_iterations,
        feasibility_tol=config.feasibility_tol,
        optimality_tol=config.optimality_tol,
    )


def _program(config: RunConfig) -> PlanProgram:
    """The program of the first omega and flexibility setting."""
    risk = RiskSettings(omega=config.omegas[0], alpha=config.alpha)
    return build(_instance(config), risk, flexibility_preset(config.flex[0]), _model_options(config))


def _write_program(lp: PlanProgram, path: Path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_interchange(lp), encoding="utf-8")
    logger.info(f"Program {lp.name} written to {path}")


def validate(config: RunConfig) -> int:
    """Loads and validates the instance."""
    instance = _instance(config)
    print(
        f"{instance.name}: valid, {len(instance.nodes)} nodes, {len(instance.hours)} hours, "
        f"{len(instance.years)} years, {len(instance.scenarios)} scenarios")
    return EXIT_OK


def build_program(config: RunConfig) -> int:
    """Builds the program and reports its dimensions."""
    lp = _program(config)
    print(f"{lp.name}: {lp.num_rows} rows, {lp.num_cols} columns, {lp.matrix.nnz} nonzeros")
    if config.lp_out is not None:
        _write_program(lp, Path(config.lp_out))
    return EXIT_OK


def solve(config: RunConfig) -> int:
    """Solves every omega and flexibility setting and prints a summary per solution."""
    instance = _instance(config)
    for name in config.flex:
        for omega in config.omegas:
            risk = RiskSettings(omega=omega, alpha=config.alpha)
            sol = solve_plan(
                instance, risk, flexibility_preset(name), _model_options(config), _solve_options(config))
            measures = risk_measures(sol)
            tail = tail_scenarios(sol)
            print(
                f"{name} omega={omega:g}: tc={sol.objective:.6g} ic={sol.ic:.6g} "
                f"expected_oc={sol.expected_oc:.6g} cvar={measures.cvar:.6g} zeta={measures.zeta:.6g} "
                f"ex_post={ex_post_cost(sol):.6g} lost_load={sol.lost_load_total:.6g} "
                f"tail={','.join(tail.strict) or '-'}")
    return EXIT_OK


def run_sweep(config: RunConfig) -> int:
    """Runs the sweep and writes the result tables and the run configuration."""
    config.check_output_dir()
    out = Path(config.output_dir)
    result = sweep(
        _instance(config),
        config.omegas,
        config.flex,
        alpha=config.alpha,
        options=_model_options(config),
        solve_options=_solve_options(config),
    )
    result.write(out)
    config.dump(out / "run.toml")
    failed = [cell for cell in result.cells if not cell.ok]
    if len(failed) > 0:
        print(f"{len(failed)} of {len(result.cells)} cells failed, see {out / 'failures.csv'}")
        return EXIT_SOLVE
    print(f"{len(result.cells)} cells solved, results in {out}")
    return EXIT_OK


def export(config: RunConfig) -> int:
    """Writes the program in the interchange format."""
    lp = _program(config)
    if config.lp_out is not None:
        path = Path(config.lp_out)
    else:
        config.check_output_dir()
        path = Path(config.output_dir) / f"{normalize_for_filename(lp.name)}.mps"
    _write_program(lp, path)
    print(path)
    return EXIT_OK


def synth(config: RunConfig) -> int:
    """Writes a synthetic instance."""
    config.check_output_dir()
    doc = synthetic_document(config.seed, config.nodes, config.hours, config.techs)
    path = Path(config.output_dir) / f"synthetic-{config.seed}.toml"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_document(doc, path)
    print(path)
    return EXIT_OK


HANDLERS: dict[Command, Callable[[RunConfig], int]] = {
    Command.VALIDATE: validate,
    Command.BUILD: build_program,
    Command.SOLVE: solve,
    Command.SWEEP: run_sweep,
    Command.EXPORT: export,
    Command.SYNTH: synth,
}


def run(config: RunConfig) -> int:
    """Executes the configured command and returns the exit status."""
    try:
        return HANDLERS[config.command](config)
    except InstanceValidationError as e:
        logger.error(f"Instance is invalid, {len(e.issues)} problems")
        for issue in e.issues:
            print(issue, file=sys.stderr)
        return EXIT_INVALID
    except (ConfigError, DomainError, ModelBuildError, InterchangeParseError) as e:
        logger.error(f"{config.command.value} failed: {e}")
        return EXIT_INVALID
    except (SolveFailedError, IntegrityError, SolverError) as e:
        logger.error(f"{config.command.value} failed: {e}")
        return EXIT_SOLVE


def _overrides(args: argparse.Namespace) -> dict:
    rsl = {"command": args.command}
    for field in ("instance", "alpha", "solver", "seed", "hours_weight", "lp_out", "nodes", "hours", "techs"):
        value = getattr(args, field, None)
        if value is not None:
            rsl[field] = value
    if getattr(args, "omega", None):
        rsl["omegas"] = tuple(args.omega)
    if getattr(args, "flex", None):
        rsl["flex"] = tuple(args.flex)
    if getattr(args, "out", None) is not None:
        rsl["output_dir"] = args.out
    return rsl


def parse_config(argv: Optional[list[str]] = None) -> Optional[RunConfig]:
    """Parses the command line. Returns None if no command was given."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration (TOML with a [run] table) to start from.")
    common.add_argument("--instance", help="Instance file, defaults to the bundled toy instance.")
    common.add_argument("--omega", type=float, action="append", help="CVaR weight, repeatable.")
    common.add_argument("--alpha", type=float, help="CVaR tail level.")
    common.add_argument("--flex", action="append", help="Flexibility setting, repeatable.")
    common.add_argument("--out", help="Output directory.")
    common.add_argument("--seed", type=int, help="Seed of the synthetic instance.")
    common.add_argument("--hours-weight", dest="hours_weight", type=float, help="Weight of every hour.")
    common.add_argument("--lp-out", dest="lp_out", help="Target of the interchange file.")
    common.add_argument("--solver", choices=[backend.value for backend in SolverBackend])
    common.add_argument("--nodes", type=int, help="Nodes of the synthetic instance.")
    common.add_argument("--hours", type=int, help="Hours of the synthetic instance.")
    common.add_argument("--techs", type=int, help="Technologies of the synthetic instance.")

    parser = argparse.ArgumentParser(
        prog="rapo",
        description="Risk-averse expansion planning of generation, interconnectors and storage",
    )
    parser.add_argument("--version", action="version", version=f"rapo {VERSION}")
    sub_parsers = parser.add_subparsers(help="Available commands")
    for command, help_text in (
        (Command.VALIDATE, "Loads and validates an instance."),
        (Command.BUILD, "Builds the program and reports its size."),
        (Command.SOLVE, "Solves the instance for every omega and flexibility setting."),
        (Command.SWEEP, "Runs a sweep and writes the result tables."),
        (Command.EXPORT, "Writes the program as an MPS file."),
        (Command.SYNTH, "Writes a synthetic instance."),
    ):
        sub = sub_parsers.add_parser(command.value, parents=[common], help=help_text)
        sub.set_defaults(command=command)
    args = parser.parse_args(argv)
    if getattr(args, "command", None) is None:
        parser.print_help()
        return None

    base = RunConfig.load(Path(args.config)) if args.config else RunConfig()
    return attrs.evolve(base, **_overrides(args))


def main(argv: Optional[list[str]] = None) -> int:
    try:
        config = parse_config(argv)
    except (ConfigError, DomainError, TsError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_INVALID
    if config is None:
        return EXIT_OK
    return run(config)


def app():
    sys.exit(main())


if __name__ == "__main__":
    app()
