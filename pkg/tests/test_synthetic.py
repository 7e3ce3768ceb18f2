import time

import numpy as np
import pytest

from rapo.core import DomainError, RiskSettings, flexibility_preset
from rapo.instance import parse_document
from rapo.model import build, solve_plan
from rapo.report import ex_post_cost
from rapo.scenario import first_stage_identical
from rapo.solver import SolveOptions, SolverBackend, solve
from rapo.synthetic import ANCHORS, CATALOG, MAX_HOURS, MAX_NODES, make_synthetic, synthetic_document


# ceiling against runaway iteration counts
SIMPLEX_SECONDS = 20.0


def test_same_seed_same_document():
    assert synthetic_document(7).to_toml() == synthetic_document(7).to_toml()
    assert synthetic_document(7).to_toml() != synthetic_document(8).to_toml()
    assert synthetic_document(7).name == "synthetic-7"


def test_knobs_shape_the_document():
    doc = synthetic_document(3, nodes=3, hours=5, techs=4)
    assert [node.id for node in doc.nodes] == ["DE", "FR", "NL"]
    assert len(doc.hours) == 5
    assert [tech.id for tech in doc.technologies] == [tech.id for tech in CATALOG[:4]]
    # one pair of directed links per neighbouring node pair
    assert len(doc.interconnectors) == 4
    for node in doc.nodes:
        assert sum(node.sector_shares.values()) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize(
    "knobs",
    [
        {"nodes": 0},
        {"nodes": MAX_NODES + 1},
        {"hours": 0},
        {"hours": MAX_HOURS + 1},
        {"techs": 0},
        {"techs": len(CATALOG) + 1},
    ],
)
def test_knobs_out_of_range(knobs):
    with pytest.raises(DomainError):
        synthetic_document(1, **knobs)


@pytest.mark.parametrize("seed", [1, 2, 3, 11])
def test_demand_is_anti_ordered_to_the_co2_price(seed):
    doc = synthetic_document(seed)
    anchors = doc.scenarios.anchors
    co2 = {label: table.co2_price[2030] for label, table in anchors.items()}
    demand = {
        label: sum(sum(by_year[2030]) for by_year in table.demand.values())
        for label, table in anchors.items()
    }
    assert co2 == {label: params["co2"] for label, params in ANCHORS.items()}
    assert sorted(co2, key=co2.get) == sorted(demand, key=demand.get, reverse=True)


def test_document_survives_the_file_format():
    doc = synthetic_document(5)
    assert parse_document(doc.to_toml()) == doc


def test_synthetic_instance_is_consistent():
    instance = make_synthetic(4, nodes=2, hours=3, techs=3)
    assert len(instance.scenarios) == 22
    assert first_stage_identical(instance.scenarios)
    assert instance.unresolved_references() == []


@pytest.mark.parametrize("backend", [SolverBackend.SIMPLEX, SolverBackend.HIGHS])
def test_synthetic_instance_solves(backend):
    instance = make_synthetic(4, nodes=2, hours=3, techs=3)
    sol = solve_plan(
        instance, RiskSettings(omega=0.5, alpha=0.9), flexibility_preset("flex-moderate"),
        solve_options=SolveOptions(backend=backend))
    assert sol.objective > 0
    assert sol.lost_load_total == pytest.approx(0.0, abs=1e-6)


def test_hydro_reservoirs_get_monthly_budgets():
    instance = make_synthetic(2, nodes=1, hours=4, techs=len(CATALOG))
    lp = build(instance, RiskSettings(omega=0.0), flexibility_preset("base"))
    assert any(name.startswith("hydro_budget[hydro,DE,") for name in lp.row_names)


@pytest.mark.parametrize("omega", [0.0, 0.6, 0.99])
def test_default_instance_on_the_embedded_simplex(omega):
    instance = make_synthetic(1)
    lp = build(instance, RiskSettings(omega=omega, alpha=0.9), flexibility_preset("base"))
    start = time.perf_counter()
    report = solve(lp, SolveOptions(backend=SolverBackend.SIMPLEX))
    elapsed = time.perf_counter() - start
    reference = solve(lp, SolveOptions(backend=SolverBackend.HIGHS))
    assert report.optimal
    assert report.objective == pytest.approx(reference.objective, rel=1e-6)
    assert lp.violation(report.primal) <= 1e-6 * max(1.0, float(np.abs(lp.row_upper[np.isfinite(lp.row_upper)]).max()))
    assert elapsed < SIMPLEX_SECONDS


def test_ex_post_cost_grows_with_risk_aversion():
    instance = make_synthetic(1)
    options = SolveOptions(backend=SolverBackend.SIMPLEX)
    costs = [
        ex_post_cost(solve_plan(
            instance, RiskSettings(omega=omega, alpha=0.9), flexibility_preset("base"), solve_options=options))
        for omega in (0.0, 0.2, 0.4, 0.6, 0.8, 0.99)
    ]
    for cheaper, dearer in zip(costs, costs[1:]):
        # costs are of order 1e10, where 1e-9 absolute lies below the float resolution
        assert dearer >= cheaper - 1e-9 * max(1.0, abs(cheaper))
