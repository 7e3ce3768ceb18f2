import numpy as np
import pytest

from conftest import OMEGAS, YEAR, analytic_instance
from rapo.core import (
    DemandResponse,
    FlexibilitySettings,
    Hour,
    Node,
    RiskSettings,
    Technology,
    TechnologyKind,
    flexibility_preset,
)
from rapo.model import (
    IntegrityError,
    ModelBuildError,
    ModelOptions,
    VariableCatalog,
    build,
    evaluate_fixed,
    extract,
    fix_first_stage,
    solve_plan,
    value_of_stochastic_solution,
)
from rapo.report import cvar_oracle
from rapo.scenario import ScenarioSet
from rapo.solver import SolveOptions, SolverBackend


SIMPLEX = SolveOptions(backend=SolverBackend.SIMPLEX)
HIGHS = SolveOptions(backend=SolverBackend.HIGHS)
NO_FLEX = FlexibilitySettings(name="none", demand_response=DemandResponse(enabled=False))


def risk(omega: float, alpha: float = 0.75) -> RiskSettings:
    return RiskSettings(omega=omega, alpha=alpha)


@pytest.mark.parametrize("omega, nuclear", [(0.0, 0.0), (0.2, 60.0), (0.6, 60.0), (0.99, 60.0)])
def test_risk_aversion_buys_emission_free_capacity(hedging, omega, nuclear):
    sol = solve_plan(hedging, risk(omega), NO_FLEX, solve_options=SIMPLEX)
    assert sol.value(("x", "nuclear", "N", YEAR)) == pytest.approx(nuclear, abs=1e-6)
    total = sol.value(("x", "nuclear", "N", YEAR)) + sol.value(("x", "coal", "N", YEAR))
    assert total == pytest.approx(160.0, abs=1e-6)


def test_operating_costs_of_hedged_plan(hedging):
    sol = solve_plan(hedging, risk(0.99), NO_FLEX, solve_options=SIMPLEX)
    assert sol.oc == pytest.approx([4700.0, 3900.0, 2700.0, 2300.0], rel=1e-9)
    assert sol.cvar == pytest.approx(4700.0, rel=1e-9)
    assert sol.expected_oc == pytest.approx(3400.0, rel=1e-9)
    assert sol.lost_load_total == pytest.approx(0.0, abs=1e-9)


def test_emission_free_capacity_grows_with_risk_aversion(hedging):
    previous = -np.inf
    for omega in OMEGAS:
        sol = solve_plan(hedging, risk(omega), NO_FLEX, solve_options=SIMPLEX)
        nuclear = sol.value(("x", "nuclear", "N", YEAR))
        assert nuclear >= previous - 1e-6 * max(1.0, abs(previous))
        previous = nuclear


@pytest.mark.parametrize("omega", OMEGAS)
def test_objective_decomposes_into_its_parts(hedging, omega):
    sol = solve_plan(hedging, risk(omega), NO_FLEX, solve_options=SIMPLEX)
    parts = sol.ic + (1 - omega) * sol.expected_oc + omega * sol.cvar
    assert sol.objective == pytest.approx(parts, rel=1e-6)


@pytest.mark.parametrize("omega", [0.2, 0.6, 0.99])
def test_cvar_column_matches_enumeration(hedging, omega):
    sol = solve_plan(hedging, risk(omega), NO_FLEX, solve_options=SIMPLEX)
    assert sol.cvar == pytest.approx(cvar_oracle(sol.oc, sol.probabilities, 0.75), rel=1e-6)


RISK_NEUTRAL_CASES = {
    "hedging": ("hedging", NO_FLEX),
    "demand-response": ("demand_response", flexibility_preset("dr-intermediate")),
    "ntc": ("ntc", flexibility_preset("ntc")),
    "psp": ("psp", flexibility_preset("psp-reduced")),
}


@pytest.mark.parametrize("case", RISK_NEUTRAL_CASES)
def test_program_without_risk_rows_is_risk_neutral(request, case):
    fixture, flex = RISK_NEUTRAL_CASES[case]
    instance = request.getfixturevalue(fixture)
    with_rows = solve_plan(instance, risk(0.0), flex, solve_options=SIMPLEX)
    without = solve_plan(instance, risk(0.0), flex, ModelOptions(risk_rows=False), solve_options=SIMPLEX)
    assert without.objective == pytest.approx(with_rows.objective, rel=1e-9)
    assert without.cvar is None
    assert without.zeta is None


def test_program_without_risk_rows_needs_zero_omega(hedging):
    with pytest.raises(ModelBuildError):
        build(hedging, risk(0.5), NO_FLEX, ModelOptions(risk_rows=False))


DEMAND_RESPONSE_CASES = {
    "dr-low": ([60, 60, 60, 60, 60, 0], [0, 0, 0, 0, 0, 30]),
    "dr-intermediate": ([60, 60, 60, 60, 40, 0], [0, 0, 0, 0, 5, 30]),
    "dr-high": ([40, 20, 20, 0, 0, 0], [5, 15, 15, 30, 30, 30]),
}


@pytest.mark.parametrize("setting", DEMAND_RESPONSE_CASES)
def test_cheaper_shedding_replaces_peak_capacity(demand_response, setting):
    investments, shedding = DEMAND_RESPONSE_CASES[setting]
    flex = flexibility_preset(setting)
    for omega, gas, shed in zip(OMEGAS, investments, shedding):
        sol = solve_plan(demand_response, risk(omega), flex, solve_options=SIMPLEX)
        assert sol.value(("x", "gas", "N", YEAR)) == pytest.approx(gas, abs=1e-6), omega
        assert sol.shedding_total() == pytest.approx(shed, abs=1e-6), omega
        assert sol.oc[0] == pytest.approx(6_030_000.0, rel=1e-9)


def test_more_demand_response_never_raises_the_objective(demand_response):
    for omega in OMEGAS:
        objectives = [
            solve_plan(demand_response, risk(omega), flexibility_preset(name), solve_options=SIMPLEX).objective
            for name in ("dr-none", "dr-low", "dr-intermediate", "dr-high")
        ]
        for a, b in zip(objectives, objectives[1:]):
            assert a >= b - 1e-6 * abs(a)


@pytest.mark.parametrize("setting, expected", [
    ("ntc", [0, 0, 100, 100, 100, 100]),
    ("ntc-reduced", [100, 100, 100, 100, 100, 100]),
])
def test_interconnector_expansion_hedges_the_import_scenario(ntc, setting, expected):
    flex = flexibility_preset(setting)
    for omega, mw in zip(OMEGAS, expected):
        sol = solve_plan(ntc, risk(omega), flex, solve_options=SIMPLEX)
        assert sol.ntc_total == pytest.approx(mw, abs=1e-6), omega
        assert sol.value(("y", "B", "A", YEAR)) == pytest.approx(mw, abs=1e-6)


@pytest.mark.parametrize("setting, expected", [("psp", 0.0), ("psp-reduced", 50.0)])
def test_pumped_storage_pays_off_below_its_arbitrage_value(psp, setting, expected):
    sol = solve_plan(psp, risk(0.0), flexibility_preset(setting), solve_options=SIMPLEX)
    assert sol.psp_total == pytest.approx(expected, abs=1e-6)
    if expected > 0:
        assert sol.value(("pump", "psp", "N", "off-peak", YEAR, "s1")) == pytest.approx(50.0, abs=1e-6)
        assert sol.value(("g", "psp", "N", "peak", YEAR, "s1")) == pytest.approx(40.0, abs=1e-6)


@pytest.mark.parametrize("cyclic", [False, True])
def test_storage_level_telescopes(psp, cyclic):
    options = ModelOptions(storage_cyclic=cyclic)
    sol = solve_plan(psp, risk(0.0), flexibility_preset("psp-reduced"), options, SIMPLEX)
    assert sol.psp_total > 1.0
    hours = ("off-peak", "peak")
    pumped = sum(sol.value(("pump", "psp", "N", hour, YEAR, "s1")) for hour in hours)
    released = sum(sol.value(("g", "psp", "N", hour, YEAR, "s1")) for hour in hours)
    final = sol.value(("sl", "psp", "N", hours[-1], YEAR, "s1"))
    # over the horizon the level changes by the pumped energy net of losses minus the release
    expected = 0.0 if cyclic else final
    assert 0.8 * pumped - released == pytest.approx(expected, abs=1e-6)
    assert released > 0
    for hour in hours:
        assert sol.value(("sl", "psp", "N", hour, YEAR, "s1")) >= -1e-9


def test_flows_respect_the_expanded_capacity(ntc):
    sol = solve_plan(ntc, risk(0.99), flexibility_preset("ntc"), solve_options=SIMPLEX)
    capacity = sol.value(("y", "B", "A", YEAR))
    assert capacity == pytest.approx(100.0, abs=1e-6)
    for sid in sol.scenario_ids:
        assert sol.value(("flow", "B", "A", "h1", YEAR, sid)) <= capacity + 1e-6
    # expansion is only bought where it is used, so the cap binds in the import scenario
    assert sol.value(("flow", "B", "A", "h1", YEAR, "s1")) == pytest.approx(capacity, abs=1e-6)


def wind_instance():
    wind = Technology(id="wind", kind=TechnologyKind.INTERMITTENT_RES)
    gas = Technology(id="gas", kind=TechnologyKind.THERMAL, marginal_cost=80.0)
    node = Node(id="N", existing_capacity={"gas": {YEAR: 100.0}}, profiles={"wind": [1.0, 0.3]})
    instance = analytic_instance(
        "wind", [wind, gas], [node],
        [Hour(label="h1", weight=1.0), Hour(label="h2", weight=1.0)],
        demand=[{"N": [50.0, 50.0]}],
    )
    scenarios = [
        scenario.model_copy(update={"res_capacity": np.full((1, 1, 1), 100.0)})
        for scenario in instance.scenarios.scenarios
    ]
    return instance.with_scenarios(ScenarioSet.uniform(scenarios))


def test_renewables_are_curtailed_without_cost():
    instance = wind_instance()
    lp = build(instance, risk(0.0), NO_FLEX)
    col = lp.catalog[("g", "wind", "N", "h1", YEAR, "s1")]
    assert lp.col_upper[col] == pytest.approx(100.0)
    assert lp.operating_costs[:, col].nnz == 0
    sol = solve_plan(instance, risk(0.0), NO_FLEX, solve_options=SIMPLEX)
    assert sol.value(("g", "wind", "N", "h1", YEAR, "s1")) == pytest.approx(50.0, abs=1e-6)
    assert sol.value(("g", "wind", "N", "h2", YEAR, "s1")) == pytest.approx(30.0, abs=1e-6)
    assert sol.value(("g", "gas", "N", "h2", YEAR, "s1")) == pytest.approx(20.0, abs=1e-6)
    # half of the available wind is spilled and only gas shows up in the operating cost
    assert sol.oc[0] == pytest.approx(20.0 * 80.0, rel=1e-9)
    assert sol.lost_load_total == pytest.approx(0.0, abs=1e-9)


def test_backends_agree(demand_response):
    flex = flexibility_preset("dr-intermediate")
    a = solve_plan(demand_response, risk(0.8), flex, solve_options=SIMPLEX)
    b = solve_plan(demand_response, risk(0.8), flex, solve_options=HIGHS)
    assert a.objective == pytest.approx(b.objective, rel=1e-6)


def test_catalog_names_columns_by_their_key(hedging):
    lp = build(hedging, risk(0.5), NO_FLEX)
    assert "x[nuclear,N,2030]" in lp.col_names
    assert "g[coal,N,h1,2030,s4]" in lp.col_names
    assert "zeta" in lp.col_names
    assert lp.col_names[lp.catalog[("oc", "s2")]] == "oc[s2]"
    assert VariableCatalog.name(("cvar",)) == "cvar"
    assert len(set(lp.col_names)) == lp.num_cols
    assert lp.num_cols == len(lp.catalog)


def test_capacities_without_investment_become_bounds(demand_response):
    lp = build(demand_response, risk(0.0), flexibility_preset("dr-intermediate"))
    col = lp.catalog[("g", "lignite", "N", "peak", YEAR, "s3")]
    assert lp.col_upper[col] == pytest.approx(100.0)
    assert not any(name.startswith("gen_cap[lignite") for name in lp.row_names)
    assert any(name.startswith("gen_cap[gas") for name in lp.row_names)


def test_first_year_restriction_blocks_investment(hedging):
    restricted = hedging.model_copy(update={"first_year_investable": ("coal",)})
    sol = solve_plan(restricted, risk(0.99), NO_FLEX, solve_options=SIMPLEX)
    assert sol.value(("x", "nuclear", "N", YEAR)) == pytest.approx(0.0, abs=1e-9)


def test_hour_weight_override(hedging):
    lp = build(hedging, risk(0.0), NO_FLEX, ModelOptions(hours_weight=2.0))
    assert np.all(lp.hour_weights == 2.0)
    sol = solve_plan(hedging, risk(0.0), NO_FLEX, ModelOptions(hours_weight=2.0), SIMPLEX)
    # doubled savings make nuclear worth building even without risk aversion
    assert sol.value(("x", "nuclear", "N", YEAR)) == pytest.approx(60.0, abs=1e-6)
    assert sol.oc[0] == pytest.approx(2 * (100.0 * 44.0 + 60.0 * 5.0), rel=1e-9)


def test_fixed_plan_reproduces_the_optimum(hedging):
    sol = solve_plan(hedging, risk(0.6), NO_FLEX, solve_options=SIMPLEX)
    again = evaluate_fixed(hedging, risk(0.6), NO_FLEX, sol.first_stage(), solve_options=SIMPLEX)
    assert again.objective == pytest.approx(sol.objective, rel=1e-9)


def test_fixing_accepts_column_names(hedging):
    lp = build(hedging, risk(0.0), NO_FLEX)
    fixed = fix_first_stage(lp, {"x[nuclear,N,2030]": 30.0})
    col = lp.catalog[("x", "nuclear", "N", YEAR)]
    assert fixed.col_lower[col] == fixed.col_upper[col] == 30.0
    assert lp.col_upper[col] == np.inf


@pytest.mark.parametrize("investments", [
    {("x", "nuclear", "N", YEAR): 61.0},
    {("x", "nuclear", "N", YEAR): -1.0},
    {("g", "coal", "N", "h1", YEAR, "s1"): 1.0},
    {"x[unknown,N,2030]": 1.0},
])
def test_fixing_rejects_values_outside_the_program(hedging, investments):
    lp = build(hedging, risk(0.0), NO_FLEX)
    with pytest.raises(ModelBuildError):
        fix_first_stage(lp, investments)


def test_stochastic_solution_has_value(hedging):
    neutral = value_of_stochastic_solution(hedging, risk(0.0), NO_FLEX, solve_options=SIMPLEX)
    assert neutral.vss == pytest.approx(0.0, abs=1e-6)
    averse = value_of_stochastic_solution(hedging, risk(0.6), NO_FLEX, solve_options=SIMPLEX)
    assert averse.vss == pytest.approx(60 * (13 * 0.6 - 2), rel=1e-6)
    assert averse.expected_value_plan.value(("x", "nuclear", "N", YEAR)) == pytest.approx(0.0, abs=1e-6)


def test_tampered_solutions_are_rejected(hedging):
    lp = build(hedging, risk(0.5), NO_FLEX)
    sol = solve_plan(hedging, risk(0.5), NO_FLEX, solve_options=SIMPLEX)
    primal = sol.primal.copy()
    primal[lp.catalog[("oc", "s1")]] += 100.0
    with pytest.raises(IntegrityError):
        extract(lp, primal)


def test_toy_program_structure(toy):
    flex = flexibility_preset("flex-moderate")
    lp = build(toy, risk(0.5, 0.9), flex, ModelOptions(symmetric_ntc=True))
    assert sum(name.startswith("oc_def[") for name in lp.row_names) == 22
    assert sum(name.startswith("excess[") for name in lp.row_names) == 22
    assert any(name.startswith("ntc_sym[") for name in lp.row_names)
    assert any(name.startswith("irreversible[x,ocgt,DE,2020]") for name in lp.row_names)
    assert any(name.startswith("storage[psp,FR") for name in lp.row_names)
    assert lp.operating_costs.shape == (22, lp.num_cols)


def test_toy_investments_are_irreversible(toy):
    sol = solve_plan(toy, risk(0.5, 0.9), flexibility_preset("flex-moderate"), solve_options=HIGHS)
    keys = sorted({key[:3] for key in sol.first_stage()})
    years = toy.years
    for key in keys:
        values = [sol.value((*key, year)) for year in years]
        for a, b in zip(values, values[1:]):
            assert a <= b + 1e-6 * max(1.0, abs(b))
    assert sol.objective > 0
    assert len(sol.oc) == 22
