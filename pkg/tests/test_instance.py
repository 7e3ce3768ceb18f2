try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
import pytest
import tomli_w

from rapo.instance import (
    HOURS_PER_YEAR,
    InstanceValidationError,
    IssueCode,
    bundled_instance_path,
    instance_from_document,
    load_document,
    load_instance,
    parse_document,
    save_document,
)
from rapo.scenario import first_stage_identical


def toy_raw() -> dict:
    return tomllib.loads(bundled_instance_path().read_text(encoding="utf-8"))


def issues_of(raw: dict) -> set[IssueCode]:
    with pytest.raises(InstanceValidationError) as info:
        instance_from_document(parse_document(tomli_w.dumps(raw)))
    return info.value.codes


def test_toy_instance(toy):
    assert toy.name == "toy"
    assert toy.node_ids == ("DE", "FR")
    assert toy.years == (2020, 2025, 2030)
    assert len(toy.scenarios) == 22
    assert toy.scenarios.probabilities.sum() == pytest.approx(1.0)
    assert first_stage_identical(toy.scenarios)
    assert toy.unresolved_references() == []
    assert toy.res_techs == ("wind",)
    assert toy.finance.base_year == 2020


def test_hour_weights(toy):
    np.testing.assert_array_equal(toy.hour_weights(), [1460.0, 2920.0, 2190.0, 2190.0])
    np.testing.assert_array_equal(toy.hour_weights(2.0), [2.0, 2.0, 2.0, 2.0])
    unweighted = toy.model_copy(update={"hours": tuple(hour.model_copy(update={"weight": None}) for hour in toy.hours)})
    np.testing.assert_allclose(unweighted.hour_weights(), np.full(4, HOURS_PER_YEAR / 4))


def test_interconnector_lifetime_defaults_to_fifty_years():
    raw = toy_raw()
    for link in raw["interconnectors"]:
        del link["lifetime"]
    raw["interconnectors"][0]["lifetime"] = 30
    instance = instance_from_document(parse_document(tomli_w.dumps(raw)))
    assert [link.lifetime for link in instance.interconnectors] == [30, 50]


def test_availability_prefers_the_profile(toy):
    wind = toy.tech("wind")
    np.testing.assert_allclose(toy.availability(wind, toy.node("DE")), [0.55, 0.40, 0.12, 0.35])
    lignite = toy.tech("lignite")
    np.testing.assert_allclose(toy.availability(lignite, toy.node("DE")), np.full(4, 0.85))


def test_expected_value_scenario_is_the_anchor_mean(toy):
    ev = toy.expected_value_scenario()
    assert ev.probability == 1.0
    assert ev.co2_price_at(2030) == pytest.approx((50.0 + 89.9 + 28.8) / 3)
    assert ev.co2_price_at(2020) == 25.0


def test_blend_factors_can_be_overridden():
    instance = load_instance(bundled_instance_path(), factors=(0.5,))
    # three anchors, three pairs, the expected value and three midpoints
    assert len(instance.scenarios) == 10


def test_document_round_trip(tmp_path):
    doc = load_document(bundled_instance_path())
    path = tmp_path / "copy.toml"
    save_document(doc, path)
    assert load_document(path) == doc
    assert len(load_instance(path).scenarios) == 22


def test_sector_shares_have_to_sum_to_one():
    raw = toy_raw()
    raw["nodes"][0]["sector_shares"]["industry"] = 0.6
    assert IssueCode.SHARE_SUM in issues_of(raw)


def test_all_issues_are_collected():
    raw = toy_raw()
    raw["nodes"][0]["sector_shares"]["industry"] = 0.6
    raw["interconnectors"][0]["to"] = "NL"
    raw["nodes"][1]["profiles"]["wind"] = [0.5]
    with pytest.raises(InstanceValidationError) as info:
        instance_from_document(parse_document(tomli_w.dumps(raw)))
    assert {IssueCode.SHARE_SUM, IssueCode.UNRESOLVED_REF, IssueCode.PROFILE_LENGTH} <= info.value.codes
    assert "interconnectors[DE>NL]" in str(info.value)


def test_three_anchors_are_required():
    raw = toy_raw()
    del raw["scenarios"]["anchors"]["EUCO"]
    assert IssueCode.ANCHOR_COUNT in issues_of(raw)


def test_missing_scenario_data_is_reported():
    raw = toy_raw()
    del raw["scenarios"]["anchors"]["ST"]["co2_price"]["2030"]
    assert IssueCode.INDEX_MISMATCH in issues_of(raw)


def test_years_must_increase():
    raw = toy_raw()
    raw["years"] = [2020, 2030, 2025]
    assert IssueCode.YEAR_ORDER in issues_of(raw)


def test_duplicate_technologies():
    raw = toy_raw()
    raw["technologies"].append(dict(raw["technologies"][0]))
    assert IssueCode.DUPLICATE_ID in issues_of(raw)


def test_schema_version_is_checked():
    raw = toy_raw()
    raw["schema_version"] = 2
    with pytest.raises(InstanceValidationError) as info:
        parse_document(tomli_w.dumps(raw))
    assert info.value.codes == {IssueCode.SCHEMA_VERSION}


def test_unknown_fields_violate_the_schema():
    raw = toy_raw()
    raw["technologies"][0]["colour"] = "brown"
    with pytest.raises(InstanceValidationError) as info:
        parse_document(tomli_w.dumps(raw))
    assert info.value.codes == {IssueCode.SCHEMA}
    assert "colour" in str(info.value)


def test_malformed_toml():
    with pytest.raises(InstanceValidationError) as info:
        parse_document("name = ")
    assert info.value.codes == {IssueCode.SCHEMA}
