import dataclasses

import numpy as np
import pytest

from conftest import single_cell
from fogslice.errors import ScenarioError
from fogslice.model import Allocation, load_scenario, save_scenario, scenario_to_dict, validate_scenario
from fogslice.scenarios import demo_scenario, random_scenario


def test_reference_cell_is_valid():
    report = validate_scenario(single_cell())
    assert report.valid and report.solvable, report.errors


def test_compute_budget_equal_to_arrivals_is_tight():
    report = validate_scenario(single_cell(lam=80.0, gamma=80.0))
    assert report.valid
    assert report.provisioning_tight
    assert "queue_stability" in report.tight_reasons[0] and "compute_budget" in report.tight_reasons[0]


def test_bandwidth_provisioning_tight():
    # 14 provisioned units at 1e5 Hz minimum need 1.4e6 Hz
    report = validate_scenario(single_cell(lam=10.0, beta=1e6, b0=1e5))
    assert report.valid and report.provisioning_tight


@pytest.mark.parametrize("theta", [0.0, 1.0, 1.5, -0.1])
def test_confidence_outside_open_interval_is_invalid(theta):
    sc = dataclasses.replace(single_cell(), confidence=theta)
    assert not validate_scenario(sc).valid


def test_zero_provisioned_units_is_invalid():
    # Pr(Poisson(0.01) = 0) > 0.9, so the cell would never enter the bandwidth budget
    report = validate_scenario(single_cell(lam=0.01, gamma=10.0))
    assert not report.valid
    assert "provisions 0 units" in report.errors[0]


def test_gamma_above_fog_pool_is_invalid():
    sc = dataclasses.replace(single_cell(), gamma=1e6)
    assert any("exceeds total fog capacity" in e for e in validate_scenario(sc).errors)


def test_roundtrip_two_stations(tmp_path):
    sc = demo_scenario(2, seed=5)
    path = tmp_path / "s.yaml"
    save_scenario(sc, path)
    assert load_scenario(path) == sc


def test_roundtrip_random_scenarios(tmp_path, rng):
    for i in range(20):
        sc = random_scenario(rng, int(rng.integers(1, 4)), int(rng.integers(1, 4)))
        path = tmp_path / f"s{i}.yaml"
        save_scenario(sc, path)
        assert load_scenario(path, validate=False) == sc


def test_missing_gamma_names_field(tmp_path):
    data = scenario_to_dict(single_cell())
    del data["gamma"]
    import yaml

    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(data))
    with pytest.raises(ScenarioError, match="gamma"):
        load_scenario(path)


def test_negative_data_size_rejected_on_load(tmp_path):
    import yaml

    data = scenario_to_dict(single_cell())
    data["services"][0]["data_size_bits"] = -5.0
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(data))
    with pytest.raises(ScenarioError, match="data_size_bits"):
        load_scenario(path)


def test_schema_version_mismatch(tmp_path):
    import yaml

    data = scenario_to_dict(single_cell())
    data["schema_version"] = 2
    path = tmp_path / "bad.yaml"
    path.write_text(yaml.safe_dump(data))
    with pytest.raises(ScenarioError, match="schema version"):
        load_scenario(path)


def test_yaml_syntax_error_reports_line(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("schema_version: 1\nservices: [\n  {id: 0\n")
    with pytest.raises(ScenarioError) as info:
        load_scenario(path)
    assert info.value.line is not None


def test_allocation_rejects_bad_entries():
    with pytest.raises(ValueError):
        Allocation(np.ones((1, 2)), np.ones((2, 1)))
    with pytest.raises(ValueError):
        Allocation([[np.nan]], [[1.0]])
    with pytest.raises(ValueError):
        Allocation([[-1.0]], [[1.0]])
    assert Allocation([[1.0]], [[2.0]]) == Allocation(np.array([[1.0]]), np.array([[2.0]]))


def test_validation_accepts_exactly_what_solvers_accept(rng):
    """Fuzz: solvers fail preconditions only on scenarios flagged invalid or tight."""
    from fogslice.baselines import centralized_solve
    from fogslice.errors import Infeasible

    for _ in range(30):
        sc = random_scenario(rng, int(rng.integers(1, 3)), int(rng.integers(1, 3)))
        if rng.uniform() < 0.3:
            sc = dataclasses.replace(sc, gamma=float(sc.arrival_rates().sum() * rng.uniform(0.5, 1.0)))
        report = validate_scenario(sc)
        try:
            centralized_solve(sc)
        except ValueError:
            assert not report.valid
        except Infeasible:
            # either flagged tight, or a latency bound genuinely cannot be met
            pass
        else:
            assert report.solvable
