import dataclasses
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platefringe.quadrature import QuadratureConfig
from platefringe.scenario import (Charge, Dipole, Geometry, Scenario,
                                  ScenarioValidationError, classify_orientation,
                                  reflect_electric_dipole, reflect_geometric,
                                  reflect_magnetic_dipole, validate)
from platefringe.trajectories import Adiabatic

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
vectors = st.tuples(finite, finite, finite)


def base_raw(**overrides):
    raw = {
        "particle": {"kind": "charge", "e2": 1.0},
        "trajectory": {"kind": "adiabatic", "R": 0.01, "T": 1.0},
        "geometry": {"plate": "present", "z0": 0.5, "j_hat": (1.0, 0.0, 0.0)},
    }
    for section, fields in overrides.items():
        raw.setdefault(section, {}).update(fields)
    return raw


def test_reflect_geometric_table():
    assert reflect_geometric((1, 0, 0)) == (1.0, 0.0, 0.0)
    assert reflect_geometric((0, 0, 1)) == (0.0, 0.0, -1.0)
    assert reflect_geometric((3, 4, 5)) == (3.0, 4.0, -5.0)


def test_reflect_electric_dipole_table():
    assert reflect_electric_dipole((1, 0, 0)) == (-1.0, 0.0, 0.0)
    assert reflect_electric_dipole((0, 0, 1)) == (0.0, 0.0, 1.0)
    assert reflect_electric_dipole((0, 0, 0)) == (0.0, 0.0, 0.0)


def test_reflect_magnetic_dipole_table():
    assert reflect_magnetic_dipole((0, 0, 1)) == (0.0, 0.0, -1.0)
    assert reflect_magnetic_dipole((1, 0, 0)) == (1.0, 0.0, 0.0)
    assert reflect_magnetic_dipole((0, 1, 0)) == (0.0, 1.0, 0.0)


@given(vectors)
def test_reflect_geometric_involution(v):
    assert reflect_geometric(reflect_geometric(v)) == tuple(float(c) for c in v)


@given(vectors)
def test_electric_dipole_dot_identity(p):
    refl = reflect_electric_dipole(p)
    dot = sum(a * b for a, b in zip(p, refl))
    scale = max(1.0, sum(c * c for c in p))
    assert dot == pytest.approx(p[2] ** 2 - p[0] ** 2 - p[1] ** 2,
                                abs=1e-12 * scale)


def test_orientation_reflection_signs():
    j_par = (1.0, 0.0, 0.0)
    j_perp = (0.0, 0.0, 1.0)
    assert sum(a * b for a, b in zip(j_par, reflect_geometric(j_par))) == 1.0
    assert sum(a * b for a, b in zip(j_perp, reflect_geometric(j_perp))) == -1.0


def test_classify_orientation():
    assert classify_orientation((0, 0, 1)) == "perpendicular"
    assert classify_orientation((1, 0, 0)) == "parallel"
    assert classify_orientation((0, 1, 0)) == "parallel"
    s = 1 / math.sqrt(2)
    assert classify_orientation((s, 0, s)) == "oblique"


def test_validate_happy_path_charge():
    s = validate(base_raw())
    assert isinstance(s.coupling, Charge)
    assert s.geometry.orientation == "parallel"
    assert s.geometry.plate


def test_validate_happy_path_dipole():
    raw = base_raw(particle={"kind": "dipole", "p": (0, 0, 0.1), "m": (0, 0, 0)})
    s = validate(raw)
    assert isinstance(s.coupling, Dipole)
    assert s.coupling.p == (0.0, 0.0, 0.1)


def test_validate_normalizes_direction():
    raw = base_raw(geometry={"j_hat": (2.0, 0.0, 0.0)})
    with pytest.raises(ScenarioValidationError) as err:
        validate(raw)
    assert any(v.code == "NonUnitDirection" for v in err.value.violations)
    # within tolerance the vector is normalized silently
    raw = base_raw(geometry={"j_hat": (1.0 + 5e-7, 0.0, 0.0)})
    s = validate(raw)
    assert math.isclose(sum(c * c for c in s.geometry.j_hat), 1.0, rel_tol=1e-14)


def test_validate_negative_distance():
    with pytest.raises(ScenarioValidationError) as err:
        validate(base_raw(geometry={"z0": -1.0}))
    assert any(v.code == "NegativeDistance" for v in err.value.violations)


def test_validate_missing_coupling():
    raw = base_raw()
    del raw["particle"]
    with pytest.raises(ScenarioValidationError) as err:
        validate(raw)
    assert any(v.code == "MissingCoupling" for v in err.value.violations)


def test_validate_inconsistent_trajectory():
    raw = base_raw(trajectory={"kind": "trapezoid", "v": 0.01, "T": 1.0, "tau": 0.3})
    with pytest.raises(ScenarioValidationError) as err:
        validate(raw)
    assert any(v.code == "InconsistentTrajectory" for v in err.value.violations)


def test_validate_relativistic_speed_rejected():
    raw = base_raw(trajectory={"kind": "adiabatic", "R": 0.5, "T": 1.0})
    with pytest.raises(ScenarioValidationError) as err:
        validate(raw)
    assert any(v.code == "InconsistentTrajectory" for v in err.value.violations)


def test_validate_marginal_speed_warns():
    raw = base_raw(trajectory={"kind": "adiabatic", "R": 0.2, "T": 1.0})
    with pytest.warns(UserWarning):
        validate(raw)


def test_scenario_immutable():
    s = validate(base_raw())
    with pytest.raises(dataclasses.FrozenInstanceError):
        s.coupling = Charge(e2=2.0)
    with pytest.raises(dataclasses.FrozenInstanceError):
        s.geometry.z0 = 1.0


def test_equal_scenarios_give_identical_results():
    from platefringe.decoherence import compute
    s1 = validate(base_raw())
    s2 = validate(base_raw())
    assert s1 == s2
    r1, r2 = compute(s1), compute(s2)
    assert r1.W_total == r2.W_total
    assert r1.W_boundary == r2.W_boundary


def test_plate_absent_forces_zero_boundary():
    from platefringe.decoherence import compute
    raw = base_raw(geometry={"plate": "absent"})
    r = compute(validate(raw))
    assert r.W_boundary == 0.0
    assert r.W_total == r.W_vac
