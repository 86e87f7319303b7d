import math

import numpy as np
import pytest

from platefringe.decoherence import (compute, expected_boundary_sign, sweep,
                                     w_charge_boundary, w_charge_vacuum,
                                     w_dipole_boundary, w_dipole_vacuum)
from platefringe.quadrature import QuadratureConfig
from platefringe.scenario import Charge, Dipole, Geometry, Scenario
from platefringe.trajectories import Adiabatic, PiecewiseTrapezoid, PulseTrain

J_PAR = (1.0, 0.0, 0.0)
J_PERP = (0.0, 0.0, 1.0)


def charge_scn(R=0.01, T=1.0, e2=1.0, plate=False, z0=0.0, j_hat=J_PAR, **num):
    return Scenario(coupling=Charge(e2=e2), trajectory=Adiabatic(R=R, T=T),
                    geometry=Geometry(plate=plate, z0=z0, j_hat=j_hat),
                    numerics=QuadratureConfig(**num))


def dipole_scn(p=(0, 0, 0), m=(0, 0, 0), R=0.01, T=1.0, plate=False, z0=0.0,
               j_hat=J_PAR, **num):
    return Scenario(coupling=Dipole(p=p, m=m), trajectory=Adiabatic(R=R, T=T),
                    geometry=Geometry(plate=plate, z0=z0, j_hat=j_hat),
                    numerics=QuadratureConfig(**num))


def test_adiabatic_vacuum_closed_form():
    r = compute(charge_scn())
    assert r.W_vac == pytest.approx(2e-4 / (3 * math.pi), rel=1e-6)
    assert r.W_boundary == 0.0


def test_coupling_and_velocity_scaling():
    w1 = compute(charge_scn(e2=1.0)).W_vac
    w2 = compute(charge_scn(e2=2.5)).W_vac
    assert w2 == pytest.approx(2.5 * w1, rel=1e-9)
    wr = compute(charge_scn(R=0.02)).W_vac
    assert wr == pytest.approx(4.0 * w1, rel=1e-6)


def test_static_source_gives_zero():
    r = compute(charge_scn(R=0.0))
    assert r.W_total == 0.0
    assert r.visibility == 1.0


def test_contact_doubling_perpendicular():
    r = compute(charge_scn(plate=True, z0=1e-3, j_hat=J_PERP))
    assert r.W_total / r.W_vac == pytest.approx(2.0, abs=2e-4)


def test_contact_cancellation_parallel():
    r = compute(charge_scn(plate=True, z0=1e-3, j_hat=J_PAR))
    assert r.W_total / r.W_vac < 1e-4
    assert r.W_total >= 0.0


def test_boundary_signs_near_contact():
    par = compute(charge_scn(plate=True, z0=0.02, j_hat=J_PAR))
    perp = compute(charge_scn(plate=True, z0=0.02, j_hat=J_PERP))
    assert par.W_boundary < 0  # recoherence
    assert perp.W_boundary > 0  # extra decoherence


def test_boundary_fades_at_large_distance():
    r = compute(charge_scn(plate=True, z0=40.0))
    assert abs(r.W_boundary) < 1e-4 * r.W_vac


def test_dipole_sign_table_matches_image_rule():
    """Boundary sign follows d . d_image: an electric dipole parallel to the
    plate (image antiparallel) recoheres, perpendicular decoheres more; the
    magnetic rule is the mirror opposite. Verified against the first-principles
    Monte Carlo oracle in test_oracle."""
    cases = [((0.1, 0, 0), (0, 0, 0), -1.0),
             ((0, 0, 0.1), (0, 0, 0), +1.0),
             ((0, 0, 0), (0.1, 0, 0), +1.0),
             ((0, 0, 0), (0, 0, 0.1), -1.0)]
    for p, m, sign in cases:
        s = dipole_scn(p=p, m=m, plate=True, z0=0.05)
        r = compute(s)
        assert math.copysign(1.0, r.W_boundary) == sign
        assert expected_boundary_sign(s) == sign
        assert abs(r.W_boundary) == pytest.approx(r.W_vac, rel=0.02)


def test_dipole_contact_magnitude():
    r = compute(dipole_scn(p=(0, 0, 0.1), plate=True, z0=1e-3))
    assert abs(r.W_boundary) / r.W_vac == pytest.approx(1.0, abs=1e-4)


def test_zero_dipole_gives_zero():
    r = compute(dipole_scn())
    assert r.W_total == 0.0


def test_dipole_charge_ratio_constants():
    wc = compute(charge_scn()).W_vac
    p0 = 0.1
    transverse = compute(dipole_scn(p=(0, 0, p0))).W_vac
    longitudinal = compute(dipole_scn(p=(p0, 0, 0))).W_vac
    assert transverse / wc == pytest.approx((8 / 5) * p0**2, rel=1e-6)
    assert longitudinal / wc == pytest.approx((4 / 5) * p0**2, rel=1e-6)


def test_electric_magnetic_symmetry():
    # same-axis electric and magnetic dipoles decohere identically in vacuum
    for axis in ((0.1, 0, 0), (0, 0.1, 0), (0, 0, 0.1)):
        we = compute(dipole_scn(p=axis)).W_vac
        wm = compute(dipole_scn(m=axis)).W_vac
        assert we == pytest.approx(wm, rel=1e-12)
    # and with opposite boundary contributions near the plate
    for axis in ((0.1, 0, 0), (0, 0, 0.1)):
        be = compute(dipole_scn(p=axis, plate=True, z0=0.04)).W_boundary
        bm = compute(dipole_scn(m=axis, plate=True, z0=0.04)).W_boundary
        assert be == pytest.approx(-bm, rel=1e-10)


def test_quadratic_dipole_scaling():
    w1 = compute(dipole_scn(p=(0, 0, 0.1))).W_vac
    w2 = compute(dipole_scn(p=(0, 0, 0.2))).W_vac
    assert w2 == pytest.approx(4.0 * w1, rel=1e-9)


def test_result_fields_are_consistent():
    r = compute(charge_scn(plate=True, z0=0.3))
    assert r.W_total == r.W_vac + r.W_boundary
    assert r.visibility == pytest.approx(math.exp(-r.W_total), rel=1e-15)
    assert r.emission_prob_equiv == pytest.approx(
        1.0 - math.exp(-r.W_total / 2), rel=1e-12)
    assert 0.0 < r.visibility <= 1.0
    assert 0.0 <= r.emission_prob_equiv < 1.0


def test_half_log2_visibility():
    # a scenario engineered to give W = ln 2 has visibility 1/2
    base = compute(charge_scn()).W_vac
    scale = math.log(2.0) / base
    r = compute(charge_scn(e2=scale))
    assert r.visibility == pytest.approx(0.5, rel=1e-9)


def test_method_agreement_small_amplitude():
    for j_hat in (J_PAR, J_PERP):
        s = charge_scn(R=0.004, plate=True, z0=0.25, j_hat=j_hat, rel_tol=1e-7)
        approx = compute(s, "dipole")
        full = compute(s, "full")
        assert full.W_total == pytest.approx(approx.W_total, rel=1e-3)
    sd = dipole_scn(p=(0.03, 0, 0.05), m=(0, 0.02, 0), R=0.004, plate=True,
                    z0=0.25, rel_tol=1e-7)
    assert compute(sd, "full").W_total == pytest.approx(
        compute(sd, "dipole").W_total, rel=1e-3)


def test_oblique_routes_to_full():
    c = 1 / math.sqrt(2)
    s = charge_scn(plate=True, z0=0.3, j_hat=(c, 0.0, c), rel_tol=1e-5)
    r = compute(s, "dipole")
    assert r.method == "full"
    assert r.W_total > 0
    # oblique boundary magnitude sits between the two symmetric cases at z0=0
    par = compute(charge_scn(plate=True, z0=0.3, j_hat=J_PAR))
    perp = compute(charge_scn(plate=True, z0=0.3, j_hat=J_PERP))
    assert min(par.W_total, perp.W_total) * 0.5 < r.W_total \
        < max(par.W_total, perp.W_total) * 1.5


def test_positivity_randomized():
    rng = np.random.default_rng(42)
    for _ in range(40):
        plate = rng.uniform() < 0.75
        z0 = float(rng.uniform(0.0, 5.0)) if plate else 0.0
        j_hat = J_PAR if rng.uniform() < 0.5 else J_PERP
        if rng.uniform() < 0.5:
            s = charge_scn(R=float(rng.uniform(1e-3, 0.03)), e2=float(rng.uniform(0.05, 2)),
                           plate=plate, z0=z0, j_hat=j_hat)
        else:
            p = tuple(rng.normal(scale=0.05, size=3)) if rng.uniform() < 0.8 else (0, 0, 0)
            m = tuple(rng.normal(scale=0.05, size=3)) if rng.uniform() < 0.8 else (0, 0, 0)
            s = dipole_scn(p=p, m=m, R=float(rng.uniform(1e-3, 0.03)),
                           plate=plate, z0=z0, j_hat=j_hat)
        r = compute(s)
        assert r.W_total >= -r.err_est


def test_sweep_z0_recovers_vacuum():
    s = charge_scn(plate=True, z0=0.01, j_hat=J_PAR)
    pts = sweep(s, "z0", [0.01, 0.1, 1.0])
    ws = [p.result.W_total for p in pts]
    assert all(p.error is None for p in pts)
    assert ws == sorted(ws)  # recoherence weakens with distance in the near zone
    far = sweep(s, "z0", [30.0])[0].result
    assert far.W_total == pytest.approx(far.W_vac, rel=1e-3)


def test_sweep_single_point_matches_compute():
    s = charge_scn(plate=True, z0=0.2)
    pt = sweep(s, "z0", [0.2])[0]
    direct = compute(s)
    assert pt.result.W_total == direct.W_total


def test_sweep_orientation_axis():
    s = charge_scn(plate=True, z0=0.1)
    pts = sweep(s, "orientation", ["parallel", "perpendicular"])
    assert pts[0].result.W_boundary < 0 < pts[1].result.W_boundary


def test_sweep_requires_monotone_numeric_grid():
    s = charge_scn(plate=True, z0=0.1)
    with pytest.raises(ValueError):
        sweep(s, "z0", [0.1, 0.5, 0.2])
    with pytest.raises(ValueError):
        sweep(s, "z0", [])


def test_sweep_collects_point_errors():
    s = charge_scn(plate=True, z0=0.1)
    pts = sweep(s, "z0", [-1.0, 0.1])
    assert pts[0].result is None and pts[0].error
    assert pts[1].result is not None


def test_pulse_train_linearity_quick():
    def train(n):
        return Scenario(coupling=Charge(e2=1.0),
                        trajectory=PulseTrain(R=0.01, T_pulse=1.0, T_sep=50.0, N=n),
                        geometry=Geometry(plate=False, z0=0.0, j_hat=J_PAR))
    w1 = compute(train(1)).W_total
    w3 = compute(train(3)).W_total
    assert w3 / (3 * w1) == pytest.approx(1.0, abs=5e-3)


def test_trapezoid_requires_cutoff():
    from platefringe.quadrature import CutoffRequired
    s = Scenario(coupling=Charge(e2=1.0),
                 trajectory=PiecewiseTrapezoid(v=0.01, T=1.0, tau=0.01),
                 geometry=Geometry(plate=False, z0=0.0, j_hat=J_PAR))
    with pytest.raises(CutoffRequired):
        compute(s)


def test_trapezoid_cutoff_dependence_is_logarithmic():
    # W(2 k_max) - W(k_max) approaches (2 e2 v^2 / pi^2) ln 2 inside the
    # logarithmic window 1/T << k_max << 1/tau
    v, tau = 0.01, 1e-4
    def w_at(k_max):
        s = Scenario(coupling=Charge(e2=1.0),
                     trajectory=PiecewiseTrapezoid(v=v, T=1.0, tau=tau),
                     geometry=Geometry(plate=False, z0=0.0, j_hat=J_PAR),
                     numerics=QuadratureConfig(k_max=k_max))
        return compute(s).W_total
    delta = w_at(800.0) - w_at(400.0)
    expected = 2 * v**2 / math.pi**2 * math.log(2.0)
    assert delta == pytest.approx(expected, rel=0.05)


def test_smooth_cutoff_independence():
    w40 = compute(charge_scn(k_max=40.0)).W_total
    w80 = compute(charge_scn(k_max=80.0)).W_total
    assert abs(w40 - w80) < 1e-11
