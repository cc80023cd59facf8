"""Closed-form feasibility certificates and the Fejer monitor."""

import json
import math

import numpy as np
import pytest

from nfbkit.certificates import (Certificate, FeasibilityError, FejerMonitor,
                                 alpha_bound, delta_value, fejer_step,
                                 fpdhf_constants, lambda_interval,
                                 make_certificate, phi_value, psi_value,
                                 rho_value)


# ---------------------------------------------------------------------------
# psi / phi / alpha_bound closed forms
# ---------------------------------------------------------------------------

def test_psi_frozen_values():
    assert psi_value(0.5, 0.1, 0.0) == 1.52
    assert psi_value(0.5, 0.1, 1.0) == 1.2888888888888888   # nu = 2*zeta
    assert psi_value(0.1, 0.5, 0.2) == 1.4049586776859504


def test_psi_domain_errors_name_the_inequality():
    with pytest.raises(FeasibilityError) as e:
        psi_value(-0.1, 0.5)
    assert e.value.condition == "0 <= zeta < 1"
    with pytest.raises(FeasibilityError):
        psi_value(1.0, 0.5)
    with pytest.raises(FeasibilityError) as e:
        psi_value(0.5, 0.0)
    assert e.value.condition == "epsilon > 0"
    with pytest.raises(FeasibilityError) as e:
        psi_value(0.5, 0.75)   # 1 - zeta^2 = 0.75 exactly
    assert e.value.condition == "epsilon < 1 - zeta^2"
    with pytest.raises(ValueError):
        psi_value(0.5, 0.1, nu=0.3)   # neither 0 nor 2*zeta


def test_psi_lands_in_open_unit_band():
    rng = np.random.default_rng(0)
    for _ in range(300):
        zeta = rng.uniform(0.0, 0.999)
        eps = rng.uniform(1e-12, 1.0) * (1.0 - zeta * zeta) * 0.999
        for nu in (0.0, 2.0 * zeta):
            p = psi_value(zeta, eps, nu)
            assert 1.0 < p < 2.0


def test_phi_frozen_and_strictly_decreasing():
    assert phi_value(0.0) == 1.0
    assert phi_value(0.5) == 0.25
    assert phi_value(0.2) == 0.7272727272727274
    assert phi_value(1.0 / 3.0) == pytest.approx(0.5, abs=1e-15)
    grid = np.linspace(0.0, 0.999, 500)
    vals = np.array([phi_value(a) for a in grid])
    assert np.all(np.diff(vals) < 0)
    with pytest.raises(ValueError):
        phi_value(-0.01)
    with pytest.raises(ValueError):
        phi_value(1.0)


def test_lambda_interval():
    assert lambda_interval(1.52, 0.2) == (0.0, 1.1054545454545457)
    lo, hi = lambda_interval(1.52, 0.0)
    assert lo == 0.0 and hi == 1.52
    with pytest.raises(ValueError):
        lambda_interval(2.0, 0.2)
    with pytest.raises(ValueError):
        lambda_interval(1.0, 0.2)


def test_alpha_bound_frozen_and_quadratic_root():
    assert alpha_bound(1.9, 0.5) == (0.4896237086169084, True)
    # a = psi/lam - 2 = 0 makes the root exactly 1/3
    assert alpha_bound(1.5, 0.75).value == pytest.approx(1.0 / 3.0,
                                                         abs=1e-15)
    assert alpha_bound(1.5, 1.0).value == pytest.approx(math.sqrt(5.0) - 2.0,
                                                        abs=1e-15)
    rng = np.random.default_rng(11)
    for _ in range(300):
        psi = rng.uniform(1.0 + 1e-6, 2.0 - 1e-6)
        lam = rng.uniform(1e-3, psi * 0.999)
        root, feasible = alpha_bound(psi, lam)
        assert feasible and 0.0 < root < 1.0
        a = psi / lam - 2.0
        residual = a * root * root - (2.0 * a + 3.0) * root + (a + 1.0)
        assert abs(residual) < 1e-10
        # the bound is exactly where the admissibility margin closes
        assert lam == pytest.approx(phi_value(root) * psi, rel=1e-9)


def test_alpha_bound_edge_cases():
    assert alpha_bound(1.5, 1.5) == (0.0, False)
    assert alpha_bound(1.5, 1.9) == (0.0, False)
    with pytest.raises(ValueError):
        alpha_bound(1.5, 0.0)
    with pytest.raises(ValueError):
        alpha_bound(2.5, 0.5)


def test_rho_and_delta_hand_values():
    assert rho_value(1.5, 0.75) == 1.0
    assert rho_value(1.52, 1.0) == pytest.approx(0.52, abs=1e-15)
    with pytest.raises(ValueError):
        rho_value(1.5, 0.0)
    # (1-0.3)*1 - 0.3*0.7*1 - 0.3*1.3 = 0.1
    assert delta_value(0.3, 0.3, 1.0, 1.0) == pytest.approx(0.1, abs=1e-15)
    assert delta_value(0.0, 0.0, 0.5, 0.5) == 0.5


# ---------------------------------------------------------------------------
# primal-dual step constants
# ---------------------------------------------------------------------------

def test_fpdhf_constants_frozen():
    sp = fpdhf_constants(1.0, 1.0, 0.3, 0.5, 1.0)
    assert sp.beta_tilde == 0.85
    assert sp.zeta_tilde == 0.32539568672798425
    assert sp.tau == 0.3 and sp.sigma == 0.5
    assert sp.nu == 2.0 * sp.zeta_tilde   # D and L both present
    assert sp.epsilon is None


def test_fpdhf_constants_nu_rules():
    # any of {D absent, coupling absent} makes the displacement monotone
    assert fpdhf_constants(1.0, 0.0, 0.3, 0.5, 1.0).nu == 0.0
    assert fpdhf_constants(1.0, 1.0, 0.3, 0.0, 1.0).nu == 0.0
    assert fpdhf_constants(1.0, 1.0, 0.3, 0.5, 0.0).nu == 0.0
    sp = fpdhf_constants(1.0, 1.0, 0.3, 0.5, 1.0, skew_monotone=True)
    assert sp.nu == 0.0
    sp = fpdhf_constants(1.0, 0.5, 0.3, 0.5, 1.0, skew_monotone=False)
    assert sp.nu == 2.0 * sp.zeta_tilde


def test_fpdhf_constants_domain():
    with pytest.raises(FeasibilityError) as e:
        fpdhf_constants(1.0, 1.0, 0.0, 0.5, 1.0)
    assert e.value.condition == "tau > 0"
    with pytest.raises(FeasibilityError) as e:
        fpdhf_constants(1.0, 1.0, 0.3, -0.1, 1.0)
    assert e.value.condition == "sigma >= 0"
    with pytest.raises(FeasibilityError) as e:
        fpdhf_constants(1.0, 1.0, 2.0, 0.5, 1.0)   # sigma*tau*||L||^2 = 1
    assert e.value.condition == "sigma*tau*||L||^2 < 1"


def test_step_params_conditions_and_check():
    sp = fpdhf_constants(1.0, 1.0, 0.3, 0.5, 1.0)
    conds = sp.conditions(0.5)
    assert [name for name, _, _ in conds] == [
        "epsilon > 0",
        "epsilon < 1 - zeta_tilde^2",
        "tau <= 2*beta_tilde*epsilon",
    ]
    assert all(ok for _, ok, _ in conds)
    name, ok, margin = conds[2]
    assert margin == pytest.approx(2.0 * 0.85 * 0.5 - 0.3, abs=1e-15)
    # epsilon too large for the metric band
    with pytest.raises(FeasibilityError) as e:
        sp.check(0.95)
    assert e.value.condition == "epsilon < 1 - zeta_tilde^2"
    # tau exceeds the cocoercive budget at tiny epsilon
    with pytest.raises(FeasibilityError) as e:
        sp.check(1e-4)
    assert e.value.condition == "tau <= 2*beta_tilde*epsilon"
    with pytest.raises(FeasibilityError) as e:
        sp.check(-1.0)
    assert e.value.condition == "epsilon > 0"
    # conditions() without an epsilon is empty, psi() refuses
    assert sp.conditions() == []
    with pytest.raises(ValueError):
        sp.psi()
    full = sp.with_epsilon(0.5)
    assert full.epsilon == 0.5
    assert full.psi() == psi_value(sp.zeta_tilde, 0.5, sp.nu)


def test_step_params_infinite_beta():
    sp = fpdhf_constants(np.inf, 0.0, 0.7, 0.2, 1.0)
    assert np.isinf(sp.beta_tilde)
    # the cocoercive budget never binds
    name, ok, margin = sp.conditions(0.5)[2]
    assert ok and np.isinf(margin)


# ---------------------------------------------------------------------------
# full certificate
# ---------------------------------------------------------------------------

def test_make_certificate_fields():
    c = make_certificate(0.5, 0.1, 0.8, 0.3)
    assert c.psi == 1.52 and c.nu == 0.0
    assert c.lambda_max == phi_value(0.3) * 1.52
    assert c.alpha_sup == alpha_bound(1.52, 0.8).value
    assert c.rho == pytest.approx(0.9, abs=1e-15)
    assert c.delta_hat == pytest.approx(
        delta_value(0.3, 0.3, c.rho, c.rho), abs=1e-15)
    assert c.feasible
    assert c.alpha_max(0.8) == c.alpha_sup


def test_make_certificate_boundary_is_strict():
    psi = psi_value(0.0, 0.5)
    lam_max = phi_value(0.2) * psi
    assert not make_certificate(0.0, 0.5, lam_max, 0.2).feasible
    assert make_certificate(0.0, 0.5, lam_max * (1 - 1e-12), 0.2).feasible
    # infeasible choices are returned, not raised
    c = make_certificate(0.0, 0.5, 1.49, 0.9)
    assert not c.feasible and c.delta_hat < 0


def test_make_certificate_domain_errors():
    with pytest.raises(ValueError):
        make_certificate(0.0, 0.5, 0.0, 0.2)
    with pytest.raises(ValueError):
        make_certificate(0.0, 0.5, 0.8, 1.0)
    with pytest.raises(FeasibilityError):
        make_certificate(0.5, 0.9, 0.8, 0.2)   # epsilon >= 1 - zeta^2


def test_certificate_serialization():
    c = make_certificate(0.5, 0.1, 0.8, 0.3)
    d = c.to_dict()
    assert d["psi"] == 1.52 and d["feasible"] is True
    assert set(d) == {"zeta", "epsilon", "nu", "psi", "lam", "alpha",
                      "lambda_max", "alpha_sup", "rho", "delta_hat",
                      "feasible"}
    assert json.loads(c.to_json())["lam"] == 0.8


# ---------------------------------------------------------------------------
# Fejer monitor on hand-built sequences
# ---------------------------------------------------------------------------

def _step(mon, n, z_n, z_nm1, z_np1, alpha=0.0, rho=0.5):
    return fejer_step(mon, n,
                      np.array([float(z_n)]), np.array([float(z_nm1)]),
                      np.array([float(z_np1)]), alpha, alpha, rho, rho)


def test_monitor_flags_growth_when_descent_promised():
    mon = FejerMonitor(np.zeros(1))
    # alpha = 0 collapses H_n to the squared distance: 4 -> 16 must flag
    rep = _step(mon, 1, z_n=2.0, z_nm1=1.0, z_np1=4.0)
    assert rep.flagged and rep.h == 16.0 and rep.delta == 0.5
    assert mon.violations == [(1, 12.0)]
    assert mon.max_increase == 12.0
    assert mon.dz_sq_sum == 4.0 and mon.last_dz_sq == 4.0
    assert mon.steps == 1


def test_monitor_accepts_descent():
    mon = FejerMonitor(np.zeros(1))
    rep = _step(mon, 1, z_n=2.0, z_nm1=4.0, z_np1=1.0)
    assert not rep.flagged and rep.h == 1.0
    assert mon.violations == [] and mon.max_increase == -3.0


def test_monitor_slack_tolerates_roundoff():
    mon = FejerMonitor(np.zeros(1), slack=1e-10)
    z_np1 = math.sqrt(1.0 + 5e-11)
    rep = _step(mon, 1, z_n=1.0, z_nm1=1.0, z_np1=z_np1)
    assert not rep.flagged
    assert 0.0 < mon.max_increase < 1e-10


def test_monitor_silent_when_margin_nonpositive():
    mon = FejerMonitor(np.zeros(1))
    rep = _step(mon, 1, z_n=2.0, z_nm1=1.0, z_np1=4.0, alpha=0.9, rho=0.1)
    assert rep.delta < 0.0 and not rep.flagged
    assert mon.violations == []
    assert mon.max_increase == -np.inf   # never armed


def test_monitor_worst_after_index():
    mon = FejerMonitor(np.zeros(1))
    _step(mon, 1, z_n=2.0, z_nm1=1.0, z_np1=4.0)    # +12
    _step(mon, 2, z_n=4.0, z_nm1=2.0, z_np1=5.0)    # +9
    assert mon.worst() == 12.0
    assert mon.worst(after=2) == 9.0
    assert mon.worst(after=3) == -np.inf


def test_monitor_uses_supplied_metric():
    mon = FejerMonitor(np.zeros(1), s_norm_sq=lambda v: 2.0 * float(v @ v))
    rep = _step(mon, 1, z_n=2.0, z_nm1=4.0, z_np1=1.0)
    assert rep.h == 2.0 and rep.dz_sq == 2.0
