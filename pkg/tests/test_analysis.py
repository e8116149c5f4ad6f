import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from btbeam.analysis import (
    DecayRegressor,
    containment_report,
    convergence_study,
    fit_decay,
    fit_power_exponent,
    local_decay_rate,
    observed_orders,
    tail_window,
)
from btbeam.core import EnergyTrace, InitialCondition, ModelParams, make_initial
from btbeam.envelope import EnvelopeConstants, lower_envelope, upper_envelope
from btbeam.errors import InsufficientGrids, NonPositiveEnergy, ParamMismatch, TooFewSamples
from btbeam.integrate import simulate
from btbeam.operators import assemble_operators


def synthetic(t, e, params=None):
    return EnergyTrace.from_energies(np.asarray(t, float), np.asarray(e, float), params)


def test_power_law_exponent():
    t = np.logspace(1, 3, 400)
    fit = fit_power_exponent(synthetic(t, t**-2.0))
    assert fit.exponent == pytest.approx(-2.0, abs=1e-3)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.window[0] < fit.window[1]


def test_constant_exponent_is_zero():
    t = np.logspace(0, 3, 300)
    fit = fit_power_exponent(synthetic(t, np.full_like(t, 0.3)))
    assert abs(fit.exponent) <= 1e-12


def test_exponential_is_a_poor_power_fit():
    t = np.logspace(0, 2, 300)
    fit = fit_power_exponent(synthetic(t, np.exp(-t)))
    assert fit.r_squared < 0.99
    assert fit_decay(synthetic(t, np.exp(-t)), "exponential").exponent == pytest.approx(-1.0, abs=1e-10)


def test_fit_errors():
    t = np.logspace(0, 1, 30)
    with pytest.raises(TooFewSamples):
        fit_power_exponent(synthetic(t, t**-1.0))
    t = np.logspace(0, 3, 300)
    e = t**-1.0
    e[-1] = 0.0
    with pytest.raises(NonPositiveEnergy):
        fit_power_exponent(synthetic(t, e))
    with pytest.raises(ValueError):
        tail_window(t, 1.0)


@settings(max_examples=50, deadline=None)
@given(scale=st.floats(1e-6, 1e6), p=st.floats(-3, 0))
def test_fit_scale_invariant(scale, p):
    t = np.logspace(0, 3, 200)
    e = t**p * (1 + 0.1 * np.sin(t))
    a = fit_power_exponent(synthetic(t, e))
    b = fit_power_exponent(synthetic(t, scale * e))
    assert b.exponent == pytest.approx(a.exponent, abs=1e-9)
    assert b.intercept == pytest.approx(a.intercept + np.log(scale), abs=1e-8)


def test_local_rate_examples():
    t = np.linspace(0, 2, 2001)
    rates = local_decay_rate(synthetic(t, np.exp(-3 * t)))
    assert np.max(np.abs(rates.rates - 3.0)) <= 1e-6
    t = np.linspace(1, 200, 19901)
    rates = local_decay_rate(synthetic(t, 1 / t))
    assert rates.at(100.0) == pytest.approx(0.01, abs=1e-4)
    with pytest.raises(NonPositiveEnergy):
        local_decay_rate(synthetic([0, 1, 2], [1.0, 0.0, 0.0]))


def test_local_rate_product_rule():
    t = np.linspace(1, 50, 500)
    e1, e2 = t**-0.7, np.exp(-0.2 * t) * (2 + np.cos(t))
    r1, r2 = local_decay_rate(synthetic(t, e1)), local_decay_rate(synthetic(t, e2))
    r12 = local_decay_rate(synthetic(t, e1 * e2))
    np.testing.assert_allclose(r12.rates, r1.rates + r2.rates, rtol=1e-10, atol=1e-12)


def test_simulated_rate_drops():
    p = ModelParams(alpha=1.0, q=1.0, n=32, t_end=1e3, samples_per_decade=40)
    ops = assemble_operators(1.0, 32)
    rates = local_decay_rate(simulate(p, make_initial(InitialCondition(), ops), ops))
    t_end = rates.times[-1]
    assert rates.rates[-1] <= 0.5 * rates.at(t_end / 10)


@pytest.fixture()
def ec():
    return EnvelopeConstants.build(1.0, 1.0, 1.0, d=0.05)


def test_containment_on_lower_envelope(ec):
    t = np.linspace(0, 50, 501)
    tr = synthetic(t, lower_envelope(t, ec), ModelParams(alpha=1.0, q=1.0))
    rep = containment_report(tr, ec)
    assert rep.passed
    assert rep.min_margin_lo == 0.0
    tr = synthetic(t, upper_envelope(t, ec), ModelParams(alpha=1.0, q=1.0))
    assert containment_report(tr, ec).passed


def test_containment_flags_sample_above_upper(ec):
    t = np.linspace(0, 50, 501)
    e = 0.5 * (lower_envelope(t, ec) + upper_envelope(t, ec))
    e[300] = upper_envelope(t[300], ec) * 1.02
    rep = containment_report(synthetic(t, e, ModelParams(alpha=1.0, q=1.0)), ec)
    assert not rep.passed
    assert rep.violations == [(300, t[300], "upper")]


def test_containment_param_mismatch(ec):
    t = np.linspace(0, 5, 51)
    with pytest.raises(ParamMismatch):
        containment_report(synthetic(t, np.ones_like(t), ModelParams(alpha=2.0)), ec)
    with pytest.raises(ParamMismatch):
        containment_report(synthetic(t, 2 * np.ones_like(t), ModelParams(alpha=1.0)), ec)


def test_containment_simulated_run():
    p = ModelParams(alpha=1.0, q=1.0, kappa=0.0, n=64, t_end=200.0)
    ops = assemble_operators(1.0, 64)
    tr = simulate(p, make_initial(InitialCondition(), ops), ops)
    rep = containment_report(tr, tr.constants)
    assert rep.passed and not rep.violations


def test_observed_orders():
    h = np.array([0.1, 0.05, 0.025])
    np.testing.assert_allclose(observed_orders(h, 1 + 3 * h**2, exact=1.0), [2.0, 2.0], rtol=1e-10)
    assert observed_orders(h, 1 + 3 * h**2)[0] == pytest.approx(2.0, rel=1e-8)
    # non-dyadic triple
    h = np.array([0.1, 0.06, 0.03])
    assert observed_orders(h, 2 - h**1.5)[0] == pytest.approx(1.5, rel=1e-8)


def test_convergence_linear_problem():
    p = ModelParams(alpha=0.0, t_end=1.0, dt=1e-3, sample_every=100)
    rep = convergence_study(p, InitialCondition("sin_sq_mode", 1, 0.1), [32, 64, 128])
    assert min(rep.energy_orders) >= 1.9
    assert min(rep.lambda1_orders) >= 1.9


@pytest.mark.parametrize("grids", [[64, 64, 64], [32, 64], [128, 64, 32], [32, 40, 128]])
def test_convergence_bad_grids(grids):
    with pytest.raises(InsufficientGrids):
        convergence_study(ModelParams(t_end=0.1), InitialCondition(), grids)


def test_regressor_estimator_api():
    reg = DecayRegressor(model="power")
    assert reg.get_params() == {"model": "power"}
    twin = clone(reg).set_params(model="exponential")
    assert twin.model == "exponential" and reg.model == "power"
    with pytest.raises(NotFittedError):
        reg.predict([[1.0]])
    t = np.logspace(0, 2, 50)
    reg.fit(t.reshape(-1, 1), 5 * t**-1.5)
    assert reg.exponent_ == pytest.approx(-1.5, abs=1e-12)
    np.testing.assert_allclose(reg.predict(t), 5 * t**-1.5, rtol=1e-10)
    assert reg.score(t, 5 * t**-1.5) == pytest.approx(1.0)
    with pytest.raises(NonPositiveEnergy):
        DecayRegressor().fit(t, -t)
