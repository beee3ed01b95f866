import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fene_decay_lab import decay_lab as lab
from fene_decay_lab.config_space import poincare_eigenpairs
from fene_decay_lab.fluid import TorusGrid
from fene_decay_lab.integrator import equilibrium_state
from fene_decay_lab.trace import SERIES, DecayTrace, TraceError

KINDS = [lab.PowerLaw(3), lab.PowerLaw(1), lab.LogPower(3), lab.LogPower(5), lab.ShiftedPower(2, 1.0),
         lab.ShiftedPower(3, 4.5)]


def test_splitting_radius_examples():
    assert lab.splitting_radius(lab.PowerLaw(3), 0.0) == pytest.approx(math.sqrt(3), rel=1e-15)
    assert lab.splitting_radius(lab.LogPower(3), 0.0) == pytest.approx(math.sqrt(3 / math.e), rel=1e-15)
    assert lab.splitting_radius(lab.LogPower(3), 0.0) == pytest.approx(1.05046, abs=1e-4)
    with pytest.raises(ValueError):
        lab.splitting_radius(lab.PowerLaw(3), -1.0)


@pytest.mark.parametrize("kind", KINDS)
def test_schedule_invariants(kind):
    t = np.linspace(0, 200, 2001)
    f, fp = kind.f(t), kind.fprime(t)
    assert np.all(f > 0) and np.all(fp > 0)
    assert np.all(np.diff(fp / f) < 0)
    r = lab.splitting_radius(kind, t)
    assert np.all(np.diff(r) < 0)
    np.testing.assert_allclose(r**2 * f, fp, rtol=1e-14)


def test_schedule_validation():
    with pytest.raises(ValueError):
        lab.ShiftedPower(2, 0.5)
    with pytest.raises(ValueError):
        lab.parse_schedule("cubic")
    assert lab.parse_schedule("logpower", m=5) == lab.LogPower(5)


def _trace(t, **series):
    return DecayTrace.from_arrays(np.asarray(t, float), **series)


def test_power_fit_exact_and_scale_invariant():
    t = np.linspace(0, 20, 200)
    y = (1 + t) ** -1.5
    fit = lab.fit_power_exponent(_trace(t, u_l2sq=y), "u_l2sq")
    assert abs(fit.value + 1.5) < 1e-6 and fit.good
    scaled = lab.fit_power_exponent(_trace(t, u_l2sq=7.3 * y), "u_l2sq")
    assert abs(scaled.value - fit.value) < 1e-12


def test_power_fit_flags_exponential():
    t = np.linspace(0, 10, 200)
    fit = lab.fit_power_exponent(_trace(t, u_l2sq=np.exp(-t)), "u_l2sq")
    assert not fit.good


def test_power_fit_noisy():
    rng = np.random.default_rng(42)
    t = np.linspace(0, 20, 200)
    y = (1 + t) ** -1.5 * (1 + 0.01 * rng.standard_normal(t.size))
    fit = lab.fit_power_exponent(_trace(t, u_l2sq=y), "u_l2sq")
    assert abs(fit.value + 1.5) <= 0.05 and fit.good
    value, conf = fit
    assert conf > 0


def test_exponential_fit_and_errors():
    t = np.linspace(0, 5, 100)
    fit = lab.fit_exponential_rate(_trace(t, relative_l2=np.exp(-2 * t)), "relative_l2", (0.0, 5.0))
    assert abs(fit.value - 2.0) < 1e-6
    with pytest.raises(lab.FitError):
        lab.fit_exponential_rate(_trace(t, relative_l2=np.zeros_like(t)), "relative_l2")
    with pytest.raises(lab.FitError):
        lab.fit_exponential_rate(_trace(t, relative_l2=np.exp(-t)), "relative_l2", (0.0, 0.05))


def test_coupled_energy(basis2, ops2):
    g = TorusGrid(2, 16, 3.0)
    eq = equilibrium_state(g, basis2)
    assert lab.coupled_energy(eq, 2.0, ops2) == 0.0
    from fene_decay_lab.integrator import localized_velocity, perturbed_configuration, SystemState
    s = SystemState(0.0, localized_velocity(g, 0.1), perturbed_configuration(g, basis2, 0.05))
    rel = lab.coupled_energy(s, 1.0, ops2) - s.u.l2sq()
    assert lab.coupled_energy(s, 3.5, ops2) == pytest.approx(lab.coupled_energy(s, 1.0, ops2) + 2.5 * rel,
                                                             rel=1e-14)
    with pytest.raises(ValueError):
        lab.coupled_energy(s, 0.0, ops2)


def test_lambda_threshold_synthetic():
    t = np.arange(5.0)
    u = np.array([1.0, 1.1, 1.15, 1.16, 1.16])
    rel = np.array([1.0, 0.8, 0.7, 0.6, 0.5])
    tr = _trace(t, u_l2sq=u, relative_l2=rel)
    lo, hi = lab.monotone_threshold(tr)
    assert lo == pytest.approx(0.5) and hi == math.inf
    lam = lab.lambda_min_bisect(tr, 0.0, 10.0)
    assert lam == pytest.approx(0.5, rel=1e-9)
    assert lab.lambda_min_bisect(_trace(t, u_l2sq=u[::-1], relative_l2=rel)) == 0.0
    assert lab.lambda_min_bisect(_trace(t, u_l2sq=u, relative_l2=np.ones(5)), 0.0, 10.0) == math.inf


def test_splitting_check():
    t = np.linspace(0, 5, 51)
    zero = lab.splitting_inequality_check(_trace(t), 2, 1.0)
    assert zero.passed and np.all(zero.ratio == 0)
    # heat-like data in 2D: low-frequency energy ~ (1+t)^-1 and bound (1+t)^0
    tr = _trace(t, low_freq_energy=(1 + t) ** -1.0, fisher_g=np.zeros_like(t))
    rep = lab.splitting_inequality_check(tr, 2, 1.0)
    assert rep.passed and np.all(np.diff(rep.ratio) < 0)
    with pytest.raises(TraceError):
        lab.splitting_inequality_check(_trace([0.0]), 2, 0.0)


def test_probes(basis2, ops2):
    r1 = lab.probe_lemma1(basis2, 400, seed=1)
    assert np.all(np.isfinite(r1.ratios)) and np.all(r1.ratios >= 0)
    assert r1.stability_delta <= 0.10
    fam = r1.extra["family"]
    assert np.isfinite(fam["limit"]) and abs(fam["ratio"][-1] - fam["limit"]) < 0.01 * fam["limit"]
    again = lab.probe_lemma1(basis2, 400, seed=1)
    assert np.array_equal(r1.ratios, again.ratios)
    # the equilibrium sample has ratio 0 by definition
    r, _ = lab._lemma1_ratios(basis2, np.zeros((1, basis2.n_modes)))
    assert r[0] == 0.0
    r3 = lab.probe_lemma3(basis2, 400, (0.1, 0.5, 1.0), seed=1, ops=ops2)
    sups = [r3[e].sup for e in (0.1, 0.5, 1.0)]
    assert all(math.isfinite(s) for s in sups)
    assert sups[0] >= sups[1] >= sups[2] >= 0
    for e, rep in r3.items():
        assert rep.sup <= rep.extra["subspace_sup"] * (1 + 1e-10) + 1e-14


def test_steady_state_verdicts():
    t = np.linspace(0, 2, 21)
    zeros = np.zeros_like(t)
    ok = lab.steady_state_check(_trace(t, grad_u_l2sq=zeros), 1.0, 1e-4)
    assert ok.passed
    bad = lab.steady_state_check(_trace(t, u_l2sq=np.ones_like(t), grad_u_l2sq=zeros), 1.0, 1e-4)
    assert not bad.passed and "||u||" in bad.reason
    grow = lab.steady_state_check(_trace(t, grad_u_l2sq=1e-12 * t), 1.0, 1e-4, t_transient=0.5)
    assert not grow.passed and not grow.monotone_after_transient
    with pytest.raises(TraceError):
        lab.steady_state_check(_trace(t), 1.0, 1e-4)


def test_balance_residuals():
    t = np.linspace(0, 1, 1001)
    tr = _trace(t, relative_l2=np.exp(-2 * t), fisher_g=np.exp(-2 * t))
    assert lab.entropy_balance_residual(tr) < 1e-6
    e = np.exp(-t)
    tr = _trace(t, u_l2sq=e, relative_l2=e, grad_u_l2sq=0.5 * e, fisher_g=0.5 * e)
    assert lab.energy_balance_residual(tr, 1.0, np.zeros_like(t)) < 1e-6


def test_oracle_trivial_cases(basis2, ops2):
    for sigma, tol in ((np.zeros((2, 2)), 1e-12), (np.array([[0.0, 1.0], [-1.0, 0.0]]), 1e-10)):
        cmp_ = lab.fp_oracle_compare(basis2, sigma, basis2.one, 0.2, 32, 16, ops=ops2)
        assert cmp_.relative_error < tol
        assert math.isnan(cmp_.perturbation_error)
    with pytest.raises(ValueError):
        lab.fp_oracle_compare(basis2, np.zeros((2, 2)), np.ones(3), 0.1)


def test_fourier_stress_constant():
    for dim in (2, 3):
        c = lab.fourier_stress_constant(dim, 1e-6)
        assert c["substituted"] == pytest.approx(2 * math.pi, rel=1e-15)
        assert c["substituted_quadrature"] == pytest.approx(c["substituted"], rel=1e-12)
        assert c["raw_truncated_quadrature"] == pytest.approx(c["raw_truncated"], rel=1e-8)
    with pytest.raises(ValueError):
        lab.fourier_stress_constant(4)


def test_heat_window_and_fit_window():
    g = TorusGrid(2, 32, 16 * math.pi)
    info = lab.heat_window(g, 1.0, 1, 1.0, 0)
    assert 0 < info["t_box"] <= info["t_diffusive"] == pytest.approx(16 * math.pi**2)
    assert info["continuum_exponent"] == -2.0
    assert 0 <= info["t_agree_start"] < info["t_agree"]
    info3 = lab.heat_window(TorusGrid(3, 32, 16 * math.pi), 1.0, 0, 1.0, 0)
    assert info3["t_agree_start"] == 0.0 and abs(info3["initial_mismatch"]) < 0.05
    assert info3["continuum_exponent"] == -1.5
    assert lab.fit_window(1e-3, 10, 7.0) == (0.05, 7.0)


def test_bootstrap_report():
    t = np.linspace(0, 10, 101)
    rep = lab.bootstrap_report(_trace(t, u_l2sq=(1 + t) ** -1.5), 3, (0.0, 10.0))
    assert rep["stage1"]["satisfied"] and rep["stage2"]["satisfied"]
    rep2 = lab.bootstrap_report(_trace(t, u_l2sq=(1 + t) ** -0.2), 2, (0.0, 10.0))
    assert rep2["stage1"]["satisfied"] and not rep2["stage2"]["satisfied"]
    assert "log_stage" in rep2


@settings(max_examples=30, deadline=None)
@given(p=st.floats(-3.0, -0.1), c=st.floats(1e-6, 1e6))
def test_power_fit_recovers_any_exponent(p, c):
    t = np.linspace(0, 50, 60)
    fit = lab.fit_power_exponent(_trace(t, u_l2sq=c * (1 + t) ** p), "u_l2sq")
    assert abs(fit.value - p) < 1e-9


def test_trace_validation():
    tr = DecayTrace()
    tr.append(0.0, dict.fromkeys(SERIES, 1.0))
    with pytest.raises(TraceError):
        tr.append(0.0, dict.fromkeys(SERIES, 1.0))
    with pytest.raises(TraceError):
        tr.append(1.0, {"u_l2sq": 1.0})
    with pytest.raises(TraceError):
        tr.append(1.0, dict.fromkeys(SERIES, float("nan")))
    with pytest.raises(TraceError):
        DecayTrace.from_arrays([0.0, 0.0])
    assert np.isnan(tr.series("grad_u_l2sq")[0])
