import numpy as np
import pytest

from gapfit import autodiff
from gapfit.benchmarks import fit_linreg_locf
from gapfit.errors import InsufficientDataError, UsageError
from gapfit.model import Beta, HospitalSeries, loss
from gapfit.optimizer import (FitConfig, detect_divergence, fit, fit_cohort,
                              jacobi_etas, l2_penalty, warm_start_inits)

from conftest import make_series, random_gapped_series


def test_config_validation():
    with pytest.raises(UsageError):
        FitConfig(eta=(1e-3, 1e-3))
    with pytest.raises(UsageError):
        FitConfig(eta=(1e-3, -1e-3, 1e-4))
    with pytest.raises(UsageError):
        FitConfig(steps=0)
    with pytest.raises(UsageError):
        FitConfig(lam=-0.1)
    with pytest.raises(UsageError):
        FitConfig(method="newton")
    with pytest.raises(UsageError):
        FitConfig(incidence_scale=0.0)
    with pytest.raises(UsageError):
        FitConfig(eta_safety=-1.0)


def test_l2_penalty_values_and_gradient():
    assert l2_penalty(Beta(), 3.0) == 0.0
    assert l2_penalty(Beta(1, 2, 3), 1.0) == 14.0
    res = autodiff.gradient(lambda b: l2_penalty(b, 0.5), [1.0, 2.0, 3.0])
    assert res.gradient == pytest.approx([1.0, 2.0, 3.0])


def test_detect_divergence():
    assert not detect_divergence([1.0, 0.5, 0.2], Beta(0.1, 0.0, 0.0))
    assert detect_divergence([1.0, np.inf], Beta())
    assert detect_divergence([1.0, 1.2, 1.5], Beta())
    assert detect_divergence([1.0, 0.5], Beta(np.nan, 0.0, 0.0))
    with pytest.raises(UsageError):
        detect_divergence([], Beta())


def test_one_gd_step_equals_minus_eta_gradient(anchor_series):
    eta0 = 1e-2
    config = FitConfig(eta=(eta0, eta0, eta0), steps=1, incidence_scale=1.0)
    res = fit(anchor_series, config)
    expected = -eta0 * np.array([-4.0 / 3.0, -10.0 / 3.0, -4.0 / 3.0])
    assert res.beta.as_array() == pytest.approx(expected, abs=1e-14)
    assert res.loss_trace[0] == pytest.approx(2.0 / 3.0)


def test_fit_zero_series_stays_at_zero():
    s = make_series([0, 0, 0, 0], z=[0, 0, 0, 0])
    res = fit(s, FitConfig(steps=50))
    assert res.beta == Beta(0.0, 0.0, 0.0)
    assert res.converged
    assert res.loss_trace[-1] == 0.0


def test_fit_diverges_with_huge_eta(anchor_series):
    config = FitConfig(eta=(1e3, 1e3, 1e3), steps=100, incidence_scale=1.0)
    res = fit(anchor_series, config)
    assert not res.converged
    assert res.fell_back


def test_fit_insufficient_data():
    with pytest.raises(InsufficientDataError):
        fit(make_series([None, 5]), FitConfig())


def test_recovers_known_beta_noiseless():
    # T=70 fully observed, beta*=(0.1, -0.05, 0.02); the fit must land on it.
    true = Beta(0.1, -0.05, 0.02)
    T = 70
    rng = np.random.Generator(np.random.PCG64(17))
    z = rng.uniform(0, 8, T)
    y = np.empty(T)
    y[0] = 12.0
    for t in range(1, T):
        y[t] = y[t - 1] + true.b1 + true.b2 * y[t - 1] + true.b3 * z[t - 1]
    s = HospitalSeries("n", y, z)
    res = fit(s, FitConfig(steps=8000, incidence_scale=1.0, auto_eta=True))
    assert np.abs(res.beta.as_array() - true.as_array()).max() < 1e-3
    assert res.loss_trace[-1] < 1e-8


def test_warm_start_at_truth_stays_there():
    true = Beta(0.2, -0.08, 0.03)
    T = 40
    rng = np.random.Generator(np.random.PCG64(29))
    z = rng.uniform(0, 5, T)
    y = np.empty(T)
    y[0] = 9.0
    for t in range(1, T):
        y[t] = y[t - 1] + true.b1 + true.b2 * y[t - 1] + true.b3 * z[t - 1]
    s = HospitalSeries("w", y, z)
    config = FitConfig(steps=200, incidence_scale=1.0, init=true)
    res = fit(s, config)
    assert np.abs(res.beta.as_array() - true.as_array()).max() < 1e-10
    assert res.converged


def test_batch_and_tape_engines_agree():
    rng = np.random.Generator(np.random.PCG64(41))
    for _ in range(5):
        s = random_gapped_series(rng, T=14)
        kwargs = dict(eta=(1e-3, 1e-3, 1e-4), steps=80, lam=0.1)
        batch = fit(s, FitConfig(engine="batch", **kwargs))
        tape = fit(s, FitConfig(engine="tape", **kwargs))
        assert batch.beta.as_array() == pytest.approx(
            tape.beta.as_array(), rel=1e-9, abs=1e-12)
        assert batch.loss_trace == pytest.approx(tape.loss_trace, rel=1e-9)


def test_adam_runs_and_descends(anchor_series):
    config = FitConfig(method="adam", eta=(1e-2, 1e-2, 1e-2), steps=500,
                       incidence_scale=1.0)
    res = fit(anchor_series, config)
    assert res.converged
    assert res.loss_trace[-1] < res.loss_trace[0]


def test_fit_is_deterministic():
    rng = np.random.Generator(np.random.PCG64(55))
    s = random_gapped_series(rng, T=20)
    config = FitConfig(steps=300)
    a = fit(s, config)
    b = fit(s, config)
    assert a.beta == b.beta
    assert a.loss_trace == b.loss_trace


def test_fit_does_not_mutate_series():
    rng = np.random.Generator(np.random.PCG64(63))
    s = random_gapped_series(rng, T=15)
    y_before, z_before = s.y.copy(), s.z.copy()
    fit(s, FitConfig(steps=100))
    np.testing.assert_array_equal(s.z, z_before)
    np.testing.assert_array_equal(np.isfinite(s.y), np.isfinite(y_before))


def test_fit_cohort_matches_single_fits():
    rng = np.random.Generator(np.random.PCG64(77))
    cohort = [random_gapped_series(rng, T=16, id=f"c{i}") for i in range(6)]
    config = FitConfig(steps=200)
    batch = fit_cohort(cohort, config)
    for s, res in zip(cohort, batch):
        single = fit(s, config)
        assert res.beta == single.beta
        assert res.loss_trace == single.loss_trace


def test_fit_cohort_rejects_single_report_series():
    cohort = [make_series([2, 3, 4]), make_series([None, 5, None])]
    with pytest.raises(InsufficientDataError):
        fit_cohort(cohort, FitConfig())


def test_l2_shrinks_parameters(anchor_series):
    plain = fit(anchor_series, FitConfig(steps=2000, incidence_scale=1.0))
    reg = fit(anchor_series, FitConfig(steps=2000, lam=5.0, incidence_scale=1.0))
    assert np.linalg.norm(reg.beta.as_array()) < np.linalg.norm(plain.beta.as_array())


def test_warm_start_inits_match_locf_ols():
    rng = np.random.Generator(np.random.PCG64(83))
    cohort = [random_gapped_series(rng, T=20, id=f"i{i}") for i in range(4)]
    config = FitConfig(incidence_scale=1.0)
    inits = warm_start_inits(cohort, config)
    for k, s in enumerate(cohort):
        expected = fit_linreg_locf(s).beta.as_array()
        assert inits[k] == pytest.approx(expected, rel=1e-12)


def test_jacobi_etas_shape_and_positivity():
    rng = np.random.Generator(np.random.PCG64(91))
    cohort = [random_gapped_series(rng, T=20, id=f"j{i}") for i in range(5)]
    etas = jacobi_etas(cohort, FitConfig(), safety=0.2)
    assert etas.shape == (5, 3)
    assert np.all(etas > 0)
    with pytest.raises(UsageError):
        jacobi_etas(cohort, FitConfig(), safety=0.0)
