import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qca_critic.criticality import (
    ALPHA_DP,
    ALPHA_QCP,
    CriticalEstimate,
    SeriesFamily,
    analyze_family,
    combine_methods,
    critical_by_flat_alpha,
    critical_by_r2,
    effective_exponent,
    error_budget,
    estimate_alpha,
    estimates_to_csv,
    flatness_scores,
    loglog_fit,
    resolve_window,
)
from qca_critic.errors import EstimationError, ParameterError
from qca_critic.series import TimeSeries

from synthetic import planted_family, power_law


def test_reference_constants():
    assert ALPHA_DP == (0.159464, 0.000006)
    assert ALPHA_QCP == ((0.32, 0.01), (0.36, 0.08))


def test_exponent_of_power_law():
    c = effective_exponent(power_law(0.32, 100))
    assert len(c) == 50 and c.t[0] == 1 and c.t[-1] == 50
    assert np.abs(c.alpha - 0.32).max() < 1e-12


def test_exponent_of_constant():
    s = TimeSeries(np.arange(21), np.full(21, 0.3))
    assert np.all(effective_exponent(s).alpha == 0.0)


def test_exponent_of_halving_sequence():
    t = np.arange(21)
    c = effective_exponent(TimeSeries(t, 2.0 ** (-t.astype(float))))
    assert np.allclose(c.alpha, c.t, atol=1e-12)


def test_non_positive_points_omitted(caplog):
    n = np.linspace(1, 0.5, 21)
    n[10] = 0.0
    c = effective_exponent(TimeSeries(np.arange(21), n))
    assert 5 in c.omitted and 10 in c.omitted and 5 not in c.t.tolist()
    assert "omitted" in caplog.text


def test_exponent_needs_integer_steps():
    with pytest.raises(ParameterError):
        effective_exponent(TimeSeries(np.linspace(0, 1, 5), np.ones(5)))


def test_loglog_fit_power_law():
    slope, _, r2 = loglog_fit(power_law(0.32, 100))
    assert slope == pytest.approx(-0.32, abs=1e-12)
    assert r2 == pytest.approx(1.0, abs=1e-12)


def test_loglog_fit_prefers_power_law_to_exponential():
    t = np.arange(101)
    expo = TimeSeries(t, 0.95 ** t.astype(float))
    assert loglog_fit(expo)[2] < loglog_fit(power_law(0.32, 100))[2]


def test_loglog_fit_constant_series():
    slope, _, r2 = loglog_fit(TimeSeries(np.arange(101), np.full(101, 0.2)))
    assert slope == 0.0 and r2 == 0.0


def test_loglog_fit_needs_points():
    with pytest.raises(EstimationError):
        loglog_fit(power_law(0.3, 11), window=(10, 100))


@given(st.floats(0.05, 1.0), st.sampled_from([0.02, 0.04, 0.06]))
def test_planted_power_law_recovered(a, planted):
    fam = planted_family(a, planted=planted)
    assert critical_by_r2(fam)[0] == planted
    assert critical_by_flat_alpha(fam)[0] == planted
    assert estimate_alpha(fam.series_at(planted)) == pytest.approx(a, abs=1e-6)


def test_two_slice_family():
    fam = SeriesFamily(0.5, [(0.1, power_law(0.3, 100)), (0.2, power_law(0.3, 100, rate=0.01))])
    assert critical_by_r2(fam) == (0.1, pytest.approx(0.1))


def test_unusable_family():
    absorbed = TimeSeries(np.arange(101), np.r_[1.0, np.zeros(100)])
    fam = SeriesFamily(0.5, [(0.1, absorbed), (0.2, absorbed)])
    with pytest.raises(EstimationError):
        critical_by_r2(fam)
    with pytest.raises(EstimationError):
        critical_by_flat_alpha(fam)


@given(st.floats(-0.5, 0.5), st.floats(0.01, 100.0))
def test_flatness_shift_and_scale_invariant(shift, scale):
    base = power_law(0.3, 200, rate=0.003)
    # adding a constant to alpha(t) multiplies n(t) by a power law t^-shift
    t = base.times.astype(float)
    bent = base.n_mean.copy()
    bent[1:] *= scale * t[1:] ** (-shift)
    bent[0] *= scale
    ref = flatness_scores(SeriesFamily(0.5, [(0.1, base)]))[0.1]
    moved = flatness_scores(SeriesFamily(0.5, [(0.1, TimeSeries(base.times, bent))]))[0.1]
    assert moved == pytest.approx(ref, abs=1e-12)
    a = effective_exponent(base).alpha
    b = effective_exponent(TimeSeries(base.times, bent)).alpha
    assert np.allclose(b - a, shift, atol=1e-12)


def test_p1_one_floor_excludes_decoys():
    flat_decoy = power_law(0.1, 200)
    entries = [(0.1, flat_decoy), (0.2, power_law(0.3, 200, rate=0.001)), (0.3, power_law(0.3, 200, rate=0.002))]
    fam = SeriesFamily(1.0, entries)
    assert critical_by_flat_alpha(fam)[0] == 0.2
    assert critical_by_flat_alpha(fam, p2_lower_bound=None)[0] == 0.1
    elsewhere = SeriesFamily(0.9, entries)
    assert critical_by_flat_alpha(elsewhere)[0] == 0.1


def test_widening_window_leaves_power_law_estimate():
    s = power_law(0.27, 200)
    assert estimate_alpha(s, (60, 100)) - estimate_alpha(s, (80, 100)) == pytest.approx(0.0, abs=1e-15)


def test_window_rescaling():
    assert resolve_window((80, 100), 50) == ((40.0, 50.0), True)
    assert resolve_window((10, 100), 100) == ((10.0, 100.0), False)
    with pytest.raises(ParameterError):
        resolve_window((5, 2), 100)


def test_alpha_at_short_horizon_uses_rescaled_window():
    assert estimate_alpha(power_law(0.4, 100)) == pytest.approx(0.4, abs=1e-12)


def test_error_budget_rss():
    err, comps = error_budget(0.4, 0.42, 0.39, 0.42, None)
    assert err == pytest.approx(0.03, abs=1e-12)
    assert comps["finite_size_err"] == pytest.approx(0.02, abs=1e-15)
    assert comps["grid_err"] == pytest.approx(0.02, abs=1e-15)
    assert comps["absolute_fallback"] is False


def test_error_budget_zero_components():
    assert error_budget(0.3, 0.3, 0.3, 0.3, 0.3)[0] == 0.0


def test_error_budget_grid_term_takes_larger_neighbour():
    _, comps = error_budget(0.3, alpha_neighbor_above=0.35, alpha_neighbor_below=0.28)
    assert comps["grid_err"] == pytest.approx(0.05)
    _, comps = error_budget(0.3, alpha_neighbor_below=0.28)
    assert comps["grid_err"] == pytest.approx(0.02)


def test_error_budget_absolute_fallback():
    err, comps = error_budget(0.0, 0.03, 0.04)
    assert comps["absolute_fallback"] is True
    assert err == pytest.approx(0.05)


finite = st.floats(-1, 1)


@given(finite, finite, finite, finite, finite)
def test_error_budget_properties(ref, a, b, c, d):
    err, comps = error_budget(ref, a, b, c, d)
    swapped, _ = error_budget(ref, a, b, d, c)
    assert err >= 0 and err == pytest.approx(swapped, abs=1e-15)
    for key in ("finite_size_err", "finite_chi_err", "grid_err"):
        assert err >= comps[key] - 1e-15


def _est(p2, alpha, err, method="r2-fit"):
    return CriticalEstimate(0.1, p2, 0.005, alpha, err, method, {"grid_err": err})


def test_combine_arithmetic():
    out = combine_methods(_est(0.035, 0.3, 0.005), _est(0.041, 0.4, 0.005, "flat-alpha"))
    assert out.p2_crit == pytest.approx(0.038, abs=1e-15)
    assert out.p2_err == pytest.approx(0.00707, abs=1e-5)
    assert out.alpha == pytest.approx(0.35) and out.method == "averaged"


def test_combine_identical():
    a = _est(0.04, 0.3, 0.01)
    out = combine_methods(a, a)
    assert out.alpha == a.alpha and out.alpha_err == pytest.approx(0.01 * math.sqrt(2))


def test_combine_rejects_p1_mismatch():
    b = CriticalEstimate(0.2, 0.04, 0.01, 0.3, 0.01, "flat-alpha")
    with pytest.raises(ParameterError):
        combine_methods(_est(0.04, 0.3, 0.01), b)


def test_estimate_validation():
    with pytest.raises(ParameterError):
        CriticalEstimate(0.1, 0.04, -0.01, 0.3, 0.01, "r2-fit")
    with pytest.raises(ParameterError):
        CriticalEstimate(0.1, 0.04, 0.01, 0.3, 0.01, "averaged")
    with pytest.raises(ParameterError):
        CriticalEstimate(0.1, 0.04, 0.01, 0.3, 0.01, "median")
    with pytest.raises(EstimationError):
        CriticalEstimate(0.1, 0.04, 0.01, math.nan, 0.01, "r2-fit")


def test_family_validation():
    with pytest.raises(ParameterError):
        SeriesFamily(0.5, [(0.2, power_law(0.3, 50)), (0.1, power_law(0.3, 50))])
    with pytest.raises(ParameterError):
        SeriesFamily(0.5, [(0.1, power_law(0.3, 50)), (0.2, power_law(0.3, 60))])


def test_analyze_family_full_budget():
    fam = planted_family(0.3)
    half_l = planted_family(0.31)
    half_chi = planted_family(0.295)
    r2, flat, avg = analyze_family(fam, half_l_family=half_l, half_chi_family=half_chi)
    assert r2.p2_crit == flat.p2_crit == avg.p2_crit == 0.04
    assert r2.components["finite_size_err"] == pytest.approx(0.01, abs=1e-9)
    assert r2.components["finite_chi_err"] == pytest.approx(0.005, abs=1e-9)
    assert avg.alpha_err == pytest.approx(math.sqrt(2) * r2.alpha_err)
    assert avg.notes["fit_window_rescaled"] is False


def test_analyze_records_rescaling():
    fam = planted_family(0.3, t_max=100)
    (est,) = analyze_family(fam, method="flat")
    assert est.notes["avg_window"] == [40.0, 50.0] and est.notes["avg_window_rescaled"] is True


def test_analyze_unknown_method():
    with pytest.raises(ParameterError):
        analyze_family(planted_family(0.3), method="bayes")


def test_serialisation():
    est = analyze_family(planted_family(0.3))[2]
    back = CriticalEstimate.from_json(est.to_json())
    assert back == est
    lines = estimates_to_csv([est]).splitlines()
    assert lines[0] == "p1,p2_crit,p2_err,alpha,alpha_err,method"
    assert lines[1].endswith(",averaged")
    assert json.loads(est.to_json())["method"] == "averaged"
