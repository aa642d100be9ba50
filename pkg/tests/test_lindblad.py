import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qca_critic.dense import evolve, initial_state
from qca_critic.errors import CapacityError, ParameterError
from qca_critic.gates import NUMBER, make_gate_params
from qca_critic.lindblad import (
    GAMMA_DT,
    HALF_GAMMA_DT,
    ComparisonRecord,
    LindbladParams,
    compare_qca_to_lindblad,
    integrate_rk4,
    qca_probabilities,
    qcp_generator_apply,
)


def random_hermitian(seed, l):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2**l, 2**l)) + 1j * rng.normal(size=(2**l, 2**l))
    return a + a.conj().T


def test_vacuum_annihilated():
    out = qcp_generator_apply(initial_state(3, "vacuum"), LindbladParams(3, omega=2.0))
    assert np.abs(out).max() == 0.0


def test_pure_decay_generator():
    out = qcp_generator_apply(NUMBER, LindbladParams(1, omega=0.0, gamma=0.7))
    assert np.allclose(out, 0.7 * (np.diag([1, 0]) - NUMBER))


def test_full_pair_loses_density_at_rate_gamma():
    gamma = 1.3
    out = qcp_generator_apply(initial_state(2, "full"), LindbladParams(2, omega=4.0, gamma=gamma))
    n1 = np.kron(NUMBER, np.eye(2))
    assert np.trace(n1 @ out).real == pytest.approx(-gamma, abs=1e-14)


@given(st.integers(0, 10_000), st.floats(0, 10), st.integers(1, 5))
def test_generator_traceless_and_hermitian(seed, omega, l):
    rho = random_hermitian(seed, l)
    out = qcp_generator_apply(rho, LindbladParams(l, omega=omega))
    scale = max(1.0, np.abs(rho).max())
    assert abs(np.trace(out)) < 1e-12 * scale * 2**l
    assert np.abs(out - out.conj().T).max() < 1e-12 * scale


def test_params_validation():
    with pytest.raises(CapacityError):
        LindbladParams(8, omega=1.0)
    with pytest.raises(ParameterError):
        LindbladParams(2, omega=1.0, gamma=0.0)
    with pytest.raises(ParameterError):
        LindbladParams(2, omega=1.0, dt=-1e-3)
    with pytest.raises(ParameterError):
        LindbladParams(2, omega=1.0, rate_convention="theta-eq-gamma")


def test_vacuum_series_constant():
    s = integrate_rk4(initial_state(3, "vacuum"), LindbladParams(3, omega=5.0, dt=0.01), 1.0)
    assert np.all(s.n_mean == 0.0)


def test_exponential_decay():
    s = integrate_rk4(NUMBER, LindbladParams(1, omega=0.0, dt=1e-3), 5.0, record_every=100)
    assert np.abs(s.n_mean - np.exp(-s.times)).max() < 1e-8


def test_trace_drift_small():
    s = integrate_rk4(initial_state(4), LindbladParams(4, omega=5.75, dt=1e-3), 2.0, record_every=500)
    assert s.meta["max_trace_drift"] < 1e-9


def test_horizon_must_fit_step():
    with pytest.raises(ParameterError):
        integrate_rk4(NUMBER, LindbladParams(1, omega=0.0, dt=0.3), 1.0)


def test_rk4_fourth_order():
    rho0 = initial_state(4)
    terminal = {
        dt: integrate_rk4(rho0, LindbladParams(4, omega=5.75, dt=dt), 1.0, record_every=10**6).n_mean[-1]
        for dt in (1e-2, 5e-3, 1e-3)
    }
    ratio = abs(terminal[1e-2] - terminal[1e-3]) / abs(terminal[5e-3] - terminal[1e-3])
    assert 12 <= ratio <= 20, ratio


def test_reference_point_probabilities_under_half_convention():
    p1, p2 = qca_probabilities(5.75, 0.01, HALF_GAMMA_DT)
    # the quoted p1 is cut, not rounded, after six decimals
    assert math.floor(p1 * 1e6) / 1e6 == pytest.approx(0.006597, abs=1e-15)
    assert p2 == pytest.approx(0.004991672, abs=5e-10)


def test_conventions_differ_by_factor_two_in_angle():
    _, full = qca_probabilities(1.0, 0.01, GAMMA_DT)
    _, half = qca_probabilities(1.0, 0.01, HALF_GAMMA_DT)
    assert math.asin(math.sqrt(full)) ** 2 == pytest.approx(2 * math.asin(math.sqrt(half)) ** 2, rel=1e-12)


def test_probability_mapping_range_checked():
    with pytest.raises(ParameterError):
        qca_probabilities(100.0, 0.02)
    with pytest.raises(ParameterError):
        qca_probabilities(1.0, 0.01, "gamma")


def test_zero_branching_channel_vs_exponential():
    # per step the channel gives 1 - sin^2(sqrt(g dt)) against exp(-g dt); the gap is O(dt^2)
    gdt = 0.01
    rec = compare_qca_to_lindblad(1 + 1, 0.0, gdt, 1.0)
    p2 = qca_probabilities(0.0, gdt)[1]
    per_step = abs((1 - p2) - math.exp(-gdt))
    assert per_step < gdt**2
    assert rec.max_abs_diff < 100 * per_step


def test_halving_step_halves_discrepancy():
    a = compare_qca_to_lindblad(4, 5.75, 0.01, 10.0)
    b = compare_qca_to_lindblad(4, 5.75, 0.005, 10.0)
    assert 1.5 <= a.max_abs_diff / b.max_abs_diff <= 2.5


def test_time_grids_align():
    rec = compare_qca_to_lindblad(3, 2.0, 0.02, 0.4)
    assert len(rec.times) == len(rec.n_mean_qca) == 21
    assert rec.times[-1] == pytest.approx(0.4)
    assert rec.rk4_dt <= 1e-3


def test_qca_side_uses_explicit_probabilities():
    rec = compare_qca_to_lindblad(3, 5.75, 0.01, 0.1, p1=0.006597, p2=0.004991672)
    ref = evolve(initial_state(3), make_gate_params(0.006597, 0.004991672), 10, observables_sel=())
    assert rec.n_mean_qca == [float(v) for v in ref.n_mean]


def test_record_round_trip():
    rec = compare_qca_to_lindblad(2, 1.0, 0.05, 0.2)
    back = ComparisonRecord.from_json(rec.to_json())
    assert back.n_mean_lindblad == rec.n_mean_lindblad and back.rate_convention == GAMMA_DT


def test_comparison_capacity():
    with pytest.raises(CapacityError):
        compare_qca_to_lindblad(7, 1.0, 0.01, 0.1)
