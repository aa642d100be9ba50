import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qca_critic.dense import (
    MAX_DENSE_SITES,
    RowState,
    _apply,
    evolve,
    initial_state,
    observables,
    state_diagnostics,
    step_ancilla,
    step_kraus,
)
from qca_critic.errors import CapacityError, ParameterError
from qca_critic.gates import decay_unitary, local_gate, make_gate_params, swap, two_site_unitary

from conftest import random_points

prob = st.floats(0.0, 1.0, allow_nan=False)


def random_density(rng, l):
    a = rng.normal(size=(2**l, 2**l)) + 1j * rng.normal(size=(2**l, 2**l))
    rho = a @ a.conj().T
    return RowState(l, rho / np.trace(rho))


def operator_on(l_total, placements):
    """Dense operator for a product of gates; ``placements`` listed left to right."""
    dim = 2**l_total
    x = np.eye(dim, dtype=complex).reshape((2,) * l_total + (dim,))
    for op, axes in reversed(placements):
        x = _apply(op, x, axes)
    return x.reshape(dim, dim)


@pytest.mark.parametrize("kind,expected", [("full", 1.0), ("vacuum", 0.0)])
def test_product_state_densities(kind, expected):
    n, sx, sy = observables(initial_state(4, kind))
    assert np.all(n == expected) and np.all(sx == 0) and np.all(sy == 0)


def test_mixed_single_site():
    n, sx, sy = observables(initial_state(1, "mixed"))
    assert n[0] == pytest.approx(0.5) and sx[0] == 0 and sy[0] == 0


def test_bloch_triple_orientation():
    n, sx, sy = observables(initial_state(2, [(0.6, -0.8, 0.0)]))
    assert np.allclose(sx, 0.6) and np.allclose(sy, -0.8) and np.allclose(n, 0.5)


def test_vacuum_is_fixed_by_both_backends():
    gp = make_gate_params(0.7, 0.3)
    vac = initial_state(3, "vacuum")
    assert np.array_equal(step_kraus(vac, gp).matrix, vac.matrix)
    assert np.abs(step_ancilla(vac, gp).matrix - vac.matrix).max() < 1e-15


def test_identity_parameters_leave_state_unchanged(rng):
    rho = random_density(rng, 3)
    assert np.abs(step_kraus(rho, make_gate_params(0, 0)).matrix - rho.matrix).max() < 1e-14


def test_pure_decay_single_step():
    out = step_kraus(initial_state(3, "full"), make_gate_params(0, 0.25))
    assert np.allclose(observables(out)[0], 0.75, atol=1e-14)


def test_two_site_full_branching():
    out = step_kraus(initial_state(2, "full"), make_gate_params(1, 0))
    assert observables(out)[0].mean() == pytest.approx(0.5, abs=1e-12)


def test_capacity_limit():
    big = RowState(MAX_DENSE_SITES + 1, np.eye(2 ** (MAX_DENSE_SITES + 1)))
    with pytest.raises(CapacityError):
        step_kraus(big, make_gate_params(0.1, 0.1))
    with pytest.raises(CapacityError):
        step_ancilla(big, make_gate_params(0.1, 0.1))


def test_single_site_row_rejected():
    with pytest.raises(ParameterError):
        step_kraus(initial_state(1), make_gate_params(0.1, 0.1))


@pytest.mark.parametrize("l", [2, 3, 4, 5])
def test_kraus_and_ancilla_agree(rng, l):
    for p1, p2 in random_points(rng, 20):
        gp = make_gate_params(p1, p2)
        rho = random_density(rng, l)
        diff = np.abs(step_kraus(rho, gp).matrix - step_ancilla(rho, gp).matrix).max()
        assert diff < 1e-12, (p1, p2)


def test_gate_product_factorizes(rng):
    # two rows of four sites: old row on qubits 0..3, new row on 4..7
    l = 4
    for p1, p2 in random_points(rng, 3):
        gp = make_gate_params(p1, p2)
        g = local_gate(gp)
        sd = swap() @ decay_unitary(gp)
        u = two_site_unitary(gp)
        gates = [(sd, (0, l))] + [(g, (k - 1, k, l + k)) for k in range(1, l)]
        factor_sd = [(sd, (k, l + k)) for k in range(l)]
        factor_u = [(u, (k - 1, k)) for k in range(1, l)]
        lhs = operator_on(2 * l, gates)
        rhs = operator_on(2 * l, factor_sd + factor_u)
        assert np.abs(lhs - rhs).max() < 1e-12


def test_evolve_zero_steps():
    s = evolve(initial_state(3), make_gate_params(0.2, 0.2), 0)
    assert len(s) == 1 and s.n_mean[0] == 1.0


def test_pure_decay_series():
    s = evolve(initial_state(4), make_gate_params(0, 0.1), 10)
    assert np.abs(s.n_mean - 0.9 ** np.arange(11)).max() < 1e-12


@given(prob, st.sampled_from(["full", "mixed", [(0.6, 0.0, 0.8)]]))
def test_pure_decay_from_product_states(p2, kind):
    s = evolve(initial_state(3, kind), make_gate_params(0, p2), 6)
    assert np.abs(s.n_mean - (1 - p2) ** np.arange(7) * s.n_mean[0]).max() < 1e-12


def test_vacuum_series_is_constant():
    s = evolve(initial_state(4, "vacuum"), make_gate_params(0.9, 0.05), 15)
    assert np.all(s.n_mean == 0.0)


@pytest.mark.parametrize("backend", ["kraus", "ancilla"])
def test_unknown_and_known_backends(backend):
    s = evolve(initial_state(2), make_gate_params(0.3, 0.3), 3, backend=backend)
    assert s.meta["backend"] == f"dense-{backend}"
    with pytest.raises(ParameterError):
        evolve(initial_state(2), make_gate_params(0.3, 0.3), 3, backend="tebd")


def test_negative_horizon_rejected():
    with pytest.raises(ParameterError):
        evolve(initial_state(2), make_gate_params(0.3, 0.3), -1)


@pytest.mark.parametrize("p1,p2", [(0.9, 0.02), (0.3, 0.5), (1.0, 1.0), (0.05, 0.0)])
def test_physical_invariants_over_long_runs(p1, p2):
    s = evolve(initial_state(6), make_gate_params(p1, p2), 100, observables_sel=())
    d = s.meta["diagnostics"]
    assert d["trace_error"] < 1e-10
    assert d["hermiticity"] < 1e-10
    assert d["min_eigenvalue"] >= -1e-8


@given(prob, prob)
def test_single_step_invariants_random_states(p1, p2):
    rho = random_density(np.random.default_rng(int(1e6 * p1 + 7)), 4)
    d = state_diagnostics(step_kraus(rho, make_gate_params(p1, p2)))
    assert d["trace_error"] < 1e-12 and d["hermiticity"] < 1e-12 and d["min_eigenvalue"] > -1e-12


def test_deterministic():
    gp = make_gate_params(0.45, 0.12)
    a = evolve(initial_state(4), gp, 12)
    b = evolve(initial_state(4), gp, 12)
    assert a.to_csv() == b.to_csv()
