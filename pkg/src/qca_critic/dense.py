"""Exact evolution of the reduced row density matrix for small rows.

Two independent update rules are provided:

``step_kraus``
    unitary staircase on the row followed by the product of single-site
    decay channels, applied site by site as superoperators;
``step_ancilla``
    the literal two-row construction: embed the row next to a fresh row of
    empty targets, apply the local three-site gates right to left, and trace
    out the old row.

They agree to machine precision, which is what the cross-backend tests check.
Basis: site 1 is the most significant bit, ``|o> -> 0``, ``|*> -> 1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import CapacityError, ParameterError
from .gates import (
    NUMBER,
    SIGMA_X,
    SIGMA_Y,
    GateParams,
    local_operators,
)
from .series import TimeSeries

logger = logging.getLogger(__name__)

__all__ = [
    "MAX_DENSE_SITES",
    "RowState",
    "bloch_to_density",
    "single_site_states",
    "initial_state",
    "step_kraus",
    "step_ancilla",
    "unitary_staircase",
    "evolve",
    "observables",
    "state_diagnostics",
]

MAX_DENSE_SITES = 7


@dataclass
class RowState:
    """Dense ``2^L x 2^L`` density matrix of one row."""

    l: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dim = 2**self.l
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match l={self.l}")

    def trace(self):
        return complex(np.trace(self.matrix))


def bloch_to_density(triple):
    """Single-site density matrix from ``(<sigma^x>, <sigma^y>, <2n - 1>)``.

    ``sigma^y`` follows the package convention (see ``gates.SIGMA_Y``), so
    ``rho[0, 1] = (sx + i sy) / 2``.
    """
    x, y, z = (float(v) for v in triple)
    if x * x + y * y + z * z > 1.0 + 1e-12:
        raise ParameterError("bloch", triple, "purity exceeds one")
    return np.array([[(1 - z) / 2, (x + 1j * y) / 2], [(x - 1j * y) / 2, (1 + z) / 2]], dtype=complex)


_NAMED = {
    "full": (0.0, 0.0, 1.0),
    "fully-occupied": (0.0, 0.0, 1.0),
    "vacuum": (0.0, 0.0, -1.0),
    "empty": (0.0, 0.0, -1.0),
    "mixed": (0.0, 0.0, 0.0),
}


def single_site_states(l, kind):
    """List of ``l`` single-site density matrices for a product initial state.

    ``kind`` is one of ``"full"``, ``"vacuum"``, ``"mixed"`` or a sequence of
    Bloch triples (one per site, or a single triple broadcast to all sites).
    """
    if l < 1:
        raise ParameterError("l", l, "need at least one site")
    if isinstance(kind, str):
        try:
            triples = [_NAMED[kind]] * l
        except KeyError:
            raise ParameterError("initial", kind, f"expected one of {sorted(_NAMED)}") from None
    else:
        triples = [tuple(t) for t in kind]
        if len(triples) == 1:
            triples = triples * l
        if len(triples) != l:
            raise ParameterError("initial", kind, f"need {l} Bloch triples")
    return [bloch_to_density(t) for t in triples]


def initial_state(l, kind="full") -> RowState:
    rho = np.ones((1, 1), dtype=complex)
    for site in single_site_states(l, kind):
        rho = np.kron(rho, site)
    return RowState(l, rho)


def _check_capacity(l):
    if l > MAX_DENSE_SITES:
        raise CapacityError(f"dense backends are capped at L={MAX_DENSE_SITES}, got L={l}")


def _apply(op, tensor, axes):
    """Contract a ``2^k x 2^k`` operator into the listed axes of a qubit tensor."""
    k = len(axes)
    op = np.asarray(op).reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def unitary_staircase(rho_t, u, l):
    """Apply ``U_{1,2} ... U_{L-1,L}`` (rightmost factor first) to ket and bra legs."""
    uc = u.conj()
    for k in range(l - 2, -1, -1):
        rho_t = _apply(u, rho_t, (k, k + 1))
        rho_t = _apply(uc, rho_t, (l + k, l + k + 1))
    return rho_t


def step_kraus(state: RowState, params: GateParams) -> RowState:
    """One QCA step as unitary staircase plus per-site decay channels."""
    l = state.l
    if l < 2:
        raise ParameterError("l", l, "dynamics needs at least two sites")
    _check_capacity(l)
    ops = local_operators(params)
    t = state.matrix.reshape((2,) * (2 * l))
    t = unitary_staircase(t, ops.u_two_site, l)
    for k in range(l):
        t = _apply(ops.dissipation_superop, t, (k, l + k))
    return RowState(l, t.reshape(2**l, 2**l))


@lru_cache(maxsize=64)
def _ancilla_isometry(p1, p2, l):
    """Two-row gate sequence applied to ``|row> (x) |o...o>``, as ``V[m_old, new, row]``."""
    from .gates import make_gate_params

    ops = local_operators(make_gate_params(p1, p2))
    dim = 2**l
    x = np.zeros((dim, dim, dim), dtype=complex)
    x[np.arange(dim), 0, np.arange(dim)] = 1.0
    x = x.reshape((2,) * (2 * l) + (dim,))
    # old row occupies axes 0..l-1, new row axes l..2l-1
    edge = ops.swap @ ops.d_gate
    for k in range(l - 1, -1, -1):
        if k == 0:
            x = _apply(edge, x, (0, l))
        else:
            x = _apply(ops.local_gate, x, (k - 1, k, l + k))
    v = x.reshape(dim, dim, dim)
    v.flags.writeable = False
    return v


def step_ancilla(state: RowState, params: GateParams) -> RowState:
    """One QCA step through the explicit two-row gate circuit and a partial trace."""
    l = state.l
    if l < 2:
        raise ParameterError("l", l, "dynamics needs at least two sites")
    _check_capacity(l)
    v = _ancilla_isometry(params.p1, params.p2, l)
    rho = np.einsum("mac,cd,mbd->ab", v, state.matrix, v.conj(), optimize=True)
    return RowState(l, rho)


def observables(state: RowState):
    """Per-site ``(<n_k>, <sigma^x_k>, <sigma^y_k>)`` as three real arrays."""
    l = state.l
    t = state.matrix.reshape((2,) * (2 * l))
    n = np.empty(l)
    sx = np.empty(l)
    sy = np.empty(l)
    for k in range(l):
        ket = list(range(l))
        bra = list(range(l))
        bra[k] = l
        red = np.einsum(t, ket + bra, [k, l])
        n[k] = np.trace(NUMBER @ red).real
        sx[k] = np.trace(SIGMA_X @ red).real
        sy[k] = np.trace(SIGMA_Y @ red).real
    return n, sx, sy


def state_diagnostics(state: RowState):
    """Trace error, Hermiticity drift and minimum eigenvalue; nothing is clamped."""
    m = state.matrix
    herm = float(np.max(np.abs(m - m.conj().T)))
    min_eig = float(np.linalg.eigvalsh((m + m.conj().T) / 2).min())
    return {"trace_error": abs(state.trace() - 1.0), "hermiticity": herm, "min_eigenvalue": min_eig}


_STEPPERS = {"kraus": step_kraus, "ancilla": step_ancilla}


def evolve(state0: RowState, params: GateParams, t_max: int, observables_sel=("n_site", "transverse"), backend="kraus"):
    """Run ``t_max`` steps and record observables at every step including ``t=0``.

    ``observables_sel`` may contain ``"n_site"`` and ``"transverse"``; the
    mean density is always recorded.  Worst-case diagnostics over the run are
    stored in ``meta["diagnostics"]``.
    """
    if t_max < 0:
        raise ParameterError("t_max", t_max, "must be non-negative")
    try:
        step = _STEPPERS[backend]
    except KeyError:
        raise ParameterError("backend", backend, f"expected one of {sorted(_STEPPERS)}") from None
    _check_capacity(state0.l)
    sel = set(observables_sel)
    state = state0
    n_rows, sx_rows, sy_rows = [], [], []
    worst = {"trace_error": 0.0, "hermiticity": 0.0, "min_eigenvalue": np.inf}
    for t in range(t_max + 1):
        if t > 0:
            state = step(state, params)
        n, sx, sy = observables(state)
        n_rows.append(n)
        sx_rows.append(sx.mean())
        sy_rows.append(sy.mean())
        d = state_diagnostics(state)
        worst["trace_error"] = max(worst["trace_error"], d["trace_error"])
        worst["hermiticity"] = max(worst["hermiticity"], d["hermiticity"])
        worst["min_eigenvalue"] = min(worst["min_eigenvalue"], d["min_eigenvalue"])
    if worst["min_eigenvalue"] < -1e-8:
        logger.warning("positivity violated: min eigenvalue %.3e", worst["min_eigenvalue"])
    n_site = np.array(n_rows)
    return TimeSeries(
        times=np.arange(t_max + 1),
        n_mean=n_site.mean(axis=1),
        n_site=n_site if "n_site" in sel else None,
        sx_mean=np.array(sx_rows) if "transverse" in sel else None,
        sy_mean=np.array(sy_rows) if "transverse" in sel else None,
        meta={"backend": f"dense-{backend}", "l": state0.l, "p1": params.p1, "p2": params.p2, "diagnostics": worst, "final_state": state},
    )
