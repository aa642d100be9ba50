"""Local operators of the dissipative QCA gate family.

Single-site basis ordering is ``|o> -> 0`` (empty) and ``|*> -> 1`` (occupied).
Two- and three-site operators use the Kronecker ordering of their arguments,
first factor most significant.

All constructors take the two probabilities ``(p1, p2)``:

* ``p1`` is the probability of a coherent ``|o*> <-> |**>`` transfer through
  the two-site Hamiltonian gate, ``sin^2(sqrt(2) * omega_dt) = p1``;
* ``p2`` is the single-site decay probability, ``sin^2(theta) = p2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ParameterError

__all__ = [
    "GateParams",
    "LocalOperators",
    "make_gate_params",
    "two_site_generator",
    "two_site_unitary",
    "decay_unitary",
    "swap",
    "kraus_pair",
    "local_gate",
    "dissipation_superop",
    "doubled_two_site_gate",
    "local_operators",
    "IDENTITY",
    "NUMBER",
    "SIGMA_MINUS",
    "SIGMA_PLUS",
    "SIGMA_X",
    "SIGMA_Y",
]

IDENTITY = np.eye(2, dtype=complex)
NUMBER = np.array([[0, 0], [0, 1]], dtype=complex)
# |o><*| lowers an occupied site
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
# -i|*><o| + h.c.; note this is minus the textbook Pauli-Y in this basis
SIGMA_Y = -1j * SIGMA_PLUS + 1j * SIGMA_MINUS

for _op in (IDENTITY, NUMBER, SIGMA_MINUS, SIGMA_PLUS, SIGMA_X, SIGMA_Y):
    _op.flags.writeable = False


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GateParams:
    """Probabilities of one parameter point and the gate angles they imply.

    Build through :func:`make_gate_params`, which validates the domain and
    derives ``theta`` and ``omega_dt``.
    """

    p1: float
    p2: float
    theta: float
    omega_dt: float


def _check_probability(name, value):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ParameterError(name, value, "not a number") from None
    if not np.isfinite(v) or v < 0.0 or v > 1.0:
        raise ParameterError(name, value, "probability must lie in [0, 1]")
    return v


def make_gate_params(p1, p2):
    """Validate ``(p1, p2)`` and derive the dissipation and Hamiltonian angles.

    >>> gp = make_gate_params(1.0, 1.0)
    >>> round(gp.theta, 12) == round(np.pi / 2, 12)
    True
    """
    p1 = _check_probability("p1", p1)
    p2 = _check_probability("p2", p2)
    theta = float(np.arcsin(np.sqrt(p2)))
    omega_dt = float(np.arcsin(np.sqrt(p1)) / np.sqrt(2.0))
    return GateParams(p1=p1, p2=p2, theta=theta, omega_dt=omega_dt)


def two_site_generator():
    """``sigma^y (x) n + n (x) sigma^y``, the constrained branching term per unit rate."""
    return np.kron(SIGMA_Y, NUMBER) + np.kron(NUMBER, SIGMA_Y)


def two_site_unitary(params: GateParams) -> np.ndarray:
    """``exp[-i omega_dt (sigma^y n + n sigma^y)]`` via the eigenbasis of the generator."""
    evals, evecs = np.linalg.eigh(two_site_generator())
    phases = np.exp(-1j * params.omega_dt * evals)
    u = (evecs * phases) @ evecs.conj().T
    # the generator is purely imaginary, so u is exactly real; drop eigensolver noise
    return u.real.astype(complex)


def decay_unitary(params: GateParams) -> np.ndarray:
    """Entangling decay gate on (control, target): ``exp[i theta (s+ s- + s- s+)]``.

    The exchange term only couples ``|o*>`` and ``|*o>``, so the exponential
    is written out in closed form.
    """
    c, s = np.cos(params.theta), np.sin(params.theta)
    d = np.eye(4, dtype=complex)
    d[1, 1] = d[2, 2] = c
    d[1, 2] = d[2, 1] = 1j * s
    return d


def swap() -> np.ndarray:
    return np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def kraus_pair(params: GateParams):
    """Single-site Kraus operators ``(K_empty, K_filled) = (<o|D|o>, <*|D|o>)``.

    The bra/ket act on the site that is traced out; by the exchange symmetry
    of ``D`` it does not matter which of the two factors that is.
    """
    k_empty = IDENTITY + (np.cos(params.theta) - 1.0) * NUMBER
    k_filled = 1j * np.sin(params.theta) * SIGMA_MINUS
    return k_empty, k_filled


def local_gate(params: GateParams) -> np.ndarray:
    """Three-site gate ``SWAP . D . (U (x) 1)`` on (control k-1, control k, target k)."""
    u = two_site_unitary(params)
    sd = swap() @ decay_unitary(params)
    return np.kron(IDENTITY, sd) @ np.kron(u, IDENTITY)


def dissipation_superop(params: GateParams) -> np.ndarray:
    """Row-major vectorised decay channel, ``sum_m K_m (x) conj(K_m)``.

    Acts on ``vec(rho)[2*i + j] = rho[i, j]``.
    """
    return sum(np.kron(k, k.conj()) for k in kraus_pair(params))


def doubled_two_site_gate(u: np.ndarray) -> np.ndarray:
    """Lift a 4x4 two-site unitary to the 16x16 map ``rho -> u rho u^dag``.

    The returned matrix acts on two vectorised sites with combined index
    ``4 * (2*i1 + j1) + (2*i2 + j2)``, the layout the MPS uses for its
    physical legs.
    """
    u4 = np.asarray(u).reshape(2, 2, 2, 2)
    big = np.einsum("acbd,egfh->aecgbfdh", u4, u4.conj())
    # axes: (i1, j1, i2, j2, i1', j1', i2', j2')
    return big.reshape(16, 16)


@dataclass(frozen=True)
class LocalOperators:
    u_two_site: np.ndarray
    d_gate: np.ndarray
    swap: np.ndarray
    kraus_empty: np.ndarray
    kraus_filled: np.ndarray
    dissipation_superop: np.ndarray
    local_gate: np.ndarray
    doubled_u: np.ndarray


@lru_cache(maxsize=512)
def _local_operators_cached(p1, p2):
    gp = make_gate_params(p1, p2)
    u = two_site_unitary(gp)
    k0, k1 = kraus_pair(gp)
    return LocalOperators(
        u_two_site=_frozen(u),
        d_gate=_frozen(decay_unitary(gp)),
        swap=_frozen(swap()),
        kraus_empty=_frozen(k0),
        kraus_filled=_frozen(k1),
        dissipation_superop=_frozen(dissipation_superop(gp)),
        local_gate=_frozen(local_gate(gp)),
        doubled_u=_frozen(doubled_two_site_gate(u)),
    )


def local_operators(params: GateParams) -> LocalOperators:
    """All local operators for a parameter point, built once and shared read-only."""
    return _local_operators_cached(params.p1, params.p2)
