"""Continuous-time quantum contact process and its comparison with the QCA.

The master equation is

    d rho / dt = -i [H, rho] + gamma * sum_k (s-_k rho s+_k - {n_k, rho} / 2),
    H = Omega * sum_k (sigma^y_k n_{k+1} + n_k sigma^y_{k+1}),

integrated with classical RK4 on the dense ``2^L x 2^L`` matrix.  Only
Hilbert-space operators are formed; the Liouvillian is never materialised.

Time is measured in units of ``1/gamma`` throughout (``gamma = 1``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import dense
from .errors import CapacityError, ParameterError
from .gates import NUMBER, SIGMA_MINUS, SIGMA_Y, make_gate_params
from .series import TimeSeries

__all__ = [
    "RATE_CONVENTIONS",
    "LindbladParams",
    "qcp_hamiltonian",
    "qcp_generator_apply",
    "integrate_rk4",
    "qca_probabilities",
    "ComparisonRecord",
    "compare_qca_to_lindblad",
    "convergence_table",
    "GAMMA_DT",
    "HALF_GAMMA_DT",
]

MAX_SITES = 7
GAMMA_DT = "theta-sq-eq-gamma-dt"
HALF_GAMMA_DT = "theta-sq-eq-half-gamma-dt"
RATE_CONVENTIONS = (GAMMA_DT, HALF_GAMMA_DT)


@dataclass(frozen=True)
class LindbladParams:
    l: int
    omega: float
    gamma: float = 1.0
    dt: float = 1e-3
    rate_convention: str = GAMMA_DT

    def __post_init__(self):
        if self.l < 1:
            raise ParameterError("l", self.l, "need at least one site")
        if self.l > MAX_SITES:
            raise CapacityError(f"dense master equation capped at L={MAX_SITES}, got L={self.l}")
        if not self.gamma > 0:
            raise ParameterError("gamma", self.gamma, "must be positive")
        if not self.dt > 0:
            raise ParameterError("dt", self.dt, "must be positive")
        if self.rate_convention not in RATE_CONVENTIONS:
            raise ParameterError("rate_convention", self.rate_convention, f"expected one of {RATE_CONVENTIONS}")


def _site_op(op, k, l):
    return np.kron(np.kron(np.eye(2**k), op), np.eye(2 ** (l - k - 1)))


@lru_cache(maxsize=32)
def _operators(l):
    lowers = tuple(_site_op(SIGMA_MINUS, k, l) for k in range(l))
    numbers = [_site_op(NUMBER, k, l) for k in range(l)]
    branching = np.zeros((2**l, 2**l), dtype=complex)
    for k in range(l - 1):
        branching += _site_op(SIGMA_Y, k, l) @ numbers[k + 1] + numbers[k] @ _site_op(SIGMA_Y, k + 1, l)
    total_n = np.diag(sum(numbers)).real.copy()
    return branching, lowers, total_n


def qcp_hamiltonian(l, omega):
    return omega * _operators(l)[0]


def qcp_generator_apply(rho, params: LindbladParams):
    """``L[rho]`` for a dense matrix (or a ``RowState``); returns a matrix."""
    if isinstance(rho, dense.RowState):
        rho = rho.matrix
    branching, lowers, total_n = _operators(params.l)
    h = params.omega * branching
    out = -1j * (h @ rho - rho @ h)
    jump = sum(s @ rho @ s.T for s in lowers)  # sigma^- is real, so s^dag = s.T
    anti = 0.5 * (total_n[:, None] * rho + rho * total_n[None, :])
    return out + params.gamma * (jump - anti)


def integrate_rk4(state0, params: LindbladParams, t_final, record_every=1, observables_sel=("n_site",)):
    """Classical RK4 with fixed step ``params.dt`` up to ``t_final``.

    ``t_final`` must be an integer multiple of ``dt`` (to 1e-9 relative).
    Observables are recorded every ``record_every`` steps, including t=0.
    ``meta["max_trace_drift"]`` holds the largest ``|Tr rho - 1|`` seen.
    """
    if t_final < 0:
        raise ParameterError("t_final", t_final, "must be non-negative")
    rho = state0.matrix if isinstance(state0, dense.RowState) else np.asarray(state0, dtype=complex)
    n_steps = round(t_final / params.dt)
    if abs(n_steps * params.dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ParameterError("t_final", t_final, f"not a multiple of dt={params.dt}")
    dt = params.dt
    f = lambda r: qcp_generator_apply(r, params)  # noqa: E731
    times, n_rows, sx_rows, sy_rows = [], [], [], []
    drift = 0.0

    def record(step, r):
        n, sx, sy = dense.observables(dense.RowState(params.l, r))
        times.append(step * dt)
        n_rows.append(n)
        sx_rows.append(sx.mean())
        sy_rows.append(sy.mean())

    record(0, rho)
    for step in range(1, n_steps + 1):
        k1 = f(rho)
        k2 = f(rho + 0.5 * dt * k1)
        k3 = f(rho + 0.5 * dt * k2)
        k4 = f(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = max(drift, abs(np.trace(rho) - 1.0))
        if step % record_every == 0 or step == n_steps:
            record(step, rho)
    sel = set(observables_sel)
    n_site = np.array(n_rows)
    return TimeSeries(
        times=np.array(times, dtype=float),
        n_mean=n_site.mean(axis=1),
        n_site=n_site if "n_site" in sel else None,
        sx_mean=np.array(sx_rows) if "transverse" in sel else None,
        sy_mean=np.array(sy_rows) if "transverse" in sel else None,
        meta={"backend": "lindblad-rk4", "l": params.l, "omega": params.omega, "gamma": params.gamma,
              "dt": dt, "max_trace_drift": float(drift), "final_state": rho},
    )


def qca_probabilities(omega_over_gamma, gamma_dt, rate_convention=GAMMA_DT):
    """Map continuous-time rates to ``(p1, p2)``.

    ``p1 = sin^2(sqrt(2) * Omega * dt)``; ``p2 = sin^2(theta)`` with
    ``theta^2 = gamma dt`` or ``gamma dt / 2`` depending on the convention.
    """
    if rate_convention not in RATE_CONVENTIONS:
        raise ParameterError("rate_convention", rate_convention, f"expected one of {RATE_CONVENTIONS}")
    angle = math.sqrt(2.0) * omega_over_gamma * gamma_dt
    if not 0 <= angle <= math.pi / 2:
        raise ParameterError("gamma_dt", gamma_dt, "sqrt(2) * Omega * dt must lie in [0, pi/2]")
    theta_sq = gamma_dt if rate_convention == GAMMA_DT else gamma_dt / 2
    if not 0 <= theta_sq <= (math.pi / 2) ** 2:
        raise ParameterError("gamma_dt", gamma_dt, "decay angle exceeds pi/2")
    return math.sin(angle) ** 2, math.sin(math.sqrt(theta_sq)) ** 2


@dataclass
class ComparisonRecord:
    l: int
    omega_over_gamma: float
    gamma_dt: float
    t_final: float
    rate_convention: str
    p1: float
    p2: float
    rk4_dt: float
    times: list
    n_mean_qca: list
    n_mean_lindblad: list
    max_abs_diff: float
    terminal_abs_diff: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def compare_qca_to_lindblad(l, omega_over_gamma, gamma_dt, t_final, rate_convention=GAMMA_DT,
                            p1=None, p2=None, rk4_dt_max=1e-3, initial="full"):
    """Run the dense QCA and the RK4 master equation side by side on a common time grid.

    QCA step ``t`` sits at physical time ``t * gamma_dt``.  Explicit ``p1``/``p2``
    override the mapping from rates (used to reproduce quoted parameter
    points verbatim).  The RK4 step is ``gamma_dt / m`` with the smallest
    integer ``m`` keeping it below ``rk4_dt_max``, so both grids coincide.
    """
    if l > 6:
        raise CapacityError(f"comparison is capped at L=6, got L={l}")
    q1, q2 = qca_probabilities(omega_over_gamma, gamma_dt, rate_convention)
    p1 = q1 if p1 is None else float(p1)
    p2 = q2 if p2 is None else float(p2)
    n_steps = round(t_final / gamma_dt)
    if abs(n_steps * gamma_dt - t_final) > 1e-9 * max(1.0, t_final):
        raise ParameterError("t_final", t_final, "must be a multiple of gamma_dt")
    m = max(1, math.ceil(gamma_dt / rk4_dt_max - 1e-9))
    lp = LindbladParams(l=l, omega=omega_over_gamma, gamma=1.0, dt=gamma_dt / m, rate_convention=rate_convention)
    rho0 = dense.initial_state(l, initial)
    qca = dense.evolve(rho0, make_gate_params(p1, p2), n_steps, observables_sel=())
    lind = integrate_rk4(rho0, lp, n_steps * gamma_dt, record_every=m, observables_sel=())
    diff = np.abs(qca.n_mean - lind.n_mean)
    return ComparisonRecord(
        l=l,
        omega_over_gamma=float(omega_over_gamma),
        gamma_dt=float(gamma_dt),
        t_final=float(n_steps * gamma_dt),
        rate_convention=rate_convention,
        p1=p1,
        p2=p2,
        rk4_dt=lp.dt,
        times=[float(t) for t in lind.times],
        n_mean_qca=[float(v) for v in qca.n_mean],
        n_mean_lindblad=[float(v) for v in lind.n_mean],
        max_abs_diff=float(diff.max()),
        terminal_abs_diff=float(diff[-1]),
        diagnostics={"qca": qca.meta["diagnostics"], "lindblad_max_trace_drift": lind.meta["max_trace_drift"]},
    )


def convergence_table(l, omega_over_gamma, gamma_dts, t_final, rate_convention=GAMMA_DT, rk4_dt_max=1e-3,
                      initial="full"):
    """Max density discrepancy per step size and the log-log slope through them.

    A first-order scheme gives a slope near one.  Returns
    ``{"gamma_dt": [...], "max_abs_diff": [...], "slope": s}``.
    """
    dts = sorted(float(x) for x in gamma_dts)
    if len(dts) < 2:
        raise ParameterError("gamma_dts", gamma_dts, "need at least two step sizes")
    diffs = [
        compare_qca_to_lindblad(l, omega_over_gamma, dt, t_final, rate_convention=rate_convention,
                                rk4_dt_max=rk4_dt_max, initial=initial).max_abs_diff
        for dt in dts
    ]
    slope = float(np.polyfit(np.log(dts), np.log(diffs), 1)[0])
    return {"gamma_dt": dts, "max_abs_diff": diffs, "slope": slope}
