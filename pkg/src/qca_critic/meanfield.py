"""Mean-field dynamics for translation-invariant product rows.

Each row is ``rho1 (x) rho1 (x) ...``; one step feeds two copies of the
single-site state and an empty target through the three-site gate and keeps
the target.  The map is quadratic in ``rho1`` and is evaluated here by exact
contraction, never by a hand-expanded polynomial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EstimationError, ParameterError
from .gates import NUMBER, SIGMA_X, SIGMA_Y, GateParams, local_operators, make_gate_params

__all__ = [
    "MeanFieldState",
    "PhaseDiagram",
    "CriticalRecord",
    "mf_step",
    "mf_stationary",
    "mf_p1_one_closed_form",
    "mf_phase_diagram",
    "mf_critical_line",
    "order_boundary",
    "backward_gradient",
    "scaled_threshold",
    "printed_update",
    "bilinear_map",
    "fixed_point_refine",
]


@dataclass(frozen=True)
class MeanFieldState:
    n: float
    sx: float = 0.0
    sy: float = 0.0

    def feasible(self, tol=1e-9):
        return self.sx**2 + self.sy**2 + (2 * self.n - 1) ** 2 <= 1.0 + tol

    def density_matrix(self):
        off = (self.sx + 1j * self.sy) / 2
        return np.array([[1 - self.n, off], [np.conj(off), self.n]], dtype=complex)

    @classmethod
    def from_density_matrix(cls, rho):
        return cls(
            n=float(np.trace(NUMBER @ rho).real),
            sx=float(np.trace(SIGMA_X @ rho).real),
            sy=float(np.trace(SIGMA_Y @ rho).real),
        )

    def as_array(self):
        return np.array([self.n, self.sx, self.sy])


def _target_reduced(gate8, rho1):
    """Keep the target of ``G (rho1 (x) rho1 (x) |o><o|) G^dag``."""
    empty = np.array([[1, 0], [0, 0]], dtype=complex)
    rho_in = np.kron(np.kron(rho1, rho1), empty)
    out = (gate8 @ rho_in @ gate8.conj().T).reshape(4, 2, 4, 2)
    return np.einsum("xaxb->ab", out)


def mf_step(state: MeanFieldState, params: GateParams) -> MeanFieldState:
    if not state.feasible():
        raise ParameterError("state", state, "outside the Bloch ball")
    gate8 = local_operators(params).local_gate
    return MeanFieldState.from_density_matrix(_target_reduced(gate8, state.density_matrix()))


def bilinear_map(params: GateParams) -> np.ndarray:
    """``M[a, b, c]`` with ``vec(rho')_a = sum_bc M_abc vec(rho)_b vec(rho)_c``.

    Same contraction as :func:`mf_step`, laid out for batched iteration.
    """
    g = np.asarray(local_operators(params).local_gate).reshape(2, 2, 2, 2, 2, 2)
    # g[x, y, a, i, k, t] with the target input fixed to |o>
    g0 = g[..., 0]
    m = np.einsum("xyaik,xybjl->abijkl", g0, g0.conj())
    return m.reshape(4, 4, 4)


def _vec(n, sx, sy):
    off = (sx + 1j * sy) / 2
    return np.stack([1 - n + 0j, off, np.conj(off), n + 0j], axis=-1)


def _unvec(v):
    n = v[..., 3].real
    sx = 2 * v[..., 1].real
    sy = 2 * v[..., 1].imag
    return n, sx, sy


def _iterate(maps, start, max_iter, tol):
    """Batched fixed-point iteration; converged entries are frozen."""
    v = np.array(start, dtype=complex)
    done = np.zeros(v.shape[0], dtype=bool)
    iters = np.full(v.shape[0], max_iter, dtype=int)
    for it in range(1, max_iter + 1):
        active = ~done
        va = v[active]
        new = np.matmul(np.matmul(maps[active], va[:, None, :, None])[..., 0], va[:, :, None])[..., 0]
        # trace is squared by the quadratic map, so unit trace is an unstable fixed point under roundoff
        new /= (new[:, 0] + new[:, 3]).real[:, None]
        delta = np.max(np.abs(np.stack(_unvec(new)) - np.stack(_unvec(v[active]))), axis=0)
        v[active] = new
        hit = np.flatnonzero(active)[delta < tol]
        done[hit] = True
        iters[hit] = it
        if done.all():
            break
    return v, done, iters


def mf_stationary(params: GateParams, state0: MeanFieldState | None = None, max_iter=10000, tol=1e-12):
    """Iterate the mean-field map until the sup-norm update drops below ``tol``.

    Returns ``(state, converged, iterations)``.  Non-convergence, typical next
    to a continuous transition, is reported through the flag.
    """
    if max_iter < 1:
        raise ParameterError("max_iter", max_iter, "must be at least 1")
    if tol <= 0:
        raise ParameterError("tol", tol, "must be positive")
    state0 = state0 or MeanFieldState(1.0, 0.0, 0.0)
    if not state0.feasible():
        raise ParameterError("state0", state0, "outside the Bloch ball")
    maps = bilinear_map(params)[None]
    v, done, iters = _iterate(maps, _vec(state0.n, state0.sx, state0.sy)[None], max_iter, tol)
    n, sx, sy = _unvec(v[0])
    return MeanFieldState(float(n), float(sx), float(sy)), bool(done[0]), int(iters[0])


def fixed_point_refine(params: GateParams, state: MeanFieldState):
    """Newton polish of an iterated fixed point (cross-check only)."""
    from scipy.optimize import fsolve

    def residual(x):
        s = MeanFieldState(*x)
        return mf_step(s, params).as_array() - x

    x = fsolve(residual, state.as_array(), xtol=1e-14)
    return MeanFieldState(*map(float, x))


def mf_p1_one_closed_form(p2):
    """Active stationary density at ``p1 = 1``: ``max(0, 3/2 + 1/(p2 - 1))``."""
    p2 = float(p2)
    if p2 == 1.0:
        raise ParameterError("p2", p2, "singular at p2 = 1")
    if not 0.0 <= p2 < 1.0:
        raise ParameterError("p2", p2, "must lie in [0, 1)")
    return max(0.0, 1.5 + 1.0 / (p2 - 1.0))


def printed_update(state: MeanFieldState, p1, p2) -> MeanFieldState:
    """Hand-expanded update polynomials as they circulate in print.

    Kept only to document that they disagree with the exact contraction:
    at ``(n, sx, sy) = (1, 0, 0)``, ``p1 = 1``, ``p2 = 0`` they give a
    negative density where the contraction gives 0.5.
    """
    n, sx, sy = state.n, state.sx, state.sy
    a, b = np.sqrt(p1), np.sqrt(1 - p1)
    c = np.sqrt(1 - p2)
    r2 = np.sqrt(2)
    n_new = (1 - p2) * (p1 * n**2 + (r2 / 2 * a * b * sx - p1 / 2 - 1) * n - p1 / 8 * (sx**2 + sy**2))
    sy_new = c * sy * (n * (1 - b) + r2 / 2 * a * sx + b)
    sx_new = (
        c * (2 * r2 * a * b * n**2 - (2 * r2 * a * b + (2 * p1 + b - 1) * sx) * n)
        + c * (b * sx - r2 / 4 * a * (b - 1) * sx**2)
        - r2 / 4 * c * a * (b + 1) * sy**2
    )
    return MeanFieldState(float(n_new), float(sx_new), float(sy_new))


@dataclass
class PhaseDiagram:
    p1_grid: np.ndarray
    p2_grid: np.ndarray
    n_stationary: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.p1_grid = np.asarray(self.p1_grid, dtype=float)
        self.p2_grid = np.asarray(self.p2_grid, dtype=float)
        self.n_stationary = np.asarray(self.n_stationary, dtype=float)
        if self.n_stationary.shape != (len(self.p1_grid), len(self.p2_grid)):
            raise ValueError("n_stationary shape does not match the grids")


def _check_grid(name, grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ParameterError(name, grid, "grid must be a non-empty 1-D sequence")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError(name, grid, "grid must be strictly increasing")
    return grid


def mf_phase_diagram(p1_grid, p2_grid, max_iter=10000, tol=1e-12) -> PhaseDiagram:
    """Stationary density over a grid, always started from the full state ``(1, 0, 0)``."""
    p1_grid = _check_grid("p1_grid", p1_grid)
    p2_grid = _check_grid("p2_grid", p2_grid)
    out = np.empty((len(p1_grid), len(p2_grid)))
    converged = np.empty_like(out, dtype=bool)
    iterations = np.empty_like(out, dtype=int)
    start = np.repeat(_vec(1.0, 0.0, 0.0)[None], len(p2_grid), axis=0)
    for i, p1 in enumerate(p1_grid):
        maps = np.stack([bilinear_map(make_gate_params(p1, p2)) for p2 in p2_grid])
        v, done, iters = _iterate(maps, start, max_iter, tol)
        out[i] = _unvec(v)[0]
        converged[i] = done
        iterations[i] = iters
    meta = {
        "max_iter": max_iter,
        "tol": tol,
        "initial_state": [1.0, 0.0, 0.0],
        "unconverged_points": int((~converged).sum()),
        "max_iterations_used": int(iterations.max()),
    }
    return PhaseDiagram(p1_grid, p2_grid, out, meta)


@dataclass
class CriticalRecord:
    p1: float
    p2_crit: float | None
    order: str | None
    max_abs_gradient: float
    threshold: float
    degenerate: bool = False


REFERENCE_SAMPLES = 2001
REFERENCE_THRESHOLD = 10.0


def scaled_threshold(p2_grid, threshold=REFERENCE_THRESHOLD, reference_samples=REFERENCE_SAMPLES):
    """Threshold rescaled to the grid's sample density relative to 2001 points on [0, 1]."""
    p2_grid = np.asarray(p2_grid, dtype=float)
    density = (len(p2_grid) - 1) / (p2_grid[-1] - p2_grid[0])
    return float(threshold * density / (reference_samples - 1))


def backward_gradient(values, grid):
    """``(f[i] - f[i-1]) / (x[i] - x[i-1])``, with the forward difference at ``i = 0``.

    Backward rather than central differences: the segment that straddles the
    threshold is only partly active, so its slope is shallower than that of
    the last fully active segment.  The backward difference credits that
    segment to its right end, the last active sample, which sits within one
    spacing of the threshold.  Central differences average the straddling
    segment in and pull the maximum one or two samples further left.
    """
    values = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    d = np.diff(values) / np.diff(grid)
    return np.concatenate([d[:1], d])


GRADIENT_SCHEMES = ("backward", "central")


def mf_critical_line(diagram: PhaseDiagram, gradient_threshold=REFERENCE_THRESHOLD, scale_threshold=True,
                     scheme="backward"):
    """Critical ``p2`` per ``p1`` slice at the largest ``|dn*/dp2|`` and the transition order.

    A slice is called discontinuous when the largest gradient exceeds the
    threshold.  With ``scale_threshold`` the threshold is interpreted at 2001
    samples on the unit interval and rescaled to the actual grid density.
    ``scheme="central"`` swaps in ``numpy.gradient``; see
    :func:`backward_gradient` for why it is not the default.
    """
    if scheme not in GRADIENT_SCHEMES:
        raise ParameterError("scheme", scheme, f"expected one of {GRADIENT_SCHEMES}")
    p2 = diagram.p2_grid
    if len(p2) < 3:
        raise EstimationError("need at least three p2 samples per slice")
    thr = scaled_threshold(p2, gradient_threshold) if scale_threshold else float(gradient_threshold)
    records = []
    for p1, row in zip(diagram.p1_grid, diagram.n_stationary):
        if np.all(np.abs(row) < 1e-12):
            records.append(CriticalRecord(float(p1), None, None, 0.0, thr, degenerate=True))
            continue
        grad = backward_gradient(row, p2) if scheme == "backward" else np.gradient(row, p2)
        i = int(np.argmax(np.abs(grad)))
        g = float(abs(grad[i]))
        records.append(CriticalRecord(float(p1), float(p2[i]), "discontinuous" if g > thr else "continuous", g, thr))
    return records


def order_boundary(records):
    """Midpoint between the last discontinuous slice and the first continuous one above it."""
    usable = [r for r in records if not r.degenerate]
    usable.sort(key=lambda r: r.p1)
    for lo, hi in zip(usable, usable[1:]):
        if lo.order == "discontinuous" and hi.order == "continuous":
            return 0.5 * (lo.p1 + hi.p1)
    return None
