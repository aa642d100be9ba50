"""Matrix-product evolution of the vectorised row density matrix.

Every site carries a four-dimensional leg ``2*i + j`` for ``rho[..i.., ..j..]``.
One QCA step is a right-to-left staircase of doubled two-site unitaries
``U (x) conj(U)`` followed by the single-site decay superoperator on every
site.  Truncation happens in the SVD after each two-site gate, and each
step ends with a projection back onto Hermitian matrices.

Sites are 0-based here: a two-site gate at ``k`` acts on ``(k, k+1)``.
"""

from __future__ import annotations

import logging

import numpy as np

from .dense import single_site_states
from .errors import DegenerateStateError, NumericalError, ParameterError
from .gates import NUMBER, SIGMA_X, SIGMA_Y, GateParams, doubled_two_site_gate, local_operators
from .series import TimeSeries, format_float

logger = logging.getLogger(__name__)

__all__ = [
    "VectorizedMps",
    "mps_from_product",
    "apply_doubled_two_site_gate",
    "apply_site_superop",
    "hermitian_projection",
    "mps_step",
    "mps_expectation",
    "mps_observables",
    "mps_evolve",
    "diagnostics_csv",
]

_TRACE = np.eye(2, dtype=complex).reshape(4)
# <<O|rho>> = Tr(O rho) = sum_ij O_ji rho_ij, i.e. the transposed operator flattened
_OBS = {
    "n": NUMBER.T.reshape(4),
    "sx": SIGMA_X.T.reshape(4),
    "sy": SIGMA_Y.T.reshape(4),
}
IMAG_TOL = 1e-8


def _is_real(x):
    return not np.iscomplexobj(x) or not np.any(x.imag)


def _match(mps, op):
    """Operator in the MPS dtype; a complex operator promotes the whole chain.

    Real tensors are kept real on purpose: the transpose/conjugation symmetry
    of a real Hermitian state is then broken only by SVD roundoff in one
    sector instead of two, which keeps the anti-Hermitian drift negligible.
    """
    op = np.asarray(op)
    if mps.is_real:
        if _is_real(op):
            return op.real
        mps.tensors = [t.astype(complex) for t in mps.tensors]
    return op


class VectorizedMps:
    """Open-boundary MPS with tensors shaped ``(left bond, 4, right bond)``.

    ``ortho_center`` is the site holding the norm when the chain is in
    mixed-canonical form, or ``None`` after an operation that broke it.
    """

    def __init__(self, tensors, chi_max=64, cutoff=1e-12, ortho_center=None):
        if chi_max < 1:
            raise ParameterError("chi_max", chi_max, "must be at least 1")
        tensors = [np.asarray(t) for t in tensors]
        real = all(_is_real(t) for t in tensors)
        self.tensors = [t.real.astype(float) if real else t.astype(complex) for t in tensors]
        self.chi_max = int(chi_max)
        self.cutoff = float(cutoff)
        self.ortho_center = ortho_center
        self.discarded = 0.0

    @property
    def l(self):
        return len(self.tensors)

    @property
    def is_real(self):
        return not np.iscomplexobj(self.tensors[0])

    def copy(self):
        out = VectorizedMps([t.copy() for t in self.tensors], self.chi_max, self.cutoff, self.ortho_center)
        out.discarded = self.discarded
        return out

    def bond_dims(self):
        return [t.shape[2] for t in self.tensors[:-1]]

    def max_bond_dim(self):
        return max(self.bond_dims(), default=1)

    def _shift_right(self, i):
        a = self.tensors[i]
        cl, d, cr = a.shape
        q, r = np.linalg.qr(a.reshape(cl * d, cr))
        self.tensors[i] = q.reshape(cl, d, -1)
        self.tensors[i + 1] = np.tensordot(r, self.tensors[i + 1], axes=(1, 0))

    def _shift_left(self, i):
        a = self.tensors[i]
        cl, d, cr = a.shape
        q, r = np.linalg.qr(a.reshape(cl, d * cr).T)
        self.tensors[i] = q.T.reshape(-1, d, cr)
        self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], r.T, axes=(2, 0))

    def canonicalize(self, center):
        """Full QR sweeps from both ends; valid whatever the previous gauge."""
        if not 0 <= center < self.l:
            raise ParameterError("center", center, f"must lie in [0, {self.l})")
        for i in range(center):
            self._shift_right(i)
        for i in range(self.l - 1, center, -1):
            self._shift_left(i)
        self.ortho_center = center
        return self

    def move_center(self, k):
        if self.ortho_center is None:
            return self.canonicalize(k)
        if not 0 <= k < self.l:
            raise ParameterError("center", k, f"must lie in [0, {self.l})")
        while self.ortho_center < k:
            self._shift_right(self.ortho_center)
            self.ortho_center += 1
        while self.ortho_center > k:
            self._shift_left(self.ortho_center)
            self.ortho_center -= 1
        return self

    def trace(self):
        env = np.ones(1, dtype=complex)
        for a in self.tensors:
            env = env @ np.tensordot(a, _TRACE, axes=(1, 0))
        return complex(env[0])

    def isometry_error(self):
        """Largest deviation from left/right isometry around the centre."""
        if self.ortho_center is None:
            return np.inf
        err = 0.0
        for i, a in enumerate(self.tensors):
            cl, d, cr = a.shape
            if i < self.ortho_center:
                m = a.reshape(cl * d, cr)
                err = max(err, np.abs(m.conj().T @ m - np.eye(cr)).max())
            elif i > self.ortho_center:
                m = a.reshape(cl, d * cr)
                err = max(err, np.abs(m @ m.conj().T - np.eye(cl)).max())
        return float(err)

    def to_dense(self):
        """Contract to a ``2^L x 2^L`` matrix (small chains only; for testing)."""
        psi = self.tensors[0]
        for a in self.tensors[1:]:
            psi = np.tensordot(psi, a, axes=(psi.ndim - 1, 0))
        l = self.l
        psi = psi.reshape((2, 2) * l)
        perm = list(range(0, 2 * l, 2)) + list(range(1, 2 * l, 2))
        return psi.transpose(perm).reshape(2**l, 2**l)


def mps_from_product(l, kind="full", chi_max=64, cutoff=1e-12):
    """Bond-dimension-1 MPS of a product density matrix, left-canonical up to the last site."""
    if l < 2:
        raise ParameterError("l", l, "need at least two sites")
    tensors = [rho.reshape(1, 4, 1) for rho in single_site_states(l, kind)]
    return VectorizedMps(tensors, chi_max=chi_max, cutoff=cutoff).canonicalize(l - 1)


def _svd(theta, k):
    try:
        return np.linalg.svd(theta, full_matrices=False)
    except np.linalg.LinAlgError:
        from scipy.linalg import svd

        try:
            return svd(theta, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"SVD failed on bond ({k}, {k + 1})") from exc


def _fix_phases(u, vh):
    """Largest-magnitude entry of each left singular vector made real positive."""
    idx = np.argmax(np.abs(u), axis=0)
    ph = u[idx, np.arange(u.shape[1])]
    ph = ph / np.abs(ph)  # a sign when u is real
    return u * ph.conj()[None, :], vh * ph[:, None]


def apply_doubled_two_site_gate(mps: VectorizedMps, k, gate, move="left"):
    """Apply ``gate`` (4x4 unitary, or its 16x16 doubled form) to sites ``(k, k+1)``.

    The centre must be reachable at ``k`` or ``k+1``; afterwards it sits at
    ``k`` for ``move="left"`` and at ``k+1`` for ``move="right"``.  The
    relative discarded weight of the split is returned and added to
    ``mps.discarded``.
    """
    if not 0 <= k < mps.l - 1:
        raise ParameterError("k", k, f"two-site gate needs 0 <= k < {mps.l - 1}")
    gate = np.asarray(gate)
    g16 = _match(mps, doubled_two_site_gate(gate) if gate.shape == (4, 4) else gate)
    if mps.ortho_center not in (k, k + 1):
        mps.move_center(k if mps.ortho_center is None or mps.ortho_center <= k else k + 1)
    a, b = mps.tensors[k], mps.tensors[k + 1]
    cl, cr = a.shape[0], b.shape[2]
    theta = np.tensordot(a, b, axes=(2, 0)).reshape(cl, 16, cr)
    theta = np.einsum("xy,ayc->axc", g16, theta).reshape(cl * 4, 4 * cr)
    u, s, vh = _svd(theta, k)
    total = float(np.sum(s**2))
    if total == 0.0:
        raise DegenerateStateError(f"zero two-site block at bond ({k}, {k + 1})")
    keep, discarded = _truncate(mps, s)
    u, s, vh = u[:, :keep], s[:keep], vh[:keep]
    u, vh = _fix_phases(u, vh)
    if move == "left":
        mps.tensors[k] = (u * s[None, :]).reshape(cl, 4, keep)
        mps.tensors[k + 1] = vh.reshape(keep, 4, cr)
        mps.ortho_center = k
    elif move == "right":
        mps.tensors[k] = u.reshape(cl, 4, keep)
        mps.tensors[k + 1] = (s[:, None] * vh).reshape(keep, 4, cr)
        mps.ortho_center = k + 1
    else:
        raise ParameterError("move", move, "expected 'left' or 'right'")
    mps.discarded += discarded
    return discarded


def apply_site_superop(mps: VectorizedMps, k, superop):
    """Contract a 4x4 superoperator into site ``k``; bond dimensions are untouched."""
    if not 0 <= k < mps.l:
        raise ParameterError("k", k, f"site must lie in [0, {mps.l})")
    superop = _match(mps, superop)
    mps.tensors[k] = np.einsum("xy,ayb->axb", superop, mps.tensors[k])
    if mps.ortho_center != k:
        mps.ortho_center = None
    return mps


_BRA_KET = [0, 2, 1, 3]


def _truncate(mps, s):
    keep = int(np.sum(s > mps.cutoff * s[0])) if s[0] > 0 else 1
    keep = max(1, min(keep, mps.chi_max))
    total = float(np.sum(s**2))
    return keep, (float(np.sum(s[keep:] ** 2) / total) if total > 0 else 0.0)


def hermitian_projection(mps: VectorizedMps):
    """Replace the state by ``(rho + rho^dag) / 2`` and recompress; centre ends at ``L-1``.

    Truncation is a Frobenius-norm projection, so it does not respect
    Hermiticity, and the anti-Hermitian remainder it seeds is amplified by
    later truncations.  Summing the MPS with its conjugate-transposed copy
    doubles the bonds; a QR sweep followed by an SVD sweep brings them back
    under ``chi_max``.  Returns the largest relative discarded weight.
    """
    l = mps.l
    flipped = [t[:, _BRA_KET, :].conj() for t in mps.tensors]
    new = []
    for k, (a, b) in enumerate(zip(mps.tensors, flipped)):
        if k == 0:
            new.append(np.concatenate([a, b], axis=2))
        elif k == l - 1:
            new.append(0.5 * np.concatenate([a, b], axis=0))
        else:
            cl, _, cr = a.shape
            blk = np.zeros((2 * cl, 4, 2 * cr), dtype=a.dtype)
            blk[:cl, :, :cr] = a
            blk[cl:, :, cr:] = b
            new.append(blk)
    mps.tensors = new
    for i in range(l - 1, 0, -1):
        mps._shift_left(i)
    worst = 0.0
    for k in range(l - 1):
        a = mps.tensors[k]
        cl, d, cr = a.shape
        u, s, vh = _svd(a.reshape(cl * d, cr), k)
        keep, w = _truncate(mps, s)
        worst = max(worst, w)
        u, vh = _fix_phases(u[:, :keep], vh[:keep])
        mps.tensors[k] = u.reshape(cl, d, keep)
        mps.tensors[k + 1] = np.tensordot(s[:keep, None] * vh, mps.tensors[k + 1], axes=(1, 0))
    mps.ortho_center = l - 1
    return worst


def mps_step(mps: VectorizedMps, params: GateParams, hermitize=True):
    """One QCA step in place; returns ``(mps, diagnostics)``.

    Diagnostics: largest single-split discarded weight, the trace before
    renormalisation, and the largest bond dimension after the step.  With
    ``hermitize`` (default) the state is projected back onto Hermitian
    matrices at the end of the step, see :func:`hermitian_projection`.
    """
    ops = local_operators(params)
    l = mps.l
    mps.move_center(l - 1)
    worst = 0.0
    if params.p1 > 0.0:
        for k in range(l - 2, -1, -1):
            worst = max(worst, apply_doubled_two_site_gate(mps, k, ops.doubled_u, move="left"))
    if params.p2 > 0.0:
        for k in range(l):
            apply_site_superop(mps, k, ops.dissipation_superop)
    if hermitize:
        worst = max(worst, hermitian_projection(mps))
    elif mps.ortho_center is None:
        mps.canonicalize(l - 1)
    else:
        mps.move_center(l - 1)
    tr = mps.trace()
    if abs(tr) < 1e-300:
        raise DegenerateStateError("vectorised trace vanished")
    mps.tensors[l - 1] = mps.tensors[l - 1] / (tr.real if mps.is_real else tr)
    return mps, {"max_discarded_weight": worst, "pre_norm_trace": tr.real, "max_bond_dim": mps.max_bond_dim()}


def _environments(mps):
    left = [np.ones(1, dtype=complex)]
    for a in mps.tensors[:-1]:
        left.append(left[-1] @ np.tensordot(a, _TRACE, axes=(1, 0)))
    right = [np.ones(1, dtype=complex)]
    for a in reversed(mps.tensors[1:]):
        right.append(np.tensordot(a, _TRACE, axes=(1, 0)) @ right[-1])
    right.reverse()
    return left, right


def _site_values(mps, names):
    left, right = _environments(mps)
    tr = left[-1] @ np.tensordot(mps.tensors[-1], _TRACE, axes=(1, 0)) @ right[-1]
    tr = complex(tr)
    if abs(tr) < 1e-300:
        raise DegenerateStateError("vectorised trace vanished")
    out = {}
    for name in names:
        vec = _OBS[name]
        vals = np.array([
            complex(left[k] @ np.tensordot(a, vec, axes=(1, 0)) @ right[k]) for k, a in enumerate(mps.tensors)
        ]) / tr
        out[name] = vals
    return out


def _real(vals, name):
    worst = float(np.max(np.abs(vals.imag))) if len(vals) else 0.0
    if worst > IMAG_TOL:
        raise NumericalError(f"<{name}> has imaginary part {worst:.3e}")
    return vals.real


def mps_expectation(mps: VectorizedMps, site=None, op="n"):
    """Normalised single-site expectation at ``site``, or the chain mean for ``site=None``."""
    if op not in _OBS:
        raise ParameterError("op", op, f"expected one of {sorted(_OBS)}")
    vals = _real(_site_values(mps, [op])[op], op)
    if site is None:
        return float(vals.mean())
    if not 0 <= site < mps.l:
        raise ParameterError("site", site, f"must lie in [0, {mps.l})")
    return float(vals[site])


def mps_observables(mps: VectorizedMps):
    """Per-site ``(<n>, <sigma^x>, <sigma^y>)`` from one pair of environment sweeps."""
    vals = _site_values(mps, ["n", "sx", "sy"])
    return tuple(_real(vals[k], k) for k in ("n", "sx", "sy"))


def mps_evolve(mps0: VectorizedMps, params: GateParams, t_max, observables_sel=("n_site", "transverse")):
    """Evolve a copy of ``mps0`` for ``t_max`` steps.

    ``meta["diagnostics"]`` holds per-step arrays ``t``,
    ``max_discarded_weight``, ``pre_norm_trace`` and ``max_bond_dim`` (t=0
    carries the initial state's values).
    """
    if t_max < 0:
        raise ParameterError("t_max", t_max, "must be non-negative")
    sel = set(observables_sel)
    mps = mps0.copy()
    n_rows, sx_rows, sy_rows = [], [], []
    diag = {"t": [], "max_discarded_weight": [], "pre_norm_trace": [], "max_bond_dim": []}

    def record(t, d):
        n, sx, sy = mps_observables(mps)
        n_rows.append(n)
        sx_rows.append(sx.mean())
        sy_rows.append(sy.mean())
        diag["t"].append(t)
        for key in ("max_discarded_weight", "pre_norm_trace", "max_bond_dim"):
            diag[key].append(d[key])

    record(0, {"max_discarded_weight": 0.0, "pre_norm_trace": mps.trace().real, "max_bond_dim": mps.max_bond_dim()})
    for t in range(1, t_max + 1):
        mps, d = mps_step(mps, params)
        record(t, d)
    n_site = np.array(n_rows)
    return TimeSeries(
        times=np.arange(t_max + 1),
        n_mean=n_site.mean(axis=1),
        n_site=n_site if "n_site" in sel else None,
        sx_mean=np.array(sx_rows) if "transverse" in sel else None,
        sy_mean=np.array(sy_rows) if "transverse" in sel else None,
        meta={
            "backend": "mps",
            "l": mps.l,
            "chi_max": mps.chi_max,
            "cutoff": mps.cutoff,
            "p1": params.p1,
            "p2": params.p2,
            "diagnostics": {k: np.asarray(v) for k, v in diag.items()},
            "total_discarded_weight": mps.discarded,
            "final_state": mps,
        },
    )


def diagnostics_csv(diag):
    """Sidecar CSV with header ``t,max_discarded_weight,pre_norm_trace,max_bond_dim``."""
    lines = ["t,max_discarded_weight,pre_norm_trace,max_bond_dim"]
    for t, w, tr, chi in zip(diag["t"], diag["max_discarded_weight"], diag["pre_norm_trace"], diag["max_bond_dim"]):
        lines.append(f"{int(t)},{format_float(w)},{format_float(tr)},{int(chi)}")
    return "\n".join(lines) + "\n"
