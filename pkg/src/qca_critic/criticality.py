"""Critical-point and exponent estimation from families of density curves.

Two selectors pick the critical slice of a family at fixed ``p1``:

* ``critical_by_r2``: best straight line in log-log over a fit window;
* ``critical_by_flat_alpha``: flattest effective exponent over an
  averaging window.

The exponent is the mean of ``alpha(t) = -log2[n(2t) / n(t)]`` over the
averaging window, and its uncertainty is the root sum of squares of the
finite-size, finite-bond and grid-resolution terms.

Windows are given on a reference horizon of 100 steps.  When a run is
shorter, a window that overruns it is scaled by ``horizon / 100`` and the
rescaling is recorded on the estimate.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EstimationError, ParameterError
from .series import TimeSeries, format_float

logger = logging.getLogger(__name__)

__all__ = [
    "ALPHA_DP",
    "ALPHA_QCP",
    "ExponentCurve",
    "SeriesFamily",
    "CriticalEstimate",
    "resolve_window",
    "effective_exponent",
    "loglog_fit",
    "r2_scores",
    "critical_by_r2",
    "flatness_scores",
    "critical_by_flat_alpha",
    "estimate_alpha",
    "error_budget",
    "combine_methods",
    "analyze_family",
    "ANALYSIS_METHODS",
    "estimates_to_csv",
]

# reference values, for annotation only
ALPHA_DP = (0.159464, 0.000006)
ALPHA_QCP = ((0.32, 0.01), (0.36, 0.08))

REFERENCE_HORIZON = 100
FIT_WINDOW = (10, 100)
AVG_WINDOW = (80, 100)
P1_ONE_P2_FLOOR = 0.15


def resolve_window(window, horizon, reference=REFERENCE_HORIZON):
    """Return ``(window, rescaled)``; overrunning windows shrink by ``horizon / reference``."""
    lo, hi = float(window[0]), float(window[1])
    if not lo <= hi:
        raise ParameterError("window", window, "lower edge exceeds upper edge")
    if hi <= horizon:
        return (lo, hi), False
    f = horizon / reference
    return (lo * f, hi * f), True


@dataclass
class ExponentCurve:
    t: np.ndarray
    alpha: np.ndarray
    omitted: list = field(default_factory=list)

    def __iter__(self):
        return iter(zip(self.t.tolist(), self.alpha.tolist()))

    def __len__(self):
        return len(self.t)

    def window(self, lo, hi):
        m = (self.t >= lo) & (self.t <= hi)
        return self.t[m], self.alpha[m]


def _integer_times(series):
    t = np.asarray(series.times)
    ti = np.rint(t).astype(int)
    if np.any(np.abs(t - ti) > 1e-9):
        raise ParameterError("times", "non-integer", "effective exponents need integer steps")
    return ti


def effective_exponent(series: TimeSeries) -> ExponentCurve:
    """``alpha(t)`` for integer ``t >= 1`` with ``2t <= T``; points with a non-positive density are omitted."""
    ti = _integer_times(series)
    lookup = {int(t): float(n) for t, n in zip(ti, series.n_mean)}
    ts, al, omitted = [], [], []
    for t in sorted(k for k in lookup if k >= 1 and 2 * k in lookup):
        a, b = lookup[t], lookup[2 * t]
        if a > 0 and b > 0:
            ts.append(t)
            al.append(-math.log2(b / a))
        else:
            omitted.append(t)
    if omitted:
        logger.warning("effective exponent: %d points omitted for non-positive density", len(omitted))
    return ExponentCurve(np.array(ts, dtype=int), np.array(al, dtype=float), omitted)


def loglog_fit(series: TimeSeries, window=FIT_WINDOW):
    """Least-squares line through ``(log t, log n)`` for positive points in the window.

    Returns ``(slope, intercept, r2)``.  A constant response has no variance
    to explain and gets ``r2 = 0``, so an absorbed or frozen slice can never
    win on fit quality.
    """
    t = np.asarray(series.times, dtype=float)
    n = np.asarray(series.n_mean, dtype=float)
    m = (t >= window[0]) & (t <= window[1]) & (t > 0) & (n > 0)
    if m.sum() < 3:
        raise EstimationError(f"fewer than 3 positive points in window {tuple(window)}")
    x, y = np.log(t[m]), np.log(n[m])
    if np.all(y == y[0]):
        return 0.0, float(y[0]), 0.0
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    return float(slope), float(intercept), float(min(1.0, max(0.0, 1.0 - ss_res / ss_tot)))


@dataclass
class SeriesFamily:
    """Density curves at fixed ``p1`` for increasing ``p2``."""

    p1: float
    entries: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = [(float(p2), s) for p2, s in self.entries]
        if not self.entries:
            raise ParameterError("entries", [], "empty family")
        p2s = [p for p, _ in self.entries]
        if any(b <= a for a, b in zip(p2s, p2s[1:])):
            raise ParameterError("entries", p2s, "p2 values must be strictly increasing")
        horizons = {s.t_max for _, s in self.entries}
        if len(horizons) != 1:
            raise ParameterError("entries", sorted(horizons), "all series must share T")

    @property
    def p2_values(self):
        return np.array([p for p, _ in self.entries])

    @property
    def t_max(self):
        return self.entries[0][1].t_max

    def series_at(self, p2, tol=1e-12):
        for p, s in self.entries:
            if abs(p - p2) <= tol:
                return s
        return None

    def neighbours(self, p2):
        """``(below, above)`` grid values around ``p2``; ``None`` at an edge."""
        p2s = list(self.p2_values)
        i = int(np.argmin(np.abs(np.array(p2s) - p2)))
        return (p2s[i - 1] if i > 0 else None), (p2s[i + 1] if i + 1 < len(p2s) else None)


def _grid_err(family, p2):
    below, above = family.neighbours(p2)
    gaps = [abs(p2 - q) for q in (below, above) if q is not None]
    return max(gaps) if gaps else 0.0


def r2_scores(family: SeriesFamily, window=FIT_WINDOW):
    """``{p2: r2}`` for the usable slices; ``window`` already resolved."""
    out = {}
    for p2, s in family.entries:
        try:
            out[p2] = loglog_fit(s, window)[2]
        except EstimationError:
            continue
    return out


def critical_by_r2(family: SeriesFamily, window=FIT_WINDOW):
    """``(p2_crit, grid_err)`` from the slice with the best log-log fit."""
    window, _ = resolve_window(window, family.t_max)
    scores = r2_scores(family, window)
    if not scores:
        raise EstimationError("no usable slice for the log-log fit")
    best = max(scores, key=lambda p: (scores[p], -p))
    return best, _grid_err(family, best)


def _p2_floor(family, p2_lower_bound):
    if p2_lower_bound == "auto":
        return P1_ONE_P2_FLOOR if family.p1 == 1.0 else None
    return p2_lower_bound


def flatness_scores(family: SeriesFamily, avg_window=AVG_WINDOW, p2_lower_bound="auto"):
    """``{p2: mean |first difference| of the mean-shifted alpha(t)}``; window already resolved."""
    floor = _p2_floor(family, p2_lower_bound)
    out = {}
    for p2, s in family.entries:
        if floor is not None and not p2 > floor:
            continue
        _, a = effective_exponent(s).window(*avg_window)
        if len(a) < 2:
            continue
        a = a - a.mean()
        out[p2] = float(np.mean(np.abs(np.diff(a))))
    return out


def critical_by_flat_alpha(family: SeriesFamily, avg_window=AVG_WINDOW, p2_lower_bound="auto"):
    """``(p2_crit, grid_err)`` from the slice whose effective exponent is flattest.

    ``p2_lower_bound="auto"`` keeps only ``p2 > 0.15`` when ``p1 == 1``, where
    small-``p2`` slices settle onto a plateau that is flat for the wrong reason.
    """
    avg_window, _ = resolve_window(avg_window, family.t_max // 2)
    scores = flatness_scores(family, avg_window, p2_lower_bound)
    if not scores:
        raise EstimationError(f"no slice has two alpha samples in {tuple(avg_window)}")
    best = min(scores, key=lambda p: (scores[p], p))
    return best, _grid_err(family, best)


def estimate_alpha(series: TimeSeries, avg_window=AVG_WINDOW):
    """Mean of ``alpha(t)`` over the averaging window (rescaled if it overruns ``T/2``)."""
    avg_window, _ = resolve_window(avg_window, series.t_max // 2)
    _, a = effective_exponent(series).window(*avg_window)
    if len(a) == 0:
        raise EstimationError(f"no alpha samples in {tuple(avg_window)}")
    return float(a.mean())


def error_budget(alpha_ref, alpha_half_l=None, alpha_half_chi=None, alpha_neighbor_above=None,
                 alpha_neighbor_below=None):
    """Combined exponent error and its components.

    Each available reference run contributes ``|alpha_ref - alpha_other|``;
    the grid term takes the larger of the two neighbours, or the one that
    exists.  Components are combined as fractional errors in quadrature and
    converted back; at ``alpha_ref == 0`` the absolute quadrature sum is used
    and ``absolute_fallback`` is set.
    """
    def diff(x):
        return None if x is None else abs(alpha_ref - x)

    nb = [diff(x) for x in (alpha_neighbor_above, alpha_neighbor_below) if x is not None]
    comps = {
        "finite_size_err": diff(alpha_half_l),
        "finite_chi_err": diff(alpha_half_chi),
        "grid_err": max(nb) if nb else None,
    }
    present = [c for c in comps.values() if c is not None]
    if alpha_ref == 0:
        comps["absolute_fallback"] = True
        return math.sqrt(sum(c * c for c in present)), comps
    scale = abs(alpha_ref)
    combined = scale * math.hypot(*(c / scale for c in present))
    comps["absolute_fallback"] = False
    return combined, comps


@dataclass
class CriticalEstimate:
    p1: float
    p2_crit: float
    p2_err: float
    alpha: float
    alpha_err: float
    method: str
    components: dict | None = None
    notes: dict = field(default_factory=dict)

    METHODS = ("r2-fit", "flat-alpha", "averaged")

    def __post_init__(self):
        if self.method not in self.METHODS:
            raise ParameterError("method", self.method, f"expected one of {self.METHODS}")
        if self.p2_err < 0 or self.alpha_err < 0:
            raise ParameterError("errors", (self.p2_err, self.alpha_err), "must be non-negative")
        if not math.isfinite(self.alpha):
            raise EstimationError(f"non-finite exponent {self.alpha}")
        if self.method == "averaged" and self.components is None:
            raise ParameterError("components", None, "required for averaged estimates")

    def to_dict(self):
        d = asdict(self)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def csv_row(self):
        return [format_float(self.p1), format_float(self.p2_crit), format_float(self.p2_err),
                format_float(self.alpha), format_float(self.alpha_err), self.method]


def estimates_to_csv(estimates):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p1", "p2_crit", "p2_err", "alpha", "alpha_err", "method"])
    for e in estimates:
        w.writerow(e.csv_row())
    return buf.getvalue()


def _rss(*xs):
    xs = [x for x in xs if x is not None]
    return math.sqrt(sum(x * x for x in xs)) if xs else None


def combine_methods(est_r2: CriticalEstimate, est_flat: CriticalEstimate) -> CriticalEstimate:
    """Average two estimates; their errors add in quadrature, component by component."""
    if est_r2.p1 != est_flat.p1:
        raise ParameterError("p1", (est_r2.p1, est_flat.p1), "estimates belong to different p1")
    keys = ("finite_size_err", "finite_chi_err", "grid_err")
    ca, cb = est_r2.components or {}, est_flat.components or {}
    comps = {k: _rss(ca.get(k), cb.get(k)) for k in keys}
    notes = {"sources": [est_r2.method, est_flat.method]}
    for src in (est_r2, est_flat):
        for k, v in src.notes.items():
            notes.setdefault(k, v)
    return CriticalEstimate(
        p1=est_r2.p1,
        p2_crit=0.5 * (est_r2.p2_crit + est_flat.p2_crit),
        p2_err=_rss(est_r2.p2_err, est_flat.p2_err),
        alpha=0.5 * (est_r2.alpha + est_flat.alpha),
        alpha_err=_rss(est_r2.alpha_err, est_flat.alpha_err),
        method="averaged",
        components=comps,
        notes=notes,
    )


def _alpha_or_none(family, p2, avg_window):
    if family is None:
        return None
    s = family.series_at(p2)
    if s is None:
        return None
    try:
        return estimate_alpha(s, avg_window)
    except EstimationError:
        return None


def _estimate(family, method, p2, p2_err, avg_window, half_l, half_chi, notes):
    alpha = estimate_alpha(family.series_at(p2), avg_window)
    below, above = family.neighbours(p2)
    err, comps = error_budget(
        alpha,
        alpha_half_l=_alpha_or_none(half_l, p2, avg_window),
        alpha_half_chi=_alpha_or_none(half_chi, p2, avg_window),
        alpha_neighbor_above=_alpha_or_none(family, above, avg_window) if above is not None else None,
        alpha_neighbor_below=_alpha_or_none(family, below, avg_window) if below is not None else None,
    )
    return CriticalEstimate(family.p1, p2, p2_err, alpha, err, method, comps, dict(notes))


ANALYSIS_METHODS = ("r2", "flat", "both")


def analyze_family(family: SeriesFamily, fit_window=FIT_WINDOW, avg_window=AVG_WINDOW, p2_lower_bound="auto",
                   half_l_family=None, half_chi_family=None, method="both"):
    """Estimates for one family: ``[r2-fit]``, ``[flat-alpha]`` or all three with the average.

    ``half_l_family`` / ``half_chi_family`` are the same grid run at half the
    lattice size and half the bond cap; without them those error terms are
    left out of the budget.
    """
    fit_w, fit_rescaled = resolve_window(fit_window, family.t_max)
    avg_w, avg_rescaled = resolve_window(avg_window, family.t_max // 2)
    notes = {
        "fit_window": list(fit_w),
        "avg_window": list(avg_w),
        "fit_window_rescaled": fit_rescaled,
        "avg_window_rescaled": avg_rescaled,
        "p2_lower_bound": _p2_floor(family, p2_lower_bound),
        "provenance": family.provenance,
    }
    if method not in ANALYSIS_METHODS:
        raise ParameterError("method", method, f"expected one of {ANALYSIS_METHODS}")
    out = []
    if method in ("r2", "both"):
        p2, err = critical_by_r2(family, fit_w)
        out.append(_estimate(family, "r2-fit", p2, err, avg_w, half_l_family, half_chi_family, notes))
    if method in ("flat", "both"):
        p2, err = critical_by_flat_alpha(family, avg_w, p2_lower_bound)
        out.append(_estimate(family, "flat-alpha", p2, err, avg_w, half_l_family, half_chi_family, notes))
    if method == "both":
        out.append(combine_methods(*out))
    return out
