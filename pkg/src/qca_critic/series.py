"""Observable trajectories and their CSV representation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = ["TimeSeries", "format_float", "write_series_csv", "read_series_csv"]


def format_float(x):
    """17 significant digits: enough for an exact float64 round trip."""
    return format(float(x), ".17g")


@dataclass
class TimeSeries:
    """Mean density per step, optionally per-site densities and transverse means.

    ``times`` are integer steps ``0..T`` for QCA runs; continuous-time runs may
    carry floats instead (see ``lindblad``).
    """

    times: np.ndarray
    n_mean: np.ndarray
    n_site: np.ndarray | None = None
    sx_mean: np.ndarray | None = None
    sy_mean: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times)
        self.n_mean = np.asarray(self.n_mean, dtype=float)
        if len(self.times) != len(self.n_mean):
            raise ValueError("times and n_mean differ in length")
        if self.n_site is not None:
            self.n_site = np.asarray(self.n_site, dtype=float)
            if self.n_site.shape[0] != len(self.times):
                raise ValueError("n_site has the wrong number of rows")
        if (self.sx_mean is None) != (self.sy_mean is None):
            raise ValueError("sx_mean and sy_mean come as a pair")
        if self.sx_mean is not None:
            self.sx_mean = np.asarray(self.sx_mean, dtype=float)
            self.sy_mean = np.asarray(self.sy_mean, dtype=float)

    def __len__(self):
        return len(self.times)

    @property
    def t_max(self):
        return int(self.times[-1]) if len(self.times) else 0

    def header(self):
        cols = ["t", "n_mean"]
        if self.n_site is not None:
            cols += [f"n_{k + 1}" for k in range(self.n_site.shape[1])]
        if self.sx_mean is not None:
            cols += ["sx_mean", "sy_mean"]
        return cols

    def rows(self):
        integral = np.issubdtype(self.times.dtype, np.integer)
        for i, t in enumerate(self.times):
            row = [str(int(t)) if integral else format_float(t), format_float(self.n_mean[i])]
            if self.n_site is not None:
                row += [format_float(v) for v in self.n_site[i]]
            if self.sx_mean is not None:
                row += [format_float(self.sx_mean[i]), format_float(self.sy_mean[i])]
            yield row

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header())
        writer.writerows(self.rows())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header[:2] != ["t", "n_mean"]:
            raise ValueError(f"not a time-series CSV header: {header}")
        body = [row for row in reader if row]
        site_cols = [i for i, h in enumerate(header) if h.startswith("n_") and h != "n_mean"]
        has_sx = "sx_mean" in header
        t_raw = [row[0] for row in body]
        if all(s.lstrip("-").isdigit() for s in t_raw):
            times = np.array([int(s) for s in t_raw], dtype=int)
        else:
            times = np.array([float(s) for s in t_raw])
        n_mean = np.array([float(row[1]) for row in body])
        n_site = None
        if site_cols:
            n_site = np.array([[float(row[i]) for i in site_cols] for row in body]).reshape(len(body), len(site_cols))
        sx = sy = None
        if has_sx:
            ix, iy = header.index("sx_mean"), header.index("sy_mean")
            sx = np.array([float(row[ix]) for row in body])
            sy = np.array([float(row[iy]) for row in body])
        return cls(times=times, n_mean=n_mean, n_site=n_site, sx_mean=sx, sy_mean=sy)


def write_series_csv(series: TimeSeries, path):
    with open(path, "w", newline="") as fh:
        fh.write(series.to_csv())


def read_series_csv(path) -> TimeSeries:
    with open(path, newline="") as fh:
        return TimeSeries.from_csv(fh.read())
