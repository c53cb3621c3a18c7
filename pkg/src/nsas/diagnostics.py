"""Norm time series, weighted supremum functionals, and decay-model fits.

A run produces per-sample rows of derivative norms ||d^k u||_2 (spectral
|q|^(2k) weights), the torus-average split u = ubar + utilde, distances to a
profile trajectory, and running weighted suprema.  Fits happen in log space
against three model classes:

    power        A (1+t)^beta
    power_log    A (1+t)^beta ln(2+t)
    exponential  A exp(-r t)

The power_log class exists because halving-in-time convolution estimates
produce a logarithm on top of the clean power; fitting a plain power to such
data biases the exponent upward, which is exactly what the model choice is
meant to detect.  Fit windows exclude the early transient (found where the
log-log curvature of the smoothed series exceeds 0.05) and everything past
0.9 of the wrap horizon, where box periodicity contaminates open-direction
decay.

Supremum functional kinds and their (1+tau) weights on (||.||_2, ||d .||_2):

    M         (1/2, 1)    full solution, 3-d grid
    M1        (1/4, 3/4)  full solution, two torus axes
    M0        (1/2, 1)    2-d profile
    M0_tilde  (1/4, 3/4)  1-d profile
    M2        exp(a0 tau) ||utilde||_H1, needs the spectral gap a0
    N1        (1+tau) ||ubar - eta||_H1

All trackers keep the whole history and are monotone by construction.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DataError, ParameterError
from .spectral import (derivative_l2, lebesgue_norm, lift_average,
                       sobolev_norm, torus_average)

NOISE_FLOOR = 1e-14


# ---------------------------------------------------------------------------
# series container
# ---------------------------------------------------------------------------

class DecaySeries:
    """Positive samples of a decaying norm; zeros are dropped with a warning."""

    def __init__(self, times, values, label=""):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise DataError("times and values must be equal-length 1-d arrays")
        if not np.isfinite(times).all() or not np.isfinite(values).all():
            raise DataError("series contains non-finite entries")
        keep = values > 0.0
        if not keep.all():
            warnings.warn(f"dropped {int((~keep).sum())} non-positive samples "
                          f"from series {label!r}", RuntimeWarning, stacklevel=2)
        times, values = times[keep], values[keep]
        if times.size and not (np.diff(times) > 0).all():
            raise DataError("times must be strictly increasing")
        self.times = times
        self.values = values
        self.label = label

    def __len__(self):
        return self.times.size

    def window(self, lo, hi):
        sel = (self.times >= lo) & (self.times <= hi)
        return DecaySeries(self.times[sel], self.values[sel], self.label)


# ---------------------------------------------------------------------------
# decay fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of a decay model in log space."""

    model: str
    exponent_or_rate: float
    amplitude: float
    residual_rms: float
    window: tuple
    samples: int
    dropped: int = 0

    def predict(self, t):
        t = np.asarray(t, dtype=float)
        if self.model == "power":
            return self.amplitude * (1.0 + t) ** self.exponent_or_rate
        if self.model == "power_log":
            return self.amplitude * (1.0 + t) ** self.exponent_or_rate * np.log(2.0 + t)
        return self.amplitude * np.exp(-self.exponent_or_rate * t)


def transient_end(series):
    """Last time where the smoothed log-log curvature exceeds 0.05.

    Five-sample moving average of log values against log(1+t); second divided
    differences flag curvature.  Returns 0 when the series is too short or
    already straight.
    """
    n = len(series)
    if n < 7:
        return 0.0
    y = np.log(series.values)
    kernel = np.ones(5) / 5.0
    ys = np.convolve(y, kernel, mode="valid")
    xs = np.log1p(series.times[2:n - 2])
    tc = series.times[2:n - 2]
    last = 0.0
    for i in range(1, ys.size - 1):
        left = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])
        right = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
        curv = 2.0 * (right - left) / (xs[i + 1] - xs[i - 1])
        if abs(curv) > 0.05:
            last = tc[i]
    return float(last)


def default_window(series, t_wrap=math.inf):
    """[max(10, 5 * transient end), 0.9 * wrap horizon]."""
    hi = 0.9 * t_wrap if math.isfinite(t_wrap) else float(series.times[-1])
    return (max(10.0, 5.0 * transient_end(series)), hi)


def fit_decay(series, model="power", window=None, t_wrap=math.inf, min_samples=10):
    """Fit one decay model over a time window; exact on its own model class.

    The exponential model trims samples below max(1e-14, 1e-13 * max) before
    taking logs (they are dominated by round-off) and reports the trimmed
    count.  ``exponent_or_rate`` is beta for the power models and the
    positive rate r for the exponential one.
    """
    if model not in ("power", "power_log", "exponential"):
        raise ParameterError(f"unknown decay model {model!r}")
    if window is None:
        window = default_window(series, t_wrap)
        if len(series.window(*window)) < min_samples:
            warnings.warn("transient-based window too aggressive, fitting the "
                          "full series", RuntimeWarning, stacklevel=2)
            window = (float(series.times[0]), window[1])
    sub = series.window(*window)
    dropped = 0
    if model == "exponential":
        floor = max(NOISE_FLOOR, 1e-13 * float(sub.values.max(initial=0.0)))
        keep = sub.values > floor
        dropped = int((~keep).sum())
        sub = DecaySeries(sub.times[keep], sub.values[keep], sub.label)
    if len(sub) < min_samples:
        raise DataError(f"only {len(sub)} samples in window {window}, "
                        f"need {min_samples}")
    y = np.log(sub.values)
    if model == "power":
        x = np.log1p(sub.times)
    elif model == "power_log":
        x = np.log1p(sub.times)
        y = y - np.log(np.log(2.0 + sub.times))
    else:
        x = sub.times
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    slope = float(coef[1])
    return DecayFit(model=model,
                    exponent_or_rate=-slope if model == "exponential" else slope,
                    amplitude=float(np.exp(coef[0])),
                    residual_rms=float(np.sqrt(np.mean(resid ** 2))),
                    window=(float(window[0]), float(window[1])),
                    samples=len(sub), dropped=dropped)


# ---------------------------------------------------------------------------
# norms and splits
# ---------------------------------------------------------------------------

def record_norms(state, orders=(0, 1, 2, 3, 4)):
    """Spectral derivative norms ||d^k u||_2 as a dict keyed by k."""
    orders = sorted(set(int(k) for k in orders))
    if orders and not 0 <= orders[0] <= orders[-1] <= 4:
        raise ParameterError("derivative orders must lie in 0..4")
    stacked = state.stacked()
    return {k: derivative_l2(stacked, state.grid, k) for k in orders}


def compare_to_average(state):
    """Torus-average split u = ubar + utilde.

    Returns (ubar, tilde, tilde_norms) where ubar lives on the reduced grid
    (plain means for a fully periodic grid), tilde on the full grid with
    exactly zero average content, and tilde_norms holds ||utilde||_2 and
    ||grad utilde||_2 under keys 0 and 1.
    """
    stacked = state.stacked()
    ubar = torus_average(stacked, state.grid)
    tilde = stacked - lift_average(ubar, state.grid)
    norms = {0: lebesgue_norm(tilde, state.grid, 2),
             1: derivative_l2(tilde, state.grid, 1)}
    return ubar, tilde, norms


def combined_profile_distance(tilde_l2, ubar_minus_eta_l2, grid):
    """||u - eta||_2 from the orthogonal split.

    The average and fluctuation parts are L2-orthogonal, and lifting a
    reduced field multiplies its squared norm by the torus volume.
    """
    torus_vol = float(np.prod(grid.lengths[:grid.ell])) if grid.ell else 1.0
    return math.sqrt(tilde_l2 ** 2 + torus_vol * ubar_minus_eta_l2 ** 2)


@dataclass(frozen=True)
class ProfileComparison:
    """Per-time distances between the averaged solution and the profile."""

    times: np.ndarray
    l2: np.ndarray
    h1: np.ndarray


def compare_to_profile(ubar_snaps, eta_snaps, grid):
    """Distances ||ubar - eta|| on the reduced grid at shared timestamps.

    Both arguments are sequences of (t, field) pairs with fields shaped
    (4, ...) on ``grid``; timestamps must agree to 1e-9 relative or the
    trajectories are considered misaligned.
    """
    if len(ubar_snaps) != len(eta_snaps):
        raise AlignmentError(f"snapshot counts differ: {len(ubar_snaps)} "
                             f"vs {len(eta_snaps)}")
    times, l2, h1 = [], [], []
    for (tu, fu), (te, fe) in zip(ubar_snaps, eta_snaps):
        if abs(tu - te) > 1e-9 * max(1.0, abs(tu)):
            raise AlignmentError(f"timestamps diverge: {tu} vs {te}")
        fu, fe = np.asarray(fu), np.asarray(fe)
        if fu.shape != fe.shape or fu.shape[-grid.ndim:] != grid.shape:
            raise AlignmentError("snapshot fields do not share the reduced grid")
        diff = fu - fe
        times.append(tu)
        l2.append(lebesgue_norm(diff, grid, 2))
        h1.append(sobolev_norm(diff, grid, 1))
    return ProfileComparison(np.array(times), np.array(l2), np.array(h1))


# ---------------------------------------------------------------------------
# supremum functionals
# ---------------------------------------------------------------------------

_SUP_WEIGHTS = {"M": (0.5, 1.0), "M1": (0.25, 0.75),
                "M0": (0.5, 1.0), "M0_tilde": (0.25, 0.75)}


class SupFunctionalTracker:
    """Running supremum of a weighted norm combination (see module docstring).

    ``update`` takes a raw stacked field so the caller decides what it is
    (full solution, fluctuation part, or difference to a profile); calling
    the tracker as a sink feeds the full state, which only makes sense for
    the M/M1/M0 family.
    """

    def __init__(self, kind, a0=None):
        if kind not in ("M", "M1", "M0", "M0_tilde", "M2", "N1"):
            raise ParameterError(f"unknown supremum functional {kind!r}")
        if kind == "M2" and a0 is None:
            raise ParameterError("M2 needs the spectral gap a0")
        self.kind = kind
        self.a0 = a0
        self.history = []
        self.running_sup = 0.0

    def update(self, t, stacked, grid):
        if self.kind in _SUP_WEIGHTS:
            a, b = _SUP_WEIGHTS[self.kind]
            value = ((1.0 + t) ** a * lebesgue_norm(stacked, grid, 2)
                     + (1.0 + t) ** b * derivative_l2(stacked, grid, 1))
        elif self.kind == "M2":
            value = math.exp(self.a0 * t) * sobolev_norm(stacked, grid, 1)
        else:
            value = (1.0 + t) * sobolev_norm(stacked, grid, 1)
        self.running_sup = max(self.running_sup, value)
        self.history.append((t, value, self.running_sup))
        return self.running_sup

    def __call__(self, state, step=None):
        self.update(state.time, state.stacked(), state.grid)

    @property
    def series(self):
        return [(t, sup) for t, _, sup in self.history]


# ---------------------------------------------------------------------------
# series.csv
# ---------------------------------------------------------------------------

MAIN_COLUMNS = ("t", "L2_u", "L2_du", "L2_d2u", "L2_d3u", "L2_d4u",
                "L2_tilde", "H1_tilde", "L2_ubar_minus_eta",
                "H1_ubar_minus_eta", "M_t", "N_t")
PROFILE_COLUMNS = ("t", "L2_eta", "L2_dy_eta", "H2_eta_sq", "N_t", "M0_t")


class SeriesWriter:
    """Streaming csv writer with a fixed column order and %.17g formatting."""

    def __init__(self, path, columns=MAIN_COLUMNS):
        self.columns = tuple(columns)
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.columns)
        self._fh.flush()

    def write_row(self, row):
        out = []
        for col in self.columns:
            val = row.get(col)
            out.append("" if val is None else "%.17g" % val)
        self._writer.writerow(out)
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_series_csv(path):
    """Columns of a series.csv as float arrays (NaN for blank cells)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = {name: [] for name in header}
        for line in reader:
            if not line:
                continue
            for name, cell in zip(header, line):
                cols[name].append(float(cell) if cell else math.nan)
    return {name: np.array(vals) for name, vals in cols.items()}


def column_series(cols, column, label=None):
    """DecaySeries for one column, skipping blank (NaN) rows."""
    if column not in cols:
        raise DataError(f"column {column!r} not in series file")
    t, v = cols["t"], cols[column]
    keep = ~np.isnan(v)
    return DecaySeries(t[keep], v[keep], label or column)


class RunRecorder:
    """Per-sample sink for full runs: norms, average split, sup functional.

    Holds all rows in memory (they are tiny) and optionally streams them to
    a SeriesWriter; profile-comparison columns are left blank here and
    filled by the experiment layer once the matching profile run exists.
    """

    def __init__(self, writer=None, sup_tracker=None, keep_average=True):
        self.writer = writer
        self.sup = sup_tracker
        self.keep_average = keep_average
        self.rows = []
        self.average_snaps = []
        self.tilde_h1 = []

    def __call__(self, state, step=None):
        t = state.time
        norms = record_norms(state)
        ubar, tilde, tnorms = compare_to_average(state)
        h1_tilde = sobolev_norm(tilde, state.grid, 1)
        row = {"t": t, "L2_u": norms[0], "L2_du": norms[1], "L2_d2u": norms[2],
               "L2_d3u": norms[3], "L2_d4u": norms[4],
               "L2_tilde": tnorms[0], "H1_tilde": h1_tilde}
        if self.sup is not None:
            feed = tilde if self.sup.kind == "M2" else state.stacked()
            row["M_t"] = self.sup.update(t, feed, state.grid)
        self.rows.append(row)
        if self.keep_average:
            self.average_snaps.append((t, np.array(ubar)))
        self.tilde_h1.append((t, h1_tilde))
        if self.writer is not None:
            self.writer.write_row(row)

    def series(self, column, label=None):
        t = np.array([r["t"] for r in self.rows])
        v = np.array([r.get(column, math.nan) for r in self.rows], dtype=float)
        keep = ~np.isnan(v)
        return DecaySeries(t[keep], v[keep], label or column)
