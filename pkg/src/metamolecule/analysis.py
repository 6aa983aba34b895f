"""Post-processing shared by both engines."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHANNELS = ("sx", "sz", "e_s", "e_b", "e_c", "e_total", "dedt")
ERROR_CHANNELS = ("sx_err", "sz_err")


@dataclass
class TimeSeries:
    """Observables on a uniform time grid.

    ``data`` maps column names (see :data:`CHANNELS`) to arrays of the same
    length as ``t``. Error columns are present only for the trajectory engine.
    Extra diagnostic columns are allowed.
    """

    t: np.ndarray
    data: dict
    provenance: str = "pwd"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or len(self.t) < 1:
            raise ValueError("time grid must be a non-empty 1-d array")
        if len(self.t) > 1:
            dt = np.diff(self.t)
            if np.any(dt <= 0) or not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
                raise ValueError("time grid must be strictly increasing and uniform")
        self.data = {k: np.asarray(v, dtype=float) for k, v in self.data.items()}
        for k, v in self.data.items():
            if v.shape != self.t.shape:
                raise ValueError(f"channel {k!r} has length {len(v)}, expected {len(self.t)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.data[name]

    def __contains__(self, name: str) -> bool:
        return name in self.data

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else 0.0

    def window(self, t0: float, t1: float) -> np.ndarray:
        """Boolean mask of samples with t0 <= t <= t1 (with a tiny tolerance)."""
        eps = 1e-9 * max(1.0, abs(t1))
        return (self.t >= t0 - eps) & (self.t <= t1 + eps)


def energy_rate(series_or_values, dt: float | None = None) -> np.ndarray:
    """Central-difference d<H>/dt; one-sided at the two ends.

    Accepts a :class:`TimeSeries` (uses ``e_total``) or a plain array plus
    its sample spacing.
    """
    if isinstance(series_or_values, TimeSeries):
        values, dt = series_or_values["e_total"], series_or_values.dt
    else:
        values = np.asarray(series_or_values, dtype=float)
    if len(values) < 3:
        raise ValueError("energy_rate needs at least 3 samples")
    return np.gradient(values, dt, edge_order=1)


def spectrum(values, t, window=None, min_samples: int = 64):
    """Peaks of the Hann-windowed, mean-detrended DFT.

    Returns a list of ``(angular_frequency, amplitude)`` sorted by amplitude,
    descending. Peak positions are refined by parabolic interpolation of the
    magnitude around each local maximum.
    """
    values = np.asarray(values, dtype=float)
    t = np.asarray(t, dtype=float)
    if window is not None:
        t0, t1 = window
        if t0 < t[0] - 1e-9 or t1 > t[-1] + 1e-9 or t1 <= t0:
            raise ValueError(f"window {window} outside series range [{t[0]}, {t[-1]}]")
        m = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
        values, t = values[m], t[m]
    n = len(values)
    if n < min_samples:
        raise ValueError(f"spectrum needs at least {min_samples} samples, got {n}")
    dt = t[1] - t[0]
    w = np.hanning(n)
    x = (values - values.mean()) * w
    mag = np.abs(np.fft.rfft(x)) * 2.0 / w.sum()
    dw = 2.0 * np.pi / (n * dt)
    peaks = []
    for k in range(1, len(mag)):
        left = mag[k - 1]
        right = mag[k + 1] if k + 1 < len(mag) else -np.inf
        if mag[k] > left and mag[k] >= right:
            if np.isfinite(right):
                den = left - 2.0 * mag[k] + right
                delta = 0.5 * (left - right) / den if den != 0 else 0.0
                amp = mag[k] - 0.25 * (left - right) * delta
            else:
                delta, amp = 0.0, mag[k]
            peaks.append(((k + delta) * dw, float(amp)))
    peaks.sort(key=lambda fa: -fa[1])
    return peaks


def regime_stats(values, t, intervals):
    """Per interval: ``(mean, (max - min) / 2)``."""
    values = np.asarray(values, dtype=float)
    t = np.asarray(t, dtype=float)
    out = []
    for t0, t1 in intervals:
        m = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
        if not m.any():
            raise ValueError(f"interval [{t0}, {t1}] contains no samples")
        v = values[m]
        out.append((float(v.mean()), float(0.5 * (v.max() - v.min()))))
    return out


def window_amplitudes(values, t, width: float, t_range=None):
    """Half peak-to-peak amplitude in consecutive non-overlapping windows."""
    t = np.asarray(t, dtype=float)
    lo, hi = (t[0], t[-1]) if t_range is None else t_range
    n = int(round((hi - lo) / width))
    edges = lo + width * np.arange(n + 1)
    ints = list(zip(edges[:-1], edges[1:]))
    # half-open windows so adjacent ones do not share samples
    amps = []
    for a, b in ints:
        last = b >= hi - 1e-9
        m = (t >= a - 1e-9) & ((t <= b + 1e-9) if last else (t < b - 1e-9))
        v = np.asarray(values)[m]
        amps.append(0.5 * (v.max() - v.min()))
    return ints, np.array(amps)


def rolling_activity(values, t, width: float, kind: str = "amplitude"):
    """Centred rolling activity: half peak-to-peak or RMS over ``width``."""
    values = np.asarray(values, dtype=float)
    t = np.asarray(t, dtype=float)
    half = width / 2
    out = np.empty_like(values)
    for i, ti in enumerate(t):
        m = (t >= ti - half - 1e-9) & (t <= ti + half + 1e-9)
        v = values[m]
        if kind == "amplitude":
            out[i] = 0.5 * (v.max() - v.min())
        elif kind == "rms":
            out[i] = np.sqrt(np.mean((v - v.mean()) ** 2))
        else:
            raise ValueError(f"unknown activity kind {kind!r}")
    return out


def regime_switches(activity, t, min_dwell: float = 5.0):
    """Times where a two-level classification of ``activity`` flips.

    Samples are labelled high/low against the midpoint between the activity
    minimum and maximum; runs shorter than ``min_dwell`` are merged into
    their neighbours before switch times are read off.
    """
    activity = np.asarray(activity, dtype=float)
    t = np.asarray(t, dtype=float)
    thr = 0.5 * (activity.min() + activity.max())
    lab = activity > thr
    # merge short runs, shortest first, until all runs are long enough
    while True:
        runs = []
        start = 0
        for i in range(1, len(lab) + 1):
            if i == len(lab) or lab[i] != lab[start]:
                runs.append((start, i))
                start = i
        short = [(t[min(e, len(t) - 1)] - t[s], s, e) for s, e in runs[1:-1]
                 if t[min(e, len(t) - 1)] - t[s] < min_dwell]
        if not short:
            break
        _, s, e = min(short)
        lab[s:e] = ~lab[s]
    return [float(t[s]) for s, _ in runs[1:]], lab


@dataclass(frozen=True)
class Comparison:
    rmse: float
    max_abs: float
    rmse_norm: float
    max_norm: float


def compare(a: TimeSeries, b: TimeSeries, channel: str, t_range=None) -> Comparison:
    """RMSE and max |a - b| of one channel; also scaled by the joint range."""
    if a.t.shape != b.t.shape or not np.allclose(a.t, b.t, rtol=0, atol=1e-9):
        raise ValueError("time grids differ; both series must share the output grid")
    m = np.ones_like(a.t, dtype=bool) if t_range is None else a.window(*t_range)
    x, y = a[channel][m], b[channel][m]
    d = x - y
    rmse = float(np.sqrt(np.mean(d * d)))
    mx = float(np.max(np.abs(d)))
    span = max(x.max(), y.max()) - min(x.min(), y.min())
    scale = span if span > 0 else 1.0
    return Comparison(rmse, mx, rmse / scale, mx / scale)
