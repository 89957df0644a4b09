"""Schedule-restoration mismatch diagnostics.

Quantifies how the measured restoration process of a reverse-sampling run
tracks the shape of its noise schedule: SSIM trajectories over the corrupted
region, their amplitude-normalized derivatives in reverse time, per-band
curves split by gradient magnitude, and a report of peak lag and mean
absolute gap between the theoretical and empirical curves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ValidationError
from .imaging import ensure_image, ensure_mask, luminance
from .schedule import NoiseSchedule

_WINDOW_SIZE = 11
_WINDOW_SIGMA = 1.5
_C1 = 0.01 ** 2
_C2 = 0.03 ** 2


def _window() -> np.ndarray:
    half = (_WINDOW_SIZE - 1) // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * _WINDOW_SIGMA ** 2))
    return g / g.sum()


_W1 = _window()
_PAD = (_WINDOW_SIZE - 1) // 2


def _local_mean(img: np.ndarray) -> np.ndarray:
    out = correlate1d(img, _W1, axis=0, mode="nearest")
    out = correlate1d(out, _W1, axis=1, mode="nearest")
    return out[_PAD:-_PAD, _PAD:-_PAD]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM: 11x11 Gaussian window (sigma 1.5), C1=0.01^2, C2=0.03^2.

    Computed on luminance over the interior (window fully inside the image),
    for a [0, 1] data range; the result lies in [-1, 1].
    """
    a = ensure_image(a, "a")
    b = ensure_image(b, "b")
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.shape[0] < _WINDOW_SIZE or a.shape[1] < _WINDOW_SIZE:
        raise ValidationError(f"images must be at least {_WINDOW_SIZE}px on each side")
    x, y = luminance(a), luminance(b)
    mu_x, mu_y = _local_mean(x), _local_mean(y)
    var_x = _local_mean(x * x) - mu_x * mu_x
    var_y = _local_mean(y * y) - mu_y * mu_y
    cov = _local_mean(x * y) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + _C1) * (2.0 * cov + _C2)
    den = (mu_x * mu_x + mu_y * mu_y + _C1) * (var_x + var_y + _C2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class Curve:
    """Values over grid times in reverse-time order (ts strictly decreasing)."""

    ts: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if ts.shape != values.shape or ts.ndim != 1 or ts.size == 0:
            raise ValidationError("curve needs matching 1-D ts and values")
        if np.any(np.diff(ts) >= 0):
            raise ValidationError("curve times must be strictly decreasing")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.ts.size


@dataclass(frozen=True)
class BandMasks:
    """Tercile partition of the corrupted region by gradient magnitude."""

    high: np.ndarray
    mid: np.ndarray
    low: np.ndarray


@dataclass(frozen=True)
class MismatchReport:
    peak_lag: float   # empirical peak time minus theoretical peak time
    l1_gap: float     # mean absolute difference of the two curves


def _bbox(region: np.ndarray, min_size: int = _WINDOW_SIZE) -> tuple[slice, slice]:
    ys, xs = np.nonzero(region)
    i0, i1 = int(ys.min()), int(ys.max()) + 1
    j0, j1 = int(xs.min()), int(xs.max()) + 1
    h, w = region.shape

    def widen(lo, hi, size):
        if hi - lo >= min_size:
            return lo, hi
        lo = max(0, lo - (min_size - (hi - lo)) // 2)
        hi = min(size, lo + min_size)
        return max(0, hi - min_size), hi

    i0, i1 = widen(i0, i1, h)
    j0, j1 = widen(j0, j1, w)
    return slice(i0, i1), slice(j0, j1)


def restoration_curve(traj, x_g: np.ndarray, region: np.ndarray) -> Curve:
    """SSIM against the target at every recorded state, corrupted region only.

    States are cropped to the bounding box of `region` (widened to the SSIM
    window if needed) with non-region pixels replaced by ground truth, so the
    score is driven by restoration of the corrupted area alone.
    """
    x_g = ensure_image(x_g, "x_g")
    region = ensure_mask(region, x_g)
    if not region.any():
        raise ValidationError("region is empty")
    si, sj = _bbox(region)
    reg = region[si, sj]
    reg_img = reg[..., None] if x_g.ndim == 3 else reg
    ref = x_g[si, sj]
    ts, values = [], []
    for t, state in traj:
        patch = np.where(reg_img, np.clip(state[si, sj], 0.0, 1.0), ref)
        ts.append(t)
        values.append(ssim(patch, ref))
    return Curve(ts=np.array(ts), values=np.array(values))


def normalized_derivative(curve: Curve) -> Curve:
    """Rate of change with respect to reverse-time progress, max-abs normalized.

    Restoration (values rising as t falls) registers as positive. A constant
    curve returns all zeros instead of dividing by a zero normalizer.
    """
    if len(curve) < 3:
        raise ValidationError("derivative needs at least 3 points")
    progress = 1.0 - curve.ts
    deriv = np.gradient(curve.values, progress)
    peak = np.abs(deriv).max()
    if peak == 0.0:
        return Curve(ts=curve.ts, values=np.zeros_like(deriv))
    return Curve(ts=curve.ts, values=deriv / peak)


def band_split(g: np.ndarray, region: np.ndarray) -> BandMasks:
    """Partition the corrupted region into gradient-magnitude terciles.

    The top third of pixels by gradient value forms the high band, and ties
    are broken by (i, j) lexicographic order so the partition is exact and
    deterministic.
    """
    g = np.asarray(g, dtype=np.float64)
    region = ensure_mask(region)
    if g.shape != region.shape:
        raise ValidationError(f"gradient shape {g.shape} != region {region.shape}")
    ii, jj = np.nonzero(region)
    n = ii.size
    if n < 3:
        raise ValidationError("region must contain at least 3 pixels")
    order = np.lexsort((jj, ii, g[ii, jj]))  # ascending value, ties by (i, j)
    cut_low, cut_mid = n // 3, (2 * n) // 3
    masks = []
    for sel in (order[cut_mid:], order[cut_low:cut_mid], order[:cut_low]):
        m = np.zeros_like(region)
        m[ii[sel], jj[sel]] = True
        masks.append(m)
    return BandMasks(high=masks[0], mid=masks[1], low=masks[2])


def theoretical_curve(schedule: NoiseSchedule) -> Curve:
    """Normalized restoration-speed magnitude beta_t / total, max rescaled to 1."""
    grid = np.arange(schedule.steps + 1) / schedule.steps
    values = np.asarray(schedule.beta_at(grid), dtype=np.float64) / schedule.total
    values = values / values.max()
    return Curve(ts=grid[::-1].copy(), values=values[::-1].copy())


def mismatch_report(theory: Curve, empirical: Curve) -> MismatchReport:
    """Peak lag and mean absolute gap after resampling onto a common grid."""
    lo = max(theory.ts.min(), empirical.ts.min())
    hi = min(theory.ts.max(), empirical.ts.max())
    if hi <= lo:
        raise ValidationError("curves have no overlapping time support")
    grid = np.linspace(lo, hi, max(len(theory), len(empirical)))
    # np.interp needs ascending abscissae; curves store descending ts.
    th = np.interp(grid, theory.ts[::-1], theory.values[::-1])
    em = np.interp(grid, empirical.ts[::-1], empirical.values[::-1])
    peak_lag = float(grid[np.argmax(em)] - grid[np.argmax(th)])
    return MismatchReport(peak_lag=peak_lag, l1_gap=float(np.mean(np.abs(em - th))))


def peak_time(curve: Curve) -> float:
    """Grid time at which a curve attains its maximum (first hit wins)."""
    return float(curve.ts[int(np.argmax(curve.values))])


def write_curve_csv(curve: Curve, path: str | Path) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "value"])
        for t, v in zip(curve.ts, curve.values):
            writer.writerow([f"{t:.17g}", f"{v:.17g}"])


def read_curve_csv(path: str | Path) -> Curve:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t", "value"]:
        raise ValidationError(f"{path} is not a curve CSV")
    data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
    return Curve(ts=data[:, 0], values=data[:, 1])
