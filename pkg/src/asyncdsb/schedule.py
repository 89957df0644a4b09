"""Noise schedules: global triangular form and per-pixel shifted variants.

A schedule is a positive diffusion coefficient beta on [0, 1], discretized
into T cells of width dt = 1/T. The continuous form is piecewise linear:
beta_min at both ends, a single apex at time tau, and apex height solved so
the total mass B = integral of beta is the same for every tau. Discrete
values are the exact per-cell averages of that triangle, which coincide
with midpoint samples on every cell the apex does not cut and make the
discrete mass Sum(beta * dt) equal B to rounding error for arbitrary tau.

Accumulating cells from the left gives sigma2(t), from the right
sigma2_bar(t); the two partition the same samples, so their sum is the
total mass at every grid point.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, ValidationError

DEFAULT_STEPS = 1000


@dataclass(frozen=True)
class ScheduleConfig:
    """Shape parameters shared by the global schedule and per-pixel fields.

    beta_min defaults to 1e-4 * total_mass so no cell has vanishing variance.
    """

    steps: int
    beta_min: float | None = None
    total_mass: float = 1.0
    base_apex: float = 0.5

    def __post_init__(self):
        if self.beta_min is None:
            object.__setattr__(self, "beta_min", 1e-4 * self.total_mass)
        if int(self.steps) != self.steps or self.steps < 2:
            raise ConfigurationError(f"steps must be an integer >= 2, got {self.steps}")
        object.__setattr__(self, "steps", int(self.steps))
        if self.total_mass <= 0:
            raise ConfigurationError(f"total_mass must be > 0, got {self.total_mass}")
        if self.beta_min < 0:
            raise ConfigurationError(f"beta_min must be >= 0, got {self.beta_min}")
        if self.beta_min >= self.total_mass:
            raise ConfigurationError(
                f"beta_min ({self.beta_min}) must be below total_mass ({self.total_mass}) "
                "or no valid apex height exists")
        if not 0.0 < self.base_apex < 1.0:
            raise ConfigurationError(f"base_apex must lie in (0, 1), got {self.base_apex}")

    @property
    def dt(self) -> float:
        return 1.0 / self.steps

    @property
    def apex_height(self) -> float:
        # The unit triangle integrates to 1/2 regardless of apex position,
        # so the height solving beta_min + (h - beta_min)/2 = B is tau-free.
        return 2.0 * self.total_mass - self.beta_min


def parse_config_text(text: str, steps_default: int = DEFAULT_STEPS) -> ScheduleConfig:
    """Parse the flat key=value configuration format."""
    known = {"steps": int, "beta_min": float, "total_mass": float, "base_apex": float}
    kwargs: dict = {"steps": steps_default}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        try:
            kwargs[key] = known[key](value)
        except ValueError as exc:
            raise ConfigurationError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return ScheduleConfig(**kwargs)


def load_config(path: str | Path, steps_default: int = DEFAULT_STEPS) -> ScheduleConfig:
    return parse_config_text(Path(path).read_text(), steps_default=steps_default)


@dataclass(frozen=True)
class NoiseSchedule:
    """Discretized global schedule: per-cell beta values and the cell width."""

    betas: np.ndarray  # (T,)
    dt: float

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        object.__setattr__(self, "betas", betas)
        if betas.ndim != 1 or betas.size < 2:
            raise ValidationError("betas must be a 1-D array of length >= 2")
        if not np.all(betas > 0):
            raise ValidationError("all betas must be positive")

    @property
    def steps(self) -> int:
        return self.betas.shape[0]

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.steps) + 0.5) / self.steps

    @property
    def total(self) -> float:
        """Discrete total mass Sum(beta * dt)."""
        return float(self.betas.sum() * self.dt)

    def beta_at(self, t: float | np.ndarray) -> float | np.ndarray:
        """Continuous beta by linear interpolation of the midpoint samples."""
        out = np.interp(t, self.midpoints, self.betas)
        return float(out) if np.isscalar(t) else out


@dataclass(frozen=True)
class PixelScheduleField:
    """Per-pixel schedules sharing one config; betas stored time-major."""

    config: ScheduleConfig
    tau: np.ndarray        # (H, W), apex time per pixel
    betas: np.ndarray = field(repr=False, default=None)  # (T, H, W)

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def steps(self) -> int:
        return self.config.steps

    @property
    def shape(self) -> tuple[int, int]:
        return self.tau.shape

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.steps) + 0.5) / self.steps

    @property
    def total(self) -> np.ndarray:
        """Per-pixel discrete mass (equal across pixels to rounding error)."""
        return self.betas.sum(axis=0) * self.dt

    def pixel(self, i: int, j: int) -> NoiseSchedule:
        """The schedule of one pixel as a standalone NoiseSchedule."""
        return NoiseSchedule(betas=self.betas[:, i, j].copy(), dt=self.dt)

    def beta_at(self, t: float) -> np.ndarray:
        """Per-pixel continuous beta at scalar time t (midpoint interpolation)."""
        mids = self.midpoints
        t = float(t)
        if t <= mids[0]:
            return self.betas[0]
        if t >= mids[-1]:
            return self.betas[-1]
        k = int(np.searchsorted(mids, t))
        frac = (t - mids[k - 1]) / (mids[k] - mids[k - 1])
        return self.betas[k - 1] * (1.0 - frac) + self.betas[k] * frac


def _clamp_tau(tau, config: ScheduleConfig):
    return np.clip(tau, config.dt, 1.0 - config.dt)


def _mass_upto(t: np.ndarray, tau, config: ScheduleConfig) -> np.ndarray:
    """Exact antiderivative of the shifted triangle: integral of beta on [0, t].

    Broadcasts over grid times and per-pixel tau; both the global and the
    per-pixel builders run through this single expression so a constant tau
    field reproduces the global schedule bit for bit.
    """
    m = config.beta_min
    c = config.apex_height - m
    rising = m * t + c * t * t / (2.0 * tau)
    one_m_tau = 1.0 - tau
    falling = m * t + c * (tau / 2.0 + (one_m_tau * one_m_tau - (1.0 - t) * (1.0 - t))
                           / (2.0 * one_m_tau))
    return np.where(t <= tau, rising, falling)


def _cell_betas(config: ScheduleConfig, tau) -> np.ndarray:
    steps = config.steps
    grid = np.arange(steps + 1) / steps
    if np.ndim(tau) > 0:
        grid = grid.reshape((steps + 1,) + (1,) * np.ndim(tau))
    mass = _mass_upto(grid, tau, config)
    return np.diff(mass, axis=0) / config.dt


def build_shifted(config: ScheduleConfig, tau: float) -> NoiseSchedule:
    """Schedule rising from beta_min to the apex at tau, falling back to beta_min.

    The apex height is tau-independent, so every shifted schedule carries the
    same total mass. tau is clamped to [dt, 1-dt] to keep both segments
    non-degenerate.
    """
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValidationError(f"tau must lie in [0, 1], got {tau}")
    return NoiseSchedule(betas=_cell_betas(config, float(_clamp_tau(tau, config))),
                         dt=config.dt)


def build_symmetric(config: ScheduleConfig) -> NoiseSchedule:
    """The base schedule: apex at config.base_apex (symmetric when 0.5)."""
    return build_shifted(config, config.base_apex)


def build_field(config: ScheduleConfig, tau: np.ndarray) -> PixelScheduleField:
    """Per-pixel schedules from a tau map; every pixel keeps the same mass."""
    tau = np.asarray(tau, dtype=np.float64)
    if tau.ndim != 2:
        raise ValidationError(f"tau map must be 2-D, got shape {tau.shape}")
    if np.nanmin(tau) < 0.0 or np.nanmax(tau) > 1.0 or np.isnan(tau).any():
        raise ValidationError("tau values must lie in [0, 1]")
    clamped = _clamp_tau(tau, config)
    return PixelScheduleField(config=config, tau=tau, betas=_cell_betas(config, clamped))


@dataclass(frozen=True)
class VarianceTable:
    """Accumulated variances on the closed grid {0, 1/T, ..., 1}.

    sigma2[k] is the mass of the first k cells, sigma2_bar[k] the mass of the
    rest; arrays are (T+1,) for a global schedule and (T+1, H, W) for a field.
    """

    dt: float
    sigma2: np.ndarray
    sigma2_bar: np.ndarray

    @property
    def steps(self) -> int:
        return self.sigma2.shape[0] - 1

    @property
    def per_pixel(self) -> bool:
        return self.sigma2.ndim > 1

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.steps + 1) / self.steps

    def index_of(self, t: float) -> int:
        """Map a grid time to its index; reject off-grid times."""
        k = round(float(t) * self.steps)
        if not (0 <= k <= self.steps) or abs(float(t) * self.steps - k) > 1e-6:
            raise ValidationError(f"t={t} is not on the grid of {self.steps} steps")
        return k

    def at_index(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return self.sigma2[k], self.sigma2_bar[k]

    def at_time(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(sigma2, sigma2_bar) at any t in [0, 1], linearly interpolated."""
        x = float(t) * self.steps
        if not -1e-9 <= x <= self.steps + 1e-9:
            raise ValidationError(f"t={t} outside [0, 1]")
        k = int(np.clip(np.floor(x), 0, self.steps - 1))
        frac = x - k
        if frac == 0.0:
            return self.sigma2[k], self.sigma2_bar[k]
        s2 = self.sigma2[k] * (1.0 - frac) + self.sigma2[k + 1] * frac
        s2b = self.sigma2_bar[k] * (1.0 - frac) + self.sigma2_bar[k + 1] * frac
        return s2, s2b


def accumulate(schedule: NoiseSchedule | PixelScheduleField) -> VarianceTable:
    """Accumulate sigma2 from t=0 and sigma2_bar from t=1 along the schedule."""
    betas = schedule.betas
    zero_shape = (1,) + betas.shape[1:]
    sigma2 = np.concatenate([np.zeros(zero_shape), np.cumsum(betas, axis=0) * schedule.dt])
    sigma2_bar = sigma2[-1] - sigma2
    return VarianceTable(dt=schedule.dt, sigma2=sigma2, sigma2_bar=sigma2_bar)


def export_csv(schedule: NoiseSchedule | PixelScheduleField, path: str | Path,
               pixels: Sequence[tuple[int, int]] | None = None) -> None:
    """Write `t,beta` rows for a schedule, or `t,beta,i,j` rows for field pixels.

    Values are printed with 17 significant digits so re-importing reproduces
    them bit for bit.
    """
    mids = schedule.midpoints
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        if isinstance(schedule, PixelScheduleField):
            if not pixels:
                raise ValidationError("field export needs an explicit pixel slice")
            writer.writerow(["t", "beta", "i", "j"])
            for i, j in pixels:
                for t, b in zip(mids, schedule.betas[:, i, j]):
                    writer.writerow([f"{t:.17g}", f"{b:.17g}", i, j])
        else:
            writer.writerow(["t", "beta"])
            for t, b in zip(mids, schedule.betas):
                writer.writerow([f"{t:.17g}", f"{b:.17g}"])


def read_csv(path: str | Path) -> NoiseSchedule:
    """Read a global-schedule CSV written by export_csv."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["t", "beta"]:
        raise ValidationError(f"{path} is not a schedule CSV")
    betas = np.array([float(row[1]) for row in rows[1:]])
    return NoiseSchedule(betas=betas, dt=1.0 / betas.size)
