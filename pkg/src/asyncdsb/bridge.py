"""Gaussian bridge posterior, score targets, and per-pixel reverse sampling.

Between a clean image x0 (t=0) and its corrupted counterpart x1 (t=1), the
bridge marginal at time t is Gaussian with

    mean = (sb * x0 + s * x1) / (sb + s),   var = s * sb / (sb + s),

where s = sigma2(t) and sb = sigma2_bar(t) come from a VarianceTable and may
be per-pixel. Score models output the normalized regression target
(x_t - x0) / sigma_t; reverse sampling inverts that into an x0 estimate and
draws from the bridge posterior between the estimate and the current state.
That posterior form is used instead of a literal Euler step of the reverse
SDE: combined with the stated score it is sign-unambiguous and reduces to
the same update in the small-step limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import SingularityError, ValidationError
from .imaging import ensure_image, ensure_mask, save_png, save_raw
from .rng import CounterRng
from .schedule import NoiseSchedule, PixelScheduleField, VarianceTable, accumulate


@dataclass(frozen=True)
class BridgeEndpoints:
    """The two bridge endpoints: target image x0 and corrupted image x1."""

    x0: np.ndarray
    x1: np.ndarray

    def __post_init__(self):
        x0 = ensure_image(self.x0, "x0")
        x1 = ensure_image(self.x1, "x1")
        if x0.shape != x1.shape:
            raise ValidationError(f"endpoint shapes differ: {x0.shape} vs {x1.shape}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "x1", x1)


@dataclass(frozen=True)
class PosteriorParams:
    mean: np.ndarray
    var: np.ndarray  # per-pixel, broadcastable against the image


@runtime_checkable
class ScoreModel(Protocol):
    def evaluate(self, x_t: np.ndarray, t: float) -> np.ndarray:
        """Normalized score (x_t - x0) / sigma_t estimated at (x_t, t)."""


@dataclass(frozen=True)
class SamplerConfig:
    steps: int
    seed: int = 0
    clamp_visible: bool = True
    record_every: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise ValidationError("steps must be >= 1")
        if self.record_every < 1:
            raise ValidationError("record_every must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    """Recorded reverse-sampling states, t strictly decreasing from 1 to 0."""

    steps: int
    ts: tuple[float, ...]
    states: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.ts) != len(self.states) or not self.ts:
            raise ValidationError("trajectory needs matching, nonempty ts and states")
        if self.ts[0] != 1.0 or self.ts[-1] != 0.0:
            raise ValidationError("trajectory must span t=1 down to t=0")
        if any(b >= a for a, b in zip(self.ts, self.ts[1:])):
            raise ValidationError("trajectory times must be strictly decreasing")

    def __len__(self) -> int:
        return len(self.ts)

    def __iter__(self):
        return iter(zip(self.ts, self.states))


def _per_image(values: np.ndarray, image: np.ndarray) -> np.ndarray:
    """Broadcast per-pixel (H, W) values over an image's channel axis."""
    values = np.asarray(values)
    if image.ndim == 3 and values.ndim == 2:
        return values[..., None]
    return values


def _check_consistent(ep: BridgeEndpoints, vt: VarianceTable) -> None:
    if vt.per_pixel and vt.sigma2.shape[1:] != ep.x0.shape[:2]:
        raise ValidationError(
            f"variance table pixels {vt.sigma2.shape[1:]} do not match image "
            f"{ep.x0.shape[:2]}")


def posterior_params(ep: BridgeEndpoints, t: float, vt: VarianceTable) -> PosteriorParams:
    """Mean and per-pixel variance of the bridge marginal at time t."""
    _check_consistent(ep, vt)
    s2, s2b = vt.at_time(t)
    denom = s2 + s2b
    w0 = _per_image(s2b / denom, ep.x0)
    w1 = _per_image(s2 / denom, ep.x0)
    mean = w0 * ep.x0 + w1 * ep.x1
    var = s2 * s2b / denom
    return PosteriorParams(mean=mean, var=np.asarray(var))


def sample_xt(ep: BridgeEndpoints, t: float, vt: VarianceTable,
              rng, step: int | None = None) -> np.ndarray:
    """Draw x_t from the bridge marginal; reproducible given the rng seed."""
    params = posterior_params(ep, t, vt)
    z = rng.normal_field(ep.x0.shape, step=step)
    return params.mean + np.sqrt(_per_image(params.var, ep.x0)) * z


def _sigma2_checked(vt: VarianceTable, t: float) -> np.ndarray:
    s2, _ = vt.at_time(t)
    if np.min(s2) <= 0.0:
        raise SingularityError(f"sigma_t vanishes at t={t}")
    return s2


def analytic_score(x_t: np.ndarray, x0: np.ndarray, t: float, vt: VarianceTable) -> np.ndarray:
    """Exact bridge score (x_t - x0) / sigma_t^2; defined for t > 0 only."""
    s2 = _sigma2_checked(vt, t)
    return (x_t - x0) / _per_image(s2, np.asarray(x_t))


def training_target(x_t: np.ndarray, x0: np.ndarray, t: float, vt: VarianceTable) -> np.ndarray:
    """Normalized regression target (x_t - x0) / sigma_t."""
    s2 = _sigma2_checked(vt, t)
    return (x_t - x0) / _per_image(np.sqrt(s2), np.asarray(x_t))


def score_matching_loss(pred: np.ndarray, x_t: np.ndarray, x0: np.ndarray,
                        t: float, vt: VarianceTable) -> float:
    """Mean squared deviation of a prediction from the normalized target."""
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != np.asarray(x_t).shape:
        raise ValidationError(f"prediction shape {pred.shape} != input {np.asarray(x_t).shape}")
    target = training_target(x_t, x0, t, vt)
    return float(np.mean((pred - target) ** 2))


def predict_x0(x_t: np.ndarray, score: np.ndarray, t: float, vt: VarianceTable) -> np.ndarray:
    """Invert the normalized score into an x0 estimate: x_t - sigma_t * score."""
    s2 = _sigma2_checked(vt, t)
    return x_t - _per_image(np.sqrt(s2), np.asarray(x_t)) * score


@dataclass
class AnalyticOracle:
    """Score model that knows the true x0; exact by construction (test/demo)."""

    x0: np.ndarray
    vt: VarianceTable

    def evaluate(self, x_t: np.ndarray, t: float) -> np.ndarray:
        return training_target(x_t, self.x0, t, self.vt)


def reverse_params(x_t: np.ndarray, x0_hat: np.ndarray, t: float, t_prev: float,
                   vt: VarianceTable) -> PosteriorParams:
    """Bridge posterior between x0_hat at time 0 and x_t at time t, seen at t_prev."""
    if not 0.0 <= t_prev < t <= 1.0 + 1e-12:
        raise ValidationError(f"need 0 <= t_prev < t <= 1, got t_prev={t_prev}, t={t}")
    s2_t, _ = vt.at_time(t)
    s2_p, _ = vt.at_time(t_prev)
    gap = s2_t - s2_p
    mean = (_per_image(gap, np.asarray(x_t)) * x0_hat
            + _per_image(s2_p, np.asarray(x_t)) * x_t) / _per_image(s2_t, np.asarray(x_t))
    var = s2_p * gap / s2_t
    return PosteriorParams(mean=mean, var=np.asarray(var))


def reverse_step(x_t: np.ndarray, x0_hat: np.ndarray, t: float, t_prev: float,
                 vt: VarianceTable, rng, step: int | None = None) -> np.ndarray:
    """One reverse move from time t to t_prev; deterministic given the seed."""
    params = reverse_params(x_t, x0_hat, t, t_prev, vt)
    z = rng.normal_field(np.asarray(x_t).shape, step=step)
    return params.mean + np.sqrt(_per_image(params.var, np.asarray(x_t))) * z


def run_reverse(x1: np.ndarray, model: ScoreModel,
                schedule: NoiseSchedule | PixelScheduleField, cfg: SamplerConfig,
                visible: tuple[np.ndarray, np.ndarray] | None = None,
                vt: VarianceTable | None = None) -> Trajectory:
    """Reverse-sample from x1 at t=1 down to t=0 along the schedule.

    `visible`, when given, is a (mask, known) pair: mask is True on corrupted
    pixels, and with cfg.clamp_visible the un-corrupted pixels are re-imposed
    from `known` after every step. States are recorded at every step index
    divisible by cfg.record_every plus both endpoints.
    """
    x1 = ensure_image(x1, "x1")
    if schedule.steps != cfg.steps:
        raise ValidationError(
            f"sampler steps ({cfg.steps}) must match the schedule ({schedule.steps})")
    if vt is None:
        vt = accumulate(schedule)
    keep_known = None
    if visible is not None:
        mask, known = visible
        mask = ensure_mask(mask, x1)
        known = ensure_image(known, "known")
        if known.shape != x1.shape:
            raise ValidationError("known-image shape must match x1")
        keep_known = (_per_image(mask, x1), known)
    elif cfg.clamp_visible:
        raise ValidationError("clamp_visible requires the (mask, known) pair")

    rng = CounterRng(cfg.seed, stream="sampler")
    steps = cfg.steps
    x = x1.copy()
    ts = [1.0]
    states = [x1.copy()]
    for k in range(steps, 0, -1):
        t = k / steps
        score = np.asarray(model.evaluate(x, t))
        if score.shape != x.shape:
            raise ValidationError(
                f"model output shape {score.shape} != state {x.shape} at step {k}")
        x0_hat = predict_x0(x, score, t, vt)
        params = reverse_params(x, x0_hat, t, (k - 1) / steps, vt)
        z = rng.normal_field(x.shape, step=k)
        x = params.mean + np.sqrt(_per_image(params.var, x)) * z
        if cfg.clamp_visible and keep_known is not None:
            m, known = keep_known
            x = np.where(m, x, known)
        if (k - 1) % cfg.record_every == 0 or k - 1 == 0:
            ts.append((k - 1) / steps)
            states.append(x.copy())
    return Trajectory(steps=steps, ts=tuple(ts), states=tuple(states))


def theoretical_speed(ep: BridgeEndpoints, t: float,
                      schedule: NoiseSchedule | PixelScheduleField,
                      mask: np.ndarray | None = None) -> np.ndarray:
    """Instantaneous restoration speed beta_t * (x1 - x0) / (sigma2 + sigma2_bar).

    With a mask this is evaluated in its corrupted-region form
    -beta_t * x0 * mask / total_mass, identical when x1 = (1 - mask) * x0;
    visible pixels have zero speed.
    """
    beta = schedule.beta_at(t)
    beta_img = _per_image(np.asarray(beta), ep.x0)
    denom_img = _per_image(np.asarray(schedule.total), ep.x0)
    if mask is None:
        return beta_img * (ep.x1 - ep.x0) / denom_img
    m = ensure_mask(mask, ep.x0)
    return -beta_img * ep.x0 * _per_image(m.astype(np.float64), ep.x0) / denom_img


def export_trajectory_csv(traj: Trajectory, path: str | Path, reference: np.ndarray,
                          region: np.ndarray | None = None) -> None:
    """Write `step,t,mse,ssim` rows for each recorded state against a reference."""
    from .diagnostics import ssim as _ssim  # local import keeps modules acyclic

    reference = ensure_image(reference, "reference")
    rows = []
    for t, state in traj:
        clipped = np.clip(state, 0.0, 1.0)
        if region is not None:
            m = _per_image(ensure_mask(region, reference), reference)
            err = float(np.mean(((state - reference) ** 2)[np.broadcast_to(m, state.shape)]))
        else:
            err = float(np.mean((state - reference) ** 2))
        rows.append((round(t * traj.steps), t, err, _ssim(clipped, reference)))
    with open(Path(path), "w", newline="") as fh:
        fh.write("step,t,mse,ssim\n")
        for step, t, err, s in rows:
            fh.write(f"{step},{t:.17g},{err:.17g},{s:.17g}\n")


def dump_states(traj: Trajectory, out_dir: str | Path, fmt: str = "png") -> list[Path]:
    """Dump recorded states as `state_tXXXX` files (8-bit PNG or raw float32)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for t, state in traj:
        stem = f"state_t{round(t * traj.steps):04d}"
        if fmt == "png":
            p = out_dir / f"{stem}.png"
            save_png(np.clip(state, 0.0, 1.0), p)
        elif fmt == "raw":
            p = out_dir / f"{stem}.f32"
            save_raw(state, p)
        else:
            raise ValidationError(f"unknown state dump format {fmt!r}")
        written.append(p)
    return written
