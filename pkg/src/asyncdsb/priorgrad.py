"""Gradient maps as frequency priors and their conversion to apex times.

The pipeline: take the Sobel magnitude of the corrupted image, fill the
corrupted region (ground-truth oracle or a harmonic in-fill), smooth with a
Gaussian, then min-max rescale into per-pixel apex times in
[tau_min, tau_max]. Large filtered gradients map to large tau, so
high-frequency pixels are scheduled first in reverse time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigurationError, ValidationError
from .imaging import ensure_image, ensure_mask, luminance

COMPLETERS = ("oracle", "harmonic")


@dataclass(frozen=True)
class AsyncConfig:
    """Hyper-parameters of the asynchronous assignment.

    tau_min == tau_max collapses every pixel to one apex, i.e. the
    pixel-synchronous schedule; tau_min > tau_max is invalid.
    """

    tau_min: float
    tau_max: float
    gauss_sigma: float = 2.0
    completer: str = "harmonic"

    def __post_init__(self):
        if not (0.0 <= self.tau_min <= 1.0 and 0.0 <= self.tau_max <= 1.0):
            raise ValidationError("tau bounds must lie in [0, 1]")
        if self.tau_min > self.tau_max:
            raise ValidationError(
                f"tau_min ({self.tau_min}) > tau_max ({self.tau_max}) is not a valid region")
        if self.gauss_sigma <= 0:
            raise ValidationError("gauss_sigma must be positive")
        if self.completer not in COMPLETERS:
            raise ConfigurationError(f"completer must be one of {COMPLETERS}")


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    """3x3 Sobel gradient magnitude on luminance, replicate-padded borders."""
    img = ensure_image(img)
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValidationError("image must be at least 3x3 for the Sobel kernel")
    lum = luminance(img)
    gy = ndimage.sobel(lum, axis=0, mode="nearest")
    gx = ndimage.sobel(lum, axis=1, mode="nearest")
    return np.hypot(gx, gy)


def gaussian_filter(values: np.ndarray, sigma: float) -> np.ndarray:
    """Normalized discrete Gaussian smoothing, radius ceil(3*sigma), replicate pad."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    values = np.asarray(values, dtype=np.float64)
    return ndimage.gaussian_filter(values, sigma, mode="nearest",
                                   radius=int(np.ceil(3.0 * sigma)))


def _harmonic_fill(values: np.ndarray, region: np.ndarray,
                   tol: float = 1e-6, max_iter: int = 10_000) -> np.ndarray:
    """Discrete Laplace solve on `region` with the surrounding values fixed.

    Red-black Gauss-Seidel sweeps until the residual (max deviation from the
    4-neighbour mean, replicate borders) drops below tol or max_iter passes.
    Filled values obey the discrete maximum principle: they stay inside the
    range of the boundary values.
    """
    u = values.astype(np.float64).copy()
    if not region.any():
        return u
    boundary = ndimage.binary_dilation(region) & ~region
    u[region] = u[boundary].mean() if boundary.any() else 0.0
    yy, xx = np.nonzero(region)
    red = region & (((np.arange(u.shape[0])[:, None] + np.arange(u.shape[1])[None, :]) % 2) == 0)
    black = region & ~red
    for _ in range(max_iter):
        for color in (red, black):
            padded = np.pad(u, 1, mode="edge")
            nbr = (padded[:-2, 1:-1] + padded[2:, 1:-1]
                   + padded[1:-1, :-2] + padded[1:-1, 2:]) / 4.0
            u[color] = nbr[color]
        padded = np.pad(u, 1, mode="edge")
        nbr = (padded[:-2, 1:-1] + padded[2:, 1:-1]
               + padded[1:-1, :-2] + padded[1:-1, 2:]) / 4.0
        residual = np.abs(u[yy, xx] - nbr[yy, xx]).max()
        if residual < tol:
            break
    return u


def complete_gradient(x_c: np.ndarray, x_m: np.ndarray, x_cg: np.ndarray,
                      completer: str = "harmonic",
                      x_g: np.ndarray | None = None) -> np.ndarray:
    """Fill the corrupted region of a gradient map.

    `oracle` copies the ground-truth gradient into the hole (needs x_g);
    `harmonic` solves the discrete Laplace equation with the visible gradient
    values as boundary data. Visible pixels are returned untouched either way.
    """
    x_c = ensure_image(x_c, "x_c")
    x_m = ensure_mask(x_m, x_c)
    x_cg = np.asarray(x_cg, dtype=np.float64)
    if x_cg.shape != x_m.shape:
        raise ValidationError(f"gradient map shape {x_cg.shape} != mask {x_m.shape}")
    if completer == "oracle":
        if x_g is None:
            raise ConfigurationError("the oracle completer requires the ground-truth image")
        out = x_cg.copy()
        out[x_m] = sobel_magnitude(x_g)[x_m]
        return out
    if completer == "harmonic":
        return _harmonic_fill(x_cg, x_m)
    raise ConfigurationError(f"completer must be one of {COMPLETERS}")


def tau_from_gradient(g_hat: np.ndarray, cfg: AsyncConfig,
                      region: np.ndarray | None = None) -> np.ndarray:
    """Min-max rescale the smoothed gradient map into apex times.

    Normalization statistics come from `region` (the corrupted pixels) when
    given, else from the whole map. A constant filtered map degenerates to
    the midpoint (tau_min + tau_max) / 2 everywhere.
    """
    if cfg.tau_min > cfg.tau_max:
        raise ValidationError("tau_min > tau_max")
    g_hat = np.asarray(g_hat, dtype=np.float64)
    if g_hat.ndim != 2:
        raise ValidationError("gradient map must be 2-D")
    filtered = gaussian_filter(g_hat, cfg.gauss_sigma)
    domain = filtered[ensure_mask(region)] if region is not None else filtered
    if domain.size == 0:
        raise ValidationError("normalization region is empty")
    lo, hi = float(domain.min()), float(domain.max())
    if hi == lo:
        return np.full(g_hat.shape, 0.5 * (cfg.tau_min + cfg.tau_max))
    u = np.clip((filtered - lo) / (hi - lo), 0.0, 1.0)
    # Lerp form hits tau_min and tau_max exactly at u = 0 and u = 1.
    tau = cfg.tau_min * (1.0 - u) + cfg.tau_max * u
    return np.clip(tau, cfg.tau_min, cfg.tau_max)
