"""Images, masks, the corruption model, and file interchange.

Images are numpy float64 arrays in [0, 1], shaped (H, W) or (H, W, C) with
C in {1, 3}. Masks are boolean (H, W) arrays where True marks a corrupted
pixel. The corruption model zero-fills the corrupted region of the target
image.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ValidationError
from .rng import CounterRng

_LUMA = np.array([0.299, 0.587, 0.114])


def ensure_image(x: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate an image array and return it as float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (2, 3):
        raise ValidationError(f"{name} must be 2-D or 3-D, got shape {x.shape}")
    if x.ndim == 3 and x.shape[2] not in (1, 3):
        raise ValidationError(f"{name} must have 1 or 3 channels, got {x.shape[2]}")
    if x.size == 0:
        raise ValidationError(f"{name} is empty")
    if np.nanmin(x) < 0.0 or np.nanmax(x) > 1.0 or np.isnan(x).any():
        raise ValidationError(f"{name} values must lie in [0, 1]")
    return x


def ensure_mask(m: np.ndarray, image: np.ndarray | None = None) -> np.ndarray:
    """Validate a binary mask (True = corrupted), optionally against an image."""
    m = np.asarray(m)
    if m.dtype != bool:
        vals = np.unique(m)
        if not np.all(np.isin(vals, (0, 1))):
            raise ValidationError("mask must be binary")
        m = m.astype(bool)
    if m.ndim != 2:
        raise ValidationError(f"mask must be 2-D, got shape {m.shape}")
    if image is not None and m.shape != image.shape[:2]:
        raise ValidationError(f"mask shape {m.shape} does not match image {image.shape[:2]}")
    return m


def luminance(img: np.ndarray) -> np.ndarray:
    """Collapse to a single luminance channel (0.299R + 0.587G + 0.114B)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.shape[2] == 1:
        return img[..., 0]
    return img @ _LUMA


def apply_mask(x_g: np.ndarray, x_m: np.ndarray) -> np.ndarray:
    """Corrupt an image: zero the masked pixels, keep the visible ones."""
    x_g = ensure_image(x_g, "x_g")
    x_m = ensure_mask(x_m, x_g)
    m = x_m[..., None] if x_g.ndim == 3 else x_m
    return np.where(m, 0.0, x_g)


def mask_ratio(m: np.ndarray) -> float:
    """Fraction of corrupted pixels, in [0, 1]."""
    m = ensure_mask(m)
    return float(np.count_nonzero(m)) / m.size


def _stamp_disc(mask: np.ndarray, cy: float, cx: float, r: float) -> None:
    h, w = mask.shape
    y0 = min(max(0, int(cy - r) - 1), h)
    y1 = min(max(y0, int(cy + r) + 2), h)
    x0 = min(max(0, int(cx - r) - 1), w)
    x1 = min(max(x0, int(cx + r) + 2), w)
    if y0 == y1 or x0 == x1:
        return
    yy, xx = np.ogrid[y0:y1, x0:x1]
    mask[y0:y1, x0:x1] |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def _stroke_mask(h: int, w: int, seed: int, kind: str,
                 n_lo: int, n_hi: int, r_lo: float, r_hi: float) -> np.ndarray:
    rng = CounterRng(seed, stream=f"mask-{kind}")
    mask = np.zeros((h, w), dtype=bool)
    n_strokes = int(rng.integers(n_lo, n_hi + 1, (1,), step=0)[0])
    for s in range(n_strokes):
        u = rng.uniform_field((16,), step=1 + s)
        cy, cx = u[0] * h, u[1] * w
        r = r_lo + u[2] * (r_hi - r_lo)
        theta = u[3] * 2.0 * np.pi
        n_seg = 3 + int(u[4] * 4)
        _stamp_disc(mask, cy, cx, r)
        for seg in range(n_seg):
            theta += (u[5 + seg % 10] - 0.5) * 1.2
            length = (0.5 + u[(6 + seg) % 16]) * 3.0 * r
            steps = max(2, int(length / (r * 0.5)))
            for q in range(1, steps + 1):
                py = cy + np.sin(theta) * length * q / steps
                px = cx + np.cos(theta) * length * q / steps
                _stamp_disc(mask, py, px, r)
            cy, cx = cy + np.sin(theta) * length, cx + np.cos(theta) * length
            cy, cx = float(np.clip(cy, 0, h - 1)), float(np.clip(cx, 0, w - 1))
    return mask


def make_mask(kind: str, h: int, w: int, seed: int = 0) -> np.ndarray:
    """Build one of the four mask families: center, half, wide, narrow.

    center: axis-aligned centered square covering 25% of the area.
    half:   the left w//2 columns.
    wide:   4-8 seeded brush strokes of radius 10-20 px.
    narrow: 8-16 seeded brush strokes of radius 2-6 px.
    """
    if h < 16 or w < 16:
        raise ValidationError(f"mask dimensions must be >= 16, got {h}x{w}")
    if kind == "center":
        mask = np.zeros((h, w), dtype=bool)
        sh, sw = h // 2, w // 2
        i0, j0 = (h - sh) // 2, (w - sw) // 2
        mask[i0:i0 + sh, j0:j0 + sw] = True
        return mask
    if kind == "half":
        mask = np.zeros((h, w), dtype=bool)
        mask[:, : w // 2] = True
        return mask
    if kind == "wide":
        return _stroke_mask(h, w, seed, "wide", 4, 8, 10.0, 20.0)
    if kind == "narrow":
        return _stroke_mask(h, w, seed, "narrow", 8, 16, 2.0, 6.0)
    raise ValidationError(f"unknown mask kind {kind!r}")


def _linear_ramp(h: int, w: int, theta: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    ramp = np.cos(theta) * (xx - w / 2) + np.sin(theta) * (yy - h / 2)
    lo, hi = ramp.min(), ramp.max()
    return (ramp - lo) / (hi - lo) if hi > lo else np.zeros((h, w))


def _radial_ramp(h: int, w: int, cy: float, cx: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    d = np.hypot(yy - cy, xx - cx)
    return d / d.max()


def synth_one(seed: int, idx: int, h: int, w: int) -> np.ndarray:
    """One deterministic grayscale test image.

    Each image stacks a smooth low-frequency fill (linear or radial ramp plus
    a soft blob) with a cross-hatched stripe texture through the middle, two
    moderate-contrast discs, and a small dense checkerboard patch whose
    gradients dominate every other feature. The checker anchors the top of
    the gradient range so stripe and disc pixels land mid-range when gradient
    maps are min-max normalized, and the untouched corners keep a genuine
    low-frequency band in every image.
    """
    rng = CounterRng(seed, stream="corpus")
    u = rng.uniform_field((64,), step=idx)
    yy, xx = np.mgrid[0:h, 0:w]

    lo = 0.25 + 0.10 * u[1]
    hi = 0.60 + 0.15 * u[2]
    if u[0] < 0.5:
        img = lo + (hi - lo) * _linear_ramp(h, w, u[3] * 2 * np.pi)
    else:
        img = lo + (hi - lo) * _radial_ramp(h, w, h * (0.3 + 0.4 * u[3]), w * (0.3 + 0.4 * u[4]))

    by, bx = h * (0.3 + 0.4 * u[5]), w * (0.3 + 0.4 * u[6])
    s = 0.10 * min(h, w) * (0.8 + 0.6 * u[7])
    img = img + (0.24 * u[8] - 0.12) * np.exp(-((yy - by) ** 2 + (xx - bx) ** 2) / (2 * s * s))

    # crossing stripe families over central bands
    p1 = 7 + int(3 * u[9])
    ext1 = (0.30 + 0.12 * u[10]) * w
    lev_hi = 0.80 + 0.06 * u[11]
    img = np.where(((yy + int(4 * u[12])) % p1 < 2) & (np.abs(xx - w / 2) < ext1),
                   lev_hi, img)
    p2 = 9 + int(3 * u[13])
    ext2 = (0.24 + 0.10 * u[14]) * h
    lev_lo = 0.12 + 0.06 * u[15]
    img = np.where(((xx + int(4 * u[16])) % p2 < 2) & (np.abs(yy - h / 2) < ext2),
                   lev_lo, img)

    # two moderate-contrast discs near the middle
    for k, (span, rspan) in enumerate((((0.30, 0.42), (0.070, 0.095)),
                                       ((0.58, 0.70), (0.080, 0.105)))):
        v = u[20 + 4 * k: 24 + 4 * k]
        cy = h * (span[0] + (span[1] - span[0]) * v[0])
        cx = w * (span[0] + (span[1] - span[0]) * v[1])
        r = 0.7 * (rspan[0] + (rspan[1] - rspan[0]) * v[2]) * min(h, w)
        img = np.where((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r,
                       0.72 if k == 0 else 0.28, img)

    # dense full-swing checker patch: the gradient-range anchor
    ay = h * (0.44 + 0.12 * u[28])
    ax = w * (0.44 + 0.12 * u[29])
    checker = ((yy // 2 + xx // 2) % 2 == 0)
    patch = (np.abs(yy - ay) <= 6) & (np.abs(xx - ax) <= 6)
    img = np.where(patch & checker, 0.97, img)
    img = np.where(patch & ~checker, 0.03, img)
    return np.clip(img, 0.0, 1.0)


def synth_corpus(seed: int, n: int, h: int, w: int) -> list[np.ndarray]:
    """Deterministic corpus of `n` grayscale images mixing both frequency bands."""
    if n < 1:
        raise ValidationError("corpus size must be >= 1")
    return [synth_one(seed, i, h, w) for i in range(n)]


# ---------------------------------------------------------------------------
# File interchange: 8-bit PNG images, {0,255} mask PNGs, 16-bit map PNGs with
# a JSON sidecar, and raw little-endian float32 dumps with a JSON sidecar.

def save_png(img: np.ndarray, path: str | Path) -> None:
    img = ensure_image(img)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if q.ndim == 3 and q.shape[2] == 1:
        q = q[..., 0]
    Image.fromarray(q).save(Path(path), format="PNG")


def load_png(path: str | Path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if ("A" in im.mode or len(im.mode) > 2) else "L")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    mask = ensure_mask(mask)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(Path(path), format="PNG")


def load_mask_png(path: str | Path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("L"))
    return arr > 127


def save_map_png16(values: np.ndarray, path: str | Path) -> None:
    """16-bit grayscale PNG of a scalar map, linear scale, min/max in a sidecar."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise ValidationError("scalar maps must be 2-D")
    vmin, vmax = float(values.min()), float(values.max())
    if vmax > vmin:
        q = np.rint((values - vmin) / (vmax - vmin) * 65535.0).astype(np.uint16)
    else:
        q = np.zeros(values.shape, dtype=np.uint16)
    path = Path(path)
    Image.fromarray(q).save(path, format="PNG")
    sidecar = {"min": vmin, "max": vmax, "h": values.shape[0], "w": values.shape[1]}
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n")


def load_map_png16(path: str | Path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    with Image.open(path) as im:
        q = np.asarray(im, dtype=np.float64)
    return meta["min"] + q / 65535.0 * (meta["max"] - meta["min"])


def save_raw(arr: np.ndarray, path: str | Path) -> None:
    """Row-major little-endian float32 dump plus a JSON shape sidecar."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        h, w, c = arr.shape[0], arr.shape[1], 1
    elif arr.ndim == 3:
        h, w, c = arr.shape
    else:
        raise ValidationError("raw dumps accept 2-D or 3-D arrays")
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    sidecar = {"h": h, "w": w, "c": c, "order": "row-major"}
    path.with_suffix(path.suffix + ".json").write_text(
        json.dumps(sidecar, sort_keys=True) + "\n")


def load_raw(path: str | Path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    flat = np.frombuffer(path.read_bytes(), dtype="<f4").astype(np.float64)
    shape = (meta["h"], meta["w"]) if meta["c"] == 1 else (meta["h"], meta["w"], meta["c"])
    return flat.reshape(shape)
