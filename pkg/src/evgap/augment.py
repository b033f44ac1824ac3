"""Seeded training-time augmentation for single-channel frames in [0, 1].

Five transforms run in a fixed order: resized crop, rotation, brightness /
contrast jitter, additive Gaussian noise, Gaussian blur.  Transform ``i`` of a
sample draws its gate and parameters from ``derive_rng(seed, sample_id, 100 + i)``
and fires when the gate draw is below its probability.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .preprocess import resize_bilinear
from .rng import derive_rng

TRANSFORMS = ("crop", "rotate", "jitter", "noise", "blur")
STREAM_BASE = 100


@dataclass
class AugmentConfig:
    p_crop: float = 0.30
    crop_ratio: tuple = (0.8, 1.2)
    crop_scale: tuple = (0.8, 1.0)
    p_rotate: float = 0.40
    max_rot_deg: float = 3.0
    p_jitter: float = 0.20
    jitter_brightness: float = 0.2
    jitter_contrast: float = 0.2
    p_noise: float = 0.30
    noise_mu: float = 0.0
    noise_sigma: float = 0.01
    p_blur: float = 0.20
    blur_kernel: int = 3
    seed: int = 0

    def __post_init__(self):
        self.crop_ratio = tuple(float(v) for v in self.crop_ratio)
        self.crop_scale = tuple(float(v) for v in self.crop_scale)
        for name in ("p_crop", "p_rotate", "p_jitter", "p_noise", "p_blur"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        for name in ("crop_ratio", "crop_scale"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must be a non-empty positive interval")
        if self.crop_scale[1] > 1.0:
            raise ValueError("crop_scale upper bound must be <= 1")
        if self.blur_kernel < 1 or self.blur_kernel % 2 == 0:
            raise ValueError("blur_kernel must be odd and >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def probabilities(self):
        return (self.p_crop, self.p_rotate, self.p_jitter, self.p_noise, self.p_blur)

    def to_dict(self):
        d = asdict(self)
        d["crop_ratio"] = list(self.crop_ratio)
        d["crop_scale"] = list(self.crop_scale)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


class CropRect(NamedTuple):
    x: int
    y: int
    w: int
    h: int


def crop_resized(frame, rect: CropRect) -> np.ndarray:
    """Crop ``rect`` and resize it back to the frame's own size."""
    frame = np.asarray(frame, dtype=np.float64)
    x, y, w, h = rect
    H, W = frame.shape
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > W or y + h > H:
        raise ValueError(f"crop {tuple(rect)} outside {W}x{H} frame")
    return resize_bilinear(frame[y:y + h, x:x + w], (H, W))


def rotate(frame, theta_deg: float) -> np.ndarray:
    """Rotate counterclockwise (as displayed) about the frame center.

    Inverse mapping with bilinear sampling; destination pixels whose source
    falls outside ``[0, W-1] x [0, H-1]`` are set to 0.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if theta_deg == 0:
        return frame.copy()
    H, W = frame.shape
    cy, cx = (H - 1) / 2.0, (W - 1) / 2.0
    th = math.radians(theta_deg)
    cos, sin = math.cos(th), math.sin(th)
    dy, dx = np.mgrid[0:H, 0:W].astype(np.float64)
    dx -= cx
    dy -= cy
    sx = cos * dx - sin * dy + cx
    sy = sin * dx + cos * dy + cy
    inside = (sx >= 0) & (sx <= W - 1) & (sy >= 0) & (sy <= H - 1)
    sx = np.clip(sx, 0, W - 1)
    sy = np.clip(sy, 0, H - 1)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = sx - x0
    fy = sy - y0
    top = frame[y0, x0] * (1 - fx) + frame[y0, x1] * fx
    bottom = frame[y1, x0] * (1 - fx) + frame[y1, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return np.where(inside, np.clip(out, 0.0, frame.max()), 0.0)


def color_jitter(frame, brightness_factor: float, contrast_factor: float) -> np.ndarray:
    """Scale by ``brightness_factor``, stretch about the new mean by ``contrast_factor``."""
    v = np.asarray(frame, dtype=np.float64) * brightness_factor
    m = v.mean()
    return np.clip(contrast_factor * (v - m) + m, 0.0, 1.0)


def gaussian_noise(frame, sigma: float, rng: np.random.Generator, mu: float = 0.0):
    frame = np.asarray(frame, dtype=np.float64)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    return np.clip(frame + rng.normal(mu, sigma, frame.shape), 0.0, 1.0)


def blur_sigma(kernel_size: int) -> float:
    # 0.8 for a 3-tap kernel
    return 0.3 * ((kernel_size - 1) * 0.5 - 1) + 0.8


def gaussian_kernel1d(kernel_size: int = 3, sigma: float | None = None) -> np.ndarray:
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError("kernel size must be odd and >= 1")
    sigma = blur_sigma(kernel_size) if sigma is None else sigma
    r = kernel_size // 2
    k = np.exp(-(np.arange(-r, r + 1) ** 2) / (2 * sigma**2))
    return k / k.sum()


def gaussian_blur(frame, kernel_size: int = 3, sigma: float | None = None) -> np.ndarray:
    """Separable Gaussian blur with edge-replicate padding."""
    k = gaussian_kernel1d(kernel_size, sigma)
    frame = np.asarray(frame, dtype=np.float64)
    r = kernel_size // 2
    H, W = frame.shape
    p = np.pad(frame, r, mode="edge")
    rows = sum(k[i] * p[i:i + H, :] for i in range(kernel_size))
    out = sum(k[i] * rows[:, i:i + W] for i in range(kernel_size))
    return np.clip(out, frame.min(), frame.max())


def draw_crop_rect(shape, rng: np.random.Generator, scale=(0.8, 1.0), ratio=(0.8, 1.2),
                   attempts: int = 10) -> CropRect:
    """Random crop with area fraction in ``scale`` and width/height in ``ratio``.

    Falls back to the full frame if no attempt fits.
    """
    H, W = shape
    area = H * W
    log_lo, log_hi = math.log(ratio[0]), math.log(ratio[1])
    for _ in range(attempts):
        target = area * rng.uniform(scale[0], scale[1])
        aspect = math.exp(rng.uniform(log_lo, log_hi))
        w = int(round(math.sqrt(target * aspect)))
        h = int(round(math.sqrt(target / aspect)))
        if 0 < w <= W and 0 < h <= H:
            y = int(rng.integers(0, H - h + 1))
            x = int(rng.integers(0, W - w + 1))
            return CropRect(x, y, w, h)
    return CropRect(0, 0, W, H)


def transform_rng(config: AugmentConfig, sample_id: str, index: int) -> np.random.Generator:
    return derive_rng(config.seed, sample_id, STREAM_BASE + index)


def augment_sample(frame, sample_id: str, config: AugmentConfig) -> np.ndarray:
    out = np.asarray(frame, dtype=np.float64)
    probs = config.probabilities()
    for i, name in enumerate(TRANSFORMS):
        g = transform_rng(config, sample_id, i)
        if not g.random() < probs[i]:
            continue
        if name == "crop":
            out = crop_resized(out, draw_crop_rect(out.shape, g, config.crop_scale,
                                                   config.crop_ratio))
        elif name == "rotate":
            out = rotate(out, g.uniform(-config.max_rot_deg, config.max_rot_deg))
        elif name == "jitter":
            b = g.uniform(1 - config.jitter_brightness, 1 + config.jitter_brightness)
            c = g.uniform(1 - config.jitter_contrast, 1 + config.jitter_contrast)
            out = color_jitter(out, b, c)
        elif name == "noise":
            out = gaussian_noise(out, config.noise_sigma, g, config.noise_mu)
        else:
            out = gaussian_blur(out, config.blur_kernel)
    return out


def fired_transforms(sample_id: str, config: AugmentConfig) -> tuple[bool, ...]:
    """Which of the five transforms fire for ``sample_id`` (gate draws only)."""
    return tuple(transform_rng(config, sample_id, i).random() < p
                 for i, p in enumerate(config.probabilities()))
