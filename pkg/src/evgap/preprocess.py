"""Pruning, rescaling, normalization and resizing of driving samples.

Stage order: trim -> low speed -> low steering (random) -> extreme steering
-> rescale steering -> normalize pixels -> resize.  All thresholds are strict
in the direction written: speeds *below* 15 km/h are pruned (15.0 is kept),
angles *less than* 5 degrees are candidates for random pruning (5.0 is exempt),
angles *over* 180 degrees are pruned (180.0 is kept).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng
from .manifest import Sample

TARGET_SIZE = (224, 224)
MAX_ANGLE_DEG = 180.0


@dataclass
class PipelineConfig:
    seed: int = 0
    low_speed_kmh: float = 15.0
    low_angle_deg: float = 5.0
    low_angle_prune_prob: float = 0.7
    max_angle_deg: float = MAX_ANGLE_DEG
    target_size: tuple = TARGET_SIZE
    keep_ranges: dict = field(default_factory=dict)

    def __post_init__(self):
        self.target_size = tuple(int(v) for v in self.target_size)
        self.keep_ranges = {
            str(k): [[int(a), int(b)] for a, b in v] for k, v in self.keep_ranges.items()
        }
        if not 0.0 <= self.low_angle_prune_prob <= 1.0:
            raise ValueError("low_angle_prune_prob must be in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target_size"] = list(self.target_size)
        return d

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def trim_recording(samples: Sequence[Sample], keep_ranges) -> list[Sample]:
    """Keep samples whose ``t`` lies in any ``[t_from, t_to]`` range (inclusive)."""
    ranges = [(int(a), int(b)) for a, b in keep_ranges]
    for a, b in ranges:
        if a > b:
            raise ValueError(f"malformed keep range [{a}, {b}]")
    return [s for s in samples if any(a <= s.t <= b for a, b in ranges)]


def prune_low_speed(samples, min_speed_kmh: float = 15.0):
    return [s for s in samples if s.speed_kmh >= min_speed_kmh]


def low_steering_dropped(sample: Sample, seed: int, angle_deg: float = 5.0,
                         prob: float = 0.7) -> bool:
    if abs(sample.steering_deg) >= angle_deg:
        return False
    return rng.uniform(seed, sample.sample_id, rng.STREAM_LOW_STEERING) < prob


def prune_low_steering(samples, seed: int, angle_deg: float = 5.0, prob: float = 0.7):
    """Randomly drop ~``prob`` of samples with ``|steering| < angle_deg``.

    The drop decision for a sample depends only on ``(seed, sample_id)``.
    """
    return [s for s in samples if not low_steering_dropped(s, seed, angle_deg, prob)]


def prune_extreme_steering(samples, max_angle_deg: float = MAX_ANGLE_DEG):
    return [s for s in samples if abs(s.steering_deg) <= max_angle_deg]


def rescale_steering(steering_deg: float, max_angle_deg: float = MAX_ANGLE_DEG) -> float:
    if not abs(steering_deg) <= max_angle_deg:
        raise ValueError(f"steering {steering_deg} outside +/-{max_angle_deg}; prune first")
    return steering_deg / max_angle_deg


def normalize_pixels(frame) -> np.ndarray:
    return np.asarray(frame, dtype=np.float64) / 255.0


def _axis_coords(n_in: int, n_out: int):
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def resize_bilinear(frame, size=TARGET_SIZE) -> np.ndarray:
    """Bilinear resize to ``size = (height, width)`` with half-pixel centers.

    Source coordinate per axis is ``(dst + 0.5) * in / out - 0.5`` clamped to
    ``[0, in - 1]``.
    """
    src = np.asarray(frame, dtype=np.float64)
    if src.ndim != 2 or min(src.shape) < 1:
        raise ValueError("frame must be a non-empty 2-D array")
    out_h, out_w = size
    r0, r1, fr = _axis_coords(src.shape[0], out_h)
    c0, c1, fc = _axis_coords(src.shape[1], out_w)
    fr = fr[:, None]
    rows = src[r0] * (1 - fr) + src[r1] * fr
    out = rows[:, c0] * (1 - fc) + rows[:, c1] * fc
    # convex combination; clip guards against last-ulp overshoot
    return np.clip(out, src.min(), src.max())


STAGES = ("trim", "low_speed", "low_steering", "extreme_steering")


@dataclass
class PipelineResult:
    samples: list
    frames: list
    report: dict


def prune(samples: Sequence[Sample], config: PipelineConfig) -> tuple[list[Sample], dict]:
    """Run the four pruning stages; returns survivors and ``{stage: removed}``."""
    report = {}
    current = list(samples)

    def stage(name, out):
        nonlocal current
        report[name] = len(current) - len(out)
        current = out

    trimmed = []
    for s in current:
        ranges = config.keep_ranges.get(s.recording_id)
        if ranges is None or trim_recording([s], ranges):
            trimmed.append(s)
    stage("trim", trimmed)
    stage("low_speed", prune_low_speed(current, config.low_speed_kmh))
    stage("low_steering", prune_low_steering(current, config.seed, config.low_angle_deg,
                                             config.low_angle_prune_prob))
    stage("extreme_steering", prune_extreme_steering(current, config.max_angle_deg))
    return current, report


def prepare_frame(pixels, size=TARGET_SIZE) -> np.ndarray:
    return resize_bilinear(normalize_pixels(pixels), size)


def run_pipeline(samples: Sequence[Sample], config: PipelineConfig,
                 load: Optional[Callable[[Sample], np.ndarray]] = None,
                 threads: int = 1) -> PipelineResult:
    """Prune, then rescale steering and normalize/resize each surviving frame.

    Frames come from ``sample.pixels`` unless ``load`` is given.  Recordings
    without an entry in ``config.keep_ranges`` are not trimmed.
    """
    survivors, report = prune(samples, config)
    out = [s.replace(steering_scaled=rescale_steering(s.steering_deg, config.max_angle_deg))
           for s in survivors]
    load = load or (lambda s: s.pixels)

    def one(s):
        return prepare_frame(load(s), config.target_size)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            frames = list(pool.map(one, survivors))
    else:
        frames = [one(s) for s in survivors]
    return PipelineResult(out, frames, report)
