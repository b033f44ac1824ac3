"""Per-recording temporal train/test split and lighting-biased training sets."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import rng
from .manifest import LIGHTINGS, Sample

TRAIN_FRACTION = 0.85
BIAS_RATIO = 0.25

BIAS_TARGETS = {
    "DAY_BIASED": "DAY",
    "NIGHT_BIASED": "NIGHT",
    "PURE_DAY": "DAY",
    "PURE_NIGHT": "NIGHT",
}


class SplitError(ValueError):
    pass


def _exact(fraction: float) -> Fraction:
    # decimal value as written, so floor(0.85 * 100) is 85 rather than float-rounded
    return Fraction(str(fraction))


def _sort_key(s: Sample):
    return (s.lighting or "", s.sensor, s.recording_id, s.t, s.sample_id)


def temporal_split(samples: Sequence[Sample], train_fraction: float = TRAIN_FRACTION):
    """First ``floor(train_fraction * n)`` samples train, the rest test.

    Timestamps must be strictly increasing so no train sample shares a time
    with a test sample.
    """
    n = len(samples)
    if n == 0:
        raise SplitError("cannot split an empty recording")
    for a, b in zip(samples, samples[1:]):
        if not a.t < b.t:
            raise SplitError(f"recording {a.recording_id}: timestamps not strictly increasing "
                             f"at {a.sample_id} -> {b.sample_id}")
    cut = math.floor(_exact(train_fraction) * n)
    train = [s.replace(split="TRAIN") for s in samples[:cut]]
    test = [s.replace(split="TEST") for s in samples[cut:]]
    return train, test


def split_recordings(samples: Sequence[Sample], train_fraction: float = TRAIN_FRACTION):
    """Temporal split applied independently to each (recording, sensor) stream."""
    groups = defaultdict(list)
    for s in samples:
        groups[(s.recording_id, s.sensor)].append(s)
    train, test = [], []
    for key in sorted(groups):
        tr, te = temporal_split(sorted(groups[key], key=lambda s: (s.t, s.sample_id)),
                                train_fraction)
        train += tr
        test += te
    return train, test


def bias_count(n_target: int, n_opposite: int, ratio: float = BIAS_RATIO) -> int:
    return min(n_opposite, math.floor(_exact(ratio) * n_target))


def build_biased_set(target: Sequence[Sample], opposite: Sequence[Sample],
                     ratio: float = BIAS_RATIO, seed: int = 0, bias_set=None) -> list[Sample]:
    """All of ``target`` plus ``floor(ratio * |target|)`` seeded picks from ``opposite``.

    Opposite samples are ranked by a uniform draw keyed on ``(seed, sample_id)``
    and the lowest ``k`` are kept, so the choice ignores input order.
    """
    if not 0.0 <= ratio <= 1.0:
        raise SplitError("ratio must be in [0, 1]")
    k = bias_count(len(target), len(opposite), ratio)
    ranked = sorted(opposite, key=lambda s: (rng.uniform(seed, s.sample_id, rng.STREAM_SPLIT),
                                             s.sample_id))
    chosen = list(target) + ranked[:k]
    if bias_set is None and target:
        bias_set = f"{target[0].lighting}_BIASED"
    return sorted((s.replace(bias_set=bias_set) for s in chosen), key=_sort_key)


def build_pure_set(target: Sequence[Sample], bias_set=None) -> list[Sample]:
    lightings = {s.lighting for s in target}
    if len(lightings) > 1:
        raise SplitError(f"pure set requires one lighting, got {sorted(lightings, key=str)}")
    if not target:
        return []
    bias_set = bias_set or f"PURE_{target[0].lighting}"
    return sorted((s.replace(bias_set=bias_set) for s in target), key=_sort_key)


@dataclass
class SplitResult:
    train: list
    tests: dict  # lighting -> test samples


def make_split(samples: Sequence[Sample], bias_set: str, ratio: float = BIAS_RATIO,
               seed: int = 0, train_fraction: float = TRAIN_FRACTION) -> SplitResult:
    """Full split: temporal cut per recording, then a biased/pure train set per sensor.

    Test sets are the per-lighting unions of the recording tails.
    """
    if bias_set not in BIAS_TARGETS:
        raise SplitError(f"unknown bias set {bias_set!r}")
    for s in samples:
        if s.lighting not in LIGHTINGS:
            raise SplitError(f"{s.sample_id}: lighting label missing")
    ids = [s.sample_id for s in samples]
    if len(set(ids)) != len(ids):
        raise SplitError("duplicate sample ids")
    target_light = BIAS_TARGETS[bias_set]
    train_pool, test_pool = split_recordings(samples, train_fraction)

    train = []
    for sensor in sorted({s.sensor for s in train_pool}):
        pool = [s for s in train_pool if s.sensor == sensor]
        target = [s for s in pool if s.lighting == target_light]
        opposite = [s for s in pool if s.lighting != target_light]
        if bias_set.startswith("PURE"):
            train += build_pure_set(target, bias_set)
        else:
            train += build_biased_set(target, opposite, ratio, seed, bias_set)
    train.sort(key=_sort_key)
    tests = {
        light: sorted((s for s in test_pool if s.lighting == light), key=_sort_key)
        for light in LIGHTINGS
    }
    return SplitResult(train, tests)


def check_no_leakage(train: Sequence[Sample], test: Sequence[Sample]):
    """Raise if any recording has a TRAIN timestamp at or after a TEST timestamp."""
    max_train = defaultdict(lambda: -math.inf)
    for s in train:
        key = (s.recording_id, s.sensor)
        max_train[key] = max(max_train[key], s.t)
    for s in test:
        if s.t <= max_train[(s.recording_id, s.sensor)]:
            raise SplitError(f"temporal leakage in recording {s.recording_id} at {s.sample_id}")
