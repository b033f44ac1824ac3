"""Fixed-period event framing from ON/OFF count histograms.

A frame pixel is ``clamp(128 + gain * (on - off), 0, 255)`` where ``on`` and
``off`` count the events of each polarity at that pixel within a half-open
window ``[t_start, t_start + period_us)``.  Windows are anchored at the first
event timestamp and tile the recording without gaps.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .evio import EventStream

DEFAULT_PERIOD_US = 50_000
DEFAULT_GAIN = 3
MID_GRAY = 128


@dataclass
class HistogramPair:
    on_counts: np.ndarray
    off_counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.on_counts.sum() + self.off_counts.sum())


@dataclass
class EventFrame:
    pixels: np.ndarray
    t_start: int
    period_us: int = DEFAULT_PERIOD_US

    def __post_init__(self):
        if self.period_us <= 0:
            raise ValueError("period_us must be positive")


def _window_bounds(t: np.ndarray, t_start: int, period_us: int) -> tuple[int, int]:
    lo = int(np.searchsorted(t, t_start, side="left"))
    hi = int(np.searchsorted(t, t_start + period_us, side="left"))
    return lo, hi


def _histograms(stream: EventStream, lo: int, hi: int) -> HistogramPair:
    w, h = stream.width, stream.height
    flat = stream.y[lo:hi].astype(np.int64) * w + stream.x[lo:hi]
    on = stream.polarity[lo:hi].astype(bool)
    on_counts = np.bincount(flat[on], minlength=w * h).reshape(h, w)
    off_counts = np.bincount(flat[~on], minlength=w * h).reshape(h, w)
    return HistogramPair(on_counts, off_counts)


def accumulate_histograms(stream: EventStream, t_start: int, period_us: int) -> HistogramPair:
    """ON and OFF counts for events with ``t_start <= t < t_start + period_us``."""
    if period_us <= 0:
        raise ValueError("period_us must be positive")
    lo, hi = _window_bounds(stream.t, t_start, period_us)
    return _histograms(stream, lo, hi)


def combine_to_frame(h: HistogramPair, gain: int = DEFAULT_GAIN, t_start: int = 0,
                     period_us: int = DEFAULT_PERIOD_US) -> EventFrame:
    if gain < 1:
        raise ValueError("gain must be >= 1")
    diff = h.on_counts.astype(np.int64) - h.off_counts
    pixels = np.clip(MID_GRAY + gain * diff, 0, 255).astype(np.uint8)
    return EventFrame(pixels, int(t_start), int(period_us))


def window_starts(stream: EventStream, period_us: int) -> np.ndarray:
    if len(stream) == 0:
        raise ValueError("cannot frame an empty event stream")
    if period_us <= 0:
        raise ValueError("period_us must be positive")
    t0, t1 = int(stream.t[0]), int(stream.t[-1])
    n = (t1 - t0) // period_us + 1
    return t0 + period_us * np.arange(n, dtype=np.int64)


def frame_recording(stream: EventStream, period_us: int = DEFAULT_PERIOD_US,
                    gain: int = DEFAULT_GAIN, threads: int = 1) -> list[EventFrame]:
    """Frame the whole stream; output order and values do not depend on ``threads``."""
    starts = window_starts(stream, period_us)
    bounds = np.searchsorted(stream.t, np.append(starts, starts[-1] + period_us), side="left")

    def one(k):
        h = _histograms(stream, int(bounds[k]), int(bounds[k + 1]))
        return combine_to_frame(h, gain, int(starts[k]), period_us)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, range(len(starts))))
    return [one(k) for k in range(len(starts))]
