"""Event-camera driving data toolkit: framing, pruning, biased splits,
seeded augmentation and day/night domain-gap metrics."""

__version__ = "0.1.0"

from .evio import Event, EventStream, parse_evt, write_evt, parse_telemetry, align_telemetry
from .framing import accumulate_histograms, combine_to_frame, frame_recording
from .metrics import cohens_d, eva, rel_mean_change, rmse, sensor_stats

__all__ = [
    "Event",
    "EventStream",
    "parse_evt",
    "write_evt",
    "parse_telemetry",
    "align_telemetry",
    "accumulate_histograms",
    "combine_to_frame",
    "frame_recording",
    "cohens_d",
    "eva",
    "rel_mean_change",
    "rmse",
    "sensor_stats",
]
