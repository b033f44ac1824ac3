"""Event framing walkthrough.

Generates a synthetic DVS recording, writes it in the EVT1 exchange format,
reads it back and aggregates it into 50 ms ON/OFF histogram frames.

    python demos/01_event_framing.py [out_dir]
"""
import sys
from pathlib import Path

import numpy as np

from evgap.evio import read_evt, save_evt
from evgap.framing import accumulate_histograms, frame_recording
from evgap.metrics import sensor_stats
from evgap.pgm import write_pgm
from evgap.synth import synth_events

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/framing")
out.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(0)
stream = synth_events(rng, duration_us=2_000_000, rate_hz=300_000)
print(f"{len(stream)} events on a {stream.width}x{stream.height} sensor")

save_evt(out / "demo.evt", stream)
size = (out / "demo.evt").stat().st_size
print(f"EVT1 file: {size} bytes = 16 header + {len(stream)} x 13")
assert read_evt(out / "demo.evt") == stream

# %% one window by hand
h = accumulate_histograms(stream, int(stream.t[0]), 50_000)
print(f"first window: {h.on_counts.sum()} ON + {h.off_counts.sum()} OFF events")

# %% the whole recording, gain 3 around mid-gray
frames = frame_recording(stream, period_us=50_000, gain=3)
print(f"{len(frames)} frames of 50 ms")
for k, f in enumerate(frames[:5]):
    write_pgm(out / f"frame_{k:03d}.pgm", f.pixels)

st = sensor_stats(f.pixels for f in frames)
print(f"DVS pixel statistics: mu={st.mu:.1f} sigma={st.sigma:.1f} over {st.n} pixels")
