"""Pruning pipeline and lighting-biased splits on a synthetic corpus.

Frames two day and two night recordings, aligns steering/speed telemetry,
prunes, then builds a day-biased training set and per-lighting test sets.

    python demos/02_preprocess_and_split.py [out_dir]
"""
import sys
from collections import Counter
from pathlib import Path

from evgap.evio import align_telemetry, parse_telemetry, read_evt
from evgap.framing import frame_recording
from evgap.manifest import Sample
from evgap.preprocess import PipelineConfig, run_pipeline
from evgap.split import make_split
from evgap.synth import write_demo_corpus

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/split")
corpus = write_demo_corpus(out / "corpus", seed=2, duration_us=10_000_000, rate_hz=80_000,
                           with_aps=False)

samples = []
for rec, info in sorted(corpus.items()):
    frames = frame_recording(read_evt(info["evt"]))
    tel = parse_telemetry(Path(info["telemetry"]).read_text())
    al = align_telemetry([f.t_start for f in frames], tel)
    for k, f in enumerate(frames):
        if al.aligned[k]:
            samples.append(Sample(f"{rec}-DVS-{k:06d}", rec, "DVS", info["lighting"], f.t_start,
                                  steering_deg=float(al.steering_deg[k]),
                                  speed_kmh=float(al.speed_kmh[k]), pixels=f.pixels))
print(f"{len(samples)} aligned DVS samples")

# trim the first and last second of every recording
keep = {}
for rec in corpus:
    ts = [s.t for s in samples if s.recording_id == rec]
    keep[rec] = [[ts[0] + 1_000_000, ts[-1] - 1_000_000]]
config = PipelineConfig(seed=42, keep_ranges=keep)
result = run_pipeline(samples, config)
print("removed per stage:", result.report)
print(f"{len(result.samples)} survivors, frames {result.frames[0].shape}, "
      f"steering scaled to [{min(s.steering_scaled for s in result.samples):.2f}, "
      f"{max(s.steering_scaled for s in result.samples):.2f}]")

# %% day-biased training set: all day train samples + at most 25% as many night ones
split = make_split(result.samples, "DAY_BIASED", ratio=0.25, seed=42)
print("train lighting mix:", Counter(s.lighting for s in split.train))
for light, test in split.tests.items():
    print(f"{light} test set: {len(test)} samples")
