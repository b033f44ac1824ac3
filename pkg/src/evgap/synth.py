"""Synthetic driving recordings for demos and tests.

Nothing here models a real sensor; the generators only produce data with the
right shapes, formats and rough statistics (DVS mid-gray frames, bright day /
dark night APS frames, smooth steering with occasional extreme turns).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .evio import DEFAULT_HEIGHT, DEFAULT_WIDTH, EventStream, TelemetryRecord, format_telemetry, save_evt
from .manifest import Sample, write_manifest
from .pgm import write_pgm


def synth_events(rng: np.random.Generator, duration_us: int, rate_hz: float,
                 width=DEFAULT_WIDTH, height=DEFAULT_HEIGHT, t0: int = 0) -> EventStream:
    n = int(rng.poisson(rate_hz * duration_us / 1e6))
    t = np.sort(rng.integers(t0, t0 + duration_us, n))
    # events cluster on a few vertical "edges" that drift sideways
    n_edges = 6
    edge = rng.integers(0, n_edges, n)
    base = rng.uniform(0, width, n_edges)
    speed = rng.uniform(-200, 200, n_edges)  # px/s
    x = (base[edge] + speed[edge] * (t - t0) / 1e6 + rng.normal(0, 4, n)) % width
    y = rng.integers(0, height, n)
    p = (rng.random(n) < 0.5 + 0.2 * np.sign(speed[edge])).astype(np.uint8)
    return EventStream(width, height, t, x.astype(np.uint16), y.astype(np.uint16), p)


def synth_telemetry(rng: np.random.Generator, duration_us: int, step_us: int = 50_000,
                    t0: int = 0) -> list[TelemetryRecord]:
    t = t0 + np.arange(0, duration_us, step_us, dtype=np.int64) + step_us // 2
    s = t / 1e6
    steer = (60 * np.sin(2 * np.pi * s / 7.0) + 15 * np.sin(2 * np.pi * s / 1.3)
             + rng.normal(0, 3, t.size))
    turns = rng.random(t.size) < 0.02
    steer[turns] += rng.choice([-1, 1], turns.sum()) * rng.uniform(150, 260, turns.sum())
    speed = np.clip(35 + 25 * np.sin(2 * np.pi * s / 11.0) + rng.normal(0, 2, t.size), 0, None)
    return [TelemetryRecord(int(a), round(float(b), 3), round(float(c), 3))
            for a, b, c in zip(t, steer, speed)]


def synth_aps_frame(rng: np.random.Generator, lighting: str, width=DEFAULT_WIDTH,
                    height=DEFAULT_HEIGHT) -> np.ndarray:
    mu, sigma = (160.0, 80.0) if lighting == "DAY" else (14.0, 40.0)
    gradient = np.linspace(-1, 1, height)[:, None] * sigma * 0.8
    img = mu + gradient + rng.normal(0, sigma * 0.6, (height, width))
    return np.clip(img, 0, 255).astype(np.uint8)


def write_demo_corpus(out_dir, seed: int = 0, recordings_per_lighting: int = 2,
                      duration_us: int = 20_000_000, rate_hz: float = 200_000,
                      with_aps: bool = True) -> dict:
    """Write EVT1 streams, telemetry CSVs and (optionally) APS frames + manifests.

    Returns ``{recording_id: {"evt", "telemetry", "lighting", "aps_manifest"}}``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    corpus = {}
    for lighting in ("DAY", "NIGHT"):
        for r in range(recordings_per_lighting):
            rec = f"{lighting.lower()}{r}"
            t0 = int(rng.integers(0, 10**9))
            stream = synth_events(rng, duration_us, rate_hz * (1.0 if lighting == "DAY" else 0.8),
                                  t0=t0)
            tel = synth_telemetry(rng, duration_us, t0=t0)
            evt_path = out / f"{rec}.evt"
            tel_path = out / f"{rec}.csv"
            save_evt(evt_path, stream)
            tel_path.write_text(format_telemetry(tel))
            entry = {"evt": str(evt_path), "telemetry": str(tel_path), "lighting": lighting,
                     "aps_manifest": None}
            if with_aps:
                aps_dir = out / f"{rec}_aps"
                (aps_dir / "frames").mkdir(parents=True, exist_ok=True)
                samples = []
                starts = range(int(stream.t[0]), int(stream.t[-1]) + 1, 50_000)
                for k, t in enumerate(starts):
                    sid = f"{rec}-APS-{k:06d}"
                    rel = f"frames/{sid}.pgm"
                    write_pgm(aps_dir / rel, synth_aps_frame(rng, lighting))
                    samples.append(Sample(sid, rec, "APS", lighting, t, frame_path=rel))
                write_manifest(aps_dir / "aps.jsonl", samples)
                entry["aps_manifest"] = str(aps_dir / "aps.jsonl")
            corpus[rec] = entry
    return corpus
