"""The full command-line pipeline on a synthetic corpus.

Equivalent shell session (per recording, then once for the whole corpus)::

    evgap frame day0.evt --recording-id day0 --lighting DAY --out frames/day0
    evgap preprocess frames/day0/frames.jsonl --telemetry day0.csv --seed 42 --out pre/day0-dvs
    evgap split pre/*/preprocessed.jsonl --bias day --seed 42 --out split
    evgap augment split/day.train.jsonl --seed 42 --out aug
    evgap stats frames/*/frames.jsonl
    evgap eval split/day.test.jsonl --baseline-mean split/day.train.jsonl --out eval
    evgap report eval/*.json --out report

    python demos/05_cli_end_to_end.py [out_dir]
"""
import sys
import time
from pathlib import Path

from evgap.cli import main
from evgap.synth import write_demo_corpus


def evgap(*args):
    print("$ evgap", " ".join(map(str, args)))
    code = main([str(a) for a in args])
    if code:
        sys.exit(code)


out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/cli")
t0 = time.perf_counter()
corpus = write_demo_corpus(out / "corpus", seed=1)

pre = []
frame_manifests = []
for rec, info in sorted(corpus.items()):
    evgap("frame", info["evt"], "--recording-id", rec, "--lighting", info["lighting"],
          "--out", out / "frames" / rec)
    frame_manifests.append(out / "frames" / rec / "frames.jsonl")
    evgap("preprocess", out / "frames" / rec / "frames.jsonl", "--telemetry", info["telemetry"],
          "--seed", 42, "--threads", "auto", "--out", out / "pre" / f"{rec}-dvs")
    evgap("preprocess", info["aps_manifest"], "--telemetry", info["telemetry"],
          "--seed", 42, "--threads", "auto", "--out", out / "pre" / f"{rec}-aps")
    pre += [out / "pre" / f"{rec}-dvs" / "preprocessed.jsonl",
            out / "pre" / f"{rec}-aps" / "preprocessed.jsonl"]

evgap("stats", *frame_manifests, *(Path(i["aps_manifest"]) for i in corpus.values()),
      "--out", out / "stats")
print((out / "stats" / "stats.json").read_text())

for bias in ("day", "night"):
    evgap("split", *pre, "--bias", bias, "--seed", 42, "--out", out / "split")
evgap("augment", out / "split" / "day.train.jsonl", "--seed", 42, "--out", out / "aug")

# mean-predictor baselines per sensor / test lighting / training bias
from evgap.manifest import read_manifest, write_manifest

evals = []
for bias in ("day", "night"):
    train = read_manifest(out / "split" / f"{bias}.train.jsonl")
    for test_name in (f"{bias}.test.jsonl", f"{bias}.opposite.test.jsonl"):
        test = read_manifest(out / "split" / test_name)
        for sensor in ("DVS", "APS"):
            sub = out / "eval" / "inputs"
            sub.mkdir(parents=True, exist_ok=True)
            tag = f"{bias}-{test[0].lighting.lower()}-{sensor.lower()}"
            write_manifest(sub / f"{tag}.train.jsonl", [s for s in train if s.sensor == sensor])
            write_manifest(sub / f"{tag}.test.jsonl", [s for s in test if s.sensor == sensor])
            evgap("eval", sub / f"{tag}.test.jsonl", "--baseline-mean", sub / f"{tag}.train.jsonl",
                  "--name", tag, "--out", out / "eval")
            evals.append(out / "eval" / f"{tag}.json")

evgap("report", *evals, "--out", out / "report")
print(f"done in {time.perf_counter() - t0:.1f} s; chart at {out / 'report' / 'traces.svg'}")
