"""``evgap`` command line: frame | preprocess | split | augment | stats | eval | report.

Every command accepts ``--seed``, ``--threads``, ``--config <json>`` and
``--out <dir>`` and writes ``run.json`` into the output directory.  Values
from ``--config`` are overridden by flags given explicitly.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentConfig, augment_sample
from .evio import EvtError, TelemetryError, align_telemetry, parse_telemetry, read_evt
from .framing import DEFAULT_GAIN, DEFAULT_PERIOD_US, frame_recording
from .manifest import ManifestError, Sample, read_manifest, write_manifest
from .metrics import (EvalResult, MetricError, StatsAccumulator, cohens_d, mean_baseline_fit,
                      penalty_table, rel_mean_change)
from .pgm import load_frame, save_npy, write_pgm
from .preprocess import STAGES, PipelineConfig, run_pipeline
from .report import penalty_csv, penalty_markdown, trace_svg
from .split import BIAS_RATIO, SplitError, check_no_leakage, make_split

log = logging.getLogger("evgap")

BIAS_FLAGS = {
    "day": "DAY_BIASED",
    "night": "NIGHT_BIASED",
    "pure-day": "PURE_DAY",
    "pure-night": "PURE_NIGHT",
}


class CommandError(Exception):
    """Expected failure; message goes to stderr and the exit code is 1."""


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _threads(value) -> int:
    if value in (None, "auto"):
        return os.cpu_count() or 1
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be a positive integer or 'auto'")
    return n


def _resolve(args, defaults: dict) -> dict:
    cfg = dict(defaults)
    if args.config:
        with open(args.config) as f:
            loaded = json.load(f)
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise CommandError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _write_run_json(out: Path, command: str, resolved: dict, inputs):
    record = {
        "command": command,
        "resolved_config": resolved,
        "tool_version": __version__,
        "input_digests": {str(p): _sha256(p) for p in inputs},
    }
    (out / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _frame_file(manifest_dir: Path, sample: Sample) -> Path:
    if sample.frame_path is None:
        raise CommandError(f"{sample.sample_id}: no frame_path")
    p = Path(sample.frame_path)
    return p if p.is_absolute() else manifest_dir / p


def _relpath(path: Path, start: Path) -> str:
    return os.path.relpath(path, start).replace(os.sep, "/")


def _rebase(samples, src_dir: Path, dst_dir: Path):
    """Rewrite frame paths so they stay valid from ``dst_dir``."""
    out = []
    for s in samples:
        if s.frame_path is not None and not Path(s.frame_path).is_absolute():
            s = s.replace(frame_path=_relpath(src_dir / s.frame_path, dst_dir))
        out.append(s)
    return out


def _load_manifests(paths):
    samples = []
    for p in paths:
        p = Path(p)
        samples += [(s, p.parent) for s in read_manifest(p)]
    return samples


# --- frame -----------------------------------------------------------------

def cmd_frame(args) -> int:
    cfg = _resolve(args, {"period_us": DEFAULT_PERIOD_US, "gain": DEFAULT_GAIN, "seed": 0,
                          "threads": 1, "recording_id": None, "lighting": None,
                          "sensor": "DVS", "name": "frames"})
    threads = _threads(cfg["threads"])
    stream = read_evt(args.evt)
    if len(stream) == 0:
        raise CommandError(f"{args.evt}: event stream is empty")
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    rec = cfg["recording_id"] or Path(args.evt).stem
    frames = frame_recording(stream, int(cfg["period_us"]), int(cfg["gain"]), threads)
    samples = []
    for k, fr in enumerate(frames):
        sid = f"{rec}-{cfg['sensor']}-{k:06d}"
        rel = f"frames/{sid}.pgm"
        samples.append(Sample(sid, rec, cfg["sensor"], cfg["lighting"], fr.t_start,
                              frame_path=rel, pixels=fr.pixels))

    def write(s):
        write_pgm(out / s.frame_path, s.pixels)

    with ThreadPoolExecutor(threads) as pool:
        list(pool.map(write, samples))
    write_manifest(out / f"{cfg['name']}.jsonl", samples)
    _write_run_json(out, "frame", cfg, [args.evt])
    log.info("wrote %d frames from %d events", len(frames), len(stream))
    return 0


# --- preprocess --------------------------------------------------------------

def _telemetry_map(specs):
    """``PATH`` (applies to every recording) or ``RECORDING=PATH`` entries."""
    mapping = {}
    for spec in specs or []:
        rec, sep, path = spec.partition("=")
        if not sep:
            rec, path = None, spec
        try:
            mapping[rec] = parse_telemetry(Path(path).read_text(encoding="utf-8"))
        except TelemetryError as e:
            raise CommandError(f"{path}: {e}") from None
    return mapping


def cmd_preprocess(args) -> int:
    base = PipelineConfig().to_dict()
    cfg = _resolve(args, {**base, "threads": 1})
    threads = _threads(cfg.pop("threads"))
    config = PipelineConfig.from_dict(cfg)
    manifest_path = Path(args.manifest)
    mdir = manifest_path.parent
    samples = read_manifest(manifest_path)

    missing = [f"{s.sample_id}: {_frame_file(mdir, s)}" for s in samples
               if not _frame_file(mdir, s).is_file()]
    if missing:
        raise CommandError("missing frames:\n  " + "\n  ".join(missing))

    telemetry = _telemetry_map(args.telemetry)
    aligned, unaligned = [], 0
    by_rec = {}
    for s in samples:
        by_rec.setdefault(s.recording_id, []).append(s)
    for rec in sorted(by_rec):
        group = by_rec[rec]
        tel = telemetry.get(rec, telemetry.get(None))
        if tel is None:
            incomplete = [s.sample_id for s in group
                          if s.steering_deg is None or s.speed_kmh is None]
            if incomplete:
                raise CommandError(f"recording {rec}: no telemetry and "
                                   f"{len(incomplete)} samples lack steering/speed")
            aligned += group
            continue
        al = align_telemetry([s.t for s in group], tel)
        for s, ok, st, sp in zip(group, al.aligned, al.steering_deg, al.speed_kmh):
            if ok:
                aligned.append(s.replace(steering_deg=float(st), speed_kmh=float(sp)))
            else:
                unaligned += 1

    result = run_pipeline(aligned, config, load=lambda s: load_frame(_frame_file(mdir, s)),
                          threads=threads)
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    written = []
    for s, frame in zip(result.samples, result.frames):
        rel = f"frames/{s.sample_id}.npy"
        written.append((s.replace(frame_path=rel), frame))

    def write(item):
        s, frame = item
        save_npy(out / s.frame_path, frame.astype(np.float32))

    with ThreadPoolExecutor(threads) as pool:
        list(pool.map(write, written))
    write_manifest(out / f"{args.name}.jsonl", [s for s, _ in written])
    report = {"unaligned": unaligned, **{k: result.report[k] for k in STAGES},
              "input": len(samples), "output": len(written)}
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    inputs = [manifest_path] + [spec.partition("=")[2] or spec for spec in args.telemetry or []]
    _write_run_json(out, "preprocess", {**config.to_dict(), "threads": threads}, inputs)
    return 0


# --- split -------------------------------------------------------------------

def cmd_split(args) -> int:
    cfg = _resolve(args, {"bias": None, "ratio": BIAS_RATIO, "seed": 0, "threads": 1,
                          "name": None})
    if cfg["bias"] not in BIAS_FLAGS:
        raise CommandError(f"--bias must be one of {sorted(BIAS_FLAGS)}")
    bias_set = BIAS_FLAGS[cfg["bias"]]
    name = cfg["name"] or cfg["bias"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = []
    for s, mdir in _load_manifests(args.manifests):
        if s.lighting is None:
            raise CommandError(f"{s.sample_id}: lighting label missing")
        samples += _rebase([s], mdir, out)
    res = make_split(samples, bias_set, float(cfg["ratio"]), int(cfg["seed"]))
    target = "DAY" if "DAY" in bias_set else "NIGHT"
    opposite = "NIGHT" if target == "DAY" else "DAY"
    for test in res.tests.values():
        check_no_leakage(res.train, test)
    write_manifest(out / f"{name}.train.jsonl", res.train)
    write_manifest(out / f"{name}.test.jsonl", res.tests[target])
    write_manifest(out / f"{name}.opposite.test.jsonl", res.tests[opposite])
    _write_run_json(out, "split", {**cfg, "name": name}, args.manifests)
    return 0


# --- augment -----------------------------------------------------------------

def cmd_augment(args) -> int:
    base = AugmentConfig().to_dict()
    cfg = _resolve(args, {**base, "threads": 1})
    threads = _threads(cfg.pop("threads"))
    config = AugmentConfig.from_dict(cfg)
    manifest_path = Path(args.manifest)
    mdir = manifest_path.parent
    samples = read_manifest(manifest_path)
    out = Path(args.out)
    (out / "frames").mkdir(parents=True, exist_ok=True)

    def one(s):
        frame = load_frame(_frame_file(mdir, s))
        if frame.dtype.kind != "f" or frame.min() < 0.0 or frame.max() > 1.0:
            raise CommandError(f"{s.sample_id}: frame not normalized to [0, 1]")
        aug = augment_sample(frame, s.sample_id, config)
        rel = f"frames/{s.sample_id}.npy"
        save_npy(out / rel, aug.astype(np.float32))
        return s.replace(frame_path=rel)

    with ThreadPoolExecutor(threads) as pool:
        done = list(pool.map(one, samples))
    write_manifest(out / f"{args.name}.jsonl", done)
    _write_run_json(out, "augment", {**config.to_dict(), "threads": threads}, [manifest_path])
    return 0


# --- stats -------------------------------------------------------------------

def _as_8bit(frame):
    frame = np.asarray(frame)
    if frame.dtype.kind == "f":
        return frame.astype(np.float64) * 255.0
    return frame


def cmd_stats(args) -> int:
    cfg = _resolve(args, {"seed": 0, "threads": 1})
    threads = _threads(cfg["threads"])
    groups = {}
    entries = _load_manifests(args.manifests)
    for s, _ in entries:
        if s.lighting is None:
            raise CommandError(f"{s.sample_id}: lighting label missing")

    def load(item):
        s, mdir = item
        return (s.sensor, s.lighting), _as_8bit(load_frame(_frame_file(mdir, s)))

    with ThreadPoolExecutor(threads) as pool:
        # map preserves order, so accumulation order is fixed
        for key, frame in pool.map(load, entries):
            groups.setdefault(key, StatsAccumulator()).add(frame)
    stats = {f"{sensor}/{light}": vars(acc.result())
             for (sensor, light), acc in sorted(groups.items())}
    comparisons = {}
    for sensor in sorted({k[0] for k in groups}):
        day, night = groups.get((sensor, "DAY")), groups.get((sensor, "NIGHT"))
        if day is None or night is None:
            log.warning("%s: only one lighting group present, Cohen's d omitted", sensor)
            continue
        d, n = day.result(), night.result()
        entry = {}
        try:
            entry["delta_mu_pct"] = rel_mean_change(d.mu, n.mu)
        except MetricError as e:
            entry["delta_mu_pct_error"] = str(e)
        try:
            entry["cohens_d"] = cohens_d(d.mu, d.sigma, n.mu, n.sigma)
        except MetricError as e:
            log.warning("%s: %s", sensor, e)
            entry["cohens_d_error"] = str(e)
        comparisons[sensor] = entry
    result = {"groups": stats, "day_vs_night": comparisons}
    text = json.dumps(result, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "stats.json").write_text(text)
        _write_run_json(out, "stats", cfg, args.manifests)
    else:
        sys.stdout.write(text)
    return 0


# --- eval --------------------------------------------------------------------

def _read_predictions(path) -> dict:
    preds = {}
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["sample_id", "prediction_deg"]:
            raise CommandError(f"{path}: expected header sample_id,prediction_deg")
        for row in reader:
            if not row:
                continue
            try:
                preds[row[0]] = float(row[1])
            except (IndexError, ValueError):
                raise CommandError(f"{path}: line {reader.line_num}: bad row {row}") from None
    return preds


def _single_label(samples, attr):
    values = {getattr(s, attr) for s in samples}
    return values.pop() if len(values) == 1 else None


def cmd_eval(args) -> int:
    cfg = _resolve(args, {"seed": 0, "threads": 1, "train_bias": None, "name": "eval"})
    test = sorted(read_manifest(args.manifest), key=lambda s: (s.recording_id, s.t, s.sample_id))
    if not test:
        raise CommandError("test manifest is empty")
    if any(s.steering_deg is None for s in test):
        raise CommandError("test manifest entries lack steering_deg")
    inputs = [args.manifest]
    if args.predictions:
        preds = _read_predictions(args.predictions)
        ids = {s.sample_id for s in test}
        unknown = sorted(set(preds) - ids)
        missing = sorted(ids - set(preds))
        if unknown or missing:
            lines = [f"unknown id {i}" for i in unknown] + [f"no prediction for {i}" for i in missing]
            raise CommandError("prediction/manifest mismatch:\n  " + "\n  ".join(lines))
        y_hat = [preds[s.sample_id] for s in test]
        inputs.append(args.predictions)
    elif args.baseline_mean:
        train = read_manifest(args.baseline_mean)
        model = mean_baseline_fit([s.steering_deg for s in train])
        y_hat = model.predict(len(test))
        inputs.append(args.baseline_mean)
        if cfg["train_bias"] is None:
            cfg["train_bias"] = _single_label(train, "bias_set")
    else:
        raise CommandError("one of --predictions or --baseline-mean is required")
    res = EvalResult.compute([s.steering_deg for s in test], y_hat,
                             lighting=_single_label(test, "lighting"),
                             sensor=_single_label(test, "sensor"),
                             train_bias=cfg["train_bias"], t=[s.t for s in test])
    text = json.dumps(res.to_dict()) + "\n"
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{cfg['name']}.json").write_text(text)
        _write_run_json(out, "eval", cfg, inputs)
    summary = {k: v for k, v in res.to_dict().items() if k != "series"}
    sys.stdout.write(json.dumps(summary) + "\n")
    return 0


# --- report ------------------------------------------------------------------

def cmd_report(args) -> int:
    cfg = _resolve(args, {"seed": 0, "threads": 1})
    if len(args.results) < 2:
        raise CommandError("report needs at least two eval results")
    results = []
    for p in args.results:
        with open(p) as f:
            results.append(EvalResult.from_dict(json.load(f)))
    rows = penalty_table(results)
    if not rows:
        raise CommandError("no matched/mismatched result pairs found")
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "penalty.md").write_text(penalty_markdown(rows))
    (out / "penalty.csv").write_text(penalty_csv(rows))
    (out / "traces.svg").write_text(trace_svg(results))
    _write_run_json(out, "report", cfg, args.results)
    sys.stdout.write(penalty_markdown(rows))
    return 0


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="64-bit seed")
    common.add_argument("--threads", default=None, help="worker threads (integer or 'auto')")
    common.add_argument("--config", default=None, help="JSON config; flags override it")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="evgap", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"evgap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("frame", parents=[common], help="EVT1 stream -> PGM event frames")
    p.add_argument("evt")
    p.add_argument("--out", required=True)
    p.add_argument("--period-us", dest="period_us", type=int)
    p.add_argument("--gain", type=int)
    p.add_argument("--recording-id", dest="recording_id")
    p.add_argument("--lighting", choices=["DAY", "NIGHT"])
    p.add_argument("--sensor", choices=["DVS", "APS"])
    p.add_argument("--name")
    p.set_defaults(func=cmd_frame)

    p = sub.add_parser("preprocess", parents=[common], help="prune, rescale, normalize, resize")
    p.add_argument("manifest")
    p.add_argument("--telemetry", action="append",
                   help="telemetry CSV, or RECORDING=CSV; repeatable")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="preprocessed")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("split", parents=[common], help="temporal split + biased train set")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--bias", choices=sorted(BIAS_FLAGS))
    p.add_argument("--ratio", type=float)
    p.add_argument("--name")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("augment", parents=[common], help="seeded augmentation of a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--name", default="augmented")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("stats", parents=[common], help="per-sensor/lighting pixel statistics")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("eval", parents=[common], help="RMSE/EVA of predictions on a test set")
    p.add_argument("manifest")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--predictions", help="CSV sample_id,prediction_deg")
    src.add_argument("--baseline-mean", dest="baseline_mean", metavar="TRAIN_MANIFEST",
                     help="evaluate the mean-of-train predictor instead")
    p.add_argument("--train-bias", dest="train_bias")
    p.add_argument("--name")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", parents=[common], help="domain-shift penalty tables + SVG")
    p.add_argument("results", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("evgap: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (CommandError, EvtError, TelemetryError, ManifestError, SplitError, MetricError,
            ValueError, OSError) as e:
        print(f"evgap: error: {e}", file=sys.stderr)
        return 1
    finally:
        log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())
