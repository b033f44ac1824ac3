"""Exit criteria for the toolkit, one test per criterion.

A summary line per criterion is printed at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest

from evgap.augment import color_jitter, gaussian_blur, gaussian_kernel1d, rotate
from evgap.cli import main
from evgap.evio import EventStream, save_evt
from evgap.framing import accumulate_histograms, frame_recording, window_starts
from evgap.manifest import Sample, read_manifest
from evgap.metrics import (EvalResult, cohens_d, domain_shift_penalty, eva, mean_baseline_fit,
                           rel_mean_change, rmse, sensor_stats)
from evgap.preprocess import (prune_extreme_steering, prune_low_speed, prune_low_steering,
                              resize_bilinear)
from evgap.split import check_no_leakage, make_split
from evgap.synth import write_demo_corpus

from pipeline_helpers import full_pipeline, tree_digest
from test_augment import ref_blur, ref_jitter, ref_rotate
from test_metrics import fsum_eva, fsum_rmse, two_pass_var
from test_preprocess import ref_bilinear, ref_uniform

RESULTS = {}


@pytest.fixture
def record(request):
    """Record PASS/FAIL for the criterion named by the test's ``criterion`` marker."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    info = {}
    yield info
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    detail = f" ({info['detail']})" if "detail" in info else ""
    RESULTS[number] = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}{detail}"


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# 1 ---------------------------------------------------------------------------

@criterion(1, "Cohen's d and relative mean change on the day/night sensor statistics")
def test_c01_cohens_d(record):
    t0 = time.perf_counter()
    d_aps = cohens_d(159.6, 83.8, 13.9, 40.5)
    d_dvs = cohens_d(111.6, 35.7, 103.8, 24.4)
    r_aps = rel_mean_change(159.6, 13.9)
    r_dvs = rel_mean_change(111.6, 103.8)
    assert abs(d_aps - 2.21) <= 0.01
    assert abs(d_dvs - 0.25) <= 0.01
    assert abs(r_aps - (-91.3)) <= 0.1
    assert abs(r_dvs - (-7.0)) <= 0.1
    assert time.perf_counter() - t0 < 0.1
    record["detail"] = f"d APS {d_aps:.3f}, DVS {d_dvs:.3f}; dmu APS {r_aps:.2f}%, DVS {r_dvs:.2f}%"


# 2 ---------------------------------------------------------------------------

RESULTS_TABLE = {  # (lighting, sensor) -> (match rmse, eva), (mismatch rmse, eva)
    ("DAY", "DVS"): ((11.60, 0.698), (17.30, 0.327)),
    ("DAY", "APS"): ((16.49, 0.388), (19.19, 0.172)),
    ("NIGHT", "DVS"): ((8.10, 0.852), (11.81, 0.685)),
    ("NIGHT", "APS"): ((12.55, 0.645), (18.07, 0.263)),
}
PENALTY_TABLE = {
    ("DAY", "DVS"): (5.71, 49.2, -0.37, -53.1),
    ("DAY", "APS"): (2.69, 16.3, -0.22, -55.6),
    ("NIGHT", "DVS"): (3.70, 45.7, -0.17, -19.5),
    ("NIGHT", "APS"): (5.52, 44.0, -0.38, -59.2),
}


@criterion(2, "Domain-shift penalty table reproduced from the eight (RMSE, EVA) pairs")
def test_c02_penalty_table(record):
    worst = [0.0, 0.0, 0.0]
    for key, (match, mismatch) in RESULTS_TABLE.items():
        light, sensor = key
        m = EvalResult(1, match[0], match[1], light, sensor, f"{light}_BIASED")
        other = "NIGHT" if light == "DAY" else "DAY"
        mm = EvalResult(1, mismatch[0], mismatch[1], light, sensor, f"{other}_BIASED")
        p = domain_shift_penalty(m, mm)
        exp = PENALTY_TABLE[key]
        errs = (abs(p.d_rmse - exp[0]), abs(p.d_eva - exp[2]),
                max(abs(p.d_rmse_pct - exp[1]), abs(p.d_eva_pct - exp[3])))
        worst = [max(a, b) for a, b in zip(worst, errs)]
        assert errs[0] <= 0.02, key
        assert errs[1] <= 0.01, key
        assert errs[2] <= 0.5, key
    record["detail"] = (f"16 cells; max err RMSE {worst[0]:.3f}, EVA {worst[1]:.4f}, "
                        f"pct {worst[2]:.2f} pp")


# 3 ---------------------------------------------------------------------------

@criterion(3, "Absolute RMSE/EVA of trained models: not reproducible here, "
              "substituted by criteria 4-9")
def test_c03_substitution_stated(record):
    # Needs the original driving corpus and GPU training; no assertion beyond
    # recording the substitution.
    record["detail"] = "substitution recorded"


# 4 ---------------------------------------------------------------------------

@criterion(4, "Mean-predictor anchor: EVA = 0 and RMSE = population std")
def test_c04_mean_anchor(record):
    rng = np.random.default_rng(4)
    worst_eva, worst_rmse = 0.0, 0.0
    for _ in range(200):
        n = int(rng.integers(2, 5000))
        y = rng.normal(rng.uniform(-90, 90), rng.uniform(0.01, 120), n)
        model = mean_baseline_fit(y)
        y_hat = model.predict(n)
        e = abs(eva(y, y_hat))
        r = abs(rmse(y, y_hat) / math.sqrt(two_pass_var(y.tolist())) - 1)
        worst_eva, worst_rmse = max(worst_eva, e), max(worst_rmse, r)
    assert worst_eva <= 1e-9
    assert worst_rmse <= 1e-9
    record["detail"] = f"200 series; max |EVA| {worst_eva:.1e}, max RMSE rel err {worst_rmse:.1e}"


# 5 ---------------------------------------------------------------------------

@criterion(5, "Event-count conservation and window partition over 100 streams")
def test_c05_conservation(record):
    rng = np.random.default_rng(5)
    violations = 0
    total_events = 0
    sizes = np.unique(np.round(np.logspace(0, 6, 100)).astype(int))
    sizes = np.concatenate([sizes, rng.integers(1, 10**6, 100 - sizes.size)])
    assert sizes.size == 100 and sizes.max() == 10**6
    for n in sizes:
        n = int(n)
        t_max = int(rng.integers(1, 3_000_000))
        t = np.sort(rng.integers(0, t_max, n)) + int(rng.integers(0, 10**9))
        s = EventStream(346, 260, t, rng.integers(0, 346, n), rng.integers(0, 260, n),
                        rng.integers(0, 2, n))
        period = int(rng.choice([1_000, 10_000, 50_000, 200_000]))
        starts = window_starts(s, period)
        # independent window assignment by integer division
        expected = np.bincount((t - t[0]) // period, minlength=starts.size)
        covered = 0
        for k, t_start in enumerate(starts):
            h = accumulate_histograms(s, int(t_start), period)
            violations += h.total != expected[k]
            covered += h.total
        violations += covered != n
        frames = frame_recording(s, period)
        violations += len(frames) != starts.size
        total_events += n
    assert violations == 0
    record["detail"] = f"{total_events} events, 0 violations"


# 6 + 7 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("determinism")
    corpus = write_demo_corpus(root / "corpus", seed=6, duration_us=4_000_000, rate_hz=100_000)
    runs = {
        "a1": full_pipeline(corpus, root / "a1", seed=42, threads=1),
        "a2": full_pipeline(corpus, root / "a2", seed=42, threads=1),
        "b8": full_pipeline(corpus, root / "b8", seed=42, threads=8),
    }
    return runs


@criterion(6, "Determinism: pipeline twice with seed 42, --threads 1 vs 8, byte-identical")
def test_c06_determinism(record, pipeline_runs):
    digests = {k: tree_digest(v) for k, v in pipeline_runs.items()}
    ref = digests["a1"]
    n_frames = sum(1 for k in ref if k.endswith((".pgm", ".npy")))
    n_manifests = sum(1 for k in ref if k.endswith(".jsonl"))
    assert n_frames > 0 and n_manifests > 0
    diffs = sum(ref.get(k) != v for d in digests.values() for k, v in d.items())
    diffs += sum(set(ref) != set(d) for d in digests.values())
    assert diffs == 0
    record["detail"] = f"{n_manifests} manifests, {n_frames} frames x 3 runs, 0 diffs"


def _random_corpus(rng):
    samples = []
    for light in ("DAY", "NIGHT"):
        for r in range(int(rng.integers(1, 4))):
            for sensor in ("DVS", "APS"):
                n = int(rng.integers(1, 600))
                t = np.sort(rng.choice(50_000_000, n, replace=False))
                samples += [Sample(f"{light}{r}-{sensor}-{i}", f"{light}{r}", sensor, light,
                                   int(tt), steering_deg=0.0) for i, tt in enumerate(t)]
    return samples


def _check_bias(train, target):
    for sensor in {s.sensor for s in train}:
        tr = [s for s in train if s.sensor == sensor]
        n_t = sum(s.lighting == target for s in tr)
        n_o = len(tr) - n_t
        if n_t == 0:
            assert n_o == 0
        else:
            assert n_o / n_t <= 0.25 + 1 / n_t


@criterion(7, "No temporal leakage and opposite-lighting ratio <= 0.25 + 1/|target|")
def test_c07_no_leakage(record, pipeline_runs):
    rng = np.random.default_rng(7)
    biases = ["DAY_BIASED", "NIGHT_BIASED", "PURE_DAY", "PURE_NIGHT"]
    manifests = 0
    for i in range(50):
        bias = biases[i % 4]
        res = make_split(_random_corpus(rng), bias, seed=int(rng.integers(0, 2**63)))
        target = "DAY" if "DAY" in bias else "NIGHT"
        for light, test in res.tests.items():
            assert {s.lighting for s in test} <= {light}
            check_no_leakage(res.train, test)
        _check_bias(res.train, target)
        manifests += 1 + len(res.tests)
    # manifests emitted by the CLI runs
    split_dir = pipeline_runs["a1"] / "split"
    train = read_manifest(split_dir / "day.train.jsonl")
    for name in ("day.test.jsonl", "day.opposite.test.jsonl"):
        test = read_manifest(split_dir / name)
        assert len({s.lighting for s in test}) == 1
        check_no_leakage(train, test)
        manifests += 1
    _check_bias(train, "DAY")
    record["detail"] = f"50 randomized corpora + CLI output, {manifests + 1} manifests checked"


# 8 ---------------------------------------------------------------------------

def _rel_close(a, b, rel):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.all(np.abs(a - b) <= rel * np.maximum(np.abs(b), 1e-12) + 1e-15)


@criterion(8, "Oracle equivalence on 100 random small inputs per operation")
def test_c08_oracles(record):
    rng = np.random.default_rng(8)
    k = gaussian_kernel1d(3)
    k2 = np.outer(k, k)
    fails = {name: 0 for name in ("resize", "rotate", "blur", "jitter", "rmse", "eva", "stats")}
    for _ in range(100):
        h, w = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        a = rng.random((h, w))
        oh, ow = int(rng.integers(1, 13)), int(rng.integers(1, 13))
        fails["resize"] += not _rel_close(resize_bilinear(a, (oh, ow)),
                                          ref_bilinear(a.tolist(), oh, ow), 1e-6)
        theta = float(rng.uniform(-3, 3))
        fails["rotate"] += not _rel_close(rotate(a, theta), ref_rotate(a, theta), 1e-6)
        fails["blur"] += not _rel_close(gaussian_blur(a), ref_blur(a, k2), 1e-6)
        b, c = rng.uniform(0.8, 1.2, 2)
        fails["jitter"] += not _rel_close(color_jitter(a, b, c), ref_jitter(a, b, c), 1e-6)
        n = int(rng.integers(2, 200))
        y = rng.normal(0, 50, n)
        y_hat = y + rng.normal(0, 10, n)
        fails["rmse"] += not _rel_close(rmse(y, y_hat), fsum_rmse(y, y_hat), 1e-9)
        fails["eva"] += not abs(eva(y, y_hat) - fsum_eva(y, y_hat)) <= 1e-9 * max(
            1.0, abs(fsum_eva(y, y_hat)))
        frames = [rng.integers(0, 256, (h, w)).astype(np.uint8)
                  for _ in range(int(rng.integers(1, 5)))]
        st = sensor_stats(frames)
        flat = np.concatenate([f.ravel() for f in frames]).astype(float).tolist()
        fails["stats"] += not (_rel_close(st.mu, math.fsum(flat) / len(flat), 1e-9)
                               and _rel_close(st.sigma, math.sqrt(two_pass_var(flat)), 1e-9))
    assert sum(fails.values()) == 0, fails
    record["detail"] = "7 operations x 100 inputs, 0 mismatches"


# 9 ---------------------------------------------------------------------------

def _s(i, steer=20.0, speed=30.0):
    return Sample(f"b{i}", "r", "DVS", "DAY", i, steering_deg=steer, speed_kmh=speed)


@criterion(9, "Pruning boundaries and low-angle survivor fraction")
def test_c09_pruning(record):
    assert [s.sample_id for s in prune_low_speed([_s(0, speed=14.9), _s(1, speed=15.0)])] == ["b1"]
    # 4.99 is a random-prune candidate, 5.0 is exempt: exempt samples always survive
    exempt = [_s(i, steer=5.0) for i in range(1000)]
    assert prune_low_steering(exempt, seed=0) == exempt
    candidates = [_s(i, steer=4.99) for i in range(1000)]
    kept = prune_low_steering(candidates, seed=0)
    assert [s.sample_id for s in kept] == [s.sample_id for s in candidates
                                          if not ref_uniform(0, s.sample_id) < 0.7]
    assert len(kept) < 1000
    ext = prune_extreme_steering([_s(0, steer=180.0), _s(1, steer=180.1), _s(2, steer=-180.1)])
    assert [s.sample_id for s in ext] == ["b0"]
    pool = [_s(i, steer=float(v)) for i, v in
            enumerate(np.random.default_rng(9).uniform(-4.999, 4.999, 10_000))]
    frac = len(prune_low_steering(pool, seed=2024)) / len(pool)
    assert 0.28 <= frac <= 0.32
    record["detail"] = f"boundary table exact; survivor fraction {frac:.4f}"


# 10 --------------------------------------------------------------------------

@criterion(10, "Performance: 1e7-event framing < 10 s; demo corpus end-to-end < 60 s")
def test_c10_performance(record, tmp_path):
    rng = np.random.default_rng(10)
    n = 10_000_000
    t = np.sort(rng.integers(0, 20_000_000, n))
    s = EventStream(346, 260, t, rng.integers(0, 346, n), rng.integers(0, 260, n),
                    rng.integers(0, 2, n))
    save_evt(tmp_path / "big.evt", s)
    del s, t
    t0 = time.perf_counter()
    assert main(["frame", str(tmp_path / "big.evt"), "--out", str(tmp_path / "frames"),
                 "--threads", "1"]) == 0
    frame_s = time.perf_counter() - t0
    assert frame_s < 10

    t0 = time.perf_counter()
    corpus = write_demo_corpus(tmp_path / "demo", seed=1)
    full_pipeline(corpus, tmp_path / "run", seed=42, threads=1)
    e2e_s = time.perf_counter() - t0
    assert e2e_s < 60
    record["detail"] = f"framing {frame_s:.2f} s, end-to-end {e2e_s:.1f} s"
