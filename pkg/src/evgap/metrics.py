"""Regression metrics, dataset statistics and domain-shift penalties."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np


class MetricError(ValueError):
    pass


def _pair(y, y_hat):
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.shape != y_hat.shape:
        raise MetricError(f"length mismatch: {y.size} vs {y_hat.size}")
    if y.size == 0:
        raise MetricError("empty series")
    return y, y_hat


def rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    d = y - y_hat
    # scale by the largest residual so tiny residuals do not underflow to 0 when squared
    scale = np.abs(d).max()
    if scale == 0:
        return 0.0
    return float(scale * np.sqrt(np.mean((d / scale) ** 2)))


def eva(y, y_hat) -> float:
    """Explained variance ``1 - Var(y_hat - y) / Var(y)``, population variances."""
    y, y_hat = _pair(y, y_hat)
    if y.size < 2:
        raise MetricError("explained variance needs at least two samples")
    var_y = np.var(y)
    if var_y == 0:
        raise MetricError("undefined: ground truth has zero variance")
    return float(1.0 - np.var(y_hat - y) / var_y)


def cohens_d(mu_day, sigma_day, mu_night, sigma_night) -> float:
    """Signed effect size with the equal-n pooled deviation; positive when day mean is larger."""
    pooled = math.sqrt((sigma_day**2 + sigma_night**2) / 2)
    if pooled == 0:
        raise MetricError("zero pooled standard deviation")
    return (mu_day - mu_night) / pooled


def rel_mean_change(mu_day, mu_night) -> float:
    """Percent change of the night mean relative to the day mean."""
    if mu_day == 0:
        raise MetricError("zero baseline mean")
    return 100.0 * (mu_night - mu_day) / mu_day


@dataclass
class SensorStats:
    mu: float
    sigma: float
    n: int


class StatsAccumulator:
    """Streaming mean/std over pixels of many frames.

    Integer frames are summed exactly (Python ints), so the result does not
    depend on frame order; float frames use float64 sums.
    """

    def __init__(self):
        self.n = 0
        self.s1 = 0
        self.s2 = 0

    def add(self, frame):
        a = np.asarray(frame)
        if np.issubdtype(a.dtype, np.integer):
            a = a.astype(np.int64)
            self.s1 += int(a.sum())
            self.s2 += int((a * a).sum())
        else:
            a = a.astype(np.float64)
            self.s1 += float(a.sum())
            self.s2 += float((a * a).sum())
        self.n += a.size

    def result(self) -> SensorStats:
        if self.n == 0:
            raise MetricError("no pixels accumulated")
        n, s1, s2 = self.n, self.s1, self.s2
        if isinstance(s1, int) and isinstance(s2, int):
            mu = Fraction(s1, n)
            var = Fraction(n * s2 - s1 * s1, n * n)
            return SensorStats(float(mu), math.sqrt(var), n)
        mu = s1 / n
        return SensorStats(mu, math.sqrt(max(s2 / n - mu * mu, 0.0)), n)


def sensor_stats(frames) -> SensorStats:
    """Mean and population std over every pixel of every frame."""
    acc = StatsAccumulator()
    for f in frames:
        acc.add(f)
    if acc.n == 0:
        raise MetricError("sensor_stats needs at least one non-empty frame")
    return acc.result()


@dataclass
class EvalResult:
    n: int
    rmse: float
    eva: Optional[float]
    lighting: Optional[str] = None
    sensor: Optional[str] = None
    train_bias: Optional[str] = None
    series: Optional[dict] = field(default=None, repr=False)

    @classmethod
    def compute(cls, y, y_hat, lighting=None, sensor=None, train_bias=None, t=None,
                keep_series=True):
        y, y_hat = _pair(y, y_hat)
        try:
            e = eva(y, y_hat)
        except MetricError:
            e = None
        series = None
        if keep_series:
            series = {"y": y.tolist(), "y_hat": y_hat.tolist()}
            if t is not None:
                series["t"] = [int(v) for v in t]
        return cls(int(y.size), rmse(y, y_hat), e, lighting, sensor, train_bias, series)

    def to_dict(self):
        d = asdict(self)
        if d["series"] is None:
            del d["series"]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def bias_lighting(train_bias: str) -> str:
    """Lighting a training bias label targets: ``DAY_BIASED`` / ``PURE_DAY`` -> ``DAY``."""
    for light in ("DAY", "NIGHT"):
        if light in train_bias.upper():
            return light
    raise MetricError(f"cannot infer lighting from train bias {train_bias!r}")


@dataclass
class DomainShiftPenalty:
    lighting: Optional[str]
    sensor: Optional[str]
    d_rmse: float
    d_rmse_pct: Optional[float]
    d_eva: float
    d_eva_pct: Optional[float]


def domain_shift_penalty(match: EvalResult, mismatch: EvalResult) -> DomainShiftPenalty:
    """``mismatch - match`` within one test condition, with percentages of the matched value."""
    if (match.lighting, match.sensor) != (mismatch.lighting, mismatch.sensor):
        raise MetricError(
            f"label mismatch: {match.lighting}/{match.sensor} vs "
            f"{mismatch.lighting}/{mismatch.sensor}"
        )
    d_rmse = mismatch.rmse - match.rmse
    d_eva = mismatch.eva - match.eva
    return DomainShiftPenalty(
        match.lighting,
        match.sensor,
        d_rmse,
        100.0 * d_rmse / match.rmse if match.rmse > 0 else None,
        d_eva,
        100.0 * d_eva / match.eva if match.eva != 0 else None,
    )


def penalty_table(results: Sequence[EvalResult]) -> list[DomainShiftPenalty]:
    """Pair matched/mismatched results per (lighting, sensor), ordered DAY before NIGHT."""
    groups = {}
    for r in results:
        if r.train_bias is None:
            raise MetricError("eval result without train_bias label")
        kind = "match" if bias_lighting(r.train_bias) == r.lighting else "mismatch"
        slot = groups.setdefault((r.lighting, r.sensor), {})
        if kind in slot:
            raise MetricError(f"duplicate {kind} result for {r.lighting}/{r.sensor}")
        slot[kind] = r
    order = {"DAY": 0, "NIGHT": 1, "DVS": 0, "APS": 1}
    rows = []
    for key in sorted(groups, key=lambda k: (order.get(k[0], 9), order.get(k[1], 9), k)):
        slot = groups[key]
        if len(slot) == 2:
            rows.append(domain_shift_penalty(slot["match"], slot["mismatch"]))
    return rows


class MeanPredictor:
    def __init__(self, mean: float):
        self.mean = float(mean)

    def __call__(self, x=None):
        n = 1 if x is None else len(x)
        return np.full(n, self.mean)

    def predict(self, n: int) -> np.ndarray:
        return np.full(n, self.mean)


def mean_baseline_fit(train_y) -> MeanPredictor:
    y = np.asarray(train_y, dtype=np.float64)
    if y.size == 0:
        raise MetricError("cannot fit on an empty series")
    return MeanPredictor(y.mean())
