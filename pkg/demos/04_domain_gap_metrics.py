"""Day/night domain-gap statistics.

Recomputes the sensor effect sizes from published day/night pixel statistics,
the domain-shift penalty table from published (RMSE, EVA) results, and checks
that a mean predictor scores EVA = 0.

    python demos/04_domain_gap_metrics.py
"""
import numpy as np

from evgap.metrics import (EvalResult, cohens_d, eva, mean_baseline_fit, penalty_table,
                           rel_mean_change, rmse)
from evgap.report import penalty_markdown

# %% pixel statistics (mu, sigma) by sensor: day, night
stats = {"DVS": ((111.6, 35.7), (103.8, 24.4)), "APS": ((159.6, 83.8), (13.9, 40.5))}
for sensor, ((md, sd), (mn, sn)) in stats.items():
    print(f"{sensor}: dmu {rel_mean_change(md, mn):+.1f}%  Cohen's d {cohens_d(md, sd, mn, sn):.2f}")

# %% penalty table from test-condition x sensor x training-bias results
table = [
    ("DAY", "DVS", "DAY_BIASED", 11.60, 0.698), ("DAY", "DVS", "NIGHT_BIASED", 17.30, 0.327),
    ("DAY", "APS", "DAY_BIASED", 16.49, 0.388), ("DAY", "APS", "NIGHT_BIASED", 19.19, 0.172),
    ("NIGHT", "DVS", "DAY_BIASED", 11.81, 0.685), ("NIGHT", "DVS", "NIGHT_BIASED", 8.10, 0.852),
    ("NIGHT", "APS", "DAY_BIASED", 18.07, 0.263), ("NIGHT", "APS", "NIGHT_BIASED", 12.55, 0.645),
]
results = [EvalResult(0, r, e, light, sensor, bias) for light, sensor, bias, r, e in table]
print(penalty_markdown(penalty_table(results)))

# %% the mean predictor is the EVA = 0 reference point
y = np.random.default_rng(0).normal(0, 25, 1000)
model = mean_baseline_fit(y)
print(f"mean predictor: RMSE {rmse(y, model.predict(y.size)):.3f} "
      f"(std {y.std():.3f}), EVA {eva(y, model.predict(y.size)):.1e}")
