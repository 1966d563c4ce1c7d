"""Synthetic stand-in with the Forest Fires CSV schema.

The real data file is not bundled. This generator writes a file with the
same header, token vocabulary and rough marginal shapes (many zero burned
areas, a heavy right tail) so ingestion and the preprocessing pipeline can be
exercised end to end. Numbers produced from it say nothing about the real
benchmark.
"""

from __future__ import annotations

import numpy as np

from .preprocess import DAYS, FOREST_FIRES_COLUMNS, MONTHS

_MONTH_WEIGHTS = np.array([2, 20, 54, 9, 2, 17, 32, 184, 172, 15, 1, 9], dtype=float)


def surrogate_forest_fires_csv(n=517, seed=0):
    rng = np.random.default_rng(seed)
    months = list(MONTHS)
    days = list(DAYS)
    month = rng.choice(12, size=n, p=_MONTH_WEIGHTS / _MONTH_WEIGHTS.sum())
    day = rng.integers(0, 7, size=n)
    summer = np.isin(month, [6, 7, 8]).astype(float)
    temp = np.clip(rng.normal(14 + 8 * summer, 4.5), 2.2, 33.3)
    rh = np.clip(rng.normal(55 - 0.8 * temp, 14), 15, 100).round()
    wind = np.clip(rng.gamma(4.0, 1.0, n), 0.4, 9.4).round(1)
    rain = np.where(rng.uniform(size=n) < 0.985, 0.0, rng.exponential(1.0, n).round(1))
    ffmc = np.clip(96 - rng.gamma(1.5, 3.0, n), 18.7, 96.2).round(1)
    dmc = np.clip(rng.normal(60 + 80 * summer, 50), 1.1, 291.3).round(1)
    dc = np.clip(rng.normal(300 + 350 * summer, 180), 7.9, 860.6).round(1)
    isi = np.clip(rng.gamma(3.0, 3.0, n), 0.0, 56.1).round(1)
    burn = rng.uniform(size=n) < 0.52
    log_area = rng.normal(0.9 + 0.04 * (temp - 19) + 0.05 * (wind - 4), 1.4)
    area = np.where(burn, np.expm1(np.maximum(log_area, 0.01)), 0.0).round(2)
    xs = rng.integers(1, 10, size=n)
    ys = rng.integers(2, 10, size=n)

    lines = [",".join(FOREST_FIRES_COLUMNS)]
    for i in range(n):
        lines.append(
            f"{xs[i]},{ys[i]},{months[month[i]]},{days[day[i]]},{ffmc[i]},{dmc[i]},{dc[i]},"
            f"{isi[i]},{temp[i]:.1f},{int(rh[i])},{wind[i]},{rain[i]},{area[i]}"
        )
    return "\n".join(lines) + "\n"


def write_surrogate_forest_fires(path, n=517, seed=0):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(surrogate_forest_fires_csv(n, seed))
