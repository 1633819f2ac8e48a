"""Generate the bundled synthetic daily demand panel.

Drift-free by construction: per-series level, a weekly profile, and
stationary AR(1) noise, so retraining frequency should barely move point
accuracy. Rerun to regenerate data/synthetic/ deterministically.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

N_SERIES = 24
N_OBS = 280
SEED = 20240811

STORES = ("store_a", "store_b", "store_c")
CATEGORIES = ("food", "household")


def make_panel(seed: int = SEED) -> tuple[pd.DataFrame, pd.DataFrame]:
    rng = np.random.default_rng(seed)
    dates = pd.date_range("2023-01-02", periods=N_OBS, freq="D")
    dow = dates.dayofweek.to_numpy()

    frames = []
    statics = []
    for i in range(N_SERIES):
        sid = f"sku_{i:03d}"
        level = rng.uniform(25.0, 70.0)
        profile = rng.uniform(-4.0, 4.0, size=7)
        profile -= profile.mean()
        amp = rng.uniform(0.8, 2.0)
        sigma = rng.uniform(1.0, 2.5)
        ar = np.empty(N_OBS)
        eps = rng.normal(0.0, sigma, size=N_OBS)
        ar[0] = eps[0]
        for t in range(1, N_OBS):
            ar[t] = 0.5 * ar[t - 1] + eps[t]
        y = level + amp * profile[dow] + ar
        y = np.clip(y, 0.0, None)
        frames.append(pd.DataFrame({
            "unique_id": sid,
            "ds": dates.strftime("%Y-%m-%d"),
            "y": np.round(y, 3),
        }))
        statics.append({
            "unique_id": sid,
            "store": STORES[i % len(STORES)],
            "category": CATEGORIES[i % len(CATEGORIES)],
        })
    return pd.concat(frames, ignore_index=True), pd.DataFrame(statics)


def main() -> None:
    out = Path(__file__).resolve().parents[1] / "data" / "synthetic"
    out.mkdir(parents=True, exist_ok=True)
    panel, statics = make_panel()
    panel.to_csv(out / "panel.csv", index=False)
    statics.to_csv(out / "statics.csv", index=False)
    print(f"wrote {len(panel)} rows for {statics.shape[0]} series to {out}")


if __name__ == "__main__":
    main()
