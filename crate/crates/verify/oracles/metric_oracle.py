"""Reference q95 and error metrics for the acceptance fixture.

Writes metric_cases.json: 50 random cases, each with truth and prediction
matrices (sites x times) and the expected per-site q95 and metrics, computed
with numpy alone.

    python3 metric_oracle.py > metric_cases.json
"""

import json

import numpy as np

MIN_OBS = 20


def q95(values):
    if len(values) < MIN_OBS:
        return None
    return float(np.percentile(values, 95, method="linear"))


def metrics(pred, truth, q):
    e = pred - truth
    out = {
        "rmse": float(np.sqrt(np.mean(e**2))),
        "mae": float(np.mean(np.abs(e))),
        "mae_literal": float(np.mean(e**2)),
    }
    rows = [i for i, v in enumerate(q) if v is not None and v > 0]
    if rows:
        denom = np.array([q[i] for i in rows])[:, None]
        out["mape"] = float(100 * np.mean(np.abs(e[rows]) / denom))
        out["mape_literal"] = float(100 * np.mean(e[rows] ** 2 / denom))
    else:
        out["mape"] = 0.0
        out["mape_literal"] = 0.0
    out["mape_count"] = len(rows) * e.shape[1]
    return out


def main():
    rng = np.random.default_rng(20240101)
    cases = []
    for c in range(50):
        sites = int(rng.integers(1, 7))
        times = int(rng.integers(5, 300)) if c % 10 else int(rng.integers(2, MIN_OBS))
        truth = rng.uniform(0.0, 1.0, (sites, times))
        # over-capacity tails and repeated values
        truth[rng.uniform(size=truth.shape) < 0.05] = 1.1
        truth[rng.uniform(size=truth.shape) < 0.05] = 0.5
        if c % 7 == 3:
            truth[0, :] = 0.0
        pred = truth + rng.normal(0.0, 0.1, truth.shape)
        q = [q95(truth[i]) for i in range(sites)]
        cases.append(
            {
                "truth": truth.tolist(),
                "pred": pred.tolist(),
                "q95": q,
                "metrics": metrics(pred, truth, q),
            }
        )
    print(json.dumps({"generator": "numpy " + np.__version__, "cases": cases}))


if __name__ == "__main__":
    main()
