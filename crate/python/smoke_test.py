"""Smoke test for the compiled extension.

Build and install first:
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/longidose-*.whl
"""

import json
import math
import os
import sys
import tempfile

import longidose


def check(cond, what):
    if not cond:
        sys.exit(f"FAIL: {what}")
    print(f"ok   {what}")


def main():
    panel = longidose.simulate_panel(1, seed=3, replicate=1)
    check(panel.n_units == 100 and panel.n_rows == 1000, "example 1 panel has 100 units x 10 times")
    check(panel.covariate_names == ["x1", "x2"], "covariates are x1, x2")

    cfg = {"method": "cov", "resampler": "bb", "n_draws": 60, "dose_grid": [3.0, 4.0, 5.0], "seed": 9}
    post = longidose.posterior_apo(panel, json.dumps(cfg))
    check(len(post["samples"]) == 60 and not post["failures"], "60 BB draws, no failures")
    for row in post["summary"]:
        truth = longidose.true_apo(1, row["dose"])
        check(abs(row["mean"] - truth) < 0.15, f"dose {row['dose']}: mean {row['mean']:.3f} near truth {truth:.3f}")
        check(row["q025"] <= row["median"] <= row["q975"], f"dose {row['dose']}: ordered quantiles")
    again = longidose.posterior_apo(panel, json.dumps(cfg))
    check(again["samples"] == post["samples"], "same seed gives identical draws")

    dp = dict(cfg, method="wor", resampler="dp", n_draws=20, j_target=200, gps_kind="random_intercept")
    post = longidose.posterior_apo(panel, json.dumps(dp))
    check(len(post["summary"]) == 3, "WOR-DP posterior runs")

    counts = longidose.simulate_panel(2, seed=4)
    check(counts.family == "poisson_log", "example 2 is a count panel")
    try:
        longidose.posterior_apo(counts, json.dumps(cfg))
        check(False, "family mismatch raises")
    except longidose.LongidoseError as e:
        check("family" in str(e), "family mismatch raises LongidoseError")
    try:
        longidose.posterior_apo(panel, json.dumps({"n_draw": 3}))
        check(False, "unknown config key raises")
    except ValueError:
        check(True, "unknown config key raises ValueError")

    rows = longidose.run_simulation(1, 3, json.dumps(dict(cfg, n_draws=30)), seed=5, n=40)
    check([r["dose"] for r in rows] == [3.0, 4.0, 5.0] and rows[0]["R"] == 3, "3-replicate simulation report")

    knots, (lo, hi), design = longidose.bspline_design([i / 50 for i in range(51)], 2)
    check(len(knots) == 2 and (lo, hi) == (0.0, 1.0), "spline knots and boundary")
    check(all(len(r) == 5 for r in design), "design drops the first of 6 basis columns")

    x = [[1.0, v] for v in (0.0, 1.0, 2.0, 3.0)]
    fit = longidose.fit_gee(x, [1.0, 3.0, 5.0, 7.0])
    check(all(abs(a - b) < 1e-10 for a, b in zip(fit["coefficients"], [1.0, 2.0])), "GEE recovers an exact line")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "p.csv")
        with open(path, "w") as f:
            f.write("id,t,y,d,z\n")
            for u in range(4):
                for t in range(1, 4):
                    f.write(f"u{u},{t},{u + t},{math.e ** (u * 0.1 + t)},{t * 0.5}\n")
        csv_panel = longidose.Panel.from_csv(path, ["z"], unit_id="id", time="t", outcome="y", dose="d")
        logged = csv_panel.transform("dose", "log")
        check(abs(logged.doses()[0] - 1.0) < 1e-12, "CSV load and log dose")
    rows_panel = longidose.Panel.from_rows(["b", "a", "b"], [2, 1, 1], [1.0, 2.0, 3.0], [0.1, 0.2, 0.3], [[0.0]] * 3, ["c"])
    check(rows_panel.n_units == 2 and rows_panel.outcomes() == [3.0, 1.0, 2.0], "from_rows groups by unit and sorts by time")
    print("smoke test passed")


if __name__ == "__main__":
    main()
