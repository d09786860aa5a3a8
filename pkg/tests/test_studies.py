"""Conservation battery behind the verify-conservation subcommand."""

import numpy as np

from sbq.studies import run_conservation_battery, stationarity_study


def test_stationarity_short_horizon():
    out = stationarity_study(T=1.0)
    assert out["pass"]
    assert out["final_l2_defect"] <= 1e-10


def test_fast_battery_passes():
    report = run_conservation_battery(fast=True)
    assert report["pass"], report
    ratios = report["conservation_order"]["ratios"]
    # quadratic invariant refines at order 3, the others at order 2
    assert all(6.8 <= r <= 9.2 for r in ratios["enstrophy2_defect"]["values"])
    assert all(3.4 <= r <= 4.6 for r in ratios["enstrophy4_defect"]["values"])
    assert all(3.4 <= r <= 4.6 for r in ratios["ke_balance_residual"]["values"])
    gronwall = report["conservation_order"]["gronwall"]
    assert all(np.isfinite(v) for v in gronwall["ratios"].values())
