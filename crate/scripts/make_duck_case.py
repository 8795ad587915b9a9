#!/usr/bin/env python3
"""Regenerates cases/duck: a 24 h, 10-minute synthetic microgrid with a
duck-shaped prosumer net load. Deterministic; run from the repo root."""

import json
import math
from pathlib import Path

T, K = 24, 6
OUT = Path(__file__).resolve().parent.parent / "cases" / "duck"


def hour_of(t, k):
    return (t - 1) + (k - 0.5) / K


def solar(h, peak):
    if h < 6.0 or h > 19.0:
        return 0.0
    return peak * math.sin(math.pi * (h - 6.0) / 13.0) ** 2


def ripple(t, k, amp, phase):
    return amp * math.sin(2.1 * t + 1.7 * k + phase)


def microgrid_load(t, k):
    h = hour_of(t, k)
    base = 4.2 + 1.1 * math.exp(-((h - 8.5) / 2.0) ** 2) + 2.0 * math.exp(-((h - 19.5) / 2.2) ** 2)
    dip = -0.9 * math.exp(-((h - 3.5) / 2.5) ** 2)
    return round(min(7.0, max(3.0, base + dip + ripple(t, k, 0.15, 0.3))), 3)


def pv(t, k):
    return round(solar(hour_of(t, k), 2.4) * (0.92 + 0.08 * math.cos(3.3 * t + 2.0 * k)), 3)


def prosumer(t, k, scale, peak, phase):
    h = hour_of(t, k)
    demand = scale * (2.0 + 0.8 * math.exp(-((h - 8.0) / 2.0) ** 2) + 1.6 * math.exp(-((h - 19.0) / 2.0) ** 2))
    return round(demand - solar(h, peak) + ripple(t, k, 0.12, phase), 3)


PRICES = [32, 30, 28, 28, 30, 36, 44, 52, 50, 44, 38, 34,
          30, 28, 30, 36, 46, 62, 78, 80, 70, 56, 44, 36]


def write_series(name, fn):
    with open(OUT / name, "w") as f:
        f.write("t,k,value\n")
        for t in range(1, T + 1):
            for k in range(1, K + 1):
                f.write(f"{t},{k},{fn(t, k)}\n")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / "prices.csv", "w") as f:
        f.write("t,value\n")
        for t, p in enumerate(PRICES, 1):
            f.write(f"{t},{p}\n")
    write_series("load.csv", microgrid_load)
    write_series("pv.csv", pv)
    write_series("prosumer_a.csv", lambda t, k: prosumer(t, k, 1.0, 3.6, 0.0))
    write_series("prosumer_b.csv", lambda t, k: prosumer(t, k, 0.8, 3.0, 1.1))

    case = {
        "schema_version": 1,
        "name": "duck",
        "periods": T,
        "subperiods": K,
        "grid_exchange_max_mw": 10.0,
        "voll_per_mwh": 10000.0,
        "prices": "prices.csv",
        "islanding": {"consecutive_subperiods": 4, "base_probability": 0.9, "stride": 12},
        "flexibility": {"delta1_mw": 0.5, "delta2_mw": 2.0},
        "units": [
            {
                "id": "g1", "p_min_mw": 1.0, "p_max_mw": 5.0,
                "ramp_up_mw_per_h": 9.0, "ramp_down_mw_per_h": 9.0,
                "min_up_h": 3, "min_down_h": 2,
                "cost_curve": [[0.0, 40.0], [2.5, 152.5], [5.0, 302.5]],
                "initial_status_h": 5, "initial_power_mw": 2.0,
            },
            {
                "id": "g2", "p_min_mw": 0.5, "p_max_mw": 3.0,
                "ramp_up_mw_per_h": 6.0, "ramp_down_mw_per_h": 6.0,
                "min_up_h": 2, "min_down_h": 1,
                "cost_curve": [[0.0, 20.0], [3.0, 290.0]],
                "startup_cost": 0.0,
                "initial_status_h": -3, "initial_power_mw": 0.0,
            },
        ],
        "storages": [
            {
                "id": "ess", "charge_min_mw": 0.0, "charge_max_mw": 2.0,
                "discharge_min_mw": 0.0, "discharge_max_mw": 2.0,
                "energy_min_mwh": 0.6, "energy_max_mwh": 6.0, "initial_energy_mwh": 3.0,
                "efficiency": 0.9, "min_charge_h": 2, "min_discharge_h": 1,
                "terminal": "at-least-initial",
            }
        ],
        "adjustable_loads": [
            {
                "id": "ev", "d_min_mw": 0.5, "d_max_mw": 1.5,
                "start_hour": 10, "end_hour": 16, "energy_mwh": 4.0, "min_on_h": 2,
            }
        ],
        "series": [
            {"id": "load", "kind": "fixed-load", "file": "load.csv"},
            {"id": "pv", "kind": "nondispatchable-generation", "file": "pv.csv"},
            {"id": "prosumer-a", "kind": "prosumer-net-load", "file": "prosumer_a.csv"},
            {"id": "prosumer-b", "kind": "prosumer-net-load", "file": "prosumer_b.csv"},
        ],
    }
    with open(OUT / "case.json", "w") as f:
        json.dump(case, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()
