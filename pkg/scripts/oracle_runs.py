"""Seeded oracle runs behind the frozen acceptance thresholds.

Prints the RK4 halving ratio, forecast NRMSE per horizon, regime flip steps,
cross-map skill curves and noise L-index values over 20 seeds.
"""

import argparse
import json

import numpy as np

from dynhtm.experiments import ccm_asymmetry, forecast_nrmse, noise_l_index, regime_trial, rk4_halving_ratio

HORIZONS = (1, 5, 10, 25, 50)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--json", help="also write the numbers to this file")
    args = parser.parse_args()
    seeds = range(args.seeds)

    nrmse = np.array([[forecast_nrmse(s, h) for h in HORIZONS] for s in seeds])
    trials = [regime_trial(s) for s in seeds]
    curves = [ccm_asymmetry(s) for s in seeds]
    noise = [noise_l_index(s) for s in seeds]
    result = {
        "rk4_ratio": rk4_halving_ratio(),
        "nrmse_mean": dict(zip(map(str, HORIZONS), nrmse.mean(axis=0).tolist())),
        "nrmse_1step_worst": float(nrmse[:, 0].max()),
        "regime_flip_steps": [t.flip_step for t in trials],
        "regime_before_switch": [t.before for t in trials],
        "ccm_library_sizes": curves[0][0].library_sizes.tolist(),
        "ccm_driving_mean": np.mean([d.skill for d, _ in curves], axis=0).tolist(),
        "ccm_reverse_mean": np.mean([r.skill for _, r in curves], axis=0).tolist(),
        "ccm_wins": int(sum(d.skill[-1] > r.skill[-1] for d, r in curves)),
        "noise_l_max": float(max(max(abs(r.l_xy), abs(r.l_yx)) for r in noise)),
    }
    for key, value in result.items():
        if isinstance(value, dict):
            value = {k: round(v, 4) for k, v in value.items()}
        elif isinstance(value, float):
            value = round(value, 4)
        elif value and isinstance(value[0], float):
            value = np.round(value, 3).tolist()
        print(f"{key:22s} {value}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
