"""Bandit (BF) regret at horizons beyond the default suite.

With kappa just above its lower bound the step size is far smaller than
the full-information one, so regret stays in its linear transient over
short horizons.  This script prints local slopes between successive
horizons to show where sublinear growth sets in.

    python scripts/bf_long_horizon.py [--max-exp 17] [--trials 3]
"""

import argparse

import numpy as np

from dolr.experiment import ExperimentConfig, cmd_run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--max-exp", type=int, default=17)
    ap.add_argument("--trials", type=int, default=3)
    ap.add_argument("--kappa", type=float, default=None, help="override kappa (default 1.1 x threshold)")
    ap.add_argument("--out", default="runs/bf_long")
    args = ap.parse_args()
    algo = {"variant": "BF", "beta": 0.75}
    if args.kappa is not None:
        algo["kappa"] = args.kappa
    cfg = ExperimentConfig.from_dict(dict(
        graph={"family": "path", "n": 8},
        data={"mode": "oblivious", "m": 3, "alpha_h": 1.0, "alpha_z": 5.0, "sigma_noise": 0.1},
        algo=algo, horizons=[2 ** k for k in range(8, args.max_exp + 1)], trials=args.trials,
        master_seed=2, x_init=[0, 0, 0], write_traces=False, write_series=False))
    reg = cmd_run(cfg, args.out)["metrics"]["regret"]
    t, f = np.array(reg["horizons"], float), np.array(reg["final"])
    local = np.diff(np.log(np.maximum(f, 1e-12))) / np.diff(np.log(t))
    print(f"{'T':>8} {'regret':>12} {'local slope':>12}")
    for i, T in enumerate(reg["horizons"]):
        print(f"{T:>8} {f[i]:>12.2f} {'' if i == 0 else f'{local[i - 1]:.3f}':>12}")
    print(f"overall slope {reg.get('slope', float('nan')):.3f}")


if __name__ == "__main__":
    main()
