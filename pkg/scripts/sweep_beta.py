"""Regret and violation exponents of the full-information constrained variant across beta.

Theory predicts regret ~ T^max(beta, 1 - beta) and violation ~ T^(1 - beta/2).

    python scripts/sweep_beta.py [--betas 0.3,0.4,0.5,0.6,0.7] [--seed 1]
"""

import argparse

from dolr.experiment import ExperimentConfig, cmd_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--betas", default="0.3,0.4,0.5,0.6,0.7")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", default="runs/sweep_beta")
    args = ap.parse_args()
    cfg = ExperimentConfig.from_dict(dict(
        graph={"family": "path", "n": 5},
        data={"mode": "oblivious", "m": 3, "alpha_h": 1.0, "alpha_z": 5.0, "sigma_noise": 0.1},
        algo={"variant": "FIFC", "c": 2.0, "R": 2.0, "constraints": {"s": 3, "bound": 1.0}},
        horizons=[2 ** k for k in range(8, 15)], master_seed=args.seed, x_init=[0, 0, 0],
        write_traces=False, write_series=False))
    rows = cmd_sweep(cfg, "algo.beta", [float(v) for v in args.betas.split(",")], args.out)
    by = {(r["value"], r["metric"]): r["slope"] for r in rows}
    print(f"{'beta':>5} {'regret':>7} {'max(b,1-b)':>10} {'cv':>7} {'1-b/2':>6}")
    for b in sorted({r["value"] for r in rows}):
        print(f"{b:>5.2f} {by[(b, 'regret')]:>7.3f} {max(b, 1 - b):>10.2f} {by[(b, 'cv')]:>7.3f} {1 - b / 2:>6.2f}")


if __name__ == "__main__":
    main()
