"""Final FIF regret on path graphs of growing size; regret should grow with n.

    python scripts/sweep_network_size.py [--sizes 4,8,16,32]
"""

import argparse

from dolr.experiment import ExperimentConfig, cmd_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="4,8,16,32")
    ap.add_argument("--out", default="runs/sweep_n")
    args = ap.parse_args()
    cfg = ExperimentConfig.from_dict(dict(
        graph={"family": "path", "n": 4},
        data={"mode": "oblivious", "m": 3, "alpha_h": 1.0, "alpha_z": 5.0, "sigma_noise": 0.1},
        algo={"variant": "FIF", "beta": 0.75},
        horizons=[256, 512, 1024, 2048, 4096], master_seed=0, write_traces=False, write_series=False))
    rows = cmd_sweep(cfg, "graph.n", [int(v) for v in args.sizes.split(",")], args.out)
    print(f"{'n':>4} {'final regret':>14} {'slope':>7}")
    for r in rows:
        if r["metric"] == "regret":
            print(f"{r['value']:>4} {r['final']:>14.2f} {r['slope']:>7.3f}")


if __name__ == "__main__":
    main()
