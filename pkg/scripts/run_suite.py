"""Run every checked-in config and print one line of fitted exponents per experiment.

    python scripts/run_suite.py [--out runs] [--only fif_sublinear,fif_exact] [--threads N]
"""

import argparse
import time
from pathlib import Path

from dolr.experiment import ExperimentConfig, cmd_run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs")
    ap.add_argument("--only", default="")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    names = [n for n in args.only.split(",") if n] or sorted(p.stem for p in CONFIGS.glob("*.json"))
    for name in names:
        cfg = ExperimentConfig.load(CONFIGS / f"{name}.json")
        start = time.perf_counter()
        summary = cmd_run(cfg, Path(args.out) / name, args.threads)
        fits = "  ".join(f"{k}: {v['slope']:.3f} (r2 {v['r_squared']:.2f})"
                         for k, v in sorted(summary["metrics"].items()) if "slope" in v)
        print(f"{name:16s} {time.perf_counter() - start:7.1f}s  {fits}")


if __name__ == "__main__":
    main()
