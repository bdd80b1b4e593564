#!/usr/bin/env python3
"""Desk-scale model-comparison grid: every score model on the close-proximity
and distant synthetic sets, mean AUC with std over seeds, one CSV per set.

Defaults run in minutes on a laptop; pass --full-horizons for the 30/60 min
segment variants (much slower).
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from leakdet import evaluation as ev
from leakdet.models import DcaeConfig, RealNvpConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="grid_results", help="output directory")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--kinds", nargs="+",
                        default=["gmm", "bgmm", "iforest", "realnvp", "dcae"])
    parser.add_argument("--t-seconds", type=float, default=2.0)
    parser.add_argument("--train-minutes", type=float, default=20.0)
    parser.add_argument("--n-per-class", type=int, default=8)
    parser.add_argument("--full-horizons", action="store_true",
                        help="use 30/60 min horizons instead of the 5 min desk default")
    args = parser.parse_args()

    h_values = [30.0, 60.0] if args.full_horizons else [5.0]
    m_values = [ev.scaled_m(h) for h in h_values]
    configs = {
        "realnvp": RealNvpConfig(batch_size=256, epochs=50),
        "dcae": DcaeConfig(epochs=15),
    }

    started = time.time()
    print(f"training {args.kinds} for seeds {args.seeds} ...", flush=True)
    trained = ev.train_models(args.kinds, args.t_seconds, args.seeds,
                              args.train_minutes, configs)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, builder in (("close", ev.build_close_set), ("distant", ev.build_distant_set)):
        def build(seed, h_minutes, _b=builder):
            return _b(seed, args.n_per_class, h_minutes)

        print(f"evaluating on the {name} set ...", flush=True)
        report = ev.run_grid(trained, build, h_values, [args.t_seconds], m_values,
                             "median", args.seeds)
        path = out_dir / f"grid_{name}.csv"
        path.write_text(ev.grid_csv(report, comments=[f"set = {name}",
                                                      f"seeds = {args.seeds}"]))
        print(f"wrote {path}")
        for row in report.rows:
            print(f"  {name} h={row.h_minutes}min t={row.t_seconds}s m={row.m} "
                  f"{row.model}: {row.auc_mean:.3f} +- {row.auc_std:.3f}")
    print(f"done in {time.time() - started:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
