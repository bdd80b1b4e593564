#!/usr/bin/env python3
"""Sample-count sweep on the distant synthetic set: AUC as m runs from 5 to
105 in steps of 10, for the neural score models. Writes one CSV per kind."""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from leakdet import evaluation as ev
from leakdet.models import DcaeConfig, RealNvpConfig


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="sweep_results", help="output directory")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--kinds", nargs="+", default=["realnvp", "dcae"])
    parser.add_argument("--t-seconds", type=float, default=2.0)
    parser.add_argument("--h-minutes", type=float, default=5.0)
    parser.add_argument("--train-minutes", type=float, default=20.0)
    parser.add_argument("--n-per-class", type=int, default=8)
    parser.add_argument("--m-values", type=int, nargs="+",
                        default=list(ev.DEFAULT_SWEEP_M))
    args = parser.parse_args()

    configs = {
        "realnvp": RealNvpConfig(batch_size=256, epochs=50),
        "dcae": DcaeConfig(epochs=15),
    }
    started = time.time()
    trained = ev.train_models(args.kinds, args.t_seconds, args.seeds,
                              args.train_minutes, configs)

    def build(seed, h_minutes):
        return ev.build_distant_set(seed, args.n_per_class, h_minutes)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for kind in args.kinds:
        by_seed = {seed: trained[(kind, args.t_seconds, seed)] for seed in args.seeds}
        report = ev.sweep_m(kind, by_seed, build, args.h_minutes, args.t_seconds,
                            "median", args.m_values, args.seeds)
        path = out_dir / f"sweep_{kind}.csv"
        path.write_text(ev.sweep_csv(report, comments=[f"seeds = {args.seeds}"]))
        print(f"wrote {path}")
        for row in report.rows:
            print(f"  {kind} m={row.m}: {row.auc_mean:.3f} +- {row.auc_std:.3f}")
    print(f"done in {time.time() - started:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
