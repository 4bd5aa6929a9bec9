"""Extrapolation study: train on 256 tokens, roll out 512, compare against
persistence and the no-rotation/no-decay baseline.

    python3 scripts/run_extrapolation.py [--seeds 0,1,2] [--out runs/extrapolation]
"""

import argparse
import os
import sys

import numpy as np

from tsgpt.experiments import (
    TRAIN_TOKENS,
    ROLLOUT_TOKENS,
    _train_and_rollout,
    extrapolation_experiment,
)
from tsgpt.svgplot import line_plot_svg


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--out", default="runs/extrapolation")
    args = ap.parse_args()
    seeds = tuple(int(s) for s in args.seeds.split(","))

    result = extrapolation_experiment(seeds=seeds)
    print(f"{'seed':>4}  {'model':>8}  {'vanilla':>8}  {'persistence':>11}")
    for r in result.runs:
        print(f"{r.seed:>4}  {r.model_mae:8.4f}  {r.vanilla_mae:8.4f}  {r.persistence_mae:11.4f}")
    print(
        f"medians: model {result.model_median:.4f}, vanilla {result.vanilla_median:.4f}, "
        f"persistence {result.persistence_median:.4f}"
    )
    print(
        f"margin vs persistence {result.margin_vs_persistence():+.1%}, "
        f"vs vanilla {result.margin_vs_vanilla():+.1%}"
    )

    # plot one rollout for the first seed
    os.makedirs(args.out, exist_ok=True)
    _, _, model, preds, truth = _train_and_rollout("full", seeds[0], n_train=64, epochs=50)
    t_fc = TRAIN_TOKENS + np.arange(ROLLOUT_TOKENS)
    svg = line_plot_svg(
        [
            ("truth", t_fc, truth[0, :, 0], "#2e86c1", True),
            ("forecast", t_fc, preds[0, :, 0], "#c0392b", False),
        ],
        vline=float(TRAIN_TOKENS),
        title=f"rollout 2x past training length (seed {seeds[0]})",
    )
    path = os.path.join(args.out, "rollout.svg")
    with open(path, "w") as fh:
        fh.write(svg)
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
