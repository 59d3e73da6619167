#!/usr/bin/env python3
"""Sweep the pruning ratio and report clean vs trigger accuracy.

Trains a source on well-separated blobs, builds a verified trigger set, then
prunes the least active neurons at ratios 0.0 .. 0.8 with no retraining.

Usage:
    python scripts/pruning_sweep.py [--seed N] [--out FILE.csv]
"""

import argparse
from dataclasses import replace

import proxymark as pm
from proxymark import attacks as atk
from proxymark.harness import derive_seed
from proxymark.watermark import ProxyBall, VerifyConfig, relative_delta


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None, help="optional CSV output path")
    args = parser.parse_args()
    seed = args.seed

    data = pm.make_blobs(4, 2, 150, 0.6, seed=derive_seed(seed, 10))
    train_data, holdout = pm.split(data, pm.SplitSpec(0.5, derive_seed(seed, 11)))
    spec = pm.ModelSpec(2, (32, 32), 4)
    cfg = pm.TrainConfig(epochs=100, seed=derive_seed(seed, 0))
    source = pm.train(spec, train_data, cfg)

    ball = ProxyBall(source, relative_delta(source, 0.2))
    vcfg = VerifyConfig(m=16, n=50, max_candidates=40_000, seed=derive_seed(seed, 1))
    trigger_set = pm.verify_trigger_set(holdout, source, ball, vcfg)
    eval_data = pm.make_blobs(4, 2, 250, 0.6, seed=derive_seed(seed, 88))

    lines = ["ratio,clean_acc,trigger_acc"]
    print(f"{'ratio':>6} {'clean':>8} {'trigger':>8}")
    for i in range(9):
        ratio = round(0.1 * i, 1)
        acfg = atk.AttackConfig(
            "prune", spec, train_data, replace(cfg, seed=derive_seed(seed, 2, 3, i)),
            prune_ratio=ratio,
        )
        pruned = atk.prune(source, acfg).surrogate
        clean = pm.accuracy(eval_data, pruned)
        trig = pm.trigger_accuracy(trigger_set, pruned)
        print(f"{ratio:>6.1f} {clean:>8.4f} {trig:>8.4f}")
        lines.append(f"{ratio},{clean!r},{trig!r}")

    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
