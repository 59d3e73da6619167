#!/usr/bin/env python3
"""Stolen-vs-independent separation study on overlapping blobs.

For each seed: train a memorizing source on a heavy-overlap 4-class mixture,
verify a trigger set against 16 frozen proxies, distill a surrogate from a
wide query sample of the source, and fit four independent controls on fresh
half-size draws. Prints per-seed trigger accuracies and ownership verdicts.

Usage:
    python scripts/separation_study.py [--seeds N]
"""

import argparse
from dataclasses import replace

import numpy as np

import proxymark as pm
from proxymark import attacks as atk
from proxymark.errors import DegenerateRuleError
from proxymark.harness import derive_seed
from proxymark.watermark import ProxyBall, VerifyConfig, relative_delta


def run_seed(seed: int):
    K, dim, spread, per_class = 4, 2, 3.0, 30
    data = pm.make_blobs(K, dim, per_class, spread, seed=derive_seed(seed, 10))
    train_data, holdout = pm.split(data, pm.SplitSpec(0.5, derive_seed(seed, 11)))
    spec = pm.ModelSpec(dim, (64, 64), K)
    cfg = pm.TrainConfig(epochs=600, weight_decay=0.0, seed=derive_seed(seed, 0))
    source = pm.train(spec, train_data, cfg)

    ball = ProxyBall(source, relative_delta(source, 0.2))
    vcfg = VerifyConfig(m=16, n=50, max_candidates=40_000, seed=derive_seed(seed, 1))
    trigger_set = pm.verify_trigger_set(holdout, source, ball, vcfg)

    query = pm.make_blobs(K, dim, 300, 3.5, seed=derive_seed(seed, 77))
    attack = atk.AttackConfig(
        "soft_label", spec, query, replace(cfg, seed=derive_seed(seed, 2, 0, 0))
    )
    surrogate_acc = pm.trigger_accuracy(trigger_set, atk.steal_soft(source, attack).surrogate)

    ind_per_class = max(train_data.n // (2 * K), 1)
    ind_accs = []
    for k in range(4):
        ind_data = pm.make_blobs(K, dim, ind_per_class, spread, seed=derive_seed(seed, 3, k))
        g = pm.train(spec, ind_data, replace(cfg, seed=derive_seed(seed, 3, k, 1)))
        ind_accs.append(pm.trigger_accuracy(trigger_set, g))
    return surrogate_acc, ind_accs


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=5)
    args = parser.parse_args()

    p_hat = pm.clopper_pearson_lower(16, 16, 0.05)
    gaps = []
    for seed in range(args.seeds):
        surrogate_acc, ind_accs = run_seed(seed)
        baseline = float(np.mean(ind_accs))
        gaps.append(surrogate_acc - baseline)
        try:
            verdict = pm.ownership_verdict(surrogate_acc, baseline, p_hat)[0].value
        except DegenerateRuleError:
            verdict = "degenerate"
        print(
            f"seed {seed}: surrogate {surrogate_acc:.2f} ({verdict}), "
            f"independents {' '.join(f'{t:.2f}' for t in ind_accs)} "
            f"(baseline {baseline:.2f})"
        )
    print(f"mean surrogate - independent gap: {np.mean(gaps):+.3f}")


if __name__ == "__main__":
    main()
