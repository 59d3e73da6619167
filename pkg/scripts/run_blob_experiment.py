#!/usr/bin/env python3
"""Run the full watermarking pipeline from a YAML config and print a summary.

Usage:
    python scripts/run_blob_experiment.py [--config configs/blob_default.yaml]
                                          [--seed N] [--out DIR]
"""

import argparse
from pathlib import Path

from proxymark.config import ExperimentConfig, load_config
from proxymark.harness import run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/blob_default.yaml")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    cfg = load_config(args.config) if Path(args.config).exists() else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.output_dir = args.out

    report = run_experiment(cfg)
    print((Path(cfg.output_dir) / "summary.txt").read_text())


if __name__ == "__main__":
    main()
