#!/usr/bin/env python3
"""Robustness of the debiased BW estimator to contaminated (self-masking)
missingness, over a (contamination share, MCAR probability) grid."""

import argparse

from otmiss.pipelines import MnarConfig, run_mnar_robustness


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()

    config = MnarConfig(
        n=200 if args.quick else 500,
        replicates=5 if args.quick else 20,
        mean_shift=-1.5,
        seed=args.seed,
    )
    print("wrote", run_mnar_robustness(config, args.out, threads=args.threads))


if __name__ == "__main__":
    main()
