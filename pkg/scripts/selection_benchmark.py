#!/usr/bin/env python3
"""Completion-strength selection benchmarks: the lifted two-moons clouds with
asymmetric missingness (unregularized OT), the scaled two-cluster clouds
(entropic OT), and a local-CSV two-group mode."""

import argparse

import numpy as np

from otmiss.pipelines import SelectionBenchConfig, run_selection_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--csv", default="", help="two-group table for the dataset mode")
    ap.add_argument("--label-column", default="label")
    args = ap.parse_args()

    grid = tuple(np.logspace(-2, 2, 8 if args.quick else 20))
    runs = [
        SelectionBenchConfig(
            name="select_random_projection",
            mode="random_projection",
            replicates=3 if args.quick else 10,
            lambda_grid=grid,
            p_x=0.35,
            p_y=0.9,
            seed=args.seed,
        ),
        SelectionBenchConfig(
            name="select_two_cloud",
            mode="two_cloud",
            replicates=3 if args.quick else 10,
            lambda_grid=tuple(np.logspace(-2, 0.5, 6 if args.quick else 12)),
            eps=1.0,
            p=0.5,
            q=0.3,
            two_cloud_n=200,
            seed=args.seed,
        ),
    ]
    if args.csv:
        runs.append(
            SelectionBenchConfig(
                name="select_dataset",
                mode="dataset",
                csv_path=args.csv,
                label_column=args.label_column,
                replicates=5 if args.quick else 20,
                lambda_grid=tuple(np.logspace(-2, 2, 6 if args.quick else 10)),
                removal_prob_pos=0.7,
                removal_prob_neg=0.3,
                seed=args.seed,
            )
        )
    for config in runs:
        print("wrote", run_selection_benchmark(config, args.out, threads=args.threads))


if __name__ == "__main__":
    main()
