"""Command-line harness.

Verbs: ``convergence``, ``mnar``, ``da``, ``select`` (experiment runners),
``ot`` (one-shot two-step OT between two CSV datasets) and ``moments``
(one-shot debiased Gaussian summary of one CSV).  Every verb accepts
``--config`` (JSON overriding the experiment defaults), ``--seed``, ``--out``
and ``--threads``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import read_dataset_csv
from .discrete import coupling_edge_list, write_coupling_csv
from .gaussian import debiased_summary
from .moments import debiased_covariance
from .pipelines import (
    ConvergenceConfig,
    DaConfig,
    MnarConfig,
    SelectionBenchConfig,
    run_convergence,
    run_domain_adaptation,
    run_mnar_robustness,
    run_selection_benchmark,
    two_step_entropic_ot,
)

RUNNERS = {
    "convergence": (ConvergenceConfig, run_convergence),
    "mnar": (MnarConfig, run_mnar_robustness),
    "da": (DaConfig, run_domain_adaptation),
    "select": (SelectionBenchConfig, run_selection_benchmark),
}


def _load_config(cls, path: str | None, seed: int | None):
    overrides = {}
    if path:
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise SystemExit(f"unknown config fields for {cls.__name__}: {sorted(unknown)}")
    for f in dataclasses.fields(cls):
        if f.name in overrides and isinstance(f.default, tuple):
            overrides[f.name] = tuple(overrides[f.name])
    if seed is not None:
        overrides["seed"] = seed
    return cls(**overrides)


def _add_common(parser):
    parser.add_argument("--config", help="JSON file overriding the experiment defaults")
    parser.add_argument("--seed", type=int, default=None, help="seed override")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="replicate worker threads")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="otmiss", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common(p)

    p_ot = sub.add_parser("ot", help="two-step OT between two CSV datasets")
    _add_common(p_ot)
    p_ot.add_argument("--x", required=True, help="first dataset CSV (NA/empty = missing)")
    p_ot.add_argument("--y", required=True, help="second dataset CSV")
    p_ot.add_argument("--lambda-x", type=float, default=0.0)
    p_ot.add_argument("--lambda-y", type=float, default=0.0)
    p_ot.add_argument("--eps", type=float, default=0.0, help="entropic regularization (0 = exact)")
    p_ot.add_argument("--completer", choices=("isvt", "soft_impute"), default="isvt")
    p_ot.add_argument("--metric", help="optional CSV with the d x d cost metric")
    p_ot.add_argument("--edge-quantile", type=float, default=0.75,
                      help="keep coupling links at or above this mass quantile")
    p_ot.add_argument("--show-root", action="store_true",
                      help="also report the square root of the squared cost")

    p_mom = sub.add_parser("moments", help="debiased Gaussian summary of one CSV")
    _add_common(p_mom)
    p_mom.add_argument("--x", required=True, help="dataset CSV")
    p_mom.add_argument("--probs", help="optional CSV with one observation probability per feature")

    args = parser.parse_args(argv)

    if args.command in RUNNERS:
        cls, runner = RUNNERS[args.command]
        config = _load_config(cls, args.config, args.seed)
        target = runner(config, args.out, threads=args.threads)
        print(f"wrote {target}")
        return 0
    if args.command == "ot":
        return _cmd_ot(args)
    if args.command == "moments":
        return _cmd_moments(args)
    raise SystemExit(f"unknown command {args.command}")


def _cmd_ot(args) -> int:
    x, _ = read_dataset_csv(args.x)
    y, _ = read_dataset_csv(args.y)
    metric = None
    if args.metric:
        metric = np.loadtxt(args.metric, delimiter=",", skiprows=0, ndmin=2)
    result = two_step_entropic_ot(
        x, y, args.lambda_x, args.lambda_y, args.eps, M=metric, completer=args.completer
    )
    out = Path(args.out) / "ot"
    out.mkdir(parents=True, exist_ok=True)
    write_coupling_csv(out / "coupling.csv", result.solution.coupling)
    edges = coupling_edge_list(result.solution.coupling, args.edge_quantile)
    np.savetxt(out / "edges.csv", edges, delimiter=",", header="i,j,mass", comments="")
    payload = {
        "value": result.solution.value,
        "transport_cost": result.solution.transport_cost,
        "entropy": result.solution.entropy,
        "eps": args.eps,
        "converged": result.solution.converged,
        "iterations": result.solution.iterations,
        "lambda_x": args.lambda_x,
        "lambda_y": args.lambda_y,
    }
    if args.show_root:
        payload["root_value"] = math.sqrt(max(result.solution.value, 0.0))
    (out / "value.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(json.dumps(payload))
    return 0


def _cmd_moments(args) -> int:
    probs = None
    if args.probs:
        probs = np.loadtxt(args.probs, delimiter=",", ndmin=1)
    data, names = read_dataset_csv(args.x, probs=probs)
    raw = debiased_covariance(data)
    projected = debiased_summary(data)
    out = Path(args.out) / "moments"
    out.mkdir(parents=True, exist_ok=True)
    raw.to_json(out / "summary_raw.json")
    projected.to_json(out / "summary_psd.json")
    payload = {
        "features": names,
        "n": data.n,
        "psd_certified_raw": raw.psd_certified,
        "min_eigenvalue_raw": raw.min_eigenvalue(),
        "probs": data.probs.tolist(),
    }
    (out / "meta.json").write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(json.dumps(payload))
    return 0


if __name__ == "__main__":
    sys.exit(main())
