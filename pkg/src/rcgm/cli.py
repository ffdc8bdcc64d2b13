"""Command line entry points.

Subcommands: calibrate (priors only), fit (full posterior on a data
file), simulate (emit a synthetic dataset with ground truth), benchmark
(replicated robust-versus-gaussian comparison), and summarize
(recompute edge summaries from saved accumulators at a new level).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .calibration import calibrate
from .dataio import (
    build_dataset,
    format_float,
    read_posterior_json,
    write_data_csv,
    write_edges_csv,
    write_json,
    write_layer_csv,
    write_posterior_json,
    write_trace,
)
from .model import directed_pairs, undirected_pairs
from .numerics import MixingDistribution, exponential_mixing
from .posterior import summarize
from .sampler import SamplerConfig, run_chain
from .simulation import BenchmarkConfig, SimulationConfig, run_benchmark, simulate_dataset

__all__ = ["main", "parse_mixing"]


def parse_mixing(spec):
    """Parse a mixing distribution spec: exp:MEAN, gamma:SHAPE,SCALE, or
    invgamma:SHAPE,SCALE."""
    kind, _, rest = spec.partition(":")
    try:
        vals = [float(p) for p in rest.split(",")] if rest else []
    except ValueError:
        raise ValueError(f"bad mixing parameters in {spec!r}") from None
    kind = kind.strip().lower()
    if kind in ("exp", "exponential") and len(vals) == 1:
        return exponential_mixing(vals[0])
    if kind == "gamma" and len(vals) == 2:
        return MixingDistribution("gamma", vals[0], vals[1])
    if kind in ("invgamma", "inverse_gamma") and len(vals) == 2:
        return MixingDistribution("inverse_gamma", vals[0], vals[1])
    raise ValueError(f"cannot parse mixing spec {spec!r} "
                     "(expected exp:m, gamma:a,s, or invgamma:a,b)")


def _outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _calibration_payload(calib, names):
    return calib.to_dict(list(names))


def cmd_calibrate(args):
    dataset = build_dataset(args.data, args.layers).standardized_copy()
    calib = calibrate(dataset)
    out = _outdir(args.out)
    write_json(os.path.join(out, "calibration.json"),
               _calibration_payload(calib, dataset.layer_map.names))
    print(f"calibrated {dataset.layer_map.n_nodes} nodes -> "
          f"{os.path.join(out, 'calibration.json')}")
    return 0


def cmd_fit(args):
    dataset = build_dataset(args.data, args.layers).standardized_copy()
    out = _outdir(args.out)
    gaussian = args.mode == "gaussian"
    calib = None
    h = None
    if not gaussian:
        calib = calibrate(dataset)
        h = calib.h
        write_json(os.path.join(out, "calibration.json"),
                   _calibration_payload(calib, dataset.layer_map.names))
    cfg = SamplerConfig(burnin=args.burnin, samples=args.samples, thin=args.thin,
                        seed=args.seed, gaussian_mode=gaussian,
                        keep_trace=args.trace)
    post = run_chain(dataset, cfg, calib)
    summary = summarize(post, alpha=args.alpha, threshold=args.threshold, h=h)
    write_edges_csv(os.path.join(out, "edges.csv"), summary)
    meta = {
        "command": "fit", "mode": args.mode, "seed": args.seed,
        "burnin": args.burnin, "samples": args.samples, "thin": args.thin,
        "n": dataset.n, "q": dataset.layer_map.n_nodes,
        "retained": post.retained, "diagnostics": post.diagnostics,
    }
    write_json(os.path.join(out, "summary.json"),
               {"run": meta, **summary.to_dict()})
    write_posterior_json(os.path.join(out, "posterior.json"), post, h)
    if args.trace:
        write_trace(os.path.join(out, "trace.ndjson"), post.trace,
                    dataset.layer_map)
    print(f"fit: {summary.n_selected} edges selected "
          f"({summary.rule} rule, threshold {summary.threshold:.6g}) -> {out}")
    return 0


def cmd_simulate(args):
    sim = SimulationConfig(q=args.q, n_layers=args.layers, n=args.n,
                           edge_prob=args.pe, contamination=args.pi,
                           mixing=parse_mixing(args.mixing), seed=args.seed)
    params, dataset, _ = simulate_dataset(sim)
    lm = params.layer_map
    out = _outdir(args.out)
    write_data_csv(os.path.join(out, "data.csv"), lm.names, dataset.x)
    write_layer_csv(os.path.join(out, "layers.csv"), lm)
    edges = []
    for (u, v) in directed_pairs(lm):
        if params.b[v, u] != 0.0:
            edges.append({"u": lm.names[u], "v": lm.names[v],
                          "type": "directed", "value": params.b[v, u]})
    for (u, v) in undirected_pairs(lm):
        l = lm.layer_of[u]
        s, _ = lm.members(l)
        val = params.precision_blocks[l][u - s, v - s]
        if val != 0.0:
            edges.append({"u": lm.names[u], "v": lm.names[v],
                          "type": "undirected", "value": val})
    write_json(os.path.join(out, "truth.json"), {
        "config": {"q": sim.q, "layers": sim.n_layers, "n": sim.n,
                   "edge_prob": sim.edge_prob, "contamination": sim.contamination,
                   "mixing_family": sim.mixing.family,
                   "mixing_shape": sim.mixing.shape,
                   "mixing_scale": sim.mixing.scale, "seed": sim.seed},
        "edges": edges,
    })
    print(f"simulated n={sim.n} q={sim.q} with {len(edges)} true edges -> {out}")
    return 0


def cmd_benchmark(args):
    sim = SimulationConfig(q=args.q, n_layers=args.layers, n=args.n,
                           edge_prob=args.pe, contamination=args.pi,
                           mixing=parse_mixing(args.mixing), seed=args.seed)
    cfg = BenchmarkConfig(sim=sim, reps=args.reps, burnin=args.burnin,
                          samples=args.samples, thin=args.thin,
                          alpha=args.alpha, seed=args.seed, jobs=args.jobs)
    result = run_benchmark(cfg)
    out = _outdir(args.out)
    write_json(os.path.join(out, "benchmark.json"), result)
    keys = ["rep", "mode", "seconds", "specificity", "sensitivity", "mcc",
            "auc", "pauc90", "pauc80"]
    with open(os.path.join(out, "benchmark_rows.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(keys)
        for row in result["rows"]:
            writer.writerow([row["rep"], row["mode"]]
                            + [format_float(row[k]) for k in keys[2:]])
    for mode, agg in result["summary"].items():
        print(f"{mode}: auc {agg['mean_auc']:.4f} (se {agg['se_auc']:.4f}), "
              f"mcc {agg['mean_mcc']:.4f}, {agg['mean_seconds']:.1f}s/chain")
    return 0


def cmd_summarize(args):
    samples, h = read_posterior_json(args.posterior)
    summary = summarize(samples, alpha=args.alpha, threshold=args.threshold, h=h)
    out = _outdir(args.out)
    write_edges_csv(os.path.join(out, "edges.csv"), summary)
    meta = {"command": "summarize", "source": os.path.basename(args.posterior),
            "retained": samples.retained, "diagnostics": samples.diagnostics}
    write_json(os.path.join(out, "summary.json"),
               {"run": meta, **summary.to_dict()})
    print(f"summarize: {summary.n_selected} edges selected "
          f"({summary.rule} rule, threshold {summary.threshold:.6g}) -> {out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rcgm",
        description="Bayesian structure learning for multilayered chain "
                    "graphs with heavy-tailed node marginals.")
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="calibrate per-node priors")
    cal.add_argument("--data", required=True)
    cal.add_argument("--layers", required=True)
    cal.add_argument("--out", required=True)
    cal.set_defaults(func=cmd_calibrate)

    fit = sub.add_parser("fit", help="fit the posterior on a dataset")
    fit.add_argument("--data", required=True)
    fit.add_argument("--layers", required=True)
    fit.add_argument("--out", required=True)
    fit.add_argument("--alpha", type=float, default=0.1)
    fit.add_argument("--mode", choices=("rcgm", "gaussian"), default="rcgm")
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--burnin", type=int, default=2000)
    fit.add_argument("--samples", type=int, default=10000)
    fit.add_argument("--thin", type=int, default=1)
    fit.add_argument("--threshold", type=float, default=None,
                     help="absolute inclusion threshold instead of FDR control")
    fit.add_argument("--trace", action="store_true")
    fit.set_defaults(func=cmd_fit)

    simp = sub.add_parser("simulate", help="emit a synthetic dataset")
    simp.add_argument("--q", type=int, default=50)
    simp.add_argument("--layers", type=int, default=4)
    simp.add_argument("--n", type=int, default=200)
    simp.add_argument("--pe", type=float, default=0.08)
    simp.add_argument("--pi", type=float, default=0.95)
    simp.add_argument("--mixing", default="exp:2.5")
    simp.add_argument("--seed", type=int, default=0)
    simp.add_argument("--out", required=True)
    simp.set_defaults(func=cmd_simulate)

    ben = sub.add_parser("benchmark", help="replicated mode comparison")
    ben.add_argument("--q", type=int, default=50)
    ben.add_argument("--layers", type=int, default=4)
    ben.add_argument("--n", type=int, default=200)
    ben.add_argument("--pe", type=float, default=0.08)
    ben.add_argument("--pi", type=float, default=0.95)
    ben.add_argument("--mixing", default="exp:2.5")
    ben.add_argument("--reps", type=int, default=30)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--burnin", type=int, default=2000)
    ben.add_argument("--samples", type=int, default=10000)
    ben.add_argument("--thin", type=int, default=1)
    ben.add_argument("--alpha", type=float, default=0.1)
    ben.add_argument("--jobs", type=int, default=1)
    ben.add_argument("--out", required=True)
    ben.set_defaults(func=cmd_benchmark)

    summ = sub.add_parser("summarize", help="re-summarize a saved posterior")
    summ.add_argument("--posterior", required=True,
                      help="posterior.json written by fit")
    summ.add_argument("--alpha", type=float, default=0.1)
    summ.add_argument("--threshold", type=float, default=None)
    summ.add_argument("--out", required=True)
    summ.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
