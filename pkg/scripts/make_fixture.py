"""Regenerate the demo dataset under fixtures/.

Deterministic: rerunning writes byte-identical files.  The dataset is a
small two-layer chain graph with moderate contamination, sized so a fit
finishes in seconds.

Usage: python3 scripts/make_fixture.py [outdir]
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from rcgm.dataio import write_data_csv, write_json, write_layer_csv
from rcgm.model import directed_pairs, undirected_pairs
from rcgm.simulation import SimulationConfig, simulate_dataset, true_edge_labels


def main():
    outdir = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else (
        pathlib.Path(__file__).resolve().parents[1] / "fixtures")
    outdir.mkdir(parents=True, exist_ok=True)
    config = SimulationConfig(q=8, n_layers=2, n=150, edge_prob=0.25,
                              contamination=0.6, seed=20260823)
    params, dataset, scales = simulate_dataset(config)
    write_data_csv(outdir / "demo_data.csv", dataset.layer_map.names, dataset.x)
    write_layer_csv(outdir / "demo_layers.csv", dataset.layer_map)
    labels = true_edge_labels(params)
    names = dataset.layer_map.names
    universe = ([(u, v, "directed") for (u, v) in directed_pairs(dataset.layer_map)]
                + [(u, v, "undirected") for (u, v) in undirected_pairs(dataset.layer_map)])
    write_json(outdir / "demo_truth.json", {
        "config": {"q": config.q, "n_layers": config.n_layers, "n": config.n,
                   "edge_prob": config.edge_prob,
                   "contamination": config.contamination, "seed": config.seed},
        "edges": [{"u": names[u], "v": names[v], "type": t, "present": int(lab)}
                  for (u, v, t), lab in zip(universe, labels)],
    })
    print(f"wrote demo fixture to {outdir}")


if __name__ == "__main__":
    main()
