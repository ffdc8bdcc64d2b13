"""File formats: data and layer ingest, JSON and CSV emission, traces.

All numeric output is printed with 17 significant digits so identical
runs produce byte-identical files, and every emitted format can be read
back by the functions in this module.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .model import DataSet, LayerMap

__all__ = [
    "build_dataset",
    "format_float",
    "read_data_table",
    "read_layer_file",
    "read_posterior_json",
    "read_trace",
    "to_json",
    "write_data_csv",
    "write_edges_csv",
    "write_json",
    "write_layer_csv",
    "write_posterior_json",
    "write_trace",
]


def format_float(x):
    """Render a float with 17 significant digits (lossless round trip)."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# Ingest


def _sniff_delimiter(header_line):
    for cand in ("\t", ";", ","):
        if cand in header_line:
            return cand
    return ","


def read_data_table(path):
    """Read a delimiter-separated table with a header of node names.

    Returns (names, n x q float array).  Malformed cells are reported
    with their 1-based data row and column name.
    """
    with open(path, "r", newline="") as fh:
        first = fh.readline()
        if not first.strip():
            raise ValueError(f"{path}: empty data file")
        delim = _sniff_delimiter(first)
        names = [c.strip() for c in next(csv.reader([first], delimiter=delim))]
        rows = []
        for i, rec in enumerate(csv.reader(fh, delimiter=delim), start=1):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != len(names):
                raise ValueError(f"{path}: row {i} has {len(rec)} fields, "
                                 f"expected {len(names)}")
            vals = []
            for name, cell in zip(names, rec):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(f"{path}: non-numeric value at row {i}, "
                                     f"column {name!r}: {cell.strip()!r}") from None
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return names, np.array(rows, dtype=float)


def read_layer_file(path):
    """Read a two-column node,layer assignment file.

    A header row is skipped when its second field is not an integer.
    Returns (names, integer layer labels) in file order.
    """
    names, layers = [], []
    with open(path, "r", newline="") as fh:
        first = fh.readline()
        if not first.strip():
            raise ValueError(f"{path}: empty layer file")
        delim = _sniff_delimiter(first)
        records = list(csv.reader([first], delimiter=delim))
        records += [r for r in csv.reader(fh, delimiter=delim)
                    if r and any(c.strip() for c in r)]
    for i, rec in enumerate(records, start=1):
        if len(rec) < 2:
            raise ValueError(f"{path}: row {i} needs node and layer fields")
        name, label = rec[0].strip(), rec[1].strip()
        try:
            layer = int(label)
        except ValueError:
            if i == 1:
                continue  # header row
            raise ValueError(f"{path}: row {i} has non-integer layer "
                             f"{label!r} for node {name!r}") from None
        names.append(name)
        layers.append(layer)
    if not names:
        raise ValueError(f"{path}: no layer assignments")
    return names, layers


def build_dataset(data_path, layer_path):
    """Combine a data table and a layer file into a DataSet in canonical
    node order.  Every data column must have a layer and vice versa."""
    col_names, x = read_data_table(data_path)
    node_names, layers = read_layer_file(layer_path)
    missing = [n for n in col_names if n not in set(node_names)]
    if missing:
        raise ValueError(f"no layer assignment for column {missing[0]!r}")
    extra = [n for n in node_names if n not in set(col_names)]
    if extra:
        raise ValueError(f"layer file names unknown column {extra[0]!r}")
    lm = LayerMap.from_assignments(node_names, layers)
    col_pos = {n: i for i, n in enumerate(col_names)}
    x = x[:, [col_pos[n] for n in lm.names]]
    return DataSet(x, lm)


def write_data_csv(path, names, x):
    """Write an observation matrix with a header of node names."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in np.asarray(x, dtype=float):
            writer.writerow([format_float(v) for v in row])


def write_layer_csv(path, layer_map):
    """Write a node,layer assignment file in canonical order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "layer"])
        for i, name in enumerate(layer_map.names):
            writer.writerow([name, int(layer_map.layer_ids[layer_map.layer_of[i]])])


# ---------------------------------------------------------------------------
# JSON with fixed float formatting


def to_json(obj, indent=0):
    """Serialize nested dicts, lists, and scalars to JSON text with all
    floats at 17 significant digits."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {to_json(v, indent + 2)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            return "[]"
        parts = [f"{inner}{to_json(v, indent + 2)}" for v in seq]
        return "[\n" + ",\n".join(parts) + f"\n{pad}]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not np.isfinite(obj):
            raise ValueError("non-finite value in JSON output")
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(to_json(obj))
        fh.write("\n")


# ---------------------------------------------------------------------------
# Posterior artifacts

EDGE_COLUMNS = ("u", "v", "type", "g", "mean", "sign", "dependency_sign",
                "label", "csi", "ci_lower", "selected")


def write_edges_csv(path, summary):
    """Write the flat edge table of a PosteriorSummary."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EDGE_COLUMNS)
        for rec in summary.edges:
            writer.writerow([
                rec["u"], rec["v"], rec["type"], format_float(rec["g"]),
                format_float(rec["mean"]), rec["sign"], rec["dependency_sign"],
                rec["label"], format_float(rec["csi"]),
                format_float(rec["ci_lower"]), int(rec["selected"]),
            ])


def write_posterior_json(path, samples, h=None):
    """Persist the posterior accumulators so summaries can be recomputed
    at a different selection rule without refitting."""
    lm = samples.layer_map
    payload = {
        "gaussian_mode": samples.gaussian_mode,
        "retained": samples.retained,
        "names": list(lm.names),
        "layers": [int(lm.layer_ids[lm.layer_of[i]]) for i in range(lm.n_nodes)],
        "h": None if h is None else [float(v) for v in h],
        "gamma_counts": samples.gamma_counts,
        "eta_counts": samples.eta_counts,
        "b_sums": samples.b_sums,
        "k_off_sums": samples.k_off_sums,
        "pi_sums": samples.pi_sums,
        "diagnostics": samples.diagnostics,
    }
    write_json(path, payload)


def read_posterior_json(path):
    """Rebuild (PosteriorSamples, h) from a posterior accumulator file."""
    from .sampler import PosteriorSamples

    with open(path) as fh:
        payload = json.load(fh)
    lm = LayerMap.from_assignments(payload["names"], payload["layers"])
    if list(lm.names) != list(payload["names"]):
        raise ValueError("posterior file is not in canonical node order")
    samples = PosteriorSamples(
        lm, payload["gaussian_mode"], payload["retained"],
        np.array(payload["gamma_counts"], dtype=float),
        np.array(payload["eta_counts"], dtype=float),
        np.array(payload["b_sums"], dtype=float),
        np.array(payload["k_off_sums"], dtype=float),
        np.array(payload["pi_sums"], dtype=float),
        None, payload.get("diagnostics", {}))
    h = payload.get("h")
    return samples, h


# ---------------------------------------------------------------------------
# Thinned traces


def write_trace(path, trace, layer_map):
    """Write a thinned trace as newline-delimited JSON records of
    (iteration, node, quantity, value)."""
    names = layer_map.names
    with open(path, "w") as fh:
        for rec in trace:
            it = int(rec["iteration"])
            for i, val in enumerate(rec["pi"]):
                fh.write(_trace_line(it, names[i], "pi", val))
            for i, val in enumerate(rec["k"]):
                fh.write(_trace_line(it, names[i], "k_vv", val))
            for (v, u) in rec["gamma"]:
                fh.write(_trace_line(it, f"{names[u]}->{names[v]}", "gamma", 1))
            for (u, v) in rec["eta"]:
                fh.write(_trace_line(it, f"{names[u]}--{names[v]}", "eta", 1))


def _trace_line(iteration, node, quantity, value):
    val = str(int(value)) if quantity in ("gamma", "eta") else format_float(value)
    return (f'{{"iteration": {iteration}, "node": {json.dumps(node)}, '
            f'"quantity": {json.dumps(quantity)}, "value": {val}}}\n')


def read_trace(path):
    """Parse a trace file back into a list of record dicts."""
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
