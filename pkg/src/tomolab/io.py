"""Dataset files and estimate tables on disk.

Dataset layout: one header line ``# {json}`` describing the grid and run,
then either CSV rows ``grid_index,x_value`` (after a column-name row) or,
for the binary layout, packed little-endian records (uint32 grid index,
float64 value).  The grid itself is rebuilt from the header.
"""
import csv
import json
import os

import numpy as np

from .dataset import QuadratureDataset
from .geometry import SamplingGrid

__all__ = [
    "DatasetFormatError",
    "FORMAT_VERSION",
    "write_dataset",
    "read_dataset",
    "read_header",
    "write_table_json",
    "write_table_csv",
    "write_columns",
    "table_to_dict",
]

FORMAT_VERSION = 1
_MAGIC = "tomolab-dataset"
_BINARY_DTYPE = np.dtype([("grid_index", "<u4"), ("x_value", "<f8")])


class DatasetFormatError(ValueError):
    """Malformed or inconsistent dataset file."""


def _header(dataset, layout):
    return {
        "format": _MAGIC,
        "version": FORMAT_VERSION,
        "layout": layout,
        "modes": dataset.grid.modes,
        "grid": dataset.grid.metadata(),
        "eta": dataset.eta,
        "seed": dataset.seed,
        "records": len(dataset),
        "phase_randomized": bool(dataset.phase_randomized),
        "source": dataset.source,
    }


def write_dataset(dataset, path, binary=False, expanded=False):
    """Write ``dataset`` to ``path``; returns the path.

    ``expanded`` adds explicit theta_l / psi_j columns to the CSV layout
    for readers that do not reconstruct the grid.
    """
    if binary and expanded:
        raise ValueError("the expanded layout is CSV only")
    layout = "binary" if binary else ("csv-expanded" if expanded else "csv")
    head = "# " + json.dumps(_header(dataset, layout), sort_keys=True) + "\n"
    if binary:
        rec = np.empty(len(dataset), dtype=_BINARY_DTYPE)
        rec["grid_index"] = dataset.grid_index
        rec["x_value"] = dataset.x
        with open(path, "wb") as fh:
            fh.write(head.encode("ascii"))
            fh.write(rec.tobytes())
        return path
    grid = dataset.grid
    N = grid.modes
    cols = ["grid_index", "x_value"]
    if expanded:
        cols += [f"theta_{l + 1}" for l in range(N - 1)] + [f"psi_{j + 1}" for j in range(N)]
    with open(path, "w", newline="") as fh:
        fh.write(head)
        fh.write(",".join(cols) + "\n")
        if expanded:
            angles = np.hstack([grid.thetas, grid.psis])
            lines = (f"{i},{x!r}," + ",".join(repr(float(v)) for v in angles[i])
                     for i, x in zip(dataset.grid_index.tolist(), dataset.x.tolist()))
        else:
            lines = (f"{i},{x!r}" for i, x in zip(dataset.grid_index.tolist(),
                                                   dataset.x.tolist()))
        for block in _batched(lines, 1 << 16):
            fh.write("\n".join(block) + "\n")
    return path


def _batched(it, n):
    block = []
    for item in it:
        block.append(item)
        if len(block) == n:
            yield block
            block = []
    if block:
        yield block


def read_header(path):
    with open(path, "rb") as fh:
        line = fh.readline()
    try:
        text = line.decode("ascii")
        if not text.startswith("# "):
            raise ValueError
        head = json.loads(text[2:])
    except (UnicodeDecodeError, ValueError) as exc:
        raise DatasetFormatError(f"{path}: missing or unreadable '# {{json}}' header") from exc
    if head.get("format") != _MAGIC:
        raise DatasetFormatError(f"{path}: not a tomolab dataset")
    if head.get("version") != FORMAT_VERSION:
        raise DatasetFormatError(f"{path}: unsupported format version {head.get('version')}")
    return head, len(line)


def read_dataset(path):
    """Read a dataset written by ``write_dataset`` (any layout)."""
    head, offset = read_header(path)
    try:
        grid = SamplingGrid.from_metadata(head["grid"])
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"{path}: bad grid metadata: {exc}") from exc
    layout = head.get("layout", "csv")
    if layout == "binary":
        size = os.path.getsize(path) - offset
        if size % _BINARY_DTYPE.itemsize:
            raise DatasetFormatError(f"{path}: truncated binary record")
        rec = np.fromfile(path, dtype=_BINARY_DTYPE, offset=offset)
        gi, x = rec["grid_index"].astype(np.int64), rec["x_value"].astype(float)
    elif layout in ("csv", "csv-expanded"):
        try:
            body = np.loadtxt(path, delimiter=",", skiprows=2, usecols=(0, 1), ndmin=2,
                              dtype=float, comments=None)
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: malformed record: {exc}") from exc
        gi = body[:, 0].astype(np.int64)
        if np.any(gi != body[:, 0]):
            raise DatasetFormatError(f"{path}: non-integer grid index")
        x = body[:, 1]
    else:
        raise DatasetFormatError(f"{path}: unknown layout {layout!r}")
    if len(x) != head["records"]:
        raise DatasetFormatError(
            f"{path}: header declares records={head['records']} but body has {len(x)}")
    try:
        return QuadratureDataset(grid, head["eta"], gi, x, seed=head.get("seed"),
                                 phase_randomized=head.get("phase_randomized", False),
                                 source=head.get("source", {}))
    except ValueError as exc:
        raise DatasetFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------- estimate tables

def _key_fields(table, key):
    if table.kind == "quasidist":
        return {"alpha": [[a.real, a.imag] for a in key]}
    return {"m": list(key[0]), "n": list(key[1])}


def table_to_dict(table, exact=None, report=None):
    """JSON-ready form of an EstimateTable; ``exact`` maps keys to
    reference values."""
    entries = []
    for key, v, e in zip(table.keys, table.values, table.errors):
        ent = _key_fields(table, key)
        ent.update({"value": [float(v.real), float(v.imag)], "stderr": float(e)})
        if exact is not None:
            ex = complex(exact[key])
            ent["exact"] = [ex.real, ex.imag]
        entries.append(ent)
    out = {"kind": table.kind, "metadata": table.metadata, "entries": entries}
    if report is not None:
        out["validation"] = report.as_dict()
    return out


def write_table_json(table, path, exact=None, report=None):
    with open(path, "w") as fh:
        json.dump(table_to_dict(table, exact, report), fh, indent=1)
        fh.write("\n")
    return path


def write_table_csv(table, path, exact=None):
    """Flat CSV of an estimate table.

    quasidist columns: alpha_j_re, alpha_j_im, value, stderr[, exact, delta]
    other kinds:       m_j, n_j, value_re, value_im, stderr[, exact_re, exact_im]
    """
    N = len(table.keys[0]) if table.kind == "quasidist" else len(table.keys[0][0])
    if table.kind == "quasidist":
        cols = [f"alpha_{j + 1}_{p}" for j in range(N) for p in ("re", "im")]
        cols += ["value", "stderr"] + (["exact", "delta"] if exact is not None else [])
    else:
        cols = [f"m_{j + 1}" for j in range(N)] + [f"n_{j + 1}" for j in range(N)]
        cols += ["value_re", "value_im", "stderr"]
        cols += ["exact_re", "exact_im"] if exact is not None else []
    rows = []
    for key, v, e in zip(table.keys, table.values, table.errors):
        if table.kind == "quasidist":
            row = [c for a in key for c in (a.real, a.imag)] + [v.real, e]
            if exact is not None:
                ex = float(np.real(exact[key]))
                row += [ex, ex - v.real]
        else:
            row = list(key[0]) + list(key[1]) + [v.real, v.imag, e]
            if exact is not None:
                ex = complex(exact[key])
                row += [ex.real, ex.imag]
        rows.append(row)
    return write_columns(path, cols, rows)


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_columns(path, header, rows):
    """CSV with a header row; floats in shortest round-trip form, strings as is."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path
