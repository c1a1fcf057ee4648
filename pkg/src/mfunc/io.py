"""CSV and JSON writers.  Output depends only on its inputs: floats are written
with ``repr`` precision and keys are sorted."""

from __future__ import annotations

import json
import math
from typing import IO, Dict, List, Sequence

import numpy as np

TRANSFORM_COLUMNS = ("x", "re", "im", "err")
DENSITY_COLUMNS = ("u", "density", "err")


def _num(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, np.ndarray):
        return [_num(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    return v


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def config_json(config: Dict) -> str:
    return json.dumps(_num(config), sort_keys=True, separators=(",", ":"))


def write_csv(fh: IO[str], columns: Sequence[str], rows: Sequence[Sequence], config: Dict,
              notes: Dict = None) -> None:
    """Comment lines ``# config: {...}`` and ``# key: value`` precede the header."""
    fh.write(f"# config: {config_json(config)}\n")
    for key in sorted(notes or {}):
        fh.write(f"# {key}: {json.dumps(_num(notes[key]), sort_keys=True)}\n")
    fh.write(",".join(columns) + "\n")
    for row in rows:
        fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(fh: IO[str], columns: Sequence[str], arrays: Sequence, config: Dict,
               notes: Dict = None) -> None:
    obj = {"params": _num(config)}
    for name, arr in zip(columns, arrays):
        obj[name] = _num(np.asarray(arr))
    for key, val in (notes or {}).items():
        obj[key] = _num(val)
    fh.write(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def emit(fh: IO[str], fmt: str, columns: Sequence[str], arrays: Sequence, config: Dict,
         notes: Dict = None) -> None:
    if fmt == "json":
        write_json(fh, columns, arrays, config, notes)
    else:
        rows: List = list(zip(*[np.asarray(a).tolist() for a in arrays]))
        write_csv(fh, columns, rows, config, notes)


def read_csv(path) -> Dict:
    """Parse a file written by :func:`write_csv` into config, notes and columns."""
    config, notes, header, rows = None, {}, None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# config: "):
                config = json.loads(line[len("# config: "):])
            elif line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                notes[key] = json.loads(val)
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(v) for v in line.split(",")])
    data = np.array(rows) if rows else np.zeros((0, len(header or ())))
    return {"config": config, "notes": notes, "columns": header,
            "data": {h: data[:, i] for i, h in enumerate(header or ())}}
