"""CSV and metadata output.

Every CSV starts with ``#`` comment lines carrying the file type, the
generator id, the seeds and the full config echo, followed by a header row
and data rows (RFC 4180 quoting, CRLF line ends, '.' decimal separator).
Readers such as ``pandas.read_csv(path, comment="#")`` skip the preamble.
Floats are written in their shortest round-trip form, so equal numbers give
equal bytes.
"""

from __future__ import annotations

import csv
import json
import os
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .. import rng

SCHEMA_VERSION = 1


class OutputError(OSError):
    pass


def load_schema() -> dict:
    text = (resources.files("bpfrls.harness") / "csv_schema.yaml").read_text()
    return yaml.safe_load(text)


def parameter_names(n: int, n_k: int) -> list[str]:
    names = [f"a{i}" for i in range(1, n + 1)]
    names += [f"b{i}{j}" if n < 10 else f"b{i}_{j}" for i in range(1, n + 1) for j in range(1, n + 1)]
    names += [f"f{i}" for i in range(1, n + 1)]
    names += [f"k{i}" for i in range(1, n_k + 1)]
    return names


def columns(file_type: str, n: int, n_k: int, labels=()) -> list[str]:
    """Expand the schema's column templates for the given dimensions.

    ``{theta}`` expands to the parameter names, ``{x}``-style templates with
    ``{i}`` to one column per state, and ``{label}`` to one column per
    compared estimator.
    """
    spec = load_schema()["files"][file_type]
    out: list[str] = []
    for col in spec["columns"]:
        if col == "{theta}":
            out += parameter_names(n, n_k)
        elif "{i}" in col:
            out += [col.replace("{i}", str(i)) for i in range(1, n + 1)]
        elif "{label}" in col:
            out += [col.replace("{label}", lab) for lab in labels]
        else:
            out.append(col)
    return out


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def ensure_dir(path) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise OutputError(f"output directory {path} is not writable")
    return path


def write_csv(path, file_type: str, header: list[str], rows, provenance: dict) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# bpfrls {file_type} schema-v{SCHEMA_VERSION}\r\n")
        fh.write(f"# generator_id: {provenance['generator_id']}\r\n")
        fh.write(f"# seeds: {json.dumps(_jsonable(provenance['seeds']), sort_keys=True)}\r\n")
        fh.write(f"# config: {json.dumps(_jsonable(provenance['config']), sort_keys=True)}\r\n")
        writer = csv.writer(fh, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"{file_type}: row has {len(row)} fields, header has {len(header)}")
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """(header, rows as lists of strings), skipping the comment preamble."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


def write_metadata(path, metadata: dict) -> Path:
    path = Path(path)
    body = dict(metadata)
    body.setdefault("generator_id", rng.GENERATOR_ID)
    body["schema_version"] = SCHEMA_VERSION
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(body), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
