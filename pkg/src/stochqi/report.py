"""Byte-deterministic CSV output and run manifests."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

MANIFEST_VERSION = 1

CONVERGENCE_SCHEMA = ("n", "h", "emae", "stderr", "empty_rate")
PROBABILITY_SCHEMA = ("n", "epsilon", "probability", "replications")
ORDERS_SCHEMA = (
    "kernel", "d", "metric", "h_constant", "a_priori", "log_factor", "delta_hat",
    "k_hat", "residual_rms", "n_points_used", "max_empty_rate", "published_delta",
)


def format_value(v) -> str:
    """17 significant digits for floats, so every double round-trips exactly."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float) or (hasattr(v, "dtype") and v.dtype.kind == "f"):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return str(v)


def _row(record, schema) -> list[str]:
    if dataclasses.is_dataclass(record):
        record = {f.name: getattr(record, f.name) for f in dataclasses.fields(record)}
    missing = [k for k in schema if k not in record]
    if missing:
        raise ValueError(f"record lacks column(s) {missing}")
    return [format_value(record[k]) for k in schema]


def csv_text(records, schema) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema)
    for r in records:
        w.writerow(_row(r, schema))
    return buf.getvalue()


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit_csv(records, schema, path) -> None:
    """Write ``records`` (dataclasses or dicts) as CSV with a header row."""
    _atomic_write(Path(path), csv_text(records, schema).encode())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def manifest_path(out_path) -> Path:
    p = Path(out_path)
    return p.with_name(p.name + ".manifest.json")


def write_manifest(out_path, command: str, config: dict, base_seed: int, duration_s: float,
                   version: str) -> Path:
    """Record how ``out_path`` was produced, next to it."""
    data = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "version": version,
        "base_seed": base_seed,
        "duration_s": round(duration_s, 3),
        "config": config,
        "outputs": {Path(out_path).name: file_digest(out_path)},
    }
    path = manifest_path(out_path)
    _atomic_write(path, (json.dumps(data, indent=2, sort_keys=True) + "\n").encode())
    return path
