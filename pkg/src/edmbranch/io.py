"""CSV and JSON output with atomic writes."""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def format_csv(columns: dict[str, np.ndarray]) -> str:
    """Header plus rows at 17 significant digits; ends with a newline."""
    buf = io.StringIO()
    data = np.column_stack([np.asarray(v, dtype=float) for v in columns.values()])
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", header=",".join(columns), comments="")
    return buf.getvalue()


def write_csv(path: Path, columns: dict[str, np.ndarray]) -> None:
    atomic_write_text(path, format_csv(columns))


def read_csv(path: Path) -> dict[str, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
