"""JSON helpers: decimal-exact float serialization, JSONL corpora, atomic writes.

Floats are emitted with 17 significant digits, which is enough for any IEEE-754
double to round-trip bit-exactly through its decimal representation. All model
files (PCA, calibration, embedding cache) go through :func:`dumps_exact` so a
serialize/load cycle never perturbs a stored vector or threshold.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Any, Iterable, Iterator


def format_float_exact(value: float) -> str:
    """Render a float with 17 significant digits (lossless for float64)."""
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    return format(float(value), ".17g")


def _encode(obj: Any, out: list[str]) -> None:
    if obj is None or isinstance(obj, (bool, int, str)):
        out.append(json.dumps(obj))
    elif isinstance(obj, float):
        out.append(format_float_exact(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if i:
                out.append(",")
            if not isinstance(key, str):
                key = str(key)
            out.append(json.dumps(key))
            out.append(":")
            _encode(val, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, val in enumerate(obj):
            if i:
                out.append(",")
            _encode(val, out)
        out.append("]")
    elif hasattr(obj, "item") and not hasattr(obj, "__len__"):
        _encode(obj.item(), out)  # numpy scalar
    elif hasattr(obj, "tolist"):
        _encode(obj.tolist(), out)  # numpy array
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_exact(obj: Any) -> str:
    """json.dumps with exact (17 sig. digit) float formatting."""
    out: list[str] = []
    _encode(obj, out)
    return "".join(out)


def loads(text: str) -> Any:
    return json.loads(text)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json_exact(path: str, obj: Any) -> None:
    atomic_write_text(path, dumps_exact(obj) + "\n")


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def read_jsonl(path: str) -> Iterator[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)


def write_jsonl(path: str, records: Iterable[dict], exact: bool = False) -> None:
    dump = dumps_exact if exact else json.dumps
    lines = [dump(rec) for rec in records]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))
