"""Deterministic serialization: every float is written with 17 significant
digits, which round-trips IEEE doubles exactly and keeps repeated runs
byte-identical."""

from __future__ import annotations

import json
import math


def fmt17(x: float) -> str:
    """17-significant-digit decimal form of a float."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    return format(x, ".17g")


def dumps_17g(obj) -> str:
    """JSON text with sorted keys and 17-digit floats."""
    pieces: list[str] = []
    _emit(obj, pieces)
    return "".join(pieces)


def _emit(obj, out: list[str]) -> None:
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(fmt17(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _emit(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _emit(v, out)
        out.append("]")
    elif hasattr(obj, "item"):  # numpy scalar
        _emit(obj.item(), out)
    elif hasattr(obj, "tolist"):  # numpy array
        _emit(obj.tolist(), out)
    else:
        raise TypeError(f"cannot serialize {type(obj)}")
