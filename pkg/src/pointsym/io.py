"""Binary array + JSON sidecar persistence shared by datasets, jets and models.

``<stem>.bin`` holds row-major little-endian float64 values, ``<stem>.json``
holds ``shape`` plus arbitrary metadata.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def _stem(path: str | Path) -> Path:
    path = Path(path)
    if path.suffix in (".bin", ".json"):
        path = path.with_suffix("")
    return path


def save_array(path: str | Path, array: np.ndarray, meta: dict) -> tuple[Path, Path]:
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(array, dtype="<f8")
    bin_path = stem.with_suffix(".bin")
    json_path = stem.with_suffix(".json")
    bin_path.write_bytes(arr.tobytes(order="C"))
    header = {"shape": list(arr.shape), "version": FORMAT_VERSION, **meta}
    json_path.write_text(dumps(header) + "\n")
    return bin_path, json_path


def load_array(path: str | Path) -> tuple[np.ndarray, dict]:
    stem = _stem(path)
    meta = json.loads(stem.with_suffix(".json").read_text())
    raw = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8")
    shape = tuple(meta["shape"])
    if raw.size != int(np.prod(shape)):
        raise ValueError(f"{stem}.bin holds {raw.size} values, header says {shape}")
    return raw.reshape(shape).copy(), meta


def _round17(obj):
    if isinstance(obj, float):
        # JSON has no inf/nan
        return float(f"{obj:.17g}") if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _round17(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round17(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round17(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return _round17(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Deterministic JSON (sorted keys, 17 significant digits)."""
    return json.dumps(_round17(obj), indent=2, sort_keys=True, ensure_ascii=False)
