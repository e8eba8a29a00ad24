"""JSON encoding of complex arrays: every complex number is a ``[re, im]`` pair."""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np


def encode_complex(arr: Any) -> list:
    """Nested lists of ``[re, im]`` pairs, row-major."""
    a = np.asarray(arr, dtype=complex)
    pairs = np.stack([a.real, a.imag], axis=-1)
    return pairs.tolist()


def decode_complex(data: Any) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.ndim == 0 or a.shape[-1] != 2:
        raise ValueError("complex data must be nested [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def _clean(obj: Any) -> Any:
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON: NaN becomes null, key order is insertion order."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"
