"""Kernel selection: compiled extension when available, numpy otherwise.

Set KGMILL_FORCE_FALLBACK=1 to force the numpy path (used by the benchmark
and by tests asserting the two implementations agree).
"""

from __future__ import annotations

import os

import numpy as np


def _numpy_group_min_cosine(
    queries: np.ndarray, codes: np.ndarray, offsets: np.ndarray
) -> np.ndarray:
    qn = queries / np.linalg.norm(queries, axis=1, keepdims=True)
    cn = codes / np.linalg.norm(codes, axis=1, keepdims=True)
    best_per_code_vector = (qn @ cn.T).max(axis=0)
    group_max = np.maximum.reduceat(best_per_code_vector, offsets[:-1])
    return 1.0 - group_max


_compiled = None
if not os.environ.get("KGMILL_FORCE_FALLBACK"):
    try:
        from kgmill.matcher import _ckernels as _compiled
    except ImportError:
        _compiled = None

KERNEL_BACKEND = "compiled" if _compiled is not None else "numpy"


def group_min_cosine(
    queries: np.ndarray, codes: np.ndarray, offsets: np.ndarray
) -> np.ndarray:
    """Per-group minimum pairwise cosine distance (see matcher.core)."""
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    codes = np.ascontiguousarray(codes, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    if _compiled is not None:
        return _compiled.group_min_cosine(queries, codes, offsets)
    return _numpy_group_min_cosine(queries, codes, offsets)
