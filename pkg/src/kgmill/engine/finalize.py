"""Finalization of repeated samples into one stored value."""

from __future__ import annotations

import math
from collections import Counter

from kgmill.errors import AggregationError


def finalize_categorical_vote(samples: list) -> object:
    """Most common sample; ties break to the earliest first occurrence."""
    if not samples:
        raise AggregationError("vote needs at least one sample")
    counts = Counter(samples)
    top = max(counts.values())
    for value in samples:  # first-occurrence order
        if counts[value] == top:
            return value
    raise AssertionError("unreachable")


def finalize_numeric(samples: list, mode: str) -> float:
    if not samples:
        raise AggregationError(f"{mode} needs at least one sample")
    if mode not in ("average", "sum"):
        raise AggregationError(f"unknown numeric mode {mode!r}")
    values = []
    for sample in samples:
        try:
            value = float(sample)
        except (TypeError, ValueError) as exc:
            raise AggregationError(f"non-numeric sample {sample!r}") from exc
        if not math.isfinite(value):
            raise AggregationError(f"non-finite sample {sample!r}")
        values.append(value)
    total = math.fsum(values)
    return total if mode == "sum" else total / len(values)


def finalize_boolean(samples: list) -> int:
    """Majority of {0,1} samples; an exact tie resolves to 0."""
    if not samples:
        raise AggregationError("boolean vote needs at least one sample")
    cleaned = []
    for sample in samples:
        if isinstance(sample, bool):
            sample = int(sample)
        if sample not in (0, 1):
            raise AggregationError(f"boolean sample out of domain: {sample!r}")
        cleaned.append(int(sample))
    ones = sum(cleaned)
    zeros = len(cleaned) - ones
    return 1 if ones > zeros else 0
