from kgmill.matcher.core import (
    DEFAULT_TOP_N,
    Matcher,
    MatchQuery,
    MatchResult,
    write_match_review,
)
from kgmill.matcher._kernels import KERNEL_BACKEND, group_min_cosine

__all__ = [
    "DEFAULT_TOP_N", "Matcher", "MatchQuery", "MatchResult",
    "write_match_review", "KERNEL_BACKEND", "group_min_cosine",
]
