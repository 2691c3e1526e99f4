"""Python bindings for the argmine library."""

from ._argmine import (
    ArgmineError,
    build_prompt,
    find_markers,
    group_relation,
    log_partition,
    mask,
    run_cli,
    serialize,
    span_scores,
    tokenize,
    viterbi,
)

__all__ = [
    "ArgmineError",
    "build_prompt",
    "find_markers",
    "group_relation",
    "log_partition",
    "mask",
    "run_cli",
    "serialize",
    "span_scores",
    "tokenize",
    "viterbi",
]
