"""Node-kind multiset difference between two sources."""

from __future__ import annotations

import ast
from collections import Counter


def _kind_counts(source: str) -> Counter:
    tree = ast.parse(source)
    return Counter(type(node).__name__ for node in ast.walk(tree))


def node_kind_diff(before: str, after: str) -> dict:
    """Added and removed node kinds going from ``before`` to ``after``."""
    counts_before = _kind_counts(before)
    counts_after = _kind_counts(after)
    added = counts_after - counts_before
    removed = counts_before - counts_after
    return {
        "added": {k: added[k] for k in sorted(added)},
        "removed": {k: removed[k] for k in sorted(removed)},
    }
