"""Structural analysis of Python source as a bounded subprocess.

Five modes, one JSON document per invocation: structural features,
undefined-name detection, unit extraction, canonical normalized dumps for
hashing, and node-kind diff summaries. Stateless; source arrives on stdin.
"""

from .features import extract_features
from .names import find_undefined_names
from .units import extract_units
from .canonical import canonical_dumps
from .diff import node_kind_diff

SCHEMA_ID = "mera-analyzer/1"

__all__ = [
    "SCHEMA_ID",
    "extract_features",
    "find_undefined_names",
    "extract_units",
    "canonical_dumps",
    "node_kind_diff",
]
