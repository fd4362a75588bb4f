"""Investigated guidance arm: consolidation gate, repair operators, gap hints.

Everything here produces untrusted prompt text only. The arm has no
authority over acceptance: enabling it changes what evidence the generator
sees, never what the validator decides. It ships disabled by default and is
retained as a comparison condition.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .analysis import MODE_AST_DIFF
from .validation import FailureClass


@dataclass(frozen=True)
class GraceConfig:
    min_progress_gain: float = 1.0   # checks
    min_score_gain: float = 5.0      # points
    offer_success_threshold: float = 0.5
    top_k: int = 2
    bootstrap_enabled: bool = True
    hint_ttl: int = 1

    def __post_init__(self) -> None:
        if self.min_progress_gain < 0 or self.min_score_gain < 0:
            raise ValueError("gate thresholds must be nonnegative")
        if not 0.0 <= self.offer_success_threshold <= 1.0:
            raise ValueError("offer_success_threshold must be in [0, 1]")
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")


def consolidation_gate(
    cfg: GraceConfig,
    accepted: int,
    passed: int,
    prev_passed: int,
    score: int,
    prev_score: int,
) -> int:
    """Decide whether a transition between consecutive attempts is stored.

    Fires on acceptance, on a progress gain without score regression, or on
    a score gain without progress regression. First attempts compare against
    zero prior progress and score.
    """
    if accepted == 1:
        return 1
    if passed - prev_passed >= cfg.min_progress_gain and score >= prev_score:
        return 1
    if score - prev_score >= cfg.min_score_gain and passed >= prev_passed:
        return 1
    return 0


@dataclass(frozen=True)
class RepairOperator:
    """Structural before/after difference observed across a gated transition."""

    id: str
    from_failure: FailureClass
    to_failure: FailureClass
    added_kinds: tuple[tuple[str, int], ...]
    removed_kinds: tuple[tuple[str, int], ...]
    hint_text: str
    offered: int = 0
    succeeded_offers: int = 0
    created_at: float = field(default_factory=time.time)
    creation_seq: int = 0
    progress_gain: float = 0.0  # gain at derivation; feeds the cold-start rule

    def __post_init__(self) -> None:
        if self.succeeded_offers > self.offered:
            raise ValueError("succeeded_offers cannot exceed offered")

    @property
    def success_ratio(self) -> float:
        return self.succeeded_offers / max(1, self.offered)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "from_failure": self.from_failure.value,
            "to_failure": self.to_failure.value,
            "added_kinds": [list(k) for k in self.added_kinds],
            "removed_kinds": [list(k) for k in self.removed_kinds],
            "hint_text": self.hint_text,
            "offered": self.offered,
            "succeeded_offers": self.succeeded_offers,
            "created_at": self.created_at,
            "creation_seq": self.creation_seq,
            "progress_gain": self.progress_gain,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepairOperator":
        return cls(
            id=data["id"],
            from_failure=FailureClass(data["from_failure"]),
            to_failure=FailureClass(data["to_failure"]),
            added_kinds=tuple((k, int(v)) for k, v in data["added_kinds"]),
            removed_kinds=tuple((k, int(v)) for k, v in data["removed_kinds"]),
            hint_text=data["hint_text"],
            offered=int(data["offered"]),
            succeeded_offers=int(data["succeeded_offers"]),
            created_at=float(data["created_at"]),
            creation_seq=int(data.get("creation_seq", 0)),
            progress_gain=float(data.get("progress_gain", 0.0)),
        )


@dataclass(frozen=True)
class GapHint:
    """Ephemeral mismatch between promised and emitted code; dies with its ttl."""

    text: str
    source_attempt: int
    ttl: int


class ParseFailure(Exception):
    """One of the diffed sources did not parse; operator derivation skipped."""


def _kind_summary(kinds: tuple[tuple[str, int], ...], limit: int = 3) -> str:
    if not kinds:
        return "nothing"
    ranked = sorted(kinds, key=lambda kv: (-kv[1], kv[0]))[:limit]
    return ", ".join(name for name, _ in ranked)


def derive_operator(
    analyzer,
    prev_source: str,
    curr_source: str,
    prev_failure: FailureClass,
    curr_failure: FailureClass,
    progress_gain: float = 0.0,
) -> RepairOperator | None:
    """Build a repair operator from the before/after node-kind difference.

    Returns None for an empty diff: identical structure carries no repair
    signal worth storing.
    """
    response = analyzer.analyze(MODE_AST_DIFF, prev_source, curr_source)
    if not response.ok:
        raise ParseFailure(response.error)
    added = tuple(sorted((k, int(v)) for k, v in response.payload.get("added", {}).items()))
    removed = tuple(
        sorted((k, int(v)) for k, v in response.payload.get("removed", {}).items())
    )
    if not added and not removed:
        return None
    hint = (
        f"when {prev_failure.value}, changes adding {_kind_summary(added)} "
        f"preceded {curr_failure.value}"
    )
    ident = hashlib.blake2b(
        json.dumps(
            [prev_failure.value, curr_failure.value, added, removed], sort_keys=True
        ).encode("utf-8"),
        digest_size=8,
    ).hexdigest()
    return RepairOperator(
        id=ident,
        from_failure=prev_failure,
        to_failure=curr_failure,
        added_kinds=added,
        removed_kinds=removed,
        hint_text=hint,
        progress_gain=progress_gain,
    )


def operator_eligibility(
    cfg: GraceConfig, op: RepairOperator, current_failure: FailureClass | None = None
) -> int:
    """Offer eligibility: proven ratio, or the cold-start bootstrap rule.

    With offer history, the operator must meet the offer-success threshold.
    With none, it qualifies only when bootstrapping is on, its source failure
    matches the failure being repaired, and it came from a transition whose
    progress gain met the gate threshold.
    """
    if op.offered > 0:
        return int(op.success_ratio >= cfg.offer_success_threshold)
    return int(
        cfg.bootstrap_enabled
        and current_failure is not None
        and op.from_failure is current_failure
        and op.progress_gain >= cfg.min_progress_gain
    )


class OperatorStore:
    """Persistent repair-operator set, one JSON record per line."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._operators: dict[str, RepairOperator] = {}
        self._seq = 0
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    op = RepairOperator.from_dict(json.loads(line))
                    self._operators[op.id] = op
            if self._operators:
                self._seq = max(o.creation_seq for o in self._operators.values()) + 1

    def __len__(self) -> int:
        return len(self._operators)

    @property
    def operators(self) -> tuple[RepairOperator, ...]:
        return tuple(self._operators.values())

    def get(self, ident: str) -> RepairOperator | None:
        return self._operators.get(ident)

    def add(self, op: RepairOperator) -> RepairOperator:
        existing = self._operators.get(op.id)
        if existing is not None:
            return existing
        self._seq += 1
        op = replace(op, creation_seq=self._seq)
        self._operators[op.id] = op
        self._flush()
        return op

    def update(self, op: RepairOperator) -> None:
        self._operators[op.id] = op
        self._flush()

    def _flush(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for op in sorted(self._operators.values(), key=lambda o: o.id):
                fh.write(json.dumps(op.to_dict(), sort_keys=True) + "\n")
        tmp.replace(self.path)


def compose_guidance(
    cfg: GraceConfig,
    store: OperatorStore,
    previous_failure: FailureClass | None,
    hints: list[GapHint],
) -> tuple[list[str], list[RepairOperator]]:
    """Guidance blocks for the next prompt, plus the operators offered.

    The top-k eligible operators whose source failure equals the previous
    primary failure are offered (incrementing their offer counters), ranked
    by success ratio then recency. Live gap hints are appended. All blocks
    are labeled untrusted by the prompt composer.
    """
    offered: list[RepairOperator] = []
    blocks: list[str] = []
    if previous_failure is not None:
        eligible = [
            op
            for op in store.operators
            if op.from_failure is previous_failure
            and operator_eligibility(cfg, op, previous_failure)
        ]
        eligible.sort(key=lambda o: (-o.success_ratio, -o.creation_seq, o.id))
        for op in eligible[: cfg.top_k]:
            updated = replace(op, offered=op.offered + 1)
            store.update(updated)
            offered.append(updated)
            blocks.append(f"repair operator: {op.hint_text}")
    for hint in hints:
        if hint.ttl > 0:
            blocks.append(f"gap hint: {hint.text}")
    return blocks, offered


def record_operator_outcome(
    store: OperatorStore, offered: list[RepairOperator], accepted: int
) -> None:
    if accepted != 1:
        return
    for op in offered:
        current = store.get(op.id)
        if current is not None:
            store.update(
                replace(current, succeeded_offers=current.succeeded_offers + 1)
            )


_PROMISE_PATTERNS = (
    re.compile(r"`([A-Za-z_][A-Za-z0-9_]*)\s*\("),     # `foo(` in backticks
    re.compile(r"\bdef\s+([A-Za-z_][A-Za-z0-9_]*)"),    # "def foo" in prose
    re.compile(r"\bfunction\s+`?([A-Za-z_][A-Za-z0-9_]*)`?", re.IGNORECASE),
)

_FENCE_PATTERN = re.compile(r"```[^\n]*\n.*?```", re.DOTALL)


def derive_gap_hints(
    response_text: str, extracted_source: str | None, source_attempt: int, ttl: int = 1
) -> list[GapHint]:
    """Hints for functions the prose promised but the emitted code lacks.

    The response's prose (text outside fenced code) is scanned for function
    names presented as definitions or calls; each one with no matching
    definition in the extracted code yields one hint line.
    """
    prose = _FENCE_PATTERN.sub("", response_text)
    promised: dict[str, None] = {}
    for pattern in _PROMISE_PATTERNS:
        for match in pattern.finditer(prose):
            promised.setdefault(match.group(1))
    defined: set[str] = set()
    if extracted_source is not None:
        defined = set(
            re.findall(r"^\s*(?:def|class)\s+([A-Za-z_][A-Za-z0-9_]*)", extracted_source, re.M)
        )
    hints = []
    for name in promised:
        if name not in defined:
            hints.append(
                GapHint(
                    text=f"the previous response mentioned {name}() but the emitted "
                    "code does not define it",
                    source_attempt=source_attempt,
                    ttl=ttl,
                )
            )
    return hints


def age_hints(hints: list[GapHint]) -> list[GapHint]:
    """Decrement ttls and drop expired hints."""
    return [replace(h, ttl=h.ttl - 1) for h in hints if h.ttl - 1 > 0]
