"""AST-derived skill library mined from accepted programs.

Accepted code is split into canonicalized units (docstrings stripped, locals
renamed), hashed, and stored with offer/success counters. A new skill is
quarantined: it may be offered as untrusted prompt evidence, but it is
trusted only after a future generated candidate that saw it passes
validation.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .analysis import MODE_CANONICAL_DUMP, MODE_UNITS
from .memory import Fingerprint

LIBRARY_CAP = 200


class EmptyLibrary(Exception):
    """Skill selection was asked against an empty library."""


class ParseFailure(Exception):
    """The analyzer rejected source the validator accepted; harvest skipped."""


def skill_hash(canonical_dump: str) -> str:
    """256-bit BLAKE2b digest of the canonical dump text, hex encoded."""
    return hashlib.blake2b(canonical_dump.encode("utf-8"), digest_size=32).hexdigest()


@dataclass(frozen=True)
class SkillRecord:
    """One canonicalized reusable unit with its reuse bookkeeping."""

    hash: str
    canonical_body: str
    params: tuple[str, ...]
    families: frozenset[str]
    offered: int = 0
    succeeded: int = 0
    quarantined: bool = True
    last_used: float = field(default_factory=time.time)
    use_seq: int = 0  # monotonic logical clock for deterministic recency ties
    name: str = ""

    def __post_init__(self) -> None:
        if self.succeeded > self.offered:
            raise ValueError("succeeded cannot exceed offered")

    @property
    def success_ratio(self) -> float:
        return self.succeeded / max(1, self.offered)

    def to_dict(self) -> dict:
        return {
            "hash": self.hash,
            "canonical_body": self.canonical_body,
            "params": list(self.params),
            "families": sorted(self.families),
            "offered": self.offered,
            "succeeded": self.succeeded,
            "quarantined": self.quarantined,
            "last_used": self.last_used,
            "use_seq": self.use_seq,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SkillRecord":
        return cls(
            hash=data["hash"],
            canonical_body=data["canonical_body"],
            params=tuple(data["params"]),
            families=frozenset(data["families"]),
            offered=int(data["offered"]),
            succeeded=int(data["succeeded"]),
            quarantined=bool(data["quarantined"]),
            last_used=float(data["last_used"]),
            use_seq=int(data.get("use_seq", 0)),
            name=data.get("name", ""),
        )


class SkillLibrary:
    """Hash-keyed skill store persisted as a record-per-line log."""

    def __init__(self, path: str | Path, cap: int = LIBRARY_CAP) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.cap = cap
        self._records: dict[str, SkillRecord] = {}
        self._seq = 0
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    record = SkillRecord.from_dict(json.loads(line))
                    self._records[record.hash] = record
            if self._records:
                self._seq = max(r.use_seq for r in self._records.values()) + 1

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> tuple[SkillRecord, ...]:
        return tuple(self._records.values())

    def get(self, digest: str) -> SkillRecord | None:
        return self._records.get(digest)

    def _tick(self) -> int:
        self._seq += 1
        return self._seq

    def _put(self, record: SkillRecord) -> None:
        self._records[record.hash] = record
        if len(self._records) > self.cap:
            self._evict()
        self._flush()

    def _evict(self) -> None:
        # Prefer dropping quarantined never-successful skills, least recently
        # used first; fall back to global LRU.
        def eviction_key(r: SkillRecord) -> tuple:
            expendable = r.quarantined and r.succeeded == 0
            return (not expendable, r.use_seq, r.hash)

        while len(self._records) > self.cap:
            victim = min(self._records.values(), key=eviction_key)
            del self._records[victim.hash]

    def _flush(self) -> None:
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for record in sorted(self._records.values(), key=lambda r: r.hash):
                fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
        tmp.replace(self.path)


def harvest_skills(library: SkillLibrary, accepted_source: str, family: str, analyzer) -> list[SkillRecord]:
    """Mine one accepted program into the library.

    Each extracted unit becomes a record keyed by its canonical hash. A hash
    already present merges the family and refreshes the last-used mark but
    keeps its counters and quarantine state.

    Raises:
        ParseFailure: the analyzer could not parse the accepted source,
            which signals an acceptance/analyzer inconsistency.
    """
    units = analyzer.analyze(MODE_UNITS, accepted_source)
    dumps = analyzer.analyze(MODE_CANONICAL_DUMP, accepted_source)
    if not units.ok or not dumps.ok:
        raise ParseFailure(units.error or dumps.error)
    harvested = []
    dump_by_name = {u["qualname"]: u for u in dumps.payload.get("units", [])}
    for unit in units.payload.get("units", []):
        entry = dump_by_name.get(unit["qualname"])
        if entry is None:
            continue
        digest = skill_hash(entry["dump"])
        existing = library.get(digest)
        now = time.time()
        if existing is not None:
            record = replace(
                existing,
                families=existing.families | {family},
                last_used=now,
                use_seq=library._tick(),
            )
        else:
            record = SkillRecord(
                hash=digest,
                canonical_body=entry["dump"],
                params=tuple(unit["params"]),
                families=frozenset({family}),
                last_used=now,
                use_seq=library._tick(),
                name=unit["qualname"],
            )
        library._put(record)
        harvested.append(record)
    return harvested


def select_skills(library: SkillLibrary, query: Fingerprint, k: int) -> list[SkillRecord]:
    """Top-k skills for a query fingerprint; selection counts as an offer.

    Ranking: family match first, then offered-success ratio, then
    non-quarantined over quarantined on ties, then recency. Quarantined
    skills stay eligible; they simply rank below equally scored trusted ones.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(library) == 0:
        raise EmptyLibrary(f"no skills in {library.path}")

    def rank_key(r: SkillRecord) -> tuple:
        return (
            0 if query.task_family in r.families else 1,
            -r.success_ratio,
            1 if r.quarantined else 0,
            -r.use_seq,
            r.hash,
        )

    chosen = sorted(library.records, key=rank_key)[:k]
    offered = []
    for record in chosen:
        updated = replace(
            record,
            offered=record.offered + 1,
            last_used=time.time(),
            use_seq=library._tick(),
        )
        library._put(updated)
        offered.append(updated)
    return offered


def record_skill_outcome(
    library: SkillLibrary, offered: list[SkillRecord], accepted: int
) -> None:
    """Credit offered skills after validation; success lifts quarantine."""
    if accepted != 1:
        return
    for record in offered:
        current = library.get(record.hash)
        if current is None:
            continue
        library._put(
            replace(current, succeeded=current.succeeded + 1, quarantined=False)
        )
