"""Declarative task specification shared by the validator and the run loop.

A task file is a JSON document naming the task family, the request text, the
target file, the required interface (function/class names with arities), the
applicable validation stages, per-stage command templates, and any support
files that must exist in the workspace (e.g. a behavior test script).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_TARGET_FILENAME = "algorithm.py"
DEFAULT_ATTEMPT_BUDGET = 3

# Coarse task families recognized by the keyword labeler.
_FAMILY_KEYWORDS: tuple[tuple[str, str], ...] = (
    ("q-learning", r"\bq[\s_-]?learning\b"),
    ("sarsa", r"\bsarsa\b"),
    ("value-iteration", r"\bvalue[\s_-]?iteration\b"),
    ("policy-iteration", r"\bpolicy[\s_-]?iteration\b"),
    ("monte-carlo", r"\bmonte[\s_-]?carlo\b"),
    ("bandit", r"\bbandit\b"),
)


def classify_family(text: str) -> str:
    """Map request text to a coarse task-family label; unmatched is generic."""
    lowered = text.lower()
    for family, pattern in _FAMILY_KEYWORDS:
        if re.search(pattern, lowered):
            return family
    return "generic"


@dataclass(frozen=True)
class RequiredUnit:
    """One required interface member: a name plus its parameter count."""

    name: str
    arity: int
    kind: str = "function"  # "function" or "class"


@dataclass(frozen=True)
class InterfaceContract:
    units: tuple[RequiredUnit, ...] = ()

    @classmethod
    def from_dict(cls, data: dict) -> "InterfaceContract":
        units = []
        for entry in data.get("functions", []):
            units.append(RequiredUnit(entry["name"], int(entry["arity"]), "function"))
        for entry in data.get("classes", []):
            units.append(RequiredUnit(entry["name"], int(entry.get("arity", 0)), "class"))
        return cls(tuple(units))


@dataclass
class TaskSpec:
    """One coding task: what to build, where, and how it is validated."""

    id: str
    request: str
    family: str = ""
    target_filename: str = DEFAULT_TARGET_FILENAME
    workspace: Path | None = None
    stages: tuple[str, ...] = ()
    interface: InterfaceContract = field(default_factory=InterfaceContract)
    commands: dict[str, list[str]] = field(default_factory=dict)
    support_files: dict[str, str] = field(default_factory=dict)
    attempt_budget: int = DEFAULT_ATTEMPT_BUDGET

    def __post_init__(self) -> None:
        if self.attempt_budget < 1:
            raise ValueError("attempt_budget must be at least 1")
        if not self.family:
            self.family = classify_family(self.request)

    @property
    def target_path(self) -> Path:
        if self.workspace is None:
            raise ValueError(f"task {self.id!r} has no workspace bound")
        return self.workspace / self.target_filename

    def prepare_workspace(self, workspace: Path) -> None:
        """Bind the workspace and materialize declared support files."""
        workspace.mkdir(parents=True, exist_ok=True)
        self.workspace = workspace
        for name, content in self.support_files.items():
            path = workspace / name
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(content, encoding="utf-8")


def load_task(path: str | Path, workspace: Path | None = None) -> TaskSpec:
    """Load a task spec document; optionally bind and prepare a workspace."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    task = TaskSpec(
        id=data["id"],
        request=data["request"],
        family=data.get("family", ""),
        target_filename=data.get("target_filename", DEFAULT_TARGET_FILENAME),
        stages=tuple(data.get("stages", [])),
        interface=InterfaceContract.from_dict(data.get("interface", {})),
        commands={k: list(v) for k, v in data.get("commands", {}).items()},
        support_files=dict(data.get("support_files", {})),
        attempt_budget=int(data.get("attempt_budget", DEFAULT_ATTEMPT_BUDGET)),
    )
    if workspace is not None:
        task.prepare_workspace(workspace)
    return task
