"""Client for the structural-analysis subprocess.

The analyzer is a separate executable spoken to through the bounded command
runner: mode and flags as arguments, source text on stdin, one JSON document
on stdout. Tests substitute :class:`RecordedAnalyzer`, which replays fixture
responses captured from the real analyzer, so the controller test suite runs
without the analyzer installed.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .commands import (
    DEFAULT_OUTPUT_CAP,
    CommandError,
    CommandSpec,
    run_bounded_command,
)

SCHEMA_ID = "mera-analyzer/1"

MODE_FEATURES = "features"
MODE_UNDEFINED_NAMES = "undefined-names"
MODE_UNITS = "units"
MODE_CANONICAL_DUMP = "canonical-dump"
MODE_AST_DIFF = "ast-diff"

MODES = (
    MODE_FEATURES,
    MODE_UNDEFINED_NAMES,
    MODE_UNITS,
    MODE_CANONICAL_DUMP,
    MODE_AST_DIFF,
)

ANALYZER_TIMEOUT = 30.0


class AnalyzerUnavailable(Exception):
    """The analyzer could not be invoked or spoke an unintelligible protocol."""


@dataclass(frozen=True)
class AnalyzerResponse:
    ok: bool
    mode: str
    payload: dict = field(default_factory=dict)
    error: str = ""

    @classmethod
    def from_document(cls, doc: dict) -> "AnalyzerResponse":
        return cls(
            ok=bool(doc.get("ok")),
            mode=str(doc.get("mode", "")),
            payload=dict(doc.get("payload") or {}),
            error=str(doc.get("error", "")),
        )

    def to_document(self) -> dict:
        return {
            "schema": SCHEMA_ID,
            "ok": self.ok,
            "mode": self.mode,
            "payload": self.payload,
            "error": self.error,
        }


def request_key(mode: str, source: str, second: str | None = None) -> str:
    """Stable digest identifying one analyzer request, used by recordings."""
    h = hashlib.blake2b(digest_size=16)
    h.update(mode.encode("utf-8"))
    h.update(b"\x00")
    h.update(source.encode("utf-8"))
    if second is not None:
        h.update(b"\x00")
        h.update(second.encode("utf-8"))
    return h.hexdigest()


def _encode_stdin(mode: str, source: str, second: str | None) -> bytes:
    if mode == MODE_AST_DIFF:
        if second is None:
            raise ValueError("ast-diff requires a second source")
        return json.dumps({"before": source, "after": second}).encode("utf-8")
    return source.encode("utf-8")


class SubprocessAnalyzer:
    """Invoke the analyzer executable through the bounded command runner."""

    def __init__(
        self,
        workdir: Path,
        python: str = sys.executable,
        module: str = "mera_analyzer",
        allowlist: frozenset[str] | None = None,
        timeout: float = ANALYZER_TIMEOUT,
        output_cap: int = DEFAULT_OUTPUT_CAP,
    ) -> None:
        self.workdir = workdir
        self.python = python
        self.module = module
        self.allowlist = allowlist
        self.timeout = timeout
        self.output_cap = output_cap

    def analyze(self, mode: str, source: str, second: str | None = None) -> AnalyzerResponse:
        if mode not in MODES:
            raise ValueError(f"unknown analyzer mode {mode!r}")
        kwargs = {}
        if self.allowlist is not None:
            kwargs["allowlist"] = self.allowlist
        cmd = CommandSpec(
            program=self.python,
            args=("-m", self.module, "--mode", mode),
            workdir=self.workdir,
            timeout=self.timeout,
            output_cap=self.output_cap,
            **kwargs,
        )
        try:
            result = run_bounded_command(cmd, stdin_data=_encode_stdin(mode, source, second))
        except CommandError as exc:
            raise AnalyzerUnavailable(str(exc)) from exc
        try:
            doc = json.loads(result.stdout)
        except json.JSONDecodeError as exc:
            raise AnalyzerUnavailable(
                f"analyzer emitted non-JSON output (exit {result.exit_status}): "
                f"{result.stdout[:200]!r} / {result.stderr[:200]!r}"
            ) from exc
        return AnalyzerResponse.from_document(doc)


class RecordedAnalyzer:
    """Replay analyzer responses from a JSONL recording file.

    Each line is ``{"key": ..., "mode": ..., "response": {...}}`` where the
    key is :func:`request_key` of the original request. Unknown requests
    raise :class:`AnalyzerUnavailable`, which keeps playback strict.
    """

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._responses: dict[str, dict] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                self._responses[entry["key"]] = entry["response"]

    def __len__(self) -> int:
        return len(self._responses)

    def analyze(self, mode: str, source: str, second: str | None = None) -> AnalyzerResponse:
        key = request_key(mode, source, second)
        doc = self._responses.get(key)
        if doc is None:
            raise AnalyzerUnavailable(
                f"no recorded response for mode={mode} key={key}"
            )
        return AnalyzerResponse.from_document(doc)


class RecordingAnalyzer:
    """Wrap a live analyzer and append every (request, response) to a file."""

    def __init__(self, inner, path: str | Path) -> None:
        self.inner = inner
        self.path = Path(path)
        self._seen: set[str] = set()
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    self._seen.add(json.loads(line)["key"])

    def analyze(self, mode: str, source: str, second: str | None = None) -> AnalyzerResponse:
        response = self.inner.analyze(mode, source, second)
        key = request_key(mode, source, second)
        if key not in self._seen:
            self._seen.add(key)
            entry = {"key": key, "mode": mode, "response": response.to_document()}
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return response
