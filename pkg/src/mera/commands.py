"""Bounded subprocess execution: allowlist, wall-clock timeout, output truncation.

Every external command the controller runs (validation stages, the analyzer
subprocess) goes through :func:`run_bounded_command`. Arguments are passed as
an explicit list, never through a shell.
"""

from __future__ import annotations

import os
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

TRUNCATION_MARKER = "\n...[output truncated]"

DEFAULT_TIMEOUT = 120.0
DEFAULT_OUTPUT_CAP = 16384

ALLOWLIST_ENV_VAR = "MERA_CMD_ALLOWLIST"

# Programs permitted when no allowlist file is configured. The interpreter
# basename is included so workflows run under e.g. "python3.10".
_BUILTIN_ALLOWLIST = frozenset({"python", "python3", Path(sys.executable).name})


class CommandError(Exception):
    """Base class for bounded-runner failures."""


class DisallowedCommand(CommandError):
    """Program is not on the configured allowlist."""


class CommandTimeout(CommandError):
    """Wall-clock limit exceeded before the command finished."""


class SpawnFailure(CommandError):
    """Program could not be started (missing binary, bad workdir)."""


def load_allowlist(path: str | os.PathLike[str] | None = None) -> frozenset[str]:
    """Load the command allowlist.

    Resolution order: explicit ``path`` argument, the ``MERA_CMD_ALLOWLIST``
    environment variable, then the built-in default set. The file format is
    one program name per line; blank lines and ``#`` comments are ignored.
    """
    if path is None:
        path = os.environ.get(ALLOWLIST_ENV_VAR) or None
    if path is None:
        return _BUILTIN_ALLOWLIST
    names = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            names.add(line)
    return frozenset(names)


@dataclass(frozen=True)
class CommandSpec:
    """One allowlisted command with its execution bounds.

    ``program`` is checked against the allowlist by exact name or basename,
    so both ``python3`` and ``/usr/bin/python3`` are accepted when
    ``python3`` is listed.
    """

    program: str
    args: tuple[str, ...]
    workdir: Path
    timeout: float = DEFAULT_TIMEOUT
    output_cap: int = DEFAULT_OUTPUT_CAP
    allowlist: frozenset[str] = field(default=_BUILTIN_ALLOWLIST)

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.output_cap < 0:
            raise ValueError("output_cap must be nonnegative")


@dataclass(frozen=True)
class CommandResult:
    exit_status: int
    stdout: str
    stderr: str
    duration: float

    @property
    def combined_output(self) -> str:
        if self.stdout and self.stderr:
            return self.stdout + "\n" + self.stderr
        return self.stdout or self.stderr


def _truncate(data: bytes, cap: int) -> str:
    """Decode and cap one stream; a marker is appended past the cap."""
    if len(data) <= cap:
        return data.decode("utf-8", errors="replace")
    return data[:cap].decode("utf-8", errors="replace") + TRUNCATION_MARKER


def run_bounded_command(cmd: CommandSpec, stdin_data: bytes | None = None) -> CommandResult:
    """Run ``cmd`` with no shell, a wall-clock timeout, and capped capture.

    The captured payload of each stream never exceeds ``cmd.output_cap``
    bytes and the two streams together never exceed the cap either; truncated
    streams end with :data:`TRUNCATION_MARKER`.

    Raises:
        DisallowedCommand: program not on the allowlist.
        CommandTimeout: the wall clock limit elapsed (the process is killed).
        SpawnFailure: the program could not be started.
    """
    name = Path(cmd.program).name
    if cmd.program not in cmd.allowlist and name not in cmd.allowlist:
        raise DisallowedCommand(f"program {cmd.program!r} is not allowlisted")

    argv = [cmd.program, *cmd.args]
    # Candidates are rewritten in place between attempts; a stale bytecode
    # cache surviving a rewrite would let a behavior check import the
    # previous attempt's module.
    env = dict(os.environ, PYTHONDONTWRITEBYTECODE="1")
    start = time.monotonic()
    try:
        proc = subprocess.run(
            argv,
            input=stdin_data,
            cwd=cmd.workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            timeout=cmd.timeout,
            shell=False,
            env=env,
        )
    except subprocess.TimeoutExpired as exc:
        raise CommandTimeout(
            f"{cmd.program} exceeded {cmd.timeout:g}s wall-clock limit"
        ) from exc
    except (FileNotFoundError, NotADirectoryError, PermissionError) as exc:
        raise SpawnFailure(f"could not start {cmd.program!r}: {exc}") from exc
    duration = time.monotonic() - start

    stdout = _truncate(proc.stdout or b"", cmd.output_cap)
    stderr_budget = max(0, cmd.output_cap - min(len(proc.stdout or b""), cmd.output_cap))
    stderr = _truncate(proc.stderr or b"", stderr_budget)
    return CommandResult(proc.returncode, stdout, stderr, duration)
