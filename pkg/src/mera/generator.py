"""Pluggable frozen-generator adapters.

The controller never mutates generator parameters; it only composes prompts
and reads back text. The scripted adapter replays a directory of numbered
response files and is the test seam for fully deterministic end-to-end runs.
"""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

GENERATOR_URL_ENV_VAR = "MERA_GENERATOR_URL"
GENERATOR_MODEL_ENV_VAR = "MERA_GENERATOR_MODEL"


class GeneratorUnreachable(Exception):
    """The generator could not produce a response; the run records a client error."""


@dataclass(frozen=True)
class DecodingProfile:
    name: str
    temperature: float
    top_p: float = 1.0


DECODING_PROFILES: dict[str, DecodingProfile] = {
    "conservative": DecodingProfile("conservative", 0.2),
    "default": DecodingProfile("default", 0.7),
    "exploratory": DecodingProfile("exploratory", 1.0, top_p=0.95),
}


class ScriptedGenerator:
    """Consume numbered response files from a directory, in order.

    Files sort lexicographically (``000.txt``, ``001.txt``, ...). Running out
    of scripts, or pointing at an empty directory, raises
    :class:`GeneratorUnreachable`, which doubles as the replayable stand-in
    for a client-level failure.
    """

    def __init__(self, script_dir: str | Path) -> None:
        self.script_dir = Path(script_dir)
        self._scripts = sorted(self.script_dir.glob("*.txt")) if self.script_dir.is_dir() else []
        self._cursor = 0

    def generate(self, prompt: str, profile: DecodingProfile | None = None) -> str:
        if self._cursor >= len(self._scripts):
            raise GeneratorUnreachable(
                f"no scripted response left in {self.script_dir} "
                f"(consumed {self._cursor})"
            )
        path = self._scripts[self._cursor]
        self._cursor += 1
        return path.read_text(encoding="utf-8")


class HttpGenerator:
    """Minimal HTTP adapter: POST the prompt, read back generated text.

    The endpoint and model come from the constructor or the environment.
    The request body is ``{"model": ..., "prompt": ..., "options": {...}}``
    and the response must be JSON with a ``response`` (or ``text``) field.
    """

    def __init__(
        self,
        endpoint: str | None = None,
        model: str | None = None,
        timeout: float = 240.0,
    ) -> None:
        self.endpoint = endpoint or os.environ.get(GENERATOR_URL_ENV_VAR, "")
        self.model = model or os.environ.get(GENERATOR_MODEL_ENV_VAR, "")
        self.timeout = timeout
        if not self.endpoint:
            raise ValueError("no generator endpoint configured")

    def generate(self, prompt: str, profile: DecodingProfile | None = None) -> str:
        options: dict = {}
        if profile is not None:
            options = {"temperature": profile.temperature, "top_p": profile.top_p}
        body = json.dumps(
            {"model": self.model, "prompt": prompt, "stream": False, "options": options}
        ).encode("utf-8")
        request = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, json.JSONDecodeError, OSError) as exc:
            raise GeneratorUnreachable(str(exc)) from exc
        text = payload.get("response", payload.get("text"))
        if not isinstance(text, str):
            raise GeneratorUnreachable("generator response carried no text field")
        return text


def make_generator(spec: str):
    """Build a generator from a CLI-style spec: ``scripted:<dir>`` or ``http``."""
    if spec.startswith("scripted:"):
        return ScriptedGenerator(spec.split(":", 1)[1])
    if spec == "http":
        return HttpGenerator()
    raise ValueError(f"unknown generator spec {spec!r}")
