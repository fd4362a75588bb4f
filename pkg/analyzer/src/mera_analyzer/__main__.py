"""Subprocess entry point: mode as an argument, source on stdin, JSON out.

Exactly one JSON document is written to stdout. A parse failure yields
``ok: false`` with the error message and a nonzero exit status; protocol
misuse (bad mode, malformed diff input) exits with a distinct status.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import (
    SCHEMA_ID,
    canonical_dumps,
    extract_features,
    extract_units,
    find_undefined_names,
    node_kind_diff,
)

EXIT_OK = 0
EXIT_PARSE_FAILURE = 2
EXIT_PROTOCOL_ERROR = 3

MODES = ("features", "undefined-names", "units", "canonical-dump", "ast-diff")


def _respond(mode: str, ok: bool, payload: dict | None = None, error: str = "") -> None:
    document = {
        "schema": SCHEMA_ID,
        "ok": ok,
        "mode": mode,
        "payload": payload or {},
        "error": error,
    }
    sys.stdout.write(json.dumps(document, sort_keys=True))
    sys.stdout.write("\n")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="mera-analyzer")
    parser.add_argument("--mode", required=True, choices=MODES)
    args = parser.parse_args(argv)

    raw = sys.stdin.read()
    if args.mode == "ast-diff":
        try:
            pair = json.loads(raw)
            before, after = pair["before"], pair["after"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            _respond(args.mode, False, error=f"bad diff input: {exc}")
            return EXIT_PROTOCOL_ERROR
        try:
            return_payload = node_kind_diff(before, after)
        except SyntaxError as exc:
            _respond(args.mode, False, error=f"parse failure: {exc}")
            return EXIT_PARSE_FAILURE
        _respond(args.mode, True, return_payload)
        return EXIT_OK

    handlers = {
        "features": extract_features,
        "undefined-names": lambda src: {"names": find_undefined_names(src)},
        "units": extract_units,
        "canonical-dump": canonical_dumps,
    }
    try:
        payload = handlers[args.mode](raw)
    except SyntaxError as exc:
        _respond(args.mode, False, error=f"parse failure: {exc}")
        return EXIT_PARSE_FAILURE
    except RecursionError as exc:
        _respond(args.mode, False, error=f"source too deeply nested: {exc}")
        return EXIT_PARSE_FAILURE
    _respond(args.mode, True, payload)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
