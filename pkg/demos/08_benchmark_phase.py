"""Run a miniature benchmark phase and print the summary statistics.

Two conditions over one task with three repeats each: the baseline replays
always-failing scripts, the full controller recovers on its second attempt.
Success rates come with Wilson score intervals, which stay honest about how
little a handful of runs can claim.

Requires both packages installed.
"""

import json
import tempfile
from pathlib import Path

from mera.harness import load_suite, run_phase, wilson_interval

BEHAVIOR_TEST = """\
from algorithm import add_numbers

assert add_numbers(2, 3) == 5
print("ok")
"""

WRONG = "def add_numbers(a, b):\n    return a - b\n"
CORRECT = "def add_numbers(a, b):\n    return a + b\n"

TASK = {
    "id": "add_numbers",
    "family": "generic",
    "request": "write a function add_numbers(a, b) returning the sum",
    "stages": ["SYNTAX", "UNDEFINED_NAME", "SPEC_CONTRACT", "IMPORT", "RUNTIME", "BEHAVIOR"],
    "interface": {"functions": [{"name": "add_numbers", "arity": 2}]},
    "commands": {"BEHAVIOR": ["{python}", "behavior_test.py"]},
    "support_files": {"behavior_test.py": BEHAVIOR_TEST},
    "attempt_budget": 3,
}


def respond(code: str) -> str:
    return f"Attempt below.\n\n```python\n{code}```\n"


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp) / "suite"
        (base / "tasks").mkdir(parents=True)
        (base / "tasks" / "add_numbers.json").write_text(json.dumps(TASK))

        plans = {
            "refine": [respond(WRONG)] * 3,
            "mera": [respond(WRONG), respond(CORRECT)],
        }
        for condition, responses in plans.items():
            for repeat in (1, 2, 3):
                rep_dir = base / "scripts" / condition / "add_numbers" / f"rep{repeat}"
                rep_dir.mkdir(parents=True)
                for i, response in enumerate(responses):
                    (rep_dir / f"{i:03d}.txt").write_text(response)

        suite_doc = {
            "name": "mini_phase",
            "tasks": ["tasks/add_numbers.json"],
            "repeats": 3,
            "conditions": ["refine", "mera"],
            "generator": {"kind": "scripted", "root": "scripts"},
            "analyzer": {"kind": "subprocess"},
            "config": {"reward": {"latency_weight": 0.0}},
        }
        (base / "suite.json").write_text(json.dumps(suite_doc))

        summary = run_phase(load_suite(base / "suite.json"), Path(tmp) / "out")
        print(summary.render_table())

        print("\nper-task residual failures (non-passing runs only):")
        print(json.dumps(summary.per_task, indent=2, sort_keys=True))

        print("\nWilson intervals widen fast at small n:")
        for s, n in ((3, 3), (8, 9), (80, 90)):
            lo, hi = wilson_interval(s, n)
            print(f"  {s}/{n}: rate={s / n:.3f} CI=[{lo:.3f}, {hi:.3f}]")


if __name__ == "__main__":
    main()
