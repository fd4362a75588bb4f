#!/usr/bin/env python3
"""Regenerate committed test data.

Writes the scripted end-to-end suite (tasks, response scripts, suite file)
under tests/data/e2e/ and records real analyzer responses for every source
the test suite touches into tests/data/analyzer_recordings.jsonl. Requires
both packages installed (pip install -e . && pip install -e analyzer/).

Run from the repository root:

    python3 scripts/refresh_test_data.py
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import fixture_sources  # noqa: E402

from mera.analysis import (  # noqa: E402
    MODE_AST_DIFF,
    MODE_CANONICAL_DUMP,
    MODE_FEATURES,
    MODE_UNDEFINED_NAMES,
    MODE_UNITS,
    RecordingAnalyzer,
    SubprocessAnalyzer,
)
from mera.harness import load_suite, run_phase  # noqa: E402

DATA_DIR = ROOT / "tests" / "data"
E2E_DIR = DATA_DIR / "e2e"
RECORDINGS = DATA_DIR / "analyzer_recordings.jsonl"

SINGLE_SOURCE_MODES = (
    MODE_FEATURES,
    MODE_UNDEFINED_NAMES,
    MODE_UNITS,
    MODE_CANONICAL_DUMP,
)

# ---------------------------------------------------------------------------
# Task definitions

Q_LEARNING_BEHAVIOR_TEST = """\
from algorithm import q_learning_update

q = {(0, 0): 0.0, (0, 1): 0.5, (1, 0): 1.0, (1, 1): 0.25}
value = q_learning_update(q, 0, 0, 1.0, 1, 0.5, 0.9)
expected = 0.0 + 0.5 * (1.0 + 0.9 * 1.0 - 0.0)
assert abs(value - expected) < 1e-9, f"expected {expected}, got {value}"
assert abs(q[(0, 0)] - expected) < 1e-9, "table entry not updated"
print("ok")
"""

SARSA_BEHAVIOR_TEST = """\
from algorithm import sarsa_update

q = {(0, 0): 0.2, (1, 1): 0.6}
value = sarsa_update(q, 0, 0, 1.0, 1, 1, 0.5, 0.9)
expected = 0.2 + 0.5 * (1.0 + 0.9 * 0.6 - 0.2)
assert abs(value - expected) < 1e-9, f"expected {expected}, got {value}"
assert abs(q[(0, 0)] - expected) < 1e-9, "table entry not updated"
print("ok")
"""

VALUE_ITERATION_BEHAVIOR_TEST = """\
from algorithm import value_iteration

transitions = {0: 1, 1: 2, 2: 2}
rewards = {0: 0.0, 1: 1.0, 2: 0.5}
result = value_iteration(transitions, rewards, 0.5, 12)

values = {state: 0.0 for state in transitions}
for _ in range(12):
    values = {
        state: rewards[state] + 0.5 * values[transitions[state]]
        for state in transitions
    }
for state in transitions:
    assert abs(result[state] - values[state]) < 1e-9, (
        f"state {state}: expected {values[state]}, got {result[state]}"
    )
print("ok")
"""

TASKS = {
    "q_learning": {
        "id": "q_learning",
        "family": "q-learning",
        "request": (
            "Implement tabular Q-learning in a single Python file named "
            "algorithm.py. Define best_next_value(q, next_state) returning the "
            "largest stored value for next_state in the dict q keyed by "
            "(state, action) tuples, 0.0 when the state is unseen, and "
            "q_learning_update(q, state, action, reward, next_state, alpha, gamma) "
            "applying one tabular Q-learning update to q[(state, action)] and "
            "returning the updated value."
        ),
        "stages": ["SYNTAX", "UNDEFINED_NAME", "SPEC_CONTRACT", "IMPORT", "RUNTIME", "BEHAVIOR"],
        "interface": {
            "functions": [
                {"name": "q_learning_update", "arity": 7},
                {"name": "best_next_value", "arity": 2},
            ]
        },
        "commands": {"BEHAVIOR": ["{python}", "behavior_test.py"]},
        "support_files": {"behavior_test.py": Q_LEARNING_BEHAVIOR_TEST},
        "attempt_budget": 3,
    },
    "sarsa": {
        "id": "sarsa",
        "family": "sarsa",
        "request": (
            "Implement tabular SARSA in a single Python file named algorithm.py. "
            "Define sarsa_update(q, state, action, reward, next_state, "
            "next_action, alpha, gamma) applying one on-policy update to "
            "q[(state, action)], using q[(next_state, next_action)] (0.0 when "
            "unseen) as the bootstrap value, and returning the updated value."
        ),
        "stages": ["SYNTAX", "UNDEFINED_NAME", "SPEC_CONTRACT", "IMPORT", "RUNTIME", "BEHAVIOR"],
        "interface": {"functions": [{"name": "sarsa_update", "arity": 8}]},
        "commands": {"BEHAVIOR": ["{python}", "behavior_test.py"]},
        "support_files": {"behavior_test.py": SARSA_BEHAVIOR_TEST},
        "attempt_budget": 3,
    },
    "value_iteration": {
        "id": "value_iteration",
        "family": "value-iteration",
        "request": (
            "Implement value iteration for a deterministic chain in a single "
            "Python file named algorithm.py. Define value_iteration(transitions, "
            "rewards, gamma, iterations) where transitions maps each state to its "
            "successor; starting from all-zero values, perform the given number "
            "of synchronous sweeps of V[s] = rewards[s] + gamma * V_prev[t[s]] "
            "and return the final dict of state values."
        ),
        "stages": ["SYNTAX", "UNDEFINED_NAME", "SPEC_CONTRACT", "IMPORT", "RUNTIME", "BEHAVIOR"],
        "interface": {"functions": [{"name": "value_iteration", "arity": 4}]},
        "commands": {"BEHAVIOR": ["{python}", "behavior_test.py"]},
        "support_files": {"behavior_test.py": VALUE_ITERATION_BEHAVIOR_TEST},
        "attempt_budget": 3,
    },
}

# ---------------------------------------------------------------------------
# Candidate variants

Q_PASS = """\
def best_next_value(q, next_state):
    values = [value for (state, action), value in q.items() if state == next_state]
    if not values:
        return 0.0
    return max(values)


def q_learning_update(q, state, action, reward, next_state, alpha, gamma):
    current = q.get((state, action), 0.0)
    target = reward + gamma * best_next_value(q, next_state)
    updated = current + alpha * (target - current)
    q[(state, action)] = updated
    return updated
"""

Q_SEMANTIC = """\
def best_next_value(q, next_state):
    values = [value for (state, action), value in q.items() if state == next_state]
    if not values:
        return 0.0
    return max(values)


def q_learning_update(q, state, action, reward, next_state, alpha, gamma):
    updated = reward + gamma * best_next_value(q, next_state)
    q[(state, action)] = updated
    return updated
"""

Q_SYNTAX = """\
def best_next_value(q, next_state:
    return 0.0

def q_learning_update(q, state, action, reward, next_state, alpha, gamma):
    return 0.0
"""

Q_UNDEFINED = """\
def best_next_value(q, next_state):
    values = [value for (state, action), value in q.items() if state == next_state]
    if not values:
        return 0.0
    return max(values)


def q_learning_update(q, state, action, reward, next_state, alpha, gamma):
    current = q.get((state, action), 0.0)
    target = reward + gamma * discounted_lookahead(q, next_state)
    updated = current + alpha * (target - current)
    q[(state, action)] = updated
    return updated
"""

Q_RUNTIME = Q_PASS + """\

if __name__ == "__main__":
    raise RuntimeError("smoke run crashed")
"""

Q_TYPE = Q_PASS + """\

if __name__ == "__main__":
    total = "reward" + 1
"""

SARSA_PASS = """\
def sarsa_update(q, state, action, reward, next_state, next_action, alpha, gamma):
    current = q.get((state, action), 0.0)
    target = reward + gamma * q.get((next_state, next_action), 0.0)
    updated = current + alpha * (target - current)
    q[(state, action)] = updated
    return updated
"""

SARSA_SEMANTIC = """\
def sarsa_update(q, state, action, reward, next_state, next_action, alpha, gamma):
    current = q.get((state, action), 0.0)
    target = reward + q.get((next_state, next_action), 0.0)
    updated = current + alpha * (target - current)
    q[(state, action)] = updated
    return updated
"""

SARSA_RUNTIME = SARSA_PASS + """\

if __name__ == "__main__":
    raise RuntimeError("smoke run crashed")
"""

SARSA_IMPORT = """\
import nonexistent_dependency_xyz


def sarsa_update(q, state, action, reward, next_state, next_action, alpha, gamma):
    current = q.get((state, action), 0.0)
    target = reward + gamma * q.get((next_state, next_action), 0.0)
    updated = current + alpha * (target - current)
    q[(state, action)] = updated
    return updated
"""

SARSA_UNDEFINED = """\
def sarsa_update(q, state, action, reward, next_state, next_action, alpha, gamma):
    current = q.get((state, action), 0.0)
    target = reward + gamma * bootstrap_value(q, next_state, next_action)
    updated = current + alpha * (target - current)
    q[(state, action)] = updated
    return updated
"""

VI_PASS = """\
def value_iteration(transitions, rewards, gamma, iterations):
    values = {state: 0.0 for state in transitions}
    for _ in range(iterations):
        updated = {}
        for state, next_state in transitions.items():
            updated[state] = rewards[state] + gamma * values[next_state]
        values = updated
    return values
"""

VI_RUNTIME = VI_PASS + """\

if __name__ == "__main__":
    raise RuntimeError("smoke run crashed")
"""

VI_IMPORT = """\
import nonexistent_dependency_xyz


def value_iteration(transitions, rewards, gamma, iterations):
    values = {state: 0.0 for state in transitions}
    for _ in range(iterations):
        updated = {}
        for state, next_state in transitions.items():
            updated[state] = rewards[state] + gamma * values[next_state]
        values = updated
    return values
"""

CANDIDATES: dict[tuple[str, str], str] = {
    ("q_learning", "pass"): Q_PASS,
    ("q_learning", "semantic"): Q_SEMANTIC,
    ("q_learning", "syntax"): Q_SYNTAX,
    ("q_learning", "undefined"): Q_UNDEFINED,
    ("q_learning", "runtime"): Q_RUNTIME,
    ("q_learning", "type"): Q_TYPE,
    ("sarsa", "pass"): SARSA_PASS,
    ("sarsa", "semantic"): SARSA_SEMANTIC,
    ("sarsa", "runtime"): SARSA_RUNTIME,
    ("sarsa", "import"): SARSA_IMPORT,
    ("sarsa", "undefined"): SARSA_UNDEFINED,
    ("value_iteration", "pass"): VI_PASS,
    ("value_iteration", "runtime"): VI_RUNTIME,
    ("value_iteration", "import"): VI_IMPORT,
}

CLIENT_ERROR = "CLIENT_ERROR"

# (condition, task) -> attempt plans per repeat. The shape mirrors the hard
# repeated phase: the full controller passes 8 of 9 runs with one residual
# runtime failure; the baseline and the guidance arm pass none, and one
# guidance run dies with a client-level error and is retained as a failure.
PLAN: dict[str, dict[str, list]] = {
    "refine": {
        "q_learning": [
            ["semantic", "semantic", "semantic"],
            ["type", "type", "type"],
            ["semantic", "semantic", "semantic"],
        ],
        "sarsa": [
            ["runtime", "runtime", "runtime"],
            ["semantic", "semantic", "semantic"],
            ["runtime", "runtime", "runtime"],
        ],
        "value_iteration": [
            ["runtime", "runtime", "runtime"],
            ["runtime", "runtime", "runtime"],
            ["runtime", "runtime", "runtime"],
        ],
    },
    "mera": {
        "q_learning": [
            ["pass"],
            ["syntax", "pass"],
            ["runtime", "runtime", "runtime"],
        ],
        "sarsa": [
            ["pass"],
            ["semantic", "pass"],
            ["undefined", "pass"],
        ],
        "value_iteration": [
            ["pass"],
            ["pass"],
            ["import", "pass"],
        ],
    },
    "grace": {
        "q_learning": [
            ["runtime", "runtime", "runtime"],
            ["runtime", "runtime", "runtime"],
            CLIENT_ERROR,
        ],
        "sarsa": [
            ["import", "import", "import"],
            ["runtime", "runtime", "runtime"],
            ["semantic", "semantic", "semantic"],
        ],
        "value_iteration": [
            ["runtime", "runtime", "runtime"],
            ["runtime", "runtime", "runtime"],
            ["runtime", "runtime", "runtime"],
        ],
    },
}

RESPONSE_TEMPLATE = """\
Here is the implementation, with the update rule kept in one place.

```python
{code}```

The table is mutated in place and the updated entry is returned.
"""

SUITE = {
    "name": "hard_repeated_scripted",
    "tasks": [
        "tasks/q_learning.json",
        "tasks/sarsa.json",
        "tasks/value_iteration.json",
    ],
    "repeats": 3,
    "conditions": ["refine", "mera", "grace"],
    "generator": {"kind": "scripted", "root": "scripts"},
    "analyzer": {"kind": "recorded", "path": "../analyzer_recordings.jsonl"},
    # Latency carries no information in a scripted replay and would make the
    # attempt logs hardware-dependent.
    "config": {"reward": {"latency_weight": 0.0}},
}


def write_e2e_data() -> None:
    if E2E_DIR.exists():
        shutil.rmtree(E2E_DIR)
    tasks_dir = E2E_DIR / "tasks"
    tasks_dir.mkdir(parents=True)
    for task_id, document in TASKS.items():
        (tasks_dir / f"{task_id}.json").write_text(
            json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    for condition, per_task in PLAN.items():
        for task_id, repeats in per_task.items():
            for repeat_index, attempts in enumerate(repeats, start=1):
                rep_dir = E2E_DIR / "scripts" / condition / task_id / f"rep{repeat_index}"
                rep_dir.mkdir(parents=True)
                if attempts == CLIENT_ERROR:
                    (rep_dir / ".gitkeep").write_text("", encoding="utf-8")
                    continue
                for attempt_index, variant in enumerate(attempts):
                    code = CANDIDATES[(task_id, variant)]
                    response = RESPONSE_TEMPLATE.format(code=code)
                    (rep_dir / f"{attempt_index:03d}.txt").write_text(
                        response, encoding="utf-8"
                    )
    (E2E_DIR / "suite.json").write_text(
        json.dumps(SUITE, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def record_unit_fixtures(recorder: RecordingAnalyzer) -> None:
    for source in fixture_sources.ALL_ANALYZED_SOURCES:
        for mode in SINGLE_SOURCE_MODES:
            recorder.analyze(mode, source)
    for before, after in fixture_sources.DIFF_PAIRS:
        recorder.analyze(MODE_AST_DIFF, before, after)


def record_e2e_suite(recorder_path: Path) -> None:
    suite = load_suite(E2E_DIR / "suite.json")
    suite.analyzer = {"kind": "recording", "path": str(recorder_path)}
    with tempfile.TemporaryDirectory() as tmp:
        summary = run_phase(suite, Path(tmp) / "out")
    rates = {c: s.to_dict()["successes"] for c, s in summary.conditions.items()}
    print(f"recording pass outcome: {rates}")
    expected = {"refine": 0, "mera": 8, "grace": 0}
    if rates != expected:
        raise SystemExit(f"scripted plan produced {rates}, expected {expected}")


def main() -> None:
    write_e2e_data()
    if RECORDINGS.exists():
        RECORDINGS.unlink()
    recorder = RecordingAnalyzer(
        SubprocessAnalyzer(workdir=ROOT), RECORDINGS
    )
    record_unit_fixtures(recorder)
    record_e2e_suite(RECORDINGS)
    count = sum(1 for _ in RECORDINGS.read_text(encoding="utf-8").splitlines())
    print(f"wrote {count} analyzer recordings to {RECORDINGS}")


if __name__ == "__main__":
    main()
