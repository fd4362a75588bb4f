"""Walk a few candidate programs through the fail-fast validation pipeline.

Each candidate is materialized into a scratch workspace and validated in
canonical stage order: syntax, undefined names, interface contract, import,
runtime, behavior. The pipeline stops at the first failure, so the report
shows exactly how deep each candidate survived.

Requires both packages installed:
    pip install -e . && pip install -e analyzer/
"""

import tempfile
from pathlib import Path

from mera.analysis import SubprocessAnalyzer
from mera.task import InterfaceContract, RequiredUnit, TaskSpec
from mera.validation import run_pipeline, stage_cost, validator_pass

BEHAVIOR_TEST = """\
from algorithm import add_numbers

assert add_numbers(2, 3) == 5, f"expected 5, got {add_numbers(2, 3)}"
print("ok")
"""

CANDIDATES = {
    "syntax error": "def add_numbers(a, b:\n    return a + b\n",
    "undefined name": "def add_numbers(a, b):\n    return combine(a, b)\n",
    "wrong arity": "def add_numbers(a, b, c):\n    return a + b + c\n",
    "bad import": "import no_such_module\n\ndef add_numbers(a, b):\n    return a + b\n",
    "wrong math": "def add_numbers(a, b):\n    return a - b\n",
    "correct": "def add_numbers(a, b):\n    return a + b\n",
}


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        task = TaskSpec(
            id="add_numbers",
            request="write a function add_numbers(a, b) returning the sum",
            interface=InterfaceContract(units=(RequiredUnit("add_numbers", 2),)),
            commands={"BEHAVIOR": ["{python}", "behavior_test.py"]},
            support_files={"behavior_test.py": BEHAVIOR_TEST},
        )
        workspace = Path(tmp) / "workspace"
        task.prepare_workspace(workspace)
        analyzer = SubprocessAnalyzer(workdir=workspace)

        for label, source in CANDIDATES.items():
            task.target_path.write_text(source, encoding="utf-8")
            report = run_pipeline(task, task.target_path, False, analyzer)
            stages = " -> ".join(
                f"{c.stage.value}:{c.outcome.value[0]}" for c in report.checks
            )
            print(f"{label:<16} {stages}")
            print(
                f"{'':<16} primary={report.primary_failure.value} "
                f"passed={report.passed_count}/{report.executed_count} "
                f"score={report.total_score} "
                f"stage_cost={stage_cost(report):.2f} "
                f"pass={validator_pass(report)}"
            )


if __name__ == "__main__":
    main()
