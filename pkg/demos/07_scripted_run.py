"""Run one full repair loop against a scripted generator.

The script plays a runtime-crashing candidate, then a correct one. The loop
validates each materialized file, shapes rewards, updates the retrieval
bandit, persists episodes, and on acceptance harvests skills and dispatches
delayed credit. Everything lands in a run directory you can inspect.

Requires both packages installed.
"""

import json
import tempfile
from pathlib import Path

from mera.analysis import SubprocessAnalyzer
from mera.bandit import LinUcbPolicy
from mera.config import load_config
from mera.generator import ScriptedGenerator
from mera.memory import EpisodeStore
from mera.orchestrator import Condition, RunContext, run_task
from mera.skills import SkillLibrary
from mera.task import InterfaceContract, RequiredUnit, TaskSpec

BEHAVIOR_TEST = """\
from algorithm import add_numbers

assert add_numbers(2, 3) == 5
print("ok")
"""

CRASHING = """\
def add_numbers(a, b):
    return a + b

if __name__ == "__main__":
    raise RuntimeError("smoke run crashed")
"""

CORRECT = """\
def add_numbers(a, b):
    return a + b
"""


def respond(code: str) -> str:
    return f"Taking another pass at it.\n\n```python\n{code}```\n"


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(tmp)
        scripts = base / "scripts"
        scripts.mkdir()
        (scripts / "000.txt").write_text(respond(CRASHING), encoding="utf-8")
        (scripts / "001.txt").write_text(respond(CORRECT), encoding="utf-8")

        task = TaskSpec(
            id="add_numbers",
            request="write a function add_numbers(a, b) returning the sum",
            interface=InterfaceContract(units=(RequiredUnit("add_numbers", 2),)),
            commands={"BEHAVIOR": ["{python}", "behavior_test.py"]},
            support_files={"behavior_test.py": BEHAVIOR_TEST},
        )
        task.prepare_workspace(base / "workspace")

        run_dir = base / "run"
        ctx = RunContext(
            generator=ScriptedGenerator(scripts),
            analyzer=SubprocessAnalyzer(workdir=base / "workspace"),
            episode_store=EpisodeStore(run_dir / "episodes.jsonl"),
            skill_library=SkillLibrary(run_dir / "skills.jsonl"),
            policy=LinUcbPolicy(),
            config=load_config(),
            run_dir=run_dir,
        )
        result = run_task(task, Condition.MERA, ctx)

        print(f"accepted: {result.accepted} after {result.attempts_used} attempt(s)\n")
        for entry in result.attempt_log:
            print(
                f"attempt {entry['attempt']}: action={entry['retrieval_action']} "
                f"failure={entry['primary_failure']} reward={entry['reward']:+.3f} "
                f"accepted={entry['accepted']}"
            )

        print("\ndelayed-credit dispatch records:")
        for line in (run_dir / "trace.jsonl").read_text().splitlines():
            record = json.loads(line)
            print(
                f"  source {record['source']} <- target {record['target']}: "
                f"signal {record['signal']:+.4f}"
            )

        print(f"\nskills mined from the accepted file: {len(ctx.skill_library)}")
        print(f"episodes persisted: {len(ctx.episode_store)}")
        print(f"run artifacts under: prompts/ responses/ candidates/ reports/")


if __name__ == "__main__":
    main()
