"""Mine skills from an accepted program and derive repair-operator guidance.

Skills are canonicalized (docstrings stripped, locals renamed) before
hashing, so trivially renamed duplicates collide into one record. New skills
start quarantined and earn trust only when an attempt that saw them passes
validation. The guidance arm turns a before/after structural diff into an
untrusted prompt hint.

Requires both packages installed.
"""

import tempfile
from pathlib import Path

from mera.analysis import SubprocessAnalyzer
from mera.grace import GraceConfig, OperatorStore, compose_guidance, derive_operator
from mera.memory import AstFeatures, ComplexityBucket, FailureSignature, Fingerprint
from mera.skills import SkillLibrary, harvest_skills, record_skill_outcome, select_skills
from mera.validation import FailureClass

ACCEPTED = '''\
def moving_average(values, window):
    """Average over a sliding window."""
    out = []
    for i in range(len(values) - window + 1):
        out.append(sum(values[i:i + window]) / window)
    return out


def clamp(value, low, high):
    return max(low, min(high, value))
'''

RENAMED = '''\
def moving_average(numbers, span):
    result = []
    for j in range(len(numbers) - span + 1):
        result.append(sum(numbers[j:j + span]) / span)
    return result


def clamp(x, lo, hi):
    return max(lo, min(hi, x))
'''

CRASHY = '''\
def parse_row(row):
    return int(row["count"])
'''

GUARDED = '''\
def parse_row(row):
    try:
        return int(row["count"])
    except (KeyError, ValueError):
        return 0
'''


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        analyzer = SubprocessAnalyzer(workdir=Path(tmp))
        library = SkillLibrary(Path(tmp) / "skills.jsonl")

        harvest_skills(library, ACCEPTED, "time-series", analyzer)
        print(f"harvested {len(library)} skills from the accepted program")
        harvest_skills(library, RENAMED, "signal-processing", analyzer)
        print(f"after harvesting a renamed copy: still {len(library)} skills")
        for record in library.records:
            print(
                f"  {record.name:<16} hash={record.hash[:12]} "
                f"families={sorted(record.families)} quarantined={record.quarantined}"
            )

        query = Fingerprint(
            task_family="time-series",
            trigrams=(),
            ast=AstFeatures(),
            failure_signature=FailureSignature(),
            bucket=ComplexityBucket.LOW,
        )
        offered = select_skills(library, query, k=1)
        print(f"\noffered skill: {offered[0].name} (offer #{offered[0].offered})")
        record_skill_outcome(library, offered, accepted=1)
        lifted = library.get(offered[0].hash)
        print(f"attempt accepted -> quarantined={lifted.quarantined}, "
              f"succeeded={lifted.succeeded}/{lifted.offered}")

        print("\nrepair operator from a crash-fixing transition:")
        operator = derive_operator(
            analyzer, CRASHY, GUARDED,
            FailureClass.RUNTIME, FailureClass.UNKNOWN,
            progress_gain=2,
        )
        print(f"  added kinds: {dict(operator.added_kinds)}")
        print(f"  hint: {operator.hint_text}")

        store = OperatorStore(Path(tmp) / "operators.jsonl")
        store.add(operator)
        blocks, _ = compose_guidance(GraceConfig(), store, FailureClass.RUNTIME, [])
        print("\nguidance offered for the next RUNTIME failure:")
        for block in blocks:
            print(f"  {block}")


if __name__ == "__main__":
    main()
