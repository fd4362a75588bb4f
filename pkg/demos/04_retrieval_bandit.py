"""Watch the retrieval bandit learn which evidence pays off in which state.

Synthetic environment: retrieving a failure-matched episode helps a lot when
the previous attempt failed at runtime, and retrieving nothing is best on a
fresh task. The bandit sees only the 16-dimensional context and the shaped
reward, and its selection frequencies shift accordingly.
"""

import random

from mera.bandit import (
    AttemptContext,
    LinUcbPolicy,
    RetrievalAction,
    build_features,
)
from mera.validation import CheckResult, Outcome, Stage, ValidationReport


def runtime_failure_report() -> ValidationReport:
    return ValidationReport.from_checks(
        (
            CheckResult(Stage.SYNTAX, Outcome.PASSED),
            CheckResult(Stage.UNDEFINED_NAME, Outcome.PASSED),
            CheckResult(Stage.SPEC_CONTRACT, Outcome.PASSED),
            CheckResult(Stage.IMPORT, Outcome.PASSED),
            CheckResult(Stage.RUNTIME, Outcome.FAILED, "RuntimeError: boom"),
        )
    )


def payoff(rng: random.Random, fresh: bool, action: RetrievalAction) -> float:
    """Noisy synthetic reward: context-dependent best actions."""
    if fresh:
        base = 0.6 if action is RetrievalAction.NONE else 0.2
    else:
        base = 0.7 if action is RetrievalAction.ONE_FAILURE_MATCH else 0.25
    return max(-1.0, min(1.0, base + rng.gauss(0.0, 0.1)))


def main() -> None:
    rng = random.Random(7)
    policy = LinUcbPolicy(ridge=1.0, exploration=0.6)
    fresh_phi = build_features(AttemptContext(0, 3))
    retry_phi = build_features(
        AttemptContext(1, 3, prev_report=runtime_failure_report(), edit_mode=True)
    )

    counts = {"fresh": {}, "retry": {}}
    for step in range(400):
        fresh = step % 2 == 0
        phi = fresh_phi if fresh else retry_phi
        action = policy.select(phi)
        policy.update(action, phi, payoff(rng, fresh, action), weight=1.0)
        bucket = counts["fresh" if fresh else "retry"]
        bucket[action.name] = bucket.get(action.name, 0) + 1

    for context in ("fresh", "retry"):
        print(f"{context} context selections over 200 pulls:")
        ranked = sorted(counts[context].items(), key=lambda kv: -kv[1])
        for name, n in ranked[:4]:
            print(f"  {name:<22} {n:>4}  {'#' * (n // 5)}")
        print()

    print("learned utilities (theta^T phi) per context:")
    for context, phi in (("fresh", fresh_phi), ("retry", retry_phi)):
        import numpy as np

        scores = {
            action.name: float(policy.arms[action].theta_hat() @ np.asarray(phi))
            for action in (RetrievalAction.NONE, RetrievalAction.ONE_FAILURE_MATCH)
        }
        print(f"  {context}: {scores}")


if __name__ == "__main__":
    main()
