"""Trace delayed credit through a three-attempt repair trajectory.

The final attempt succeeds; eligibility traces carry a bounded share of that
terminal reward back to the earlier retrieval decisions that set it up.
Every delivered signal respects the max_weight * clip_bound ceiling.
"""

from mera.bandit import FEATURE_DIM, RetrievalAction
from mera.credit import CreditConfig, TraceStep, dispatch_delayed_credit


def main() -> None:
    cfg = CreditConfig(
        discount=0.9, trace_decay=0.8, learning_rate=0.5,
        clip_bound=1.0, max_weight=0.5,
    )
    phi = tuple([1.0] + [0.0] * (FEATURE_DIM - 1))
    rewards = [-0.2, 0.1, 1.0]  # two failures, then acceptance
    trajectory = [
        TraceStep(i, phi, RetrievalAction.ONE_FAILURE_MATCH, None, r, True)
        for i, r in enumerate(rewards)
    ]

    print("trajectory rewards:", rewards)
    print(f"signal ceiling: max_weight * clip_bound = {cfg.max_weight * cfg.clip_bound}")
    print()
    print(f"{'target j':>8} {'source i':>8} {'delta':>7} {'E_i':>7} {'w_ij':>6} {'signal':>8}")

    records = dispatch_delayed_credit(cfg, trajectory)
    for record in records:
        print(
            f"{record.target:>8} {record.source:>8} {record.delta:>7.3f} "
            f"{record.eligibility:>7.3f} {record.weight:>6.3f} {record.signal:>8.4f}"
        )

    print()
    total_by_source = {}
    for record in records:
        total_by_source[record.source] = total_by_source.get(record.source, 0.0) + record.signal
    print("net delivered signal per step (earlier steps earn a decayed share):")
    for source, total in total_by_source.items():
        print(f"  step {source}: {total:+.4f}")
    assert all(abs(r.signal) <= cfg.max_weight * cfg.clip_bound for r in records)


if __name__ == "__main__":
    main()
