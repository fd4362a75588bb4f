"""Explore the shaped-reward surface and its pseudo-success remapping.

The reward combines terminal success, partial validation progress, and
attempt/extraction/behavior/latency penalties, clipped once into [-1, 1].
The tables below show how each axis moves the signal with the default
coefficients.
"""

from mera.rewards import RewardConfig, pseudo_success, shaped_reward

CFG = RewardConfig()


def main() -> None:
    print("acceptance dominates: accepted vs best-possible failed attempt")
    accepted = shaped_reward(CFG, 1, 6, 0, 0, 0, 0.0)
    best_failed = shaped_reward(CFG, 0, 6, 0, 0, 0, 0.0)
    print(f"  accepted, first attempt: {accepted:+.3f}")
    print(f"  all checks passed but vetoed: {best_failed:+.3f}")

    print("\npartial progress per passed check (failed attempt, t=0):")
    for passed in range(7):
        value = shaped_reward(CFG, 0, passed, 0, 0, 0, 0.0)
        bar = "#" * int((value + 1) * 20)
        print(f"  p={passed}: {value:+.3f} {bar}")

    print("\nattempt index pressure (failed, p=3):")
    for attempt in range(3):
        value = shaped_reward(CFG, 0, 3, attempt, 0, 0, 0.0)
        print(f"  t={attempt}: {value:+.3f}")

    print("\nfailure-mode penalties at p=3, t=1:")
    base = shaped_reward(CFG, 0, 3, 1, 0, 0, 0.0)
    extraction = shaped_reward(CFG, 0, 0, 1, 1, 0, 0.0)
    behavior = shaped_reward(CFG, 0, 3, 1, 0, 1, 0.0)
    print(f"  clean failure:      {base:+.3f}")
    print(f"  extraction failure: {extraction:+.3f}")
    print(f"  behavior failure:   {behavior:+.3f}")

    print("\nlatency saturates at the horizon:")
    for duration in (0, 30, 60, 120, 600):
        value = shaped_reward(CFG, 0, 3, 0, 0, 0, duration)
        print(f"  d={duration:>4}s: {value:+.3f}")

    print("\npseudo-success remaps [-1, 1] onto [0, 1] for Beta-style learners:")
    for reward in (-1.0, -0.5, 0.0, 0.5, 1.0):
        print(f"  r={reward:+.1f} -> {pseudo_success(reward):.2f}")


if __name__ == "__main__":
    main()
