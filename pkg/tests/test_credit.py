from __future__ import annotations

import random

import pytest

from mera.bandit import FEATURE_DIM, RetrievalAction
from mera.credit import (
    CreditConfig,
    DispatchRecord,
    TraceStep,
    dispatch_delayed_credit,
    td_delta,
)

CFG = CreditConfig(
    discount=0.9, trace_decay=0.8, learning_rate=0.5, clip_bound=1.0, max_weight=0.5
)


def make_step(i: int, reward: float, attributable: bool = True, decoding=None) -> TraceStep:
    phi = tuple([1.0] + [0.0] * (FEATURE_DIM - 1))
    return TraceStep(i, phi, RetrievalAction.NONE, decoding, reward, attributable)


def reference_dispatch(cfg: CreditConfig, rewards: list[float]) -> list[tuple]:
    """Independent recurrence: plain loops over the eligibility updates."""
    out = []
    e = [0.0] * len(rewards)
    for j, r in enumerate(rewards):
        delta = max(-cfg.clip_bound, min(cfg.clip_bound, r))
        for i in range(j + 1):
            e[i] *= cfg.discount * cfg.trace_decay
        e[j] += 1.0
        for i in range(j + 1):
            if e[i] < cfg.eligibility_floor:
                continue
            w = min(cfg.max_weight, cfg.learning_rate * e[i])
            out.append((i, j, delta, e[i], w, w * delta))
    return out


def as_tuples(records: list[DispatchRecord]) -> list[tuple]:
    return [(r.source, r.target, r.delta, r.eligibility, r.weight, r.signal) for r in records]


def test_td_delta_clipping():
    assert td_delta(CFG, 0.3) == 0.3
    assert td_delta(CreditConfig(clip_bound=0.5), -1.0) == -0.5
    assert td_delta(CreditConfig(clip_bound=0.0), 0.7) == 0.0


def test_single_step_trajectory():
    records = dispatch_delayed_credit(CFG, [make_step(0, 1.0)])
    assert len(records) == 1
    record = records[0]
    assert record.eligibility == 1.0
    assert record.weight == 0.5
    assert record.signal == 0.5


def test_two_step_hand_trace():
    records = dispatch_delayed_credit(CFG, [make_step(0, 0.0), make_step(1, 1.0)])
    at_j1 = [r for r in records if r.target == 1]
    assert len(at_j1) == 2
    first, second = at_j1
    assert first.source == 0
    assert first.eligibility == pytest.approx(0.72)
    assert first.weight == pytest.approx(0.36)
    assert first.signal == pytest.approx(0.36)
    assert second.source == 1
    assert second.eligibility == 1.0
    assert second.weight == 0.5
    assert second.signal == 0.5


def test_matches_reference_recurrence_exactly():
    rng = random.Random(7)
    for _ in range(50):
        rewards = [rng.uniform(-1, 1) for _ in range(rng.randint(1, 5))]
        steps = [make_step(i, r) for i, r in enumerate(rewards)]
        assert as_tuples(dispatch_delayed_credit(CFG, steps)) == reference_dispatch(
            CFG, rewards
        )


def test_signal_bound_over_random_trajectories():
    rng = random.Random(11)
    for _ in range(200):
        cfg = CreditConfig(
            discount=rng.uniform(0, 1),
            trace_decay=rng.uniform(0, 1),
            learning_rate=rng.uniform(0, 2),
            clip_bound=rng.uniform(0, 2),
            max_weight=rng.uniform(0, 1),
            eligibility_floor=0.0,
        )
        steps = [make_step(i, rng.uniform(-1, 1)) for i in range(rng.randint(1, 6))]
        for record in dispatch_delayed_credit(cfg, steps):
            assert abs(record.signal) <= cfg.max_weight * cfg.clip_bound + 1e-12


def test_eligibility_decay_closed_form():
    cfg = CreditConfig(
        discount=0.9, trace_decay=0.8, learning_rate=0.1, max_weight=10.0,
        eligibility_floor=0.0,
    )
    steps = [make_step(i, 0.5) for i in range(5)]
    records = dispatch_delayed_credit(cfg, steps)
    decay = cfg.discount * cfg.trace_decay
    for record in records:
        if record.source == 0:
            assert record.eligibility == pytest.approx(decay ** record.target)


def test_floor_prunes_faded_steps():
    cfg = CreditConfig(
        discount=0.5, trace_decay=0.5, learning_rate=0.5, eligibility_floor=0.3
    )
    steps = [make_step(i, 1.0) for i in range(4)]
    records = dispatch_delayed_credit(cfg, steps)
    # After two decays eligibility is 0.0625 < 0.3: no record survives.
    assert all(r.eligibility >= cfg.eligibility_floor for r in records)
    sources_at_3 = [r.source for r in records if r.target == 3]
    assert sources_at_3 == [3]


def test_sinks_fire_only_when_attributable_or_decoding():
    bandit_calls = []
    decoding_calls = []
    steps = [
        make_step(0, 0.5, attributable=True, decoding=None),
        make_step(1, 0.5, attributable=False, decoding="default"),
    ]
    dispatch_delayed_credit(
        CFG,
        steps,
        bandit_sink=lambda a, phi, d, w: bandit_calls.append((a, d, w)),
        decoding_sink=lambda p, d, w: decoding_calls.append((p, d, w)),
    )
    assert all(call[0] is RetrievalAction.NONE for call in bandit_calls)
    # Step 0 is attributable and receives credit at targets 0 and 1.
    assert len(bandit_calls) == 2
    assert [p for p, _, _ in decoding_calls] == ["default"]


def test_empty_trajectory_yields_no_records():
    assert dispatch_delayed_credit(CFG, []) == []


def test_determinism():
    steps = [make_step(i, (-1) ** i * 0.4) for i in range(4)]
    first = as_tuples(dispatch_delayed_credit(CFG, steps))
    second = as_tuples(dispatch_delayed_credit(CFG, steps))
    assert first == second


def test_reward_out_of_range_rejected():
    with pytest.raises(ValueError):
        make_step(0, 1.5)


def test_config_validation():
    with pytest.raises(ValueError):
        CreditConfig(discount=1.2)
    with pytest.raises(ValueError):
        CreditConfig(max_weight=-0.1)


def test_value_estimator_flag_is_reserved():
    with pytest.raises(NotImplementedError):
        CreditConfig(use_value_estimator=True)
