"""Validation-gated repair controller for a frozen code generator.

The controller wraps an external generator it never tunes: it selects which
episodic memories and mined skills enter each prompt (a LinUCB contextual
bandit over the attempt state), validates every candidate through a
fail-fast pipeline whose report alone decides acceptance, converts outcomes
into bounded shaped rewards, and propagates delayed credit backward through
the repair trajectory with eligibility traces.
"""

from .bandit import (
    AttemptContext,
    FeatureVector,
    LinUcbArm,
    LinUcbPolicy,
    RetrievalAction,
    build_features,
    select_action,
    ucb_score,
    update_arm,
)
from .commands import CommandSpec, run_bounded_command
from .config import ControllerConfig, load_config
from .credit import CreditConfig, DispatchRecord, TraceStep, dispatch_delayed_credit, td_delta
from .generator import HttpGenerator, ScriptedGenerator
from .grace import GraceConfig, RepairOperator, consolidation_gate, operator_eligibility
from .harness import PhaseSummary, load_suite, run_phase, summarize_failures, wilson_interval
from .memory import (
    AstFeatures,
    EpisodeRecord,
    EpisodeStore,
    Fingerprint,
    RetrievalMode,
    SimilarityWeights,
    compute_fingerprint,
    retrieve,
    similarity,
    token_trigrams,
)
from .orchestrator import Condition, RunContext, TaskResult, compose_prompt, extract_code, run_task
from .rewards import RewardConfig, pseudo_success, shaped_reward
from .skills import SkillLibrary, SkillRecord, harvest_skills, select_skills, skill_hash
from .task import TaskSpec, load_task
from .validation import (
    CheckResult,
    FailureClass,
    JudgeVerdict,
    Outcome,
    Stage,
    ValidationReport,
    acceptance,
    run_pipeline,
    stage_cost,
    validator_pass,
)

__version__ = "0.1.0"
