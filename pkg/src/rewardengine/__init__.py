"""Program-analysis reward engine for code generation.

Scores candidate programs along two axes: static detectors for security and
maintainability defects, and a sandboxed unit-test harness for functional
correctness. A hybrid reward combines both for RL trainer consumption.
"""

from rewardengine.tasks import (
    CandidateProgram,
    Fixture,
    TaskSpec,
    UnitTest,
    load_candidates,
    load_task_corpus,
)
from rewardengine.reward import (
    RewardBreakdown,
    RewardConfig,
    function_reward,
    hybrid_reward,
    normalize_batch,
    quality_reward,
)

__all__ = [
    "CandidateProgram",
    "Fixture",
    "TaskSpec",
    "UnitTest",
    "load_candidates",
    "load_task_corpus",
    "RewardBreakdown",
    "RewardConfig",
    "function_reward",
    "hybrid_reward",
    "normalize_batch",
    "quality_reward",
]
