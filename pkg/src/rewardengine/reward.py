"""Reward signals: binary quality reward, unit-test pass rate, and the
alpha-weighted hybrid with a -1 penalty for non-runnable candidates, plus
opt-in batch normalization for trainer consumption."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import TYPE_CHECKING

from rewardengine.frontend.syntax import SyntaxFailure, parse
from rewardengine.frontend.ssa import to_ssa_module
from rewardengine.tasks import MAINTAINABILITY, SECURITY, CandidateProgram, TaskSpec

if TYPE_CHECKING:
    from rewardengine.detectors import DetectorRegistry
    from rewardengine.harness import ExecutionResult, ResourceLimits


@dataclass(frozen=True)
class RewardConfig:
    alpha: float = 0.5
    penalty: float = -1.0
    normalize: bool = False
    epsilon: float = 1e-8

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.penalty >= 0:
            raise ValueError(f"penalty must be negative, got {self.penalty}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass(frozen=True)
class RewardBreakdown:
    candidate_id: str
    r_quality: int
    r_function: float
    r_hybrid: float
    runnable: bool
    findings_count: int
    tests_passed: int
    tests_total: int
    normalized: float | None = None
    error: str | None = None

    def to_record(self) -> dict:
        return {
            "candidate_id": self.candidate_id,
            "r_quality": self.r_quality,
            "r_function": self.r_function,
            "r_hybrid": self.r_hybrid,
            "runnable": self.runnable,
            "findings_count": self.findings_count,
            "tests_passed": self.tests_passed,
            "tests_total": self.tests_total,
            "normalized": self.normalized,
            "error": self.error,
        }


def combine(r_quality: int, r_function: float, alpha: float) -> float:
    return alpha * r_quality + (1.0 - alpha) * r_function


def quality_reward(candidate: CandidateProgram, task: TaskSpec,
                   registry: "DetectorRegistry") -> tuple[int, int]:
    """(reward, findings_count). 1 iff the detector for the task's mode comes
    back clean. Caller must have checked that the candidate parses."""
    from rewardengine.detectors import detect
    from rewardengine.maintain import maintainability_verdict

    parsed = parse(candidate.source)
    if isinstance(parsed, SyntaxFailure):
        raise ValueError("quality_reward requires a parseable candidate")
    if task.mode == SECURITY:
        findings = detect(candidate, list(task.cwe_tags), registry, parsed=parsed)
    else:
        assert task.mode == MAINTAINABILITY
        findings = maintainability_verdict(parsed).findings
    return (1 if not findings else 0), len(findings)


def function_reward(execution: "ExecutionResult") -> float:
    """Unit-test pass rate, exact rational arithmetic before conversion."""
    outcomes = execution.outcomes
    if not outcomes:
        raise ValueError("function_reward requires at least one test outcome")
    passed = sum(1 for o in outcomes if o.status == "passed")
    return float(Fraction(passed, len(outcomes)))


def hybrid_reward(candidate: CandidateProgram, task: TaskSpec,
                  registry: "DetectorRegistry",
                  limits: "ResourceLimits | None" = None,
                  config: RewardConfig | None = None) -> RewardBreakdown:
    """Full scoring pipeline: parse -> (failure => penalty) -> detect and run
    tests -> combine. Harness infrastructure errors propagate; they are never
    silently converted into the penalty."""
    from rewardengine.harness import ResourceLimits, run_unit_tests

    config = config or RewardConfig()
    limits = limits or ResourceLimits()
    parsed = parse(candidate.source)
    if isinstance(parsed, SyntaxFailure):
        return RewardBreakdown(
            candidate_id=candidate.candidate_id, r_quality=0, r_function=0.0,
            r_hybrid=config.penalty, runnable=False, findings_count=0,
            tests_passed=0, tests_total=len(task.unit_tests),
            error=f"syntax error at {parsed.line}:{parsed.column}: {parsed.message}",
        )
    execution = run_unit_tests(candidate, task, limits)
    passed = sum(1 for o in execution.outcomes if o.status == "passed")
    if not execution.runnable:
        return RewardBreakdown(
            candidate_id=candidate.candidate_id, r_quality=0, r_function=0.0,
            r_hybrid=config.penalty, runnable=False, findings_count=0,
            tests_passed=passed, tests_total=len(execution.outcomes),
        )
    r_q, findings_count = quality_reward(candidate, task, registry)
    r_f = function_reward(execution)
    return RewardBreakdown(
        candidate_id=candidate.candidate_id, r_quality=r_q, r_function=r_f,
        r_hybrid=combine(r_q, r_f, config.alpha), runnable=True,
        findings_count=findings_count, tests_passed=passed,
        tests_total=len(execution.outcomes),
    )


def normalize_batch(breakdowns: list[RewardBreakdown],
                    config: RewardConfig | None = None) -> list[RewardBreakdown]:
    """(r - mean) / (std + epsilon) over the batch; r_hybrid is preserved."""
    if not breakdowns:
        raise ValueError("normalize_batch requires a non-empty batch")
    config = config or RewardConfig()
    rewards = [b.r_hybrid for b in breakdowns]
    mean = sum(rewards) / len(rewards)
    std = statistics.pstdev(rewards) if len(rewards) > 1 else 0.0
    return [replace(b, normalized=(b.r_hybrid - mean) / (std + config.epsilon))
            for b in breakdowns]
