"""Holistic corpus evaluation: functionality, quality, and joint pass rates.

The functionality metric requires ALL unit tests to pass, deliberately
stricter than the fractional training reward. Non-runnable candidates fail
both booleans.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

from rewardengine.detectors import DetectorRegistry
from rewardengine.frontend.syntax import SyntaxFailure, parse
from rewardengine.harness import PASSED, ResourceLimits, run_unit_tests
from rewardengine.maintain import maintainability_verdict
from rewardengine.reward import quality_reward
from rewardengine.tasks import CandidateProgram, TaskSpec

TABLE_TEXT = "table-text"
STRUCTURED = "structured"


@dataclass(frozen=True)
class TaskEval:
    task_id: str
    candidate_id: str | None
    func_pass: bool
    qual_pass: bool
    joint_pass: bool
    runnable: bool
    cwe_tags: tuple[int, ...]
    missing_candidate: bool = False

    def to_record(self) -> dict:
        return {
            "task_id": self.task_id,
            "candidate_id": self.candidate_id,
            "func_pass": self.func_pass,
            "qual_pass": self.qual_pass,
            "joint_pass": self.joint_pass,
            "runnable": self.runnable,
            "cwe_tags": [f"CWE-{c}" for c in self.cwe_tags],
            "missing_candidate": self.missing_candidate,
        }


@dataclass(frozen=True)
class EvalReport:
    per_task: tuple[TaskEval, ...]
    func_rate: float
    qual_rate: float
    joint_rate: float
    by_cwe: dict[int, tuple[float, float, float, int]]

    def __post_init__(self):
        assert self.joint_rate <= min(self.func_rate, self.qual_rate) + 1e-12


def _rate(flags: list[bool]) -> float:
    if not flags:
        return 0.0
    return float(Fraction(sum(flags), len(flags)))


def evaluate_task(task: TaskSpec, candidate: CandidateProgram | None,
                  registry: DetectorRegistry,
                  limits: ResourceLimits | None = None) -> TaskEval:
    if candidate is None:
        return TaskEval(task.task_id, None, False, False, False,
                        runnable=False, cwe_tags=task.cwe_tags,
                        missing_candidate=True)
    parsed = parse(candidate.source)
    if isinstance(parsed, SyntaxFailure):
        return TaskEval(task.task_id, candidate.candidate_id, False, False,
                        False, runnable=False, cwe_tags=task.cwe_tags)
    execution = run_unit_tests(candidate, task, limits)
    if not execution.runnable:
        return TaskEval(task.task_id, candidate.candidate_id, False, False,
                        False, runnable=False, cwe_tags=task.cwe_tags)
    func_pass = all(o.status == PASSED for o in execution.outcomes)
    r_q, _count = quality_reward(candidate, task, registry)
    qual_pass = r_q == 1
    return TaskEval(task.task_id, candidate.candidate_id, func_pass,
                    qual_pass, func_pass and qual_pass, runnable=True,
                    cwe_tags=task.cwe_tags)


def evaluate_corpus(tasks: list[TaskSpec], candidates: list[CandidateProgram],
                    registry: DetectorRegistry,
                    limits: ResourceLimits | None = None) -> EvalReport:
    """Single-sample protocol: one candidate per task. Tasks without a
    candidate count as all-fail and are flagged in the per-task records."""
    known = {t.task_id for t in tasks}
    for cand in candidates:
        if cand.task_id not in known:
            raise ValueError(f"candidate {cand.candidate_id!r} references "
                             f"unknown task {cand.task_id!r}")
    by_task: dict[str, CandidateProgram] = {}
    for cand in candidates:
        by_task.setdefault(cand.task_id, cand)

    per_task = [evaluate_task(t, by_task.get(t.task_id), registry, limits)
                for t in tasks]
    func_rate = _rate([e.func_pass for e in per_task])
    qual_rate = _rate([e.qual_pass for e in per_task])
    joint_rate = _rate([e.joint_pass for e in per_task])

    by_cwe: dict[int, tuple[float, float, float, int]] = {}
    cwes = sorted({c for e in per_task for c in e.cwe_tags})
    for cwe in cwes:
        rows = [e for e in per_task if cwe in e.cwe_tags]
        by_cwe[cwe] = (
            _rate([e.func_pass for e in rows]),
            _rate([e.qual_pass for e in rows]),
            _rate([e.joint_pass for e in rows]),
            len(rows),
        )
    return EvalReport(tuple(per_task), func_rate, qual_rate, joint_rate, by_cwe)


def render_report(report: EvalReport, format: str = TABLE_TEXT) -> str:
    if format == STRUCTURED:
        lines = [json.dumps(e.to_record()) for e in report.per_task]
        lines.append(json.dumps({
            "summary": True,
            "tasks": len(report.per_task),
            "func_rate": report.func_rate,
            "qual_rate": report.qual_rate,
            "joint_rate": report.joint_rate,
            "by_cwe": {
                f"CWE-{c}": {"func_rate": f, "qual_rate": q,
                             "joint_rate": j, "tasks": n}
                for c, (f, q, j, n) in report.by_cwe.items()
            },
        }))
        return "\n".join(lines) + "\n"
    if format != TABLE_TEXT:
        raise ValueError(f"unknown report format {format!r}")
    lines = [
        f"{'metric':<18}{'rate':>8}",
        f"{'func_rate':<18}{report.func_rate:>8.3f}",
        f"{'qual_rate':<18}{report.qual_rate:>8.3f}",
        f"{'joint_rate':<18}{report.joint_rate:>8.3f}",
    ]
    if report.by_cwe:
        lines.append("")
        lines.append(f"{'cwe':<10}{'tasks':>6}{'func':>8}{'qual':>8}{'joint':>8}")
        for cwe, (f, q, j, n) in report.by_cwe.items():
            lines.append(f"{'CWE-' + str(cwe):<10}{n:>6}{f:>8.3f}{q:>8.3f}{j:>8.3f}")
    return "\n".join(lines) + "\n"
